//! Tabletop scenes and builders for the four trial setups.
//!
//! All coordinates are millimetres on the table plane, origin at the table's
//! lower-left corner. Scenario files are a single JSON document:
//!
//! ```json
//! {
//!   "extent":  { "x_min": 0, "y_min": 0, "x_max": 1200, "y_max": 600 },
//!   "objects": [ { "object_id": "mug", "name": "mug", "shape": "cylinder",
//!                  "color": "white", "material": "plastic",
//!                  "x_mm": 150, "y_mm": 150, "tag": "04a1b2c3d4e5f6" } ],
//!   "regions": [ { "region_id": 1,
//!                  "bounds": { "x_min": 0, "y_min": 0, "x_max": 400, "y_max": 400 },
//!                  "tag": "08a1b2c3" } ]
//! }
//! ```
//!
//! `tag` on objects may be `null`. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rfmodel::{Material, TagPlacement};
use crate::tagdb::TagUid;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("setup must be 1..=4, got {0}")]
    UnknownSetup(u8),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.x_min, other.y_min) && self.contains(other.x_max, other.y_max)
    }

    /// Interior overlap; rectangles sharing only an edge do not overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x_min < other.x_max && other.x_min < self.x_max && self.y_min < other.y_max && other.y_min < self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    fn is_well_formed(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub object_id: String,
    pub name: String,
    pub shape: String,
    pub color: String,
    pub material: Material,
    pub x_mm: f64,
    pub y_mm: f64,
    pub tag: Option<TagUid>,
}

impl SceneObject {
    pub fn is_hole(&self) -> bool {
        self.shape.starts_with("box-hole")
    }

    pub fn is_disk(&self) -> bool {
        self.shape.starts_with("disk")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub region_id: u8,
    pub bounds: Rect,
    pub tag: TagUid,
}

impl Region {
    /// Where the region's tag sits: the middle of the region.
    pub fn tag_position(&self) -> (f64, f64) {
        self.bounds.center()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub extent: Rect,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub regions: Vec<Region>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.extent.is_well_formed() {
            return Err(invalid("extent", "min must be below max on both axes"));
        }
        let mut ids = BTreeSet::new();
        let mut tags = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            if !ids.insert(o.object_id.as_str()) {
                return Err(invalid(format!("{path}.object_id"), format!("duplicate object id {:?}", o.object_id)));
            }
            if !self.extent.contains(o.x_mm, o.y_mm) {
                return Err(invalid(path, "position outside the scene extent"));
            }
            if let Some(tag) = o.tag {
                if !tags.insert(tag) {
                    return Err(invalid(format!("{path}.tag"), format!("duplicate tag uid {tag}")));
                }
            }
        }
        let mut region_ids = BTreeSet::new();
        for (i, r) in self.regions.iter().enumerate() {
            let path = format!("regions[{i}]");
            if !(1..=8).contains(&r.region_id) || !region_ids.insert(r.region_id) {
                return Err(invalid(
                    format!("{path}.region_id"),
                    format!("region id {} must be unique and within 1..=8", r.region_id),
                ));
            }
            if !r.bounds.is_well_formed() || !self.extent.contains_rect(&r.bounds) {
                return Err(invalid(format!("{path}.bounds"), "bounds malformed or outside the extent"));
            }
            if let Some(j) = self.regions[..i].iter().position(|o| o.bounds.overlaps(&r.bounds)) {
                return Err(invalid(format!("{path}.bounds"), format!("overlaps regions[{j}]")));
            }
            if !tags.insert(r.tag) {
                return Err(invalid(format!("{path}.tag"), format!("duplicate tag uid {}", r.tag)));
            }
        }
        Ok(())
    }

    /// Every tag in the scene as the reader sees it. Region tags are taken to
    /// be mounted on the (wooden) table.
    pub fn tag_placements(&self) -> Vec<TagPlacement> {
        let objects = self
            .objects
            .iter()
            .filter_map(|o| o.tag.map(|uid| TagPlacement::new(uid, o.x_mm, o.y_mm, o.material)));
        let regions = self.regions.iter().map(|r| {
            let (x, y) = r.tag_position();
            TagPlacement::new(r.tag, x, y, Material::Wood)
        });
        objects.chain(regions).collect()
    }

    pub fn tag_count(&self) -> usize {
        self.objects.iter().filter(|o| o.tag.is_some()).count() + self.regions.len()
    }

    pub fn object(&self, object_id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    pub fn object_by_tag(&self, uid: &TagUid) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.tag.as_ref() == Some(uid))
    }

    pub fn region(&self, region_id: u8) -> Option<&Region> {
        self.regions.iter().find(|r| r.region_id == region_id)
    }

    /// Objects lying inside region `region_id`.
    pub fn objects_in_region(&self, region_id: u8) -> Vec<&SceneObject> {
        self.region(region_id)
            .map(|r| self.objects.iter().filter(|o| r.bounds.contains(o.x_mm, o.y_mm)).collect())
            .unwrap_or_default()
    }

    /// Regions ordered counterclockwise around the table centre, starting
    /// from the direction of +x.
    pub fn regions_ccw(&self) -> Vec<&Region> {
        let (cx, cy) = self.extent.center();
        let mut regions: Vec<&Region> = self.regions.iter().collect();
        regions.sort_by(|a, b| {
            let angle = |r: &Region| {
                let (x, y) = r.bounds.center();
                (y - cy).atan2(x - cx).rem_euclid(std::f64::consts::TAU)
            };
            angle(a).total_cmp(&angle(b)).then(a.region_id.cmp(&b.region_id))
        });
        regions
    }

    /// Relocates an object, e.g. a disk dropped into a hole.
    pub fn move_object(&mut self, object_id: &str, x_mm: f64, y_mm: f64) -> Result<(), SceneError> {
        if !self.extent.contains(x_mm, y_mm) {
            return Err(invalid(object_id, "target outside the scene extent"));
        }
        let obj = self
            .objects
            .iter_mut()
            .find(|o| o.object_id == object_id)
            .ok_or_else(|| invalid(object_id, "no such object"))?;
        obj.x_mm = x_mm;
        obj.y_mm = y_mm;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scene: Scene = serde_path_to_error::deserialize(de).map_err(|e| SceneError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scene::from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    scene.validate()?;
    let path = path.as_ref();
    fs::write(path, scene.to_json()).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// Fixed layout constants. Every tag is at least 150 mm from every other so a
// hand hovering over one never has a second in range.
const SLOT_JITTER_MM: f64 = 30.0;
const HOLE_ROW_Y_MM: f64 = 650.0;
const DISK_ROWS_Y_MM: [f64; 3] = [150.0, 300.0, 450.0];
const COLUMNS_X_MM: [f64; 3] = [300.0, 600.0, 900.0];
const REGION_SIZE_MM: f64 = 400.0;
const DISK_OFFSETS_MM: [(f64, f64); 3] = [(-120.0, -120.0), (120.0, -120.0), (0.0, 150.0)];

const SETUP1_OBJECTS: [(&str, &str, &str, Material); 8] = [
    ("mug", "cylinder", "white", Material::Plastic),
    ("shirt", "freeform", "red", Material::Fabric),
    ("book", "box", "blue", Material::Paper),
    ("spoon", "freeform", "brown", Material::Wood),
    ("toy car", "freeform", "yellow", Material::Plastic),
    ("scarf", "freeform", "green", Material::Fabric),
    ("notebook", "box", "black", Material::Paper),
    ("bowl", "hemisphere", "orange", Material::Wood),
];

pub const SETUP2_COLORS: [&str; 3] = ["red", "green", "blue"];
pub const SETUP3_POLYGONS: [&str; 3] = ["12gon", "14gon", "16gon"];
pub const SETUP4_LETTERS: [&str; 3] = ["A", "B", "C"];

struct UidSource {
    rng: ChaCha8Rng,
    used: BTreeSet<TagUid>,
}

impl UidSource {
    fn next(&mut self, len: usize) -> TagUid {
        loop {
            let mut bytes = vec![0u8; len];
            self.rng.fill(&mut bytes[..]);
            // NXP manufacturer byte for 7-byte UIDs; 4-byte random UIDs start 0x08.
            bytes[0] = if len == 7 { 0x04 } else { 0x08 };
            let uid = TagUid::new(&bytes).expect("valid uid length");
            if self.used.insert(uid) {
                return uid;
            }
        }
    }
}

/// Builds the scene for trial setup `n` (1..=4). `seed` fixes every random
/// choice: placements, tag uids and region numbering.
pub fn build_setup(n: u8, seed: u64) -> Result<Scene, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(n) << 56));
    let mut uids = UidSource {
        rng: ChaCha8Rng::seed_from_u64(rng.random()),
        used: BTreeSet::new(),
    };
    let scene = match n {
        1 => setup_objects(&mut rng, &mut uids),
        2 => setup_box(&mut rng, &mut uids, BoxKind::Colors),
        3 => setup_box(&mut rng, &mut uids, BoxKind::Polygons),
        4 => setup_regions(&mut rng, &mut uids),
        other => return Err(SceneError::UnknownSetup(other)),
    };
    debug_assert!(scene.validate().is_ok());
    Ok(scene)
}

fn setup_objects(rng: &mut ChaCha8Rng, uids: &mut UidSource) -> Scene {
    let mut slots: Vec<(f64, f64)> = [150.0, 450.0]
        .iter()
        .flat_map(|&y| [150.0, 450.0, 750.0, 1050.0].map(|x| (x, y)))
        .collect();
    slots.shuffle(rng);
    let objects = SETUP1_OBJECTS
        .iter()
        .zip(slots)
        .map(|(&(name, shape, color, material), (x, y))| SceneObject {
            object_id: name.replace(' ', "-"),
            name: name.into(),
            shape: shape.into(),
            color: color.into(),
            material,
            x_mm: tenth_mm(x + rng.random_range(-SLOT_JITTER_MM..=SLOT_JITTER_MM)),
            y_mm: tenth_mm(y + rng.random_range(-SLOT_JITTER_MM..=SLOT_JITTER_MM)),
            tag: Some(uids.next(7)),
        })
        .collect();
    Scene {
        extent: Rect::new(0.0, 0.0, 1200.0, 600.0),
        objects,
        regions: Vec::new(),
    }
}

fn tenth_mm(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

enum BoxKind {
    Colors,
    Polygons,
}

fn setup_box(rng: &mut ChaCha8Rng, uids: &mut UidSource, kind: BoxKind) -> Scene {
    let mut hole_order = [0usize, 1, 2];
    hole_order.shuffle(rng);
    let mut objects = Vec::with_capacity(12);
    for (slot, &g) in hole_order.iter().enumerate() {
        let (shape, color, name) = match kind {
            BoxKind::Colors => ("box-hole".to_owned(), SETUP2_COLORS[g], format!("{} hole", SETUP2_COLORS[g])),
            BoxKind::Polygons => (
                format!("box-hole-{}", SETUP3_POLYGONS[g]),
                "natural",
                format!("{} hole", SETUP3_POLYGONS[g]),
            ),
        };
        objects.push(SceneObject {
            object_id: format!("hole-{}", group_key(&kind, g)),
            name,
            shape,
            color: color.into(),
            material: Material::Wood,
            x_mm: COLUMNS_X_MM[slot],
            y_mm: HOLE_ROW_Y_MM,
            tag: Some(uids.next(7)),
        });
    }
    let mut groups: Vec<usize> = (0..3).flat_map(|g| [g; 3]).collect();
    groups.shuffle(rng);
    let slots = DISK_ROWS_Y_MM.iter().flat_map(|&y| COLUMNS_X_MM.map(|x| (x, y)));
    for (i, (g, (x, y))) in groups.into_iter().zip(slots).enumerate() {
        let (shape, color) = match kind {
            BoxKind::Colors => ("disk".to_owned(), SETUP2_COLORS[g]),
            BoxKind::Polygons => (format!("disk-{}", SETUP3_POLYGONS[g]), "natural"),
        };
        objects.push(SceneObject {
            object_id: format!("disk-{}", i + 1),
            name: format!("{} disk", group_key(&kind, g)),
            shape,
            color: color.into(),
            material: Material::Plastic,
            x_mm: x,
            y_mm: y,
            tag: Some(uids.next(7)),
        });
    }
    Scene {
        extent: Rect::new(0.0, 0.0, 1200.0, 800.0),
        objects,
        regions: Vec::new(),
    }
}

fn group_key(kind: &BoxKind, g: usize) -> &'static str {
    match kind {
        BoxKind::Colors => SETUP2_COLORS[g],
        BoxKind::Polygons => SETUP3_POLYGONS[g],
    }
}

/// Which hole a disk belongs in: colour for the colour box, polygon for the
/// shape box.
pub fn matching_key(obj: &SceneObject) -> &str {
    if let Some(p) = obj.shape.strip_prefix("box-hole-").or_else(|| obj.shape.strip_prefix("disk-")) {
        p
    } else {
        &obj.color
    }
}

fn setup_regions(rng: &mut ChaCha8Rng, uids: &mut UidSource) -> Scene {
    let mut numbers: Vec<u8> = (1..=8).collect();
    numbers.shuffle(rng);
    let mut regions = Vec::with_capacity(8);
    let mut objects = Vec::new();
    for (cell, &region_id) in numbers.iter().enumerate() {
        let (col, row) = ((cell % 4) as f64, (cell / 4) as f64);
        let bounds = Rect::new(
            col * REGION_SIZE_MM,
            row * REGION_SIZE_MM,
            (col + 1.0) * REGION_SIZE_MM,
            (row + 1.0) * REGION_SIZE_MM,
        );
        regions.push(Region {
            region_id,
            bounds,
            tag: uids.next(4),
        });
        let count = rng.random_range(2..=3);
        let mut offsets = DISK_OFFSETS_MM;
        offsets.shuffle(rng);
        let (cx, cy) = bounds.center();
        for (letter, (dx, dy)) in SETUP4_LETTERS.iter().take(count).zip(offsets) {
            objects.push(SceneObject {
                object_id: format!("r{region_id}-{letter}"),
                name: (*letter).into(),
                shape: "disk".into(),
                color: "white".into(),
                material: Material::Plastic,
                x_mm: cx + dx,
                y_mm: cy + dy,
                tag: Some(uids.next(7)),
            });
        }
    }
    regions.sort_by_key(|r| r.region_id);
    Scene {
        extent: Rect::new(0.0, 0.0, 4.0 * REGION_SIZE_MM, 2.0 * REGION_SIZE_MM),
        objects,
        regions,
    }
}
