//! Brute-force reference for reader winner selection, using vector algebra
//! instead of bearings.

use rand::Rng;
use rfglove_core::rfmodel::{HandPose, Material, RfParams, TagPlacement};
use rfglove_core::tagdb::TagUid;

const MATERIALS: [Material; 5] = [
    Material::Plastic,
    Material::Fabric,
    Material::Wood,
    Material::Paper,
    Material::Metal,
];

/// A hand and up to 12 tags scattered around it, some of them close.
pub fn random_case<R: Rng>(rng: &mut R) -> (HandPose, Vec<TagPlacement>) {
    let pose = HandPose::new(
        rng.random_range(-200.0..200.0),
        rng.random_range(-200.0..200.0),
        rng.random_range(0.0..360.0),
    );
    let n = rng.random_range(0..=12);
    let tags = (0..n)
        .map(|i| {
            let mut bytes = [0u8; 4];
            bytes[0] = 0x08;
            bytes[3] = i as u8;
            bytes[1] = rng.random();
            let r = rng.random_range(0.0..80.0);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            TagPlacement::new(
                TagUid::new(&bytes).unwrap(),
                pose.x_mm + r * a.cos(),
                pose.y_mm + r * a.sin(),
                MATERIALS[rng.random_range(0..MATERIALS.len())],
            )
        })
        .collect();
    (pose, tags)
}

/// Unsigned angle between boresight and the hand→tag vector, in degrees.
pub fn offset_deg(pose: &HandPose, x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - pose.x_mm, y - pose.y_mm);
    let (bx, by) = (pose.facing_deg.to_radians().cos(), pose.facing_deg.to_radians().sin());
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let cross = bx * dy - by * dx;
    let dot = bx * dx + by * dy;
    cross.atan2(dot).abs().to_degrees()
}

/// The winner by exhaustive lexicographic minimisation of
/// (offset, distance, uid hex) over readable tags.
pub fn brute_force(pose: &HandPose, tags: &[TagPlacement], p: &RfParams) -> Option<TagUid> {
    let mut best: Option<(f64, f64, String, TagUid)> = None;
    for t in tags {
        if t.mount == Material::Metal {
            continue;
        }
        let d = ((t.x_mm - pose.x_mm).powi(2) + (t.y_mm - pose.y_mm).powi(2)).sqrt();
        let off = offset_deg(pose, t.x_mm, t.y_mm);
        if d > p.max_range_mm || off > p.max_half_angle_deg {
            continue;
        }
        let key = (off, d, t.uid.to_hex(), t.uid);
        let better = match &best {
            None => true,
            Some(b) => (key.0, key.1, &key.2) < (b.0, b.1, &b.2),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|b| b.3)
}
