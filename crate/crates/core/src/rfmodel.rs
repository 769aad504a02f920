//! Geometric read model for the palm-mounted 13.56 MHz reader.
//!
//! The model is planar: the hand sits at a point with a boresight heading,
//! and a tag is readable when it is within `max_range_mm` of the hand and
//! within `max_half_angle_deg` of the boresight. Tags on metal never read.
//! Among readable tags the most direct one wins, i.e. the one with the
//! smallest angular offset, then the nearest, then the smallest uid.
//!
//! Latency grows linearly with offset, from `base_latency_ms` on boresight
//! to twice that at the edge of the read cone. Gain falls linearly from the
//! peak on boresight to zero at 90°.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tagdb::TagUid;

#[derive(Debug, Error, PartialEq)]
pub enum RfError {
    #[error("offset {offset_deg}° outside the read cone [0, {max_deg}]")]
    OffsetOutOfRange { offset_deg: f64, max_deg: f64 },
    #[error("invalid rf parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub max_range_mm: f64,
    pub max_half_angle_deg: f64,
    pub peak_gain_dbi: f64,
    pub base_latency_ms: f64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            max_range_mm: 50.0,
            max_half_angle_deg: 60.0,
            peak_gain_dbi: 5.5,
            base_latency_ms: 100.0,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<(), RfError> {
        let checks = [
            ("max_range_mm", self.max_range_mm),
            ("max_half_angle_deg", self.max_half_angle_deg),
            ("peak_gain_dbi", self.peak_gain_dbi),
            ("base_latency_ms", self.base_latency_ms),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RfError::InvalidParam { name, value });
            }
        }
        if self.max_half_angle_deg > 90.0 {
            return Err(RfError::InvalidParam {
                name: "max_half_angle_deg",
                value: self.max_half_angle_deg,
            });
        }
        Ok(())
    }

    /// Read latency for a tag at `offset_deg` from boresight (sign ignored).
    pub fn latency_ms(&self, offset_deg: f64) -> f64 {
        self.base_latency_ms * (1.0 + offset_deg.abs() / self.max_half_angle_deg)
    }

    pub fn gain_dbi(&self, offset_deg: f64) -> f64 {
        self.peak_gain_dbi * (1.0 - offset_deg.abs() / 90.0)
    }
}

/// Hand position on the table plane and boresight heading, degrees
/// counterclockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub x_mm: f64,
    pub y_mm: f64,
    pub facing_deg: f64,
}

impl HandPose {
    pub fn new(x_mm: f64, y_mm: f64, facing_deg: f64) -> Self {
        Self {
            x_mm,
            y_mm,
            facing_deg: normalize_deg(facing_deg),
        }
    }

    /// Signed angle from boresight to the tag, in (-180, 180].
    pub fn offset_to(&self, x_mm: f64, y_mm: f64) -> f64 {
        let (dx, dy) = (x_mm - self.x_mm, y_mm - self.y_mm);
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        let bearing = dy.atan2(dx).to_degrees();
        let mut d = normalize_deg(bearing - self.facing_deg);
        if d > 180.0 {
            d -= 360.0;
        }
        d
    }

    pub fn distance_to(&self, x_mm: f64, y_mm: f64) -> f64 {
        (x_mm - self.x_mm).hypot(y_mm - self.y_mm)
    }
}

fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Plastic,
    Fabric,
    Wood,
    Paper,
    Metal,
}

impl Material {
    pub fn readable(self) -> bool {
        self != Material::Metal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagPlacement {
    pub uid: TagUid,
    pub x_mm: f64,
    pub y_mm: f64,
    pub mount: Material,
    pub diameter_mm: f64,
}

impl TagPlacement {
    pub const DEFAULT_DIAMETER_MM: f64 = 18.0;

    pub fn new(uid: TagUid, x_mm: f64, y_mm: f64, mount: Material) -> Self {
        Self {
            uid,
            x_mm,
            y_mm,
            mount,
            diameter_mm: Self::DEFAULT_DIAMETER_MM,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadResult {
    pub uid: TagUid,
    pub distance_mm: f64,
    /// Signed offset from boresight; ranking uses its magnitude.
    pub offset_deg: f64,
    pub latency_ms: f64,
    pub gain_dbi: f64,
}

/// Evaluates one tag against the read cone, without the winner selection.
pub fn evaluate(pose: &HandPose, tag: &TagPlacement, params: &RfParams) -> Option<ReadResult> {
    if !tag.mount.readable() {
        return None;
    }
    let distance_mm = pose.distance_to(tag.x_mm, tag.y_mm);
    let offset_deg = pose.offset_to(tag.x_mm, tag.y_mm);
    if distance_mm > params.max_range_mm || offset_deg.abs() > params.max_half_angle_deg {
        return None;
    }
    Some(ReadResult {
        uid: tag.uid,
        distance_mm,
        offset_deg,
        latency_ms: params.latency_ms(offset_deg),
        gain_dbi: params.gain_dbi(offset_deg),
    })
}

fn rank(a: &ReadResult, b: &ReadResult) -> Ordering {
    a.offset_deg
        .abs()
        .total_cmp(&b.offset_deg.abs())
        .then(a.distance_mm.total_cmp(&b.distance_mm))
        .then(a.uid.cmp(&b.uid))
}

/// The tag the reader reports for `pose`, if any.
pub fn scan(pose: &HandPose, tags: &[TagPlacement], params: &RfParams) -> Option<ReadResult> {
    tags.iter()
        .filter_map(|t| evaluate(pose, t, params))
        .min_by(rank)
}

/// Latencies for a sweep of boresight offsets, each in `[0, max_half_angle_deg]`.
pub fn scan_latency_profile(params: &RfParams, offsets_deg: &[f64]) -> Result<Vec<f64>, RfError> {
    offsets_deg
        .iter()
        .map(|&o| {
            if (0.0..=params.max_half_angle_deg).contains(&o) {
                Ok(params.latency_ms(o))
            } else {
                Err(RfError::OffsetOutOfRange {
                    offset_deg: o,
                    max_deg: params.max_half_angle_deg,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uid(s: &str) -> TagUid {
        s.parse().unwrap()
    }

    /// Tag at `dist` mm, `offset` degrees left of a hand at the origin facing +x.
    fn at(s: &str, dist: f64, offset: f64, mount: Material) -> TagPlacement {
        let r = offset.to_radians();
        TagPlacement::new(uid(s), dist * r.cos(), dist * r.sin(), mount)
    }

    fn origin() -> HandPose {
        HandPose::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn out_of_range_ahead() {
        let tags = [at("04000001", 60.0, 0.0, Material::Plastic)];
        assert_eq!(scan(&origin(), &tags, &RfParams::default()), None);
    }

    #[test]
    fn boresight_latency_and_gain() {
        let tags = [at("04000001", 0.0, 0.0, Material::Plastic)];
        let r = scan(&origin(), &tags, &RfParams::default()).unwrap();
        assert_eq!(r.latency_ms, 100.0);
        assert_eq!(r.gain_dbi, 5.5);
        assert_eq!(r.offset_deg, 0.0);
    }

    #[test]
    fn most_direct_tag_wins() {
        let tags = [
            at("04000002", 30.0, 40.0, Material::Wood),
            at("04000001", 30.0, 10.0, Material::Wood),
        ];
        let r = scan(&origin(), &tags, &RfParams::default()).unwrap();
        assert_eq!(r.uid, uid("04000001"));
        assert_relative_eq!(r.offset_deg, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn ties_break_on_distance_then_uid() {
        let p = RfParams::default();
        let near_far = [at("04000001", 40.0, 0.0, Material::Wood), at("04000002", 20.0, 0.0, Material::Wood)];
        assert_eq!(scan(&origin(), &near_far, &p).unwrap().uid, uid("04000002"));
        let same = [at("04000009", 20.0, 0.0, Material::Wood), at("04000003", 20.0, 0.0, Material::Wood)];
        assert_eq!(scan(&origin(), &same, &p).unwrap().uid, uid("04000003"));
    }

    #[test]
    fn metal_never_reads() {
        let tags = [at("04000001", 10.0, 0.0, Material::Metal)];
        assert_eq!(scan(&origin(), &tags, &RfParams::default()), None);
    }

    #[test]
    fn cone_edges() {
        let p = RfParams::default();
        assert!(scan(&origin(), &[at("04000001", 30.0, 59.9, Material::Paper)], &p).is_some());
        assert!(scan(&origin(), &[at("04000001", 30.0, -59.9, Material::Paper)], &p).is_some());
        assert!(scan(&origin(), &[at("04000001", 30.0, 60.5, Material::Paper)], &p).is_none());
        assert!(scan(&origin(), &[at("04000001", 30.0, 180.0, Material::Paper)], &p).is_none());
    }

    #[test]
    fn facing_is_normalized() {
        assert_eq!(HandPose::new(0.0, 0.0, -90.0).facing_deg, 270.0);
        assert_eq!(HandPose::new(0.0, 0.0, 720.0).facing_deg, 0.0);
        let pose = HandPose::new(0.0, 0.0, 350.0);
        assert_relative_eq!(pose.offset_to(10.0, 0.0), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn latency_profile_endpoints() {
        let p = RfParams::default();
        let l = scan_latency_profile(&p, &[0.0, 30.0, 60.0]).unwrap();
        assert_eq!(l, vec![100.0, 150.0, 200.0]);
        assert!(scan_latency_profile(&p, &[61.0]).is_err());
        assert!(scan_latency_profile(&p, &[-1.0]).is_err());
        assert!(scan_latency_profile(&p, &[f64::NAN]).is_err());
    }

    #[test]
    fn latency_profile_strictly_increasing() {
        let p = RfParams::default();
        let sweep: Vec<f64> = (0..=600).map(|i| i as f64 * 0.1).collect();
        let l = scan_latency_profile(&p, &sweep).unwrap();
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn params_validation() {
        assert!(RfParams::default().validate().is_ok());
        let bad = RfParams {
            max_half_angle_deg: 95.0,
            ..RfParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = RfParams {
            max_range_mm: 0.0,
            ..RfParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
