//! Continuous collision tests between a particle's per-step displacement and
//! absorbing spheres or the ground plane.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;

/// Body region an absorbing sphere stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureKind {
    Face,
    HandLeft,
    HandRight,
    Feet,
}

impl ApertureKind {
    pub const ALL: [ApertureKind; 4] = [
        ApertureKind::Face,
        ApertureKind::HandLeft,
        ApertureKind::HandRight,
        ApertureKind::Feet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ApertureKind::Face => "face",
            ApertureKind::HandLeft => "hand_left",
            ApertureKind::HandRight => "hand_right",
            ApertureKind::Feet => "feet",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_hand(self) -> bool {
        matches!(self, ApertureKind::HandLeft | ApertureKind::HandRight)
    }
}

impl fmt::Display for ApertureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A person's aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApertureId {
    pub person: u32,
    pub kind: ApertureKind,
}

/// An absorbing sphere attached to a person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereAbsorber {
    pub center: Vec3,
    /// m
    pub radius: f64,
    pub owner: ApertureId,
    /// Fraction of absorbed viral load that counts toward the owner's dose.
    pub sensitivity_weight: f64,
}

/// What stopped a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Absorber {
    Aperture(ApertureId),
    Ground,
    /// Left the domain bounding box.
    Exited,
}

impl Absorber {
    pub fn owner(&self) -> Option<u32> {
        match self {
            Absorber::Aperture(id) => Some(id.person),
            _ => None,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            Absorber::Aperture(id) => id.kind.as_str(),
            Absorber::Ground => "ground",
            Absorber::Exited => "exited",
        }
    }

    /// Inverse of the `(absorber_owner, absorber_kind)` CSV columns.
    pub fn from_columns(owner: &str, kind: &str) -> Option<Absorber> {
        match kind {
            "ground" => Some(Absorber::Ground),
            "exited" => Some(Absorber::Exited),
            k => {
                let kind = ApertureKind::from_str(k).ok()?;
                let person = owner.parse().ok()?;
                Some(Absorber::Aperture(ApertureId { person, kind }))
            }
        }
    }
}

impl FromStr for ApertureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ApertureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown aperture kind `{s}`"))
    }
}

/// Terminal event for one particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub particle_id: u64,
    pub emitter_id: u32,
    pub event_id: u32,
    pub absorber: Absorber,
    pub position: Vec3,
    /// m/s
    pub speed: f64,
    /// s
    pub time: f64,
    pub viral_load: f64,
}

/// Segment parameter and point of first contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub fraction: f64,
    pub point: Vec3,
}

/// Relative band around the sphere surface treated as "on the surface" for
/// segments that start there. Emitters sit exactly on their own face sphere.
const SURFACE_EPS: f64 = 1e-9;

/// Earliest parameter at which the segment `x0 → x1` enters `sphere`.
///
/// A segment starting inside returns fraction 0. A segment starting on the
/// surface and heading outward does not count as entering.
pub fn sweep_collide(x0: Vec3, x1: Vec3, sphere: &SphereAbsorber) -> Option<Hit> {
    sweep_sphere(x0, x1, sphere.center, sphere.radius)
}

pub(crate) fn sweep_sphere(x0: Vec3, x1: Vec3, center: Vec3, radius: f64) -> Option<Hit> {
    let d = x1 - x0;
    let m = x0 - center;
    let r2 = radius * radius;
    let c = m.norm_squared() - r2;
    let b = m.dot(d);
    if c < -SURFACE_EPS * r2 {
        return Some(Hit {
            fraction: 0.0,
            point: x0,
        });
    }
    if c <= SURFACE_EPS * r2 {
        // On the surface: a hit only if moving inward (or skimming along it).
        return if b <= 0.0 {
            Some(Hit {
                fraction: 0.0,
                point: x0,
            })
        } else {
            None
        };
    }
    let a = d.norm_squared();
    if a == 0.0 {
        return None;
    }
    // Outside and moving away.
    if b > 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable smaller root: t = c / (-b + sqrt(disc)).
    let q = -b + disc.sqrt();
    let t = if q > 0.0 { c / q } else { -b / a };
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    Some(Hit {
        fraction: t,
        point: x0 + d * t,
    })
}

/// Downward crossing of the horizontal plane `z = height`.
pub(crate) fn plane_crossing(x0: Vec3, x1: Vec3, height: f64) -> Option<Hit> {
    if x0.z > height && x1.z <= height {
        let t = (x0.z - height) / (x0.z - x1.z);
        let mut point = x0.lerp(x1, t);
        point.z = height;
        Some(Hit { fraction: t, point })
    } else {
        None
    }
}

/// Intersection with the ground plane `z = 0` for a segment moving from above
/// to on/below it.
pub fn ground_collide(x0: Vec3, x1: Vec3) -> Option<Hit> {
    plane_crossing(x0, x1, 0.0)
}
