//! Ambient air velocity fields built from simple primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// A single air-velocity primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldPrimitive {
    /// Zero everywhere.
    Still,
    /// Constant velocity everywhere.
    Uniform { velocity: Vec3 },
    /// Constant-speed flow inside a finite cylinder, active over a time window.
    CylinderJet(CylinderJet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderJet {
    /// Center of the upstream cap.
    pub origin: Vec3,
    /// Unit flow direction.
    pub axis: Vec3,
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    /// m/s
    pub speed: f64,
    /// s
    pub active_from: f64,
    /// s
    pub active_until: f64,
}

impl CylinderJet {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("diameter", self.diameter),
            ("speed", self.speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        if !self.origin.is_finite() {
            return Err(Error::validation(
                format!("{path}.origin"),
                "must be finite",
            ));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                format!("{path}.axis"),
                "must be a unit vector",
            ));
        }
        if matches!(
            self.active_from.partial_cmp(&self.active_until),
            None | Some(std::cmp::Ordering::Greater)
        ) {
            return Err(Error::validation(
                format!("{path}.active_until"),
                "must not precede active_from",
            ));
        }
        Ok(())
    }

    /// Closed containment test in space and time.
    #[inline]
    pub fn contains(&self, position: Vec3, t: f64) -> bool {
        if t < self.active_from || t > self.active_until {
            return false;
        }
        let rel = position - self.origin;
        let axial = rel.dot(self.axis);
        if !(0.0..=self.length).contains(&axial) {
            return false;
        }
        let radial_sq = (rel - self.axis * axial).norm_squared();
        let r = 0.5 * self.diameter;
        radial_sq <= r * r
    }
}

impl FieldPrimitive {
    #[inline]
    pub fn sample(&self, position: Vec3, t: f64) -> Vec3 {
        match self {
            FieldPrimitive::Still => Vec3::ZERO,
            FieldPrimitive::Uniform { velocity } => *velocity,
            FieldPrimitive::CylinderJet(jet) => {
                if jet.contains(position, t) {
                    jet.axis * jet.speed
                } else {
                    Vec3::ZERO
                }
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            FieldPrimitive::Still => Ok(()),
            FieldPrimitive::Uniform { velocity } => {
                if velocity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation(
                        format!("{path}.velocity"),
                        "must be finite",
                    ))
                }
            }
            FieldPrimitive::CylinderJet(jet) => jet.validate(path),
        }
    }
}

/// Superposition of primitives, evaluated in order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AirflowField {
    pub primitives: Vec<FieldPrimitive>,
}

impl AirflowField {
    pub fn new(primitives: Vec<FieldPrimitive>) -> Self {
        AirflowField { primitives }
    }

    /// Stationary air.
    pub fn still() -> Self {
        AirflowField::default()
    }

    pub fn push(&mut self, primitive: FieldPrimitive) {
        self.primitives.push(primitive);
    }

    /// Air velocity at `position` and time `t`.
    #[inline]
    pub fn sample(&self, position: Vec3, t: f64) -> Vec3 {
        self.primitives
            .iter()
            .fold(Vec3::ZERO, |acc, p| acc + p.sample(position, t))
    }

    /// Drop jets whose window closed before `t`; they can never contribute again.
    pub fn retire_expired(&mut self, t: f64) {
        self.primitives.retain(|p| match p {
            FieldPrimitive::CylinderJet(jet) => jet.active_until >= t,
            _ => true,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo_jet() -> CylinderJet {
        CylinderJet {
            origin: Vec3::ZERO,
            axis: Vec3::X,
            length: 3.0,
            diameter: 1.0,
            speed: 5.0,
            active_from: 0.0,
            active_until: 1.0,
        }
    }

    #[test]
    fn still_air_is_zero() {
        let f = AirflowField::new(vec![FieldPrimitive::Still]);
        assert_eq!(f.sample(Vec3::new(3.0, -1.0, 7.0), 12.0), Vec3::ZERO);
        assert_eq!(AirflowField::still().sample(Vec3::ZERO, 0.0), Vec3::ZERO);
    }

    #[test]
    fn cough_jet_inside_and_outside() {
        let f = AirflowField::new(vec![FieldPrimitive::CylinderJet(demo_jet())]);
        assert_eq!(
            f.sample(Vec3::new(1.5, 0.2, 0.0), 0.5),
            Vec3::new(5.0, 0.0, 0.0)
        );
        assert_eq!(f.sample(Vec3::new(1.5, 0.6, 0.0), 0.5), Vec3::ZERO);
        // Axial limits.
        assert_eq!(f.sample(Vec3::new(-0.01, 0.0, 0.0), 0.5), Vec3::ZERO);
        assert_eq!(f.sample(Vec3::new(3.01, 0.0, 0.0), 0.5), Vec3::ZERO);
    }

    #[test]
    fn radial_boundary_is_closed() {
        let jet = demo_jet();
        assert!(jet.contains(Vec3::new(1.0, 0.5, 0.0), 0.5));
        assert!(jet.contains(Vec3::new(3.0, 0.0, 0.5), 0.5));
        assert!(!jet.contains(Vec3::new(1.0, 0.5000001, 0.0), 0.5));
    }

    #[test]
    fn time_gating() {
        let jet = demo_jet();
        let p = Vec3::new(1.0, 0.0, 0.0);
        assert!(jet.contains(p, 0.0));
        assert!(jet.contains(p, 1.0));
        assert!(!jet.contains(p, -1e-9));
        assert!(!jet.contains(p, 1.0 + 1e-9));
    }

    #[test]
    fn validation_catches_bad_jets() {
        let mut jet = demo_jet();
        jet.diameter = 0.0;
        assert!(jet.validate("j").is_err());
        let mut jet = demo_jet();
        jet.axis = Vec3::new(1.0, 1.0, 0.0);
        assert!(jet.validate("j").is_err());
        let mut jet = demo_jet();
        jet.active_until = -1.0;
        assert!(jet.validate("j").is_err());
        assert!(demo_jet().validate("j").is_ok());
    }

    #[test]
    fn retiring_keeps_live_primitives() {
        let mut f = AirflowField::new(vec![
            FieldPrimitive::CylinderJet(demo_jet()),
            FieldPrimitive::Uniform { velocity: Vec3::Y },
        ]);
        f.retire_expired(0.5);
        assert_eq!(f.primitives.len(), 2);
        f.retire_expired(2.0);
        assert_eq!(f.primitives.len(), 1);
    }

    proptest! {
        #[test]
        fn superposition(
            px in -1.0..4.0f64, py in -1.0..1.0f64, pz in -1.0..1.0f64, t in -0.5..1.5f64,
            ux in -3.0..3.0f64, uy in -3.0..3.0f64,
        ) {
            let parts = vec![
                FieldPrimitive::CylinderJet(demo_jet()),
                FieldPrimitive::Uniform { velocity: Vec3::new(ux, uy, 0.0) },
                FieldPrimitive::Still,
            ];
            let p = Vec3::new(px, py, pz);
            let whole = AirflowField::new(parts.clone()).sample(p, t);
            let sum = parts.iter().fold(Vec3::ZERO, |a, q| a + q.sample(p, t));
            prop_assert_eq!(whole, sum);
        }
    }
}
