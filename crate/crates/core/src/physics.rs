//! Particle kinematics: drag, gravity/buoyancy and the time integrator.
//!
//! Drag is Stokes drag with the Schiller–Naumann finite-Reynolds correction.
//! The integrator treats the drag coefficient as frozen over a step and the
//! relative velocity implicitly, which keeps the stiff drag term on micron-sized
//! particles stable at millisecond steps and makes the terminal velocity an
//! exact fixed point of the update.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::airflow::AirflowField;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Reynolds number above which the drag correction stops growing.
pub const RE_CAP: f64 = 1000.0;

/// Ambient air constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AirProperties {
    /// kg/m³
    pub density: f64,
    /// Pa·s
    pub dynamic_viscosity: f64,
    /// m/s², acting along −z.
    pub gravity: f64,
}

impl Default for AirProperties {
    fn default() -> Self {
        AirProperties {
            density: 1.204,
            dynamic_viscosity: 1.81e-5,
            gravity: 9.81,
        }
    }
}

impl AirProperties {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("density", self.density),
            ("dynamic_viscosity", self.dynamic_viscosity),
            ("gravity", self.gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("air.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// A simulated droplet or aerosol particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub position: Vec3,
    pub velocity: Vec3,
    /// m
    pub diameter: f64,
    /// kg/m³
    pub density: f64,
    /// Dose units carried; zero for particles from non-infectious emitters.
    pub viral_load: f64,
    pub emitter_id: u32,
    /// Per-emitter event counter.
    pub event_id: u32,
    /// Index of the particle within its burst.
    pub burst_index: u32,
    /// s
    pub birth_time: f64,
    /// K. Carried as metadata only.
    pub temperature: f64,
}

impl Particle {
    /// Density of liquid water, kg/m³.
    pub const WATER_DENSITY: f64 = 1000.0;

    /// A particle at rest with default provenance; mostly useful in tests.
    pub fn new(position: Vec3, velocity: Vec3, diameter: f64, density: f64) -> Self {
        Particle {
            id: 0,
            position,
            velocity,
            diameter,
            density,
            viral_load: 0.0,
            emitter_id: 0,
            event_id: 0,
            burst_index: 0,
            birth_time: 0.0,
            temperature: 310.15,
        }
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        sphere_volume(self.diameter)
    }

    #[inline]
    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    /// Carries viral load, i.e. was emitted by an infectious person.
    #[inline]
    pub fn is_infectious(&self) -> bool {
        self.viral_load > 0.0
    }

    fn check(&self) -> Result<()> {
        if !(self.diameter.is_finite() && self.diameter > 0.0) {
            return Err(Error::InvalidInput(format!(
                "particle diameter must be finite and > 0, got {}",
                self.diameter
            )));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::InvalidInput(format!(
                "particle density must be finite and > 0, got {}",
                self.density
            )));
        }
        if !self.position.is_finite() || !self.velocity.is_finite() {
            return Err(Error::InvalidInput("non-finite particle state".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn sphere_volume(diameter: f64) -> f64 {
    PI / 6.0 * diameter * diameter * diameter
}

/// Schiller–Naumann correction factor, saturating at [`RE_CAP`].
#[inline]
pub fn drag_correction(reynolds: f64) -> f64 {
    1.0 + 0.15 * reynolds.min(RE_CAP).powf(0.687)
}

/// Linear drag coefficient `k` such that `F = -k · v_rel`.
#[inline]
fn drag_coefficient(diameter: f64, rel_speed: f64, air: &AirProperties) -> f64 {
    let re = air.density * rel_speed * diameter / air.dynamic_viscosity;
    3.0 * PI * air.dynamic_viscosity * diameter * drag_correction(re)
}

/// Drag force on `p` in air moving at `air_velocity`.
pub fn drag_force(p: &Particle, air_velocity: Vec3, air: &AirProperties) -> Result<Vec3> {
    p.check()?;
    if !air_velocity.is_finite() {
        return Err(Error::InvalidInput("non-finite air velocity".into()));
    }
    let rel = p.velocity - air_velocity;
    let speed = rel.norm();
    if speed == 0.0 {
        return Ok(Vec3::ZERO);
    }
    Ok(rel * -drag_coefficient(p.diameter, speed, air))
}

/// Gravity minus buoyancy, along −z.
pub fn body_force(p: &Particle, air: &AirProperties) -> Result<Vec3> {
    p.check()?;
    let f = (p.density - air.density) * p.volume() * air.gravity;
    Ok(Vec3::new(0.0, 0.0, -f))
}

/// Which forces the integrator applies. Everything is on by default; the
/// switches exist to isolate terms in tests and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForceModel {
    pub drag: bool,
    pub body: bool,
}

impl ForceModel {
    pub const ALL: ForceModel = ForceModel {
        drag: true,
        body: true,
    };
    pub const NONE: ForceModel = ForceModel {
        drag: false,
        body: false,
    };
}

impl Default for ForceModel {
    fn default() -> Self {
        ForceModel::ALL
    }
}

/// Advance one particle by `dt` seconds.
pub fn step(
    p: &Particle,
    field: &AirflowField,
    air: &AirProperties,
    t: f64,
    dt: f64,
) -> Result<Particle> {
    step_with(p, field, air, t, dt, ForceModel::ALL)
}

/// [`step`] with explicit control over the applied forces.
pub fn step_with(
    p: &Particle,
    field: &AirflowField,
    air: &AirProperties,
    t: f64,
    dt: f64,
    forces: ForceModel,
) -> Result<Particle> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput("non-finite time".into()));
    }
    p.check()?;
    let u = field.sample(p.position, t);
    Ok(advance(p, u, air, dt, forces))
}

/// Unchecked update used by the simulation loop once inputs are validated.
///
/// With drag coefficient `k` evaluated at the current relative speed:
/// `v' = (v + dt/m · (k·u + F_body)) / (1 + dt·k/m)`, then `x' = x + v'·dt`.
#[inline]
pub(crate) fn advance(
    p: &Particle,
    air_velocity: Vec3,
    air: &AirProperties,
    dt: f64,
    forces: ForceModel,
) -> Particle {
    let mass = p.mass();
    let body = if forces.body {
        let f = (p.density - air.density) * p.volume() * air.gravity;
        Vec3::new(0.0, 0.0, -f)
    } else {
        Vec3::ZERO
    };
    let velocity = if forces.drag {
        let rel_speed = (p.velocity - air_velocity).norm();
        let k = drag_coefficient(p.diameter, rel_speed, air);
        let h = dt / mass;
        (p.velocity + (air_velocity * k + body) * h) / (1.0 + h * k)
    } else {
        p.velocity + body * (dt / mass)
    };
    let mut next = p.clone();
    next.velocity = velocity;
    next.position = p.position + velocity * dt;
    next
}
