//! Fixtures shared by the benchmarks.

use airborne_core::{
    AirflowField, ApertureId, ApertureKind, CylinderJet, FieldPrimitive, Particle, Scenario,
    SphereAbsorber, Vec3,
};

/// The built-in demo cut to `horizon` seconds with `particles_per_interval`
/// particles per cough release instant.
pub fn reduced_demo(horizon: f64, particles_per_interval: u32) -> Scenario {
    let mut s = Scenario::paper_demo();
    s.horizon = horizon;
    for p in &mut s.persons {
        p.profiles.cough.particles_per_interval = particles_per_interval;
    }
    s
}

/// A 10 µm droplet leaving a mouth at 10 m/s.
pub fn droplet() -> Particle {
    Particle::new(
        Vec3::new(0.0, 0.0, 1.6),
        Vec3::new(10.0, 0.0, 0.0),
        1e-5,
        Particle::WATER_DENSITY,
    )
}

/// A field holding one active cough jet along +x.
pub fn jet_field() -> AirflowField {
    let mut f = AirflowField::still();
    f.push(FieldPrimitive::CylinderJet(CylinderJet {
        origin: Vec3::new(0.0, 0.0, 1.6),
        axis: Vec3::X,
        length: 1.5,
        diameter: 0.1,
        speed: 10.0,
        active_from: 0.0,
        active_until: 0.5,
    }));
    f
}

/// A face-sized sphere 2 m ahead of the origin.
pub fn face() -> SphereAbsorber {
    SphereAbsorber {
        center: Vec3::new(2.0, 0.0, 1.6),
        radius: 0.1,
        owner: ApertureId {
            person: 1,
            kind: ApertureKind::Face,
        },
        sensitivity_weight: 1.0,
    }
}
