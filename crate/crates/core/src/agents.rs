//! Persons: where they are, what they absorb, and when they start emitting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collision::{Absorber, ApertureId, ApertureKind, CollisionRecord, SphereAbsorber};
use crate::emission::{
    BreathingParams, CoughParams, EmissionProfile, EventKind, SpeechMarkovParams,
};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// s
    pub t: f64,
    /// Floor position, m.
    pub position: Vec3,
}

/// Aperture sizes, placement and sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApertureConfig {
    pub face_radius: f64,
    /// Distance of the face center behind the mouth point.
    pub face_offset: f64,
    pub face_weight: f64,
    pub hands: bool,
    pub hand_radius: f64,
    pub hand_height: f64,
    pub hand_lateral_offset: f64,
    pub hand_weight: f64,
    pub feet: Option<FeetConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeetConfig {
    pub radius: f64,
    pub weight: f64,
}

impl Default for FeetConfig {
    fn default() -> Self {
        FeetConfig {
            radius: 0.1,
            weight: 0.05,
        }
    }
}

impl Default for ApertureConfig {
    fn default() -> Self {
        ApertureConfig {
            face_radius: 0.05,
            face_offset: 0.05,
            face_weight: 1.0,
            hands: true,
            hand_radius: 0.05,
            hand_height: 0.70,
            hand_lateral_offset: 0.30,
            hand_weight: 0.2,
            feet: None,
        }
    }
}

impl ApertureConfig {
    pub fn weight(&self, kind: ApertureKind) -> f64 {
        match kind {
            ApertureKind::Face => self.face_weight,
            ApertureKind::HandLeft | ApertureKind::HandRight => self.hand_weight,
            ApertureKind::Feet => self.feet.map_or(0.0, |f| f.weight),
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let positive = [
            ("face_radius", self.face_radius),
            ("hand_radius", self.hand_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{path}.{name}"), "must be > 0"));
            }
        }
        let finite = [
            ("face_offset", self.face_offset),
            ("hand_height", self.hand_height),
            ("hand_lateral_offset", self.hand_lateral_offset),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    "must be finite",
                ));
            }
        }
        let weights = [
            ("face_weight", self.face_weight),
            ("hand_weight", self.hand_weight),
        ];
        for (name, w) in weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    "must be in [0, 1]",
                ));
            }
        }
        if let Some(feet) = &self.feet {
            if !(feet.radius.is_finite() && feet.radius > 0.0) {
                return Err(Error::validation(
                    format!("{path}.feet.radius"),
                    "must be > 0",
                ));
            }
            if !(0.0..=1.0).contains(&feet.weight) {
                return Err(Error::validation(
                    format!("{path}.feet.weight"),
                    "must be in [0, 1]",
                ));
            }
        }
        Ok(())
    }
}

/// Infection progression. Only moves forward: susceptible → exposed → infectious.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InfectionState {
    #[default]
    Susceptible,
    Exposed {
        exposure_time: f64,
    },
    Infectious {
        since: f64,
    },
}

impl InfectionState {
    /// 0, 1, 2 for S, E, I.
    pub fn rank(&self) -> u8 {
        match self {
            InfectionState::Susceptible => 0,
            InfectionState::Exposed { .. } => 1,
            InfectionState::Infectious { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InfectionState::Susceptible => "susceptible",
            InfectionState::Exposed { .. } => "exposed",
            InfectionState::Infectious { .. } => "infectious",
        }
    }

    pub fn is_infectious(&self) -> bool {
        matches!(self, InfectionState::Infectious { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionTrigger {
    /// Effective dose reached the threshold.
    Dose,
    /// Activation delay elapsed after exposure.
    Incubation,
    /// Forced by a scheduled activation.
    Scheduled,
}

impl fmt::Display for TransitionTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionTrigger::Dose => "dose",
            TransitionTrigger::Incubation => "incubation",
            TransitionTrigger::Scheduled => "scheduled",
        })
    }
}

/// One infection-state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionEvent {
    pub time: f64,
    pub person: u32,
    pub old_state: String,
    pub new_state: String,
    pub trigger: TransitionTrigger,
}

/// Weighted dose accumulated per aperture kind, indexed by [`ApertureKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ApertureDoses(pub [f64; 4]);

impl ApertureDoses {
    pub fn get(&self, kind: ApertureKind) -> f64 {
        self.0[kind.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// An event fixed in the scenario rather than drawn from a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEvent {
    pub time: f64,
    pub kind: EventKind,
}

/// Per-kind emission profiles for one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionProfiles {
    pub breath: EmissionProfile,
    pub speech: EmissionProfile,
    pub cough: EmissionProfile,
}

impl Default for EmissionProfiles {
    fn default() -> Self {
        EmissionProfiles {
            breath: EmissionProfile::breath(),
            speech: EmissionProfile::speech(),
            cough: EmissionProfile::cough(),
        }
    }
}

impl EmissionProfiles {
    pub fn get(&self, kind: EventKind) -> &EmissionProfile {
        match kind {
            EventKind::Breath => &self.breath,
            EventKind::Speech => &self.speech,
            EventKind::Cough => &self.cough,
        }
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut EmissionProfile> {
        [&mut self.breath, &mut self.speech, &mut self.cough].into_iter()
    }
}

/// A person acting as emitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: u32,
    pub name: String,
    /// m above the floor position.
    pub mouth_height: f64,
    /// Horizontal unit vector the person faces (and coughs along).
    pub facing: Vec3,
    pub apertures: ApertureConfig,
    /// Time-ordered floor positions.
    pub path: Vec<Waypoint>,
    pub breathing: Option<BreathingParams>,
    pub speech: Option<SpeechMarkovParams>,
    pub cough: CoughParams,
    pub profiles: EmissionProfiles,
    pub scripted_events: Vec<ScriptedEvent>,
    /// Emit a cough at the moment the person becomes infectious.
    pub cough_on_activation: bool,
    pub scheduled_activation: Option<f64>,
    /// Delay applied to every emission event of this person, s.
    pub event_delay: f64,
    pub infection: InfectionState,
    pub dose: ApertureDoses,
    pub dose_threshold: f64,
    /// Exposure-to-infectious delay, s.
    pub activation_delay: f64,
}

impl Person {
    /// A susceptible person standing at `position` facing `facing`, with
    /// default apertures, profiles and no emission processes.
    pub fn standing(id: u32, position: Vec3, facing: Vec3) -> Self {
        Person {
            id,
            name: format!("p{id}"),
            mouth_height: 1.65,
            facing: facing.normalized().unwrap_or(Vec3::X),
            apertures: ApertureConfig::default(),
            path: vec![Waypoint { t: 0.0, position }],
            breathing: None,
            speech: None,
            cough: CoughParams::default(),
            profiles: EmissionProfiles::default(),
            scripted_events: Vec::new(),
            cough_on_activation: false,
            scheduled_activation: None,
            event_delay: 0.0,
            infection: InfectionState::Susceptible,
            dose: ApertureDoses::default(),
            dose_threshold: 100.0,
            activation_delay: 3.0,
        }
    }

    /// Floor position at time `t`, interpolated along the path and clamped at
    /// both ends.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let path = &self.path;
        let first = path.first().expect("validated non-empty path");
        if t <= first.t {
            return first.position;
        }
        let i = path.partition_point(|w| w.t <= t);
        if i >= path.len() {
            return path[path.len() - 1].position;
        }
        let (a, b) = (path[i - 1], path[i]);
        a.position.lerp(b.position, (t - a.t) / (b.t - a.t))
    }

    pub fn mouth_at(&self, t: f64) -> Vec3 {
        self.position_at(t) + Vec3::Z * self.mouth_height
    }

    /// Unit vector to the person's left.
    pub fn left(&self) -> Vec3 {
        Vec3::Z.cross(self.facing).normalized().unwrap_or(Vec3::Y)
    }

    /// Absorbing spheres at time `t`, ordered face, left hand, right hand, feet.
    pub fn apertures_at(&self, t: f64) -> Vec<SphereAbsorber> {
        let base = self.position_at(t);
        let cfg = &self.apertures;
        let owner = |kind| ApertureId {
            person: self.id,
            kind,
        };
        let mut out = Vec::with_capacity(4);
        out.push(SphereAbsorber {
            center: base + Vec3::Z * self.mouth_height - self.facing * cfg.face_offset,
            radius: cfg.face_radius,
            owner: owner(ApertureKind::Face),
            sensitivity_weight: cfg.face_weight,
        });
        if cfg.hands {
            let hand = base + Vec3::Z * cfg.hand_height;
            let lateral = self.left() * cfg.hand_lateral_offset;
            for (kind, center) in [
                (ApertureKind::HandLeft, hand + lateral),
                (ApertureKind::HandRight, hand - lateral),
            ] {
                out.push(SphereAbsorber {
                    center,
                    radius: cfg.hand_radius,
                    owner: owner(kind),
                    sensitivity_weight: cfg.hand_weight,
                });
            }
        }
        if let Some(feet) = cfg.feet {
            out.push(SphereAbsorber {
                center: base + Vec3::Z * feet.radius,
                radius: feet.radius,
                owner: owner(ApertureKind::Feet),
                sensitivity_weight: feet.weight,
            });
        }
        out
    }

    /// Sum of weighted doses over all apertures.
    pub fn effective_dose(&self) -> f64 {
        self.dose.total()
    }

    /// Credit an absorbed particle's weighted viral load to the hit aperture.
    pub fn accumulate_dose(&mut self, hit: &CollisionRecord) -> Result<()> {
        let kind = match hit.absorber {
            Absorber::Aperture(ApertureId { person, kind }) if person == self.id => kind,
            other => {
                return Err(Error::Internal(format!(
                    "collision with {other:?} credited to person {}",
                    self.id
                )))
            }
        };
        let add = hit.viral_load * self.apertures.weight(kind);
        if add > 0.0 {
            self.dose.0[kind.index()] += add;
        }
        Ok(())
    }

    fn transition(
        &mut self,
        to: InfectionState,
        time: f64,
        trigger: TransitionTrigger,
    ) -> InfectionEvent {
        let ev = InfectionEvent {
            time,
            person: self.id,
            old_state: self.infection.name().to_owned(),
            new_state: to.name().to_owned(),
            trigger,
        };
        self.infection = to;
        ev
    }

    /// Advance the dose-driven state machine to time `t`.
    pub fn update_infection(&mut self, t: f64) -> Vec<InfectionEvent> {
        let mut events = Vec::new();
        if self.infection == InfectionState::Susceptible
            && self.effective_dose() >= self.dose_threshold
        {
            events.push(self.transition(
                InfectionState::Exposed { exposure_time: t },
                t,
                TransitionTrigger::Dose,
            ));
        }
        if let InfectionState::Exposed { exposure_time } = self.infection {
            if t >= exposure_time + self.activation_delay {
                events.push(self.transition(
                    InfectionState::Infectious { since: t },
                    t,
                    TransitionTrigger::Incubation,
                ));
            }
        }
        events
    }

    /// Make the person infectious at `t_activate` regardless of dose. No-op if
    /// already infectious.
    pub fn scheduled_activation(&mut self, t_activate: f64) -> Option<InfectionEvent> {
        if self.infection.is_infectious() {
            return None;
        }
        Some(self.transition(
            InfectionState::Infectious { since: t_activate },
            t_activate,
            TransitionTrigger::Scheduled,
        ))
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let p = |f: &str| format!("{path}.{f}");
        if self.path.is_empty() {
            return Err(Error::validation(
                p("path"),
                "must contain at least one waypoint",
            ));
        }
        for (i, w) in self.path.iter().enumerate() {
            if !w.t.is_finite() || !w.position.is_finite() {
                return Err(Error::validation(
                    format!("{path}.path[{i}]"),
                    "must be finite",
                ));
            }
        }
        if self.path.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::validation(
                p("path"),
                "waypoint times must be strictly increasing",
            ));
        }
        if !(self.mouth_height.is_finite() && self.mouth_height > 0.0) {
            return Err(Error::validation(p("mouth_height"), "must be > 0"));
        }
        if (self.facing.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::validation(p("facing"), "must be a unit vector"));
        }
        self.apertures.validate(&p("apertures"))?;
        if let Some(b) = &self.breathing {
            b.validate(&p("breathing"))?;
        }
        if let Some(s) = &self.speech {
            s.validate(&p("speech"))?;
        }
        self.cough.validate(&p("cough"))?;
        self.profiles.breath.validate(&p("profiles.breath"))?;
        self.profiles.speech.validate(&p("profiles.speech"))?;
        self.profiles.cough.validate(&p("profiles.cough"))?;
        for (i, e) in self.scripted_events.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(Error::validation(
                    format!("{path}.scripted_events[{i}].time"),
                    "must be >= 0",
                ));
            }
        }
        if let Some(t) = self.scheduled_activation {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::validation(p("scheduled_activation"), "must be >= 0"));
            }
        }
        if !(self.event_delay.is_finite() && self.event_delay >= 0.0) {
            return Err(Error::validation(p("event_delay"), "must be >= 0"));
        }
        if !(self.dose_threshold.is_finite() && self.dose_threshold > 0.0) {
            return Err(Error::validation(p("dose_threshold"), "must be > 0"));
        }
        if !(self.activation_delay.is_finite() && self.activation_delay >= 0.0) {
            return Err(Error::validation(p("activation_delay"), "must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(person: u32, kind: ApertureKind, load: f64) -> CollisionRecord {
        CollisionRecord {
            particle_id: 1,
            emitter_id: 9,
            event_id: 0,
            absorber: Absorber::Aperture(ApertureId { person, kind }),
            position: Vec3::ZERO,
            speed: 1.0,
            time: 0.5,
            viral_load: load,
        }
    }

    #[test]
    fn stationary_person() {
        let p = Person::standing(0, Vec3::new(1.0, 2.0, 0.0), Vec3::X);
        assert_eq!(p.position_at(-5.0), Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(p.position_at(123.0), Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn moving_person_interpolates_and_clamps() {
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.path.push(Waypoint {
            t: 10.0,
            position: Vec3::new(10.0, 0.0, 0.0),
        });
        assert_eq!(p.position_at(5.0), Vec3::new(5.0, 0.0, 0.0));
        assert_eq!(p.position_at(20.0), Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(p.position_at(10.0), Vec3::new(10.0, 0.0, 0.0));
        let a0 = p.apertures_at(0.0);
        let a5 = p.apertures_at(5.0);
        for (x, y) in a0.iter().zip(&a5) {
            let d = y.center - x.center;
            assert!((d - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn aperture_geometry() {
        let p = Person::standing(3, Vec3::new(2.0, 0.0, 0.0), -Vec3::X);
        let ap = p.apertures_at(0.0);
        assert_eq!(ap.len(), 3);
        let face = ap[0];
        assert_eq!(face.owner.kind, ApertureKind::Face);
        assert!((face.center - Vec3::new(2.05, 0.0, 1.65)).norm() < 1e-12);
        assert_eq!(face.radius, 0.05);
        // Facing −x, the left is −y.
        assert!((ap[1].center - Vec3::new(2.0, -0.3, 0.7)).norm() < 1e-12);
        assert!((ap[2].center - Vec3::new(2.0, 0.3, 0.7)).norm() < 1e-12);
        // The mouth lies on the face sphere's surface.
        assert!(((p.mouth_at(0.0) - face.center).norm() - face.radius).abs() < 1e-12);
    }

    #[test]
    fn feet_are_optional() {
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.apertures.feet = Some(FeetConfig::default());
        let ap = p.apertures_at(0.0);
        assert_eq!(ap.len(), 4);
        assert_eq!(ap[3].owner.kind, ApertureKind::Feet);
        assert_eq!(ap[3].sensitivity_weight, 0.05);
    }

    #[test]
    fn weighted_dose() {
        let mut p = Person::standing(1, Vec3::ZERO, Vec3::X);
        p.accumulate_dose(&hit(1, ApertureKind::Face, 0.0)).unwrap();
        assert_eq!(p.effective_dose(), 0.0);
        p.accumulate_dose(&hit(1, ApertureKind::Face, 2.5)).unwrap();
        assert_eq!(p.dose.get(ApertureKind::Face), 2.5);
        p.accumulate_dose(&hit(1, ApertureKind::HandLeft, 2.5))
            .unwrap();
        assert!((p.dose.get(ApertureKind::HandLeft) - 0.5).abs() < 1e-15);
        assert!(p.accumulate_dose(&hit(2, ApertureKind::Face, 1.0)).is_err());
        let mut ground = hit(1, ApertureKind::Face, 1.0);
        ground.absorber = Absorber::Ground;
        assert!(p.accumulate_dose(&ground).is_err());
    }

    #[test]
    fn below_threshold_stays_susceptible() {
        let mut p = Person::standing(1, Vec3::ZERO, Vec3::X);
        p.dose_threshold = 10.0;
        p.accumulate_dose(&hit(1, ApertureKind::Face, 9.0)).unwrap();
        for k in 0..100 {
            assert!(p.update_infection(k as f64).is_empty());
        }
        assert_eq!(p.infection, InfectionState::Susceptible);
    }

    #[test]
    fn threshold_is_inclusive_and_incubation_follows() {
        let mut p = Person::standing(1, Vec3::ZERO, Vec3::X);
        p.dose_threshold = 2.5;
        p.activation_delay = 3.0;
        p.accumulate_dose(&hit(1, ApertureKind::Face, 2.5)).unwrap();
        let ev = p.update_infection(1.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].trigger, TransitionTrigger::Dose);
        assert_eq!(p.infection, InfectionState::Exposed { exposure_time: 1.0 });
        assert!(p.update_infection(3.9).is_empty());
        let ev = p.update_infection(4.0);
        assert_eq!(ev[0].new_state, "infectious");
        assert_eq!(p.infection, InfectionState::Infectious { since: 4.0 });
    }

    #[test]
    fn zero_delay_goes_straight_through() {
        let mut p = Person::standing(1, Vec3::ZERO, Vec3::X);
        p.dose_threshold = 1.0;
        p.activation_delay = 0.0;
        p.accumulate_dose(&hit(1, ApertureKind::Face, 5.0)).unwrap();
        let ev = p.update_infection(2.0);
        assert_eq!(ev.len(), 2);
        assert!(p.infection.is_infectious());
    }

    #[test]
    fn scheduled_activation_is_idempotent() {
        let mut p = Person::standing(2, Vec3::ZERO, Vec3::X);
        let ev = p.scheduled_activation(3.0).unwrap();
        assert_eq!(ev.trigger, TransitionTrigger::Scheduled);
        assert_eq!(ev.time, 3.0);
        assert_eq!(p.infection, InfectionState::Infectious { since: 3.0 });
        assert!(p.scheduled_activation(5.0).is_none());
        assert_eq!(p.infection, InfectionState::Infectious { since: 3.0 });
    }

    #[test]
    fn validation_paths() {
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.path.clear();
        let e = p.validate("persons[0]").unwrap_err().to_string();
        assert!(e.contains("persons[0].path"), "{e}");
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.dose_threshold = 0.0;
        let e = p.validate("persons[0]").unwrap_err().to_string();
        assert!(e.contains("persons[0].dose_threshold"), "{e}");
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.path.push(Waypoint {
            t: 0.0,
            position: Vec3::X,
        });
        assert!(p.validate("p").is_err());
        let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
        p.apertures.face_radius = -1.0;
        assert!(p.validate("p").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dose_and_state_are_monotone(
                loads in proptest::collection::vec((0usize..3, 0.0..5.0f64), 1..60),
                threshold in 0.5..20.0f64,
                delay in 0.0..3.0f64,
            ) {
                let mut p = Person::standing(0, Vec3::ZERO, Vec3::X);
                p.dose_threshold = threshold;
                p.activation_delay = delay;
                let kinds = [ApertureKind::Face, ApertureKind::HandLeft, ApertureKind::HandRight];
                let mut last_dose = p.dose;
                let mut last_rank = p.infection.rank();
                for (step, (k, load)) in loads.into_iter().enumerate() {
                    p.accumulate_dose(&hit(0, kinds[k], load)).unwrap();
                    p.update_infection(step as f64 * 0.25);
                    for i in 0..4 {
                        prop_assert!(p.dose.0[i] >= last_dose.0[i]);
                    }
                    prop_assert!(p.infection.rank() >= last_rank);
                    last_dose = p.dose;
                    last_rank = p.infection.rank();
                }
            }
        }
    }
}
