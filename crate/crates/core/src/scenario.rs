//! Scenario documents: JSON schema, defaults and validation.
//!
//! A document is parsed strictly (unknown fields are rejected), defaults are
//! filled in, and the result is validated into a [`Scenario`]. Every error
//! carries the path of the offending field.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{
    ApertureConfig, EmissionProfiles, InfectionState, Person, ScriptedEvent, Waypoint,
};
use crate::airflow::{AirflowField, FieldPrimitive};
use crate::emission::{
    AngleCdf, BreathingParams, CoughParams, EmissionProfile, JetTemplate, LogNormalDist,
    SpeechMarkovParams, TruncatedNormal,
};
use crate::error::{Error, Result};
use crate::physics::AirProperties;
use crate::vec3::Vec3;

/// Source of the built-in three-person cough demonstration.
pub const PAPER_DEMO_JSON: &str = include_str!("../scenarios/paper_demo.json");

/// Axis-aligned simulation volume; particles leaving it are removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl DomainBox {
    #[inline]
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

impl Default for DomainBox {
    fn default() -> Self {
        DomainBox {
            min: Vec3::new(-10.0, -10.0, -1.0),
            max: Vec3::new(10.0, 10.0, 5.0),
        }
    }
}

/// Horizontal grid for the plane-crossing density map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cells_x: usize,
    pub cells_y: usize,
}

impl Default for DensityGrid {
    fn default() -> Self {
        DensityGrid {
            x_min: -1.0,
            x_max: 5.0,
            y_min: -2.0,
            y_max: 3.0,
            cells_x: 120,
            cells_y: 100,
        }
    }
}

impl DensityGrid {
    /// Cell `(ix, iy)` containing `(x, y)`, if inside the grid. The upper edges
    /// belong to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max) {
            return None;
        }
        let fx = (x - self.x_min) / (self.x_max - self.x_min);
        let fy = (y - self.y_min) / (self.y_max - self.y_min);
        let ix = ((fx * self.cells_x as f64) as usize).min(self.cells_x - 1);
        let iy = ((fy * self.cells_y as f64) as usize).min(self.cells_y - 1);
        Some((ix, iy))
    }

    /// Center of cell `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let w = (self.x_max - self.x_min) / self.cells_x as f64;
        let h = (self.y_max - self.y_min) / self.cells_y as f64;
        (
            self.x_min + (ix as f64 + 0.5) * w,
            self.y_min + (iy as f64 + 0.5) * h,
        )
    }
}

/// A fully validated simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// s
    pub horizon: f64,
    /// s
    pub dt: f64,
    pub domain: DomainBox,
    pub air: AirProperties,
    pub background: AirflowField,
    pub persons: Vec<Person>,
    /// m
    pub density_plane_height: f64,
    pub density_grid: DensityGrid,
}

impl Scenario {
    /// The built-in three-person cough scenario.
    pub fn paper_demo() -> Scenario {
        load_scenario(PAPER_DEMO_JSON).expect("built-in scenario is valid")
    }

    /// An empty scenario with default settings.
    pub fn empty(horizon: f64) -> Scenario {
        Scenario {
            name: String::new(),
            seed: 0,
            horizon,
            dt: 1e-3,
            domain: DomainBox::default(),
            air: AirProperties::default(),
            background: AirflowField::still(),
            persons: Vec::new(),
            density_plane_height: 0.65,
            density_grid: DensityGrid::default(),
        }
    }

    pub fn person_index(&self, id: u32) -> Option<usize> {
        self.persons.iter().position(|p| p.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be > 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt", "must be > 0"));
        }
        let d = &self.domain;
        if !(d.min.is_finite() && d.max.is_finite())
            || !(d.min.x < d.max.x && d.min.y < d.max.y && d.min.z < d.max.z)
        {
            return Err(Error::validation(
                "domain",
                "box must be finite and non-degenerate",
            ));
        }
        self.air.validate()?;
        for (i, prim) in self.background.primitives.iter().enumerate() {
            prim.validate(&format!("background[{i}]"))?;
        }
        if !self.density_plane_height.is_finite() {
            return Err(Error::validation("density_plane_height", "must be finite"));
        }
        let g = &self.density_grid;
        if !(g.x_min.is_finite() && g.x_max.is_finite() && g.x_min < g.x_max) {
            return Err(Error::validation("density_grid.x_max", "must exceed x_min"));
        }
        if !(g.y_min.is_finite() && g.y_max.is_finite() && g.y_min < g.y_max) {
            return Err(Error::validation("density_grid.y_max", "must exceed y_min"));
        }
        if g.cells_x == 0 {
            return Err(Error::validation("density_grid.cells_x", "must be >= 1"));
        }
        if g.cells_y == 0 {
            return Err(Error::validation("density_grid.cells_y", "must be >= 1"));
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.persons.iter().enumerate() {
            let path = format!("persons[{i}]");
            if !ids.insert(p.id) {
                return Err(Error::validation(
                    format!("{path}.id"),
                    "duplicate person id",
                ));
            }
            p.validate(&path)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    name: String,
    #[serde(default)]
    seed: u64,
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default)]
    domain: DomainBox,
    #[serde(default)]
    air: AirProperties,
    #[serde(default)]
    background: Vec<FieldPrimitive>,
    #[serde(default = "default_plane_height")]
    density_plane_height: f64,
    #[serde(default)]
    density_grid: DensityGrid,
    #[serde(default)]
    profiles: ProfilesDoc,
    #[serde(default)]
    persons: Vec<PersonDoc>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_plane_height() -> f64 {
    0.65
}

fn default_mouth_height() -> f64 {
    1.65
}

fn default_facing() -> Vec3 {
    Vec3::X
}

fn default_threshold() -> f64 {
    100.0
}

fn default_activation_delay() -> f64 {
    3.0
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfilesDoc {
    breath: Option<ProfileDoc>,
    speech: Option<ProfileDoc>,
    cough: Option<ProfileDoc>,
}

/// A profile given as a preset plus field overrides.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    preset: Option<String>,
    particles_per_interval: Option<u32>,
    interval: Option<f64>,
    duration: Option<f64>,
    diameter: Option<LogNormalDist>,
    speed: Option<TruncatedNormal>,
    angle_cdf: Option<AngleCdfDoc>,
    viral_load_per_volume: Option<f64>,
    particle_density: Option<f64>,
    temperature: Option<f64>,
    /// `null` removes the preset's jet.
    #[serde(default, deserialize_with = "double_option")]
    jet: Option<Option<JetTemplate>>,
    keep_prob: Option<f64>,
}

fn double_option<'de, D, T>(de: D) -> std::result::Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(de).map(Some)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AngleCdfDoc {
    Table(Vec<(f64, f64)>),
    Csv { csv: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitialInfection {
    #[default]
    Susceptible,
    Infectious,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonDoc {
    id: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    position: Option<Vec3>,
    #[serde(default)]
    path: Option<Vec<Waypoint>>,
    #[serde(default = "default_facing")]
    facing: Vec3,
    #[serde(default = "default_mouth_height")]
    mouth_height: f64,
    #[serde(default)]
    apertures: ApertureConfig,
    #[serde(default)]
    breathing: Option<BreathingParams>,
    #[serde(default)]
    speech: Option<SpeechMarkovParams>,
    #[serde(default)]
    cough: CoughParams,
    #[serde(default)]
    profiles: ProfilesDoc,
    #[serde(default)]
    scripted_events: Vec<ScriptedEvent>,
    #[serde(default)]
    cough_on_activation: bool,
    #[serde(default)]
    scheduled_activation: Option<f64>,
    #[serde(default)]
    event_delay: f64,
    #[serde(default)]
    infection: InitialInfection,
    #[serde(default = "default_threshold")]
    dose_threshold: f64,
    #[serde(default = "default_activation_delay")]
    activation_delay: f64,
}

fn preset(name: &str, path: &str) -> Result<EmissionProfile> {
    match name {
        "breath" => Ok(EmissionProfile::breath()),
        "speech" => Ok(EmissionProfile::speech()),
        "cough" => Ok(EmissionProfile::cough()),
        "sneeze" => Ok(EmissionProfile::sneeze()),
        other => Err(Error::validation(
            format!("{path}.preset"),
            format!("unknown preset `{other}` (expected breath, speech, cough or sneeze)"),
        )),
    }
}

impl ProfileDoc {
    fn resolve(
        &self,
        base: EmissionProfile,
        path: &str,
        dir: Option<&Path>,
    ) -> Result<EmissionProfile> {
        let mut p = match &self.preset {
            Some(name) => preset(name, path)?,
            None => base,
        };
        if let Some(v) = self.particles_per_interval {
            p.particles_per_interval = v;
        }
        if let Some(v) = self.interval {
            p.interval = v;
        }
        if let Some(v) = self.duration {
            p.duration = v;
        }
        if let Some(v) = self.diameter {
            p.diameter = v;
        }
        if let Some(v) = self.speed {
            p.speed = v;
        }
        match &self.angle_cdf {
            Some(AngleCdfDoc::Table(t)) => p.angle_cdf = AngleCdf(t.clone()),
            Some(AngleCdfDoc::Csv { csv }) => {
                let full = match dir {
                    Some(d) if csv.is_relative() => d.join(csv),
                    _ => csv.clone(),
                };
                let file = std::fs::File::open(&full).map_err(|e| Error::io(&full, e))?;
                p.angle_cdf = AngleCdf::from_csv(file).map_err(|e| match e {
                    Error::Validation { message, .. } | Error::Parse { message, .. } => {
                        Error::validation(format!("{path}.angle_cdf"), message)
                    }
                    e => e,
                })?;
            }
            None => {}
        }
        if let Some(v) = self.viral_load_per_volume {
            p.viral_load_per_volume = v;
        }
        if let Some(v) = self.particle_density {
            p.particle_density = v;
        }
        if let Some(v) = self.temperature {
            p.temperature = v;
        }
        if let Some(v) = self.jet {
            p.jet = v;
        }
        if let Some(v) = self.keep_prob {
            p.keep_prob = v;
        }
        Ok(p)
    }
}

impl ProfilesDoc {
    fn resolve(
        &self,
        base: &EmissionProfiles,
        path: &str,
        dir: Option<&Path>,
    ) -> Result<EmissionProfiles> {
        let one = |doc: &Option<ProfileDoc>, base: &EmissionProfile, name: &str| match doc {
            Some(d) => d.resolve(base.clone(), &format!("{path}.{name}"), dir),
            None => Ok(base.clone()),
        };
        Ok(EmissionProfiles {
            breath: one(&self.breath, &base.breath, "breath")?,
            speech: one(&self.speech, &base.speech, "speech")?,
            cough: one(&self.cough, &base.cough, "cough")?,
        })
    }
}

impl PersonDoc {
    fn resolve(
        self,
        index: usize,
        shared: &EmissionProfiles,
        dir: Option<&Path>,
    ) -> Result<Person> {
        let path = format!("persons[{index}]");
        let waypoints = match (self.position, self.path) {
            (Some(p), None) => vec![Waypoint {
                t: 0.0,
                position: p,
            }],
            (None, Some(w)) => w,
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    format!("{path}.path"),
                    "give either `position` or `path`, not both",
                ))
            }
            (None, None) => {
                return Err(Error::validation(
                    format!("{path}.position"),
                    "missing `position` or `path`",
                ))
            }
        };
        let mut horizontal = self.facing;
        horizontal.z = 0.0;
        let facing = horizontal.normalized().ok_or_else(|| {
            Error::validation(
                format!("{path}.facing"),
                "must have a non-zero horizontal part",
            )
        })?;
        let profiles = self
            .profiles
            .resolve(shared, &format!("{path}.profiles"), dir)?;
        let infection = match self.infection {
            InitialInfection::Susceptible => InfectionState::Susceptible,
            InitialInfection::Infectious => InfectionState::Infectious { since: 0.0 },
        };
        Ok(Person {
            id: self.id,
            name: self.name.unwrap_or_else(|| format!("p{}", self.id)),
            mouth_height: self.mouth_height,
            facing,
            apertures: self.apertures,
            path: waypoints,
            breathing: self.breathing,
            speech: self.speech,
            cough: self.cough,
            profiles,
            scripted_events: self.scripted_events,
            cough_on_activation: self.cough_on_activation,
            scheduled_activation: self.scheduled_activation,
            event_delay: self.event_delay,
            infection,
            dose: Default::default(),
            dose_threshold: self.dose_threshold,
            activation_delay: self.activation_delay,
        })
    }
}

fn parse_error(err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = err.path().to_string();
    let inner = err.into_inner();
    let message = inner.to_string();
    // Point missing-field errors at the missing field itself.
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            let full = if path == "." {
                field.to_owned()
            } else {
                format!("{path}.{field}")
            };
            return Error::validation(full, message);
        }
    }
    if inner.is_data() {
        Error::validation(path, message)
    } else {
        Error::Parse { path, message }
    }
}

/// Parse and validate a scenario document. Relative CSV references are
/// resolved against the working directory.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    load_scenario_in(document, None)
}

/// Read a scenario file; relative CSV references resolve against its directory.
pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scenario_in(&text, path.parent())
}

fn load_scenario_in(document: &str, dir: Option<&Path>) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(parse_error)?;
    let shared = doc
        .profiles
        .resolve(&EmissionProfiles::default(), "profiles", dir)?;
    let persons = doc
        .persons
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.resolve(i, &shared, dir))
        .collect::<Result<Vec<_>>>()?;
    let scenario = Scenario {
        name: doc.name,
        seed: doc.seed,
        horizon: doc.horizon,
        dt: doc.dt,
        domain: doc.domain,
        air: doc.air,
        background: AirflowField::new(doc.background),
        persons,
        density_plane_height: doc.density_plane_height,
        density_grid: doc.density_grid,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::ApertureKind;

    #[test]
    fn paper_demo_geometry() {
        let s = Scenario::paper_demo();
        assert_eq!(s.persons.len(), 3);
        let (a, b, c) = (&s.persons[0], &s.persons[1], &s.persons[2]);
        assert_eq!(a.position_at(0.0), Vec3::ZERO);
        assert_eq!(a.facing, Vec3::X);
        assert!(a.infection.is_infectious());
        assert_eq!(b.position_at(0.0), Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(b.facing, -Vec3::X);
        assert_eq!(c.position_at(0.0), Vec3::new(2.0, 0.75, 0.0));
        assert_eq!(c.scheduled_activation, Some(3.0));
        assert!(c.cough_on_activation);
        for p in &s.persons {
            assert_eq!(p.mouth_height, 1.65);
            let ap = p.apertures_at(0.0);
            assert_eq!(ap.len(), 3);
            assert!(ap.iter().all(|s| s.radius == 0.05));
            assert_eq!(ap[1].owner.kind, ApertureKind::HandLeft);
            assert_eq!(ap[1].center.z, 0.70);
        }
        assert_eq!(a.profiles.cough.burst_size(), 8000);
        let jet = a.profiles.cough.jet.unwrap();
        assert_eq!((jet.length, jet.diameter, jet.speed), (3.0, 1.0, 5.0));
        assert_eq!(s.density_plane_height, 0.65);
    }

    #[test]
    fn missing_horizon_is_named() {
        let err = load_scenario(r#"{"persons": []}"#).unwrap_err();
        assert!(err.is_validation());
        match err {
            Error::Validation { path, .. } => assert_eq!(path, "horizon"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn zero_dt_rejected() {
        let err = load_scenario(r#"{"horizon": 1.0, "dt": 0.0}"#).unwrap_err();
        match err {
            Error::Validation { path, .. } => assert_eq!(path, "dt"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_fields_rejected_with_path() {
        let err = load_scenario(r#"{"horizon": 1.0, "horizn": 2.0}"#).unwrap_err();
        assert!(err.to_string().contains("horizn"), "{err}");
        let doc =
            r#"{"horizon": 1.0, "persons": [{"id": 0, "position": [0,0,0], "dose_treshold": 3}]}"#;
        let err = load_scenario(doc).unwrap_err().to_string();
        assert!(
            err.contains("persons[0]") && err.contains("dose_treshold"),
            "{err}"
        );
    }

    #[test]
    fn nested_validation_paths() {
        let doc = r#"{"horizon": 1.0, "persons": [
            {"id": 0, "position": [0,0,0]},
            {"id": 1, "position": [1,0,0], "profiles": {"cough": {"diameter": {"median": 1e-5, "gsd": 0.5}}}}
        ]}"#;
        match load_scenario(doc).unwrap_err() {
            Error::Validation { path, .. } => {
                assert_eq!(path, "persons[1].profiles.cough.diameter.gsd")
            }
            e => panic!("{e}"),
        }
        let doc = r#"{"horizon": 1.0, "persons": [{"id": 0, "position": [0,0,0]}, {"id": 0, "position": [1,0,0]}]}"#;
        match load_scenario(doc).unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "persons[1].id"),
            e => panic!("{e}"),
        }
        let doc = r#"{"horizon": 1.0, "persons": [{"id": 0}]}"#;
        assert!(load_scenario(doc).is_err());
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            load_scenario("{ not json").unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn presets_and_overrides() {
        let doc = r#"{"horizon": 1.0,
            "profiles": {"cough": {"preset": "sneeze", "jet": null}},
            "persons": [{"id": 4, "position": [0,0,0], "facing": [0, 2, 0],
                         "profiles": {"speech": {"particles_per_interval": 3}}}]}"#;
        let s = load_scenario(doc).unwrap();
        let p = &s.persons[0];
        assert_eq!(p.name, "p4");
        assert_eq!(p.facing, Vec3::Y);
        assert_eq!(p.profiles.cough.particles_per_interval, 50);
        assert!(p.profiles.cough.jet.is_none());
        assert_eq!(p.profiles.speech.particles_per_interval, 3);
        let bad = r#"{"horizon": 1.0, "profiles": {"cough": {"preset": "yodel"}}}"#;
        match load_scenario(bad).unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "profiles.cough.preset"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn angle_cdf_from_csv_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("angles.csv"),
            "angle_rad,cum_prob\n0,0\n0.2,1\n",
        )
        .unwrap();
        let doc = r#"{"horizon": 1.0, "profiles": {"cough": {"angle_cdf": {"csv": "angles.csv"}}}, "persons": [{"id": 0, "position": [0,0,0]}]}"#;
        let file = dir.path().join("s.json");
        std::fs::write(&file, doc).unwrap();
        let s = load_scenario_file(&file).unwrap();
        assert_eq!(
            s.persons[0].profiles.cough.angle_cdf.0,
            vec![(0.0, 0.0), (0.2, 1.0)]
        );
        assert!(matches!(
            load_scenario_file(dir.path().join("missing.json")).unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn grid_cells() {
        let g = DensityGrid {
            x_min: 0.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 1.0,
            cells_x: 4,
            cells_y: 2,
        };
        assert_eq!(g.cell_of(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.cell_of(2.0, 1.0), Some((3, 1)));
        assert_eq!(g.cell_of(0.6, 0.6), Some((1, 1)));
        assert_eq!(g.cell_of(-0.1, 0.5), None);
        let (cx, cy) = g.cell_center(1, 1);
        assert_eq!(g.cell_of(cx, cy), Some((1, 1)));
    }
}
