//! Respiratory events and the particle bursts they release.
//!
//! Three event processes drive emission: periodic breathing, a two-state
//! discrete-time Markov chain for speech, and a homogeneous Poisson process for
//! coughs. Each event is turned into a burst of particles by an
//! [`EmissionProfile`].

use std::f64::consts::PI;
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::airflow::CylinderJet;
use crate::error::{Error, Result};
use crate::physics::{sphere_volume, Particle};
use crate::rng::{RandomStream, StreamPurpose};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Breath,
    /// Speaking or singing.
    Speech,
    /// Coughing or sneezing.
    Cough,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Breath => "breath",
            EventKind::Speech => "speech",
            EventKind::Cough => "cough",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreathingParams {
    /// s
    pub period: f64,
    /// s
    #[serde(default)]
    pub phase: f64,
}

impl BreathingParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::validation(format!("{path}.period"), "must be > 0"));
        }
        if !self.phase.is_finite() {
            return Err(Error::validation(format!("{path}.phase"), "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechMarkovParams {
    pub p_silence_to_speak: f64,
    pub p_speak_to_silence: f64,
    /// s
    #[serde(default = "default_speech_tick")]
    pub tick: f64,
}

fn default_speech_tick() -> f64 {
    0.5
}

impl SpeechMarkovParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, p) in [
            ("p_silence_to_speak", self.p_silence_to_speak),
            ("p_speak_to_silence", self.p_speak_to_silence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    format!("must be a probability, got {p}"),
                ));
            }
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(Error::validation(format!("{path}.tick"), "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoughParams {
    /// events/s while not infectious
    pub rate_healthy: f64,
    /// events/s while infectious
    pub rate_infected: f64,
}

impl CoughParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, r) in [
            ("rate_healthy", self.rate_healthy),
            ("rate_infected", self.rate_infected),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::validation(format!("{path}.{name}"), "must be >= 0"));
            }
        }
        if self.rate_infected < self.rate_healthy {
            log::warn!("{path}: rate_infected is below rate_healthy");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechState {
    Silent,
    Speaking,
}

/// Event times `phase + k·period` for `k ≥ 0` inside `[0, horizon)`.
pub fn breathing_events(params: &BreathingParams, horizon: f64) -> Vec<f64> {
    if horizon <= 0.0 {
        return Vec::new();
    }
    let k0 = if params.phase < 0.0 {
        (-params.phase / params.period).ceil() as u64
    } else {
        0
    };
    (k0..)
        .map(|k| params.phase + k as f64 * params.period)
        .skip_while(|t| *t < 0.0)
        .take_while(|t| *t < horizon)
        .collect()
}

/// Number of whole ticks starting inside `[0, horizon)`.
fn tick_count(tick: f64, horizon: f64) -> u64 {
    if horizon <= 0.0 {
        return 0;
    }
    let n = (horizon / tick).ceil() as u64;
    // Guard against `horizon / tick` landing one ulp above an integer.
    if n > 0 && (n - 1) as f64 * tick >= horizon {
        n - 1
    } else {
        n
    }
}

/// Run the speech chain from SILENT, one state per tick.
pub fn speech_timeline(
    params: &SpeechMarkovParams,
    horizon: f64,
    stream: RandomStream,
) -> Vec<(u64, SpeechState)> {
    let n = tick_count(params.tick, horizon);
    let mut rng = stream.rng();
    let mut state = SpeechState::Silent;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        if k > 0 {
            let u: f64 = rng.random();
            state = match state {
                SpeechState::Silent if u < params.p_silence_to_speak => SpeechState::Speaking,
                SpeechState::Speaking if u < params.p_speak_to_silence => SpeechState::Silent,
                s => s,
            };
        }
        out.push((k, state));
    }
    out
}

/// Start times of the SPEAKING ticks.
pub fn speech_events(params: &SpeechMarkovParams, horizon: f64, stream: RandomStream) -> Vec<f64> {
    speech_timeline(params, horizon, stream)
        .into_iter()
        .filter(|(_, s)| *s == SpeechState::Speaking)
        .map(|(k, _)| k as f64 * params.tick)
        .collect()
}

/// One exponential inter-arrival at `rate`; `None` when the rate is zero.
pub(crate) fn next_arrival<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Option<f64> {
    if rate > 0.0 {
        Some(Exp::new(rate).expect("positive rate").sample(rng))
    } else {
        None
    }
}

/// Homogeneous Poisson event times in `[0, horizon)`, ascending.
pub fn cough_events(rate: f64, horizon: f64, stream: RandomStream) -> Vec<f64> {
    let mut rng = stream.rng();
    let mut out = Vec::new();
    let mut t = 0.0;
    while let Some(gap) = next_arrival(rate, &mut rng) {
        t += gap;
        if t >= horizon {
            break;
        }
        // Zero-length gaps would break strict ordering.
        if out.last().is_some_and(|&last| t <= last) {
            continue;
        }
        out.push(t);
    }
    out
}

/// Lognormal distribution given by its median and geometric standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalDist {
    /// m
    pub median: f64,
    pub gsd: f64,
}

/// Normal distribution truncated to non-negative values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
}

impl TruncatedNormal {
    /// Inverse-CDF draw restricted to `[0, ∞)`.
    pub fn sample_with(&self, u: f64) -> f64 {
        if self.sd == 0.0 {
            return self.mean.max(0.0);
        }
        let normal = Normal::new(self.mean, self.sd).expect("validated normal");
        let lo = normal.cdf(0.0);
        let p = (lo + u * (1.0 - lo)).clamp(lo, 1.0 - f64::EPSILON);
        normal.inverse_cdf(p).max(0.0)
    }
}

/// Piecewise-linear CDF over polar emission angles, as `(angle_rad, cum_prob)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleCdf(pub Vec<(f64, f64)>);

impl AngleCdf {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let cdf = AngleCdf(points);
        cdf.validate("angle_cdf")?;
        Ok(cdf)
    }

    /// Reads a two-column `angle_rad,cum_prob` CSV. A header row is optional.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                path: format!("angle_cdf[{i}]"),
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(Error::Parse {
                    path: format!("angle_cdf[{i}]"),
                    message: format!("expected 2 columns, got {}", rec.len()),
                });
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => points.push((v[0], v[1])),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        path: format!("angle_cdf[{i}]"),
                        message: e.to_string(),
                    })
                }
            }
        }
        AngleCdf::new(points)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let pts = &self.0;
        if pts.len() < 2 {
            return Err(Error::validation(path, "needs at least two points"));
        }
        if pts.iter().any(|(a, p)| !a.is_finite() || !p.is_finite()) {
            return Err(Error::validation(path, "entries must be finite"));
        }
        if pts[0].1 != 0.0 || pts[pts.len() - 1].1 != 1.0 {
            return Err(Error::validation(
                path,
                "probabilities must run from 0 to 1",
            ));
        }
        for (i, w) in pts.windows(2).enumerate() {
            if w[1].1 <= w[0].1 {
                return Err(Error::validation(
                    format!("{path}[{}]", i + 1),
                    "probabilities must be strictly increasing",
                ));
            }
            if w[1].0 < w[0].0 {
                return Err(Error::validation(
                    format!("{path}[{}]", i + 1),
                    "angles must be non-decreasing",
                ));
            }
        }
        Ok(())
    }

    /// Evaluate the CDF at `angle`.
    pub fn cdf(&self, angle: f64) -> f64 {
        let pts = &self.0;
        if angle <= pts[0].0 {
            return if angle < pts[0].0 { 0.0 } else { pts[0].1 };
        }
        for w in pts.windows(2) {
            let ((a0, p0), (a1, p1)) = (w[0], w[1]);
            if angle <= a1 {
                return if a1 > a0 {
                    p0 + (angle - a0) / (a1 - a0) * (p1 - p0)
                } else {
                    p1
                };
            }
        }
        1.0
    }
}

/// Piecewise-linear inverse of `table` at `u ∈ [0, 1]`.
pub fn sample_inverse_cdf(table: &AngleCdf, u: f64) -> f64 {
    let pts = &table.0;
    let u = u.clamp(0.0, 1.0);
    let i = pts.partition_point(|&(_, p)| p < u);
    if i == 0 {
        return pts[0].0;
    }
    let (a0, p0) = pts[i - 1];
    let (a1, p1) = pts[i.min(pts.len() - 1)];
    a0 + (u - p0) / (p1 - p0) * (a1 - a0)
}

/// Geometry of the air jet launched with an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetTemplate {
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    /// m/s
    pub speed: f64,
    /// How long the jet blows after the event starts, s.
    #[serde(default = "default_jet_duration")]
    pub duration: f64,
}

fn default_jet_duration() -> f64 {
    1.0
}

impl JetTemplate {
    /// The jet anchored at `origin` along `direction` from `t0`.
    pub fn instantiate(&self, origin: Vec3, direction: Vec3, t0: f64) -> CylinderJet {
        CylinderJet {
            origin,
            axis: direction,
            length: self.length,
            diameter: self.diameter,
            speed: self.speed,
            active_from: t0,
            active_until: t0 + self.duration,
        }
    }
}

/// How one event kind turns into particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionProfile {
    pub particles_per_interval: u32,
    /// s
    pub interval: f64,
    /// s
    pub duration: f64,
    pub diameter: LogNormalDist,
    /// m/s
    pub speed: TruncatedNormal,
    pub angle_cdf: AngleCdf,
    /// dose units per m³ of particle volume, applied only to infectious emitters
    pub viral_load_per_volume: f64,
    /// kg/m³
    #[serde(default = "default_particle_density")]
    pub particle_density: f64,
    /// K
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub jet: Option<JetTemplate>,
    /// Probability that each particle survives emission (masks).
    #[serde(default = "one")]
    pub keep_prob: f64,
}

fn default_particle_density() -> f64 {
    Particle::WATER_DENSITY
}

fn default_temperature() -> f64 {
    310.15
}

fn one() -> f64 {
    1.0
}

fn default_angle_cdf() -> AngleCdf {
    AngleCdf(vec![(0.0, 0.0), (0.1, 0.5), (0.35, 1.0)])
}

impl EmissionProfile {
    /// 20 particles every 0.25 ms for 100 ms with a 3 m × 1 m, 5 m/s jet.
    pub fn cough() -> Self {
        EmissionProfile {
            particles_per_interval: 20,
            interval: 0.25e-3,
            duration: 0.1,
            diameter: LogNormalDist {
                median: 80e-6,
                gsd: 1.7,
            },
            speed: TruncatedNormal {
                mean: 10.0,
                sd: 2.0,
            },
            angle_cdf: default_angle_cdf(),
            viral_load_per_volume: 1e12,
            particle_density: Particle::WATER_DENSITY,
            temperature: default_temperature(),
            jet: Some(JetTemplate {
                length: 3.0,
                diameter: 1.0,
                speed: 5.0,
                duration: 1.0,
            }),
            keep_prob: 1.0,
        }
    }

    /// Cough preset with more and faster particles.
    pub fn sneeze() -> Self {
        let mut p = EmissionProfile::cough();
        p.particles_per_interval = 50;
        p.speed = TruncatedNormal {
            mean: 20.0,
            sd: 4.0,
        };
        if let Some(jet) = p.jet.as_mut() {
            jet.speed = 10.0;
        }
        p
    }

    /// 1/20 of the cough count (400 particles per event), 3 m/s, no jet.
    pub fn speech() -> Self {
        let mut p = EmissionProfile::cough();
        p.particles_per_interval = 1;
        p.speed = TruncatedNormal { mean: 3.0, sd: 0.6 };
        p.jet = None;
        p
    }

    /// 1/100 of the cough count (80 particles per event), 1 m/s, no jet.
    pub fn breath() -> Self {
        let mut p = EmissionProfile::cough();
        p.particles_per_interval = 1;
        p.interval = 1.25e-3;
        p.speed = TruncatedNormal { mean: 1.0, sd: 0.2 };
        p.jet = None;
        p
    }

    pub fn default_for(kind: EventKind) -> Self {
        match kind {
            EventKind::Breath => EmissionProfile::breath(),
            EventKind::Speech => EmissionProfile::speech(),
            EventKind::Cough => EmissionProfile::cough(),
        }
    }

    /// Number of release instants, `⌊duration / interval⌋`.
    pub fn release_instants(&self) -> u32 {
        // The ratio of two decimal literals can land a hair under an integer.
        (self.duration / self.interval * (1.0 + 1e-12)).floor() as u32
    }

    /// Particles per burst before thinning.
    pub fn burst_size(&self) -> u64 {
        u64::from(self.particles_per_interval) * u64::from(self.release_instants())
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let v = |field: &str, msg: &str| Err(Error::validation(format!("{path}.{field}"), msg));
        if self.particles_per_interval < 1 {
            return v("particles_per_interval", "must be >= 1");
        }
        if !(self.interval.is_finite() && self.interval > 0.0) {
            return v("interval", "must be > 0");
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return v("duration", "must be > 0");
        }
        if !(self.diameter.median.is_finite() && self.diameter.median > 0.0) {
            return v("diameter.median", "must be > 0");
        }
        if !(self.diameter.gsd.is_finite() && self.diameter.gsd >= 1.0) {
            return v("diameter.gsd", "must be >= 1");
        }
        if !self.speed.mean.is_finite() {
            return v("speed.mean", "must be finite");
        }
        if !(self.speed.sd.is_finite() && self.speed.sd >= 0.0) {
            return v("speed.sd", "must be >= 0");
        }
        self.angle_cdf.validate(&format!("{path}.angle_cdf"))?;
        if !(self.viral_load_per_volume.is_finite() && self.viral_load_per_volume >= 0.0) {
            return v("viral_load_per_volume", "must be >= 0");
        }
        if !(self.particle_density.is_finite() && self.particle_density > 0.0) {
            return v("particle_density", "must be > 0");
        }
        if !(0.0..=1.0).contains(&self.keep_prob) {
            return v("keep_prob", "must be in [0, 1]");
        }
        if let Some(jet) = &self.jet {
            jet.instantiate(Vec3::ZERO, Vec3::X, 0.0)
                .validate(&format!("{path}.jet"))?;
        }
        Ok(())
    }
}

/// Provenance of a burst: which person, which of their events, which run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BurstKey {
    pub seed: u64,
    pub person: u32,
    pub event: u32,
}

impl BurstKey {
    pub fn particle_stream(&self, index: u32) -> RandomStream {
        RandomStream::keyed(
            self.seed,
            StreamPurpose::Particle,
            self.person,
            self.event,
            index,
        )
    }

    pub fn thinning_stream(&self, index: u32) -> RandomStream {
        RandomStream::keyed(
            self.seed,
            StreamPurpose::Thinning,
            self.person,
            self.event,
            index,
        )
    }
}

/// Whether particle `index` of the burst survives thinning at `keep_prob`.
///
/// The uniform behind the decision depends only on the key and index, so a
/// particle kept at some probability is also kept at every larger one.
pub fn survives_thinning(key: &BurstKey, index: u32, keep_prob: f64) -> bool {
    if keep_prob >= 1.0 {
        return true;
    }
    let u: f64 = key.thinning_stream(index).rng().random();
    u < keep_prob
}

/// Release the particles of one event.
///
/// Particles are ordered by release instant, then index within the instant.
/// Every candidate particle consumes one id starting at `next_id`, thinned or
/// not, so ids do not depend on the keep probability.
#[allow(clippy::too_many_arguments)]
pub fn emit_burst(
    profile: &EmissionProfile,
    kind: EventKind,
    origin: Vec3,
    direction: Vec3,
    t0: f64,
    infectious: bool,
    key: BurstKey,
    next_id: &mut u64,
) -> Vec<Particle> {
    log::trace!(
        "{} burst from person {} event {} at t={t0}",
        kind.as_str(),
        key.person,
        key.event
    );
    let (u_axis, w_axis) = direction.orthonormal_basis();
    let diameter_dist = LogNormal::new(profile.diameter.median.ln(), profile.diameter.gsd.ln())
        .expect("validated lognormal");
    let per = profile.particles_per_interval;
    let mut out = Vec::with_capacity(profile.burst_size() as usize);
    for instant in 0..profile.release_instants() {
        let birth = t0 + f64::from(instant) * profile.interval;
        for j in 0..per {
            let index = instant * per + j;
            let id = *next_id;
            *next_id += 1;
            if !survives_thinning(&key, index, profile.keep_prob) {
                continue;
            }
            let mut rng = key.particle_stream(index).rng();
            let diameter: f64 = diameter_dist.sample(&mut rng);
            let speed = profile.speed.sample_with(rng.random());
            let polar = sample_inverse_cdf(&profile.angle_cdf, rng.random());
            let azimuth = 2.0 * PI * rng.random::<f64>();
            let dir = direction * polar.cos()
                + (u_axis * azimuth.cos() + w_axis * azimuth.sin()) * polar.sin();
            let viral_load = if infectious {
                profile.viral_load_per_volume * sphere_volume(diameter)
            } else {
                0.0
            };
            out.push(Particle {
                id,
                position: origin,
                velocity: dir * speed,
                diameter,
                density: profile.particle_density,
                viral_load,
                emitter_id: key.person,
                event_id: key.event,
                burst_index: index,
                birth_time: birth,
                temperature: profile.temperature,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(id: u64) -> RandomStream {
        RandomStream::new(7, id)
    }

    #[test]
    fn breathing_schedule() {
        let p = BreathingParams {
            period: 4.0,
            phase: 0.0,
        };
        assert_eq!(breathing_events(&p, 12.0), vec![0.0, 4.0, 8.0]);
        assert!(breathing_events(&p, 0.0).is_empty());
        let p = BreathingParams {
            period: 3.0,
            phase: 1.0,
        };
        assert_eq!(breathing_events(&p, 10.0), vec![1.0, 4.0, 7.0]);
        let p = BreathingParams {
            period: 3.0,
            phase: -1.0,
        };
        assert_eq!(breathing_events(&p, 6.0), vec![2.0, 5.0]);
    }

    #[test]
    fn silence_is_absorbing_without_transitions() {
        let p = SpeechMarkovParams {
            p_silence_to_speak: 0.0,
            p_speak_to_silence: 0.5,
            tick: 0.5,
        };
        let tl = speech_timeline(&p, 100.0, stream(1));
        assert_eq!(tl.len(), 200);
        assert!(tl.iter().all(|(_, s)| *s == SpeechState::Silent));
        assert!(speech_events(&p, 100.0, stream(1)).is_empty());
    }

    #[test]
    fn symmetric_chain_speaks_half_the_time() {
        let p = SpeechMarkovParams {
            p_silence_to_speak: 0.5,
            p_speak_to_silence: 0.5,
            tick: 1.0,
        };
        let tl = speech_timeline(&p, 100_000.0, stream(2));
        assert_eq!(tl[0].1, SpeechState::Silent);
        let frac = tl
            .iter()
            .filter(|(_, s)| *s == SpeechState::Speaking)
            .count() as f64
            / tl.len() as f64;
        // i.i.d. states for this chain: se = 0.5/sqrt(n).
        assert!((frac - 0.5).abs() < 3.0 * 0.5 / (tl.len() as f64).sqrt());
    }

    #[test]
    fn speech_events_fall_on_speaking_ticks() {
        let p = SpeechMarkovParams {
            p_silence_to_speak: 0.3,
            p_speak_to_silence: 0.3,
            tick: 0.5,
        };
        let tl = speech_timeline(&p, 20.0, stream(3));
        let ev = speech_events(&p, 20.0, stream(3));
        let expected: Vec<f64> = tl
            .iter()
            .filter(|(_, s)| *s == SpeechState::Speaking)
            .map(|(k, _)| *k as f64 * 0.5)
            .collect();
        assert_eq!(ev, expected);
    }

    #[test]
    fn tick_count_boundaries() {
        assert_eq!(tick_count(0.5, 10.0), 20);
        assert_eq!(tick_count(0.5, 10.1), 21);
        assert_eq!(tick_count(0.1, 0.3), 3);
        assert_eq!(tick_count(0.5, 0.0), 0);
    }

    #[test]
    fn poisson_basics() {
        assert!(cough_events(0.0, 1e4, stream(4)).is_empty());
        let ev = cough_events(3.0, 50.0, stream(5));
        assert!(ev.windows(2).all(|w| w[0] < w[1]));
        assert!(ev.iter().all(|t| (0.0..50.0).contains(t)));
        assert_eq!(ev, cough_events(3.0, 50.0, stream(5)));
    }

    #[test]
    fn inverse_cdf_interpolation() {
        let t = AngleCdf::new(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        assert_eq!(sample_inverse_cdf(&t, 0.0), 0.0);
        assert_eq!(sample_inverse_cdf(&t, 1.0), 0.5);
        let t = AngleCdf::new(vec![(0.0, 0.0), (0.2, 0.5), (0.6, 1.0)]).unwrap();
        assert!((sample_inverse_cdf(&t, 0.75) - 0.4).abs() < 1e-15);
        assert_eq!(sample_inverse_cdf(&t, 0.5), 0.2);
    }

    #[test]
    fn cdf_and_inverse_agree() {
        let t = default_angle_cdf();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let a = sample_inverse_cdf(&t, u);
            assert!((t.cdf(a) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_table_validation() {
        assert!(AngleCdf::new(vec![(0.0, 0.0)]).is_err());
        assert!(AngleCdf::new(vec![(0.0, 0.1), (0.5, 1.0)]).is_err());
        assert!(AngleCdf::new(vec![(0.0, 0.0), (0.5, 0.9)]).is_err());
        assert!(AngleCdf::new(vec![(0.0, 0.0), (0.2, 0.5), (0.3, 0.5), (0.6, 1.0)]).is_err());
        assert!(AngleCdf::new(vec![(0.3, 0.0), (0.2, 0.5), (0.6, 1.0)]).is_err());
    }

    #[test]
    fn angle_table_from_csv() {
        let with_header = "angle_rad,cum_prob\n0,0\n0.2,0.5\n0.6,1\n";
        let t = AngleCdf::from_csv(with_header.as_bytes()).unwrap();
        assert_eq!(t.0, vec![(0.0, 0.0), (0.2, 0.5), (0.6, 1.0)]);
        let bare = "0, 0\n0.5, 1\n";
        assert_eq!(AngleCdf::from_csv(bare.as_bytes()).unwrap().0.len(), 2);
        assert!(AngleCdf::from_csv("0,0\nx,1\n".as_bytes()).is_err());
        assert!(AngleCdf::from_csv("0,0,3\n".as_bytes()).is_err());
    }

    #[test]
    fn truncated_normal_is_non_negative() {
        let d = TruncatedNormal {
            mean: -1.0,
            sd: 1.0,
        };
        for i in 0..1000 {
            let s = d.sample_with(i as f64 / 1000.0);
            assert!(s >= 0.0 && s.is_finite());
        }
        assert_eq!(
            TruncatedNormal {
                mean: -2.0,
                sd: 0.0
            }
            .sample_with(0.3),
            0.0
        );
        let d = TruncatedNormal {
            mean: 10.0,
            sd: 2.0,
        };
        assert!((d.sample_with(0.5) - 10.0).abs() < 1e-6);
    }

    fn key() -> BurstKey {
        BurstKey {
            seed: 42,
            person: 0,
            event: 0,
        }
    }

    #[test]
    fn cough_burst_has_8000_particles() {
        let prof = EmissionProfile::cough();
        assert_eq!(prof.release_instants(), 400);
        let mut id = 0;
        let burst = emit_burst(
            &prof,
            EventKind::Cough,
            Vec3::Z,
            Vec3::X,
            2.0,
            true,
            key(),
            &mut id,
        );
        assert_eq!(burst.len(), 8000);
        assert_eq!(id, 8000);
        for p in &burst {
            assert!(p.velocity.norm() >= 0.0);
            assert!(p.birth_time >= 2.0 && p.birth_time < 2.1);
            assert!(p.viral_load > 0.0);
            let angle = p
                .velocity
                .normalized()
                .unwrap()
                .dot(Vec3::X)
                .clamp(-1.0, 1.0)
                .acos();
            assert!(angle <= 0.35 + 1e-9);
        }
    }

    #[test]
    fn healthy_emitters_carry_no_load() {
        let mut id = 0;
        let burst = emit_burst(
            &EmissionProfile::speech(),
            EventKind::Speech,
            Vec3::Z,
            Vec3::X,
            0.0,
            false,
            key(),
            &mut id,
        );
        assert_eq!(burst.len(), 400);
        assert!(burst.iter().all(|p| p.viral_load == 0.0));
        assert_eq!(EmissionProfile::breath().burst_size(), 80);
    }

    #[test]
    fn thinning_keeps_about_half() {
        let mut prof = EmissionProfile::cough();
        prof.keep_prob = 0.5;
        let mut id = 0;
        let burst = emit_burst(
            &prof,
            EventKind::Cough,
            Vec3::Z,
            Vec3::X,
            0.0,
            true,
            key(),
            &mut id,
        );
        assert_eq!(id, 8000);
        let n = burst.len() as f64;
        // Binomial(8000, 0.5): sd ≈ 44.7.
        assert!((n - 4000.0).abs() < 4.0 * 44.8, "{n}");
    }

    #[test]
    fn thinned_particles_match_unthinned_ones() {
        let full = emit_burst(
            &EmissionProfile::cough(),
            EventKind::Cough,
            Vec3::Z,
            Vec3::X,
            0.0,
            true,
            key(),
            &mut 0,
        );
        let mut prof = EmissionProfile::cough();
        prof.keep_prob = 0.3;
        let thin = emit_burst(
            &prof,
            EventKind::Cough,
            Vec3::Z,
            Vec3::X,
            0.0,
            true,
            key(),
            &mut 0,
        );
        for p in &thin {
            let q = &full[p.burst_index as usize];
            assert_eq!(p.id, q.id);
            assert_eq!(
                (p.diameter, p.velocity, p.birth_time),
                (q.diameter, q.velocity, q.birth_time)
            );
        }
    }

    #[test]
    fn profile_validation() {
        for kind in [EventKind::Breath, EventKind::Speech, EventKind::Cough] {
            EmissionProfile::default_for(kind).validate("p").unwrap();
        }
        EmissionProfile::sneeze().validate("p").unwrap();
        let mut p = EmissionProfile::cough();
        p.diameter.gsd = 0.9;
        let err = p.validate("profiles.cough").unwrap_err().to_string();
        assert!(err.contains("profiles.cough.diameter.gsd"), "{err}");
        let mut p = EmissionProfile::cough();
        p.particles_per_interval = 0;
        assert!(p.validate("p").is_err());
        let mut p = EmissionProfile::cough();
        p.keep_prob = 1.5;
        assert!(p.validate("p").is_err());
    }
}
