//! Discrete channels, mutual information and countermeasure transforms.
//!
//! Transmission between an emitter and a receiver is treated as a channel
//! whose input is the emitter's infectious state at release and whose output
//! is whether a released particle reached the receiver.

use serde::{Deserialize, Serialize};

use crate::collision::{Absorber, ApertureKind};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::simulation::SimulationReport;
use crate::vec3::Vec3;

const PROB_TOL: f64 = 1e-12;

/// Input distribution plus row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteChannel {
    #[serde(default)]
    pub input_labels: Vec<String>,
    #[serde(default)]
    pub output_labels: Vec<String>,
    pub input_dist: Vec<f64>,
    /// `transition[i][j] = P(Y = j | X = i)`.
    pub transition: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], path: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::validation(path, "must not be empty"));
    }
    if let Some(i) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation(
            format!("{path}[{i}]"),
            "must be a finite probability >= 0",
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::validation(
            path,
            format!("must sum to 1 (sums to {sum})"),
        ));
    }
    Ok(())
}

impl DiscreteChannel {
    pub fn new(input_dist: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let c = DiscreteChannel {
            input_labels: Vec::new(),
            output_labels: Vec::new(),
            input_dist,
            transition,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_labels(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        self.input_labels = inputs;
        self.output_labels = outputs;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.input_dist, "input_dist")?;
        if self.transition.len() != self.input_dist.len() {
            return Err(Error::validation(
                "transition",
                format!(
                    "has {} rows but input_dist has {} entries",
                    self.transition.len(),
                    self.input_dist.len()
                ),
            ));
        }
        let width = self.transition[0].len();
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != width {
                return Err(Error::validation(
                    format!("transition[{i}]"),
                    "rows differ in length",
                ));
            }
            check_distribution(row, &format!("transition[{i}]"))?;
        }
        if !self.input_labels.is_empty() && self.input_labels.len() != self.input_dist.len() {
            return Err(Error::validation(
                "input_labels",
                "length must match input_dist",
            ));
        }
        if !self.output_labels.is_empty() && self.output_labels.len() != width {
            return Err(Error::validation(
                "output_labels",
                "length must match transition rows",
            ));
        }
        Ok(())
    }

    /// `P(Y)`.
    pub fn output_dist(&self) -> Vec<f64> {
        let mut py = vec![0.0; self.transition[0].len()];
        for (px, row) in self.input_dist.iter().zip(&self.transition) {
            for (acc, t) in py.iter_mut().zip(row) {
                *acc += px * t;
            }
        }
        py
    }
}

/// Parse a channel from JSON (`input_dist`, `transition`, optional labels)
/// and validate it.
pub fn parse_channel(document: &str) -> Result<DiscreteChannel> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let ch: DiscreteChannel = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            Error::validation(path, inner.to_string())
        } else {
            Error::Parse {
                path,
                message: inner.to_string(),
            }
        }
    })?;
    ch.validate()?;
    Ok(ch)
}

pub fn load_channel_file(path: impl AsRef<std::path::Path>) -> Result<DiscreteChannel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel(&text)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// `I(X; Y) = H(Y) - H(Y | X)` in bits.
pub fn mutual_information(channel: &DiscreteChannel) -> Result<f64> {
    channel.validate()?;
    // Inputs that never occur do not count toward row equality.
    let mut used = channel
        .transition
        .iter()
        .zip(&channel.input_dist)
        .filter(|(_, &p)| p > 0.0)
        .map(|(row, _)| row);
    let first = used.next().expect("validated distribution has mass");
    if used.all(|row| row == first) {
        return Ok(0.0);
    }
    let hy = entropy_bits(&channel.output_dist());
    let hyx: f64 = channel
        .input_dist
        .iter()
        .zip(&channel.transition)
        .map(|(px, row)| px * entropy_bits(row))
        .sum();
    // Roundoff can leave a tiny negative for independent inputs.
    Ok((hy - hyx).max(0.0))
}

/// Raw counts behind an estimated channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCounts {
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    /// Particles released per input class.
    pub emitted: Vec<u64>,
    /// `outcomes[i][j]`: particles of class `i` with output `j`; rows sum to
    /// `emitted[i]`.
    pub outcomes: Vec<Vec<u64>>,
}

impl ChannelCounts {
    /// Two classes (non-infectious, infectious) by (not received, received).
    pub fn binary(emitted: [u64; 2], received: [u64; 2]) -> Result<Self> {
        for i in 0..2 {
            if received[i] > emitted[i] {
                return Err(Error::validation(
                    format!("received[{i}]"),
                    "cannot exceed the emitted count",
                ));
            }
        }
        Ok(ChannelCounts {
            input_labels: vec!["non_infectious".into(), "infectious".into()],
            output_labels: vec!["not_received".into(), "received".into()],
            emitted: emitted.to_vec(),
            outcomes: (0..2)
                .map(|i| vec![emitted[i] - received[i], received[i]])
                .collect(),
        })
    }
}

/// Normalize counts into a channel. Classes that emitted nothing carry no
/// information about the transition and are dropped with a warning.
pub fn estimate_channel(counts: &ChannelCounts) -> Result<DiscreteChannel> {
    let n = counts.emitted.len();
    if n == 0 || counts.outcomes.len() != n {
        return Err(Error::validation(
            "outcomes",
            "need one outcome row per input class",
        ));
    }
    let width = counts.outcomes[0].len();
    if width == 0 {
        return Err(Error::validation("outcomes", "need at least one output"));
    }
    let total: u64 = counts.emitted.iter().sum();
    if total == 0 {
        return Err(Error::validation("emitted", "no particles were emitted"));
    }
    let mut input_dist = Vec::new();
    let mut transition = Vec::new();
    let mut input_labels = Vec::new();
    for i in 0..n {
        let row = &counts.outcomes[i];
        if row.len() != width {
            return Err(Error::validation(
                format!("outcomes[{i}]"),
                "rows differ in length",
            ));
        }
        if row.iter().sum::<u64>() != counts.emitted[i] {
            return Err(Error::validation(
                format!("outcomes[{i}]"),
                "must sum to the emitted count",
            ));
        }
        let label = counts
            .input_labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| i.to_string());
        if counts.emitted[i] == 0 {
            log::warn!("input class `{label}` emitted no particles; dropped from the channel");
            continue;
        }
        let e = counts.emitted[i] as f64;
        input_dist.push(e / total as f64);
        transition.push(row.iter().map(|&c| c as f64 / e).collect::<Vec<_>>());
        input_labels.push(label);
    }
    // Integer division leaves sums within an ulp or two of 1.
    let s: f64 = input_dist.iter().sum();
    input_dist.iter_mut().for_each(|p| *p /= s);
    for row in &mut transition {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    DiscreteChannel::new(input_dist, transition)?
        .with_labels(input_labels, counts.output_labels.clone())
}

/// Particles from `emitter` absorbed anywhere on `receiver`, by aperture kind.
pub fn received_from(report: &SimulationReport, emitter: u32, receiver: u32) -> [u64; 4] {
    let mut out = [0u64; 4];
    for c in &report.collisions {
        if let Absorber::Aperture(id) = c.absorber {
            if id.person == receiver && c.emitter_id == emitter {
                out[id.kind.index()] += 1;
            }
        }
    }
    out
}

/// Per-person outcome used in summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonMetrics {
    pub id: u32,
    pub name: String,
    pub state: String,
    pub effective_dose: f64,
    /// Weighted dose per aperture kind.
    pub dose_by_aperture: [f64; 4],
    /// Particles absorbed per aperture kind, any emitter.
    pub received_by_aperture: [u64; 4],
}

/// Transmission summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionMetrics {
    pub persons: Vec<PersonMetrics>,
    /// Pooled over all ordered emitter/receiver pairs of distinct persons.
    pub channel_counts: ChannelCounts,
    /// `None` when nothing was emitted.
    pub channel: Option<DiscreteChannel>,
    pub mutual_information_bits: Option<f64>,
}

/// Per-person doses and the pooled infectious-state → reception channel.
///
/// Each (emitter, receiver) pair with distinct persons contributes the
/// emitter's released particles as trials, and the receiver's absorptions of
/// those particles (any aperture) as successes.
pub fn infection_metrics(report: &SimulationReport) -> Result<InfectionMetrics> {
    let persons = report
        .persons
        .iter()
        .map(|p| {
            let mut received = [0u64; 4];
            for c in report.absorptions() {
                if let Absorber::Aperture(id) = c.absorber {
                    if id.person == p.id {
                        received[id.kind.index()] += 1;
                    }
                }
            }
            PersonMetrics {
                id: p.id,
                name: p.name.clone(),
                state: p.state.name().to_owned(),
                effective_dose: p.dose.total(),
                dose_by_aperture: p.dose.0,
                received_by_aperture: received,
            }
        })
        .collect();

    let mut emitted = [0u64; 2];
    let mut received = [0u64; 2];
    let ids: Vec<u32> = report.persons.iter().map(|p| p.id).collect();
    // Infectious state at release, keyed by (person, event).
    let classes: std::collections::HashMap<(u32, u32), usize> = report
        .emissions
        .iter()
        .map(|e| ((e.person, e.event_id), usize::from(e.infectious)))
        .collect();
    let class_of = |person: u32, event: u32| classes.get(&(person, event)).copied().unwrap_or(0);
    for ec in &report.emitters {
        let receivers = ids.iter().filter(|&&r| r != ec.person).count() as u64;
        emitted[0] += ec.non_infectious * receivers;
        emitted[1] += ec.infectious * receivers;
    }
    for c in report.absorptions() {
        if c.absorber.owner() != Some(c.emitter_id) {
            received[class_of(c.emitter_id, c.event_id)] += 1;
        }
    }
    let channel_counts = ChannelCounts::binary(emitted, received)?;
    let (channel, mi) = if emitted.iter().sum::<u64>() > 0 {
        let ch = estimate_channel(&channel_counts)?;
        let mi = mutual_information(&ch)?;
        (Some(ch), Some(mi))
    } else {
        (None, None)
    };
    Ok(InfectionMetrics {
        persons,
        channel_counts,
        channel,
        mutual_information_bits: mi,
    })
}

/// An intervention applied to a scenario before running it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CountermeasureAction {
    /// Thin every emission to `keep_prob` and scale launch and jet speeds.
    Mask { keep_prob: f64, speed_factor: f64 },
    /// Translate the listed persons' paths.
    Distance { moves: Vec<(u32, Vec3)> },
    /// Delay the listed persons' event processes.
    TimeShift { delays: Vec<(u32, f64)> },
}

fn person_mut<'a>(
    s: &'a mut Scenario,
    id: u32,
    path: &str,
) -> Result<&'a mut crate::agents::Person> {
    s.persons
        .iter_mut()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::validation(path, format!("no person with id {id}")))
}

/// Return a modified copy of `scenario`.
pub fn apply_countermeasure(
    scenario: &Scenario,
    action: &CountermeasureAction,
) -> Result<Scenario> {
    let mut s = scenario.clone();
    match action {
        CountermeasureAction::Mask {
            keep_prob,
            speed_factor,
        } => {
            if !(*keep_prob > 0.0 && *keep_prob <= 1.0) {
                return Err(Error::validation("mask.keep_prob", "must be in (0, 1]"));
            }
            if !(speed_factor.is_finite() && *speed_factor > 0.0) {
                return Err(Error::validation("mask.speed_factor", "must be > 0"));
            }
            for p in &mut s.persons {
                for prof in p.profiles.iter_mut() {
                    prof.keep_prob *= keep_prob;
                    prof.speed.mean *= speed_factor;
                    prof.speed.sd *= speed_factor;
                    if let Some(jet) = &mut prof.jet {
                        jet.speed *= speed_factor;
                    }
                }
            }
        }
        CountermeasureAction::Distance { moves } => {
            for (i, (id, delta)) in moves.iter().enumerate() {
                if !delta.is_finite() {
                    return Err(Error::validation(
                        format!("distance.moves[{i}]"),
                        "must be finite",
                    ));
                }
                let p = person_mut(&mut s, *id, &format!("distance.moves[{i}]"))?;
                for w in &mut p.path {
                    w.position += *delta;
                }
            }
        }
        CountermeasureAction::TimeShift { delays } => {
            for (i, (id, d)) in delays.iter().enumerate() {
                if !(d.is_finite() && *d >= 0.0) {
                    return Err(Error::validation(
                        format!("time_shift.delays[{i}]"),
                        "must be >= 0",
                    ));
                }
                let p = person_mut(&mut s, *id, &format!("time_shift.delays[{i}]"))?;
                p.event_delay += d;
            }
        }
    }
    s.validate()?;
    Ok(s)
}

/// Count of `receiver`'s face absorptions.
pub fn face_count(report: &SimulationReport, receiver: u32) -> u64 {
    report
        .absorptions()
        .filter(|c| {
            matches!(c.absorber, Absorber::Aperture(id) if id.person == receiver && id.kind == ApertureKind::Face)
        })
        .count() as u64
}
