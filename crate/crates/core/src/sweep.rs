//! Parameter sweeps of a countermeasure over values and seeds.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infometrics::{
    apply_countermeasure, face_count, infection_metrics, CountermeasureAction,
};
use crate::scenario::Scenario;
use crate::simulation::run_simulation_with_threads;

/// Which countermeasure a sweep value parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAction {
    /// Value is the mask's keep probability; launch speeds are unchanged.
    Mask,
    /// Value is extra separation in metres from the first person, applied to
    /// `target` or to everyone else.
    Distance { target: Option<u32> },
    /// Value is an event delay in seconds for `target` or for everyone.
    TimeShift { target: Option<u32> },
}

impl FromStr for SweepAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, target) = match s.split_once(':') {
            Some((n, t)) => {
                let id = t
                    .parse::<u32>()
                    .map_err(|_| Error::validation("action", format!("invalid person id `{t}`")))?;
                (n, Some(id))
            }
            None => (s, None),
        };
        match (name, target) {
            ("mask", None) => Ok(SweepAction::Mask),
            ("distance", t) => Ok(SweepAction::Distance { target: t }),
            ("timeshift", t) => Ok(SweepAction::TimeShift { target: t }),
            _ => Err(Error::validation(
                "action",
                format!("unknown action `{s}` (expected mask, distance[:id] or timeshift[:id])"),
            )),
        }
    }
}

impl fmt::Display for SweepAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepAction::Mask => f.write_str("mask"),
            SweepAction::Distance { target: None } => f.write_str("distance"),
            SweepAction::Distance { target: Some(t) } => write!(f, "distance:{t}"),
            SweepAction::TimeShift { target: None } => f.write_str("timeshift"),
            SweepAction::TimeShift { target: Some(t) } => write!(f, "timeshift:{t}"),
        }
    }
}

impl SweepAction {
    /// The concrete countermeasure for sweep value `value`.
    pub fn to_countermeasure(
        self,
        scenario: &Scenario,
        value: f64,
    ) -> Result<CountermeasureAction> {
        match self {
            SweepAction::Mask => Ok(CountermeasureAction::Mask {
                keep_prob: value,
                speed_factor: 1.0,
            }),
            SweepAction::Distance { target } => {
                let reference = scenario
                    .persons
                    .first()
                    .ok_or_else(|| Error::validation("persons", "distance sweep needs persons"))?;
                let origin = reference.position_at(0.0);
                let ids: Vec<u32> = match target {
                    Some(t) => vec![t],
                    None => scenario.persons.iter().skip(1).map(|p| p.id).collect(),
                };
                let mut moves = Vec::new();
                for id in ids {
                    let p = scenario
                        .persons
                        .iter()
                        .find(|p| p.id == id)
                        .ok_or_else(|| {
                            Error::validation("action", format!("no person with id {id}"))
                        })?;
                    let mut away = p.position_at(0.0) - origin;
                    away.z = 0.0;
                    let dir = away.normalized().ok_or_else(|| {
                        Error::validation(
                            "action",
                            format!("person {id} stands on the reference person"),
                        )
                    })?;
                    moves.push((id, dir * value));
                }
                Ok(CountermeasureAction::Distance { moves })
            }
            SweepAction::TimeShift { target } => {
                let ids: Vec<u32> = match target {
                    Some(t) => vec![t],
                    None => scenario.persons.iter().map(|p| p.id).collect(),
                };
                Ok(CountermeasureAction::TimeShift {
                    delays: ids.into_iter().map(|id| (id, value)).collect(),
                })
            }
        }
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    /// Face absorptions per person, in scenario order.
    pub face_counts: Vec<u64>,
    pub mutual_information_bits: Option<f64>,
}

/// Run the cartesian product of `values` and `seeds`, values outermost.
pub fn run_sweep(
    scenario: &Scenario,
    action: SweepAction,
    values: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::validation("values", "must not be empty"));
    }
    if seeds.is_empty() {
        return Err(Error::validation("seeds", "must not be empty"));
    }
    let mut rows = Vec::with_capacity(values.len() * seeds.len());
    for &value in values {
        let cm = action.to_countermeasure(scenario, value)?;
        let mut modified = apply_countermeasure(scenario, &cm)?;
        for &seed in seeds {
            modified.seed = seed;
            let report = run_simulation_with_threads(&modified, threads)?;
            let metrics = infection_metrics(&report)?;
            log::info!("{action}={value} seed={seed}: {:?}", report.counters);
            rows.push(SweepRow {
                value,
                seed,
                face_counts: modified
                    .persons
                    .iter()
                    .map(|p| face_count(&report, p.id))
                    .collect(),
                mutual_information_bits: metrics.mutual_information_bits,
            });
        }
    }
    Ok(rows)
}

/// `value,seed,face_<id>...,mi_bits`; missing MI is left empty.
pub fn write_sweep_csv(
    scenario: &Scenario,
    rows: &[SweepRow],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("value,seed");
    for p in &scenario.persons {
        text.push_str(&format!(",face_{}", p.id));
    }
    text.push_str(",mi_bits\n");
    for r in rows {
        text.push_str(&format!("{},{}", r.value, r.seed));
        for c in &r.face_counts {
            text.push_str(&format!(",{c}"));
        }
        match r.mutual_information_bits {
            Some(mi) => text.push_str(&format!(",{mi}\n")),
            None => text.push_str(",\n"),
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    // Write beside the target and rename so readers never see a partial file.
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let written = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(text.as_bytes()).and_then(|()| f.sync_all()))
        .and_then(|()| std::fs::rename(&tmp, path));
    written.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
