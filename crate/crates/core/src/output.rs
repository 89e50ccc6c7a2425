//! Run artifacts: CSV tables, the density map and the JSON summary.
//!
//! Files are written into a staging directory next to the destination and
//! moved into place only after every file succeeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::{Absorber, CollisionRecord};
use crate::error::{Error, Result};
use crate::infometrics::{infection_metrics, ChannelCounts, PersonMetrics};
use crate::scenario::{DensityGrid, Scenario};
use crate::simulation::{Counters, SimulationReport};
use crate::vec3::Vec3;

pub const ABSORPTIONS_HEADER: [&str; 11] = [
    "particle_id",
    "emitter_id",
    "event_id",
    "absorber_owner",
    "absorber_kind",
    "time_s",
    "x_m",
    "y_m",
    "z_m",
    "speed_mps",
    "viral_load",
];

pub const INFECTIONS_HEADER: [&str; 5] = ["time_s", "person", "old_state", "new_state", "trigger"];

/// Crossing counts on the density grid. `counts[iy][ix]`, row 0 at `y_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub grid: DensityGrid,
    pub counts: Vec<Vec<u64>>,
    /// Crossings outside the grid.
    pub outside: u64,
}

impl DensityMap {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Comma-separated rows, first row at `y_min`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.counts {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Binary greyscale image scaled so the fullest cell is white; the top
    /// image row is `y_max`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.grid.cells_x, self.grid.cells_y);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        let max = self.max();
        for row in self.counts.iter().rev() {
            for &c in row {
                let v = if max == 0 {
                    0
                } else {
                    ((c as f64 / max as f64) * 255.0).round() as u8
                };
                out.push(v);
            }
        }
        out
    }
}

/// Histogram of density-plane crossings.
pub fn density_map(report: &SimulationReport) -> DensityMap {
    let grid = report.scenario.density_grid;
    let mut counts = vec![vec![0u64; grid.cells_x]; grid.cells_y];
    let mut outside = 0;
    for c in &report.crossings {
        match grid.cell_of(c.x, c.y) {
            Some((ix, iy)) => counts[iy][ix] += 1,
            None => outside += 1,
        }
    }
    DensityMap {
        grid,
        counts,
        outside,
    }
}

/// SHA-256 of the scenario's canonical JSON form.
pub fn config_hash(scenario: &Scenario) -> String {
    let bytes = serde_json::to_vec(scenario).expect("scenario serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub plane_height_m: f64,
    pub in_grid: u64,
    pub outside_grid: u64,
    pub max_cell: u64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub config_sha256: String,
    pub horizon_s: f64,
    pub dt_s: f64,
    pub counters: Counters,
    pub emission_events: usize,
    pub infection_events: usize,
    pub persons: Vec<PersonMetrics>,
    pub channel_counts: ChannelCounts,
    pub mutual_information_bits: Option<f64>,
    pub density: DensitySummary,
}

pub fn summarize(report: &SimulationReport) -> Result<Summary> {
    let metrics = infection_metrics(report)?;
    let density = density_map(report);
    let s = &report.scenario;
    Ok(Summary {
        scenario: s.name.clone(),
        seed: s.seed,
        config_sha256: config_hash(s),
        horizon_s: s.horizon,
        dt_s: s.dt,
        counters: report.counters,
        emission_events: report.emissions.len(),
        infection_events: report.infections.len(),
        persons: metrics.persons,
        channel_counts: metrics.channel_counts,
        mutual_information_bits: metrics.mutual_information_bits,
        density: DensitySummary {
            plane_height_m: s.density_plane_height,
            in_grid: density.total(),
            outside_grid: density.outside,
            max_cell: density.max(),
        },
    })
}

/// Read `summary.json`, given either the file or the run directory.
pub fn load_summary_file(path: impl AsRef<Path>) -> Result<Summary> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push("summary.json");
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

pub fn absorptions_csv(records: &[CollisionRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let p = Path::new("absorptions.csv");
    w.write_record(ABSORPTIONS_HEADER)
        .map_err(|e| csv_error(p, e))?;
    for r in records {
        let owner = r
            .absorber
            .owner()
            .map(|o| o.to_string())
            .unwrap_or_default();
        w.write_record([
            r.particle_id.to_string(),
            r.emitter_id.to_string(),
            r.event_id.to_string(),
            owner,
            r.absorber.kind_str().to_owned(),
            r.time.to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.position.z.to_string(),
            r.speed.to_string(),
            r.viral_load.to_string(),
        ])
        .map_err(|e| csv_error(p, e))?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("flushing csv: {e}")))
}

pub fn infections_csv(report: &SimulationReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let p = Path::new("infections.csv");
    w.write_record(INFECTIONS_HEADER)
        .map_err(|e| csv_error(p, e))?;
    for ev in &report.infections {
        w.write_record([
            ev.time.to_string(),
            ev.person.to_string(),
            ev.old_state.clone(),
            ev.new_state.clone(),
            ev.trigger.to_string(),
        ])
        .map_err(|e| csv_error(p, e))?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("flushing csv: {e}")))
}

/// Parse an `absorptions.csv` file back into records.
pub fn read_absorptions_csv(path: impl AsRef<Path>) -> Result<Vec<CollisionRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(ABSORPTIONS_HEADER) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let bad = |col: &str| Error::Parse {
            path: format!("{}:{}", path.display(), line + 2),
            message: format!("invalid {col}"),
        };
        let num =
            |i: usize| -> Result<f64> { row[i].parse().map_err(|_| bad(ABSORPTIONS_HEADER[i])) };
        out.push(CollisionRecord {
            particle_id: row[0].parse().map_err(|_| bad("particle_id"))?,
            emitter_id: row[1].parse().map_err(|_| bad("emitter_id"))?,
            event_id: row[2].parse().map_err(|_| bad("event_id"))?,
            absorber: Absorber::from_columns(&row[3], &row[4]).ok_or_else(|| bad("absorber"))?,
            time: num(5)?,
            position: Vec3::new(num(6)?, num(7)?, num(8)?),
            speed: num(9)?,
            viral_load: num(10)?,
        });
    }
    Ok(out)
}

/// Names of the files produced by [`write_outputs`].
pub const OUTPUT_FILES: [&str; 5] = [
    "absorptions.csv",
    "infections.csv",
    "density.csv",
    "density.pgm",
    "summary.json",
];

/// Write all artifacts of `report` into `out_dir`, creating it if needed.
/// Existing files with the same names are replaced; on failure the
/// destination is left untouched.
pub fn write_outputs(report: &SimulationReport, out_dir: impl AsRef<Path>) -> Result<Summary> {
    let out_dir = out_dir.as_ref();
    let summary = summarize(report)?;
    let density = density_map(report);
    let mut summary_json = serde_json::to_vec_pretty(&summary)
        .map_err(|e| Error::Internal(format!("serializing summary: {e}")))?;
    summary_json.push(b'\n');
    let files: [(&str, Vec<u8>); 5] = [
        ("absorptions.csv", absorptions_csv(&report.collisions)?),
        ("infections.csv", infections_csv(report)?),
        ("density.csv", density.to_csv().into_bytes()),
        ("density.pgm", density.to_pgm()),
        ("summary.json", summary_json),
    ];

    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let stem = out_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let staging = parent.join(format!(".{stem}.staging-{}", std::process::id()));
    let result = (|| -> Result<()> {
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
        for (name, bytes) in &files {
            let p = staging.join(name);
            let mut f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f.write_all(bytes).map_err(|e| Error::io(&p, e))?;
            f.sync_all().map_err(|e| Error::io(&p, e))?;
        }
        if !out_dir.exists() {
            fs::rename(&staging, out_dir).map_err(|e| Error::io(out_dir, e))?;
            return Ok(());
        }
        if !out_dir.is_dir() {
            return Err(Error::io(
                out_dir,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "not a directory"),
            ));
        }
        for (name, _) in &files {
            let dst = out_dir.join(name);
            fs::rename(staging.join(name), &dst).map_err(|e| Error::io(&dst, e))?;
        }
        fs::remove_dir(&staging).map_err(|e| Error::io(&staging, e))
    })();
    if result.is_err() && staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result.map(|()| summary)
}
