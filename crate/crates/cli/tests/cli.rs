use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn airborne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airborne"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A cougher facing a receiver 1 m away, short enough for quick sweeps.
const SMALL: &str = r#"{
  "name": "small",
  "horizon": 0.6,
  "profiles": {"cough": {"particles_per_interval": 2}},
  "persons": [
    {"id": 0, "name": "A", "position": [0, 0, 0], "facing": [1, 0, 0],
     "infection": "infectious", "scripted_events": [{"time": 0.0, "kind": "cough"}]},
    {"id": 1, "name": "B", "position": [1.5, 0, 0], "facing": [-1, 0, 0]}
  ]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_five_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "run".to_owned(),
            "--scenario".into(),
            "paper_demo".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
            "--seed".into(),
            "42".into(),
            "--horizon".into(),
            "0.5".into(),
        ]
    };
    for out in [&out1, &out2] {
        let a = args(out);
        let o = airborne(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", stderr(&o));
        let line = stdout(&o);
        assert!(line.starts_with("emitted=8000 "), "{line}");
        assert!(
            line.contains("face[B]=") && line.contains("mi_bits="),
            "{line}"
        );
    }
    for f in [
        "absorptions.csv",
        "infections.csv",
        "density.csv",
        "density.pgm",
        "summary.json",
    ] {
        let a = fs::read(out1.join(f)).unwrap();
        assert_eq!(a, fs::read(out2.join(f)).unwrap(), "{f}");
    }
    let mut rdr = csv::Reader::from_path(out1.join("absorptions.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec![
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
            "viral_load"
        ]
    );
}

#[test]
fn run_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = airborne(&["run", "--scenario", "/nonexistent/s.json", "--out", out_s]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = airborne(&[
        "run",
        "--scenario",
        "paper_demo",
        "--out",
        out_s,
        "--dt",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`dt`"), "{}", stderr(&o));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"horizon": 1, "persons": [{"id": 0, "position": [0,0,0], "dose_threshold": -1}]}"#,
    );
    let o = airborne(&["run", "--scenario", &bad, "--out", out_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("persons[0].dose_threshold"),
        "{}",
        stderr(&o)
    );

    let o = airborne(&["run", "--scenario", "paper_demo"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists(), "nothing may be written on error");

    let blocker = write(dir.path(), "file", "x");
    let small = write(dir.path(), "small.json", SMALL);
    let o = airborne(&[
        "run",
        "--scenario",
        &small,
        "--out",
        &format!("{blocker}/out"),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn mi_from_channel_files() {
    let dir = tempfile::tempdir().unwrap();
    let z = write(
        dir.path(),
        "z.json",
        r#"{"input_dist": [0.9, 0.1], "transition": [[1, 0], [0.95, 0.05]]}"#,
    );
    let o = airborne(&["mi", "--channel", &z]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("0.016775"));

    let id = write(
        dir.path(),
        "id.json",
        r#"{"input_dist": [0.5, 0.5], "transition": [[1, 0], [0, 1]]}"#,
    );
    let o = airborne(&["mi", "--channel", &id]);
    assert_eq!(stdout(&o).lines().next(), Some("1.000000"));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"input_dist": [0.5, 0.6], "transition": [[1], [1]]}"#,
    );
    assert_eq!(airborne(&["mi", "--channel", &bad]).status.code(), Some(1));
    assert_eq!(airborne(&["mi"]).status.code(), Some(1));
    assert_eq!(
        airborne(&["mi", "--channel", &z, "--from-report", &z])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        airborne(&["mi", "--channel", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn mi_from_report_without_infectious_emitters() {
    let dir = tempfile::tempdir().unwrap();
    let healthy = SMALL.replace(r#""infection": "infectious", "#, "");
    let scenario = write(dir.path(), "healthy.json", &healthy);
    let out = dir.path().join("run");
    let o = airborne(&[
        "run",
        "--scenario",
        &scenario,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = airborne(&["mi", "--from-report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("0.000000"));
}

fn sweep_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

#[test]
fn mask_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "small.json", SMALL);
    let out = dir.path().join("sweep");
    let o = airborne(&[
        "sweep",
        "--scenario",
        &scenario,
        "--action",
        "mask",
        "--values",
        "1.0,0.5,0.25",
        "--seeds",
        "0,1,2,3,4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = out.join("sweep.csv");
    let header = csv::Reader::from_path(&path)
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(header, vec!["value", "seed", "face_0", "face_1", "mi_bits"]);
    let rows = sweep_rows(&path);
    assert_eq!(rows.len(), 15);

    // Mean B face count does not grow as the mask tightens.
    let mean = |v: &str| {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == v)
            .map(|r| r[3].parse().unwrap())
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (m1, m05, m025) = (mean("1"), mean("0.5"), mean("0.25"));
    assert!(m1 > 0.0 && m05 <= m1 && m025 <= m05, "{m1} {m05} {m025}");

    // keep_prob 1.0 matches a plain run with the same seed.
    let run_out = dir.path().join("plain");
    let o = airborne(&[
        "run",
        "--scenario",
        &scenario,
        "--out",
        run_out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(o.status.success());
    let line = stdout(&o);
    let row = rows.iter().find(|r| r[0] == "1" && r[1] == "3").unwrap();
    assert!(
        line.contains(&format!("face[B]={}", row[3])),
        "{line} vs {row:?}"
    );
}

#[test]
fn sweep_rejects_unknown_actions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = airborne(&[
        "sweep",
        "--scenario",
        "paper_demo",
        "--action",
        "teleport",
        "--values",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = airborne(&[
        "sweep",
        "--scenario",
        "paper_demo",
        "--action",
        "mask",
        "--values",
        "x",
        "--out",
        "o",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn distance_and_timeshift_sweeps_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "small.json", SMALL);
    for (action, values) in [("distance:1", "0,1.5"), ("timeshift", "0,0.2")] {
        let out = dir.path().join(action.replace(':', "_"));
        let o = airborne(&[
            "sweep",
            "--scenario",
            &scenario,
            "--action",
            action,
            "--values",
            values,
            "--seeds",
            "0",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{action}: {}", stderr(&o));
        assert_eq!(sweep_rows(&out.join("sweep.csv")).len(), 2);
    }
}
