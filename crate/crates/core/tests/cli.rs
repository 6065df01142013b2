mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::data_path;

fn gridtherm(args: &[&str], out: &Path) -> Output {
    let building = data_path("two_zone.toml");
    let weather = data_path("weather_24h.csv");
    let (cmd, rest) = args.split_first().unwrap();
    Command::new(env!("CARGO_BIN_EXE_gridtherm"))
        .arg(cmd)
        .arg("--building")
        .arg(building)
        .arg("--weather")
        .arg(weather)
        .arg("--out")
        .arg(out)
        .args(rest)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_snapshots_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridtherm(&["run", "--solver", "tensor", "--steps", "10"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 1..=10 {
        assert!(dir.path().join(format!("snapshot_{i:04}.csv")).exists());
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("snapshot_0010.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["row", "col", "type", "T", "T_mass"]
    );
    assert_eq!(rdr.records().count(), 276);
    let mut trace = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.records().count(), 10);
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["solver"].as_str(), Some("tensor"));
    assert_eq!(manifest["steps"].as_integer(), Some(10));
    assert_eq!(manifest["simulation"]["solar"].as_bool(), Some(true));
    assert!(dir.path().join("exchange_matrix.csv").exists());
}

#[test]
fn zero_steps_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridtherm(&["run", "--steps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--steps"));
}

#[test]
fn missing_weather_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let weather = dir.path().join("bad.csv");
    fs::write(
        &weather,
        "timestamp,t_air,t_gnd,t_sky,ghi,dhi\n2021-06-21T18:00Z,290,290,,0,0\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gridtherm"))
        .args(["run", "--building"])
        .arg(data_path("two_zone.toml"))
        .arg("--weather")
        .arg(&weather)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dni"), "{}", stderr(&o));
}

#[test]
fn compare_passes_on_bundled_building() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridtherm(&["compare", "--steps", "10"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let report: toml::Table = fs::read_to_string(dir.path().join("compare.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(report["pass"].as_bool(), Some(true));
    assert!(report["sig_figs_agreement"].as_integer().unwrap() >= 5);
    assert_eq!(report["steps"].as_array().unwrap().len(), 10);
}

#[test]
fn bench_records_every_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridtherm(&["bench", "--steps", "2", "--repeats", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: toml::Table = fs::read_to_string(dir.path().join("bench.toml"))
        .unwrap()
        .parse()
        .unwrap();
    for solver in ["iterative", "tensor"] {
        let totals = report[solver]["repeat_totals"].as_array().unwrap();
        assert_eq!(totals.len(), 3);
        let best = totals
            .iter()
            .map(|v| v.as_float().unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report[solver]["total_time"].as_float(), Some(best));
    }
    let table = fs::read_to_string(dir.path().join("bench.md")).unwrap();
    assert!(table.contains("Speedup") && table.contains("4.19"));
}

#[test]
fn single_step_bench_mean_equals_total() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridtherm(&["bench", "--steps", "1", "--repeats", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: toml::Table = fs::read_to_string(dir.path().join("bench.toml"))
        .unwrap()
        .parse()
        .unwrap();
    for solver in ["iterative", "tensor"] {
        assert_eq!(
            report[solver]["mean_per_step"].as_float(),
            report[solver]["total_time"].as_float()
        );
    }
}

#[test]
fn snapshots_are_byte_identical_across_runs() {
    for solver in ["tensor", "iterative"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let o = gridtherm(&["run", "--solver", solver, "--steps", "3"], dir.path());
            assert!(o.status.success(), "{}", stderr(&o));
        }
        for i in 1..=3 {
            let name = format!("snapshot_{i:04}.csv");
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap()
            );
        }
    }
}
