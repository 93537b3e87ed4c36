//! End-to-end tests of the `lddmm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lddmm::lba::{simulate_lba_dataset, LbaStimulusParams};
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};

fn lddmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lddmm"))
        .args(args)
        .env_remove("LDDMM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_spec() -> ScenarioSpec {
    ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(3, 3, 12)
    }
}

fn tiny_data(dir: &Path) -> PathBuf {
    let (ds, _) = generate_dataset(&tiny_spec(), 21).unwrap();
    let path = dir.join("tiny.csv");
    ds.write_csv(&path).unwrap();
    path
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_writes_the_default_scenario_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = lddmm(&["simulate", "--seed", "4", "--out", p(out)]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv = fs::read_to_string(a.join("data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 10 * 40);
    assert!(csv.starts_with("subject,block,trial,stimulus,response,rt"));
    assert!(a.join("truth.json").is_file() && a.join("simulate_meta.json").is_file());
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn simulate_accepts_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("tiny.toml");
    fs::write(&spec_path, toml::to_string(&tiny_spec()).unwrap()).unwrap();
    let out = dir.path().join("sim");
    let res = lddmm(&["simulate", "--scenario", p(&spec_path), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let rows = fs::read_to_string(out.join("data.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 3 * 3 * 12);
}

#[test]
fn usage_and_validation_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lddmm(&["simulate"])), 1);
    assert_eq!(code(&lddmm(&["frobnicate"])), 1);
    assert_eq!(code(&lddmm(&["fit", "--balancing", "cubic", "x.csv"])), 1);
    assert_eq!(code(&lddmm(&["--help"])), 0);

    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&lddmm(&["fit", p(&missing), "--out", p(&dir.path().join("r"))])), 2);
    let res = lddmm(&["simulate", "--scenario", "no-such-scenario", "--out", p(&dir.path().join("s"))]);
    assert_eq!(code(&res), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "subject,block,trial,stimulus,response,rt\n1,1,1,1,1,-0.5\n").unwrap();
    assert_eq!(code(&lddmm(&["fit", p(&bad), "--out", p(&dir.path().join("r2"))])), 2);
}

#[test]
fn fit_summarize_diagnose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let run = dir.path().join("run");
    let fit = [
        "fit", p(&data), "--out", p(&run), "--iterations", "140", "--burn-in", "20", "--thin", "2", "--seed", "5",
        "--z-max", "3",
    ];
    let res = lddmm(&fit);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(run.join("meta.json").is_file());
    assert!(run.join("draws").is_dir());

    // refuses to overwrite a finished run
    assert_eq!(code(&lddmm(&fit)), 2);

    let res = lddmm(&["summarize", p(&run), "--subjects", "1,3", "--grid", "4"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["population_trajectories.csv", "individual_trajectories.csv", "coclustering.csv", "offsets.csv"] {
        assert!(run.join("summary").join(f).is_file(), "missing {f}");
    }
    let pop = fs::read_to_string(run.join("summary/population_trajectories.csv")).unwrap();
    assert!(pop.lines().count() > 1);

    let res = lddmm(&["diagnose", p(&run), "--subject", "2"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(run.join("diagnostics/geweke.csv").is_file());
    assert!(run.join("diagnostics/acceptance.csv").is_file());

    assert_eq!(code(&lddmm(&["summarize", p(&run), "--subjects", "9"])), 2);
    assert_eq!(code(&lddmm(&["diagnose", p(&run), "--subject", "0"])), 2);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let common = ["--iterations", "50", "--burn-in", "10", "--thin", "2", "--seed", "8", "--checkpoint-every", "10"];
    let full = dir.path().join("full");
    let split = dir.path().join("split");

    let mut args = vec!["fit", p(&data), "--out", p(&full)];
    args.extend(common);
    assert_eq!(code(&lddmm(&args)), 0);

    let mut args = vec!["fit", p(&data), "--out", p(&split), "--stop-after", "30"];
    args.extend(common);
    assert_eq!(code(&lddmm(&args)), 0);
    let mut args = vec!["fit", p(&data), "--out", p(&split), "--resume"];
    args.extend(common);
    let res = lddmm(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(dir_bytes(&full.join("draws")), dir_bytes(&split.join("draws")));
}

#[test]
fn lba_baseline_fits_simulated_lba_data() {
    let dir = tempfile::tempdir().unwrap();
    let params: Vec<LbaStimulusParams> = (0..2)
        .map(|s| {
            let mut m = vec![1.0; 2];
            m[s] = 2.0;
            LbaStimulusParams::new(1.2, m, vec![0.25; 2]).unwrap()
        })
        .collect();
    let ds = simulate_lba_dataset(&params, 2, 200, 3).unwrap();
    let data = dir.path().join("lba.csv");
    ds.write_csv(&data).unwrap();

    let out = dir.path().join("lba");
    let res = lddmm(&["lba", p(&data), "--out", p(&out), "--restarts", "3", "--variance", "fixed=0.25"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let est = fs::read_to_string(out.join("lba_estimates.csv")).unwrap();
    assert!(est.lines().count() > 1);
    assert!(out.join("lba_restarts.csv").is_file() && out.join("lba_meta.json").is_file());

    let other = dir.path().join("lba2");
    let res = lddmm(&["lba", p(&data), "--out", p(&other), "--lba-offset", "0.1,0.1,0.1"]);
    assert_eq!(code(&res), 2);
    assert_eq!(code(&lddmm(&["lba", p(&data), "--variance", "sometimes"])), 1);
}
