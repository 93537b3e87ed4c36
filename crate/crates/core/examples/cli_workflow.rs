//! The command-line workflow driven in-process: simulate, fit, summarize and diagnose.
//!
//! ```text
//! cargo run --release --example cli_workflow
//! ```
//!
//! The same steps from a shell:
//!
//! ```text
//! lddmm simulate --scenario scenario.toml --seed 3 --out sim
//! lddmm fit sim/data.csv --out run --iterations 300 --burn-in 100 --thin 2
//! lddmm summarize run --subjects 1,2
//! lddmm diagnose run --subject 1
//! ```

use lddmm::cli::main_with_args;
use lddmm::simulator::{ScenarioSpec, StimulusSchedule};

fn main() {
    let root = std::env::temp_dir().join(format!("lddmm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&root).expect("temporary directory");
    let scenario = root.join("scenario.toml");
    let spec = ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(4, 4, 16)
    };
    std::fs::write(&scenario, toml::to_string(&spec).expect("serializable")).expect("write scenario");

    let sim = root.join("sim");
    let run = root.join("run");
    let data = sim.join("data.csv");
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--scenario".into(), scenario.display().to_string(), "--seed".into(), "3".into(), "--out".into(), sim.display().to_string()],
        vec![
            "fit".into(),
            data.display().to_string(),
            "--out".into(),
            run.display().to_string(),
            "--iterations".into(),
            "300".into(),
            "--burn-in".into(),
            "100".into(),
            "--thin".into(),
            "2".into(),
        ],
        vec!["summarize".into(), run.display().to_string(), "--subjects".into(), "1,2".into()],
        vec!["diagnose".into(), run.display().to_string(), "--subject".into(), "1".into()],
    ];
    for step in steps {
        let mut args = vec!["lddmm".to_string()];
        args.extend(step.iter().cloned());
        let code = main_with_args(args);
        println!("lddmm {} -> exit {code}", step[0]);
        if code != 0 {
            std::process::exit(code);
        }
    }
    for dir in [&sim, &run, &run.join("summary"), &run.join("diagnostics")] {
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .expect("output directory")
            .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        println!("{}: {}", dir.display(), names.join(", "));
    }
    std::fs::remove_dir_all(&root).ok();
}
