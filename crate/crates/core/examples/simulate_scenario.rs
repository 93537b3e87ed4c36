//! Built-in and custom simulation scenarios with their ground truth.
//!
//! ```text
//! cargo run --release --example simulate_scenario
//! ```

use lddmm::posterior::Parameter;
use lddmm::simulator::{generate_dataset, ScenarioSpec};

fn main() -> lddmm::Result<()> {
    let spec = ScenarioSpec::builtin("s7-default")?;
    let (ds, truth) = generate_dataset(&spec, 1)?;
    println!(
        "{}: {} trials ({} subjects x {} blocks x {} trials), {} latent labels",
        spec.name,
        ds.len(),
        spec.n_subjects,
        spec.n_blocks,
        spec.n_trials,
        spec.dims()?.z_max
    );

    let d0 = ds.n_categories();
    println!("\naccuracy by block:");
    for t in 0..ds.n_blocks() {
        let mut row = Vec::new();
        for s in 0..d0 {
            let idx = ds.trials_of_block_stimulus(t, s);
            let acc = idx.iter().filter(|&&j| ds.records()[j].response == s).count() as f64 / idx.len() as f64;
            row.push(format!("{acc:.2}"));
        }
        println!("  block {:2}: {}", t + 1, row.join("  "));
    }

    let grid: Vec<f64> = (1..=spec.n_blocks).map(|t| t as f64).collect();
    println!("\ntrue population drift for the correct responses, blocks 1 to {}:", spec.n_blocks);
    for s in 0..d0 {
        let curve = truth.population_curve(s * d0 + s, Parameter::Drift, &grid)?;
        let cells: Vec<String> = curve.iter().map(|v| format!("{v:.2}")).collect();
        println!("  tone {}: {}", s + 1, cells.join(" "));
    }

    let custom = ScenarioSpec {
        name: "fewer-subjects".into(),
        ..ScenarioSpec::tone_learning(5, 10, 40)
    };
    custom.validate()?;
    let text = toml::to_string(&custom).expect("serializable");
    println!("\ncustom scenario as TOML ({} lines), loadable with `lddmm simulate --scenario`:", text.lines().count());
    for line in text.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
