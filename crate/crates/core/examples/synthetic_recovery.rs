//! Simulate the small tone-learning scenario, fit it and score the recovery.
//!
//! ```text
//! cargo run --release --example synthetic_recovery -- [iterations] [burn_in] [thin]
//! ```

use std::time::Instant;

use lddmm::mcmc::run_chain;
use lddmm::simulator::{generate_dataset, recovery_score, ScenarioSpec};
use lddmm::ModelConfig;

fn main() -> lddmm::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let iterations = args.first().copied().unwrap_or(600);
    let burn_in = args.get(1).copied().unwrap_or(iterations / 3);
    let thin = args.get(2).copied().unwrap_or(5);

    let spec = ScenarioSpec::builtin("s7-small")?;
    let (ds, truth) = generate_dataset(&spec, 7)?;
    println!("simulated {} trials from {}", ds.len(), spec.name);

    let cfg = ModelConfig {
        iterations,
        burn_in,
        thin,
        seed: 11,
        ..Default::default()
    };
    let started = Instant::now();
    let out = run_chain(&ds, &cfg)?;
    println!(
        "{} iterations in {:.1} s, {} stored draws",
        iterations,
        started.elapsed().as_secs_f64(),
        out.draws.len()
    );

    let report = recovery_score(&truth, &out.draws, 10, 0.9)?;
    println!("combinations with >= 80% coverage for drift and boundary: {}/16", report.combos_covered(0.8));
    println!("mean co-clustering agreement: {:.3}", report.mean_agreement());
    for c in report.curves.iter().filter(|c| c.stimulus == c.decision) {
        println!(
            "  {:8} tone {} coverage {:.2} relative error {:.3}",
            c.parameter.name(),
            c.stimulus + 1,
            c.coverage,
            c.mean_abs_rel_error
        );
    }
    Ok(())
}
