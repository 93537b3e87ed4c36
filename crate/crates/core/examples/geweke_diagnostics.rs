//! Geweke convergence diagnostics on synthetic series and on a fitted chain.
//!
//! ```text
//! cargo run --release --example geweke_diagnostics
//! ```

use lddmm::diagnostics::{diagnostics_report, geweke_z};
use lddmm::mcmc::run_chain;
use lddmm::random::task_rng;
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};
use lddmm::ModelConfig;
use rand_distr::{Distribution, StandardNormal};

fn ar1(phi: f64, drift: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = task_rng(seed, 0);
    let mut x = 0.0;
    (0..n)
        .map(|j| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + e;
            x + drift * j as f64 / n as f64
        })
        .collect()
}

fn main() -> lddmm::Result<()> {
    for (label, series) in [
        ("white noise", ar1(0.0, 0.0, 5000, 1)),
        ("AR(1), phi 0.9", ar1(0.9, 0.0, 5000, 2)),
        ("AR(1) with a trend", ar1(0.5, 3.0, 5000, 3)),
    ] {
        let g = geweke_z(&series, 0.1, 0.5)?;
        println!("{label:20} z {:6.2}  p {:.3}", g.z, g.p_value);
    }

    let spec = ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(4, 4, 16)
    };
    let (ds, _) = generate_dataset(&spec, 5)?;
    let cfg = ModelConfig {
        iterations: 600,
        burn_in: 200,
        thin: 2,
        seed: 7,
        ..Default::default()
    };
    let out = run_chain(&ds, &cfg)?;
    let report = diagnostics_report(&out.draws, 0, 0.1, 0.5, out.meta.acceptance.clone())?;
    println!(
        "\nfitted chain: {} traces for subject 1, rejection rate at 5%: {:.3}",
        report.entries.len(),
        report.rejection_rate(0.05)
    );
    for e in report.entries.iter().filter(|e| e.result.p_value < 0.05).take(8) {
        println!("  flagged {} block {:?}: z {:.2}", e.parameter, e.block, e.result.z);
    }
    Ok(())
}
