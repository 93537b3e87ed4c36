//! Posterior trajectories, co-clustering and CSV export from a short fit.
//!
//! ```text
//! cargo run --release --example posterior_summaries
//! ```

use lddmm::mcmc::run_chain;
use lddmm::posterior::{coclustering_matrix, export_summaries, population_trajectory, Parameter, SummaryRequest};
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};
use lddmm::ModelConfig;

fn main() -> lddmm::Result<()> {
    let spec = ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(6, 6, 20)
    };
    let (ds, truth) = generate_dataset(&spec, 4)?;
    let cfg = ModelConfig {
        iterations: 400,
        burn_in: 200,
        thin: 2,
        seed: 6,
        ..Default::default()
    };
    let draws = run_chain(&ds, &cfg)?.draws;
    println!("{} stored draws", draws.len());

    let grid = draws.block_grid();
    for (x, label) in [(0, "tone 1 -> response 1"), (1, "tone 1 -> response 2")] {
        let s = population_trajectory(&draws, x, Parameter::Drift, &grid, 0.9)?;
        let tr = truth.population_curve(x, Parameter::Drift, &grid)?;
        println!("\npopulation drift, {label}:");
        println!("  block  truth   mean   90% band");
        for g in 0..grid.len() {
            println!(
                "  {:5.1} {:6.3} {:6.3}  [{:.3}, {:.3}]",
                grid[g], tr[g], s.mean[g], s.lower[g], s.upper[g]
            );
        }
    }

    let d0 = ds.n_categories();
    let last = ds.n_blocks() - 1;
    let co = coclustering_matrix(&draws, last)?;
    println!("\nco-clustering of success combinations in the last block:");
    for s in 0..d0 {
        let row: Vec<String> = (0..d0)
            .map(|r| format!("{:.2}", co[s * d0 + r]))
            .collect();
        println!("  tone {}: {}", s + 1, row.join(" "));
    }

    let out = std::env::temp_dir().join(format!("lddmm-summary-{}", std::process::id()));
    let req = SummaryRequest {
        subjects: vec![0],
        ..Default::default()
    };
    for p in export_summaries(&draws, &out, &req)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
