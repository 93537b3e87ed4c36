//! Run the sampler into a run directory, interrupt it and resume.
//!
//! ```text
//! cargo run --release --example mcmc_checkpoint
//! ```

use lddmm::mcmc::{run_chain_with, RunOptions};
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};
use lddmm::ModelConfig;

fn main() -> lddmm::Result<()> {
    let spec = ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(4, 4, 16)
    };
    let (ds, _) = generate_dataset(&spec, 2)?;
    let cfg = ModelConfig {
        iterations: 200,
        burn_in: 100,
        thin: 2,
        seed: 9,
        checkpoint_every: 25,
        ..Default::default()
    };
    let root = std::env::temp_dir().join(format!("lddmm-checkpoint-{}", std::process::id()));
    let (full, split) = (root.join("full"), root.join("split"));

    let a = run_chain_with(&ds, &cfg, &RunOptions { run_dir: Some(full.clone()), ..Default::default() })?;
    println!("uninterrupted: {} stored draws", a.draws.len());

    let part = RunOptions {
        run_dir: Some(split.clone()),
        stop_after: Some(120),
        ..Default::default()
    };
    let b = run_chain_with(&ds, &cfg, &part)?;
    println!("interrupted after {} iterations", b.meta.iterations_completed);
    let resumed = RunOptions {
        run_dir: Some(split.clone()),
        resume: true,
        ..Default::default()
    };
    let c = run_chain_with(&ds, &cfg, &resumed)?;
    println!("resumed to {} iterations, {} stored draws", c.meta.iterations_completed, c.draws.len());
    println!("identical draws: {}", a.draws == c.draws);
    for (name, rate) in &c.meta.acceptance {
        println!("  acceptance {name}: {rate:.3}");
    }
    std::fs::remove_dir_all(&root).ok();
    Ok(())
}
