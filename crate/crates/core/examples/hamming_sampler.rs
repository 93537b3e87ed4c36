//! Hamming balls and the locally informed latent-state update.
//!
//! Runs a few short chains that update only the latent states, one per
//! balancing function, and reports how often the labels change.
//!
//! ```text
//! cargo run --release --example hamming_sampler
//! ```

use lddmm::config::{Balancing, ModelConfig, UpdateMask};
use lddmm::fixed_effects::hamming::{ball_size, hamming_ball, hamming_distance};
use lddmm::mcmc::{init_state, Sampler};
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};

fn main() -> lddmm::Result<()> {
    let center = [0u8, 1, 0];
    let ball = hamming_ball(&center, 1, 3);
    println!("radius-1 ball around {center:?} with 3 labels ({} points):", ball.len() / 3);
    for p in ball.chunks(3) {
        println!("  {p:?} at distance {}", hamming_distance(p, &center));
    }
    for (n, m) in [(4, 1), (4, 2), (8, 1), (8, 2)] {
        println!("ball size for {n} positions, radius {m}, 4 labels: {}", ball_size(n, m, 4));
    }

    let spec = ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(4, 4, 16)
    };
    let (ds, _) = generate_dataset(&spec, 3)?;
    for balancing in [Balancing::Sqrt, Balancing::Identity, Balancing::Uniform] {
        let cfg = ModelConfig {
            z_max: 4,
            hamming_radius: 1,
            balancing,
            iterations: 200,
            burn_in: 0,
            seed: 5,
            updates: UpdateMask {
                latent: true,
                ..UpdateMask::none()
            },
            ..Default::default()
        };
        let state = init_state(&ds, &cfg)?;
        let mut sampler = Sampler::with_state(&ds, cfg, state)?;
        let mut changes = 0usize;
        let mut prev = sampler.state().latent.labels.clone();
        for _ in 0..200 {
            sampler.sweep()?;
            let now = &sampler.state().latent.labels;
            changes += now.iter().zip(&prev).filter(|(a, b)| a != b).count();
            prev = now.clone();
        }
        println!(
            "{balancing:?}: {changes} label changes over 200 sweeps, final log-likelihood {:.1}",
            sampler.state().log_likelihood(&ds)
        );
    }
    Ok(())
}
