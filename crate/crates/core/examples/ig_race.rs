//! Inverse-Gaussian race: densities, choice probabilities and simulation.
//!
//! ```text
//! cargo run --release --example ig_race
//! ```

use lddmm::ig::{choice_probability, race_log_lik, simulate_trial, RaceParams};
use lddmm::random::task_rng;

fn main() -> lddmm::Result<()> {
    let race = RaceParams::new(0.2, vec![2.2, 0.9, 0.7], vec![1.5, 1.5, 1.6])?;
    println!("accumulator means of the decision time:");
    for d in 0..race.n_accumulators() {
        let a = race.accumulator(d);
        println!(
            "  response {}: mean {:.3} s, sd {:.3} s",
            d + 1,
            a.mean_decision_time(),
            a.decision_time_variance().sqrt()
        );
    }

    println!("\nlog joint density of (response, rt):");
    for tau in [0.4, 0.7, 1.0, 1.5] {
        let row: Vec<String> = (0..3).map(|d| format!("{:8.3}", race_log_lik(&race, d, tau))).collect();
        println!("  rt {tau:.1}: {}", row.join(" "));
    }

    let n = 50_000;
    let mut rng = task_rng(3, 0);
    let mut counts = [0usize; 3];
    let mut rt_sum = 0.0;
    for _ in 0..n {
        let (d, rt) = simulate_trial(&race, &mut rng);
        counts[d] += 1;
        rt_sum += rt;
    }
    println!("\n{n} simulated trials, mean rt {:.3} s", rt_sum / n as f64);
    for d in 0..3 {
        println!(
            "  response {}: simulated {:.4}, exact {:.4}",
            d + 1,
            counts[d] as f64 / n as f64,
            choice_probability(&race, d)
        );
    }
    Ok(())
}
