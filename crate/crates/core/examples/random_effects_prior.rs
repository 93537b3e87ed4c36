//! Functional random effects: difference penalty, prior draws and log prior.
//!
//! ```text
//! cargo run --example random_effects_prior
//! ```

use lddmm::bspline::SplineBasis;
use lddmm::random::task_rng;
use lddmm::random_effects::{difference_penalty, re_log_prior, sample_re_prior};

fn main() -> lddmm::Result<()> {
    let k = 6;
    let p = difference_penalty(k)?;
    println!("first-difference penalty for {k} coefficients:");
    for row in p.chunks(k) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:4.0}")).collect();
        println!("  {}", cells.join(""));
    }

    let basis = SplineBasis::for_blocks(k - 1)?;
    let grid = basis.grid(2);
    let mut rng = task_rng(17, 0);
    for (var_a, var_s) in [(0.05, 10.0), (0.05, 0.01)] {
        println!("\namplitude variance {var_a}, smoothness variance {var_s}:");
        for _ in 0..3 {
            let beta = sample_re_prior(var_a, var_s, k, &mut rng)?;
            let curve: Vec<String> = grid
                .iter()
                .map(|&t| basis.eval_function(&beta, t).map(|v| format!("{v:6.2}")))
                .collect::<lddmm::Result<_>>()?;
            println!("  log prior {:7.2} | {}", re_log_prior(&beta, var_a, var_s), curve.join(""));
        }
    }
    Ok(())
}
