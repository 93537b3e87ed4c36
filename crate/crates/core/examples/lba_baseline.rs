//! Linear ballistic accumulator baseline fitted per block by maximum likelihood.
//!
//! ```text
//! cargo run --release --example lba_baseline
//! ```

use lddmm::lba::{fit_block, simulate_lba_dataset, LbaOptions, LbaStimulusParams, VarianceMode};

fn main() -> lddmm::Result<()> {
    let d0 = 3;
    let truth: Vec<LbaStimulusParams> = (0..d0)
        .map(|s| {
            let mut m = vec![1.0; d0];
            m[s] = 2.0;
            LbaStimulusParams::new(1.2, m, vec![0.25; d0])
        })
        .collect::<lddmm::Result<_>>()?;
    let ds = simulate_lba_dataset(&truth, 1, 1500, 12)?;
    println!("simulated {} LBA trials", ds.len());

    for (label, variance) in [("free variances", VarianceMode::Free), ("variance fixed at 0.25", VarianceMode::Fixed(0.25))] {
        let opts = LbaOptions {
            restarts: 8,
            seed: 4,
            variance,
            ..Default::default()
        };
        let fit = fit_block(&ds, 0, &opts)?;
        println!("\n{label}: log-likelihood {:.2}", fit.log_lik);
        for (s, sf) in fit.stimuli.iter().enumerate() {
            let p = &sf.params;
            println!(
                "  tone {}: b {:.3}  m {:?}  v {:?}  b/m {:.3} (truth 0.600)",
                s + 1,
                p.b,
                p.m.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                p.v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                p.b / p.m[s]
            );
        }
    }
    println!("\nwith free variances only ratios such as b/m are identified");
    Ok(())
}
