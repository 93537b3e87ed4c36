//! Quadratic B-spline basis over training blocks.
//!
//! ```text
//! cargo run --example bspline_basis
//! ```

use lddmm::bspline::SplineBasis;

fn main() -> lddmm::Result<()> {
    let basis = SplineBasis::for_blocks(5)?;
    let (lo, hi) = basis.domain();
    println!("{} basis functions on [{lo}, {hi}], spacing {}", basis.n_basis(), basis.spacing());
    println!("knots: {:?}", basis.knots());

    println!("\n   t   basis values                         sum");
    for t in basis.grid(2) {
        let v = basis.eval(t)?;
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
        println!("{t:5.2}   {}   {:.3}", cells.join(" "), v.iter().sum::<f64>());
    }

    println!("\nblock weights on the two active coefficients:");
    for (t, w) in basis.block_weights().iter().enumerate() {
        println!("  block {}: {:?}", t + 1, w);
    }

    let coeffs: Vec<f64> = (0..basis.n_basis()).map(|k| (0.5 + 0.3 * k as f64).ln()).collect();
    let curve: Vec<String> = basis
        .grid(4)
        .iter()
        .map(|&t| basis.eval_function(&coeffs, t).map(|v| format!("{:.3}", v.exp())))
        .collect::<lddmm::Result<_>>()?;
    println!("\nexp of a smooth log-drift curve: {}", curve.join(" "));
    Ok(())
}
