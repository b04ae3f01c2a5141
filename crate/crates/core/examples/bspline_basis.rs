//! Clamped B-spline basis: values, partition of unity and a spline derivative.
//!
//! `cargo run --example bspline_basis -- [degree] [intervals]`

use kan_lmm::bspline::BSplineBasis;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let degree = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let grid = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let basis = BSplineBasis::new(degree, grid, 0.0, 1.0)?;
    println!("degree {degree}, {grid} intervals, {} basis functions", basis.basis_count());
    println!("knots {:?}", basis.knots());

    for i in 0..=8 {
        let x = i as f64 / 8.0;
        let v = basis.eval(x)?;
        let sum: f64 = v.iter().sum();
        let shown: Vec<String> = v.iter().map(|b| format!("{b:.3}")).collect();
        println!("x = {x:.3}  sum = {sum:.15}  [{}]", shown.join(" "));
    }

    // coefficients on the Greville abscissae reproduce x exactly
    let k = degree;
    let knots = basis.knots();
    let greville: Vec<f64> = (0..basis.basis_count())
        .map(|j| knots[j + 1..=j + k].iter().sum::<f64>() / k as f64)
        .collect();
    let x = 0.37;
    println!("s(x) with Greville coefficients at {x}: {:.15}", basis.eval_spline(&greville, x));
    let slope: f64 = basis
        .eval_derivative(x)?
        .iter()
        .zip(&greville)
        .map(|(d, c)| d * c)
        .sum();
    println!("s'(x): {slope:.15}");
    Ok(())
}
