//! Approximation upper bound and VC lower-bound shape as grid, width and dimension vary.
//!
//! `cargo run --example bounds_report`

use kan_lmm::analysis::{upper_bound, vc_lower_bound_shape, BoundsReport, HolderSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let holder = HolderSpec::new(1.0, 1.0, 1.0)?;
    println!("{}", BoundsReport::compute(holder, 3, 64, 5, 2, 1.0)?.to_text());

    println!("upper bound against grid size (k = 3, N = 5, d = 2, L = 1)");
    for g in [4, 8, 16, 32, 64, 128] {
        println!("  G = {g:4}  {:.6e}", upper_bound(&holder, 3, g, 5, 2, 1.0)?);
    }
    println!("upper bound against width (k = 3, G = 16, d = 2, L = 1)");
    for n in [1, 2, 4, 8] {
        println!("  N = {n:4}  {:.6e}", upper_bound(&holder, 3, 16, n, 2, 1.0)?);
    }
    println!("VC lower-bound shape against dimension (k = 3, G = 64, N = 2d + 1, alpha = 1)");
    for d in [5, 10, 20, 50, 100, 200, 400] {
        println!("  d = {d:4}  {:.6}", vc_lower_bound_shape(3, 64, 2 * d + 1, d, 1.0)?);
    }
    Ok(())
}
