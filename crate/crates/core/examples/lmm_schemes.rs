//! The 18 multistep schemes: exact coefficients, root condition and observed order.
//!
//! `cargo run --release --example lmm_schemes`

use kan_lmm::lmm::{empirical_order, LmmScheme};
use kan_lmm::systems::linear_system;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = linear_system();
    let exact = sys.analytic.clone().expect("linear system has a closed form");
    for scheme in LmmScheme::all() {
        let alpha: Vec<String> = scheme.alpha_exact().iter().map(|c| c.to_string()).collect();
        let beta: Vec<String> = scheme.beta_exact().iter().map(|c| c.to_string()).collect();
        let window = scheme.index_window(100)?;
        let roots = scheme.root_condition(&window)?;
        let moduli: Vec<String> = roots.moduli.iter().map(|m| format!("{m:.3}")).collect();
        let hs = [0.04, 0.02, 0.01, 0.005];
        let fit = empirical_order(&scheme, exact.as_ref(), sys.field.as_ref(), 0.0, 1.0, &hs)?;
        println!(
            "{:6} p={} observed {:5.2}  alpha [{}]  beta [{}]  |roots| [{}]{}",
            scheme.label(),
            scheme.order(),
            fit.slope,
            alpha.join(", "),
            beta.join(", "),
            moduli.join(", "),
            if roots.satisfied {
                ""
            } else if roots.on_boundary {
                "  (boundary)"
            } else {
                "  (violated)"
            }
        );
    }
    Ok(())
}
