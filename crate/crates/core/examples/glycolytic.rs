//! Seven-species glycolytic oscillator: reference trajectories for the displayed
//! model and for the form with `(A - S6)` in every consumption term.
//!
//! `cargo run --release --example glycolytic -- [t1]`

use kan_lmm::odeint::integrate_reference;
use kan_lmm::systems::{glycolytic_with, GlycolyticForm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t1 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10.0);
    for form in [GlycolyticForm::Consistent, GlycolyticForm::Displayed] {
        let sys = glycolytic_with(form);
        println!("{}: f(x0) = {:?}", sys.name, sys.field.eval_vec(&sys.x0));
        match integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, t1, 0.01) {
            Ok(traj) => {
                let min = traj.states.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
                let max = traj.states.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
                println!("  [0, {t1}]: {} samples, min {min:.4}, max {max:.4}", traj.states.len());
                for n in (0..traj.states.len()).step_by(traj.states.len() / 5) {
                    let s: Vec<String> = traj.states[n].iter().map(|v| format!("{v:.3}")).collect();
                    println!("  t = {:5.2}  [{}]", traj.time(n), s.join(", "));
                }
            }
            Err(e) => println!("  reference integration failed: {e}"),
        }
    }
    Ok(())
}
