//! Bounded-confidence opinion dynamics: cluster formation along a seeded trajectory.
//!
//! `cargo run --release --example opinion -- [agents] [seed]`

use kan_lmm::odeint::integrate_reference;
use kan_lmm::systems::{interaction_components, opinion_dynamics};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let d = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let sys = opinion_dynamics(d, seed)?;
    let traj = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, 10.0, 0.01)?;
    let mut last = 0;
    for (n, s) in traj.states.iter().enumerate() {
        let c = interaction_components(s, 1.0);
        if n == 0 || c != last || n + 1 == traj.states.len() {
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            println!(
                "t = {:5.2}  components {c}  range [{:.3}, {:.3}]",
                traj.time(n),
                sorted[0],
                sorted[d - 1]
            );
            last = c;
        }
    }
    Ok(())
}
