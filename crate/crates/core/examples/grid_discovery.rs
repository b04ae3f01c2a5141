//! Grid-value discovery on the linear system and the conditioning of the
//! augmented matrix as the grid is refined.
//!
//! `cargo run --release --example grid_discovery -- [family] [steps]`

use kan_lmm::discovery::{assemble, discover_grid};
use kan_lmm::lmm::{Family, LmmScheme};
use kan_lmm::odeint::integrate_reference;
use kan_lmm::systems::linear_system;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().map(|s| s.parse()).transpose()?.unwrap_or(Family::Am);
    let steps = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let scheme = LmmScheme::new(family, steps)?;
    let sys = linear_system();

    println!("{}: max grid error and kappa_2 on [0, 1]", scheme.label());
    for n1 in [50usize, 100, 200, 400] {
        let h = 1.0 / n1 as f64;
        let traj = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, 1.0, h)?;
        let found = discover_grid(&scheme, &traj)?;
        let mut err: f64 = 0.0;
        for (offset, n) in (found.first..=found.last).enumerate() {
            let f = sys.field.eval_vec(&traj.states[n]);
            for (c, fc) in f.iter().enumerate() {
                err = err.max((fc - found.values[offset][c]).abs());
            }
        }
        let kappa = match assemble(&scheme, &traj, 0)?.condition_number() {
            Ok(k) => format!("{k:.4e}"),
            Err(e) => e.to_string(),
        };
        println!("N1 = {n1:4}  h = {h:.5}  max error {err:.3e}  kappa_2 {kappa}");
    }
    Ok(())
}
