//! Learns the 2D linear field from an AM-1 residual on `[0, 1]` with `h = 1e-3`.
//!
//! `cargo run --release --example train_linear -- [iterations] [seed]`

use kan_lmm::odeint::integrate_reference;
use kan_lmm::systems::linear_system;
use kan_lmm::training::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2200);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let sys = linear_system();
    let traj = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, 1.0, 1e-3)?;
    let config = TrainConfig {
        iterations,
        seed,
        ..TrainConfig::default()
    };
    let (_net, report) = train(&config, &traj, Some(sys.field.as_ref()))?;
    let trace = &report.loss_trace;
    for i in (0..trace.len()).step_by((trace.len() / 10).max(1)) {
        println!("iter {i:5}  loss {:.4e}", trace[i]);
    }
    println!("best loss        {:.4e} (iteration {})", report.best_loss, report.best_iteration);
    println!("J_h              {:.4e}", report.jh);
    if let Some(jah) = report.jah {
        println!("J_ah             {jah:.4e}");
    }
    if let Some(err) = report.seminorm_error {
        println!("|f_NN - f|_2,h   {err:.4e}");
    }
    println!("wall clock       {:.1} s", report.wall_clock_seconds);
    Ok(())
}
