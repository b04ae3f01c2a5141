//! Trains on the linear system, then integrates the learned field past the
//! training window and tabulates how the trajectory error grows with the horizon.
//!
//! `cargo run --release --example predict_gronwall -- [iterations]`

use kan_lmm::analysis::{gronwall_envelope, gronwall_study, lipschitz_estimate};
use kan_lmm::odeint::integrate_reference;
use kan_lmm::systems::linear_system;
use kan_lmm::training::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(400);
    let sys = linear_system();
    let traj = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, 1.0, 1e-3)?;
    let config = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let (net, report) = train(&config, &traj, Some(sys.field.as_ref()))?;
    println!("trained {iterations} iterations, best loss {:.3e}", report.best_loss);

    let times: Vec<f64> = (1..=10).map(f64::from).collect();
    let rows = gronwall_study(&net, sys.field.as_ref(), &sys.x0, &times, 0.01)?;
    let eps = report.seminorm_error.unwrap_or(0.0);
    let lip = lipschitz_estimate(&net);
    println!("Lipschitz estimate {lip:.3e}, field error {eps:.3e}");
    for r in &rows {
        println!(
            "T = {:4.1}  error {:.4e}  sup error {:.4e}  envelope (L = 2) {:.4e}",
            r.t,
            r.error,
            r.sup_error,
            gronwall_envelope(0.0, eps, 2.0, r.t)
        );
    }
    Ok(())
}
