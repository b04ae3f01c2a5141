//! Runs one benchmark protocol from the library and prints its JSON summary.
//!
//! `cargo run --release --example experiment -- [name] [out_dir]`
//! with `name` one of table1, fig2-kg-sweep, fig4-gronwall, glycolytic, opinion.

use std::path::PathBuf;

use kan_lmm::experiments::{run_experiment, Experiment, ExperimentOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let exp: Experiment = args.next().as_deref().unwrap_or("fig2-kg-sweep").parse()?;
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "results".into()));
    let opts = ExperimentOptions {
        quick: true,
        seed: 0,
        out_dir,
        iterations: None,
        dims: None,
    };
    let summary = run_experiment(exp, &opts)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
