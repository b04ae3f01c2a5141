//! Command-line front end.
//!
//! Every flag has a matching key in the TOML run configuration passed with
//! `--config`; values from the file take precedence over flags, and flags over
//! built-in defaults. `KAN_LMM_THREADS` sets the worker thread count.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{lipschitz_estimate, BoundsReport, HolderSpec};
use crate::discovery::{assemble_with, solve_grid_values, AuxPlacement};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, Experiment, ExperimentOptions};
use crate::kan::KanNetwork;
use crate::lmm::{Family, LmmScheme};
use crate::odeint::{integrate_learned, integrate_reference};
use crate::systems::{opinion_dynamics_with, SystemDef};
use crate::trajectory::{fmt17, Trajectory};
use crate::training::{train, LossKind, TrainConfig};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "KAN_LMM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kan-lmm", version, about = "Vector-field discovery with B-spline KANs and multistep residuals")]
pub struct Cli {
    /// TOML run configuration; its values override flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a benchmark system and write its trajectory CSV.
    Gen(RunConfig),
    /// Recover grid values of the field by forward substitution.
    SolveGrid(RunConfig),
    /// Train a network on a trajectory CSV.
    Train(RunConfig),
    /// Integrate a trained model from an initial state.
    Predict(RunConfig),
    /// Print approximation bounds and the VC lower-bound shape.
    Bounds(RunConfig),
    /// Run a benchmark protocol (table1, fig2-kg-sweep, fig4-gronwall, glycolytic, opinion).
    Experiment {
        name: String,
        #[command(flatten)]
        run: RunConfig,
    },
}

/// Every run parameter. All fields are optional; unset values fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Benchmark system: linear, glycolytic or opinion.
    #[arg(long)]
    pub system: Option<String>,
    /// Number of agents for the opinion system [default: 50].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Seed for network initialization, or for opinion initial states in `gen` [default: 0; 42 for gen].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Opinion-dynamics rate scaling [default: 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    /// Grid spacing [default: 0.001].
    #[arg(long)]
    pub h: Option<f64>,
    /// Input trajectory CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Multistep family: ab, am or bdf [default: am].
    #[arg(long)]
    pub scheme: Option<Family>,
    /// Number of steps M [default: 1].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Spline degree [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Spline grid intervals [default: 64].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Hidden width [default: 2d+1].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Adam learning rate [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training iterations [default: 2200].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Loss: jh or jah [default: jah].
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Model document.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Hölder exponent of the target [default: 1].
    #[arg(long)]
    pub holder_alpha: Option<f64>,
    /// Hölder constant of the target [default: 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Radius of the input ball [default: 1].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Lipschitz constant of the network; estimated from --model when absent [default: 1].
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub json: Option<bool>,
    /// Reduced experiment scale.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quick: Option<bool>,
    /// Experiment output directory [default: results].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Opinion dimensions for the opinion experiment, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Auxiliary-row placement for solve-grid: initial or terminal (experimental).
    #[arg(long)]
    pub placement: Option<AuxPlacement>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self, top, system, dim, seed, alpha, t0, t1, h, data, scheme, steps, k, grid, hidden,
            lr, iters, loss, out, report, model, x0, holder_alpha, lambda, radius, lipschitz,
            json, quick, out_dir, dims, placement
        );
        self
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            family: self.scheme.unwrap_or(d.family),
            steps: self.steps.unwrap_or(d.steps),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            iterations: self.iters.unwrap_or(d.iterations),
            seed: self.seed.unwrap_or(d.seed),
            loss: self.loss.unwrap_or(d.loss),
            degree: self.k.unwrap_or(d.degree),
            grid: self.grid.unwrap_or(d.grid),
            hidden: self.hidden.or(d.hidden),
            ..d
        }
    }

    fn system_def(&self, default_seed: u64) -> Result<Option<SystemDef>> {
        let Some(name) = self.system.as_deref() else {
            return Ok(None);
        };
        let seed = self.seed.unwrap_or(default_seed);
        if name == "opinion" {
            return opinion_dynamics_with(self.dim.unwrap_or(50), seed, self.alpha.unwrap_or(1.0))
                .map(Some);
        }
        SystemDef::by_name(name, self.dim, seed).map(Some)
    }

    fn scheme(&self) -> Result<LmmScheme> {
        LmmScheme::new(self.scheme.unwrap_or(Family::Am), self.steps.unwrap_or(1))
    }
}

fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::InvalidConfig(format!("missing required --{name}")))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let merge = |flags: RunConfig| match &file {
        Some(f) => flags.overlay(f),
        None => flags,
    };
    match cli.command {
        Command::Gen(c) => cmd_gen(&merge(c)),
        Command::SolveGrid(c) => cmd_solve_grid(&merge(c)),
        Command::Train(c) => cmd_train(&merge(c)),
        Command::Predict(c) => cmd_predict(&merge(c)),
        Command::Bounds(c) => cmd_bounds(&merge(c)),
        Command::Experiment { name, run } => cmd_experiment(&name, &merge(run)),
    }
}

pub fn cmd_gen(c: &RunConfig) -> Result<()> {
    if c.system.is_none() {
        return Err(Error::InvalidConfig("missing required --system".into()));
    }
    let sys = c.system_def(42)?.expect("system is set");
    let t0 = c.t0.unwrap_or(sys.interval.0);
    let t1 = c.t1.unwrap_or(sys.interval.1);
    let h = c.h.unwrap_or(1e-3);
    let x0 = c.x0.clone().unwrap_or_else(|| sys.x0.clone());
    let out = required(&c.out, "out")?;
    let traj = integrate_reference(sys.field.as_ref(), &x0, t0, t1, h)?;
    traj.save(&out)?;
    println!(
        "{}: d = {}, [{t0}, {t1}], h = {h}, {} rows -> {}",
        sys.name,
        sys.dim,
        traj.states.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_solve_grid(c: &RunConfig) -> Result<()> {
    let traj = Trajectory::load(required(&c.data, "data")?)?;
    let scheme = c.scheme()?;
    let placement = c.placement.unwrap_or_default();
    let truth = c.system_def(42)?;
    let d = traj.dim();
    let mut columns = Vec::with_capacity(d);
    let mut kappa = None;
    for comp in 0..d {
        let sys = assemble_with(&scheme, &traj, comp, placement)?;
        columns.push(solve_grid_values(&sys)?);
        if comp == 0 {
            kappa = Some(match sys.condition_number() {
                Ok(k) => format!("{k:.6e}"),
                Err(Error::SingularMatrix(_)) => "inf (numerically singular)".to_string(),
                Err(e) => return Err(e),
            });
        }
    }
    let window = scheme.index_window(traj.intervals())?;
    let out = required(&c.out, "out")?;
    let mut w = csv::Writer::from_path(&out)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("fhat_{i}")));
    if truth.is_some() {
        header.extend((1..=d).map(|i| format!("ftrue_{i}")));
    }
    w.write_record(&header)?;
    let mut max_err: f64 = 0.0;
    for (i, n) in (window.r..=window.q).enumerate() {
        let x = &traj.states[n];
        let mut row = vec![fmt17(traj.time(n))];
        row.extend(x.iter().map(|&v| fmt17(v)));
        row.extend(columns.iter().map(|col| fmt17(col[i])));
        if let Some(sys) = &truth {
            let f = sys.field.eval_vec(x);
            for (c, fc) in f.iter().enumerate() {
                max_err = max_err.max((fc - columns[c][i]).abs());
            }
            row.extend(f.iter().map(|&v| fmt17(v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    println!(
        "{}: r = {}, q = {}, unknowns = {}, auxiliary = {}, kappa_2 = {}",
        scheme.label(),
        window.r,
        window.q,
        window.tau,
        window.omega_a,
        kappa.unwrap_or_default()
    );
    if truth.is_some() {
        println!("max |fhat - f| = {max_err:.6e}");
    }
    Ok(())
}

pub fn cmd_train(c: &RunConfig) -> Result<()> {
    let traj = Trajectory::load(required(&c.data, "data")?)?;
    let cfg = c.train_config();
    let truth = c.system_def(42)?;
    let (net, report) = train(&cfg, &traj, truth.as_ref().map(|s| s.field.as_ref()))?;
    let out = required(&c.out, "out")?;
    fs::write(&out, net.to_document())?;
    if let Some(p) = &c.report {
        fs::write(p, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    println!(
        "{}: {} iterations, loss {:.6e} -> {:.6e} (best at {})",
        report.scheme,
        cfg.iterations,
        report.initial_loss,
        report.best_loss,
        report.best_iteration
    );
    if let Some(e) = report.seminorm_error {
        println!("|f_NN - f|_2,h = {e:.6e}");
    }
    Ok(())
}

pub fn cmd_predict(c: &RunConfig) -> Result<()> {
    let net = KanNetwork::from_document(&fs::read_to_string(required(&c.model, "model")?)?)?;
    let x0 = required(&c.x0, "x0")?;
    let t0 = c.t0.unwrap_or(0.0);
    let t1 = required(&c.t1, "t1")?;
    let h = c.h.unwrap_or(1e-3);
    let traj = integrate_learned(&net, &x0, t0, t1, h)?;
    let out = required(&c.out, "out")?;
    traj.save(&out)?;
    println!("{} rows -> {}", traj.states.len(), out.display());
    Ok(())
}

pub fn cmd_bounds(c: &RunConfig) -> Result<()> {
    let holder = HolderSpec::new(
        c.holder_alpha.unwrap_or(1.0),
        c.lambda.unwrap_or(1.0),
        c.radius.unwrap_or(1.0),
    )?;
    let model = match &c.model {
        Some(p) => Some(KanNetwork::from_document(&fs::read_to_string(p)?)?),
        None => None,
    };
    let (k, g, n, d) = match &model {
        Some(m) => {
            let s = m.shape();
            (s.degree, s.grid, s.hidden, s.d_in)
        }
        None => {
            let d = c.dim.unwrap_or(2);
            (
                c.k.unwrap_or(3),
                c.grid.unwrap_or(64),
                c.hidden.unwrap_or(2 * d + 1),
                d,
            )
        }
    };
    let lipschitz = c
        .lipschitz
        .or_else(|| model.as_ref().map(lipschitz_estimate))
        .unwrap_or(1.0);
    let report = BoundsReport::compute(holder, k, g, n, d, lipschitz)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if c.json.unwrap_or(false) {
        println!("{json}");
    } else {
        print!("{}", report.to_text());
    }
    if let Some(p) = &c.out {
        fs::write(p, json)?;
    }
    Ok(())
}

pub fn cmd_experiment(name: &str, c: &RunConfig) -> Result<()> {
    let exp: Experiment = name.parse()?;
    let opts = ExperimentOptions {
        quick: c.quick.unwrap_or(false),
        seed: c.seed.unwrap_or(0),
        out_dir: c.out_dir.clone().unwrap_or_else(|| PathBuf::from("results")),
        iterations: c.iters,
        dims: c.dims.clone(),
    };
    let summary = run_experiment(exp, &opts)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}
