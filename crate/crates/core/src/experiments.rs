//! Benchmark protocols producing CSV tables and a JSON summary.
//!
//! Every experiment has a full setting and a `quick` setting with fewer
//! iterations (and, for the larger systems, shorter grids) for desk-scale runs.
//! Outputs contain no timing information, so reruns with the same options are
//! byte-identical.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    gronwall_study, linear_fit, lipschitz_estimate, upper_bound, vc_lower_bound_shape, HolderSpec,
};
use crate::discovery::assemble;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::lmm::{Family, LmmScheme, MAX_STEPS};
use crate::odeint::{integrate_learned, integrate_reference};
use crate::systems::{glycolytic, glycolytic_with, interaction_components, GlycolyticForm, linear_system, opinion_dynamics};
use crate::trajectory::{fmt17, Trajectory};
use crate::training::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Table1,
    KgSweep,
    Gronwall,
    Glycolytic,
    Opinion,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Table1,
        Experiment::KgSweep,
        Experiment::Gronwall,
        Experiment::Glycolytic,
        Experiment::Opinion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::KgSweep => "fig2-kg-sweep",
            Experiment::Gronwall => "fig4-gronwall",
            Experiment::Glycolytic => "glycolytic",
            Experiment::Opinion => "opinion",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub quick: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Overrides the iteration count of every training run.
    pub iterations: Option<usize>,
    /// Overrides the opinion-dynamics dimensions.
    pub dims: Option<Vec<usize>>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 0,
            out_dir: PathBuf::from("results"),
            iterations: None,
            dims: None,
        }
    }
}

impl ExperimentOptions {
    fn iterations(&self, full: usize, quick: usize) -> usize {
        self.iterations
            .unwrap_or(if self.quick { quick } else { full })
    }

    fn config(&self, iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Runs `exp`, writing its files into `opts.out_dir`, and returns the summary
/// that is also written to `<name>.json`.
pub fn run_experiment(exp: Experiment, opts: &ExperimentOptions) -> Result<serde_json::Value> {
    fs::create_dir_all(&opts.out_dir)?;
    let summary = match exp {
        Experiment::Table1 => table1(opts)?,
        Experiment::KgSweep => kg_sweep(opts)?,
        Experiment::Gronwall => gronwall(opts)?,
        Experiment::Glycolytic => glycolytic_run(opts)?,
        Experiment::Opinion => opinion_run(opts)?,
    };
    let path = opts.out_dir.join(format!("{}.json", exp.name()));
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    Ok(summary)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt17(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_else(|| "nan".into())
}

/// Largest absolute state difference over all grid points.
pub fn trajectory_linf(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
struct Cell {
    family: Family,
    steps: usize,
    seminorm_error: Option<f64>,
    jh: Option<f64>,
    jah: Option<f64>,
    failure: Option<String>,
}

fn linear_data(h: f64) -> Result<Trajectory> {
    let sys = linear_system();
    integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, 1.0, h)
}

fn table1(opts: &ExperimentOptions) -> Result<serde_json::Value> {
    let sys = linear_system();
    let traj = linear_data(1e-3)?;
    let iterations = opts.iterations(2200, 60);
    let cells: Vec<(Family, usize)> = Family::ALL
        .iter()
        .flat_map(|&f| (1..=MAX_STEPS).map(move |m| (f, m)))
        .collect();
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(family, steps)| {
            let cfg = TrainConfig {
                family,
                steps,
                ..opts.config(iterations)
            };
            match train(&cfg, &traj, Some(sys.field.as_ref())) {
                Ok((_, r)) => Cell {
                    family,
                    steps,
                    seminorm_error: r.seminorm_error,
                    jh: Some(r.jh),
                    jah: r.jah,
                    failure: None,
                },
                Err(e) => Cell {
                    family,
                    steps,
                    seminorm_error: None,
                    jh: None,
                    jah: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|c| {
            vec![
                c.family.name().to_string(),
                c.steps.to_string(),
                opt17(c.seminorm_error),
                opt17(c.jh),
                opt17(c.jah),
            ]
        })
        .collect();
    write_csv(
        &opts.out_dir.join("table1.csv"),
        &["family", "steps", "seminorm_error", "jh", "jah"],
        &rows,
    )?;
    let matrix: Vec<Vec<String>> = Family::ALL
        .iter()
        .map(|&f| {
            let mut row = vec![f.name().to_uppercase()];
            row.extend(
                results
                    .iter()
                    .filter(|c| c.family == f)
                    .map(|c| opt17(c.seminorm_error)),
            );
            row
        })
        .collect();
    let header: Vec<String> = std::iter::once("family".to_string())
        .chain((1..=MAX_STEPS).map(|m| format!("M{m}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&opts.out_dir.join("table1_matrix.csv"), &header, &matrix)?;
    Ok(json!({
        "experiment": "table1",
        "quick": opts.quick,
        "seed": opts.seed,
        "iterations": iterations,
        "h": 1e-3,
        "interval": [0.0, 1.0],
        "degree": 3,
        "grid": 64,
        "cells": results,
    }))
}

#[derive(Debug, Clone, Serialize)]
struct SweepCell {
    degree: usize,
    grid: usize,
    seminorm_error: Option<f64>,
    lipschitz: Option<f64>,
    upper_bound: Option<f64>,
    failure: Option<String>,
}

fn kg_sweep(opts: &ExperimentOptions) -> Result<serde_json::Value> {
    let sys = linear_system();
    let h = 1e-3;
    let traj = linear_data(h)?;
    let iterations = opts.iterations(2200, 60);
    let degrees = [2usize, 3, 4, 5];
    let grids = [4usize, 8, 16, 32, 64];
    let scheme = LmmScheme::new(Family::Am, 1)?;
    let kappa = assemble(&scheme, &traj, 0)?.condition_number()?;
    // Hölder data of the true field on the sampled box: Lipschitz (alpha = 1) with
    // lambda the spectral norm of the system matrix.
    let lambda = nalgebra::Matrix2::new(2.0, 3.0, 0.0, -4.0).singular_values().max();
    let radius = traj
        .bounds()
        .iter()
        .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let holder = HolderSpec::new(1.0, lambda, radius)?;
    let cells: Vec<(usize, usize)> = degrees
        .iter()
        .flat_map(|&k| grids.iter().map(move |&g| (k, g)))
        .collect();
    let results: Vec<SweepCell> = cells
        .par_iter()
        .map(|&(degree, grid)| {
            let cfg = TrainConfig {
                degree,
                grid,
                ..opts.config(iterations)
            };
            match train(&cfg, &traj, Some(sys.field.as_ref())) {
                Ok((net, r)) => {
                    let l = lipschitz_estimate(&net);
                    SweepCell {
                        degree,
                        grid,
                        seminorm_error: r.seminorm_error,
                        lipschitz: Some(l),
                        upper_bound: upper_bound(&holder, degree, grid, net.shape().hidden, 2, l).ok(),
                        failure: None,
                    }
                }
                Err(e) => SweepCell {
                    degree,
                    grid,
                    seminorm_error: None,
                    lipschitz: None,
                    upper_bound: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|c| {
            vec![
                c.degree.to_string(),
                c.grid.to_string(),
                opt17(c.seminorm_error),
                opt17(c.lipschitz),
                opt17(c.upper_bound),
            ]
        })
        .collect();
    write_csv(
        &opts.out_dir.join("fig2_kg_sweep.csv"),
        &["degree", "grid", "seminorm_error", "lipschitz", "upper_bound"],
        &rows,
    )?;
    // convergence rate in 1/G per degree, reported not asserted
    let slopes: Vec<serde_json::Value> = degrees
        .iter()
        .map(|&k| {
            let pts: Vec<(f64, f64)> = results
                .iter()
                .filter(|c| c.degree == k)
                .filter_map(|c| c.seminorm_error.map(|e| ((1.0 / c.grid as f64).ln(), e.ln())))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let fit = linear_fit(&xs, &ys).ok();
            json!({"degree": k, "rate_in_inverse_grid": fit.map(|f| f.slope)})
        })
        .collect();
    let p = scheme.order() as i32;
    let fitted_c = results
        .iter()
        .filter_map(|c| Some(c.seminorm_error? / (kappa * (h.powi(p) + c.upper_bound?))))
        .fold(0.0, f64::max);
    Ok(json!({
        "experiment": "fig2-kg-sweep",
        "quick": opts.quick,
        "seed": opts.seed,
        "iterations": iterations,
        "scheme": scheme.label(),
        "condition_number": kappa,
        "holder": holder,
        "fitted_constant": fitted_c,
        "rates": slopes,
        "cells": results,
    }))
}

fn gronwall(opts: &ExperimentOptions) -> Result<serde_json::Value> {
    let sys = linear_system();
    let traj = linear_data(1e-3)?;
    let iterations = opts.iterations(2200, 200);
    let (net, report) = train(&opts.config(iterations), &traj, Some(sys.field.as_ref()))?;
    let times: Vec<f64> = (1..=10).map(f64::from).collect();
    let rows = gronwall_study(&net, sys.field.as_ref(), &sys.x0, &times, 1e-2)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt17(r.t), fmt17(r.error), fmt17(r.sup_error)])
        .collect();
    write_csv(
        &opts.out_dir.join("fig4_gronwall.csv"),
        &["T", "error_at_T", "sup_error"],
        &csv_rows,
    )?;
    fs::write(opts.out_dir.join("fig4_model.json"), net.to_document())?;
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.error.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&ts, &logs)?;
    Ok(json!({
        "experiment": "fig4-gronwall",
        "quick": opts.quick,
        "seed": opts.seed,
        "iterations": iterations,
        "seminorm_error": report.seminorm_error,
        "log_error_slope": fit.slope,
        "log_error_correlation": fit.correlation,
        "rows": rows,
    }))
}

/// Runs on the displayed model; when its reference integration fails the
/// failure is recorded and the run continues on the consistent form.
fn glycolytic_run(opts: &ExperimentOptions) -> Result<serde_json::Value> {
    let (t_train, h) = if opts.quick { (1.0, 1e-3) } else { (10.0, 1e-3) };
    let t_pred = 2.0 * t_train;
    let displayed = glycolytic();
    let (sys, reference, displayed_failure) =
        match integrate_reference(displayed.field.as_ref(), &displayed.x0, 0.0, t_pred, h) {
            Ok(r) => (displayed, r, None),
            Err(e) => {
                let sys = glycolytic_with(GlycolyticForm::Consistent);
                let r = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, t_pred, h)?;
                (sys, r, Some(e.to_string()))
            }
        };
    let iterations = opts.iterations(2200, 30);
    let n_train = crate::trajectory::grid_intervals(0.0, t_train, h)?;
    let train_data = Trajectory::new(
        0.0,
        h,
        reference.states[..=n_train].to_vec(),
        reference.provenance,
    )?;
    reference.save(opts.out_dir.join("glycolytic_reference.csv"))?;
    let positive = reference.states.iter().all(|s| s.iter().all(|&v| v > 0.0));
    let (net, report) = train(&opts.config(iterations), &train_data, Some(sys.field.as_ref()))?;
    fs::write(opts.out_dir.join("glycolytic_model.json"), net.to_document())?;
    let (train_err, pred_err, failure) = match integrate_learned(&net, &sys.x0, 0.0, t_pred, h) {
        Ok(learned) => {
            learned.save(opts.out_dir.join("glycolytic_learned.csv"))?;
            let split = |lo: usize, hi: usize| {
                reference.states[lo..=hi]
                    .iter()
                    .zip(&learned.states[lo..=hi])
                    .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs()))
                    .fold(0.0, f64::max)
            };
            let n_all = reference.intervals();
            (Some(split(0, n_train)), Some(split(n_train, n_all)), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(json!({
        "experiment": "glycolytic",
        "system": sys.name,
        "displayed_form_failure": displayed_failure,
        "quick": opts.quick,
        "seed": opts.seed,
        "iterations": iterations,
        "train_interval": [0.0, t_train],
        "prediction_interval": [t_train, t_pred],
        "h": h,
        "parameters": sys.params,
        "initial_condition": sys.x0,
        "reference_positive": positive,
        "seminorm_error": report.seminorm_error,
        "linf_error_train": train_err,
        "linf_error_prediction": pred_err,
        "prediction_failure": failure,
    }))
}

#[derive(Debug, Clone, Serialize)]
struct OpinionCell {
    dim: usize,
    seminorm_error: Option<f64>,
    linf_error: Option<f64>,
    components_start: usize,
    components_end: usize,
    components_non_increasing: bool,
    failure: Option<String>,
}

fn opinion_run(opts: &ExperimentOptions) -> Result<serde_json::Value> {
    let dims = opts.dims.clone().unwrap_or_else(|| {
        if opts.quick {
            vec![50]
        } else {
            vec![50, 100, 200, 400]
        }
    });
    let h = if opts.quick { 1e-2 } else { 1e-3 };
    let t1 = 10.0;
    let iterations = opts.iterations(3000, 10);
    let mut cells = Vec::new();
    for &d in &dims {
        let sys = opinion_dynamics(d, 42)?;
        let reference = integrate_reference(sys.field.as_ref(), &sys.x0, 0.0, t1, h)?;
        reference.save(opts.out_dir.join(format!("opinion_d{d}_reference.csv")))?;
        let counts: Vec<usize> = reference
            .states
            .iter()
            .map(|s| interaction_components(s, 1.0))
            .collect();
        let non_increasing = counts.windows(2).all(|w| w[1] <= w[0]);
        let cell = match train(&opts.config(iterations), &reference, Some(sys.field.as_ref())) {
            Ok((net, r)) => {
                let learned = integrate_learned(&net, &sys.x0, 0.0, t1, h);
                let (linf, failure) = match learned {
                    Ok(l) => (Some(trajectory_linf(&reference, &l)), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                OpinionCell {
                    dim: d,
                    seminorm_error: r.seminorm_error,
                    linf_error: linf,
                    components_start: counts[0],
                    components_end: *counts.last().unwrap(),
                    components_non_increasing: non_increasing,
                    failure,
                }
            }
            Err(e) => OpinionCell {
                dim: d,
                seminorm_error: None,
                linf_error: None,
                components_start: counts[0],
                components_end: *counts.last().unwrap(),
                components_non_increasing: non_increasing,
                failure: Some(e.to_string()),
            },
        };
        cells.push(cell);
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.dim.to_string(),
                opt17(c.linf_error),
                opt17(c.seminorm_error),
            ]
        })
        .collect();
    write_csv(
        &opts.out_dir.join("opinion_errors.csv"),
        &["d", "linf_error", "seminorm_error"],
        &rows,
    )?;
    let vc: Vec<Vec<String>> = [5usize, 10, 20, 50, 100]
        .iter()
        .map(|&d| {
            let v = vc_lower_bound_shape(3, 64, 2 * d + 1, d, 1.0);
            vec![d.to_string(), opt17(v.ok())]
        })
        .collect();
    write_csv(&opts.out_dir.join("opinion_vc_shape.csv"), &["d", "vc_shape"], &vc)?;
    Ok(json!({
        "experiment": "opinion",
        "quick": opts.quick,
        "seed": opts.seed,
        "initial_condition_seed": 42,
        "iterations": iterations,
        "h": h,
        "interval": [0.0, t1],
        "cells": cells,
    }))
}

/// Field evaluation helper for reporting: `f(x)` at every grid state.
pub fn field_on_grid(field: &dyn VectorField, traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.states.iter().map(|x| field.eval_vec(x)).collect()
}
