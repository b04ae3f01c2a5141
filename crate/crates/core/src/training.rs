//! Multistep-residual losses over a KAN and full-batch Adam training.
//!
//! The network is evaluated once per grid state in the window `r..=q`. Scheme
//! rows combine those outputs with the `beta` stencil; the augmented loss adds
//! finite-difference rows for the first `Ω` unknowns. Per-sample work runs in
//! fixed-size chunks whose partial gradients are summed in chunk order, so
//! results do not depend on the thread count.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kan::{KanNetwork, KanShape, Workspace};
use crate::lmm::{fdm_coefficients, Family, IndexWindow, LmmScheme};
use crate::trajectory::Trajectory;

/// Samples per parallel work unit.
const CHUNK: usize = 64;
/// Loss above which training is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean squared scheme residual.
    Jh,
    /// Scheme residual plus finite-difference rows for the auxiliary unknowns.
    #[default]
    Jah,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jh" => Ok(Self::Jh),
            "jah" => Ok(Self::Jah),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss `{other}` (expected jh or jah)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub family: Family,
    pub steps: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub degree: usize,
    pub grid: usize,
    /// Hidden width; `None` means `2d + 1`.
    pub hidden: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: Family::Am,
            steps: 1,
            learning_rate: 0.01,
            iterations: 2200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            loss: LossKind::Jah,
            degree: 3,
            grid: 64,
            hidden: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::InvalidConfig("adam_epsilon must be positive".into()));
        }
        if self.hidden == Some(0) {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Result<LmmScheme> {
        LmmScheme::new(self.family, self.steps)
    }

    pub fn shape(&self, d: usize) -> KanShape {
        let mut s = KanShape::for_dimension(d, self.degree, self.grid);
        if let Some(n) = self.hidden {
            s.hidden = n;
        }
        s
    }
}

/// Fixed data of one loss: network evaluation points and residual targets.
#[derive(Debug, Clone)]
pub struct LossProblem {
    pub kind: LossKind,
    pub window: IndexWindow,
    /// States `x_r..x_q`.
    points: Vec<Vec<f64>>,
    /// `(1/h) sum_m alpha_m x_{n-m}` for `n = M..=N1`.
    scheme_targets: Vec<Vec<f64>>,
    /// Finite-difference derivative estimates at `x_r..x_{r+Ω-1}` (augmented loss only).
    aux_targets: Vec<Vec<f64>>,
    /// `(offset from the row's first point, beta)` pairs.
    stencil: Vec<(usize, f64)>,
    steps: usize,
}

impl LossProblem {
    pub fn new(kind: LossKind, scheme: &LmmScheme, traj: &Trajectory) -> Result<Self> {
        let m_steps = scheme.steps();
        let n1 = traj.intervals();
        let p = scheme.order();
        let needed = match kind {
            LossKind::Jh => m_steps,
            LossKind::Jah => m_steps + p,
        };
        if n1 < needed {
            return Err(Error::TooFewSamples {
                needed: needed + 1,
                got: n1 + 1,
            });
        }
        let window = scheme.index_window(n1)?;
        let (m_lo, m_hi) = scheme.beta_support();
        let omega = m_hi - m_lo;
        let d = traj.dim();
        let inv_h = 1.0 / traj.h;
        let alpha = scheme.alpha();
        let beta = scheme.beta();
        let x = &traj.states;
        let scheme_targets = (m_steps..=n1)
            .map(|n| {
                (0..d)
                    .map(|c| (0..=m_steps).map(|m| alpha[m] * x[n - m][c]).sum::<f64>() * inv_h)
                    .collect()
            })
            .collect();
        let aux_targets = match kind {
            LossKind::Jh => Vec::new(),
            LossKind::Jah => {
                let mu = fdm_coefficients(p)?;
                (window.r..window.r + omega)
                    .map(|n| {
                        (0..d)
                            .map(|c| {
                                mu.iter().enumerate().map(|(m, w)| w * x[n + m][c]).sum::<f64>()
                                    * inv_h
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        // row n touches point n - m - r; with n = M + e the offset from e is M - m - r
        let stencil = (0..=m_steps)
            .filter(|&m| beta[m] != 0.0)
            .map(|m| (m_steps - m - window.r, beta[m]))
            .collect();
        Ok(Self {
            kind,
            window,
            points: x[window.r..=window.q].to_vec(),
            scheme_targets,
            aux_targets,
            stencil,
            steps: m_steps,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn normalizer(&self) -> f64 {
        match self.kind {
            LossKind::Jh => self.scheme_targets.len() as f64,
            LossKind::Jah => self.window.tau as f64,
        }
    }

    /// Loss from network outputs at the window points; fills `upstream` with
    /// the derivative of the loss with respect to each output when given.
    pub fn loss_from_outputs(&self, outputs: &[Vec<f64>], mut upstream: Option<&mut [Vec<f64>]>) -> f64 {
        let d = outputs[0].len();
        let scale = 1.0 / self.normalizer();
        if let Some(up) = upstream.as_deref_mut() {
            up.iter_mut().for_each(|u| u.iter_mut().for_each(|v| *v = 0.0));
        }
        let mut total = 0.0;
        let mut row = vec![0.0; d];
        for (i, target) in self.aux_targets.iter().enumerate() {
            for c in 0..d {
                row[c] = outputs[i][c] - target[c];
                total += row[c] * row[c];
            }
            if let Some(up) = upstream.as_deref_mut() {
                for c in 0..d {
                    up[i][c] += 2.0 * scale * row[c];
                }
            }
        }
        for (e, target) in self.scheme_targets.iter().enumerate() {
            for c in 0..d {
                let mut acc = 0.0;
                for &(off, b) in &self.stencil {
                    acc += b * outputs[e + off][c];
                }
                row[c] = acc - target[c];
                total += row[c] * row[c];
            }
            if let Some(up) = upstream.as_deref_mut() {
                for &(off, b) in &self.stencil {
                    for c in 0..d {
                        up[e + off][c] += 2.0 * scale * b * row[c];
                    }
                }
            }
        }
        debug_assert!(self.steps >= 1);
        total * scale
    }

    /// Network outputs at every window point.
    pub fn outputs(&self, net: &KanNetwork) -> Vec<Vec<f64>> {
        let shape = net.shape();
        self.points
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ws = Workspace::new(&shape);
                chunk
                    .iter()
                    .map(|x| {
                        let mut out = vec![0.0; shape.d_out];
                        net.forward_with(x, &mut out, &mut ws);
                        out
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn loss(&self, net: &KanNetwork) -> f64 {
        self.loss_from_outputs(&self.outputs(net), None)
    }

    /// Loss and its gradient with respect to the flat parameter vector.
    pub fn loss_and_gradient(&self, net: &KanNetwork) -> (f64, Vec<f64>) {
        let outputs = self.outputs(net);
        let mut upstream = vec![vec![0.0; net.shape().d_out]; outputs.len()];
        let loss = self.loss_from_outputs(&outputs, Some(&mut upstream));
        let shape = net.shape();
        let n_params = net.param_count();
        let partials: Vec<Vec<f64>> = self
            .points
            .par_chunks(CHUNK)
            .zip(upstream.par_chunks(CHUNK))
            .map(|(xs, ups)| {
                let mut ws = Workspace::new(&shape);
                let mut out = vec![0.0; shape.d_out];
                let mut g = vec![0.0; n_params];
                for (x, up) in xs.iter().zip(ups) {
                    net.forward_with(x, &mut out, &mut ws);
                    net.accumulate_gradient(up, &mut g, &ws);
                }
                g
            })
            .collect();
        let mut grad = vec![0.0; n_params];
        for part in &partials {
            for (g, p) in grad.iter_mut().zip(part) {
                *g += p;
            }
        }
        (loss, grad)
    }
}

/// Mean squared scheme residual of `net` on `traj`.
pub fn loss_jh(net: &KanNetwork, traj: &Trajectory, scheme: &LmmScheme) -> Result<f64> {
    check_dims(net, traj)?;
    Ok(LossProblem::new(LossKind::Jh, scheme, traj)?.loss(net))
}

/// Scheme residual plus auxiliary finite-difference rows, averaged over the window.
pub fn loss_jah(net: &KanNetwork, traj: &Trajectory, scheme: &LmmScheme) -> Result<f64> {
    check_dims(net, traj)?;
    Ok(LossProblem::new(LossKind::Jah, scheme, traj)?.loss(net))
}

fn check_dims(net: &KanNetwork, traj: &Trajectory) -> Result<()> {
    let s = net.shape();
    if s.d_in != traj.dim() || s.d_out != traj.dim() {
        return Err(Error::InvalidDimension(format!(
            "network maps {} -> {} but the trajectory has dimension {}",
            s.d_in,
            s.d_out,
            traj.dim()
        )));
    }
    Ok(())
}

/// `sqrt(mean |net(x_n) - f(x_n)|^2)` over grid states `x_r..x_q`.
pub fn seminorm_error(
    net: &KanNetwork,
    truth: &dyn VectorField,
    traj: &Trajectory,
    window: &IndexWindow,
) -> Result<f64> {
    let rows: Vec<Vec<f64>> = traj.states[window.r..=window.q]
        .iter()
        .map(|x| {
            let a = net.eval_vec(x);
            let b = truth.eval_vec(x);
            a.iter().zip(&b).map(|(p, q)| p - q).collect()
        })
        .collect();
    crate::analysis::l2_seminorm(&rows)
}

/// Per-coordinate data range widened by 5% of its span on each side.
pub fn input_range_from(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.bounds()
        .into_iter()
        .map(|(lo, hi)| {
            let span = hi - lo;
            let pad = if span > 0.0 {
                0.05 * span
            } else {
                0.5 * lo.abs().max(1.0)
            };
            (lo - pad, hi + pad)
        })
        .collect()
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub scheme: String,
    /// Loss at the start of every iteration, before its update.
    pub loss_trace: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
    /// Iteration whose starting parameters were returned (`iterations` means the final iterate).
    pub best_iteration: usize,
    /// `J_h` of the returned network.
    pub jh: f64,
    /// `J_{a,h}` of the returned network, when the trajectory is long enough.
    pub jah: Option<f64>,
    /// `|f_NN - f|_{2,h}` against the true field, when known.
    pub seminorm_error: Option<f64>,
    pub wall_clock_seconds: f64,
}

/// Stepwise trainer; owns the network and optimizer state.
pub struct Trainer {
    config: TrainConfig,
    scheme: LmmScheme,
    problem: LossProblem,
    net: KanNetwork,
    params: Vec<f64>,
    adam: Adam,
    trace: Vec<f64>,
    best: (f64, usize, Vec<f64>),
}

impl Trainer {
    /// Initializes a network for `traj` from the config seed.
    pub fn new(config: TrainConfig, traj: &Trajectory) -> Result<Self> {
        config.validate()?;
        let net = KanNetwork::init(config.shape(traj.dim()), input_range_from(traj), config.seed)?;
        Self::with_network(config, traj, net)
    }

    /// Continues from an existing network.
    pub fn with_network(config: TrainConfig, traj: &Trajectory, net: KanNetwork) -> Result<Self> {
        config.validate()?;
        check_dims(&net, traj)?;
        let scheme = config.scheme()?;
        let problem = LossProblem::new(config.loss, &scheme, traj)?;
        let params = net.parameters().0;
        let adam = Adam::new(
            params.len(),
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_epsilon,
        );
        Ok(Self {
            config,
            scheme,
            problem,
            net,
            best: (f64::INFINITY, 0, params.clone()),
            params,
            adam,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn problem(&self) -> &LossProblem {
        &self.problem
    }

    pub fn network(&self) -> &KanNetwork {
        &self.net
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    /// One full-batch Adam update; returns the loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let iteration = self.trace.len();
        let (loss, grad) = self.problem.loss_and_gradient(&self.net);
        check_loss(loss, iteration)?;
        self.trace.push(loss);
        if loss < self.best.0 {
            self.best = (loss, iteration, self.params.clone());
        }
        self.adam.step(&mut self.params, &grad);
        self.net.set_parameters(&self.params)?;
        Ok(loss)
    }

    /// The lowest-loss iterate seen so far, including the current one.
    pub fn finish(mut self) -> Result<(KanNetwork, Vec<f64>, f64, usize)> {
        let iteration = self.trace.len();
        let current = self.problem.loss(&self.net);
        if current.is_finite() && current < self.best.0 {
            self.best = (current, iteration, self.params.clone());
        }
        let (best_loss, best_iteration, params) = self.best;
        let best_loss = if best_loss.is_finite() { best_loss } else { current };
        self.net.set_parameters(&params)?;
        Ok((self.net, self.trace, best_loss, best_iteration))
    }
}

fn check_loss(loss: f64, iteration: usize) -> Result<()> {
    if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
        return Err(Error::NonFiniteLoss { iteration, loss });
    }
    Ok(())
}

/// Trains a fresh network on `traj`. `truth`, when given, is used only for the report.
pub fn train(
    config: &TrainConfig,
    traj: &Trajectory,
    truth: Option<&dyn VectorField>,
) -> Result<(KanNetwork, TrainReport)> {
    let start = Instant::now();
    let mut trainer = Trainer::new(config.clone(), traj)?;
    for _ in 0..config.iterations {
        trainer.step()?;
    }
    let scheme = trainer.scheme.clone();
    let (net, trace, best_loss, best_iteration) = trainer.finish()?;
    let report = report_for(config, &scheme, traj, &net, truth, trace, best_loss, best_iteration)?;
    Ok((
        net,
        TrainReport {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            ..report
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn report_for(
    config: &TrainConfig,
    scheme: &LmmScheme,
    traj: &Trajectory,
    net: &KanNetwork,
    truth: Option<&dyn VectorField>,
    loss_trace: Vec<f64>,
    best_loss: f64,
    best_iteration: usize,
) -> Result<TrainReport> {
    let window = scheme.index_window(traj.intervals())?;
    let jah = match loss_jah(net, traj, scheme) {
        Ok(v) => Some(v),
        Err(Error::TooFewSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(TrainReport {
        config: config.clone(),
        seed: config.seed,
        scheme: scheme.label(),
        initial_loss: loss_trace.first().copied().unwrap_or(best_loss),
        loss_trace,
        best_loss,
        best_iteration,
        jh: loss_jh(net, traj, scheme)?,
        jah,
        seminorm_error: truth
            .map(|f| seminorm_error(net, f, traj, &window))
            .transpose()?,
        wall_clock_seconds: 0.0,
    })
}
