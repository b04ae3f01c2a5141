//! Benchmark dynamical systems: a linear 2D system with a closed-form solution,
//! a seven-species glycolytic oscillator and bounded-confidence opinion dynamics.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FnField, VectorField};

pub type Solution = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub dim: usize,
    pub field: Arc<dyn VectorField>,
    pub x0: Vec<f64>,
    /// Default training interval.
    pub interval: (f64, f64),
    pub analytic: Option<Solution>,
    pub params: BTreeMap<String, f64>,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("x0", &self.x0)
            .field("interval", &self.interval)
            .field("analytic", &self.analytic.is_some())
            .field("params", &self.params)
            .finish()
    }
}

impl SystemDef {
    /// Builds a system by name: `linear`, `glycolytic` or `opinion`.
    pub fn by_name(name: &str, dim: Option<usize>, seed: u64) -> Result<Self> {
        match name {
            "linear" => Ok(linear_system()),
            "glycolytic" => Ok(glycolytic()),
            "glycolytic-consistent" => Ok(glycolytic_with(GlycolyticForm::Consistent)),
            "opinion" => opinion_dynamics(dim.unwrap_or(50), seed),
            other => Err(Error::InvalidConfig(format!(
                "unknown system `{other}` (expected linear, glycolytic, glycolytic-consistent or opinion)"
            ))),
        }
    }
}

/// `x' = 2x + 3y`, `y' = -4y` from `(0, 1)`.
pub fn linear_system() -> SystemDef {
    let field = FnField::new(2, |x: &[f64], out: &mut [f64]| {
        out[0] = 2.0 * x[0] + 3.0 * x[1];
        out[1] = -4.0 * x[1];
    });
    SystemDef {
        name: "linear".into(),
        dim: 2,
        field: Arc::new(field),
        x0: vec![0.0, 1.0],
        interval: (0.0, 1.0),
        analytic: Some(Arc::new(|t: f64| {
            vec![0.5 * (2.0 * t).exp() - 0.5 * (-4.0 * t).exp(), (-4.0 * t).exp()]
        })),
        params: BTreeMap::new(),
    }
}

/// Glycolytic oscillator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlycolyticParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub j0: f64,
    pub kappa: f64,
    pub q: f64,
    pub k_inhibit: f64,
    pub psi: f64,
    pub n_total: f64,
    pub a_total: f64,
}

pub const GLYCOLYTIC_PARAMS: GlycolyticParams = GlycolyticParams {
    k1: 100.0,
    k2: 6.0,
    k3: 16.0,
    k4: 100.0,
    k5: 1.28,
    k6: 12.0,
    k7: 1.8,
    j0: 2.5,
    kappa: 13.0,
    q: 4.0,
    k_inhibit: 0.52,
    psi: 0.1,
    n_total: 1.0,
    a_total: 4.0,
};

pub const GLYCOLYTIC_X0: [f64; 7] = [1.125, 0.95, 0.075, 0.16, 0.265, 0.7, 0.092];

impl GlycolyticParams {
    /// Parameter map keyed by the conventional symbol names.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k6", self.k6),
            ("k7", self.k7),
            ("J0", self.j0),
            ("kappa", self.kappa),
            ("q", self.q),
            ("K1", self.k_inhibit),
            ("psi", self.psi),
            ("N", self.n_total),
            ("A", self.a_total),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Right-hand side in the displayed form.
    pub fn eval(&self, s: &[f64], out: &mut [f64]) {
        self.eval_form(GlycolyticForm::Displayed, s, out)
    }

    pub fn eval_form(&self, form: GlycolyticForm, s: &[f64], out: &mut [f64]) {
        let p = self;
        let (s1, s2, s3, s4, s5, s6, s7) = (s[0], s[1], s[2], s[3], s[4], s[5], s[6]);
        let uptake = p.k1 * s1 * s6 / (1.0 + (s6 / p.k_inhibit).powf(p.q));
        out[0] = p.j0 - uptake;
        out[1] = 2.0 * uptake - p.k2 * s2 * (p.n_total - s5) - p.k6 * s2 * s5;
        let row3_pool = match form {
            GlycolyticForm::Displayed => p.n_total,
            GlycolyticForm::Consistent => p.a_total,
        };
        out[2] = p.k2 * s2 * (p.n_total - s5) - p.k3 * s3 * (row3_pool - s6);
        out[3] = p.k3 * s3 * (p.a_total - s6) - p.k4 * s4 * s5 - p.kappa * (s4 - s7);
        out[4] = p.k2 * s2 * (p.n_total - s5) - p.k4 * s4 * s5 - p.k6 * s2 * s5;
        out[5] = -2.0 * uptake + 2.0 * p.k3 * s3 * (p.a_total - s6) - p.k5 * s6;
        out[6] = p.psi * p.kappa * (s4 - s7) - p.k7 * s7;
    }
}

/// Which pool the consumption term of the third species draws on.
///
/// The displayed model writes `k3 S3 (N - S6)` in the third row but
/// `k3 S3 (A - S6)` in the fourth and sixth. With the tabulated parameters the
/// displayed form drives `S6` to `A` and `S3` then grows like `exp(k3 (A - N) t)`,
/// so its trajectory is not usable beyond `t ~ 0.5` with an explicit integrator.
/// `Consistent` uses `(A - S6)` in all three rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlycolyticForm {
    #[default]
    Displayed,
    Consistent,
}

/// The displayed form; see [`GlycolyticForm`].
pub fn glycolytic() -> SystemDef {
    glycolytic_with(GlycolyticForm::Displayed)
}

pub fn glycolytic_with(form: GlycolyticForm) -> SystemDef {
    let p = GLYCOLYTIC_PARAMS;
    let name = match form {
        GlycolyticForm::Displayed => "glycolytic",
        GlycolyticForm::Consistent => "glycolytic-consistent",
    };
    SystemDef {
        name: name.into(),
        dim: 7,
        field: Arc::new(FnField::new(7, move |x: &[f64], out: &mut [f64]| {
            p.eval_form(form, x, out)
        })),
        x0: GLYCOLYTIC_X0.to_vec(),
        interval: (0.0, 10.0),
        analytic: None,
        params: p.to_map(),
    }
}

/// Bounded-confidence opinion dynamics on scalar opinions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionField {
    pub dim: usize,
    /// Overall rate scaling.
    pub alpha: f64,
    /// Interaction radius of the indicator influence function.
    pub radius: f64,
}

impl VectorField for OpinionField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut count = 0usize;
            let mut pull = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let diff = xj - x[i];
                if diff.abs() <= self.radius {
                    count += 1;
                    if j != i {
                        pull += diff;
                    }
                }
            }
            // the agent always sees itself, so count >= 1
            *o = self.alpha * pull / count as f64;
        }
    }
}

/// Opinion range for random initial conditions.
pub const OPINION_RANGE: (f64, f64) = (0.0, 10.0);

/// `d` agents with opinions drawn uniformly from [`OPINION_RANGE`].
pub fn opinion_dynamics(d: usize, seed: u64) -> Result<SystemDef> {
    opinion_dynamics_with(d, seed, 1.0)
}

pub fn opinion_dynamics_with(d: usize, seed: u64, alpha: f64) -> Result<SystemDef> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "opinion dynamics needs at least 2 agents, got {d}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = OPINION_RANGE;
    let x0 = (0..d).map(|_| rng.gen_range(lo..hi)).collect();
    let mut params = BTreeMap::new();
    params.insert("alpha".into(), alpha);
    params.insert("radius".into(), 1.0);
    Ok(SystemDef {
        name: "opinion".into(),
        dim: d,
        field: Arc::new(OpinionField {
            dim: d,
            alpha,
            radius: 1.0,
        }),
        x0,
        interval: (0.0, 10.0),
        analytic: None,
        params,
    })
}

/// Connected components of the interaction graph (`|x_i - x_j| <= radius`).
/// On the line these are the runs of sorted opinions without a gap above `radius`.
pub fn interaction_components(x: &[f64], radius: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    1 + sorted.windows(2).filter(|w| w[1] - w[0] > radius).count()
}
