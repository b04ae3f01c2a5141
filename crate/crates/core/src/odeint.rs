//! Adaptive Dormand–Prince 5(4) integration onto an equidistant output grid.
//!
//! Steps are shortened so that every output time is hit exactly; samples are
//! accepted step endpoints, never interpolants. The proposed step size carries
//! over across output times, so the grid only limits the step length when the
//! controller would step past the next output.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kan::KanNetwork;
use crate::trajectory::{grid_intervals, grid_time, Provenance, Trajectory};

/// Reference tolerance for data generation.
pub const REFERENCE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the internal step; `None` means the output spacing only.
    pub max_step: Option<f64>,
    /// When more than half of the attempted steps are rejected (after at least
    /// 200 attempts) the maximum step is reduced to this value.
    pub rejection_fallback_step: f64,
    /// Hard cap on attempted steps.
    pub max_attempts: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: REFERENCE_TOL,
            atol: REFERENCE_TOL,
            max_step: None,
            rejection_fallback_step: 1e-4,
            max_attempts: 50_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (equal to the last stage row, so the last stage is FSAL).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Difference between fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    field: &'a dyn VectorField,
    opts: OdeOptions,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    stats: OdeStats,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a dyn VectorField, d: usize, opts: OdeOptions) -> Self {
        Self {
            field,
            opts,
            k: vec![vec![0.0; d]; 7],
            tmp: vec![0.0; d],
            y_new: vec![0.0; d],
            stats: OdeStats::default(),
        }
    }

    /// One attempted step from `(t, y)` with `k[0] = f(y)` already set.
    /// Returns the scaled error norm; the candidate is left in `y_new` and `k[6]`.
    fn attempt(&mut self, y: &[f64], h: f64) -> f64 {
        let d = y.len();
        for s in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            self.field.eval(&self.tmp, &mut rest[0]);
            self.stats.evaluations += 1;
        }
        // stage 7 was evaluated at y + h * sum A[6] k = the fifth-order solution
        self.y_new.copy_from_slice(&self.tmp);
        let mut sum = 0.0;
        for i in 0..d {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * self.k[s][i];
            }
            e *= h;
            let scale = self.opts.atol + self.opts.rtol * y[i].abs().max(self.y_new[i].abs());
            sum += (e / scale).powi(2);
        }
        debug_assert!(B[6] == 0.0 && C[6] == 1.0);
        (sum / d as f64).sqrt()
    }
}

/// Integrates `x' = f(x)` from `x0` at `t0` to `t1`, sampling every `h_out`.
pub fn integrate(
    field: &dyn VectorField,
    x0: &[f64],
    t0: f64,
    t1: f64,
    h_out: f64,
    opts: OdeOptions,
    provenance: Provenance,
) -> Result<(Trajectory, OdeStats)> {
    let n_out = grid_intervals(t0, t1, h_out)?;
    let d = x0.len();
    if d != field.dim() {
        return Err(Error::InvalidDimension(format!(
            "initial state has length {d}, field has dimension {}",
            field.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(t0));
    }
    let mut st = Stepper::new(field, d, opts);
    let mut max_step = opts.max_step.unwrap_or(f64::INFINITY);

    let mut y = x0.to_vec();
    let mut t = t0;
    field.eval(&y, &mut st.k[0]);
    st.stats.evaluations += 1;

    let mut h = initial_step(&y, &st.k[0], opts, h_out);
    let mut states = Vec::with_capacity(n_out + 1);
    states.push(y.clone());

    for n in 1..=n_out {
        let target = grid_time(t0, h_out, n);
        loop {
            if st.stats.accepted + st.stats.rejected >= opts.max_attempts {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            h = h.min(max_step);
            let remaining = target - t;
            let lands = h >= remaining * (1.0 - 1e-12);
            let step = if lands { remaining } else { h };
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !lands {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }
            let err = st.attempt(&y, step);
            if !err.is_finite() || st.y_new.iter().any(|v| !v.is_finite()) {
                if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(Error::NonFiniteState(t));
                }
                st.stats.rejected += 1;
                h = step * 0.1;
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                st.stats.accepted += 1;
                y.copy_from_slice(&st.y_new);
                st.k.swap(0, 6);
                // a shortened landing step says nothing about the natural step size
                h = if lands { h.max(step * factor) } else { step * factor };
                if lands {
                    t = target;
                    break;
                }
                t += step;
            } else {
                st.stats.rejected += 1;
                h = step * factor.min(1.0);
                if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t, h: step });
                }
            }
            let attempts = st.stats.accepted + st.stats.rejected;
            if attempts >= 200
                && 2 * st.stats.rejected > attempts
                && max_step > opts.rejection_fallback_step
            {
                max_step = opts.rejection_fallback_step;
            }
        }
        states.push(y.clone());
    }
    let traj = Trajectory::new(t0, h_out, states, provenance)?;
    Ok((traj, st.stats))
}

fn initial_step(y: &[f64], f0: &[f64], opts: OdeOptions, h_out: f64) -> f64 {
    let d = y.len() as f64;
    let scale = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / d).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / d).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(h_out)
}

/// High-accuracy reference solution (`rtol = atol = 1e-13`).
pub fn integrate_reference(
    field: &dyn VectorField,
    x0: &[f64],
    t0: f64,
    t1: f64,
    h_out: f64,
) -> Result<Trajectory> {
    integrate(
        field,
        x0,
        t0,
        t1,
        h_out,
        OdeOptions::default(),
        Provenance::Reference,
    )
    .map(|(tr, _)| tr)
}

/// Forward simulation of a learned vector field at the reference tolerance.
pub fn integrate_learned(
    net: &KanNetwork,
    x0: &[f64],
    t0: f64,
    t1: f64,
    h_out: f64,
) -> Result<Trajectory> {
    integrate(
        net,
        x0,
        t0,
        t1,
        h_out,
        OdeOptions::default(),
        Provenance::Learned,
    )
    .map(|(tr, _)| tr)
}
