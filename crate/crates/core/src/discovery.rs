//! Grid-value discovery: the multistep relations read as a linear system in the
//! unknown field values `f_r..f_q`, closed with finite-difference estimates.
//!
//! With `m_lo`/`m_hi` the first/last nonzero `beta` index, the scheme row for
//! step `n` touches columns `n - m - r`. Placing the `Ω = m_hi - m_lo`
//! auxiliary rows first makes the square matrix lower triangular with every
//! diagonal entry equal to `beta[m_lo]`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmm::{fdm_coefficients, IndexWindow, LmmScheme};
use crate::trajectory::Trajectory;

/// Largest system solved with a dense SVD for the condition number.
pub const DENSE_LIMIT: usize = 2000;

/// Where the auxiliary finite-difference rows go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxPlacement {
    /// First `Ω` unknowns from forward differences (the supported route).
    #[default]
    Initial,
    /// Last `Ω` unknowns from backward differences. Experimental diagnostic;
    /// the matrix is no longer triangular and is solved densely.
    Terminal,
}

impl FromStr for AuxPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(AuxPlacement::Initial),
            "terminal" => Ok(AuxPlacement::Terminal),
            other => Err(Error::InvalidConfig(format!("unknown placement `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoverySystem {
    pub scheme: LmmScheme,
    pub window: IndexWindow,
    pub h: f64,
    pub placement: AuxPlacement,
    /// Number of auxiliary rows.
    pub omega: usize,
    /// Right-hand side of the scheme rows, `(1/h) sum_m alpha_m x_{n-m}`, `n = M..=N1`.
    pub b: Vec<f64>,
    /// Finite-difference estimates for the auxiliary unknowns.
    pub c: Vec<f64>,
    m_lo: usize,
    m_hi: usize,
}

/// Assembles the scalar system for one state component.
pub fn assemble(scheme: &LmmScheme, traj: &Trajectory, component: usize) -> Result<DiscoverySystem> {
    assemble_with(scheme, traj, component, AuxPlacement::Initial)
}

pub fn assemble_with(
    scheme: &LmmScheme,
    traj: &Trajectory,
    component: usize,
    placement: AuxPlacement,
) -> Result<DiscoverySystem> {
    if component >= traj.dim() {
        return Err(Error::InvalidDimension(format!(
            "component {component} out of range for dimension {}",
            traj.dim()
        )));
    }
    let m_steps = scheme.steps();
    let p = scheme.order();
    let n1 = traj.intervals();
    if n1 < m_steps + p {
        return Err(Error::TooFewSamples {
            needed: m_steps + p + 1,
            got: n1 + 1,
        });
    }
    let window = scheme.index_window(n1)?;
    let (m_lo, m_hi) = scheme.beta_support();
    let omega = m_hi - m_lo;
    debug_assert_eq!(omega as i64, window.omega_a);
    let x: Vec<f64> = traj.states.iter().map(|s| s[component]).collect();
    let inv_h = 1.0 / traj.h;
    let alpha = scheme.alpha();
    let b = (m_steps..=n1)
        .map(|n| (0..=m_steps).map(|m| alpha[m] * x[n - m]).sum::<f64>() * inv_h)
        .collect();
    let mu = fdm_coefficients(p)?;
    let c = match placement {
        AuxPlacement::Initial => (window.r..window.r + omega)
            .map(|n| mu.iter().enumerate().map(|(m, w)| w * x[n + m]).sum::<f64>() * inv_h)
            .collect(),
        AuxPlacement::Terminal => {
            let first = window.q + 1 - omega;
            if first < p {
                return Err(Error::TooFewSamples {
                    needed: p + omega + 1,
                    got: n1 + 1,
                });
            }
            (first..=window.q)
                .map(|n| -mu.iter().enumerate().map(|(m, w)| w * x[n - m]).sum::<f64>() * inv_h)
                .collect()
        }
    };
    Ok(DiscoverySystem {
        scheme: scheme.clone(),
        window,
        h: traj.h,
        placement,
        omega,
        b,
        c,
        m_lo,
        m_hi,
    })
}

impl DiscoverySystem {
    /// Size of the square system.
    pub fn tau(&self) -> usize {
        self.window.tau
    }

    /// Nonzero entries `(column, value)` of scheme row `e` (`n = M + e`).
    fn scheme_row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.scheme.steps() + e;
        let r = self.window.r;
        let beta = self.scheme.beta();
        (self.m_lo..=self.m_hi)
            .rev()
            .filter(move |&m| beta[m] != 0.0)
            .map(move |m| (n - m - r, beta[m]))
    }

    /// Row `i` of the square matrix as `(column, value)` pairs.
    fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match self.placement {
            AuxPlacement::Initial => {
                if i < self.omega {
                    vec![(i, 1.0)]
                } else {
                    self.scheme_row(i - self.omega).collect()
                }
            }
            AuxPlacement::Terminal => {
                let eqs = self.window.equations;
                if i < eqs {
                    self.scheme_row(i).collect()
                } else {
                    vec![(self.tau() - self.omega + (i - eqs), 1.0)]
                }
            }
        }
    }

    fn rhs(&self) -> Vec<f64> {
        match self.placement {
            AuxPlacement::Initial => self.c.iter().chain(&self.b).copied().collect(),
            AuxPlacement::Terminal => self.b.iter().chain(&self.c).copied().collect(),
        }
    }

    /// The scheme block as a dense `(N1 - M + 1) x tau` matrix.
    pub fn dense_b(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.window.equations, self.tau());
        for e in 0..self.window.equations {
            for (col, v) in self.scheme_row(e) {
                m[(e, col)] = v;
            }
        }
        m
    }

    /// The full square matrix.
    pub fn dense_a(&self) -> DMatrix<f64> {
        let t = self.tau();
        let mut m = DMatrix::zeros(t, t);
        for i in 0..t {
            for (col, v) in self.row(i) {
                m[(i, col)] = v;
            }
        }
        m
    }

    /// Right-hand side stacked in the row order of [`dense_a`](Self::dense_a).
    pub fn dense_rhs(&self) -> DVector<f64> {
        DVector::from_vec(self.rhs())
    }

    fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.tau())
            .map(|i| self.row(i).iter().map(|&(c, a)| a * v[c]).sum())
            .collect()
    }

    fn mat_t_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.tau()];
        for (i, vi) in v.iter().enumerate() {
            for (c, a) in self.row(i) {
                out[c] += a * vi;
            }
        }
        out
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.row(i)
            .iter()
            .find(|&&(c, _)| c == i)
            .map_or(0.0, |&(_, v)| v)
    }

    /// Solves `A y = rhs` by forward substitution (initial placement only).
    fn forward_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.tau()];
        for i in 0..self.tau() {
            let mut acc = rhs[i];
            let mut diag = 0.0;
            for (c, a) in self.row(i) {
                if c == i {
                    diag = a;
                } else {
                    debug_assert!(c < i);
                    acc -= a * y[c];
                }
            }
            if diag == 0.0 {
                return Err(Error::ZeroDiagonal(i));
            }
            y[i] = acc / diag;
        }
        Ok(y)
    }

    /// Solves `A^T z = rhs` by column-oriented back substitution.
    fn transpose_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut work = rhs.to_vec();
        let mut z = vec![0.0; self.tau()];
        for j in (0..self.tau()).rev() {
            let diag = self.diagonal(j);
            if diag == 0.0 {
                return Err(Error::ZeroDiagonal(j));
            }
            z[j] = work[j] / diag;
            for (c, a) in self.row(j) {
                if c < j {
                    work[c] -= a * z[j];
                }
            }
        }
        Ok(z)
    }

    /// Condition number in the 2-norm.
    pub fn condition_number(&self) -> Result<f64> {
        let t = self.tau();
        let (smax, smin) = if t <= DENSE_LIMIT {
            let sv = self.dense_a().singular_values();
            let smax = sv.max();
            let smin = sv.min();
            (smax, smin)
        } else {
            if self.placement != AuxPlacement::Initial {
                return Err(Error::InvalidConfig(format!(
                    "terminal placement supports at most {DENSE_LIMIT} unknowns"
                )));
            }
            self.iterative_extremes()?
        };
        if !(smin >= 1e-14 * smax) || smax == 0.0 {
            return Err(Error::SingularMatrix(smin / smax));
        }
        Ok(smax / smin)
    }

    /// Extreme singular values from Lanczos runs on `A^T A` and on its inverse
    /// (applied through two triangular solves).
    fn iterative_extremes(&self) -> Result<(f64, f64)> {
        let t = self.tau();
        let start: Vec<f64> = (0..t).map(|i| 1.0 + 0.5 * ((i * 7919) % 97) as f64 / 97.0).collect();
        let smax = lanczos_max(&start, |v| Ok(self.mat_t_vec(&self.mat_vec(v))))?.sqrt();
        let inv = lanczos_max(&start, |v| self.forward_solve(&self.transpose_solve(v)?))?;
        Ok((smax, 1.0 / inv.sqrt()))
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by Lanczos
/// with full reorthogonalization.
fn lanczos_max(start: &[f64], apply: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<f64> {
    let n = start.len();
    let steps = n.min(LANCZOS_STEPS);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n0 = dot(start, start).sqrt();
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / n0).collect()];
    let mut diag = Vec::with_capacity(steps);
    let mut off = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut w = apply(&basis[k])?;
        let a = dot(&w, &basis[k]);
        diag.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = dot(&w, &w).sqrt();
        if k + 1 == steps || b <= 1e-13 * a.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        off.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    let m = diag.len();
    let mut tri = DMatrix::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = diag[i];
        if i + 1 < m {
            tri[(i, i + 1)] = off[i];
            tri[(i + 1, i)] = off[i];
        }
    }
    Ok(tri.symmetric_eigenvalues().max())
}

const LANCZOS_STEPS: usize = 150;

/// Solves for `f_r..f_q`.
pub fn solve_grid_values(system: &DiscoverySystem) -> Result<Vec<f64>> {
    match system.placement {
        AuxPlacement::Initial => system.forward_solve(&system.rhs()),
        AuxPlacement::Terminal => {
            let a = system.dense_a();
            let lu = a.lu();
            lu.solve(&system.dense_rhs())
                .map(|v| v.iter().copied().collect())
                .ok_or(Error::SingularMatrix(0.0))
        }
    }
}

/// Field values recovered at grid indices `first..=last` for every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiscovery {
    pub first: usize,
    pub last: usize,
    /// One row per grid index, one column per component.
    pub values: Vec<Vec<f64>>,
}

/// Runs assembly and forward substitution independently for each component.
pub fn discover_grid(scheme: &LmmScheme, traj: &Trajectory) -> Result<GridDiscovery> {
    let cols: Vec<Vec<f64>> = (0..traj.dim())
        .into_par_iter()
        .map(|c| solve_grid_values(&assemble(scheme, traj, c)?))
        .collect::<Result<_>>()?;
    let window = scheme.index_window(traj.intervals())?;
    let values = (0..window.tau)
        .map(|i| cols.iter().map(|col| col[i]).collect())
        .collect();
    Ok(GridDiscovery {
        first: window.r,
        last: window.q,
        values,
    })
}
