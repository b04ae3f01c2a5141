//! Error metrics, Gronwall growth studies and theoretical bound calculators.

use serde::{Deserialize, Serialize};

use crate::bspline::BSplineBasis;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kan::KanNetwork;
use crate::odeint::integrate_reference;

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of the samples.
    pub correlation: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let correlation = if syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        correlation,
    })
}

/// `sqrt(mean |v_n|^2)` over the supplied window of vectors (Euclidean norm per row).
pub fn l2_seminorm<V: AsRef<[f64]>>(rows: &[V]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = rows
        .iter()
        .map(|r| r.as_ref().iter().map(|v| v * v).sum::<f64>())
        .sum();
    Ok((sum / rows.len() as f64).sqrt())
}

/// Largest absolute entry over all rows.
pub fn max_abs<V: AsRef<[f64]>>(rows: &[V]) -> f64 {
    rows.iter()
        .flat_map(|r| r.as_ref().iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Hölder modulus `ω(r) = λ r^α` on a ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub radius: f64,
}

impl HolderSpec {
    pub fn new(alpha: f64, lambda: f64, radius: f64) -> Result<Self> {
        let s = Self {
            alpha,
            lambda,
            radius,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidHolderParams(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidHolderParams(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidHolderParams(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn modulus(&self, r: f64) -> f64 {
        self.lambda * r.powf(self.alpha)
    }
}

fn check_sizes(k: usize, g: usize, n: usize, d: usize) -> Result<()> {
    if k == 0 || g == 0 || n == 0 || d == 0 {
        return Err(Error::InvalidHolderParams(format!(
            "k, G, N, d must be positive (k = {k}, G = {g}, N = {n}, d = {d})"
        )));
    }
    Ok(())
}

/// `min{ sqrt(2/(k-1)), sqrt(k/3)/G }` scaled for the ball; the first branch is
/// dropped at `k = 1`.
fn ball_mesh(k: usize, g: usize) -> f64 {
    let grid_branch = (1.0f64 / 3.0).sqrt() * (k as f64).sqrt() / g as f64;
    if k == 1 {
        grid_branch
    } else {
        let degree_branch = 2.0f64.sqrt() / ((k - 1) as f64).sqrt();
        degree_branch.min(grid_branch)
    }
}

/// `min{ 1/sqrt(2k-2), sqrt(k/12)/G }`, the unit-cube mesh quantity.
fn cube_mesh(k: usize, g: usize) -> f64 {
    let grid_branch = (k as f64 / 12.0).sqrt() / g as f64;
    if k == 1 {
        grid_branch
    } else {
        let degree_branch = 1.0 / ((2 * k - 2) as f64).sqrt();
        degree_branch.min(grid_branch)
    }
}

/// Approximation bound for a Hölder target on a ball of radius `R`:
/// `λ N (L_G d + 1) R^α m^α` with `m` the ball mesh quantity.
pub fn upper_bound(
    holder: &HolderSpec,
    k: usize,
    g: usize,
    n: usize,
    d: usize,
    lipschitz: f64,
) -> Result<f64> {
    holder.validate()?;
    check_sizes(k, g, n, d)?;
    check_lipschitz(lipschitz)?;
    let m = ball_mesh(k, g);
    Ok(holder.lambda
        * n as f64
        * (lipschitz * d as f64 + 1.0)
        * holder.radius.powf(holder.alpha)
        * m.powf(holder.alpha))
}

/// The same bound on the unit cube: `N (L_G d + 1) ω(m)`.
pub fn upper_bound_unit_cube(
    holder: &HolderSpec,
    k: usize,
    g: usize,
    n: usize,
    d: usize,
    lipschitz: f64,
) -> Result<f64> {
    holder.validate()?;
    check_sizes(k, g, n, d)?;
    check_lipschitz(lipschitz)?;
    Ok(n as f64 * (lipschitz * d as f64 + 1.0) * holder.modulus(cube_mesh(k, g)))
}

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l >= 0.0 && l.is_finite()) {
        return Err(Error::InvalidHolderParams(format!(
            "Lipschitz constant must be finite and non-negative, got {l}"
        )));
    }
    Ok(())
}

/// `(N P (d+1)(d+N+1) ln((d+1)P))^(-α/d)` with `P = G + k - 1`, evaluated in
/// log space. The unknown leading constant is omitted.
pub fn vc_lower_bound_shape(k: usize, g: usize, n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_sizes(k, g, n, d)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidHolderParams(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let p = (g + k - 1) as f64;
    let (n, d) = (n as f64, d as f64);
    let inner_log = ((d + 1.0) * p).ln();
    if inner_log <= 0.0 {
        return Err(Error::InvalidHolderParams(
            "(d+1)P must exceed 1 for the logarithm to be positive".into(),
        ));
    }
    let log_base = n.ln() + p.ln() + (d + 1.0).ln() + (d + n + 1.0).ln() + inner_log.ln();
    Ok((-alpha / d * log_base).exp())
}

/// Upper bound on `sup |s'(x)|` for a spline with the given coefficients:
/// the largest coefficient of its derivative spline.
pub fn spline_slope_bound(basis: &BSplineBasis, coeffs: &[f64]) -> f64 {
    let k = basis.degree();
    if k == 0 {
        return 0.0;
    }
    let t = basis.knots();
    let mut best = 0.0f64;
    for i in 0..coeffs.len() - 1 {
        let gap = t[i + k + 1] - t[i + 1];
        if gap > 0.0 {
            best = best.max(k as f64 * (coeffs[i + 1] - coeffs[i]).abs() / gap);
        }
    }
    best
}

/// Upper estimate of the Lipschitz constant of the network in the Euclidean norm.
///
/// Each edge is bounded by its derivative control polygon; edge bounds are
/// composed as `K[m][i] = Σ_j D_out[m][j] D_in[j][i]` and the Frobenius norm of
/// `K` bounds the spectral norm of every Jacobian.
pub fn lipschitz_estimate(net: &KanNetwork) -> f64 {
    let s = net.shape();
    let basis = net.basis();
    let hs = net.hidden_slope();
    let d_in: Vec<Vec<f64>> = (0..s.hidden)
        .map(|j| {
            (0..s.d_in)
                .map(|i| spline_slope_bound(basis, net.inner_edge(j, i)) * net.input_slope(i))
                .collect()
        })
        .collect();
    let mut frob = 0.0;
    for m in 0..s.d_out {
        let d_out: Vec<f64> = (0..s.hidden)
            .map(|j| spline_slope_bound(basis, net.outer_edge(m, j)) * hs)
            .collect();
        for i in 0..s.d_in {
            let kmi: f64 = (0..s.hidden).map(|j| d_out[j] * d_in[j][i]).sum();
            frob += kmi * kmi;
        }
    }
    frob.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub k: usize,
    pub grid: usize,
    pub hidden: usize,
    pub dim: usize,
    pub lipschitz: f64,
    /// The free-function count `G + k - 1` used by the bounds.
    pub p: usize,
    /// Basis functions of the clamped runtime basis, `G + k`.
    pub runtime_basis_count: usize,
    pub holder: HolderSpec,
    pub upper_bound: f64,
    pub upper_bound_unit_cube: f64,
    pub vc_shape: f64,
    pub notes: Vec<String>,
}

impl BoundsReport {
    pub fn compute(
        holder: HolderSpec,
        k: usize,
        g: usize,
        n: usize,
        d: usize,
        lipschitz: f64,
    ) -> Result<Self> {
        let mut notes = vec![
            "vc_shape omits the unknown leading constant C".to_string(),
            "bounds apply per output component".to_string(),
        ];
        if k == 1 {
            notes.push("k = 1: only the grid branch of the mesh minimum applies".into());
        }
        Ok(Self {
            k,
            grid: g,
            hidden: n,
            dim: d,
            lipschitz,
            p: g + k - 1,
            runtime_basis_count: g + k,
            holder,
            upper_bound: upper_bound(&holder, k, g, n, d, lipschitz)?,
            upper_bound_unit_cube: upper_bound_unit_cube(&holder, k, g, n, d, lipschitz)?,
            vc_shape: vc_lower_bound_shape(k, g, n, d, holder.alpha)?,
            notes,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "inputs: k={} G={} N={} d={} L_G={:.6e} P={} (runtime basis count {})\n",
            self.k, self.grid, self.hidden, self.dim, self.lipschitz, self.p, self.runtime_basis_count
        ));
        s.push_str(&format!(
            "holder: alpha={} lambda={} R={}\n",
            self.holder.alpha, self.holder.lambda, self.holder.radius
        ));
        s.push_str(&format!("upper_bound: {:.16e}\n", self.upper_bound));
        s.push_str(&format!(
            "upper_bound_unit_cube: {:.16e}\n",
            self.upper_bound_unit_cube
        ));
        s.push_str(&format!("vc_shape: {:.16e}\n", self.vc_shape));
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub t: f64,
    /// Max-norm state discrepancy at `t`.
    pub error: f64,
    /// Largest max-norm discrepancy over the grid on `[t0, t]`.
    pub sup_error: f64,
}

/// Integrates `model` and `reference` from the same state and records the
/// discrepancy at each requested time. Every time must be a multiple of `h_out`.
pub fn gronwall_study(
    model: &dyn VectorField,
    reference: &dyn VectorField,
    x0: &[f64],
    times: &[f64],
    h_out: f64,
) -> Result<Vec<GronwallRow>> {
    if times.is_empty() {
        return Err(Error::EmptyInput);
    }
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let a = integrate_reference(model, x0, 0.0, t_max, h_out)?;
    let b = integrate_reference(reference, x0, 0.0, t_max, h_out)?;
    let gaps: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(u, v)| u.iter().zip(v).fold(0.0f64, |m, (p, q)| m.max((p - q).abs())))
        .collect();
    times
        .iter()
        .map(|&t| {
            let n = crate::trajectory::grid_intervals(0.0, t, h_out)?;
            Ok(GronwallRow {
                t,
                error: gaps[n],
                sup_error: gaps[..=n].iter().cloned().fold(0.0, f64::max),
            })
        })
        .collect()
}

/// `(z0 + ε t) e^{L t}`.
pub fn gronwall_envelope(z0: f64, eps: f64, lipschitz: f64, t: f64) -> f64 {
    (z0 + eps * t) * (lipschitz * t).exp()
}
