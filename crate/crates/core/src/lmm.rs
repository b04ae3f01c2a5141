//! Linear multistep schemes
//!
//! ```text
//! sum_{m=0}^{M} alpha_m x_{n-m} = h sum_{m=0}^{M} beta_m f(x_{n-m}),   n = M, ..., N1
//! ```
//!
//! for the Adams–Bashforth, Adams–Moulton and BDF families with `M = 1..=6`.
//! Coefficients are obtained by solving the order conditions
//!
//! ```text
//! sum_m (-m)^j alpha_m = j sum_m (-m)^(j-1) beta_m,   j = 0..=p
//! ```
//!
//! in exact rational arithmetic and only then rounded to `f64`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::analysis::linear_fit;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::trajectory::Trajectory;

pub const MAX_STEPS: usize = 6;
pub const MAX_FDM_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Adams–Bashforth (explicit).
    Ab,
    /// Adams–Moulton (implicit).
    Am,
    /// Backward differentiation formula (implicit).
    Bdf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Ab, Family::Am, Family::Bdf];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ab => "ab",
            Family::Am => "am",
            Family::Bdf => "bdf",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ab" => Ok(Family::Ab),
            "am" => Ok(Family::Am),
            "bdf" => Ok(Family::Bdf),
            other => Err(Error::UnsupportedScheme {
                family: other.to_string(),
                steps: 0,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmScheme {
    family: Family,
    steps: usize,
    alpha_exact: Vec<BigRational>,
    beta_exact: Vec<BigRational>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    order: usize,
}

impl LmmScheme {
    pub fn new(family: Family, steps: usize) -> Result<Self> {
        if !(1..=MAX_STEPS).contains(&steps) {
            return Err(Error::UnsupportedScheme {
                family: family.name().to_string(),
                steps,
            });
        }
        let (alpha_exact, beta_exact, order) = match family {
            Family::Ab => adams(steps, false),
            Family::Am => adams(steps, true),
            Family::Bdf => bdf(steps),
        };
        let to_f64 = |v: &[BigRational]| v.iter().map(ratio_to_f64).collect::<Vec<f64>>();
        Ok(Self {
            family,
            steps,
            alpha: to_f64(&alpha_exact),
            beta: to_f64(&beta_exact),
            alpha_exact,
            beta_exact,
            order,
        })
    }

    /// All 18 supported schemes, family-major.
    pub fn all() -> Vec<LmmScheme> {
        Family::ALL
            .iter()
            .flat_map(|&f| (1..=MAX_STEPS).map(move |m| LmmScheme::new(f, m).unwrap()))
            .collect()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_exact(&self) -> &[BigRational] {
        &self.alpha_exact
    }

    pub fn beta_exact(&self) -> &[BigRational] {
        &self.beta_exact
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_explicit(&self) -> bool {
        self.beta_exact[0].is_zero()
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.family.name().to_uppercase(), self.steps)
    }

    /// Smallest and largest `m` with `beta_m != 0`.
    pub fn beta_support(&self) -> (usize, usize) {
        let first = self.beta_exact.iter().position(|b| !b.is_zero()).unwrap();
        let last = self.beta_exact.iter().rposition(|b| !b.is_zero()).unwrap();
        (first, last)
    }

    /// Residual rows `(1/h) sum_m alpha_m x_{n-m} - sum_m beta_m g(x_{n-m})` for `n = M..=N1`.
    pub fn residual(&self, traj: &Trajectory, g: &dyn VectorField) -> Result<Vec<Vec<f64>>> {
        let m_steps = self.steps;
        let n1 = traj.intervals();
        if n1 < m_steps {
            return Err(Error::TooFewSamples {
                needed: m_steps + 1,
                got: n1 + 1,
            });
        }
        let d = traj.dim();
        let gvals: Vec<Vec<f64>> = traj.states.iter().map(|x| g.eval_vec(x)).collect();
        let inv_h = 1.0 / traj.h;
        Ok((m_steps..=n1)
            .map(|n| {
                (0..d)
                    .map(|c| {
                        let mut lhs = 0.0;
                        let mut rhs = 0.0;
                        for m in 0..=m_steps {
                            lhs += self.alpha[m] * traj.states[n - m][c];
                            rhs += self.beta[m] * gvals[n - m][c];
                        }
                        lhs * inv_h - rhs
                    })
                    .collect()
            })
            .collect())
    }

    /// Index bookkeeping of the discovery system on a grid with `n1` intervals.
    pub fn index_window(&self, n1: usize) -> Result<IndexWindow> {
        if n1 < self.steps {
            return Err(Error::TooFewSamples {
                needed: self.steps + 1,
                got: n1 + 1,
            });
        }
        let m_steps = self.steps;
        let mut r = usize::MAX;
        let mut q = 0;
        for n in m_steps..=n1 {
            for m in 0..=m_steps {
                if !self.beta_exact[m].is_zero() {
                    r = r.min(n - m);
                    q = q.max(n - m);
                }
            }
        }
        let tau = q - r + 1;
        let equations = n1 - m_steps + 1;
        Ok(IndexWindow {
            n1,
            r,
            q,
            tau,
            equations,
            omega_a: tau as i64 - equations as i64,
            omega_a_stated: q as i64 - equations as i64,
        })
    }

    /// Roots of `p_h(z) = sum_{i=N1-q}^{M-r} beta_i z^{M-r-i}` and the strict root condition.
    pub fn root_condition(&self, window: &IndexWindow) -> Result<RootReport> {
        let lo = window.n1 - window.q;
        let hi = self.steps - window.r;
        let coeffs: Vec<f64> = (lo..=hi).map(|i| self.beta[i]).collect();
        let roots = polynomial_roots(&coeffs)?;
        let moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
        let satisfied = moduli.iter().all(|&r| r < 1.0 - ROOT_MARGIN);
        let on_boundary = moduli.iter().any(|&r| (r - 1.0).abs() <= ROOT_MARGIN.max(1e-10));
        Ok(RootReport {
            coefficients: coeffs,
            roots: roots.iter().map(|z| (z.re, z.im)).collect(),
            moduli,
            satisfied,
            on_boundary,
        })
    }
}

const ROOT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub n1: usize,
    /// First grid index whose `f` value appears with a nonzero coefficient.
    pub r: usize,
    /// Last such index.
    pub q: usize,
    /// `q - r + 1`, the number of unknowns.
    pub tau: usize,
    /// `N1 - M + 1`, the number of scheme equations.
    pub equations: usize,
    /// Unknowns minus equations: the number of auxiliary conditions needed.
    pub omega_a: i64,
    /// The count `q - (N1 - M + 1)`; differs from `omega_a` when `r != 1`.
    pub omega_a_stated: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    /// Polynomial coefficients, highest degree first.
    pub coefficients: Vec<f64>,
    pub roots: Vec<(f64, f64)>,
    pub moduli: Vec<f64>,
    /// Every root strictly inside the unit disk (vacuous for constants).
    pub satisfied: bool,
    /// Some root lies on the unit circle within 1e-10.
    pub on_boundary: bool,
}

/// Roots of `c[0] z^n + ... + c[n]` from the eigenvalues of the companion matrix.
///
/// Leading zeros are stripped; a constant nonzero polynomial has no roots.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<nalgebra::Complex<f64>>> {
    let start = coeffs
        .iter()
        .position(|&c| c != 0.0)
        .ok_or(Error::ZeroPolynomial)?;
    let c = &coeffs[start..];
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    let mut roots: Vec<_> = comp.complex_eigenvalues().iter().copied().collect();
    roots.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(a.re.partial_cmp(&b.re).unwrap())
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(roots)
}

/// One-sided first-derivative weights of order `p`: `f(t_n) ~ (1/h) sum_{m=0}^{p} mu_m x_{n+m}`.
pub fn fdm_coefficients(order: usize) -> Result<Vec<f64>> {
    Ok(fdm_coefficients_exact(order)?
        .iter()
        .map(ratio_to_f64)
        .collect())
}

pub fn fdm_coefficients_exact(order: usize) -> Result<Vec<BigRational>> {
    if !(1..=MAX_FDM_ORDER).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    // sum_m mu_m m^j = [j == 1], j = 0..=p
    let n = order + 1;
    let a: Vec<Vec<BigRational>> = (0..n)
        .map(|j| (0..n).map(|m| int_pow(m as i64, j)).collect())
        .collect();
    let b: Vec<BigRational> = (0..n)
        .map(|j| if j == 1 { one() } else { zero() })
        .collect();
    Ok(solve_exact(a, b).expect("Vandermonde system is nonsingular"))
}

/// Least-squares slope of log(max truncation error) against log h on a known solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    /// `(h, max |T_n|)` pairs.
    pub errors: Vec<(f64, f64)>,
}

/// Fits the observed order of the local truncation error of `scheme` on the exact
/// solution `exact` of `field`, sampled on `[t0, t1]` with each step in `h_list`.
pub fn empirical_order(
    scheme: &LmmScheme,
    exact: &dyn Fn(f64) -> Vec<f64>,
    field: &dyn VectorField,
    t0: f64,
    t1: f64,
    h_list: &[f64],
) -> Result<OrderFit> {
    if h_list.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 step sizes, got {}",
            h_list.len()
        )));
    }
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let traj = Trajectory::from_fn(t0, t1, h, exact)?;
        let res = scheme.residual(&traj, field)?;
        let max = res
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        errors.push((h, max));
    }
    if errors.iter().all(|&(_, e)| e < 1e-14) {
        return Err(Error::DegenerateFit(
            "all truncation errors below 1e-14 (saturated)".into(),
        ));
    }
    if errors.iter().any(|&(_, e)| e <= 0.0) {
        return Err(Error::DegenerateFit("zero truncation error".into()));
    }
    let xs: Vec<f64> = errors.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(OrderFit {
        slope: fit.slope,
        errors,
    })
}

fn zero() -> BigRational {
    BigRational::zero()
}

fn one() -> BigRational {
    BigRational::one()
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `base^exp` with `0^0 = 1`.
fn int_pow(base: i64, exp: usize) -> BigRational {
    let mut acc = one();
    for _ in 0..exp {
        acc *= int(base);
    }
    acc
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    // numerator and denominator stay small for these tables
    let n = r.numer().to_f64().unwrap();
    let d = r.denom().to_f64().unwrap();
    n / d
}

/// Gaussian elimination with exact pivots; `None` if singular.
fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = &a[r][col] / &a[col][col];
                for c in col..n {
                    let delta = &factor * &a[col][c];
                    a[r][c] -= delta;
                }
                let delta = &factor * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Adams schemes: `alpha = [1, -1, 0, ...]`; beta solves the order conditions
/// `j = 1..=p` with `p = M` (explicit, `beta_0 = 0`) or `p = M + 1` (implicit).
fn adams(steps: usize, implicit: bool) -> (Vec<BigRational>, Vec<BigRational>, usize) {
    let mut alpha = vec![zero(); steps + 1];
    alpha[0] = one();
    alpha[1] = -one();
    let unknowns: Vec<usize> = if implicit {
        (0..=steps).collect()
    } else {
        (1..=steps).collect()
    };
    let order = unknowns.len();
    // j sum_m (-m)^(j-1) beta_m = sum_m (-m)^j alpha_m
    let a: Vec<Vec<BigRational>> = (1..=order)
        .map(|j| {
            unknowns
                .iter()
                .map(|&m| int(j as i64) * int_pow(-(m as i64), j - 1))
                .collect()
        })
        .collect();
    let b: Vec<BigRational> = (1..=order)
        .map(|j| {
            alpha
                .iter()
                .enumerate()
                .fold(zero(), |acc, (m, am)| acc + am * int_pow(-(m as i64), j))
        })
        .collect();
    let sol = solve_exact(a, b).expect("Adams order conditions are nonsingular");
    let mut beta = vec![zero(); steps + 1];
    for (&m, v) in unknowns.iter().zip(sol) {
        beta[m] = v;
    }
    (alpha, beta, order)
}

/// BDF: `beta = [1, 0, ...]`; alpha solves the order conditions `j = 0..=M`.
fn bdf(steps: usize) -> (Vec<BigRational>, Vec<BigRational>, usize) {
    let mut beta = vec![zero(); steps + 1];
    beta[0] = one();
    let a: Vec<Vec<BigRational>> = (0..=steps)
        .map(|j| (0..=steps).map(|m| int_pow(-(m as i64), j)).collect())
        .collect();
    let b: Vec<BigRational> = (0..=steps)
        .map(|j| if j == 1 { one() } else { zero() })
        .collect();
    let alpha = solve_exact(a, b).expect("BDF order conditions are nonsingular");
    debug_assert!(alpha[0].is_positive());
    (alpha, beta, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn trapezoidal_rule() {
        let s = LmmScheme::new(Family::Am, 1).unwrap();
        assert_eq!(s.alpha_exact(), &[r(1, 1), r(-1, 1)]);
        assert_eq!(s.beta_exact(), &[r(1, 2), r(1, 2)]);
        assert_eq!(s.order(), 2);
        assert!(!s.is_explicit());
    }

    #[test]
    fn two_step_adams_bashforth() {
        let s = LmmScheme::new(Family::Ab, 2).unwrap();
        assert_eq!(s.alpha_exact(), &[r(1, 1), r(-1, 1), r(0, 1)]);
        assert_eq!(s.beta_exact(), &[r(0, 1), r(3, 2), r(-1, 2)]);
        assert_eq!(s.order(), 2);
        assert!(s.is_explicit());
    }

    #[test]
    fn two_step_bdf() {
        let s = LmmScheme::new(Family::Bdf, 2).unwrap();
        assert_eq!(s.alpha_exact(), &[r(3, 2), r(-2, 1), r(1, 2)]);
        assert_eq!(s.beta_exact(), &[r(1, 1), r(0, 1), r(0, 1)]);
        assert_eq!(s.order(), 2);
    }

    #[test]
    fn orders_by_family() {
        for m in 1..=6 {
            assert_eq!(LmmScheme::new(Family::Ab, m).unwrap().order(), m);
            assert_eq!(LmmScheme::new(Family::Am, m).unwrap().order(), m + 1);
            assert_eq!(LmmScheme::new(Family::Bdf, m).unwrap().order(), m);
        }
    }

    #[test]
    fn alpha_sums_to_zero_and_leads_positive() {
        for s in LmmScheme::all() {
            let sum = s.alpha_exact().iter().fold(zero(), |a, b| a + b);
            assert!(sum.is_zero(), "{}", s.label());
            assert!(s.alpha_exact()[0].is_positive());
        }
    }

    #[test]
    fn unsupported_steps() {
        assert!(matches!(
            LmmScheme::new(Family::Ab, 0),
            Err(Error::UnsupportedScheme { .. })
        ));
        assert!(LmmScheme::new(Family::Bdf, 7).is_err());
        assert!("xyz".parse::<Family>().is_err());
        assert_eq!("AM".parse::<Family>().unwrap(), Family::Am);
    }

    #[test]
    fn forward_difference_weights() {
        assert_eq!(fdm_coefficients(1).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(fdm_coefficients(2).unwrap(), vec![-1.5, 2.0, -0.5]);
        assert!(matches!(fdm_coefficients(0), Err(Error::UnsupportedOrder(0))));
        assert!(fdm_coefficients(8).is_err());
    }

    #[test]
    fn fdm_exact_on_polynomials() {
        let h = 0.1;
        for p in 1..=MAX_FDM_ORDER {
            let mu = fdm_coefficients(p).unwrap();
            for deg in 0..=p {
                let t0 = 0.3;
                let approx: f64 = mu
                    .iter()
                    .enumerate()
                    .map(|(m, w)| w * (t0 + m as f64 * h).powi(deg as i32))
                    .sum::<f64>()
                    / h;
                let exact = if deg == 0 {
                    0.0
                } else {
                    deg as f64 * t0.powi(deg as i32 - 1)
                };
                assert!((approx - exact).abs() < 1e-9, "p={p} deg={deg}");
            }
        }
        // x(t) = t^2 at t = 0
        let mu = fdm_coefficients(2).unwrap();
        let d: f64 = mu
            .iter()
            .enumerate()
            .map(|(m, w)| w * (m as f64 * 0.1).powi(2))
            .sum::<f64>()
            / 0.1;
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn index_windows() {
        let w = LmmScheme::new(Family::Ab, 2).unwrap().index_window(10).unwrap();
        assert_eq!((w.r, w.q, w.tau, w.omega_a), (0, 9, 10, 1));
        assert_eq!(w.omega_a_stated, 0);
        let w = LmmScheme::new(Family::Am, 1).unwrap().index_window(10).unwrap();
        assert_eq!((w.r, w.q, w.tau, w.omega_a), (0, 10, 11, 1));
        let w = LmmScheme::new(Family::Bdf, 2).unwrap().index_window(10).unwrap();
        assert_eq!((w.r, w.q, w.tau, w.omega_a), (2, 10, 9, 0));
    }

    #[test]
    fn roots_of_beta_polynomials() {
        let ab2 = LmmScheme::new(Family::Ab, 2).unwrap();
        let rep = ab2.root_condition(&ab2.index_window(10).unwrap()).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!((rep.roots[0].0 - 1.0 / 3.0).abs() < 1e-10);
        assert!(rep.roots[0].1.abs() < 1e-12);
        assert!(rep.satisfied && !rep.on_boundary);

        let am1 = LmmScheme::new(Family::Am, 1).unwrap();
        let rep = am1.root_condition(&am1.index_window(10).unwrap()).unwrap();
        assert!((rep.roots[0].0 + 1.0).abs() < 1e-12);
        assert!(!rep.satisfied);
        assert!(rep.on_boundary);

        let bdf1 = LmmScheme::new(Family::Bdf, 1).unwrap();
        let rep = bdf1.root_condition(&bdf1.index_window(10).unwrap()).unwrap();
        assert!(rep.roots.is_empty());
        assert!(rep.satisfied);
    }

    #[test]
    fn zero_polynomial_is_an_error() {
        assert!(matches!(
            polynomial_roots(&[0.0, 0.0]),
            Err(Error::ZeroPolynomial)
        ));
    }
}
