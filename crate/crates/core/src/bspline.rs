//! Univariate B-spline bases on clamped uniform knot vectors.
//!
//! A basis of degree `k` with `G` interior intervals on `[a, b]` has the knot
//! vector
//!
//! ```text
//! a, ..., a (k+1 times), a + (b-a)/G, ..., a + (G-1)(b-a)/G, b, ..., b (k+1 times)
//! ```
//!
//! and `G + k` basis functions. Evaluation uses the triangular Cox–de Boor
//! scheme restricted to the `k + 1` functions that are nonzero on the knot span
//! containing `x`, so a single evaluation costs `O(k^2)` regardless of `G`.
//! Inputs outside `[a, b]` are clamped to the nearest endpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spline degree. Span evaluation uses fixed-size scratch arrays.
pub const MAX_DEGREE: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    degree: usize,
    intervals: usize,
    a: f64,
    b: f64,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Builds the clamped uniform basis of degree `degree` with `intervals` knot spans on `[a, b]`.
    pub fn new(degree: usize, intervals: usize, a: f64, b: f64) -> Result<Self> {
        if degree < 1 || degree > MAX_DEGREE {
            return Err(Error::InvalidDegree(degree));
        }
        if intervals < 1 {
            return Err(Error::InvalidGrid(intervals));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::DegenerateDomain(a, b));
        }
        let mut knots = Vec::with_capacity(intervals + 2 * degree + 1);
        knots.extend(std::iter::repeat(a).take(degree + 1));
        for i in 1..intervals {
            knots.push(a + (b - a) * (i as f64) / (intervals as f64));
        }
        knots.extend(std::iter::repeat(b).take(degree + 1));
        Ok(Self {
            degree,
            intervals,
            a,
            b,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions of the clamped basis, `G + k`.
    pub fn basis_count(&self) -> usize {
        self.intervals + self.degree
    }

    /// The count `G + k - 1` used by the approximation-theory bounds.
    ///
    /// This differs by one from [`basis_count`](Self::basis_count); the bound
    /// calculators in [`crate::analysis`] use this value.
    pub fn bound_basis_count(&self) -> usize {
        self.intervals + self.degree - 1
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.a, self.b)
    }

    /// Index `s` of the knot span with `knots[s] <= x < knots[s + 1]`, restricted to
    /// the non-degenerate spans `k..=k+G-1`. `x == b` maps to the last span.
    fn span(&self, x: f64) -> usize {
        let k = self.degree;
        let last = k + self.intervals - 1;
        let guess = ((x - self.a) / (self.b - self.a) * self.intervals as f64).floor();
        let mut s = if guess.is_nan() || guess < 0.0 {
            k
        } else {
            (k + guess as usize).min(last)
        };
        // the guess can be off by one ulp-induced step near interior knots
        while s > k && x < self.knots[s] {
            s -= 1;
        }
        while s < last && x >= self.knots[s + 1] {
            s += 1;
        }
        s
    }

    /// Writes the `k + 1` basis values that may be nonzero at `x` into `values`
    /// and returns the index of the first one. `x` is clamped to the domain.
    ///
    /// `values` must have length at least `k + 1`.
    pub fn span_values(&self, x: f64, values: &mut [f64]) -> usize {
        let x = self.clamp(x);
        let s = self.span(x);
        basis_on_span(&self.knots, s, self.degree, x, &mut values[..=self.degree]);
        s - self.degree
    }

    /// Like [`span_values`](Self::span_values) but also writes the first derivatives.
    ///
    /// The derivative is that of the basis at the clamped point; callers that
    /// need the derivative of `B(clamp(x))` must zero it outside the domain.
    pub fn span_values_and_derivatives(
        &self,
        x: f64,
        values: &mut [f64],
        derivatives: &mut [f64],
    ) -> usize {
        let k = self.degree;
        let x = self.clamp(x);
        let s = self.span(x);
        basis_on_span(&self.knots, s, k, x, &mut values[..=k]);

        // B'_{i,k} = k (B_{i,k-1} / (t_{i+k} - t_i) - B_{i+1,k-1} / (t_{i+k+1} - t_{i+1}))
        let mut lower = [0.0; MAX_DEGREE + 1];
        basis_on_span(&self.knots, s, k - 1, x, &mut lower[..k]);
        let first = s - k;
        let kf = k as f64;
        for (j, d) in derivatives[..=k].iter_mut().enumerate() {
            let i = first + j;
            // lower[j'] holds B_{s-k+1+j', k-1}, so B_{i,k-1} = lower[j - 1]
            let left = if j >= 1 {
                let den = self.knots[i + k] - self.knots[i];
                if den > 0.0 {
                    lower[j - 1] / den
                } else {
                    0.0
                }
            } else {
                0.0
            };
            let right = if j < k {
                let den = self.knots[i + k + 1] - self.knots[i + 1];
                if den > 0.0 {
                    lower[j] / den
                } else {
                    0.0
                }
            } else {
                0.0
            };
            *d = kf * (left - right);
        }
        first
    }

    /// All `G + k` basis values at `x`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::NonFiniteInput(x));
        }
        let mut out = vec![0.0; self.basis_count()];
        let mut vals = [0.0; MAX_DEGREE + 1];
        let first = self.span_values(x, &mut vals);
        out[first..=first + self.degree].copy_from_slice(&vals[..=self.degree]);
        Ok(out)
    }

    /// All `G + k` basis derivatives at `x`. At interior knots the right limit is returned.
    pub fn eval_derivative(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::NonFiniteInput(x));
        }
        let mut out = vec![0.0; self.basis_count()];
        let mut vals = [0.0; MAX_DEGREE + 1];
        let mut ders = [0.0; MAX_DEGREE + 1];
        let first = self.span_values_and_derivatives(x, &mut vals, &mut ders);
        out[first..=first + self.degree].copy_from_slice(&ders[..=self.degree]);
        Ok(out)
    }

    /// Evaluates the spline `sum_q coeffs[q] B_q(x)`.
    pub fn eval_spline(&self, coeffs: &[f64], x: f64) -> f64 {
        let mut vals = [0.0; MAX_DEGREE + 1];
        let first = self.span_values(x, &mut vals);
        vals[..=self.degree]
            .iter()
            .zip(&coeffs[first..])
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// Cox–de Boor triangle for the `degree + 1` functions `B_{s-degree..=s, degree}` on span `s`.
///
/// Repeated knots never produce a zero denominator here because `s` is a
/// non-degenerate span; the 0/0 = 0 convention is still applied defensively.
pub(crate) fn basis_on_span(knots: &[f64], s: usize, degree: usize, x: f64, out: &mut [f64]) {
    let mut left = [0.0; MAX_DEGREE + 1];
    let mut right = [0.0; MAX_DEGREE + 1];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let temp = if den != 0.0 { out[r] / den } else { 0.0 };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct recursive definition with the 0/0 = 0 convention.
    fn naive(knots: &[f64], i: usize, k: usize, x: f64, right_end: f64) -> f64 {
        if k == 0 {
            let inside = knots[i] <= x && x < knots[i + 1];
            // closed right end on the last non-degenerate span
            let at_end = x == right_end && knots[i + 1] == right_end && knots[i] < knots[i + 1];
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k] - knots[i];
        if d1 != 0.0 {
            v += (x - knots[i]) / d1 * naive(knots, i, k - 1, x, right_end);
        }
        let d2 = knots[i + k + 1] - knots[i + 1];
        if d2 != 0.0 {
            v += (knots[i + k + 1] - x) / d2 * naive(knots, i + 1, k - 1, x, right_end);
        }
        v
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(matches!(
            BSplineBasis::new(0, 4, 0.0, 1.0),
            Err(Error::InvalidDegree(0))
        ));
        assert!(matches!(
            BSplineBasis::new(3, 0, 0.0, 1.0),
            Err(Error::InvalidGrid(0))
        ));
        assert!(matches!(
            BSplineBasis::new(3, 4, 1.0, 1.0),
            Err(Error::DegenerateDomain(..))
        ));
        assert!(matches!(
            BSplineBasis::new(3, 4, 2.0, 1.0),
            Err(Error::DegenerateDomain(..))
        ));
    }

    #[test]
    fn knot_vector_is_clamped() {
        let b = BSplineBasis::new(3, 4, -1.0, 1.0).unwrap();
        assert_eq!(b.knots().len(), 4 + 2 * 3 + 1);
        assert_eq!(&b.knots()[..4], &[-1.0; 4]);
        assert_eq!(&b.knots()[7..], &[1.0; 4]);
        assert_eq!(b.knots()[5], 0.0);
        assert_eq!(b.basis_count(), 7);
        assert_eq!(b.bound_basis_count(), 6);
        assert!(b.knots().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degree_zero_is_an_indicator() {
        let knots = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut out = [0.0; 1];
        basis_on_span(&knots, 1, 0, 0.3, &mut out);
        assert_eq!(out[0], 1.0);
        for i in 0..4 {
            let expected = if i == 1 { 1.0 } else { 0.0 };
            assert_eq!(naive(&knots, i, 0, 0.3, 1.0), expected);
        }
    }

    #[test]
    fn linear_single_interval_is_forced() {
        let b = BSplineBasis::new(1, 1, 0.0, 1.0).unwrap();
        for &x in &[0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let v = b.eval(x).unwrap();
            assert!((v[0] - (1.0 - x)).abs() < 1e-15);
            assert!((v[1] - x).abs() < 1e-15);
        }
        assert_eq!(b.eval(0.25).unwrap(), vec![0.75, 0.25]);
        assert_eq!(b.eval_derivative(0.5).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn cubic_partition_of_unity_at_point() {
        let b = BSplineBasis::new(3, 4, -1.0, 1.0).unwrap();
        let v = b.eval(0.37).unwrap();
        assert!(v.iter().all(|&x| x >= 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matches_naive_recursion() {
        let b = BSplineBasis::new(3, 8, 0.0, 1.0).unwrap();
        for &x in &[0.0, 0.05, 0.125, 0.3, 0.5, 0.77, 0.999, 1.0] {
            let fast = b.eval(x).unwrap();
            for (i, &v) in fast.iter().enumerate() {
                let slow = naive(b.knots(), i, 3, x, 1.0);
                assert!((v - slow).abs() < 1e-13, "x={x} i={i}: {v} vs {slow}");
            }
        }
    }

    #[test]
    fn clamps_out_of_domain_inputs() {
        let b = BSplineBasis::new(2, 5, 0.0, 2.0).unwrap();
        assert_eq!(b.eval(-3.0).unwrap(), b.eval(0.0).unwrap());
        assert_eq!(b.eval(7.0).unwrap(), b.eval(2.0).unwrap());
        assert!(matches!(b.eval(f64::NAN), Err(Error::NonFiniteInput(_))));
        assert!(matches!(
            b.eval_derivative(f64::INFINITY),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn endpoint_interpolation() {
        let b = BSplineBasis::new(4, 6, 0.0, 1.0).unwrap();
        let v0 = b.eval(0.0).unwrap();
        let v1 = b.eval(1.0).unwrap();
        assert_eq!(v0[0], 1.0);
        assert_eq!(v1[b.basis_count() - 1], 1.0);
    }

    #[test]
    fn derivative_right_limit_at_interior_knot() {
        // degree 1: slopes jump at knots; the right-hand span is used
        let b = BSplineBasis::new(1, 2, 0.0, 1.0).unwrap();
        let d = b.eval_derivative(0.5).unwrap();
        assert_eq!(d, vec![0.0, -2.0, 2.0]);
    }
}
