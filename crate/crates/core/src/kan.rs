//! Two-layer B-spline Kolmogorov–Arnold network.
//!
//! The network computes
//!
//! ```text
//! y_m = sum_j phi_out[m][j]( rescale_hidden( z_j ) ),   z_j = sum_i phi_in[j][i]( rescale_input_i( x_i ) )
//! ```
//!
//! where every edge function is a spline over a shared clamped basis on `[0, 1]`.
//! Inputs are mapped affinely from their data range into `[0, 1]`; hidden sums
//! are mapped from the calibrated `hidden_range`. Both maps clamp, so the
//! forward pass is finite for every finite input.
//!
//! Coefficient layout (also the [`ParameterVector`] ordering): inner
//! coefficients first, indexed `[j][i][q]`, then outer coefficients indexed
//! `[m][j][q]`, where `q` runs over the basis.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::bspline::{BSplineBasis, MAX_DEGREE};
use crate::error::{Error, Result};

/// Model document version written by [`KanNetwork::to_document`].
pub const DOCUMENT_VERSION: u32 = 1;

/// Random points used (on top of the box corners) to calibrate the hidden range.
const CALIBRATION_POINTS: usize = 1024;
/// Corners are enumerated only up to this input dimension.
const MAX_CORNER_DIM: usize = 12;
const HIDDEN_MARGIN: f64 = 0.10;

/// Architecture of a two-layer network `[d_in, hidden, d_out]` with degree-`degree`
/// splines on `grid` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KanShape {
    pub d_in: usize,
    pub hidden: usize,
    pub d_out: usize,
    pub degree: usize,
    pub grid: usize,
}

impl KanShape {
    /// `[d, 2d + 1, d]`, the Kolmogorov–Arnold width.
    pub fn for_dimension(d: usize, degree: usize, grid: usize) -> Self {
        Self {
            d_in: d,
            hidden: 2 * d + 1,
            d_out: d,
            degree,
            grid,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_in", self.d_in),
            ("hidden", self.hidden),
            ("d_out", self.d_out),
        ] {
            if v == 0 {
                return Err(Error::InvalidDimension(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Flat coefficient vector of a [`KanNetwork`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterVector(pub Vec<f64>);

impl Deref for ParameterVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    shape: KanShape,
    basis: BSplineBasis,
    input_range: Vec<(f64, f64)>,
    hidden_range: (f64, f64),
    inner: Vec<f64>,
    outer: Vec<f64>,
}

/// Per-evaluation scratch space, reusable across calls on the same network shape.
#[derive(Debug, Clone)]
pub struct Workspace {
    in_first: Vec<usize>,
    in_vals: Vec<f64>,
    hid_first: Vec<usize>,
    hid_vals: Vec<f64>,
    hid_ders: Vec<f64>,
    hid_inside: Vec<bool>,
    z: Vec<f64>,
}

impl Workspace {
    pub fn new(shape: &KanShape) -> Self {
        let w = shape.degree + 1;
        Self {
            in_first: vec![0; shape.d_in],
            in_vals: vec![0.0; shape.d_in * w],
            hid_first: vec![0; shape.hidden],
            hid_vals: vec![0.0; shape.hidden * w],
            hid_ders: vec![0.0; shape.hidden * w],
            hid_inside: vec![true; shape.hidden],
            z: vec![0.0; shape.hidden],
        }
    }
}

fn check_range(lo: f64, hi: f64, what: &str) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::InvalidDimension(format!(
            "{what} range [{lo}, {hi}] is empty or not finite"
        )));
    }
    Ok(())
}

impl KanNetwork {
    /// Xavier-uniform initialization followed by hidden-range calibration.
    ///
    /// Inner coefficients are drawn from `U[-s, s]` with `s = sqrt(6 / (d_in + hidden))`,
    /// outer ones with `s = sqrt(6 / (hidden + d_out))`. The hidden range is the
    /// min/max of the hidden sums over the input-box corners (for `d_in <= 12`)
    /// and 1024 random points, widened by 10% on each side.
    pub fn init(shape: KanShape, input_range: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        shape.validate()?;
        let basis = BSplineBasis::new(shape.degree, shape.grid, 0.0, 1.0)?;
        if input_range.len() != shape.d_in {
            return Err(Error::InvalidDimension(format!(
                "expected {} input ranges, got {}",
                shape.d_in,
                input_range.len()
            )));
        }
        for &(lo, hi) in &input_range {
            check_range(lo, hi, "input")?;
        }
        let p = basis.basis_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s_in = (6.0 / (shape.d_in + shape.hidden) as f64).sqrt();
        let s_out = (6.0 / (shape.hidden + shape.d_out) as f64).sqrt();
        let inner: Vec<f64> = (0..shape.hidden * shape.d_in * p)
            .map(|_| rng.gen_range(-s_in..=s_in))
            .collect();
        let outer: Vec<f64> = (0..shape.d_out * shape.hidden * p)
            .map(|_| rng.gen_range(-s_out..=s_out))
            .collect();

        let mut net = Self {
            shape,
            basis,
            input_range,
            hidden_range: (-1.0, 1.0),
            inner,
            outer,
        };
        net.hidden_range = net.calibrate_hidden_range(&mut rng);
        Ok(net)
    }

    /// Assembles a network from explicit parts.
    pub fn from_parts(
        shape: KanShape,
        input_range: Vec<(f64, f64)>,
        hidden_range: (f64, f64),
        inner: Vec<f64>,
        outer: Vec<f64>,
    ) -> Result<Self> {
        shape.validate()?;
        let basis = BSplineBasis::new(shape.degree, shape.grid, 0.0, 1.0)?;
        let p = basis.basis_count();
        if input_range.len() != shape.d_in {
            return Err(Error::InvalidDimension(format!(
                "expected {} input ranges, got {}",
                shape.d_in,
                input_range.len()
            )));
        }
        for &(lo, hi) in &input_range {
            check_range(lo, hi, "input")?;
        }
        check_range(hidden_range.0, hidden_range.1, "hidden")?;
        if inner.len() != shape.hidden * shape.d_in * p {
            return Err(Error::InvalidDimension(format!(
                "expected {} inner coefficients, got {}",
                shape.hidden * shape.d_in * p,
                inner.len()
            )));
        }
        if outer.len() != shape.d_out * shape.hidden * p {
            return Err(Error::InvalidDimension(format!(
                "expected {} outer coefficients, got {}",
                shape.d_out * shape.hidden * p,
                outer.len()
            )));
        }
        Ok(Self {
            shape,
            basis,
            input_range,
            hidden_range,
            inner,
            outer,
        })
    }

    fn calibrate_hidden_range(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let d = self.shape.d_in;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut ws = Workspace::new(&self.shape);
        let mut u = vec![0.0; d];
        let mut visit = |u: &[f64], ws: &mut Workspace| {
            self.hidden_sums_unit(u, ws);
            for &z in &ws.z {
                lo = lo.min(z);
                hi = hi.max(z);
            }
        };
        if d <= MAX_CORNER_DIM {
            for mask in 0u32..(1u32 << d) {
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui = if mask & (1 << i) != 0 { 1.0 } else { 0.0 };
                }
                visit(&u, &mut ws);
            }
        }
        for _ in 0..CALIBRATION_POINTS {
            for ui in u.iter_mut() {
                *ui = rng.gen::<f64>();
            }
            visit(&u, &mut ws);
        }
        let width = hi - lo;
        if !(width > 1e-12) {
            let c = if lo.is_finite() { 0.5 * (lo + hi) } else { 0.0 };
            return (c - 1.0, c + 1.0);
        }
        (lo - HIDDEN_MARGIN * width, hi + HIDDEN_MARGIN * width)
    }

    pub fn shape(&self) -> KanShape {
        self.shape
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn input_range(&self) -> &[(f64, f64)] {
        &self.input_range
    }

    pub fn hidden_range(&self) -> (f64, f64) {
        self.hidden_range
    }

    pub fn inner_coeffs(&self) -> &[f64] {
        &self.inner
    }

    pub fn outer_coeffs(&self) -> &[f64] {
        &self.outer
    }

    pub fn inner_coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.inner
    }

    pub fn outer_coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.outer
    }

    /// Coefficients of inner edge `j <- i`.
    pub fn inner_edge(&self, j: usize, i: usize) -> &[f64] {
        let p = self.basis.basis_count();
        let start = (j * self.shape.d_in + i) * p;
        &self.inner[start..start + p]
    }

    /// Coefficients of outer edge `m <- j`.
    pub fn outer_edge(&self, m: usize, j: usize) -> &[f64] {
        let p = self.basis.basis_count();
        let start = (m * self.shape.hidden + j) * p;
        &self.outer[start..start + p]
    }

    pub fn param_count(&self) -> usize {
        self.inner.len() + self.outer.len()
    }

    pub fn parameters(&self) -> ParameterVector {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.inner);
        v.extend_from_slice(&self.outer);
        ParameterVector(v)
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidDimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let n_in = self.inner.len();
        self.inner.copy_from_slice(&params[..n_in]);
        self.outer.copy_from_slice(&params[n_in..]);
        Ok(())
    }

    /// Slope of the affine map from input coordinate `i` to the unit interval.
    pub fn input_slope(&self, i: usize) -> f64 {
        let (lo, hi) = self.input_range[i];
        1.0 / (hi - lo)
    }

    /// Slope of the affine map from hidden sums to the unit interval.
    pub fn hidden_slope(&self) -> f64 {
        1.0 / (self.hidden_range.1 - self.hidden_range.0)
    }

    fn to_unit(&self, i: usize, x: f64) -> f64 {
        let (lo, hi) = self.input_range[i];
        (x - lo) / (hi - lo)
    }

    /// Inner layer on already-rescaled inputs; fills `ws.in_*` and `ws.z`.
    fn hidden_sums_unit(&self, u: &[f64], ws: &mut Workspace) {
        let k1 = self.shape.degree + 1;
        let p = self.basis.basis_count();
        let d = self.shape.d_in;
        for (i, &ui) in u.iter().enumerate() {
            ws.in_first[i] = self
                .basis
                .span_values(ui, &mut ws.in_vals[i * k1..(i + 1) * k1]);
        }
        for j in 0..self.shape.hidden {
            let mut z = 0.0;
            for i in 0..d {
                let start = (j * d + i) * p + ws.in_first[i];
                let c = &self.inner[start..start + k1];
                let v = &ws.in_vals[i * k1..(i + 1) * k1];
                for q in 0..k1 {
                    z += c[q] * v[q];
                }
            }
            ws.z[j] = z;
        }
    }

    /// Inner-layer sums `z_j` before rescaling into the outer basis domain.
    pub fn hidden_sums(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let u: Vec<f64> = x.iter().enumerate().map(|(i, &xi)| self.to_unit(i, xi)).collect();
        let mut ws = Workspace::new(&self.shape);
        self.hidden_sums_unit(&u, &mut ws);
        Ok(ws.z)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.shape.d_in {
            return Err(Error::InvalidDimension(format!(
                "expected input of length {}, got {}",
                self.shape.d_in,
                x.len()
            )));
        }
        if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(bad));
        }
        Ok(())
    }

    /// Forward pass into `out` (length `d_out`). Also leaves hidden-layer basis
    /// values and derivatives in `ws` for a following gradient call.
    ///
    /// The input is not validated; see [`forward`](Self::forward).
    pub fn forward_with(&self, x: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let k1 = self.shape.degree + 1;
        let p = self.basis.basis_count();
        let n = self.shape.hidden;
        let mut u_buf = [0.0; 64];
        let unit: Vec<f64>;
        let u: &[f64] = if x.len() <= u_buf.len() {
            for (i, &xi) in x.iter().enumerate() {
                u_buf[i] = self.to_unit(i, xi);
            }
            &u_buf[..x.len()]
        } else {
            unit = x.iter().enumerate().map(|(i, &xi)| self.to_unit(i, xi)).collect();
            &unit
        };
        self.hidden_sums_unit(u, ws);

        let (a, b) = self.hidden_range;
        let slope = 1.0 / (b - a);
        for j in 0..n {
            let w = (ws.z[j] - a) * slope;
            ws.hid_inside[j] = (0.0..=1.0).contains(&w);
            ws.hid_first[j] = self.basis.span_values_and_derivatives(
                w,
                &mut ws.hid_vals[j * k1..(j + 1) * k1],
                &mut ws.hid_ders[j * k1..(j + 1) * k1],
            );
        }
        for (m, y) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                let start = (m * n + j) * p + ws.hid_first[j];
                let c = &self.outer[start..start + k1];
                let v = &ws.hid_vals[j * k1..(j + 1) * k1];
                for q in 0..k1 {
                    acc += c[q] * v[q];
                }
            }
            *y = acc;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::new(&self.shape);
        let mut out = vec![0.0; self.shape.d_out];
        self.forward_with(x, &mut out, &mut ws);
        Ok(out)
    }

    /// Adds the gradient of `<upstream, forward(x)>` with respect to all
    /// coefficients into `grad`, reusing the state left in `ws` by
    /// [`forward_with`](Self::forward_with) on the same `x`.
    pub fn accumulate_gradient(&self, upstream: &[f64], grad: &mut [f64], ws: &Workspace) {
        let k1 = self.shape.degree + 1;
        let p = self.basis.basis_count();
        let n = self.shape.hidden;
        let d = self.shape.d_in;
        let (inner_grad, outer_grad) = grad.split_at_mut(self.inner.len());
        let slope = self.hidden_slope();

        let mut g_hidden = [0.0; 256];
        let mut g_heap: Vec<f64>;
        let g_hidden: &mut [f64] = if n <= g_hidden.len() {
            &mut g_hidden[..n]
        } else {
            g_heap = vec![0.0; n];
            &mut g_heap
        };
        g_hidden.iter_mut().for_each(|g| *g = 0.0);

        for (m, &up) in upstream.iter().enumerate() {
            if up == 0.0 {
                continue;
            }
            for j in 0..n {
                let start = (m * n + j) * p + ws.hid_first[j];
                let v = &ws.hid_vals[j * k1..(j + 1) * k1];
                let dv = &ws.hid_ders[j * k1..(j + 1) * k1];
                let c = &self.outer[start..start + k1];
                let g = &mut outer_grad[start..start + k1];
                let mut dphi = 0.0;
                for q in 0..k1 {
                    g[q] += up * v[q];
                    dphi += c[q] * dv[q];
                }
                if ws.hid_inside[j] {
                    g_hidden[j] += up * dphi * slope;
                }
            }
        }
        for (j, &gj) in g_hidden.iter().enumerate() {
            if gj == 0.0 {
                continue;
            }
            for i in 0..d {
                let start = (j * d + i) * p + ws.in_first[i];
                let v = &ws.in_vals[i * k1..(i + 1) * k1];
                let g = &mut inner_grad[start..start + k1];
                for q in 0..k1 {
                    g[q] += gj * v[q];
                }
            }
        }
    }

    /// Exact gradient of `<upstream, forward(x)>` with respect to every coefficient.
    pub fn gradient(&self, x: &[f64], upstream: &[f64]) -> Result<ParameterVector> {
        self.check_input(x)?;
        if upstream.len() != self.shape.d_out {
            return Err(Error::InvalidDimension(format!(
                "expected upstream of length {}, got {}",
                self.shape.d_out,
                upstream.len()
            )));
        }
        if let Some(&bad) = upstream.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(bad));
        }
        let mut ws = Workspace::new(&self.shape);
        let mut out = vec![0.0; self.shape.d_out];
        self.forward_with(x, &mut out, &mut ws);
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_gradient(upstream, &mut grad, &ws);
        Ok(ParameterVector(grad))
    }

    /// Serializes to the JSON model document. Numbers carry 17 significant digits.
    pub fn to_document(&self) -> String {
        let doc = DocumentOut {
            version: DOCUMENT_VERSION,
            d_in: self.shape.d_in,
            hidden: self.shape.hidden,
            d_out: self.shape.d_out,
            k: self.shape.degree,
            grid: self.shape.grid,
            input_range: self
                .input_range
                .iter()
                .map(|&(a, b)| [Sig17(a), Sig17(b)])
                .collect(),
            hidden_range: [Sig17(self.hidden_range.0), Sig17(self.hidden_range.1)],
            inner_coeffs: self.inner.iter().copied().map(Sig17).collect(),
            outer_coeffs: self.outer.iter().copied().map(Sig17).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serialization cannot fail")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedDocument("missing `version`".into()))?;
        if version != DOCUMENT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version as u32,
                expected: DOCUMENT_VERSION,
            });
        }
        let doc: DocumentIn =
            serde_json::from_value(value).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        if doc.k > MAX_DEGREE {
            return Err(Error::MalformedDocument(format!("degree {} too large", doc.k)));
        }
        let shape = KanShape {
            d_in: doc.d_in,
            hidden: doc.hidden,
            d_out: doc.d_out,
            degree: doc.k,
            grid: doc.grid,
        };
        let all_finite = doc
            .inner_coeffs
            .iter()
            .chain(&doc.outer_coeffs)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::MalformedDocument("non-finite coefficient".into()));
        }
        Self::from_parts(
            shape,
            doc.input_range.into_iter().map(|[a, b]| (a, b)).collect(),
            (doc.hidden_range[0], doc.hidden_range[1]),
            doc.inner_coeffs,
            doc.outer_coeffs,
        )
        .map_err(|e| Error::MalformedDocument(e.to_string()))
    }
}

/// f64 written with 17 significant digits.
#[derive(Clone, Copy)]
struct Sig17(f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number"));
        }
        let raw = serde_json::value::RawValue::from_string(format!("{:.16e}", self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Serialize)]
struct DocumentOut {
    version: u32,
    d_in: usize,
    #[serde(rename = "N")]
    hidden: usize,
    d_out: usize,
    k: usize,
    #[serde(rename = "G")]
    grid: usize,
    input_range: Vec<[Sig17; 2]>,
    hidden_range: [Sig17; 2],
    inner_coeffs: Vec<Sig17>,
    outer_coeffs: Vec<Sig17>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentIn {
    #[allow(dead_code)]
    version: u32,
    d_in: usize,
    #[serde(rename = "N")]
    hidden: usize,
    d_out: usize,
    k: usize,
    #[serde(rename = "G")]
    grid: usize,
    input_range: Vec<[f64; 2]>,
    hidden_range: [f64; 2],
    inner_coeffs: Vec<f64>,
    outer_coeffs: Vec<f64>,
}
