//! Autonomous vector fields `x' = f(x)`.

use crate::kan::{KanNetwork, Workspace};

pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `out`; both slices have length [`dim`](Self::dim).
    fn eval(&self, x: &[f64], out: &mut [f64]);

    fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, &mut out);
        out
    }
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// A square network used as a vector field. Inputs are assumed finite.
impl VectorField for KanNetwork {
    fn dim(&self) -> usize {
        self.shape().d_out
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut ws = Workspace::new(&self.shape());
        self.forward_with(x, out, &mut ws);
    }
}
