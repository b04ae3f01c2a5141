//! Vector-field discovery from sampled trajectories.
//!
//! A trajectory sampled on an equidistant grid is fed through the residual of a
//! linear multistep scheme. Either the residual equations are solved directly for
//! the field values on the grid ([`discovery`]), or a two-layer B-spline
//! Kolmogorov–Arnold network is trained to make them vanish ([`training`]). The
//! learned field can then be integrated ([`odeint`]) and compared with the
//! reference dynamics and with error bounds ([`analysis`]).
//!
//! Runnable walkthroughs live in the crate's `examples/` directory, one per
//! capability; the `kan-lmm` binary exposes the same pipeline on the command line.

pub mod analysis;
pub mod bspline;
pub mod cli;
pub mod error;
pub mod field;
pub mod kan;
pub mod lmm;
pub mod odeint;
pub mod trajectory;
pub mod discovery;
pub mod systems;
pub mod training;
pub mod experiments;
