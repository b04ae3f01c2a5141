//! Equidistant trajectory samples and their CSV form.
//!
//! CSV layout: header `t,x1,...,xd`, then one row per grid point with every
//! number written in scientific notation with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Reference,
    Learned,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub t_end: f64,
    pub h: f64,
    /// `N1 + 1` rows of dimension `d`.
    pub states: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

/// Number of intervals `N1` with `N1 * h = t1 - t0`.
pub fn grid_intervals(t0: f64, t1: f64, h: f64) -> Result<usize> {
    if !(t0.is_finite() && t1.is_finite() && h.is_finite()) || h <= 0.0 || t1 <= t0 {
        return Err(Error::InvalidGridSpec(format!(
            "need t0 < t1 and h > 0 (t0 = {t0}, t1 = {t1}, h = {h})"
        )));
    }
    let span = t1 - t0;
    let n = (span / h).round();
    if n < 1.0 || (n * h - span).abs() > 1e-12 * span + 4.0 * f64::EPSILON * t1.abs() {
        return Err(Error::InvalidGridSpec(format!(
            "step {h} does not divide [{t0}, {t1}] into a whole number of intervals"
        )));
    }
    Ok(n as usize)
}

/// Grid time `t0 + n h`, computed by multiplication.
pub fn grid_time(t0: f64, h: f64, n: usize) -> f64 {
    t0 + n as f64 * h
}

impl Trajectory {
    pub fn new(t0: f64, h: f64, states: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: states.len(),
            });
        }
        let d = states[0].len();
        if d == 0 || states.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidDimension(
                "trajectory rows must share a nonzero dimension".into(),
            ));
        }
        for (n, s) in states.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState(grid_time(t0, h, n)));
            }
        }
        let t_end = grid_time(t0, h, states.len() - 1);
        Ok(Self {
            t0,
            t_end,
            h,
            states,
            provenance,
        })
    }

    /// Samples a closed-form solution on the grid.
    pub fn from_fn(t0: f64, t1: f64, h: f64, x: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let n = grid_intervals(t0, t1, h)?;
        let states = (0..=n).map(|i| x(grid_time(t0, h, i))).collect();
        Self::new(t0, h, states, Provenance::Analytic)
    }

    /// `N1`, the number of grid intervals.
    pub fn intervals(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn time(&self, n: usize) -> f64 {
        grid_time(self.t0, self.h, n)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|n| self.time(n)).collect()
    }

    /// Column `i` of the state matrix.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// Per-coordinate `(min, max)` over all samples.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|i| {
                self.states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s[i]), hi.max(s[i]))
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (n, s) in self.states.iter().enumerate() {
            let mut row = Vec::with_capacity(s.len() + 1);
            row.push(fmt17(self.time(n)));
            row.extend(s.iter().map(|&v| fmt17(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") || header.len() < 2 {
            return Err(Error::Parse("trajectory CSV must start with column `t`".into()));
        }
        for (i, name) in header.iter().enumerate().skip(1) {
            if name != format!("x{i}") {
                return Err(Error::Parse(format!("unexpected column `{name}`")));
            }
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            times.push(vals[0]);
            states.push(vals[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: times.len(),
            });
        }
        let t0 = times[0];
        let h = recover_step(&times);
        for (i, &t) in times.iter().enumerate() {
            if (t - grid_time(t0, h, i)).abs() > 1e-9 * h {
                return Err(Error::Parse(format!(
                    "sample times are not equidistant (row {i}, t = {t})"
                )));
            }
        }
        Self::new(t0, h, states, Provenance::Reference)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// The step that regenerates the written times exactly, if one is within a few
/// ulps of the average spacing; otherwise the average spacing.
fn recover_step(times: &[f64]) -> f64 {
    let n = times.len() - 1;
    let t0 = times[0];
    let mean = (times[n] - t0) / n as f64;
    let exact = |h: f64| {
        times
            .iter()
            .enumerate()
            .all(|(i, &t)| grid_time(t0, h, i) == t)
    };
    let mut up = mean;
    let mut down = mean;
    for _ in 0..4 {
        if exact(up) {
            return up;
        }
        if exact(down) {
            return down;
        }
        up = up.next_up();
        down = down.next_down();
    }
    mean
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
