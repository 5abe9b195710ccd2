//! U-valued functions of time: step functions and sampled grid functions.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::GridSpace;

/// Norm on U-valued functions of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeNorm {
    Sup,
    L1,
    Lp(f64),
}

/// Piecewise constant u with value `values[k]` on [t_k, t_{k+1}), zero after the last breakpoint.
#[derive(Debug, Clone)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<DVector<f64>>,
    space: Arc<GridSpace>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<DVector<f64>>, space: Arc<GridSpace>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || breakpoints.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("step function needs t0 = 0 and one value per piece".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("breakpoints must increase".into()));
        }
        if values.iter().any(|v| v.len() != space.dim()) {
            return Err(Error::SpaceMismatch("step value length differs from U".into()));
        }
        Ok(StepFunction { breakpoints, values, space })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }
    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }
    pub fn support_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Componentwise sup of |u|, so that |u(s)| ≤ ū for every s.
    pub fn bar(&self) -> DVector<f64> {
        let mut b = DVector::<f64>::zeros(self.space.dim());
        for v in &self.values {
            for (a, x) in b.iter_mut().zip(v.iter()) {
                *a = a.max(x.abs());
            }
        }
        b
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        if s < 0.0 || s >= self.support_end() {
            return DVector::zeros(self.space.dim());
        }
        let k = self.breakpoints.partition_point(|&t| t <= s) - 1;
        self.values[k].clone()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| self.space.norm_of(v.as_slice())).fold(0.0, f64::max)
    }
}

/// Samples of a U-valued function on ascending times starting at 0; linear in between.
#[derive(Debug, Clone)]
pub struct TimeGridFn {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    pub space: Arc<GridSpace>,
}

impl TimeGridFn {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>, space: Arc<GridSpace>) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 || times.len() != values.len() {
            return Err(Error::InvalidArgument("time grid must start at 0 with one value per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("times must increase".into()));
        }
        if values.iter().any(|v| v.len() != space.dim()) {
            return Err(Error::SpaceMismatch("sample length differs from U".into()));
        }
        Ok(TimeGridFn { times, values, space })
    }

    pub fn from_fn(times: Vec<f64>, space: Arc<GridSpace>, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        TimeGridFn::new(times, values, space)
    }

    pub fn zeros(times: Vec<f64>, space: Arc<GridSpace>) -> Self {
        let d = space.dim();
        let values = vec![DVector::zeros(d); times.len()];
        TimeGridFn { times, values, space }
    }

    /// 0, h, 2h, …, with the step count rounded to the nearest integer.
    pub fn uniform_times(horizon: f64, step: f64) -> Vec<f64> {
        let n = (horizon / step).round().max(1.0) as usize;
        (0..=n).map(|k| k as f64 * step).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Step length when the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let h = self.times[1];
        self.times
            .iter()
            .enumerate()
            .all(|(k, t)| (t - k as f64 * h).abs() <= 1e-9 * h.max(1e-300) * (k as f64).max(1.0))
            .then_some(h)
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        if s <= 0.0 {
            return self.values[0].clone();
        }
        if s >= self.end() {
            return self.values[self.len() - 1].clone();
        }
        let k = self.times.partition_point(|&t| t <= s);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let th = (s - t0) / (t1 - t0);
        &self.values[k - 1] * (1.0 - th) + &self.values[k] * th
    }

    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> TimeGridFn {
        let values: Vec<DVector<f64>> = self.values.iter().map(f).collect();
        let space = if values.first().map_or(true, |v| v.len() == self.space.dim()) {
            self.space.clone()
        } else {
            Arc::new(GridSpace::unit(values[0].len(), self.space.norm_kind()))
        };
        TimeGridFn { times: self.times.clone(), values, space }
    }

    pub fn abs(&self) -> TimeGridFn {
        self.map(|v| v.abs())
    }

    pub fn scaled(&self, c: f64) -> TimeGridFn {
        self.map(|v| v * c)
    }

    pub fn with_space(&self, space: Arc<GridSpace>) -> Result<TimeGridFn> {
        TimeGridFn::new(self.times.clone(), self.values.clone(), space)
    }

    /// max over samples of |f − g| componentwise.
    pub fn max_abs_diff(&self, other: &TimeGridFn) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().map(|v| v.min()).fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| self.space.norm_of(v.as_slice())).fold(0.0, f64::max)
    }

    /// (∫ ‖u(t)‖ᵖ dt)^{1/p} over the sampled range; Simpson on uniform grids
    /// with an even step count, trapezoid otherwise.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let g: Vec<f64> = self.values.iter().map(|v| self.space.norm_of(v.as_slice()).powf(p)).collect();
        integrate_samples(&self.times, &g, self.uniform_step()).powf(1.0 / p)
    }

    pub fn time_norm(&self, norm: TimeNorm) -> f64 {
        match norm {
            TimeNorm::Sup => self.sup_norm(),
            TimeNorm::L1 => self.lp_norm(1.0),
            TimeNorm::Lp(p) => self.lp_norm(p),
        }
    }

    /// Step approximation with the midpoint value (average of the endpoint samples) on each cell.
    pub fn to_step_function(&self) -> StepFunction {
        let values = self.values.windows(2).map(|w| (&w[0] + &w[1]) * 0.5).collect();
        StepFunction { breakpoints: self.times.clone(), values, space: self.space.clone() }
    }
}

pub(crate) fn integrate_samples(times: &[f64], g: &[f64], uniform: Option<f64>) -> f64 {
    let n = times.len();
    if n < 2 {
        return 0.0;
    }
    match uniform {
        Some(h) if (n - 1) % 2 == 0 => {
            let mut s = g[0] + g[n - 1];
            for (k, v) in g.iter().enumerate().take(n - 1).skip(1) {
                s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0
        }
        _ => times.windows(2).zip(g.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum(),
    }
}
