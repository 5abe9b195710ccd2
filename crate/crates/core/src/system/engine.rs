//! Uniform-grid recursion for Z(t) = ∫₀ᵗ T₋₁(t − s) B v(s) ds.
//!
//! On a grid t_k = kh the integral obeys Z_k = T(h) Z_{k−1} + (cell k), where
//! the cell term integrates a local interpolant of v against T₋₁(σ)B. The
//! weights are built from the control moments ∫₀ʰ T(σ) σʲ dσ · B, so the
//! extrapolated operator is never applied directly.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::max_abs;
use crate::semigroup::{ModelKind, RegularizedControl, SemigroupModel};

/// Interpolation of the input on each time cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeRule {
    /// Left endpoint value: the step approximation.
    StepLeft,
    /// Average of the endpoint values: the midpoint step approximation.
    StepMidpoint,
    /// Piecewise linear.
    Linear,
    /// Piecewise quadratic through the two previous nodes (third order).
    Quadratic,
}

impl TimeRule {
    pub fn default_for(model: &SemigroupModel) -> TimeRule {
        match model.kind() {
            ModelKind::MatrixExp | ModelKind::Heat1D { .. } => TimeRule::Quadratic,
            _ => TimeRule::Linear,
        }
    }
}

/// Coefficients of the Lagrange basis polynomials in σ for the given nodes.
fn lagrange(nodes: &[f64]) -> Vec<[f64; 3]> {
    (0..nodes.len())
        .map(|i| {
            let mut poly = [1.0, 0.0, 0.0];
            let mut denom = 1.0;
            for (j, &xj) in nodes.iter().enumerate() {
                if j == i {
                    continue;
                }
                // multiply by (σ − xj)
                poly = [-xj * poly[0], poly[0] - xj * poly[1], poly[1] - xj * poly[2]];
                denom *= nodes[i] - xj;
            }
            poly.map(|c| c / denom)
        })
        .collect()
}

/// Cell contributions as (offset from k, σ-polynomial coefficients).
fn cell_polys(rule: TimeRule, h: f64, first: bool, steps: usize) -> Vec<(isize, [f64; 3])> {
    let rule = if rule == TimeRule::Quadratic && steps < 2 { TimeRule::Linear } else { rule };
    match rule {
        TimeRule::StepLeft => vec![(-1, [1.0, 0.0, 0.0])],
        TimeRule::StepMidpoint => vec![(0, [0.5, 0.0, 0.0]), (-1, [0.5, 0.0, 0.0])],
        TimeRule::Linear => vec![(0, [1.0, -1.0 / h, 0.0]), (-1, [0.0, 1.0 / h, 0.0])],
        TimeRule::Quadratic => {
            let offsets: [isize; 3] = if first { [0, -1, 1] } else { [0, -1, -2] };
            let nodes: Vec<f64> = offsets.iter().map(|&o| -(o as f64) * h).collect();
            offsets.iter().copied().zip(lagrange(&nodes)).collect()
        }
    }
}

fn weights(polys: &[(isize, [f64; 3])], jb: &[DMatrix<f64>; 3]) -> Vec<(isize, DMatrix<f64>)> {
    polys
        .iter()
        .map(|(o, c)| (*o, &jb[0] * c[0] + &jb[1] * c[1] + &jb[2] * c[2]))
        .collect()
}

/// Action of T(h) on the engine state.
#[derive(Debug, Clone)]
enum Propagator {
    Dense(DMatrix<f64>),
    /// Row i takes row i + cells (left) or i − cells (right), times `decay`.
    Shift { left: bool, cells: usize, decay: f64 },
    /// State kept as modal coefficients ζ with Z = Φζ.
    Modal { phi: DMatrix<f64>, psi: DMatrix<f64>, decay: Vec<f64> },
}

impl Propagator {
    fn apply_state(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Propagator::Dense(t) => t * z,
            Propagator::Modal { decay, .. } => {
                let mut out = z.clone();
                for (i, d) in decay.iter().enumerate() {
                    out.row_mut(i).scale_mut(*d);
                }
                out
            }
            Propagator::Shift { .. } => self.apply_full(z),
        }
    }

    fn apply_full(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Propagator::Dense(t) => t * x,
            Propagator::Modal { phi, psi, .. } => phi * self.apply_state(&(psi * x)),
            &Propagator::Shift { left, cells, decay } => {
                let n = x.nrows();
                let mut out = DMatrix::zeros(n, x.ncols());
                if cells < n {
                    if left {
                        out.rows_mut(0, n - cells).copy_from(&(x.rows(cells, n - cells) * decay));
                    } else {
                        out.rows_mut(cells, n - cells).copy_from(&(x.rows(0, n - cells) * decay));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub h: f64,
    pub steps: usize,
    prop: Propagator,
    regular: Vec<(isize, DMatrix<f64>)>,
    first: Vec<(isize, DMatrix<f64>)>,
}

impl Engine {
    pub fn new(model: &SemigroupModel, control: &RegularizedControl, h: f64, steps: usize, rule: TimeRule) -> Result<Self> {
        if !(h > 0.0) || steps == 0 {
            return Err(Error::InvalidArgument("time grid needs a positive step and at least one cell".into()));
        }
        if let Some(dx) = model.node_spacing() {
            let r = h / dx;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
                return Err(Error::IncompatibleTimeStep { step: h, spacing: dx });
            }
        }
        let mut jb = control.moments(model, 0.0, h)?;
        let prop = match (model.kind(), model.modal(), model.node_spacing()) {
            (_, Some((phi, psi, rates)), _) => {
                for m in jb.iter_mut() {
                    *m = psi * &*m;
                }
                Propagator::Modal { phi: phi.clone(), psi: psi.clone(), decay: rates.iter().map(|r| (-r * h).exp()).collect() }
            }
            (kind, _, Some(dx)) => Propagator::Shift {
                left: kind == ModelKind::NilpotentLeftShift,
                cells: (h / dx).round() as usize,
                decay: (-model.rescale_shift() * h).exp(),
            },
            _ => Propagator::Dense(model.eval(h)?),
        };
        Ok(Engine {
            h,
            steps,
            prop,
            regular: weights(&cell_polys(rule, h, false, steps), &jb),
            first: weights(&cell_polys(rule, h, true, steps), &jb),
        })
    }

    /// T(h)·x for a full-space matrix x.
    pub fn propagate(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.prop.apply_full(x)
    }

    fn state_rows(&self) -> Option<usize> {
        match &self.prop {
            Propagator::Modal { phi, .. } => Some(phi.ncols()),
            _ => None,
        }
    }

    /// Full-space Z from the engine state.
    pub fn lift(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.prop {
            Propagator::Modal { phi, .. } => phi * z,
            _ => z.clone(),
        }
    }

    pub(crate) fn zero_state(&self, ncols: usize) -> DMatrix<f64> {
        let rows = self.state_rows().unwrap_or_else(|| self.regular[0].1.nrows());
        DMatrix::zeros(rows, ncols)
    }

    /// Z_k from Z_{k−1} in engine coordinates; `v` holds the input at every grid time.
    pub fn advance(&self, z: &DMatrix<f64>, k: usize, v: &[DMatrix<f64>]) -> DMatrix<f64> {
        let terms = if k == 1 { &self.first } else { &self.regular };
        let mut out = self.prop.apply_state(z);
        for (o, w) in terms {
            let idx = (k as isize + o) as usize;
            out.gemm(1.0, w, &v[idx], 1.0);
        }
        out
    }

    /// Engine states for k = 0..=steps, mapped through `obs`.
    pub fn run<T>(&self, v: &[DMatrix<f64>], mut obs: impl FnMut(usize, &DMatrix<f64>) -> T) -> Vec<T> {
        let mut z = self.zero_state(v[0].ncols());
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(obs(0, &z));
        for k in 1..=self.steps {
            z = self.advance(&z, k, v);
            out.push(obs(k, &z));
        }
        out
    }

    /// C·Z_k on the whole grid.
    pub fn observe(&self, c: &DMatrix<f64>, v: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let c_eff = self.lift_observation(c);
        self.run(v, |_, z| &c_eff * z)
    }

    /// C expressed on engine coordinates.
    pub fn lift_observation(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.prop {
            Propagator::Modal { phi, .. } => c * phi,
            _ => c.clone(),
        }
    }

    /// Full-space Z_k.
    pub fn state_at(&self, k: usize, v: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut z = self.zero_state(v[0].ncols());
        for j in 1..=k {
            z = self.advance(&z, j, v);
        }
        self.lift(&z)
    }
}

/// Partial cell from t_k to t_k + τ with v linear between samples k and k+1.
pub(crate) fn partial_cell(
    model: &SemigroupModel,
    control: &RegularizedControl,
    z_k: &DMatrix<f64>,
    tau: f64,
    h: f64,
    v_k: &DMatrix<f64>,
    v_next: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let jb = control.moments(model, 0.0, tau)?;
    let mut out = model.eval(tau)? * z_k;
    match v_next {
        Some(vn) => {
            // v(t − σ) = v_k + (v_{k+1} − v_k)(τ − σ)/h
            let wk = &jb[0] * (1.0 - tau / h) + &jb[1] * (1.0 / h);
            let wn = &jb[0] * (tau / h) - &jb[1] * (1.0 / h);
            out += wk * v_k + wn * vn;
        }
        None => out += &jb[0] * v_k,
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Fixed point at every grid time.
    pub v: Vec<DMatrix<f64>>,
    pub iterations: usize,
    pub last_increment: f64,
    /// sup ‖v − f − F v‖ after the last sweep.
    pub residual: f64,
    /// Sup increment of every sweep.
    pub increments: Vec<f64>,
}

impl PicardOutcome {
    /// Geometric mean contraction of the increments, a proxy for r(𝓕∞).
    pub fn contraction_estimate(&self) -> f64 {
        let inc: Vec<f64> = self.increments.iter().copied().filter(|x| *x > 0.0).collect();
        if inc.len() < 2 {
            return 0.0;
        }
        (inc[inc.len() - 1] / inc[0]).powf(1.0 / (inc.len() - 1) as f64)
    }
}

/// Iteration cap: 10⌈log tol / log r⌉ (at least 20), or 10⁴ when r is not in (0, 1).
pub fn picard_cap(r: f64, tol: f64) -> usize {
    if r > 0.0 && r < 1.0 {
        (10.0 * (tol.ln() / r.ln()).ceil()).max(20.0) as usize
    } else {
        10_000
    }
}

/// Solves v = f + C·Z[v] by fixed-point iteration from v₀ = f.
pub fn picard(engine: &Engine, c: &DMatrix<f64>, f: &[DMatrix<f64>], tol: f64, cap: usize) -> Result<PicardOutcome> {
    let mut v = f.to_vec();
    let mut increments = Vec::new();
    let mut prev = f64::INFINITY;
    let mut growing = 0;
    let mut iterations = 0;
    let sweep = |v: &[DMatrix<f64>]| -> (Vec<DMatrix<f64>>, f64) {
        let fv = engine.observe(c, v);
        let mut inc: f64 = 0.0;
        let next: Vec<DMatrix<f64>> = f
            .iter()
            .zip(fv)
            .zip(v)
            .map(|((fk, gk), vk)| {
                let w = fk + gk;
                inc = inc.max(max_abs(&(&w - vk)));
                w
            })
            .collect();
        (next, inc)
    };
    loop {
        let (next, inc) = sweep(&v);
        iterations += 1;
        increments.push(inc);
        v = next;
        if !inc.is_finite() {
            return Err(Error::DivergentIteration { iterations, increment: inc });
        }
        if inc <= tol {
            prev = inc;
            break;
        }
        if inc > prev {
            growing += 1;
            if growing >= 10 {
                return Err(Error::DivergentIteration { iterations, increment: inc });
            }
        } else {
            growing = 0;
        }
        prev = inc;
        if iterations >= cap {
            return Err(Error::DivergentIteration { iterations, increment: inc });
        }
    }
    let (_, residual) = sweep(&v);
    Ok(PicardOutcome { v, iterations, last_increment: prev, residual, increments })
}

/// Column-blocked `picard` in parallel; blocks have a fixed width so results
/// do not depend on the thread count.
pub fn picard_columns(engine: &Engine, c: &DMatrix<f64>, f: &[DMatrix<f64>], tol: f64, cap: usize) -> Result<PicardOutcome> {
    const BLOCK: usize = 8;
    let ncols = f[0].ncols();
    if ncols <= BLOCK {
        return picard(engine, c, f, tol, cap);
    }
    let blocks: Vec<(usize, usize)> = (0..ncols).step_by(BLOCK).map(|s| (s, BLOCK.min(ncols - s))).collect();
    let parts: Vec<Result<PicardOutcome>> = blocks
        .par_iter()
        .map(|&(s, w)| {
            let fb: Vec<DMatrix<f64>> = f.iter().map(|m| m.columns(s, w).into_owned()).collect();
            picard(engine, c, &fb, tol, cap)
        })
        .collect();
    let mut v: Vec<DMatrix<f64>> = vec![DMatrix::zeros(f[0].nrows(), ncols); f.len()];
    let (mut iterations, mut last_increment, mut residual) = (0, 0.0f64, 0.0f64);
    let mut increments: Vec<f64> = Vec::new();
    for (part, &(s, w)) in parts.into_iter().zip(&blocks) {
        let p = part?;
        for (dst, src) in v.iter_mut().zip(&p.v) {
            dst.columns_mut(s, w).copy_from(src);
        }
        iterations = iterations.max(p.iterations);
        last_increment = last_increment.max(p.last_increment);
        residual = residual.max(p.residual);
        if p.increments.len() > increments.len() {
            increments.resize(p.increments.len(), 0.0);
        }
        for (a, b) in increments.iter_mut().zip(&p.increments) {
            *a = a.max(*b);
        }
    }
    Ok(PicardOutcome { v, iterations, last_increment, residual, increments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_quadratics() {
        let nodes = [0.0, 0.5, 1.0];
        let l = lagrange(&nodes);
        for (i, p) in l.iter().enumerate() {
            for (j, &x) in nodes.iter().enumerate() {
                let v = p[0] + p[1] * x + p[2] * x * x;
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let s: [f64; 3] = [0, 1, 2].map(|k| l.iter().map(|p| p[k]).sum::<f64>());
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-13 && s[2].abs() < 1e-13);
    }

    #[test]
    fn linear_weights_are_positive() {
        let h = 0.1;
        let p = cell_polys(TimeRule::Linear, h, false, 10);
        // on σ ∈ [0, h] both basis functions are nonnegative
        for (_, c) in &p {
            for s in [0.0, 0.05, 0.1] {
                assert!(c[0] + c[1] * s >= -1e-15);
            }
        }
    }

    #[test]
    fn caps() {
        assert_eq!(picard_cap(0.5, 1e-10), 340);
        assert_eq!(picard_cap(0.0, 1e-10), 10_000);
        assert_eq!(picard_cap(1.5, 1e-10), 10_000);
        assert_eq!(picard_cap(1e-6, 1e-10), 20);
    }
}
