//! Positive operators on ℝᴺ-valued time-grid functions: the Hölder-type
//! inequality T(fg) ≤ (Tfᵖ)^{1/p}(Tg^{p'})^{1/p'} and the interpolation bound
//! ‖T‖_p ≤ M₀^{1−1/p} M₁^{1/p}.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Matrix acting on stacked samples: entry k·N + i is component i at time t_k.
/// Time weights are uniform, so they cancel in every operator norm.
#[derive(Debug, Clone)]
pub struct TimeOperator {
    pub matrix: DMatrix<f64>,
    pub times: usize,
    pub components: usize,
}

impl TimeOperator {
    pub fn new(matrix: DMatrix<f64>, times: usize, components: usize) -> Result<Self> {
        let d = times * components;
        if matrix.shape() != (d, d) {
            return Err(Error::SpaceMismatch(format!("expected {d}×{d}, got {:?}", matrix.shape())));
        }
        Ok(TimeOperator { matrix, times, components })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_positive(&self) -> bool {
        self.matrix.iter().all(|v| *v >= 0.0)
    }

    fn require_positive(&self) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NotPositiveOperator(self.matrix.min()))
        }
    }

    /// ‖T‖ on the sup-normed space (largest absolute row sum).
    pub fn sup_norm(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// ‖T‖ on the L¹-normed space (largest absolute column sum).
    pub fn l1_norm(&self) -> f64 {
        self.matrix.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

fn lp(v: &DVector<f64>, p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Random nonnegative sample supported on a random window of times.
fn compact_probe<R: Rng>(rng: &mut R, times: usize, comps: usize) -> DVector<f64> {
    let a = rng.gen_range(0..times);
    let b = rng.gen_range(a..times) + 1;
    DVector::from_fn(times * comps, |j, _| if (a..b).contains(&(j / comps)) { rng.gen::<f64>() } else { 0.0 })
}

/// max over trials and components of T(fg) − (Tfᵖ)^{1/p}(Tg^{p'})^{1/p'}.
pub fn holder_positive_check<R: Rng>(t: &TimeOperator, p: f64, trials: usize, rng: &mut R) -> Result<f64> {
    t.require_positive()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p={p} must lie in (1, ∞)")));
    }
    let q = p / (p - 1.0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let f = compact_probe(rng, t.times, t.components);
        let g = compact_probe(rng, t.times, t.components);
        let lhs = &t.matrix * f.component_mul(&g);
        let a = &t.matrix * f.map(|x| x.powf(p));
        let b = &t.matrix * g.map(|x| x.powf(q));
        for i in 0..lhs.len() {
            worst = worst.max(lhs[i] - a[i].powf(1.0 / p) * b[i].powf(1.0 / q));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct PNormRow {
    pub p: f64,
    /// Probe supremum of ‖Tf‖_p / ‖f‖_p (a lower bound on ‖T‖_p).
    pub empirical: f64,
    pub bound: f64,
}

impl PNormRow {
    pub fn excess(&self) -> f64 {
        self.empirical - self.bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszThorinReport {
    pub m0: f64,
    pub m1: f64,
    pub rows: Vec<PNormRow>,
    /// Tf ≥ 0 for every nonnegative probe.
    pub positivity_preserved: bool,
}

impl RieszThorinReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.positivity_preserved && self.rows.iter().all(|r| r.excess() <= slack)
    }
    pub fn max_excess(&self) -> f64 {
        self.rows.iter().map(PNormRow::excess).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Lower bound on ‖T‖_p for T ≥ 0 by the nonlinear power iteration
/// x ← (Tᵀ(Tx)^{p−1})^{1/(p−1)}, started from the constant vector.
fn power_lower_bound(m: &DMatrix<f64>, p: f64, iters: usize) -> f64 {
    let n = m.ncols();
    let mut x = DVector::from_element(n, 1.0);
    let mut best = 0.0f64;
    for _ in 0..iters {
        let nx = lp(&x, p);
        if nx == 0.0 {
            break;
        }
        x /= nx;
        let y = m * &x;
        best = best.max(lp(&y, p));
        let z = m.transpose() * y.map(|v| v.powf(p - 1.0));
        x = z.map(|v| v.powf(1.0 / (p - 1.0)));
    }
    best
}

/// Empirical ‖T‖_p against M₀^{1−1/p} M₁^{1/p} for each p, probing with
/// random nonnegative f, basis vectors, the constant vector and a power iteration.
pub fn riesz_thorin_check<R: Rng>(t: &TimeOperator, ps: &[f64], trials: usize, rng: &mut R) -> Result<RieszThorinReport> {
    t.require_positive()?;
    let (m0, m1) = (t.sup_norm(), t.l1_norm());
    let n = t.dim();
    let mut probes: Vec<DVector<f64>> = (0..trials).map(|_| compact_probe(rng, t.times, t.components)).collect();
    probes.push(DVector::from_element(n, 1.0));
    let images: Vec<DVector<f64>> = probes.iter().map(|f| &t.matrix * f).collect();
    let positivity_preserved = images.iter().all(|v| v.min() >= 0.0);
    let rows = ps
        .iter()
        .map(|&p| {
            let mut empirical = probes
                .iter()
                .zip(&images)
                .filter(|(f, _)| lp(f, p) > 0.0)
                .map(|(f, tf)| lp(tf, p) / lp(f, p))
                .fold(0.0, f64::max);
            // basis vectors: ‖T e_j‖_p
            for j in 0..n {
                empirical = empirical.max(lp(&t.matrix.column(j).into_owned(), p));
            }
            if p > 1.0 {
                empirical = empirical.max(power_lower_bound(&t.matrix, p, 50));
            }
            PNormRow { p, empirical, bound: m0.powf(1.0 - 1.0 / p) * m1.powf(1.0 / p) }
        })
        .collect();
    Ok(RieszThorinReport { m0, m1, rows, positivity_preserved })
}
