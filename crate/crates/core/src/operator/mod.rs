//! Dense linear operators between grid spaces.

pub mod eigen;
pub mod norm;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{GridSpace, LatticeVector};

pub use eigen::{eigenvalues, Eigenvalues};
pub use norm::{operator_norm, NormEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    pub matrix: DMatrix<f64>,
    pub domain: Arc<GridSpace>,
    pub codomain: Arc<GridSpace>,
}

impl LinOp {
    pub fn new(matrix: DMatrix<f64>, domain: Arc<GridSpace>, codomain: Arc<GridSpace>) -> Self {
        assert_eq!(matrix.ncols(), domain.dim(), "columns must match domain dimension");
        assert_eq!(matrix.nrows(), codomain.dim(), "rows must match codomain dimension");
        LinOp { matrix, domain, codomain }
    }

    /// Operator on a single space.
    pub fn on(matrix: DMatrix<f64>, space: Arc<GridSpace>) -> Self {
        Self::new(matrix, space.clone(), space)
    }

    pub fn identity(space: Arc<GridSpace>) -> Self {
        let n = space.dim();
        Self::on(DMatrix::identity(n, n), space)
    }

    pub fn zeros(domain: Arc<GridSpace>, codomain: Arc<GridSpace>) -> Self {
        let m = DMatrix::zeros(codomain.dim(), domain.dim());
        Self::new(m, domain, codomain)
    }

    pub fn is_square(&self) -> bool {
        self.matrix.is_square()
    }

    pub fn apply(&self, x: &LatticeVector) -> Result<LatticeVector> {
        if *x.space != *self.domain {
            return Err(Error::SpaceMismatch("vector is not in the operator domain".into()));
        }
        Ok(LatticeVector::new(self.codomain.clone(), &self.matrix * &x.values))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinOp) -> Result<LinOp> {
        if !inner.codomain.same_grid(&self.domain) {
            return Err(Error::SpaceMismatch("composition of incompatible operators".into()));
        }
        Ok(LinOp::new(&self.matrix * &inner.matrix, inner.domain.clone(), self.codomain.clone()))
    }

    pub fn with_matrix(&self, matrix: DMatrix<f64>) -> LinOp {
        LinOp::new(matrix, self.domain.clone(), self.codomain.clone())
    }

    pub fn norm(&self) -> NormEstimate {
        operator_norm(&self.matrix, &self.domain, &self.codomain)
    }

    pub fn pow(&self, n: u32) -> LinOp {
        assert!(self.is_square());
        self.with_matrix(matrix_power(&self.matrix, n))
    }

    pub fn transpose_matrix(&self) -> DMatrix<f64> {
        self.matrix.transpose()
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn matrix_power(m: &DMatrix<f64>, n: u32) -> DMatrix<f64> {
    let mut result = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Max-abs entry of `m`.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Solves `(λI − A) R = I` and checks the residual.
pub fn resolvent_matrix(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let shifted = DMatrix::identity(n, n) * lambda - a;
    let lu = shifted.clone().lu();
    let r = lu
        .solve(&DMatrix::identity(n, n))
        .ok_or(Error::SingularResolvent { lambda, residual: f64::INFINITY })?;
    let residual = max_abs(&(&shifted * &r - DMatrix::identity(n, n)));
    if !residual.is_finite() || residual > 1e-8 {
        return Err(Error::SingularResolvent { lambda, residual });
    }
    Ok(r)
}

pub fn resolvent(a: &LinOp, lambda: f64) -> Result<LinOp> {
    if !a.is_square() {
        return Err(Error::SpaceMismatch("resolvent of a non-square operator".into()));
    }
    Ok(a.with_matrix(resolvent_matrix(&a.matrix, lambda)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralMethod {
    Gelfand { n_max: u32 },
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralRadius {
    pub value: f64,
    /// ‖Tⁿ‖^{1/n} for n = 1..=n_max (Gelfand route only).
    pub iterates: Vec<f64>,
    pub converged: bool,
}

pub fn spectral_radius(t: &LinOp, method: SpectralMethod) -> SpectralRadius {
    assert!(t.is_square(), "spectral radius of a non-square operator");
    match method {
        SpectralMethod::Eigen => {
            let e = eigenvalues(&t.matrix);
            SpectralRadius { value: e.spectral_radius(), iterates: vec![], converged: e.converged }
        }
        SpectralMethod::Gelfand { n_max } => {
            let iterates = gelfand_sequence(t, n_max.max(1));
            let value = *iterates.last().unwrap();
            SpectralRadius { value, iterates, converged: true }
        }
    }
}

/// ‖Tⁿ‖^{1/n}, tracking a logarithmic scale so powers neither overflow nor underflow.
fn gelfand_sequence(t: &LinOp, n_max: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max as usize);
    let mut p = t.matrix.clone();
    let mut log_scale = 0.0;
    for n in 1..=n_max {
        if n > 1 {
            p = &p * &t.matrix;
        }
        let nrm = operator_norm(&p, &t.domain, &t.codomain).value();
        if nrm == 0.0 {
            out.push(0.0);
            out.extend(std::iter::repeat(0.0).take((n_max - n) as usize));
            return out;
        }
        out.push(((nrm.ln() + log_scale) / n as f64).exp());
        p /= nrm;
        log_scale += nrm.ln();
    }
    out
}

/// Σ Tⁿ until the increment norm drops below `tol`.
pub fn neumann_inverse(t: &LinOp, tol: f64) -> Result<LinOp> {
    assert!(t.is_square());
    let r = spectral_radius(t, SpectralMethod::Eigen).value;
    if r >= 1.0 {
        return Err(Error::DivergentSeries(format!("spectral radius {r} >= 1")));
    }
    let n = t.matrix.nrows();
    let inf_norm = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    let mut last = f64::INFINITY;
    let mut growing = 0;
    for _ in 0..1_000_000 {
        term = &term * &t.matrix;
        let inc = inf_norm(&term);
        sum += &term;
        if inc <= tol {
            return Ok(t.with_matrix(sum));
        }
        growing = if inc > last { growing + 1 } else { 0 };
        if growing >= 10 {
            return Err(Error::DivergentSeries(format!("increments grew for {growing} consecutive terms")));
        }
        last = inc;
    }
    Err(Error::DivergentSeries("no convergence within the term cap".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_entry: f64,
    /// |Tx| ≤ T|x| held on every sampled x.
    pub modulus_probe_ok: bool,
}

pub fn op_positivity_check<R: Rng>(t: &LinOp, tol: f64, rng: &mut R) -> PositivityReport {
    let min_entry = t.min_entry().min(0.0);
    let positive = t.matrix.iter().all(|&v| v >= -tol);
    let n = t.matrix.ncols();
    let scale = max_abs(&t.matrix).max(1.0);
    let mut probe_ok = true;
    for _ in 0..50 {
        let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let tx = &t.matrix * &x;
        let tabs = &t.matrix * x.abs();
        if tx.iter().zip(tabs.iter()).any(|(a, b)| a.abs() > b + 1e-12 * scale * n as f64) {
            probe_ok = false;
        }
    }
    PositivityReport { positive, min_entry, modulus_probe_ok: probe_ok }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub dominated: bool,
    /// Same verdict from sampling |Sx| ≤ Tx on positive x.
    pub sampled_dominated: bool,
    pub max_excess: f64,
    pub spectral_ok: bool,
    pub powers_ok: bool,
    pub r_s: f64,
    pub r_t: f64,
}

/// Entrywise test |S| ≤ T, cross-checked by sampling and followed by the
/// spectral-radius and power-norm consequences when it holds.
pub fn domination_check<R: Rng>(s: &LinOp, t: &LinOp, tol: f64, rng: &mut R) -> Result<DominationReport> {
    if s.matrix.shape() != t.matrix.shape() {
        return Err(Error::SpaceMismatch("domination of operators with different shapes".into()));
    }
    let max_excess = s
        .matrix
        .iter()
        .zip(t.matrix.iter())
        .map(|(a, b)| a.abs() - b)
        .fold(f64::NEG_INFINITY, f64::max);
    let dominated = max_excess <= tol;
    // sampled route: basis vectors make it equivalent to the entrywise test
    let n = s.matrix.ncols();
    let mut sampled = true;
    let mut check = |x: &DVector<f64>| {
        let sx = &s.matrix * x;
        let tx = &t.matrix * x;
        let slack = tol * x.iter().sum::<f64>();
        if sx.iter().zip(tx.iter()).any(|(a, b)| a.abs() > b + slack) {
            sampled = false;
        }
    };
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        check(&e);
    }
    for _ in 0..50 {
        check(&DVector::from_fn(n, |_, _| rng.gen::<f64>()));
    }
    let (mut spectral_ok, mut powers_ok, mut r_s, mut r_t) = (true, true, f64::NAN, f64::NAN);
    if dominated && s.is_square() {
        r_s = spectral_radius(s, SpectralMethod::Eigen).value;
        r_t = spectral_radius(t, SpectralMethod::Eigen).value;
        spectral_ok = r_s <= r_t + 1e-8;
        let (mut sp, mut tp) = (s.matrix.clone(), t.matrix.clone());
        for k in 1..=8 {
            if k > 1 {
                sp = &sp * &s.matrix;
                tp = &tp * &t.matrix;
            }
            let ns = operator_norm(&sp, &s.domain, &s.codomain).value();
            let nt = operator_norm(&tp, &t.domain, &t.codomain).value();
            if ns > nt + tol.max(1e-12 * nt) {
                powers_ok = false;
            }
        }
    }
    Ok(DominationReport { dominated, sampled_dominated: sampled, max_excess, spectral_ok, powers_ok, r_s, r_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NormKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> Arc<GridSpace> {
        Arc::new(GridSpace::unit(n, NormKind::Sup))
    }

    #[test]
    fn resolvent_of_simple_operators() {
        let s = space(2);
        let a = LinOp::on(-DMatrix::identity(2, 2), s.clone());
        assert!((resolvent(&a, 1.0).unwrap().matrix - DMatrix::identity(2, 2) * 0.5).abs().max() < 1e-15);
        let z = LinOp::zeros(s.clone(), s.clone());
        assert!((resolvent(&z, 2.0).unwrap().matrix - DMatrix::identity(2, 2) * 0.5).abs().max() < 1e-15);
        assert!(matches!(resolvent(&z, 0.0), Err(Error::SingularResolvent { .. })));
    }

    #[test]
    fn resolvent_residual_on_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.gen::<f64>() - 0.5);
        let a = LinOp::on(m.clone(), space(5));
        let lambda = a.norm().value() + 1.0;
        let r = resolvent(&a, lambda).unwrap();
        let res = (DMatrix::identity(5, 5) * lambda - &m) * &r.matrix - DMatrix::identity(5, 5);
        assert!(max_abs(&res) <= 1e-10);
    }

    #[test]
    fn spectral_radius_small_cases() {
        let s = space(2);
        let i = LinOp::identity(s.clone());
        assert!((spectral_radius(&i, SpectralMethod::Eigen).value - 1.0).abs() < 1e-15);
        let nil = LinOp::on(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), s.clone());
        assert_eq!(spectral_radius(&nil, SpectralMethod::Eigen).value, 0.0);
        assert_eq!(spectral_radius(&nil, SpectralMethod::Gelfand { n_max: 8 }).value, 0.0);
        let t = LinOp::on(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.2, 0.4]), s);
        let root = (0.7 + (0.49f64 - 0.4).sqrt()) / 2.0;
        assert!((spectral_radius(&t, SpectralMethod::Eigen).value - root).abs() < 1e-14);
        let g = spectral_radius(&t, SpectralMethod::Gelfand { n_max: 64 });
        assert!((g.value - root).abs() < 0.05);
        assert_eq!(g.iterates.len(), 64);
    }

    #[test]
    fn neumann_series_cases() {
        let s = space(3);
        let z = LinOp::zeros(s.clone(), s.clone());
        assert!((neumann_inverse(&z, 1e-12).unwrap().matrix - DMatrix::identity(3, 3)).abs().max() < 1e-15);
        let h = LinOp::on(DMatrix::identity(3, 3) * 0.5, s.clone());
        assert!((neumann_inverse(&h, 1e-14).unwrap().matrix - DMatrix::identity(3, 3) * 2.0).abs().max() < 1e-12);
        let big = LinOp::on(DMatrix::identity(3, 3) * 1.1, s);
        assert!(matches!(neumann_inverse(&big, 1e-12), Err(Error::DivergentSeries(_))));
    }

    #[test]
    fn neumann_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(6, 6, |_, _| rng.gen::<f64>());
        let r = spectral_radius(&LinOp::on(m.clone(), space(6)), SpectralMethod::Eigen).value;
        let t = LinOp::on(m * (0.7 / r), space(6));
        let inv = neumann_inverse(&t, 1e-13).unwrap();
        let direct = (DMatrix::identity(6, 6) - &t.matrix).lu().solve(&DMatrix::identity(6, 6)).unwrap();
        assert!(max_abs(&(inv.matrix - direct)) < 1e-8);
    }

    #[test]
    fn positivity_and_domination() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = space(2);
        let rep = op_positivity_check(&LinOp::identity(s.clone()), 1e-10, &mut rng);
        assert!(rep.positive && rep.min_entry == 0.0 && rep.modulus_probe_ok);
        let neg = LinOp::on(DMatrix::from_row_slice(2, 2, &[1.0, -0.1, 0.0, 1.0]), s.clone());
        assert!(!op_positivity_check(&neg, 1e-12, &mut rng).positive);

        let one = space(1);
        let sm = LinOp::on(DMatrix::from_element(1, 1, -0.2), one.clone());
        let tm = LinOp::on(DMatrix::from_element(1, 1, 0.3), one);
        let d = domination_check(&sm, &tm, 1e-10, &mut rng).unwrap();
        assert!(d.dominated && d.sampled_dominated && d.spectral_ok && d.powers_ok);
        assert!((d.r_s - 0.2).abs() < 1e-15 && (d.r_t - 0.3).abs() < 1e-15);
    }
}
