//! Test-side oracles. Nothing here calls the library's integrators,
//! exponentials or eigen solvers.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use semigroup_lab::{GridSpace, LinOp, NormKind, RegularizedControl, SemigroupModel, TripleSpec};

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// ∫₀¹ ∫ₓ¹ e^{λ(x−s)} ds dx by nested adaptive Simpson.
pub fn nested_rank_one(lambda: f64) -> f64 {
    let inner = |x: f64| adaptive_simpson(&|s| (lambda * (x - s)).exp(), x, 1.0, 1e-13);
    adaptive_simpson(&inner, 0.0, 1.0, 1e-11)
}

/// I(λ, α) = λ^{α−2} ∫₀^λ y^{−α}(1 − e^{−y}) dy: power series on [0, min(λ,1)],
/// adaptive Simpson on the smooth remainder.
pub fn decay_oracle(lambda: f64, alpha: f64) -> f64 {
    let a = lambda.min(1.0);
    // ∫₀^a y^{−α}(1 − e^{−y}) dy = Σ_{k≥1} (−1)^{k+1} a^{k+1−α} / (k!(k+1−α))
    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 1..60 {
        fact *= k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        head += sign * a.powf(k as f64 + 1.0 - alpha) / (fact * (k as f64 + 1.0 - alpha));
    }
    let tail = if lambda > 1.0 {
        adaptive_simpson(&|y: f64| y.powf(-alpha) * (1.0 - (-y).exp()), 1.0, lambda, 1e-12)
    } else {
        0.0
    };
    lambda.powf(alpha - 2.0) * (head + tail)
}

/// A + (λ₀ − A)B_reg C assembled from the raw parts of a generator triple.
pub fn closed_loop_oracle(t: &TripleSpec) -> DMatrix<f64> {
    let a = t.model.generator().expect("generator triple").clone();
    let n = a.nrows();
    let b = (DMatrix::identity(n, n) * t.lambda0() - &a) * &t.control.b_reg.matrix;
    a + b * t.c()
}

/// Largest absolute row sum.
pub fn sup_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn inverse_shifted(m: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = m.nrows();
    (DMatrix::identity(n, n) * lambda - m).try_inverse().expect("λ in the resolvent set")
}

fn matrix_triple(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> TripleSpec {
    let x = Arc::new(GridSpace::unit(a.nrows(), NormKind::Sup));
    let u = Arc::new(GridSpace::unit(b.ncols(), NormKind::Sup));
    let model = SemigroupModel::matrix_exp(&LinOp::on(a, x.clone())).unwrap();
    let lambda0 = model.growth_bound().max(0.0) + 1.0;
    let ctrl = RegularizedControl::from_bounded(&model, LinOp::new(b, u.clone(), x.clone()), lambda0).unwrap();
    TripleSpec::new(model, ctrl, LinOp::new(c, x, u)).unwrap()
}

/// A = −2, B = 1, C = 1: closed loop −1.
pub fn scalar_triple() -> TripleSpec {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    matrix_triple(one(-2.0), one(1.0), one(1.0))
}

/// A = [[−2, 1], [1, −3]], B = I, C = ½I.
pub fn two_by_two_triple() -> TripleSpec {
    let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -3.0]);
    matrix_triple(a, DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 0.5)
}

/// Smooth decaying inputs (1 + c sin(ωt)) e^{−at}, per component.
pub fn decaying_inputs(m: usize, count: usize) -> Vec<Box<dyn Fn(f64) -> DVector<f64>>> {
    (0..count)
        .map(|k| {
            let a = 0.6 + 0.25 * k as f64;
            let c = 0.5 * ((k % 3) as f64) / 2.0;
            let w = 1.0 + k as f64;
            Box::new(move |t: f64| DVector::from_fn(m, |i, _| (1.0 + c * (w * t + i as f64).sin()) * (-(a + 0.1 * i as f64) * t).exp()))
                as Box<dyn Fn(f64) -> DVector<f64>>
        })
        .collect()
}

#[cfg(test)]
mod tests {}
