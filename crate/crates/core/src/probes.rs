//! Seeded random triples and operator pairs used by tests, benches and the CLI.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::lattice::{GridSpace, NormKind};
use crate::operator::{eigenvalues, LinOp};
use crate::perturbation::DominatingSplit;
use crate::semigroup::{RegularizedControl, SemigroupModel};
use crate::triple::TripleSpec;

/// Entrywise uniform [0, 1) matrix with roughly `density` of the entries kept.
pub fn random_positive_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| if rng.gen::<f64>() < density { rng.gen::<f64>() } else { 0.0 })
}

/// Uniform [−1, 1) entries.
pub fn random_signed_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// (S, T) with |S| ≤ T entrywise.
pub fn random_dominated_pair<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = random_positive_matrix(rng, n, n, 0.8);
    let s = DMatrix::from_fn(n, n, |i, j| t[(i, j)] * rng.gen_range(-1.0..1.0));
    (s, t)
}

/// A = M − sI with M ≥ 0 and s − r(M) ∈ [0.5, 2), so A has negative growth bound
/// and a positive exponential.
fn random_generator<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = random_positive_matrix(rng, n, n, 0.6);
    let s = eigenvalues(&m).spectral_radius() + rng.gen_range(0.5..2.0);
    m - DMatrix::identity(n, n) * s
}

fn spaces(n: usize, m: usize, u_norm: NormKind) -> (Arc<GridSpace>, Arc<GridSpace>) {
    (Arc::new(GridSpace::unit(n, NormKind::Sup)), Arc::new(GridSpace::unit(m, u_norm)))
}

fn assemble(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, x: Arc<GridSpace>, u: Arc<GridSpace>) -> Result<TripleSpec> {
    let model = SemigroupModel::matrix_exp(&LinOp::on(a, x.clone()))?;
    let lambda0 = model.growth_bound().max(0.0) + 1.0;
    let ctrl = RegularizedControl::from_bounded(&model, LinOp::new(b, u.clone(), x.clone()), lambda0)?;
    TripleSpec::new(model, ctrl, LinOp::new(c, x, u))
}

/// r(C R(0,A) B) for bounded B.
fn io_radius(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let r0 = -a.clone().try_inverse().expect("generator with negative growth is invertible");
    eigenvalues(&(c * r0 * b)).spectral_radius()
}

/// Positive triple on X = ℝⁿ (sup) and U = ℝᵐ with r(CR(0,A)B) drawn uniformly from `target`.
pub fn random_positive_triple<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    target: (f64, f64),
    u_norm: NormKind,
) -> Result<TripleSpec> {
    let a = random_generator(rng, n);
    let mut b = random_positive_matrix(rng, n, m, 0.7);
    let mut c = random_positive_matrix(rng, m, n, 0.7);
    // avoid an all-zero loop
    b[(0, 0)] += 0.1;
    c[(0, 0)] += 0.1;
    let r = io_radius(&a, &b, &c);
    let goal = rng.gen_range(target.0..target.1);
    c *= goal / r;
    let (x, u) = spaces(n, m, u_norm);
    assemble(a, b, c, x, u)
}

#[derive(Debug, Clone)]
pub struct SignedTriple {
    pub triple: TripleSpec,
    pub split: DominatingSplit,
}

/// Signed B, C with the Jordan split B = B₊ − B₋ and C̃ = |C|; the dominating
/// radius r(C̃R(0,A)(B₊ + B₋)) is drawn from `target`.
pub fn random_signed_triple<R: Rng>(rng: &mut R, n: usize, m: usize, target: (f64, f64)) -> Result<SignedTriple> {
    let a = random_generator(rng, n);
    let b = random_signed_matrix(rng, n, m);
    let mut c = random_signed_matrix(rng, m, n);
    let r = io_radius(&a, &b.abs(), &c.abs());
    c *= rng.gen_range(target.0..target.1) / r;
    let (x, u) = spaces(n, m, NormKind::Sup);
    let triple = assemble(a, b.clone(), c.clone(), x.clone(), u.clone())?;
    let lambda0 = triple.lambda0();
    let part = |mat: DMatrix<f64>| RegularizedControl::from_bounded(&triple.model, LinOp::new(mat, u.clone(), x.clone()), lambda0);
    let split = DominatingSplit {
        b_plus: part(b.map(|v| v.max(0.0)))?,
        b_minus: part(b.map(|v| (-v).max(0.0)))?,
        c_tilde: c.abs(),
    };
    Ok(SignedTriple { triple, split })
}
