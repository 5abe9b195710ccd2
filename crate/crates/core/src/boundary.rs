//! Boundary perturbations on the unit interval: Dirichlet maps L_λ, the
//! nonlocal boundary condition f|∂Ω = Φf, and the heat equation with
//! integral boundary feedback.
//!
//! The state grid is cell-centred with n cells; the two boundary values sit
//! on ghost-node closures, so the maximal Laplacian splits as
//! A_m(f, g) = A_D f + E g with A_D the Dirichlet Laplacian.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpace, NormKind};
use crate::operator::{domination_check, eigenvalues, matrix_power, operator_norm, resolvent_matrix, LinOp};
use crate::perturbation::{
    hypothesis_report, resolvent_factorization, Diagnostics, HypothesisReport, PerturbedSemigroup, TheoremKind,
    TimeGrid,
};
use crate::semigroup::{RegularizedControl, SemigroupModel};
use crate::system::TimeRule;
use crate::triple::TripleSpec;

/// Kernel φ(z, x) of the boundary functional (Φf)(z) = ∫₀¹ φ(z, x) f(x) dx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    Zero,
    Constant { value: f64 },
    /// amplitude · cos(frequency · π x), the same at both ends.
    Cosine { amplitude: f64, frequency: f64 },
    /// Different constants at z = 0 and z = 1.
    Split { left: f64, right: f64 },
}

impl Kernel {
    pub fn eval(&self, z: usize, x: f64) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Constant { value } => value,
            Kernel::Cosine { amplitude, frequency } => amplitude * (frequency * std::f64::consts::PI * x).cos(),
            Kernel::Split { left, right } => {
                if z == 0 {
                    left
                } else {
                    right
                }
            }
        }
    }

    /// Midpoint-rule matrix of Φ: X → ∂X.
    pub fn matrix(&self, space: &GridSpace) -> DMatrix<f64> {
        DMatrix::from_fn(2, space.dim(), |z, i| self.eval(z, space.nodes()[i]) * space.weights()[i])
    }

    pub fn is_positive(&self, space: &GridSpace) -> bool {
        self.matrix(space).iter().all(|v| *v >= 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryModel {
    /// Cell-centred interior grid on [0, 1].
    pub space: Arc<GridSpace>,
    /// ∂X = ℝ² with the sup norm.
    pub boundary_space: Arc<GridSpace>,
    /// n × (n + 2): A_m acting on (interior values, g₀, g₁).
    pub a_max: DMatrix<f64>,
    /// 2 × (n + 2): trace onto ∂X.
    pub trace: DMatrix<f64>,
    pub a_dirichlet: DMatrix<f64>,
    /// n × 2: boundary coupling, A_m = [A_D | E].
    pub e: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl BoundaryModel {
    /// 1D Laplacian on n cells with the boundary functional Φ (2 × n).
    pub fn laplacian(cells: usize, phi: DMatrix<f64>) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidArgument("need at least two cells".into()));
        }
        if phi.shape() != (2, cells) {
            return Err(Error::SpaceMismatch(format!("Φ must be 2×{cells}")));
        }
        let space = Arc::new(GridSpace::cell_centred(0.0, 1.0, cells, NormKind::Lp(2.0)));
        let h = 1.0 / cells as f64;
        let k = 1.0 / (h * h);
        let n = cells;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -2.0 * k;
            if i > 0 {
                a[(i, i - 1)] = k;
            }
            if i + 1 < n {
                a[(i, i + 1)] = k;
            }
        }
        // ghost value f₋₁ = 2g₀ − f₀ and likewise at the right end
        a[(0, 0)] -= k;
        a[(n - 1, n - 1)] -= k;
        let mut e = DMatrix::zeros(n, 2);
        e[(0, 0)] = 2.0 * k;
        e[(n - 1, 1)] = 2.0 * k;
        let mut a_max = DMatrix::zeros(n, n + 2);
        a_max.view_mut((0, 0), (n, n)).copy_from(&a);
        a_max.view_mut((0, n), (n, 2)).copy_from(&e);
        let mut trace = DMatrix::zeros(2, n + 2);
        trace[(0, n)] = 1.0;
        trace[(1, n + 1)] = 1.0;
        Ok(BoundaryModel {
            space,
            boundary_space: Arc::new(GridSpace::unit(2, NormKind::Sup)),
            a_max,
            trace,
            a_dirichlet: a,
            e,
            phi,
        })
    }

    pub fn with_kernel(cells: usize, kernel: &Kernel) -> Result<Self> {
        let space = GridSpace::cell_centred(0.0, 1.0, cells, NormKind::Lp(2.0));
        BoundaryModel::laplacian(cells, kernel.matrix(&space))
    }

    pub fn cells(&self) -> usize {
        self.space.dim()
    }

    /// A_D + EΦ: the boundary values eliminated through g = Φf.
    pub fn perturbed_generator(&self) -> DMatrix<f64> {
        &self.a_dirichlet + &self.e * &self.phi
    }

    /// Φ replaced by another 2 × n functional.
    pub fn with_phi(&self, phi: DMatrix<f64>) -> BoundaryModel {
        BoundaryModel { phi, ..self.clone() }
    }

    /// (A_D, B = L_A with B_reg = L_λ₀, C = Φ).
    pub fn triple(&self, lambda0: f64) -> Result<TripleSpec> {
        let model = SemigroupModel::matrix_exp(&LinOp::on(self.a_dirichlet.clone(), self.space.clone()))?;
        let l = dirichlet_map(self, lambda0)?;
        let b_reg = LinOp::new(l.matrix, self.boundary_space.clone(), self.space.clone());
        let ctrl = RegularizedControl::from_regularized(&model, b_reg, lambda0)?;
        TripleSpec::new(model, ctrl, LinOp::new(self.phi.clone(), self.space.clone(), self.boundary_space.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct DirichletMap {
    pub lambda: f64,
    /// n × 2.
    pub matrix: DMatrix<f64>,
    /// max |L_λ − (μ − A)R(λ, A)L_μ| at μ = λ + 1.
    pub identity_residual: f64,
    /// max |L·(L_λ g, g) − g| over the boundary basis.
    pub trace_residual: f64,
}

fn solve_bvp(m: &BoundaryModel, lambda: f64) -> Result<DMatrix<f64>> {
    let n = m.cells();
    let lhs = DMatrix::identity(n, n) * lambda - &m.a_dirichlet;
    lhs.lu().solve(&m.e).ok_or(Error::SingularBVP(lambda))
}

/// Solves (λ − A_m)f = 0, Lf = g for both boundary basis vectors.
pub fn dirichlet_map(m: &BoundaryModel, lambda: f64) -> Result<DirichletMap> {
    let n = m.cells();
    let l = solve_bvp(m, lambda)?;
    let mu = lambda + 1.0;
    let l_mu = solve_bvp(m, mu)?;
    let r = resolvent_matrix(&m.a_dirichlet, lambda).map_err(|_| Error::SingularBVP(lambda))?;
    let other = (DMatrix::identity(n, n) * mu - &m.a_dirichlet) * r * l_mu;
    let identity_residual = (&l - other).amax() / l.amax().max(1.0);
    let mut full = DMatrix::zeros(n + 2, 2);
    full.view_mut((0, 0), (n, 2)).copy_from(&l);
    full[(n, 0)] = 1.0;
    full[(n + 1, 1)] = 1.0;
    let trace_residual = (&m.trace * &full - DMatrix::<f64>::identity(2, 2)).amax();
    // (λ − A_m) applied to the full vector must vanish
    let bvp = (&full.rows(0, n) * lambda - &m.a_max * &full).amax() / m.e.amax();
    if !(bvp <= 1e-8) {
        return Err(Error::SingularBVP(lambda));
    }
    Ok(DirichletMap { lambda, matrix: l, identity_residual, trace_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// r(Φ L_λ).
    pub spectral_radius_phi_llambda: f64,
    /// ‖L_λ(1, 1)‖_X.
    pub norm_llambda_one: f64,
    /// min entry of L_λ.
    pub min_entry: f64,
    pub identity_residual: f64,
}

/// r(ΦL_λ), ‖L_λ 1‖ and positivity of L_λ along a λ sweep.
pub fn lambda_sweep(m: &BoundaryModel, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = lambdas
        .par_iter()
        .map(|&lambda| {
            let l = dirichlet_map(m, lambda)?;
            let one = &l.matrix * DVector::from_element(2, 1.0);
            Ok(SweepRow {
                lambda,
                spectral_radius_phi_llambda: eigenvalues(&(&m.phi * &l.matrix)).spectral_radius(),
                norm_llambda_one: m.space.norm_of(one.as_slice()),
                min_entry: l.matrix.min(),
                identity_residual: l.identity_residual,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub lambda_check: f64,
    pub sweep: Vec<SweepRow>,
    /// max relative gap between the resolvents of routes (a) and (b).
    pub route_discrepancy: f64,
    pub hypothesis: HypothesisReport,
}

const ROUTE_TOL: f64 = 1e-6;

/// A^Φ = A_D + EΦ built by constraint elimination (route a) and cross-checked
/// against the resolvent factorization of (A_D, L_A, Φ) (route b). Requires
/// r(ΦL_λ) < 1 at `lambda_check`; a signed Φ is checked through |Φ|.
pub fn boundary_generator(
    m: &BoundaryModel,
    lambda_check: f64,
    lambdas: &[f64],
    grid: TimeGrid,
) -> Result<(PerturbedSemigroup, BoundaryReport)> {
    let positive = m.phi.iter().all(|v| *v >= 0.0);
    let majorant = if positive { m.clone() } else { m.with_phi(m.phi.abs()) };
    let triple_t = majorant.triple(lambda_check + 1.0)?;
    // the rescaled triple sees λ = 0 at λ_check
    let mut hyp = hypothesis_report(&triple_t.rescaled(lambda_check), TheoremKind::AM)?;
    if !positive {
        hyp.push("phi-dominated-by-abs", true, 0.0);
    }
    if !hyp.passed() {
        return Err(Error::HypothesisFailed(format!("at lambda={lambda_check}: {}", hyp.failures().join(", "))));
    }

    let a_phi = m.perturbed_generator();
    let triple = m.triple(lambda_check + 1.0)?;
    let closed = triple.closed_loop().expect("Dirichlet model has a generator");
    let mut route_discrepancy = (&closed - &a_phi).amax() / a_phi.amax();
    for &l in lambdas.iter().filter(|l| **l >= lambda_check) {
        let fact = resolvent_factorization(&triple, l)?;
        let direct = resolvent_matrix(&a_phi, l)?;
        route_discrepancy = route_discrepancy.max((&fact - &direct).amax() / direct.amax());
    }
    if route_discrepancy > ROUTE_TOL {
        return Err(Error::InconsistentRepresentations(route_discrepancy));
    }
    let sweep = lambda_sweep(m, lambdas)?;
    let diag = Diagnostics {
        theorem_kind: if positive { TheoremKind::AM } else { TheoremKind::DOM },
        r_feedback: triple_t.rescaled(lambda_check).io_radius(),
        r_io_estimate: f64::NAN,
        picard_iterations: 0,
        picard_residual: 0.0,
        rescale_shift: lambda_check,
        hypothesis: hyp.clone(),
    };
    let s = PerturbedSemigroup::closed_loop(a_phi, m.space.clone(), grid, TimeRule::Quadratic, diag);
    Ok((s, BoundaryReport { lambda_check, sweep, route_discrepancy, hypothesis: hyp }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatFeedbackConfig {
    pub grid_n: usize,
    pub kernel: Kernel,
    pub lambda_sweep: Vec<f64>,
    pub time_step: f64,
    pub horizon: f64,
}

impl Default for HeatFeedbackConfig {
    fn default() -> Self {
        HeatFeedbackConfig {
            grid_n: 200,
            kernel: Kernel::Constant { value: 0.5 },
            lambda_sweep: vec![1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 200.0],
            time_step: 0.05,
            horizon: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeRow {
    pub t: f64,
    pub min_entry_s: f64,
    /// max(|S(t)| − S̃(t)) entrywise, with S̃ generated by |φ|.
    pub domination_residual: f64,
    /// ∫ S(t)1.
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatFeedbackReport {
    pub lambda_star: Option<f64>,
    pub boundary: BoundaryReport,
    pub times: Vec<TimeRow>,
    pub signed: bool,
    /// Sampled `domination_check` verdicts and resolvent-power domination.
    pub domination_checks_ok: bool,
    pub resolvent_power_excess: f64,
}

/// Sweeps λ, picks the first λ* with r(ΦL_λ*) < 1, generates S from A_D + EΦ
/// and, for every time row, compares it to the semigroup generated by |φ|.
pub fn heat_feedback_scenario(cfg: &HeatFeedbackConfig) -> Result<HeatFeedbackReport> {
    let m = BoundaryModel::with_kernel(cfg.grid_n, &cfg.kernel)?;
    let mut lambdas = cfg.lambda_sweep.clone();
    lambdas.sort_by(f64::total_cmp);
    let sweep = lambda_sweep(&m.with_phi(m.phi.abs()), &lambdas)?;
    let lambda_star = sweep.iter().find(|r| r.spectral_radius_phi_llambda < 1.0).map(|r| r.lambda);
    let Some(ls) = lambda_star else {
        let r = sweep.last().map_or(f64::NAN, |r| r.spectral_radius_phi_llambda);
        return Err(Error::HypothesisFailed(format!("spectral radius {r} >= 1 at every lambda in the sweep")));
    };
    let grid = TimeGrid::new(cfg.time_step, cfg.horizon);
    let (s, boundary) = boundary_generator(&m, ls, &lambdas, grid)?;
    let signed = !m.phi.iter().all(|v| *v >= 0.0);
    let a_tilde = m.with_phi(m.phi.abs()).perturbed_generator();
    let s_tilde = PerturbedSemigroup::closed_loop(a_tilde.clone(), m.space.clone(), grid, TimeRule::Quadratic, s.diagnostics.clone());

    let weights = DVector::from_column_slice(m.space.weights());
    let one = DVector::from_element(m.cells(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x4ea7);
    let mut times = Vec::new();
    let mut domination_checks_ok = true;
    for ((t, st), (_, stt)) in s.grid_iter().zip(s_tilde.grid_iter()) {
        let domination_residual = st.iter().zip(stt.iter()).map(|(a, b)| a.abs() - b).fold(f64::NEG_INFINITY, f64::max);
        if t > 0.0 && signed {
            let rep = domination_check(&LinOp::on(st.clone(), m.space.clone()), &LinOp::on(stt.clone(), m.space.clone()), 1e-8, &mut rng)?;
            domination_checks_ok &= rep.dominated && rep.spectral_ok;
        }
        times.push(TimeRow { t, min_entry_s: st.min(), domination_residual, mass: weights.dot(&(&st * &one)) });
    }

    // |R(λ, A^Φ)ⁿ| norms against the majorant for λ past both growth bounds
    let a_phi = m.perturbed_generator();
    let lam = eigenvalues(&a_tilde).abscissa().max(eigenvalues(&a_phi).abscissa()).max(0.0) + 1.0;
    let r = resolvent_matrix(&a_phi, lam)?;
    let rt = resolvent_matrix(&a_tilde, lam)?;
    let mut resolvent_power_excess = f64::NEG_INFINITY;
    for n in 1..=6u32 {
        let a = operator_norm(&matrix_power(&r, n), &m.space, &m.space).value();
        let b = operator_norm(&matrix_power(&rt, n), &m.space, &m.space).value();
        resolvent_power_excess = resolvent_power_excess.max(a - b);
    }
    Ok(HeatFeedbackReport { lambda_star, boundary, times, signed, domination_checks_ok, resolvent_power_excess })
}
