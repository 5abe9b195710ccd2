//! Hypothesis checks and constructors for the perturbed semigroup
//! S(t) = T(t) + 𝓑ₜ(Id − 𝓕∞)⁻¹𝓒∞, the factorized resolvent, the
//! variation-of-parameters residual, and domination by a positive majorant.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpace, NormKind};
use crate::operator::{
    domination_check, eigenvalues, matrix_power, op_positivity_check, operator_norm, resolvent_matrix, LinOp,
    PositivityReport,
};
use crate::semigroup::{expm, RegularizedControl, SemigroupModel};
use crate::system::engine::{partial_cell, picard_cap, picard_columns};
use crate::system::{controllability_map_with, Engine, TimeGridFn, TimeRule};
use crate::triple::TripleSpec;

const POS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TheoremKind {
    /// U an AM-space (sup-tagged).
    AM,
    /// U an AL-space (L¹-tagged), B bounded into X.
    AL,
    /// U = ℝᴺ with p-admissible B and C.
    RN { p: f64 },
    /// Signed B, C dominated by a positive triple.
    DOM,
}

impl TheoremKind {
    pub fn label(&self) -> &'static str {
        match self {
            TheoremKind::AM => "AM",
            TheoremKind::AL => "AL",
            TheoremKind::RN { .. } => "RN",
            TheoremKind::DOM => "DOM",
        }
    }
}

/// Uniform construction grid 0, h, …, horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step: f64,
    pub horizon: f64,
    pub rule: Option<TimeRule>,
}

impl TimeGrid {
    pub fn new(step: f64, horizon: f64) -> Self {
        TimeGrid { step, horizon, rule: None }
    }
    pub fn with_rule(mut self, rule: TimeRule) -> Self {
        self.rule = Some(rule);
        self
    }
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round().max(1.0) as usize
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
    /// Grid index of t when t is (within rounding) a grid time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = t / self.step;
        let k = r.round();
        ((r - k).abs() <= 1e-9 * k.max(1.0) && k <= self.steps() as f64).then_some(k as usize)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub kind: TheoremKind,
    pub checks: Vec<Check>,
}

impl HypothesisReport {
    pub(crate) fn new(kind: TheoremKind) -> Self {
        HypothesisReport { kind, checks: Vec::new() }
    }
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({:.6e})", c.name, c.value)).collect()
    }
    pub(crate) fn push(&mut self, name: &str, passed: bool, value: f64) {
        self.checks.push(Check { name: name.into(), passed, value });
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub theorem_kind: TheoremKind,
    /// r(C R(λ_h, A₋₁) B) at the hypothesis point λ_h.
    pub r_feedback: f64,
    /// Contraction rate of the Picard increments.
    pub r_io_estimate: f64,
    pub picard_iterations: usize,
    pub picard_residual: f64,
    /// μ with S(t) = e^{μt} S_μ(t).
    pub rescale_shift: f64,
    pub hypothesis: HypothesisReport,
}

#[derive(Debug)]
enum Repr {
    Vp {
        /// Rescaled model and control.
        model: SemigroupModel,
        control: RegularizedControl,
        engine: Engine,
        /// C S_μ(t_k) on every grid time (m × n).
        v: Vec<DMatrix<f64>>,
    },
    ClosedLoop {
        generator: DMatrix<f64>,
    },
}

/// The constructed semigroup with memoized evaluations.
#[derive(Debug)]
pub struct PerturbedSemigroup {
    repr: Repr,
    mu: f64,
    space: Arc<GridSpace>,
    grid: TimeGrid,
    rule: TimeRule,
    cache: Mutex<HashMap<u64, Arc<DMatrix<f64>>>>,
    pub diagnostics: Diagnostics,
}

impl PerturbedSemigroup {
    /// S(t) = exp(t·A) for a discrete closed-loop generator A.
    pub(crate) fn closed_loop(generator: DMatrix<f64>, space: Arc<GridSpace>, grid: TimeGrid, rule: TimeRule, diagnostics: Diagnostics) -> Self {
        PerturbedSemigroup { repr: Repr::ClosedLoop { generator }, mu: 0.0, space, grid, rule, cache: Mutex::new(HashMap::new()), diagnostics }
    }

    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn rule(&self) -> TimeRule {
        self.rule
    }
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
    pub fn rescale_shift(&self) -> f64 {
        self.mu
    }

    /// S(t); grid times come straight from the construction, other t take a partial step.
    pub fn eval(&self, t: f64) -> Result<Arc<DMatrix<f64>>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if t > self.grid.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("t={t} beyond the construction horizon {}", self.grid.horizon)));
        }
        let key = t.to_bits();
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let m = Arc::new(self.compute(t)?);
        self.cache.lock().unwrap().insert(key, m.clone());
        Ok(m)
    }

    pub fn eval_op(&self, t: f64) -> Result<LinOp> {
        Ok(LinOp::on((*self.eval(t)?).clone(), self.space.clone()))
    }

    fn compute(&self, t: f64) -> Result<DMatrix<f64>> {
        match &self.repr {
            Repr::ClosedLoop { generator } => Ok(expm(&(generator * t))),
            Repr::Vp { model, control, engine, v } => {
                let h = self.grid.step;
                let (k, tau) = match self.grid.index_of(t) {
                    Some(k) => (k, 0.0),
                    None => {
                        let k = (t / h).floor() as usize;
                        (k, t - k as f64 * h)
                    }
                };
                let zk = engine.state_at(k, v);
                let z = if tau > 0.0 { partial_cell(model, control, &zk, tau, h, &v[k], v.get(k + 1))? } else { zk };
                Ok((model.eval(t)? + z) * (self.mu * t).exp())
            }
        }
    }

    /// C S_μ(t_k) on the grid, for VP constructions.
    pub fn observed_rescaled(&self) -> Option<&[DMatrix<f64>]> {
        match &self.repr {
            Repr::Vp { v, .. } => Some(v),
            Repr::ClosedLoop { .. } => None,
        }
    }

    /// (t_k, S(t_k)) for every grid time, computed by streaming the recursion.
    pub fn grid_iter(&self) -> GridIter<'_> {
        GridIter { s: self, k: 0, x: None, z: None, step: None }
    }
}

pub struct GridIter<'a> {
    s: &'a PerturbedSemigroup,
    k: usize,
    x: Option<DMatrix<f64>>,
    z: Option<DMatrix<f64>>,
    step: Option<DMatrix<f64>>,
}

impl Iterator for GridIter<'_> {
    type Item = (f64, DMatrix<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        let steps = self.s.grid.steps();
        if self.k > steps {
            return None;
        }
        let n = self.s.dim();
        let k = self.k;
        let t = self.s.grid.time(k);
        let out = match &self.s.repr {
            Repr::ClosedLoop { generator } => {
                let x = match self.x.take() {
                    None => DMatrix::identity(n, n),
                    Some(prev) => {
                        let e = self.step.get_or_insert_with(|| expm(&(generator * self.s.grid.step)));
                        prev * &*e
                    }
                };
                self.x = Some(x.clone());
                x
            }
            Repr::Vp { engine, v, .. } => {
                let (x, z) = match (self.x.take(), self.z.take()) {
                    (Some(x), Some(z)) => (engine.propagate(&x), engine.advance(&z, k, v)),
                    _ => (DMatrix::identity(n, n), engine.zero_state(n)),
                };
                let s = (&x + engine.lift(&z)) * (self.s.mu * t).exp();
                self.x = Some(x);
                self.z = Some(z);
                s
            }
        };
        self.k += 1;
        Some((t, out))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlPositivity {
    pub positive: bool,
    pub reports: Vec<(f64, PositivityReport)>,
}

fn control_positivity(model: &SemigroupModel, control: &RegularizedControl, lambdas: &[f64]) -> Result<ControlPositivity> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9051);
    let mut reports = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if !(l > model.growth_bound()) {
            return Err(Error::InvalidArgument(format!("λ={l} must exceed the growth bound {}", model.growth_bound())));
        }
        let rb = control.resolvent_applied(model, l)?;
        let op = LinOp::new(rb, control.b_reg.domain.clone(), model.space().clone());
        reports.push((l, op_positivity_check(&op, POS_TOL * max_entry(&op.matrix).max(1.0), &mut rng)));
    }
    Ok(ControlPositivity { positive: reports.iter().all(|(_, r)| r.positive), reports })
}

fn max_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Positivity of R(λ, A₋₁)B at each sample λ.
pub fn check_control_positivity(triple: &TripleSpec, lambdas: &[f64]) -> Result<ControlPositivity> {
    control_positivity(&triple.model, &triple.control, lambdas)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackRadius {
    pub value: f64,
    /// r(C A₋₁⁻¹ B), when the growth bound is negative.
    pub io_radius: Option<f64>,
    /// r(CR(λ,A₋₁)B) ≤ r(CA₋₁⁻¹B) + 1e−8, checked for λ > 0.
    pub monotone_ok: Option<bool>,
}

/// r(C R(λ, A₋₁) B) by the eigenvalue route.
pub fn feedback_spectral_radius(triple: &TripleSpec, lambda: f64) -> Result<FeedbackRadius> {
    if !(lambda > triple.model.growth_bound()) {
        return Err(Error::InvalidArgument(format!("λ={lambda} must exceed the growth bound")));
    }
    let value = eigenvalues(&triple.feedback_matrix(lambda)?).spectral_radius();
    let io_radius = (triple.model.growth_bound() < 0.0).then(|| triple.io_radius());
    let monotone_ok = match io_radius {
        Some(r) if lambda > 0.0 => Some(value <= r + 1e-8),
        _ => None,
    };
    Ok(FeedbackRadius { value, io_radius, monotone_ok })
}

/// Hypotheses of the requested theorem on a triple with negative growth bound.
pub fn hypothesis_report(tr: &TripleSpec, kind: TheoremKind) -> Result<HypothesisReport> {
    let mut rep = HypothesisReport::new(kind);
    let u = tr.u_space();
    match kind {
        TheoremKind::AM => rep.push("u-am-space", u.norm_kind() == NormKind::Sup, 0.0),
        TheoremKind::AL => rep.push("u-al-space", u.norm_kind() == NormKind::L1, 0.0),
        TheoremKind::RN { p } => {
            let unit = u.weights().iter().all(|w| *w == 1.0);
            rep.push("u-is-rn", unit && p >= 1.0, p);
        }
        TheoremKind::DOM => {}
    }
    if kind != TheoremKind::DOM {
        let pos = check_control_positivity(tr, &[0.0, 1.0, 10.0])?;
        let worst = pos.reports.iter().map(|(_, r)| r.min_entry).fold(0.0, f64::min);
        rep.push("b-positive", pos.positive, worst);
        let cmin = tr.c().min().min(0.0);
        rep.push("c-positive", cmin >= -POS_TOL * max_entry(tr.c()).max(1.0), cmin);
    }
    let r = tr.io_radius();
    rep.push("feedback-radius-below-one", r < 1.0, r);
    rep.push("compatible", tr.compatible(), 0.0);
    match kind {
        TheoremKind::AL => {
            // B_reg = R(λ₀)B with B bounded into X
            let b = tr.control.b_raw();
            let recon = tr.model.resolvent(tr.lambda0())? * b;
            let res = max_entry(&(recon - &tr.control.b_reg.matrix));
            let finite = b.iter().all(|v| v.is_finite());
            rep.push("b-into-x", finite && res <= 1e-8 * max_entry(&tr.control.b_reg.matrix).max(1.0), res);
        }
        TheoremKind::RN { .. } => {
            let g = tr.control.inv_generator_applied(&tr.model)?;
            let kb = operator_norm(&g, &u.with_norm(NormKind::Sup), tr.x_space()).value();
            let kc = operator_norm(&tr.c_inv_a()?, tr.x_space(), &u.with_norm(NormKind::L1)).value();
            rep.push("b-admissibility-constant", kb.is_finite(), kb);
            rep.push("c-admissibility-constant", kc.is_finite(), kc);
        }
        _ => {}
    }
    Ok(rep)
}

/// Builds S from the variation-of-parameters fixed point, after rescaling to
/// a negative growth bound and checking the theorem's hypotheses.
pub fn construct_perturbed(triple: &TripleSpec, kind: TheoremKind, grid: TimeGrid, tol: f64) -> Result<PerturbedSemigroup> {
    construct_perturbed_at(triple, kind, grid, tol, triple.hypothesis_point())
}

/// Same, with the hypotheses checked on A − μ for a caller-chosen μ above the
/// growth bound (typically a λ* where r(CR(λ*,A₋₁)B) < 1).
pub fn construct_perturbed_at(triple: &TripleSpec, kind: TheoremKind, grid: TimeGrid, tol: f64, mu: f64) -> Result<PerturbedSemigroup> {
    if !(mu > triple.model.growth_bound()) {
        return Err(Error::InvalidArgument(format!("rescaling point {mu} must exceed the growth bound")));
    }
    let tr = triple.rescaled(mu);
    let hyp = hypothesis_report(&tr, kind)?;
    if !hyp.passed() {
        return Err(Error::HypothesisFailed(format!("{} at lambda={mu}", hyp.failures().join(", "))));
    }
    build_vp(tr, mu, grid, tol, hyp)
}

fn build_vp(tr: TripleSpec, mu: f64, grid: TimeGrid, tol: f64, hyp: HypothesisReport) -> Result<PerturbedSemigroup> {
    let rule = grid.rule.unwrap_or_else(|| TimeRule::default_for(&tr.model));
    let steps = grid.steps();
    let engine = Engine::new(&tr.model, &tr.control, grid.step, steps, rule)?;
    let n = tr.x_space().dim();
    let c = tr.c().clone();
    // 𝓒∞ applied to the basis: C T(t_k)
    let mut f = Vec::with_capacity(steps + 1);
    let mut x = DMatrix::identity(n, n);
    for k in 0..=steps {
        if k > 0 {
            x = engine.propagate(&x);
        }
        f.push(&c * &x);
    }
    let r = tr.io_radius();
    let out = picard_columns(&engine, &c, &f, tol, picard_cap(r, tol))?;
    let diagnostics = Diagnostics {
        theorem_kind: hyp.kind,
        r_feedback: r,
        r_io_estimate: out.contraction_estimate(),
        picard_iterations: out.iterations,
        picard_residual: out.residual,
        rescale_shift: mu,
        hypothesis: hyp,
    };
    Ok(PerturbedSemigroup {
        space: tr.x_space().clone(),
        repr: Repr::Vp { model: tr.model, control: tr.control, engine, v: out.v },
        mu,
        grid,
        rule,
        cache: Mutex::new(HashMap::new()),
        diagnostics,
    })
}

/// R(λ,A) + R(λ,A₋₁)B (I − CR(λ,A₋₁)B)⁻¹ C R(λ,A).
pub fn resolvent_factorization(triple: &TripleSpec, lambda: f64) -> Result<DMatrix<f64>> {
    let m = triple.feedback_matrix(lambda)?;
    let r = eigenvalues(&m).spectral_radius();
    if r >= 1.0 {
        return Err(Error::HypothesisFailed(format!("r(CR(λ,A₋₁)B) = {r} at λ = {lambda}")));
    }
    let ra = triple.model.resolvent(lambda)?;
    let rb = triple.control.resolvent_applied(&triple.model, lambda)?;
    let k = DMatrix::identity(m.nrows(), m.nrows()) - m;
    let inner = k
        .lu()
        .solve(&(triple.c() * &ra))
        .ok_or(Error::SingularResolvent { lambda, residual: f64::INFINITY })?;
    Ok(ra + rb * inner)
}

/// (λ − (A + BC))⁻¹ from the discrete closed-loop matrix.
pub fn resolvent_direct(triple: &TripleSpec, lambda: f64) -> Result<DMatrix<f64>> {
    let a = triple
        .closed_loop()
        .ok_or_else(|| Error::InvalidArgument("model has no generator matrix".into()))?;
    resolvent_matrix(&a, lambda)
}

/// ‖S(t)x − T(t)x − 𝓑ₜ(C S(·)x)‖_X with the integral taken by the
/// construction's own time rule.
pub fn vp_residual(s: &PerturbedSemigroup, triple: &TripleSpec, x: &DVector<f64>, t: f64) -> Result<f64> {
    let grid = s.grid;
    let k_t = grid.index_of(t).ok_or_else(|| Error::InvalidArgument("t must be a grid time".into()))?;
    let mut samples = Vec::with_capacity(k_t + 1);
    for (k, (_, m)) in s.grid_iter().enumerate() {
        if k > k_t {
            break;
        }
        samples.push(m * x);
    }
    residual_from_samples(triple, s.mu, grid, s.rule, samples, x, t)
}

/// Same residual for an arbitrary evaluator t ↦ S(t), e.g. an exponential oracle.
pub fn vp_residual_of(
    triple: &TripleSpec,
    s: impl Fn(f64) -> Result<DMatrix<f64>>,
    x: &DVector<f64>,
    t: f64,
    grid: TimeGrid,
) -> Result<f64> {
    let k_t = grid.index_of(t).ok_or_else(|| Error::InvalidArgument("t must be a grid time".into()))?;
    let samples = (0..=k_t).map(|k| Ok(s(grid.time(k))? * x)).collect::<Result<Vec<_>>>()?;
    let rule = grid.rule.unwrap_or_else(|| TimeRule::default_for(&triple.model));
    residual_from_samples(triple, triple.hypothesis_point(), grid, rule, samples, x, t)
}

fn residual_from_samples(
    triple: &TripleSpec,
    mu: f64,
    grid: TimeGrid,
    rule: TimeRule,
    samples: Vec<DVector<f64>>,
    x: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let tr = triple.rescaled(mu);
    let k_t = samples.len() - 1;
    let times: Vec<f64> = (0..=k_t).map(|k| grid.time(k)).collect();
    if k_t == 0 {
        let d = &samples[0] - x;
        return Ok(tr.x_space().norm_of(d.as_slice()));
    }
    // C S_μ(s)x = e^{−μs} C S(s)x
    let y: Vec<DVector<f64>> = samples.iter().zip(&times).map(|(sx, s)| tr.c() * sx * (-mu * s).exp()).collect();
    let y = TimeGridFn::new(times, y, tr.u_space().clone())?;
    let bt = controllability_map_with(&tr, &y, t, rule)?;
    let s_mu = &samples[k_t] * (-mu * t).exp();
    let d = s_mu - tr.model.eval(t)? * x - bt;
    Ok(tr.x_space().norm_of(d.as_slice()) * (mu * t).exp())
}

/// Positive controls B₊, B₋ with B = B₊ − B₋, and C̃ with |Cx| ≤ C̃x on the cone.
#[derive(Debug, Clone)]
pub struct DominatingSplit {
    pub b_plus: RegularizedControl,
    pub b_minus: RegularizedControl,
    pub c_tilde: DMatrix<f64>,
}

impl DominatingSplit {
    /// The positive triple (A, B₊ + B₋, C̃).
    pub fn dominating_triple(&self, triple: &TripleSpec) -> Result<TripleSpec> {
        let mut t = triple.with_observation(self.c_tilde.clone());
        t.control = self.b_plus.sum(&self.b_minus)?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationSummary {
    /// max over grid times and entries of |S| − S̃.
    pub grid_max_excess: f64,
    /// Full `domination_check` verdicts on a subsample of grid times.
    pub sampled_checks_ok: bool,
    /// max of |R(λ,A_BC)| − R(λ,A_B̃C̃) entrywise over the λ samples.
    pub resolvent_max_excess: f64,
    /// max of ‖R(λ,A_BC)ⁿ‖ − ‖R(λ,A_B̃C̃)ⁿ‖ for n ≤ 6.
    pub power_max_excess: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Debug)]
pub struct DominatedPair {
    pub s: PerturbedSemigroup,
    pub s_tilde: PerturbedSemigroup,
    pub summary: DominationSummary,
}

/// Checks the domination hypotheses, builds S̃ from the positive triple and S
/// from the closed-loop matrix (or the fixed point for shift models), then
/// verifies |S(t)| ≤ S̃(t) on the grid and the resolvent domination.
pub fn construct_dominated(
    triple: &TripleSpec,
    split: &DominatingSplit,
    tilde_kind: TheoremKind,
    grid: TimeGrid,
    tol: f64,
    dom_tol: f64,
) -> Result<DominatedPair> {
    let b_diff = &split.b_plus.b_reg.matrix - &split.b_minus.b_reg.matrix;
    let scale = max_entry(&triple.control.b_reg.matrix).max(1.0);
    if max_entry(&(b_diff - &triple.control.b_reg.matrix)) > 1e-10 * scale {
        return Err(Error::InvalidArgument("B ≠ B₊ − B₋".into()));
    }
    let lams = [triple.hypothesis_point(), triple.hypothesis_point() + 1.0];
    for (name, b) in [("b-plus", &split.b_plus), ("b-minus", &split.b_minus)] {
        if !control_positivity(&triple.model, b, &lams)?.positive {
            return Err(Error::HypothesisFailed(format!("{name} is not positive")));
        }
    }
    let excess = c_domination_excess(triple.c(), &split.c_tilde, 50);
    if excess > POS_TOL * max_entry(&split.c_tilde).max(1.0) {
        return Err(Error::HypothesisFailed(format!("|Cx| ≤ C̃x violated by {excess:.3e}")));
    }
    let tilde = split.dominating_triple(triple)?;
    let s_tilde = construct_perturbed(&tilde, tilde_kind, grid, tol)?;

    let mu = triple.hypothesis_point();
    let mut hyp = HypothesisReport::new(TheoremKind::DOM);
    hyp.push("c-dominated", true, excess);
    let s = match triple.closed_loop() {
        Some(a) => {
            let diag = Diagnostics {
                theorem_kind: TheoremKind::DOM,
                r_feedback: triple.rescaled(mu).io_radius(),
                r_io_estimate: f64::NAN,
                picard_iterations: 0,
                picard_residual: 0.0,
                rescale_shift: 0.0,
                hypothesis: hyp,
            };
            PerturbedSemigroup::closed_loop(a, triple.x_space().clone(), grid, s_tilde.rule, diag)
        }
        None => build_vp(triple.rescaled(mu), mu, grid, tol, hyp)?,
    };

    let mut grid_max_excess = f64::NEG_INFINITY;
    let mut sampled_checks_ok = true;
    let every = (grid.steps() / 16).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0);
    for (k, ((t, sm), (_, st))) in s.grid_iter().zip(s_tilde.grid_iter()).enumerate() {
        let e = sm.iter().zip(st.iter()).map(|(a, b)| a.abs() - b).fold(f64::NEG_INFINITY, f64::max);
        grid_max_excess = grid_max_excess.max(e);
        if k % every == 0 && t > 0.0 {
            let sp = triple.x_space().clone();
            let rep = domination_check(&LinOp::on(sm, sp.clone()), &LinOp::on(st, sp), dom_tol, &mut rng)?;
            sampled_checks_ok &= rep.dominated == rep.sampled_dominated && rep.spectral_ok && rep.powers_ok;
        }
    }
    if grid_max_excess > dom_tol {
        return Err(Error::DominationViolated(grid_max_excess));
    }

    let lambdas: Vec<f64> = [1.0, 2.0, 5.0].iter().map(|d| tilde.hypothesis_point().max(mu) + d).collect();
    let (mut resolvent_max_excess, mut power_max_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &l in &lambdas {
        let r = resolvent_factorization(triple, l)?;
        let rt = resolvent_factorization(&tilde, l)?;
        let e = r.iter().zip(rt.iter()).map(|(a, b)| a.abs() - b).fold(f64::NEG_INFINITY, f64::max);
        resolvent_max_excess = resolvent_max_excess.max(e);
        for n in 1..=6u32 {
            let a = operator_norm(&matrix_power(&r, n), triple.x_space(), triple.x_space()).value();
            let b = operator_norm(&matrix_power(&rt, n), triple.x_space(), triple.x_space()).value();
            power_max_excess = power_max_excess.max(a - b);
        }
    }
    Ok(DominatedPair {
        s,
        s_tilde,
        summary: DominationSummary { grid_max_excess, sampled_checks_ok, resolvent_max_excess, power_max_excess, lambdas },
    })
}

/// max of |Cx| − C̃x over basis vectors and random positive probes (normalized by Σx).
fn c_domination_excess(c: &DMatrix<f64>, ct: &DMatrix<f64>, probes: usize) -> f64 {
    let n = c.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc7);
    let mut worst = f64::NEG_INFINITY;
    let mut check = |x: &DVector<f64>| {
        let s = x.iter().sum::<f64>().max(1e-300);
        let e = (c * x).iter().zip((ct * x).iter()).map(|(a, b)| (a.abs() - b) / s).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(e);
    };
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        check(&e);
    }
    for _ in 0..probes {
        check(&DVector::from_fn(n, |_, _| rng.gen::<f64>()));
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct WLemmaReport {
    /// Largest violation of each of the four inequalities over the λ samples
    /// (entrywise moduli and norms combined); ≤ slack means it holds.
    pub excess: [f64; 4],
    pub slack: f64,
}

impl WLemmaReport {
    pub fn holds(&self) -> bool {
        self.excess.iter().all(|e| *e <= self.slack)
    }
}

/// |CR(λ,A)| ≤ C̃R(λ,A), |R(λ,A₋₁)B| ≤ R(λ,A₋₁)B̃, |CR(λ,A₋₁)B| ≤ C̃R(λ,A₋₁)B̃
/// (entrywise and in norm) and r(CR(λ,A₋₁)B) ≤ r(C̃R(λ,A₋₁)B̃).
pub fn wlemma_inequality_check(triple: &TripleSpec, split: &DominatingSplit, lambdas: &[f64]) -> Result<WLemmaReport> {
    let tilde = split.dominating_triple(triple)?;
    let (x, u) = (triple.x_space(), triple.u_space());
    let mut excess = [f64::NEG_INFINITY; 4];
    let pair = |a: &DMatrix<f64>, b: &DMatrix<f64>, from: &GridSpace, to: &GridSpace| {
        let ent = a.iter().zip(b.iter()).map(|(p, q)| p.abs() - q).fold(f64::NEG_INFINITY, f64::max);
        let nrm = operator_norm(a, from, to).value() - operator_norm(b, from, to).value();
        ent.max(nrm)
    };
    for &l in lambdas {
        let ra = triple.model.resolvent(l)?;
        excess[0] = excess[0].max(pair(&(triple.c() * &ra), &(tilde.c() * &ra), x, u));
        let rb = triple.control.resolvent_applied(&triple.model, l)?;
        let rbt = tilde.control.resolvent_applied(&tilde.model, l)?;
        excess[1] = excess[1].max(pair(&rb, &rbt, u, x));
        let m = triple.c() * &rb;
        let mt = tilde.c() * &rbt;
        excess[2] = excess[2].max(pair(&m, &mt, u, u));
        excess[3] = excess[3].max(eigenvalues(&m).spectral_radius() - eigenvalues(&mt).spectral_radius());
    }
    Ok(WLemmaReport { excess, slack: 1e-8 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, tag: NormKind) -> TripleSpec {
        let s = Arc::new(GridSpace::unit(1, tag));
        let model = SemigroupModel::matrix_exp(&LinOp::on(DMatrix::from_element(1, 1, a), s.clone())).unwrap();
        let ctrl = RegularizedControl::from_bounded(&model, LinOp::on(DMatrix::from_element(1, 1, b), s.clone()), a.max(0.0) + 1.0).unwrap();
        TripleSpec::new(model, ctrl, LinOp::on(DMatrix::from_element(1, 1, c), s)).unwrap()
    }

    #[test]
    fn scalar_construction_matches_exponential() {
        for tag in [NormKind::Sup, NormKind::L1] {
            let kind = if tag == NormKind::Sup { TheoremKind::AM } else { TheoremKind::AL };
            let t = scalar(-2.0, 1.0, 1.0, tag);
            let s = construct_perturbed(&t, kind, TimeGrid::new(1e-3, 2.0), 1e-10).unwrap();
            assert!((s.eval(1.0).unwrap()[(0, 0)] - (-1f64).exp()).abs() < 1e-6);
            assert!(s.diagnostics.hypothesis.passed());
            assert!((s.diagnostics.r_feedback - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_observation_gives_unperturbed() {
        let t = scalar(-2.0, 1.0, 0.0, NormKind::Sup);
        let s = construct_perturbed(&t, TheoremKind::AM, TimeGrid::new(0.01, 1.0), 1e-10).unwrap();
        for (tt, m) in s.grid_iter() {
            assert!((m[(0, 0)] - (-2.0 * tt).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn growth_is_rescaled_away() {
        let t = scalar(0.5, 1.0, 0.3, NormKind::Sup);
        let s = construct_perturbed(&t, TheoremKind::AM, TimeGrid::new(1e-3, 1.0), 1e-10).unwrap();
        assert!((s.rescale_shift() - 1.5).abs() < 1e-15);
        assert!((s.eval(1.0).unwrap()[(0, 0)] - 0.8f64.exp()).abs() < 1e-6);
        // off-grid evaluation
        assert!((s.eval(0.6543).unwrap()[(0, 0)] - (0.8 * 0.6543f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn hypothesis_failures_are_reported() {
        let t = scalar(-2.0, 1.0, 1.0, NormKind::L1);
        assert!(matches!(construct_perturbed(&t, TheoremKind::AM, TimeGrid::new(0.01, 1.0), 1e-10), Err(Error::HypothesisFailed(_))));
        let t = scalar(-2.0, 1.0, 3.0, NormKind::Sup);
        assert!(matches!(construct_perturbed(&t, TheoremKind::AM, TimeGrid::new(0.01, 1.0), 1e-10), Err(Error::HypothesisFailed(_))));
        let t = scalar(-2.0, -1.0, 1.0, NormKind::Sup);
        assert!(!check_control_positivity(&t, &[0.0, 1.0]).unwrap().positive);
    }

    #[test]
    fn scalar_resolvent_factorization() {
        let t = scalar(-2.0, 1.0, 1.0, NormKind::Sup);
        let r = resolvent_factorization(&t, 1.0).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((resolvent_direct(&t, 1.0).unwrap()[(0, 0)] - 0.5).abs() < 1e-14);
        let f = feedback_spectral_radius(&t, 0.0).unwrap();
        assert!((f.value - 0.5).abs() < 1e-14);
        assert_eq!(f.monotone_ok, None);
        assert_eq!(feedback_spectral_radius(&t, 1.0).unwrap().monotone_ok, Some(true));
    }

    #[test]
    fn vp_residuals() {
        let t = scalar(-2.0, 1.0, 1.0, NormKind::Sup);
        let grid = TimeGrid::new(1e-3, 1.0);
        let s = construct_perturbed(&t, TheoremKind::AM, grid, 1e-10).unwrap();
        let x = DVector::from_element(1, 1.0);
        assert!(vp_residual(&s, &t, &x, 1.0).unwrap() <= 1e-8);
        let oracle = vp_residual_of(&t, |tt| Ok(DMatrix::from_element(1, 1, (-tt).exp())), &x, 1.0, grid).unwrap();
        assert!(oracle <= 1e-8, "{oracle}");
    }

    #[test]
    fn scalar_domination() {
        let t = scalar(-2.0, -1.0, 1.0, NormKind::Sup);
        let model = t.model.clone();
        let s = t.u_space().clone();
        let bp = RegularizedControl::from_bounded(&model, LinOp::on(DMatrix::zeros(1, 1), s.clone()), 1.0).unwrap();
        let bm = RegularizedControl::from_bounded(&model, LinOp::on(DMatrix::from_element(1, 1, 1.0), s), 1.0).unwrap();
        let split = DominatingSplit { b_plus: bp, b_minus: bm, c_tilde: DMatrix::from_element(1, 1, 1.0) };
        let pair = construct_dominated(&t, &split, TheoremKind::AM, TimeGrid::new(1e-3, 1.0), 1e-10, 1e-8).unwrap();
        assert!((pair.s.eval(1.0).unwrap()[(0, 0)] - (-3f64).exp()).abs() < 1e-12);
        assert!((pair.s_tilde.eval(1.0).unwrap()[(0, 0)] - (-1f64).exp()).abs() < 1e-6);
        assert!(pair.summary.resolvent_max_excess <= 1e-8);
        let w = wlemma_inequality_check(&t, &split, &[0.0, 1.0, 5.0]).unwrap();
        assert!(w.holds(), "{w:?}");
    }
}
