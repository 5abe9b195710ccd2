//! Controllability, observability and input–output maps of a triple, the
//! Picard solver for (Id − 𝓕∞)v = f, Laplace transforms of sampled signals
//! and empirical admissibility bounds.

pub mod engine;
pub mod time_fn;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::NormKind;
use crate::operator::{matrix_power, operator_norm};
use crate::quadrature::exp_moment;
use crate::triple::TripleSpec;

pub use engine::{picard_cap, Engine, PicardOutcome, TimeRule};
pub use time_fn::{StepFunction, TimeGridFn, TimeNorm};

/// Input to the controllability map.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Step(&'a StepFunction),
    Grid(&'a TimeGridFn),
}

fn require_rescaled(triple: &TripleSpec) -> Result<()> {
    if triple.model.growth_bound() >= 0.0 {
        return Err(Error::NotRescaled(triple.model.growth_bound()));
    }
    Ok(())
}

fn check_u(triple: &TripleSpec, dim: usize) -> Result<()> {
    if dim != triple.u_space().dim() {
        return Err(Error::SpaceMismatch(format!("input has {dim} components, U has {}", triple.u_space().dim())));
    }
    Ok(())
}

/// ∫_{a}^{a+len} T₋₁(σ)B dσ, by telescoping for generator models.
fn integrated_control(triple: &TripleSpec, a: f64, len: f64) -> Result<DMatrix<f64>> {
    let model = &triple.model;
    if model.generator().is_some() {
        let g1 = triple.control.inv_generator_applied(model)?;
        return Ok((model.eval(a + len)? - model.eval(a)?) * g1);
    }
    Ok(model.moment(a, len, 0)? * triple.control.b_raw())
}

/// 𝓑ₜu = ∫₀ᵗ T₋₁(t − s)Bu(s) ds.
///
/// Step inputs use the exact telescoping sum Σ (T(t − t_{n−1}) − T(t − t_n))A₋₁⁻¹B uₙ.
/// Grid inputs are replaced by their midpoint step approximation first.
pub fn controllability_map(triple: &TripleSpec, u: Input<'_>, t: f64) -> Result<DVector<f64>> {
    require_rescaled(triple)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    match u {
        Input::Step(s) => {
            check_u(triple, s.space().dim())?;
            step_sum(triple, s, t)
        }
        Input::Grid(g) => {
            check_u(triple, g.space.dim())?;
            match g.uniform_step() {
                Some(_) => controllability_map_with(triple, g, t, TimeRule::StepMidpoint),
                None => step_sum(triple, &g.to_step_function(), t),
            }
        }
    }
}

fn step_sum(triple: &TripleSpec, s: &StepFunction, t: f64) -> Result<DVector<f64>> {
    let mut x = DVector::zeros(triple.x_space().dim());
    for (w, u) in s.breakpoints().windows(2).zip(s.values()) {
        if w[0] >= t {
            break;
        }
        let hi = w[1].min(t);
        // ∫_{w0}^{hi} T(t − s) ds = ∫_{t−hi}^{t−w0} T(σ) dσ
        x += integrated_control(triple, t - hi, hi - w[0])? * u;
    }
    Ok(x)
}

/// 𝓑ₜu for a uniformly sampled input with a chosen cell interpolation.
pub fn controllability_map_with(triple: &TripleSpec, u: &TimeGridFn, t: f64, rule: TimeRule) -> Result<DVector<f64>> {
    require_rescaled(triple)?;
    check_u(triple, u.space.dim())?;
    let h = u.uniform_step().ok_or_else(|| Error::InvalidArgument("input grid is not uniform".into()))?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let v: Vec<DMatrix<f64>> = u.values.iter().map(|x| DMatrix::from_column_slice(x.len(), 1, x.as_slice())).collect();
    let pos = t / h;
    let mut k = pos.floor() as usize;
    let mut tau = t - k as f64 * h;
    if tau > h * (1.0 - 1e-9) {
        k += 1;
        tau = 0.0;
    } else if tau < h * 1e-9 {
        tau = 0.0;
    }
    let last = u.len() - 1;
    let (k, tau) = if k > last { (last, t - last as f64 * h) } else { (k, tau) };
    let z_k = if k == 0 {
        DMatrix::zeros(triple.x_space().dim(), 1)
    } else {
        Engine::new(&triple.model, &triple.control, h, last, rule)?.state_at(k, &v)
    };
    let z = if tau > 0.0 {
        engine::partial_cell(&triple.model, &triple.control, &z_k, tau, h, &v[k], v.get(k + 1))?
    } else {
        z_k
    };
    Ok(z.column(0).into_owned())
}

/// s ↦ C T(s) x on the given times.
pub fn observability_map(triple: &TripleSpec, x: &DVector<f64>, times: &[f64]) -> Result<TimeGridFn> {
    let c = triple.c();
    let probe = TimeGridFn { times: times.to_vec(), values: vec![], space: triple.u_space().clone() };
    let values = match probe.uniform_step() {
        Some(h) => {
            let th = triple.model.eval(h)?;
            let mut y = x.clone();
            let mut out = Vec::with_capacity(times.len());
            for k in 0..times.len() {
                if k > 0 {
                    y = &th * y;
                }
                out.push(c * &y);
            }
            out
        }
        None => times.iter().map(|&t| Ok(c * (triple.model.eval(t)? * x))).collect::<Result<Vec<_>>>()?,
    };
    TimeGridFn::new(times.to_vec(), values, triple.u_space().clone())
}

/// An empirical quantity checked against its theoretical bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound + self.slack
    }
    pub fn excess(&self) -> f64 {
        self.empirical - self.bound
    }
    fn merge(&mut self, other: &BoundCheck) {
        if other.excess() > self.excess() {
            self.empirical = other.empirical;
            self.bound = other.bound;
        }
    }
}

/// ∫₀^∞ ‖C T(s) x‖ ds ≤ ‖C A⁻¹‖‖x‖ over positive probes, integrating to `horizon`
/// and adding the (nonnegative) remainder −C T(horizon) A⁻¹ x for AL-tagged U.
pub fn observability_l1_check(
    triple: &TripleSpec,
    probes: &[DVector<f64>],
    horizon: f64,
    step: f64,
    slack: f64,
) -> Result<BoundCheck> {
    let ca = triple.c_inv_a()?;
    let nrm = operator_norm(&ca, triple.x_space(), triple.u_space()).value();
    let times = TimeGridFn::uniform_times(horizon, step);
    let tail = triple.c() * triple.model.eval(*times.last().unwrap())? * triple.model.resolvent(0.0)?;
    let mut worst = BoundCheck { empirical: 0.0, bound: 0.0, slack };
    let mut first = true;
    for x in probes {
        let y = observability_map(triple, x, &times)?;
        let empirical = y.lp_norm(1.0) + triple.u_space().norm_of((&tail * x).as_slice());
        let bound = nrm * triple.x_space().norm_of(x.as_slice());
        let b = BoundCheck { empirical, bound, slack };
        if first {
            worst = b;
            first = false;
        } else {
            worst.merge(&b);
        }
    }
    Ok(worst)
}

/// (𝓕∞u)(t) = C 𝓑ₜ u on every sample time (midpoint step rule).
pub fn io_operator_apply(triple: &TripleSpec, u: &TimeGridFn) -> Result<TimeGridFn> {
    io_operator_apply_with(triple, u, TimeRule::StepMidpoint)
}

pub fn io_operator_apply_with(triple: &TripleSpec, u: &TimeGridFn, rule: TimeRule) -> Result<TimeGridFn> {
    require_rescaled(triple)?;
    check_u(triple, u.space.dim())?;
    let values: Vec<DVector<f64>> = match u.uniform_step() {
        Some(h) => {
            let engine = Engine::new(&triple.model, &triple.control, h, u.len() - 1, rule)?;
            let v = as_columns(&u.values);
            engine.observe(triple.c(), &v).into_iter().map(|m| m.column(0).into_owned()).collect()
        }
        None => {
            let s = u.to_step_function();
            u.times.iter().map(|&t| Ok(triple.c() * step_sum(triple, &s, t)?)).collect::<Result<Vec<_>>>()?
        }
    };
    TimeGridFn::new(u.times.clone(), values, u.space.clone())
}

fn as_columns(values: &[DVector<f64>]) -> Vec<DMatrix<f64>> {
    values.iter().map(|x| DMatrix::from_column_slice(x.len(), 1, x.as_slice())).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerBoundReport {
    pub norm: String,
    pub empirical: Vec<f64>,
    pub bounds: Vec<f64>,
    pub slack: f64,
}

impl PowerBoundReport {
    pub fn holds(&self) -> bool {
        self.empirical.iter().zip(&self.bounds).all(|(e, b)| *e <= b + self.slack)
    }
    pub fn max_excess(&self) -> f64 {
        self.empirical.iter().zip(&self.bounds).map(|(e, b)| e - b).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ‖(CA₋₁⁻¹B)ⁿ‖ for the given time norm: the U∞ bound for sup, the U₁ bound for
/// L¹, and ‖·‖_{U₁}^{1/p}‖·‖_{U∞}^{1−1/p} for Lᵖ.
pub fn io_power_bounds(triple: &TripleSpec, n_max: usize, norm: TimeNorm) -> Result<Vec<f64>> {
    let m = triple.c_inv_a_b()?;
    let u = triple.u_space();
    let u1 = u.with_norm(NormKind::L1);
    let ui = u.with_norm(NormKind::Sup);
    Ok((1..=n_max)
        .map(|n| {
            let mn = matrix_power(&m, n as u32);
            let v = operator_norm(&mn, &u1, &u1).value();
            let w = operator_norm(&mn, &ui, &ui).value();
            match norm {
                TimeNorm::Sup => w,
                TimeNorm::L1 => v,
                TimeNorm::Lp(p) => v.powf(1.0 / p) * w.powf(1.0 - 1.0 / p),
            }
        })
        .collect())
}

/// U-tag under which the time norm of a probe is measured.
fn u_tag(norm: TimeNorm) -> NormKind {
    match norm {
        TimeNorm::Sup => NormKind::Sup,
        TimeNorm::L1 => NormKind::L1,
        TimeNorm::Lp(p) => NormKind::Lp(p),
    }
}

/// Empirical ‖𝓕∞ⁿ‖ (sup of ‖𝓕∞ⁿu‖/‖u‖ over probes) against the matrix bounds.
pub fn io_power_bound_check(
    triple: &TripleSpec,
    n_max: usize,
    norm: TimeNorm,
    probes: &[TimeGridFn],
    slack: f64,
) -> Result<PowerBoundReport> {
    if n_max > 8 {
        return Err(Error::InvalidArgument("n_max must be at most 8".into()));
    }
    let bounds = io_power_bounds(triple, n_max, norm)?;
    let tagged = triple.with_u_norm(u_tag(norm));
    let mut empirical = vec![0.0f64; n_max];
    for u in probes {
        let mut w = u.with_space(tagged.u_space().clone())?;
        let base = w.time_norm(norm);
        if base == 0.0 {
            continue;
        }
        for e in empirical.iter_mut() {
            w = io_operator_apply(&tagged, &w)?;
            *e = e.max(w.time_norm(norm) / base);
        }
    }
    Ok(PowerBoundReport { norm: format!("{norm:?}"), empirical, bounds, slack })
}

/// Fixed point of v = f + 𝓕∞v on the uniform grid of `f`.
pub fn picard_resolve(triple: &TripleSpec, f: &TimeGridFn, tol: f64) -> Result<(TimeGridFn, PicardOutcome)> {
    picard_resolve_with(triple, f, tol, TimeRule::default_for(&triple.model))
}

pub fn picard_resolve_with(triple: &TripleSpec, f: &TimeGridFn, tol: f64, rule: TimeRule) -> Result<(TimeGridFn, PicardOutcome)> {
    require_rescaled(triple)?;
    check_u(triple, f.space.dim())?;
    let h = f.uniform_step().ok_or_else(|| Error::InvalidArgument("input grid is not uniform".into()))?;
    let engine = Engine::new(&triple.model, &triple.control, h, f.len() - 1, rule)?;
    let cap = picard_cap(triple.io_radius(), tol);
    let out = engine::picard(&engine, triple.c(), &as_columns(&f.values), tol, cap)?;
    let values = out.v.iter().map(|m| m.column(0).into_owned()).collect();
    Ok((TimeGridFn::new(f.times.clone(), values, f.space.clone())?, out))
}

/// Decay rate of ‖f‖ fitted on the last quarter of the samples.
pub fn tail_rate(f: &TimeGridFn) -> Option<f64> {
    let n = f.len();
    let start = n - (n / 4).max(2).min(n);
    let pts: Vec<(f64, f64)> = (start..n)
        .filter_map(|k| {
            let v = f.space.norm_of(f.values[k].as_slice());
            (v > 0.0).then(|| (f.times[k], v.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|(t, l)| (t - tm) * (l - lm)).sum();
    let den: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
    Some(num / den)
}

/// ∫₀^∞ e^{−λt} f(t) dt: exact integration of the piecewise linear interpolant
/// plus the tail f(T)e^{−λT}/(λ − rate) for an exponential continuation.
pub fn laplace_transform(f: &TimeGridFn, lambda: f64, rate: Option<f64>) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("Laplace transform needs λ > 0".into()));
    }
    let mut acc = DVector::zeros(f.space.dim());
    for k in 0..f.len() - 1 {
        let (t0, t1) = (f.times[k], f.times[k + 1]);
        let h = t1 - t0;
        let e = (-lambda * t0).exp();
        let (m0, m1) = (exp_moment(lambda, h, 0), exp_moment(lambda, h, 1));
        acc += (&f.values[k] * m0 + (&f.values[k + 1] - &f.values[k]) * (m1 / h)) * e;
    }
    let last = &f.values[f.len() - 1];
    if last.amax() > 0.0 {
        let r = match rate.or_else(|| tail_rate(f)) {
            Some(r) => r,
            None => return Err(Error::NonDecayingTail(f64::NAN)),
        };
        if r >= 0.0 {
            return Err(Error::NonDecayingTail(r));
        }
        acc += last * ((-lambda * f.end()).exp() / (lambda - r));
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceResidual {
    pub absolute: f64,
    pub relative: f64,
    pub picard_iterations: usize,
}

/// |𝓛((Id − 𝓕∞)⁻¹u)(λ) − (I − CR(λ,A₋₁)B)⁻¹û(λ)| in the U norm.
pub fn laplace_identity_residual(triple: &TripleSpec, u: &TimeGridFn, lambda: f64, tol: f64) -> Result<LaplaceResidual> {
    let (v, out) = picard_resolve(triple, u, tol)?;
    let lhs = laplace_transform(&v, lambda, None)?;
    let uhat = laplace_transform(u, lambda, None)?;
    let m = triple.u_space().dim();
    let k = DMatrix::identity(m, m) - triple.feedback_matrix(lambda)?;
    let rhs = k.lu().solve(&uhat).ok_or(Error::SingularResolvent { lambda, residual: f64::INFINITY })?;
    let norm = |x: &DVector<f64>| triple.u_space().norm_of(x.as_slice());
    let absolute = norm(&(&lhs - &rhs));
    let scale = norm(&rhs);
    Ok(LaplaceResidual {
        absolute,
        relative: if scale > 0.0 { absolute / scale } else { absolute },
        picard_iterations: out.iterations,
    })
}

/// C² bump (1 − ((t − c)/w)²)³ on |t − c| < w.
pub fn bump(t: f64, c: f64, w: f64) -> f64 {
    let z = (t - c) / w;
    if z.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - z * z).powi(3)
    }
}

/// Random combination of compactly supported C² bumps in (0, horizon), with
/// componentwise nonnegative or signed coefficients.
pub fn bump_probe<R: Rng>(times: &[f64], space: std::sync::Arc<crate::lattice::GridSpace>, signed: bool, rng: &mut R) -> TimeGridFn {
    let horizon = *times.last().unwrap();
    let m = space.dim();
    let count = rng.gen_range(1..=4);
    let bumps: Vec<(f64, f64, DVector<f64>)> = (0..count)
        .map(|_| {
            let w = horizon * rng.gen_range(0.05..0.3);
            let c = rng.gen_range(w..(horizon - w).max(w + 1e-9));
            let coef = DVector::from_fn(m, |_, _| if signed { rng.gen_range(-1.0..1.0) } else { rng.gen_range(0.0..1.0) });
            (c, w, coef)
        })
        .collect();
    let values = times
        .iter()
        .map(|&t| bumps.iter().fold(DVector::zeros(m), |acc, (c, w, a)| acc + a * bump(t, *c, *w)))
        .collect();
    TimeGridFn { times: times.to_vec(), values, space }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GridSpace;
    use crate::operator::LinOp;
    use crate::semigroup::{RegularizedControl, SemigroupModel};
    use std::sync::Arc;

    fn scalar(a: f64, b: f64, c: f64) -> TripleSpec {
        let s = Arc::new(GridSpace::unit(1, NormKind::Sup));
        let model = SemigroupModel::matrix_exp(&LinOp::on(DMatrix::from_element(1, 1, a), s.clone())).unwrap();
        let ctrl = RegularizedControl::from_bounded(&model, LinOp::on(DMatrix::from_element(1, 1, b), s.clone()), a.max(0.0) + 1.0).unwrap();
        TripleSpec::new(model, ctrl, LinOp::on(DMatrix::from_element(1, 1, c), s)).unwrap()
    }

    fn ones(times: &[f64]) -> TimeGridFn {
        TimeGridFn::from_fn(times.to_vec(), Arc::new(GridSpace::unit(1, NormKind::Sup)), |_| DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn controllability_scalar() {
        let t = scalar(-1.0, 1.0, 1.0);
        let s = StepFunction::new(vec![0.0, 1.0], vec![DVector::from_element(1, 1.0)], t.u_space().clone()).unwrap();
        let x = controllability_map(&t, Input::Step(&s), 1.0).unwrap();
        assert!((x[0] - (1.0 - (-1f64).exp())).abs() < 1e-14);
        let g = ones(&TimeGridFn::uniform_times(1.0, 0.01));
        let y = controllability_map(&t, Input::Grid(&g), 1.0).unwrap();
        assert!((y[0] - x[0]).abs() < 1e-13);
        let y = controllability_map(&t, Input::Grid(&g), 0.555).unwrap();
        assert!((y[0] - (1.0 - (-0.555f64).exp())).abs() < 1e-13);
        assert!(matches!(controllability_map(&scalar(1.0, 1.0, 1.0), Input::Step(&s), 1.0), Err(Error::NotRescaled(_))));
    }

    #[test]
    fn io_scalar_and_picard() {
        let t = scalar(-2.0, 1.0, 1.0);
        let g = ones(&TimeGridFn::uniform_times(4.0, 0.001));
        let y = io_operator_apply(&t, &g).unwrap();
        assert!((y.values[1000][0] - 0.5 * (1.0 - (-2f64).exp())).abs() < 1e-12);
        let (v, out) = picard_resolve(&t, &g, 1e-10).unwrap();
        assert!((v.values[1000][0] - (2.0 - (-1f64).exp())).abs() < 1e-8);
        assert!(out.residual <= 1e-9);
        assert!(out.iterations as f64 <= (1e-10f64).ln() / 0.5f64.ln() + 5.0, "{}", out.iterations);
    }

    #[test]
    fn laplace_examples() {
        let s = Arc::new(GridSpace::unit(1, NormKind::Sup));
        let times = TimeGridFn::uniform_times(20.0, 0.01);
        let f = TimeGridFn::from_fn(times.clone(), s.clone(), |t| DVector::from_element(1, (-t).exp())).unwrap();
        assert!((laplace_transform(&f, 1.0, None).unwrap()[0] - 0.5).abs() < 1e-4);
        let g = TimeGridFn::from_fn(times.clone(), s.clone(), |t| DVector::from_element(1, t * (-2.0 * t).exp())).unwrap();
        assert!((laplace_transform(&g, 0.5, None).unwrap()[0] - 0.16).abs() < 1e-3);
        let z = TimeGridFn::zeros(times.clone(), s.clone());
        assert_eq!(laplace_transform(&z, 1.0, None).unwrap()[0], 0.0);
        let grow = TimeGridFn::from_fn(times, s, |t| DVector::from_element(1, t.exp())).unwrap();
        assert!(matches!(laplace_transform(&grow, 2.0, None), Err(Error::NonDecayingTail(_))));
    }

    #[test]
    fn laplace_identity_scalar() {
        let t = scalar(-2.0, 1.0, 1.0);
        let times = TimeGridFn::uniform_times(30.0, 0.01);
        let u = TimeGridFn::from_fn(times, t.u_space().clone(), |s| DVector::from_element(1, (-s).exp())).unwrap();
        let r = laplace_identity_residual(&t, &u, 1.0, 1e-10).unwrap();
        assert!(r.relative < 1e-3, "{r:?}");
    }

    #[test]
    fn bumps_are_compact() {
        assert_eq!(bump(2.0, 1.0, 0.5), 0.0);
        assert_eq!(bump(1.0, 1.0, 0.5), 1.0);
    }
}
