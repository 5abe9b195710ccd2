//! Evaluators t ↦ T(t): matrix exponentials, exact nilpotent shifts on a
//! uniform grid, and a spectral model of the 1D Dirichlet heat semigroup.

pub mod expm;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::GridSpace;
use crate::operator::{eigenvalues, max_abs, operator_norm, resolvent_matrix, LinOp};
use crate::quadrature::{exp_moment, gl10};

pub use expm::expm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    MatrixExp,
    NilpotentLeftShift,
    NilpotentRightShift,
    Heat1D { mode_count: usize },
}

#[derive(Debug, Clone)]
struct HeatBasis {
    /// Sampled sine modes, one per column.
    phi: DMatrix<f64>,
    /// Left inverse of `phi` in the weighted inner product.
    psi: DMatrix<f64>,
    /// (kπ/L)² for each retained mode.
    rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SemigroupModel {
    kind: ModelKind,
    space: Arc<GridSpace>,
    /// Current (rescaled) generator where one exists.
    generator: Option<DMatrix<f64>>,
    growth_bound: f64,
    rescale_shift: f64,
    spacing: f64,
    heat: Option<HeatBasis>,
}

const SNAP: f64 = 1e-10;

impl SemigroupModel {
    pub fn matrix_exp(a: &LinOp) -> Result<Self> {
        if !a.is_square() || !a.domain.same_grid(&a.codomain) {
            return Err(Error::SpaceMismatch("generator must act on a single space".into()));
        }
        let growth_bound = eigenvalues(&a.matrix).abscissa();
        Ok(SemigroupModel {
            kind: ModelKind::MatrixExp,
            space: a.domain.clone(),
            generator: Some(a.matrix.clone()),
            growth_bound,
            rescale_shift: 0.0,
            spacing: f64::NAN,
            heat: None,
        })
    }

    /// (T(t)f)(x) = f(x + t), zero once x + t leaves the interval.
    /// The grid must be uniform and include the right endpoint.
    pub fn left_shift(space: Arc<GridSpace>) -> Result<Self> {
        let spacing = uniform_spacing(&space)?;
        if (space.nodes()[space.dim() - 1] - space.interval().1).abs() > 1e-12 {
            return Err(Error::InvalidArgument("left shift grid must end at the right endpoint".into()));
        }
        Ok(Self::shift(ModelKind::NilpotentLeftShift, space, spacing))
    }

    /// (T(t)f)(x) = f(x − t), zero once x − t leaves the interval.
    /// The grid must be uniform and exclude the left endpoint, where f vanishes.
    pub fn right_shift(space: Arc<GridSpace>) -> Result<Self> {
        let spacing = uniform_spacing(&space)?;
        if (space.nodes()[0] - space.interval().0 - spacing).abs() > 1e-9 * spacing.max(1.0) {
            return Err(Error::InvalidArgument(
                "right shift grid must start one spacing after the left endpoint".into(),
            ));
        }
        Ok(Self::shift(ModelKind::NilpotentRightShift, space, spacing))
    }

    fn shift(kind: ModelKind, space: Arc<GridSpace>, spacing: f64) -> Self {
        SemigroupModel {
            kind,
            space,
            generator: None,
            growth_bound: f64::NEG_INFINITY,
            rescale_shift: 0.0,
            spacing,
            heat: None,
        }
    }

    /// Dirichlet heat semigroup on the interval of `space`, spectrally: the
    /// first min(mode_count, dim) sine modes with continuum decay rates.
    pub fn heat(space: Arc<GridSpace>, mode_count: usize) -> Result<Self> {
        let n = space.dim();
        let k_max = mode_count.min(n);
        if k_max == 0 {
            return Err(Error::InvalidArgument("heat model needs at least one mode".into()));
        }
        let (a, b) = space.interval();
        let len = b - a;
        let phi = DMatrix::from_fn(n, k_max, |i, k| {
            ((k + 1) as f64 * std::f64::consts::PI * (space.nodes()[i] - a) / len).sin()
        });
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(space.weights()));
        let gram = phi.transpose() * &w * &phi;
        let psi = gram
            .lu()
            .solve(&(phi.transpose() * &w))
            .ok_or_else(|| Error::InvalidArgument("sine modes are degenerate on this grid".into()))?;
        let rates: Vec<f64> = (1..=k_max).map(|k| (k as f64 * std::f64::consts::PI / len).powi(2)).collect();
        let generator = (k_max == n).then(|| &phi * DMatrix::from_diagonal(&DVector::from_iterator(k_max, rates.iter().map(|r| -r))) * &psi);
        Ok(SemigroupModel {
            kind: ModelKind::Heat1D { mode_count },
            space,
            generator,
            growth_bound: -rates[0],
            rescale_shift: 0.0,
            spacing: f64::NAN,
            heat: Some(HeatBasis { phi, psi, rates }),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
    pub fn growth_bound(&self) -> f64 {
        self.growth_bound
    }
    pub fn rescale_shift(&self) -> f64 {
        self.rescale_shift
    }
    /// The generator matrix, for models that are matrix exponentials.
    pub fn generator(&self) -> Option<&DMatrix<f64>> {
        self.generator.as_ref()
    }
    /// Node spacing of the shift models.
    pub fn node_spacing(&self) -> Option<f64> {
        matches!(self.kind, ModelKind::NilpotentLeftShift | ModelKind::NilpotentRightShift).then_some(self.spacing)
    }
    /// (Φ, Ψ, decay rates including the rescaling) for the spectral heat model.
    pub(crate) fn modal(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>, Vec<f64>)> {
        self.heat.as_ref().map(|h| (&h.phi, &h.psi, h.rates.iter().map(|r| r + self.rescale_shift).collect()))
    }

    pub fn is_shift(&self) -> bool {
        self.node_spacing().is_some()
    }

    /// Model for A − μI.
    pub fn rescale(&self, mu: f64) -> SemigroupModel {
        let mut m = self.clone();
        if let Some(g) = m.generator.as_mut() {
            for i in 0..g.nrows() {
                g[(i, i)] -= mu;
            }
        }
        m.growth_bound -= mu;
        m.rescale_shift += mu;
        m
    }

    /// Same model with the state space retagged (identical nodes and weights).
    pub fn on_space(&self, space: Arc<GridSpace>) -> Result<SemigroupModel> {
        if !space.same_grid(&self.space) {
            return Err(Error::EmbeddingMismatch("retagging requires identical grids".into()));
        }
        let mut m = self.clone();
        m.space = space;
        Ok(m)
    }

    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let n = self.dim();
        if t == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        Ok(match self.kind {
            ModelKind::MatrixExp => expm(&(self.generator.as_ref().unwrap() * t)),
            ModelKind::NilpotentLeftShift | ModelKind::NilpotentRightShift => {
                self.shift_matrix(t) * (-self.rescale_shift * t).exp()
            }
            ModelKind::Heat1D { .. } => {
                let h = self.heat.as_ref().unwrap();
                let d = DVector::from_iterator(h.rates.len(), h.rates.iter().map(|r| (-(r + self.rescale_shift) * t).exp()));
                &h.phi * DMatrix::from_diagonal(&d) * &h.psi
            }
        })
    }

    pub fn eval_op(&self, t: f64) -> Result<LinOp> {
        Ok(LinOp::on(self.eval(t)?, self.space.clone()))
    }

    /// Splits t/h into an integer part and a fraction, snapping near-integers.
    fn cell_of(&self, t: f64) -> (usize, f64) {
        let s = t / self.spacing;
        let mut k = s.floor();
        let mut theta = s - k;
        if theta > 1.0 - SNAP {
            k += 1.0;
            theta = 0.0;
        } else if theta < SNAP {
            theta = 0.0;
        }
        (k as usize, theta)
    }

    fn shift_matrix(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let (k, theta) = self.cell_of(t);
        if k >= n {
            return m;
        }
        match self.kind {
            ModelKind::NilpotentLeftShift => {
                let last = n - 1;
                for i in 0..n {
                    if theta == 0.0 {
                        if i + k <= last {
                            m[(i, i + k)] = 1.0;
                        }
                    } else if i + k < last {
                        m[(i, i + k)] = 1.0 - theta;
                        m[(i, i + k + 1)] = theta;
                    }
                }
            }
            _ => {
                // node number p = i + 1; the implicit node 0 carries the value 0
                for i in 0..n {
                    if i >= k {
                        m[(i, i - k)] = if theta == 0.0 { 1.0 } else { 1.0 - theta };
                        if theta > 0.0 && i > k {
                            m[(i, i - k - 1)] = theta;
                        }
                    }
                }
            }
        }
        m
    }

    /// ∫_{σ0}^{σ0+len} T(σ) e^{−cσ} (σ − σ0)ʲ dσ for the shift models, integrating
    /// the cellwise linear-in-σ entries exactly up to the Gauss rule.
    fn shift_moment(&self, sigma0: f64, len: f64, j: usize, extra_rate: f64) -> DMatrix<f64> {
        let n = self.dim();
        let dx = self.spacing;
        let rate = self.rescale_shift + extra_rate;
        let mut m = DMatrix::zeros(n, n);
        let sigma1 = sigma0 + len;
        let k_first = (sigma0 / dx).floor().max(0.0) as usize;
        let (x, w) = gl10();
        let mut k = k_first;
        while k < n && (k as f64) * dx < sigma1 {
            let lo = sigma0.max(k as f64 * dx);
            let hi = sigma1.min((k + 1) as f64 * dx);
            if hi > lo {
                let panels = ((rate.abs() * (hi - lo)).ceil() as usize).max(1);
                let ph = (hi - lo) / panels as f64;
                let (mut alpha, mut beta) = (0.0, 0.0);
                for p in 0..panels {
                    let c = lo + ph * (p as f64 + 0.5);
                    for (xi, wi) in x.iter().zip(w) {
                        let s = c + 0.5 * ph * xi;
                        let theta = s / dx - k as f64;
                        let f = 0.5 * ph * wi * (-rate * s).exp() * (s - sigma0).powi(j as i32);
                        alpha += (1.0 - theta) * f;
                        beta += theta * f;
                    }
                }
                match self.kind {
                    ModelKind::NilpotentLeftShift => {
                        for i in 0..n.saturating_sub(k + 1) {
                            m[(i, i + k)] += alpha;
                            m[(i, i + k + 1)] += beta;
                        }
                    }
                    _ => {
                        for i in k..n {
                            m[(i, i - k)] += alpha;
                            if i > k {
                                m[(i, i - k - 1)] += beta;
                            }
                        }
                    }
                }
            }
            k += 1;
        }
        m
    }

    /// ∫_{σ0}^{σ0+len} T(σ) (σ − σ0)ʲ dσ, for j ≤ 2.
    pub fn moment(&self, sigma0: f64, len: f64, j: usize) -> Result<DMatrix<f64>> {
        if !(sigma0 >= 0.0) || !(len >= 0.0) {
            return Err(Error::NegativeTime(sigma0.min(len)));
        }
        Ok(match self.kind {
            ModelKind::NilpotentLeftShift | ModelKind::NilpotentRightShift => self.shift_moment(sigma0, len, j, 0.0),
            ModelKind::Heat1D { .. } => {
                let h = self.heat.as_ref().unwrap();
                let d = DVector::from_iterator(
                    h.rates.len(),
                    h.rates.iter().map(|r| {
                        let a = r + self.rescale_shift;
                        (-a * sigma0).exp() * exp_moment(a, len, j)
                    }),
                );
                &h.phi * DMatrix::from_diagonal(&d) * &h.psi
            }
            ModelKind::MatrixExp => {
                let a = self.generator.as_ref().unwrap();
                let nrm = a.iter().map(|v| v.abs()).sum::<f64>();
                let panels = ((nrm * len).ceil() as usize).max(1);
                let (x, w) = gl10();
                let ph = len / panels as f64;
                let base = self.eval(sigma0)?;
                let mut acc = DMatrix::zeros(self.dim(), self.dim());
                for p in 0..panels {
                    let c = ph * (p as f64 + 0.5);
                    for (xi, wi) in x.iter().zip(w) {
                        let s = c + 0.5 * ph * xi;
                        acc += expm(&(a * s)) * (0.5 * ph * wi * s.powi(j as i32));
                    }
                }
                base * acc
            }
        })
    }

    /// R(λ, A) as the Laplace transform of T(·); for matrix models this is (λ − A)⁻¹.
    pub fn resolvent(&self, lambda: f64) -> Result<DMatrix<f64>> {
        match self.kind {
            ModelKind::MatrixExp => resolvent_matrix(self.generator.as_ref().unwrap(), lambda),
            ModelKind::Heat1D { .. } => {
                let h = self.heat.as_ref().unwrap();
                let mut d = DVector::zeros(h.rates.len());
                for (k, r) in h.rates.iter().enumerate() {
                    let den = lambda + r + self.rescale_shift;
                    if den.abs() < 1e-300 {
                        return Err(Error::SingularResolvent { lambda, residual: f64::INFINITY });
                    }
                    d[k] = 1.0 / den;
                }
                Ok(&h.phi * DMatrix::from_diagonal(&d) * &h.psi)
            }
            _ => {
                let support = self.dim() as f64 * self.spacing;
                Ok(self.shift_moment(0.0, support, 0, lambda))
            }
        }
    }
}

fn uniform_spacing(space: &GridSpace) -> Result<f64> {
    let x = space.nodes();
    if x.len() < 2 {
        return Err(Error::InvalidArgument("shift grids need at least two nodes".into()));
    }
    let h = x[1] - x[0];
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidArgument("shift grids must be uniform".into()));
    }
    Ok(h)
}

/// Control operator in regularized form, B_reg = R(λ₀, A₋₁)B, together with the
/// discrete action of B itself.
///
/// For generator models B = (λ₀ − A)·B_reg. Shift models have no generator
/// matrix; there B is given directly as a bounded map into the host grid and
/// B_reg = R(λ₀)B.
#[derive(Debug, Clone)]
pub struct RegularizedControl {
    pub b_reg: LinOp,
    pub lambda0: f64,
    b_raw: DMatrix<f64>,
}

impl RegularizedControl {
    pub fn from_regularized(model: &SemigroupModel, b_reg: LinOp, lambda0: f64) -> Result<Self> {
        check_lambda0(model, lambda0)?;
        let a = model.generator().ok_or_else(|| {
            Error::InvalidArgument("model has no generator matrix; supply the control via from_bounded".into())
        })?;
        check_codomain(model, &b_reg)?;
        let n = model.dim();
        let b_raw = (DMatrix::identity(n, n) * lambda0 - a) * &b_reg.matrix;
        Ok(RegularizedControl { b_reg, lambda0, b_raw })
    }

    /// From the unregularized action B: U → X (bounded at the discrete level).
    pub fn from_bounded(model: &SemigroupModel, b: LinOp, lambda0: f64) -> Result<Self> {
        check_lambda0(model, lambda0)?;
        check_codomain(model, &b)?;
        let b_reg = b.with_matrix(model.resolvent(lambda0)? * &b.matrix);
        Ok(RegularizedControl { b_reg, lambda0, b_raw: b.matrix })
    }

    pub fn u_dim(&self) -> usize {
        self.b_reg.matrix.ncols()
    }

    /// Discrete action of B (into X₋₁ coordinates identified with X).
    pub fn b_raw(&self) -> &DMatrix<f64> {
        &self.b_raw
    }

    /// R(λ, A₋₁)B.
    pub fn resolvent_applied(&self, model: &SemigroupModel, lambda: f64) -> Result<DMatrix<f64>> {
        if model.generator().is_some() {
            // R(λ)B = B_reg + (λ₀ − λ) R(λ) B_reg
            let r = model.resolvent(lambda)?;
            return Ok(&self.b_reg.matrix + (r * &self.b_reg.matrix) * (self.lambda0 - lambda));
        }
        Ok(model.resolvent(lambda)? * &self.b_raw)
    }

    /// A₋₁⁻¹B = −R(0, A₋₁)B; requires a negative growth bound.
    pub fn inv_generator_applied(&self, model: &SemigroupModel) -> Result<DMatrix<f64>> {
        if model.growth_bound() >= 0.0 {
            return Err(Error::NotRescaled(model.growth_bound()));
        }
        Ok(-self.resolvent_applied(model, 0.0)?)
    }

    /// B₁ + B₂ (both regularized at the same λ₀).
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if (self.lambda0 - other.lambda0).abs() > 1e-12 * self.lambda0.abs().max(1.0) {
            return Err(Error::InvalidArgument("controls regularized at different λ₀".into()));
        }
        Ok(RegularizedControl {
            b_reg: self.b_reg.with_matrix(&self.b_reg.matrix + &other.b_reg.matrix),
            lambda0: self.lambda0,
            b_raw: &self.b_raw + &other.b_raw,
        })
    }

    /// Control for the model rescaled by μ: B and B_reg are unchanged, λ₀ moves.
    pub fn rescaled(&self, mu: f64) -> Self {
        RegularizedControl { b_reg: self.b_reg.clone(), lambda0: self.lambda0 - mu, b_raw: self.b_raw.clone() }
    }

    /// ∫_{σ0}^{σ0+len} T(σ)(σ − σ0)ʲ dσ · B for j = 0, 1, 2.
    ///
    /// Matrix models use the telescoping identities
    /// ∫₀^ℓ T = (T(ℓ) − I)A⁻¹ and integration by parts, applied to A⁻ᵏB
    /// computed from B_reg; no extrapolated matrix is applied.
    pub fn moments(&self, model: &SemigroupModel, sigma0: f64, len: f64) -> Result<[DMatrix<f64>; 3]> {
        match model.kind() {
            ModelKind::MatrixExp => {
                let kernel = TelescopingKernel::new(model, self)?;
                kernel.moments(model, sigma0, len)
            }
            _ => Ok([
                model.moment(sigma0, len, 0)? * &self.b_raw,
                model.moment(sigma0, len, 1)? * &self.b_raw,
                model.moment(sigma0, len, 2)? * &self.b_raw,
            ]),
        }
    }
}

fn check_lambda0(model: &SemigroupModel, lambda0: f64) -> Result<()> {
    if !(lambda0 > model.growth_bound()) {
        return Err(Error::InvalidArgument(format!(
            "lambda0={lambda0} must exceed the growth bound {}",
            model.growth_bound()
        )));
    }
    Ok(())
}

fn check_codomain(model: &SemigroupModel, b: &LinOp) -> Result<()> {
    if !b.codomain.same_grid(model.space()) {
        return Err(Error::SpaceMismatch("control must map into the state grid".into()));
    }
    Ok(())
}

/// Precomputed A⁻ᵏB, k = 1, 2, 3, for telescoping moments of matrix models.
/// Intervals with ‖A‖ℓ < 1/2 use the power series instead, where the
/// telescoping differences would cancel.
#[derive(Debug, Clone)]
pub struct TelescopingKernel {
    g: [DMatrix<f64>; 3],
    a: DMatrix<f64>,
    a_norm: f64,
    b: DMatrix<f64>,
}

impl TelescopingKernel {
    pub fn new(model: &SemigroupModel, control: &RegularizedControl) -> Result<Self> {
        let g1 = control.inv_generator_applied(model)?;
        let a = model.generator().expect("matrix model");
        let lu = a.clone().lu();
        let g2 = lu.solve(&g1).ok_or(Error::NotRescaled(model.growth_bound()))?;
        let g3 = lu.solve(&g2).ok_or(Error::NotRescaled(model.growth_bound()))?;
        let a_norm = a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Ok(TelescopingKernel { g: [g1, g2, g3], a: a.clone(), a_norm, b: control.b_raw().clone() })
    }

    fn series(&self, len: f64) -> [DMatrix<f64>; 3] {
        // Σ_m A^m ℓ^{m+j+1} / (m! (m+j+1)) B
        let mut out = [self.b.clone() * 0.0, self.b.clone() * 0.0, self.b.clone() * 0.0];
        let mut term = self.b.clone();
        let mut scale = 1.0;
        for m in 0..40 {
            for (j, o) in out.iter_mut().enumerate() {
                *o += &term * (scale * len.powi(j as i32 + 1) / (m + j + 1) as f64);
            }
            scale *= len / (m + 1) as f64;
            if scale * self.a_norm.powi(m as i32 + 1) < 1e-18 {
                break;
            }
            term = &self.a * term;
        }
        out
    }

    pub fn moments(&self, model: &SemigroupModel, sigma0: f64, len: f64) -> Result<[DMatrix<f64>; 3]> {
        if self.a_norm * len < 0.5 {
            let out = self.series(len);
            if sigma0 == 0.0 {
                return Ok(out);
            }
            let base = model.eval(sigma0)?;
            return Ok(out.map(|m| &base * m));
        }
        let n = model.dim();
        let tl = model.eval(len)?;
        let tm_i = &tl - DMatrix::<f64>::identity(n, n);
        let [g1, g2, g3] = &self.g;
        let j0 = &tm_i * g1;
        let j1 = &tl * g1 * len - &tm_i * g2;
        let j2 = &tl * g1 * (len * len) - (&tl * g2 * len - &tm_i * g3) * 2.0;
        if sigma0 == 0.0 {
            return Ok([j0, j1, j2]);
        }
        let base = model.eval(sigma0)?;
        Ok([&base * j0, &base * j1, &base * j2])
    }
}

/// Least-squares slope of log‖T(t)‖ on `samples` points of (0, horizon],
/// combined with the spectral abscissa for matrix models.
pub fn growth_bound_estimate(model: &SemigroupModel, horizon: f64, samples: usize) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let samples = samples.max(2);
    let mut ts = Vec::with_capacity(samples);
    let mut logs = Vec::with_capacity(samples);
    for i in 1..=samples {
        let t = horizon * i as f64 / samples as f64;
        let nrm = operator_norm(&model.eval(t)?, model.space(), model.space()).value();
        if nrm == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ts.push(t);
        logs.push(nrm.ln());
    }
    let tm = ts.iter().sum::<f64>() / ts.len() as f64;
    let lm = logs.iter().sum::<f64>() / logs.len() as f64;
    let num: f64 = ts.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let den: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = num / den;
    Ok(match model.generator() {
        Some(a) if model.kind() == ModelKind::MatrixExp => slope.max(eigenvalues(a).abscissa()),
        _ => slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub resolvent_residual: f64,
    pub semigroup_residual: f64,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        self.resolvent_residual.max(self.semigroup_residual)
    }
}

/// Checks that the coarse model is the restriction of the fine one: coarse
/// vectors are embedded by linear interpolation (node values injected at the
/// shared nodes), the fine operator applied, and the result sampled back.
pub fn subspace_consistency_check(
    fine: &SemigroupModel,
    coarse: &SemigroupModel,
    lambdas: &[f64],
    times: &[f64],
    probes: &[DVector<f64>],
) -> Result<ConsistencyReport> {
    let (xf, xc) = (fine.space().nodes(), coarse.space().nodes());
    if fine.space().interval() != coarse.space().interval() {
        return Err(Error::EmbeddingMismatch("different intervals".into()));
    }
    let mut inject = Vec::with_capacity(xc.len());
    for &x in xc {
        match xf.iter().position(|&y| (y - x).abs() <= 1e-12 * (1.0 + x.abs())) {
            Some(k) => inject.push(k),
            None => return Err(Error::EmbeddingMismatch(format!("coarse node {x} is not a fine node"))),
        }
    }
    let embed = |v: &DVector<f64>| {
        DVector::from_iterator(
            xf.len(),
            xf.iter().map(|&y| {
                let k = xc.partition_point(|&c| c <= y);
                if k == 0 {
                    v[0]
                } else if k == xc.len() {
                    v[xc.len() - 1]
                } else {
                    let th = (y - xc[k - 1]) / (xc[k] - xc[k - 1]);
                    (1.0 - th) * v[k - 1] + th * v[k]
                }
            }),
        )
    };
    let compare = |f_op: &DMatrix<f64>, c_op: &DMatrix<f64>| {
        probes.iter().fold(0.0f64, |acc, v| {
            let fine_out = f_op * embed(v);
            let coarse_out = c_op * v;
            let r = inject.iter().zip(coarse_out.iter()).fold(0.0f64, |m, (&k, c)| m.max((fine_out[k] - c).abs()));
            acc.max(r)
        })
    };
    let mut resolvent_residual: f64 = 0.0;
    for &l in lambdas {
        resolvent_residual = resolvent_residual.max(compare(&fine.resolvent(l)?, &coarse.resolvent(l)?));
    }
    let mut semigroup_residual: f64 = 0.0;
    for &t in times {
        semigroup_residual = semigroup_residual.max(compare(&fine.eval(t)?, &coarse.eval(t)?));
    }
    Ok(ConsistencyReport { resolvent_residual, semigroup_residual })
}

/// Random probe vectors with entries in [−1, 1].
pub fn random_probes<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count).map(|_| DVector::from_fn(dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0)).collect()
}

/// ‖T(t+s) − T(t)T(s)‖ (max entry) over all pairs from `times`.
pub fn semigroup_law_defect(model: &SemigroupModel, times: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let tt = model.eval(t)?;
        for &s in times {
            let d = model.eval(t + s)? - &tt * model.eval(s)?;
            worst = worst.max(max_abs(&d));
        }
    }
    Ok(worst)
}
