//! The (A, B, C) triple: a semigroup model, a regularized control operator
//! and an observation operator, plus the compositions the theorems use.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpace, NormKind};
use crate::operator::{eigenvalues, LinOp};
use crate::semigroup::{RegularizedControl, SemigroupModel};

/// Discrete stand-in for membership in the intermediate space Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ZRule {
    /// Z = X.
    All,
    /// sup |f(xᵢ)| / xᵢ^{α−1} ≤ bound over the nodes.
    BoundedScaledValues { alpha: f64, bound: f64 },
    /// Z = C[0,1]; every grid vector qualifies.
    ContinuousProxy,
}

impl ZRule {
    pub fn name(&self) -> &'static str {
        match self {
            ZRule::All => "all",
            ZRule::BoundedScaledValues { .. } => "bounded-scaled-values",
            ZRule::ContinuousProxy => "continuous-proxy",
        }
    }

    pub fn admits(&self, space: &GridSpace, v: &DVector<f64>) -> bool {
        match *self {
            ZRule::All | ZRule::ContinuousProxy => v.iter().all(|x| x.is_finite()),
            ZRule::BoundedScaledValues { alpha, bound } => space
                .nodes()
                .iter()
                .zip(v.iter())
                .all(|(x, f)| *x > 0.0 && (f.abs() / x.powf(alpha - 1.0)) <= bound),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TripleSpec {
    pub model: SemigroupModel,
    pub control: RegularizedControl,
    /// C: X → U, defined on the discrete domain proxy.
    pub observation: LinOp,
    pub z_rule: ZRule,
}

impl TripleSpec {
    pub fn new(model: SemigroupModel, control: RegularizedControl, observation: LinOp) -> Result<Self> {
        if !observation.domain.same_grid(model.space()) {
            return Err(Error::SpaceMismatch("observation must act on the state grid".into()));
        }
        if !observation.codomain.same_grid(&control.b_reg.domain) {
            return Err(Error::SpaceMismatch("observation must map into the control space".into()));
        }
        Ok(TripleSpec { model, control, observation, z_rule: ZRule::All })
    }

    pub fn with_z_rule(mut self, z: ZRule) -> Self {
        self.z_rule = z;
        self
    }

    pub fn lambda0(&self) -> f64 {
        self.control.lambda0
    }
    pub fn u_space(&self) -> &Arc<GridSpace> {
        &self.control.b_reg.domain
    }
    pub fn x_space(&self) -> &Arc<GridSpace> {
        self.model.space()
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.observation.matrix
    }

    /// Same triple with U carrying a different norm tag.
    pub fn with_u_norm(&self, norm: NormKind) -> TripleSpec {
        let u = Arc::new(self.u_space().with_norm(norm));
        let mut t = self.clone();
        t.control.b_reg.domain = u.clone();
        t.observation.codomain = u;
        t
    }

    pub fn with_observation(&self, c: DMatrix<f64>) -> TripleSpec {
        let mut t = self.clone();
        t.observation = t.observation.with_matrix(c);
        t
    }

    /// Triple for A − μI with the same B and C.
    pub fn rescaled(&self, mu: f64) -> TripleSpec {
        TripleSpec {
            model: self.model.rescale(mu),
            control: self.control.rescaled(mu),
            observation: self.observation.clone(),
            z_rule: self.z_rule,
        }
    }

    /// 0 when the growth bound is already negative, growth + 1 otherwise.
    pub fn hypothesis_point(&self) -> f64 {
        let g = self.model.growth_bound();
        if g < 0.0 {
            0.0
        } else {
            g + 1.0
        }
    }

    /// C·R(λ, A₋₁)B on U.
    pub fn feedback_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        Ok(self.c() * self.control.resolvent_applied(&self.model, lambda)?)
    }

    /// C·A₋₁⁻¹B (needs a negative growth bound).
    pub fn c_inv_a_b(&self) -> Result<DMatrix<f64>> {
        Ok(self.c() * self.control.inv_generator_applied(&self.model)?)
    }

    /// C·A⁻¹ = −C·R(0, A) (needs a negative growth bound).
    pub fn c_inv_a(&self) -> Result<DMatrix<f64>> {
        if self.model.growth_bound() >= 0.0 {
            return Err(Error::NotRescaled(self.model.growth_bound()));
        }
        Ok(-(self.c() * self.model.resolvent(0.0)?))
    }

    /// A + B·C at the discrete level, for models with a generator matrix.
    pub fn closed_loop(&self) -> Option<DMatrix<f64>> {
        self.model.generator().map(|a| a + self.control.b_raw() * self.c())
    }

    /// Whether every column of B_reg passes the Z predicate.
    pub fn compatible(&self) -> bool {
        let b = &self.control.b_reg.matrix;
        (0..b.ncols()).all(|j| self.z_rule.admits(self.x_space(), &b.column(j).into_owned()))
    }

    /// r(C A₋₁⁻¹ B) on the rescaled triple (0 when it is undefined).
    pub(crate) fn io_radius(&self) -> f64 {
        self.c_inv_a_b().map(|m| eigenvalues(&m).spectral_radius()).unwrap_or(f64::NAN)
    }
}
