//! Discretized Banach-lattice vectors.
//!
//! A [`GridSpace`] is a finite set of nodes with quadrature weights and a norm
//! kind. The cone is componentwise on node values for every kind, so lattice
//! operations are plain `max`/`min`/`abs` on the value arrays.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    Lp(f64),
    Sup,
}

impl NormKind {
    /// Exponent p, with `f64::INFINITY` for `Sup`.
    pub fn exponent(&self) -> f64 {
        match *self {
            NormKind::L1 => 1.0,
            NormKind::Lp(p) => p,
            NormKind::Sup => f64::INFINITY,
        }
    }

    pub fn from_exponent(p: f64) -> NormKind {
        if p.is_infinite() {
            NormKind::Sup
        } else if p == 1.0 {
            NormKind::L1
        } else {
            NormKind::Lp(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Trapezoid,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    norm: NormKind,
    interval: (f64, f64),
}

impl GridSpace {
    /// Builds a space from explicit nodes and weights.
    ///
    /// For L1/Lp kinds the weights must sum to the interval length.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, norm: NormKind, interval: (f64, f64)) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("nodes must be strictly ascending".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        if let NormKind::Lp(p) = norm {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("Lp exponent {p} must be finite and > 1")));
            }
        }
        if norm != NormKind::Sup {
            let total: f64 = weights.iter().sum();
            let len = interval.1 - interval.0;
            if (total - len).abs() > 1e-12 * len.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "weights sum to {total}, interval length is {len}"
                )));
            }
        }
        Ok(GridSpace { nodes, weights, norm, interval })
    }

    /// Uniform grid with `n` nodes: endpoints included for the trapezoid rule,
    /// cell centres for the midpoint rule.
    pub fn uniform(a: f64, b: f64, n: usize, norm: NormKind, rule: Quadrature) -> Self {
        match rule {
            Quadrature::Trapezoid => Self::trapezoid(a, b, n, norm),
            Quadrature::Midpoint => Self::cell_centred(a, b, n, norm),
        }
    }

    /// `n_nodes` equispaced nodes including both endpoints, trapezoid weights.
    pub fn trapezoid(a: f64, b: f64, n_nodes: usize, norm: NormKind) -> Self {
        assert!(n_nodes >= 2 && b > a);
        let h = (b - a) / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| a + h * i as f64).collect();
        nodes[n_nodes - 1] = b;
        let mut weights = vec![h; n_nodes];
        weights[0] = h / 2.0;
        weights[n_nodes - 1] = h / 2.0;
        GridSpace { nodes, weights, norm, interval: (a, b) }
    }

    /// Midpoint rule: `cells` nodes at cell centres, each weighted by the cell width.
    pub fn cell_centred(a: f64, b: f64, cells: usize, norm: NormKind) -> Self {
        assert!(cells >= 1 && b > a);
        let h = (b - a) / cells as f64;
        let nodes = (0..cells).map(|i| a + h * (i as f64 + 0.5)).collect();
        GridSpace { nodes, weights: vec![h; cells], norm, interval: (a, b) }
    }

    /// ℝᴺ with unit weights, as used for the finite-dimensional input spaces.
    pub fn unit(dim: usize, norm: NormKind) -> Self {
        assert!(dim >= 1);
        GridSpace {
            nodes: (0..dim).map(|i| i as f64).collect(),
            weights: vec![1.0; dim],
            norm,
            interval: (0.0, dim as f64),
        }
    }

    /// Same nodes and weights with a different norm kind.
    pub fn with_norm(&self, norm: NormKind) -> Self {
        GridSpace { norm, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }
    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Norm of a raw value array in this space.
    pub fn norm_of(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.dim());
        match self.norm {
            NormKind::Sup => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormKind::L1 => values.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum(),
            NormKind::Lp(p) => {
                // scale by the largest entry to avoid overflow for large p
                let m = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                let s: f64 = values
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| w * (v.abs() / m).powf(p))
                    .sum();
                m * s.powf(1.0 / p)
            }
        }
    }

    pub fn same_grid(&self, other: &GridSpace) -> bool {
        self.nodes == other.nodes && self.weights == other.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeVector {
    pub space: Arc<GridSpace>,
    pub values: DVector<f64>,
}

impl LatticeVector {
    pub fn new(space: Arc<GridSpace>, values: DVector<f64>) -> Self {
        assert_eq!(space.dim(), values.len(), "value length must match space dimension");
        LatticeVector { space, values }
    }

    pub fn zeros(space: Arc<GridSpace>) -> Self {
        let n = space.dim();
        LatticeVector { space, values: DVector::zeros(n) }
    }

    /// The AM unit (1, …, 1).
    pub fn ones(space: Arc<GridSpace>) -> Self {
        let n = space.dim();
        LatticeVector { space, values: DVector::from_element(n, 1.0) }
    }

    pub fn from_fn(space: Arc<GridSpace>, f: impl Fn(f64) -> f64) -> Self {
        let values = DVector::from_iterator(space.dim(), space.nodes().iter().map(|&x| f(x)));
        LatticeVector { space, values }
    }

    pub fn norm(&self) -> f64 {
        norm_eval(self)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> LatticeVector {
        LatticeVector { space: self.space.clone(), values: self.values.map(f) }
    }
}

/// Positive part, negative part and modulus.
pub fn lattice_decompose(x: &LatticeVector) -> (LatticeVector, LatticeVector, LatticeVector) {
    (x.map(|v| v.max(0.0)), x.map(|v| (-v).max(0.0)), x.map(f64::abs))
}

/// Componentwise supremum and infimum.
pub fn lattice_sup_inf(x: &LatticeVector, y: &LatticeVector) -> Result<(LatticeVector, LatticeVector)> {
    if *x.space != *y.space {
        return Err(Error::SpaceMismatch("sup/inf of vectors in different spaces".into()));
    }
    let sup = x.values.zip_map(&y.values, f64::max);
    let inf = x.values.zip_map(&y.values, f64::min);
    Ok((
        LatticeVector { space: x.space.clone(), values: sup },
        LatticeVector { space: x.space.clone(), values: inf },
    ))
}

pub fn norm_eval(x: &LatticeVector) -> f64 {
    x.space.norm_of(x.values.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxiomReport {
    pub al_residual: f64,
    pub am_residual: f64,
}

/// Randomized probe of the AL and AM axioms on nonnegative pairs.
///
/// Besides random pairs the probe always includes disjointly supported
/// coordinate vectors, which separate Lp from both AL and AM.
pub fn lattice_axiom_probe<R: Rng>(space: &Arc<GridSpace>, trials: usize, rng: &mut R) -> AxiomReport {
    assert!(trials >= 1);
    let n = space.dim();
    let mut al: f64 = 0.0;
    let mut am: f64 = 0.0;
    let mut update = |x: &LatticeVector, y: &LatticeVector| {
        let (sup, _) = lattice_sup_inf(x, y).expect("same space");
        let sum = LatticeVector::new(space.clone(), &x.values + &y.values);
        let (nx, ny) = (x.norm(), y.norm());
        al = al.max((sum.norm() - nx - ny).abs());
        am = am.max((sup.norm() - nx.max(ny)).abs());
    };
    if n >= 2 {
        let mut e0 = DVector::zeros(n);
        e0[0] = 1.0;
        let mut e1 = DVector::zeros(n);
        e1[n - 1] = 1.0;
        update(&LatticeVector::new(space.clone(), e0), &LatticeVector::new(space.clone(), e1));
    }
    for _ in 0..trials {
        let x = DVector::from_fn(n, |_, _| rng.gen::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.gen::<f64>());
        update(&LatticeVector::new(space.clone(), x), &LatticeVector::new(space.clone(), y));
    }
    AxiomReport { al_residual: al, am_residual: am }
}
