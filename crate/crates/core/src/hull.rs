//! Continuous piecewise-linear functions on `[0, 1]` and their convex and
//! concave hulls.
//!
//! Hull vertices of a piecewise-linear function are among its nodes, so the
//! hulls are computed on the node list alone with Andrew's monotone chain.
//! Turn tests use cross products, never slopes, so tiny probability cells do
//! not lose precision to division.

use crate::error::{Error, Result};
use crate::measures::QuantileFn;
use crate::scalar::Scalar;

/// Relative tolerance of the collinearity test in the monotone chain.
const TURN_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear<T = f64> {
    nodes: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> PiecewiseLinear<T> {
    /// Nodes must strictly increase from 0 to 1.
    pub fn new(nodes: Vec<T>, values: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidParameter(
                "piecewise-linear function needs matching node and value lists of length ≥ 2"
                    .into(),
            ));
        }
        if !nodes[0].is_zero() || !nodes[nodes.len() - 1].is_one() {
            return Err(Error::InvalidParameter("nodes must run from 0 to 1".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "nodes must strictly increase".into(),
            ));
        }
        if !values.iter().all(Scalar::is_finite_value) {
            return Err(Error::NonFinite("piecewise-linear values"));
        }
        Ok(Self { nodes, values })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index `k` of the segment `[q_k, q_{k+1}]` with `q_k < q ≤ q_{k+1}`; `q ≤ 0` maps to 0.
    fn segment_of(&self, q: &T) -> usize {
        let k = self.nodes[1..].partition_point(|n| n < q);
        k.min(self.nodes.len() - 2)
    }

    /// Linear interpolation; constant extrapolation outside `[0, 1]`.
    pub fn eval(&self, q: &T) -> T {
        if q <= &self.nodes[0] {
            return self.values[0].clone();
        }
        let last = self.nodes.len() - 1;
        if q >= &self.nodes[last] {
            return self.values[last].clone();
        }
        let k = self.segment_of(q);
        let (q0, q1) = (&self.nodes[k], &self.nodes[k + 1]);
        let (v0, v1) = (&self.values[k], &self.values[k + 1]);
        v0.clone()
            + (v1.clone() - v0.clone()) * (q.clone() - q0.clone()) / (q1.clone() - q0.clone())
    }

    /// Slope of segment `k`.
    pub fn slope(&self, k: usize) -> T {
        (self.values[k + 1].clone() - self.values[k].clone())
            / (self.nodes[k + 1].clone() - self.nodes[k].clone())
    }

    pub fn slopes(&self) -> Vec<T> {
        (0..self.nodes.len() - 1).map(|k| self.slope(k)).collect()
    }

    /// Slope of the segment immediately left of `q ∈ (0, 1]`.
    pub fn left_derivative(&self, q: &T) -> Result<T> {
        if q <= &T::zero() || q > &T::one() {
            return Err(Error::InvalidParameter(format!(
                "left derivative needs q in (0, 1], got {:?}",
                q
            )));
        }
        Ok(self.slope(self.segment_of(q)))
    }

    pub fn negated(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| -v.clone()).collect(),
        }
    }

    /// `max(1, max |f|)`.
    pub fn scale(&self) -> T {
        self.values
            .iter()
            .fold(T::one(), |acc, v| acc.max_of(v.abs()))
    }

    /// `∫_0^1 |f′|^ρ`.
    pub fn derivative_power_integral(&self, rho: f64) -> f64 {
        (0..self.nodes.len() - 1)
            .map(|k| {
                let width = (self.nodes[k + 1].clone() - self.nodes[k].clone()).to_f64_lossy();
                width * self.slope(k).to_f64_lossy().abs().powf(rho)
            })
            .sum()
    }
}

/// `q ↦ ∫_0^q (F_μ⁻¹ − F_ν⁻¹)`, exact on the union of both breakpoint sets.
pub fn integrated_quantile_diff<T: Scalar>(
    qm: &QuantileFn<T>,
    qn: &QuantileFn<T>,
) -> PiecewiseLinear<T> {
    let cells = crate::measures::quantile::merged_cells(qm, qn);
    let mut nodes = Vec::with_capacity(cells.len() + 1);
    let mut values = Vec::with_capacity(cells.len() + 1);
    nodes.push(T::zero());
    values.push(T::zero());
    let mut acc = T::zero();
    for c in cells {
        acc = acc + (c.hi.clone() - c.lo) * (c.v1 - c.v2);
        nodes.push(c.hi);
        values.push(acc.clone());
    }
    *nodes.last_mut().expect("non-empty") = T::one();
    PiecewiseLinear { nodes, values }
}

/// Largest convex minorant; collinear nodes are dropped.
pub fn convex_hull<T: Scalar>(f: &PiecewiseLinear<T>) -> PiecewiseLinear<T> {
    let tol = T::tol(TURN_TOL) * f.scale();
    let mut hull: Vec<usize> = Vec::with_capacity(f.nodes.len());
    for k in 0..f.nodes.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if cross(f, a, b, k) > tol {
                break;
            }
            hull.pop();
        }
        hull.push(k);
    }
    PiecewiseLinear {
        nodes: hull.iter().map(|&k| f.nodes[k].clone()).collect(),
        values: hull.iter().map(|&k| f.values[k].clone()).collect(),
    }
}

/// Smallest concave majorant, `−convex_hull(−f)`.
pub fn concave_hull<T: Scalar>(f: &PiecewiseLinear<T>) -> PiecewiseLinear<T> {
    convex_hull(&f.negated()).negated()
}

/// Positive iff `a → b → c` turns left (strictly convex from below).
fn cross<T: Scalar>(f: &PiecewiseLinear<T>, a: usize, b: usize, c: usize) -> T {
    let (qa, qb, qc) = (&f.nodes[a], &f.nodes[b], &f.nodes[c]);
    let (va, vb, vc) = (&f.values[a], &f.values[b], &f.values[c]);
    (qb.clone() - qa.clone()) * (vc.clone() - va.clone())
        - (vb.clone() - va.clone()) * (qc.clone() - qa.clone())
}
