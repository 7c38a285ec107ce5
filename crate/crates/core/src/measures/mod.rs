//! Discrete probability measures and the one-dimensional quantile toolbox.
//!
//! A [`DiscreteMeasure`] is a finite list of weighted atoms in `R^d`.
//! Construction validates and canonicalizes the input: zero weights are
//! dropped, duplicate atoms are merged, weights are renormalized and, in
//! dimension one, atoms are sorted increasingly.

mod distance;
mod gaussian;
mod io;
mod order;
pub(crate) mod quantile;
mod sample;

pub use distance::{w2_vs_gaussian, w_rho_1d};
pub use gaussian::{normal_cdf, normal_pdf, normal_quantile};
pub use io::{read_measure, read_measure_from, write_measure, write_measure_to};
pub use order::{
    convex_order_scale, leq_cx_1d, leq_cx_1d_tol, leq_cx_lp, martingale_feasibility_lp,
    martingale_lp, DEFAULT_CX_TOL,
};
pub use quantile::{baker_discretize, quantile, GaussianQuantile, QuantileFn, QuantileSource};
pub use sample::{derive_seed, sample, NamedDistribution, Seed};

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

/// Inputs whose weights miss 1 by more than this are rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<T = f64> {
    dim: usize,
    coords: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Builds a measure from flat row-major coordinates (`weights.len() * dim` values).
    pub fn new(dim: usize, coords: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coords.len() != weights.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: weights.len() * dim,
                found: coords.len(),
            });
        }
        if !coords.iter().all(Scalar::is_finite_value) {
            return Err(Error::NonFinite("atom coordinates"));
        }
        if !weights.iter().all(Scalar::is_finite_value) {
            return Err(Error::NonFinite("weights"));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidWeights("negative weight".into()));
        }
        let total = sum(weights.iter().cloned());
        if total.is_zero() {
            return Err(Error::EmptyMeasure);
        }
        let total_f = total.to_f64_lossy();
        if (total_f - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total_f}, expected 1"
            )));
        }

        let keep: Vec<usize> = (0..weights.len())
            .filter(|&i| !weights[i].is_zero())
            .collect();
        let row = |i: usize| &coords[i * dim..(i + 1) * dim];
        let mut order = keep.clone();
        order.sort_by(|&a, &b| lex_cmp(row(a), row(b)).then(a.cmp(&b)));

        // groups of identical atoms, each tagged with its first index
        let mut groups: Vec<(usize, Vec<T>, T)> = Vec::new();
        for &i in &order {
            match groups.last_mut() {
                Some((_, atom, w)) if lex_cmp(atom, row(i)) == Ordering::Equal => {
                    *w = w.clone() + weights[i].clone();
                }
                _ => groups.push((i, row(i).to_vec(), weights[i].clone())),
            }
        }
        if dim > 1 {
            groups.sort_by_key(|g| g.0);
        }

        let total = sum(groups.iter().map(|g| g.2.clone()));
        let mut out_coords = Vec::with_capacity(groups.len() * dim);
        let mut out_weights = Vec::with_capacity(groups.len());
        for (_, atom, w) in groups {
            out_coords.extend(atom);
            out_weights.push(w / total.clone());
        }
        Ok(Self {
            dim,
            coords: out_coords,
            weights: out_weights,
        })
    }

    pub fn from_points(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptyMeasure)?;
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, points.into_iter().flatten().collect(), weights)
    }

    /// Empirical measure with weight `1/n` on each point.
    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::from_points(points, vec![w; n])
    }

    pub fn from_1d(xs: Vec<T>, weights: Vec<T>) -> Result<Self> {
        Self::new(1, xs, weights)
    }

    pub fn uniform_1d(xs: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(1, xs, vec![w; n])
    }

    pub fn dirac(point: Vec<T>) -> Result<Self> {
        Self::new(point.len(), point, vec![T::one()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Atoms of a one-dimensional measure are kept strictly increasing.
    pub fn is_sorted_1d(&self) -> bool {
        self.dim == 1
    }

    pub fn atom(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Sorted atoms of a one-dimensional measure.
    pub fn support_1d(&self) -> Result<&[T]> {
        self.require_1d()?;
        Ok(&self.coords)
    }

    pub fn require_1d(&self) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::NotOneDimensional(self.dim))
        }
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for (atom, w) in self.atoms().zip(&self.weights) {
            for (mk, xk) in m.iter_mut().zip(atom) {
                *mk = mk.clone() + w.clone() * xk.clone();
            }
        }
        m
    }

    /// `E[|X|_1]`, used to scale order and feasibility tolerances.
    pub fn first_moment(&self) -> T {
        sum(self
            .atoms()
            .zip(&self.weights)
            .map(|(a, w)| w.clone() * sum(a.iter().map(|x| x.abs()))))
    }

    /// Translates every atom by `delta`.
    pub fn shifted(&self, delta: &[T]) -> Result<Self> {
        if delta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: delta.len(),
            });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, x)| x.clone() + delta[k % self.dim].clone())
            .collect();
        Self::new(self.dim, coords, self.weights.clone())
    }

    pub fn cast<U: Scalar>(&self) -> DiscreteMeasure<U> {
        DiscreteMeasure {
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .map(|x| U::from_f64_lossy(x.to_f64_lossy()))
                .collect(),
            weights: self
                .weights
                .iter()
                .map(|w| U::from_f64_lossy(w.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Translates atoms so the weighted mean equals `target`.
///
/// The shift is applied twice so rounding in the first pass is corrected.
pub fn center_to_mean<T: Scalar>(
    m: &DiscreteMeasure<T>,
    target: &[T],
) -> Result<DiscreteMeasure<T>> {
    if target.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: target.len(),
        });
    }
    let mut out = m.clone();
    for _ in 0..2 {
        let mean = out.mean();
        let delta: Vec<T> = target
            .iter()
            .zip(&mean)
            .map(|(t, c)| t.clone() - c.clone())
            .collect();
        if delta.iter().all(|d| d.is_zero()) {
            break;
        }
        out = out.shifted(&delta)?;
    }
    Ok(out)
}

fn lex_cmp<T: PartialOrd>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) => continue,
            Some(o) => return o,
            None => return Ordering::Equal,
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn duplicates_are_merged_and_sorted() {
        let m = DiscreteMeasure::from_1d(vec![2.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.coords(), &[0.0, 2.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_weights_are_dropped() {
        let m = DiscreteMeasure::from_1d(vec![1.0, 5.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.coords(), &[1.0]);
    }

    #[test]
    fn rounding_is_renormalized_but_user_error_rejected() {
        let m = DiscreteMeasure::from_1d(vec![0.0, 1.0], vec![0.5, 0.5 + 1e-9]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let err = DiscreteMeasure::from_1d(vec![0.0, 1.0], vec![0.5, 0.6]).unwrap_err();
        assert!(matches!(err, Error::InvalidWeights(_)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            DiscreteMeasure::from_1d(vec![0.0, 1.0], vec![1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteMeasure::from_1d(vec![f64::NAN], vec![1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            DiscreteMeasure::from_points(vec![vec![0.0, 1.0], vec![1.0]], vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::<f64>::uniform_1d(vec![]),
            Err(Error::EmptyMeasure)
        ));
    }

    #[test]
    fn multidimensional_merge_keeps_first_occurrence_order() {
        let m = DiscreteMeasure::uniform(vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 3.0],
        ])
        .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.atom(0), &[1.0, 0.0]);
        assert_eq!(m.atom(1), &[-1.0, 0.0]);
        assert_eq!(m.weights()[0], 0.5);
    }

    #[test]
    fn centering() {
        let m = DiscreteMeasure::uniform_1d(vec![0.0, 2.0]).unwrap();
        let c = center_to_mean(&m, &[0.0]).unwrap();
        assert_eq!(c.coords(), &[-1.0, 1.0]);
        let again = center_to_mean(&c, &[0.0]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn exact_rationals_sum_to_one() {
        let third = BigRational::new(1.into(), 3.into());
        let m = DiscreteMeasure::uniform_1d(vec![
            third.clone(),
            third.clone() * BigRational::from_integer(2.into()),
        ])
        .unwrap();
        let total: BigRational = m.weights().iter().cloned().sum();
        assert_eq!(total, BigRational::from_integer(1.into()));
    }
}
