use super::gaussian::{normal_pdf, normal_quantile};
use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

/// Cumulative weights closer than this are treated as the same breakpoint.
pub(crate) const MERGE_TOL: f64 = 1e-14;

/// Left-continuous step quantile function: `values[k]` on `(P_k, P_{k+1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFn<T = f64> {
    breakpoints: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> QuantileFn<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidParameter(
                "quantile needs K values and K+1 breakpoints".into(),
            ));
        }
        if !breakpoints[0].is_zero() || !breakpoints[values.len()].is_one() {
            return Err(Error::InvalidParameter(
                "breakpoints must run from 0 to 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must strictly increase".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(
                "quantile values must be non-decreasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index `k` of the cell `(P_k, P_{k+1}]` containing `p`; `p ≤ 0` maps to the first cell.
    pub fn cell_of(&self, p: &T) -> usize {
        let k = self.breakpoints[1..].partition_point(|b| b < p);
        k.min(self.values.len() - 1)
    }

    /// `inf{x : F(x) ≥ p}`.
    pub fn eval(&self, p: &T) -> T {
        self.values[self.cell_of(p)].clone()
    }

    /// `∫_a^b F⁻¹(p) dp` for `0 ≤ a ≤ b ≤ 1`.
    pub fn integral(&self, a: &T, b: &T) -> T {
        if a >= b {
            return T::zero();
        }
        let mut acc = T::zero();
        let mut k = self.cell_of(a);
        while k < self.values.len() && &self.breakpoints[k] < b {
            let lo = self.breakpoints[k].clone().max_of(a.clone());
            let hi = self.breakpoints[k + 1].clone().min_of(b.clone());
            if hi > lo {
                acc = acc + (hi - lo) * self.values[k].clone();
            }
            k += 1;
        }
        acc
    }

    pub fn mean(&self) -> T {
        sum(self
            .values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| (w[1].clone() - w[0].clone()) * v.clone()))
    }

    /// The measure whose quantile function this is.
    pub fn to_measure(&self) -> Result<DiscreteMeasure<T>> {
        let weights = self
            .breakpoints
            .windows(2)
            .map(|w| w[1].clone() - w[0].clone())
            .collect();
        DiscreteMeasure::new(1, self.values.clone(), weights)
    }
}

/// Quantile function of a one-dimensional measure.
pub fn quantile<T: Scalar>(m: &DiscreteMeasure<T>) -> Result<QuantileFn<T>> {
    let xs = m.support_1d()?;
    let mut breakpoints = Vec::with_capacity(xs.len() + 1);
    breakpoints.push(T::zero());
    let mut acc = T::zero();
    for w in m.weights() {
        acc = acc + w.clone();
        breakpoints.push(acc.clone());
    }
    *breakpoints.last_mut().expect("non-empty") = T::one();
    Ok(QuantileFn {
        breakpoints,
        values: xs.to_vec(),
    })
}

/// One cell of the common refinement of two quantile functions.
#[derive(Clone, Debug)]
pub(crate) struct Cell<T> {
    pub lo: T,
    pub hi: T,
    pub v1: T,
    pub v2: T,
}

/// Common refinement of the breakpoint sets of `a` and `b`.
pub(crate) fn merged_cells<T: Scalar>(a: &QuantileFn<T>, b: &QuantileFn<T>) -> Vec<Cell<T>> {
    let tol = T::tol(MERGE_TOL);
    let (mut i, mut j) = (0, 0);
    let mut lo = T::zero();
    let mut cells = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        let pa = &a.breakpoints[i + 1];
        let pb = &b.breakpoints[j + 1];
        let (hi, step_a, step_b) = if (pa.clone() - pb.clone()).abs() <= tol {
            (pa.clone().max_of(pb.clone()), true, true)
        } else if pa < pb {
            (pa.clone(), true, false)
        } else {
            (pb.clone(), false, true)
        };
        if hi > lo {
            cells.push(Cell {
                lo: lo.clone(),
                hi: hi.clone(),
                v1: a.values[i].clone(),
                v2: b.values[j].clone(),
            });
        }
        lo = hi;
        i += usize::from(step_a);
        j += usize::from(step_b);
    }
    cells
}

/// A quantile function that can be integrated over probability cells.
pub trait QuantileSource<T: Scalar> {
    /// `∫_a^b F⁻¹(p) dp` for `0 ≤ a < b ≤ 1`.
    fn cell_integral(&self, a: &T, b: &T) -> T;
}

impl<T: Scalar> QuantileSource<T> for QuantileFn<T> {
    fn cell_integral(&self, a: &T, b: &T) -> T {
        self.integral(a, b)
    }
}

/// Quantile function of the centered normal law `N(0, σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianQuantile {
    sigma: f64,
}

impl GaussianQuantile {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self {
            sigma: sigma2.sqrt(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.sigma * normal_quantile(p)
    }
}

impl QuantileSource<f64> for GaussianQuantile {
    fn cell_integral(&self, a: &f64, b: &f64) -> f64 {
        self.sigma * (normal_pdf(normal_quantile(*a)) - normal_pdf(normal_quantile(*b)))
    }
}

/// Uniform `n`-atom measure whose atoms are the cell averages `n ∫_{(i-1)/n}^{i/n} F⁻¹`.
pub fn baker_discretize<T, Q>(q: &Q, n: usize) -> Result<DiscreteMeasure<T>>
where
    T: Scalar,
    Q: QuantileSource<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParameter(
            "discretization size must be positive".into(),
        ));
    }
    let nt = T::from_usize_lossy(n);
    let grid: Vec<T> = (0..=n)
        .map(|i| T::from_usize_lossy(i) / nt.clone())
        .collect();
    let atoms = grid
        .windows(2)
        .map(|w| nt.clone() * q.cell_integral(&w[0], &w[1]))
        .collect();
    DiscreteMeasure::uniform_1d(atoms)
}
