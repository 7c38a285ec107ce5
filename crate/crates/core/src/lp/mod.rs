//! Linear programming in standard equality form `min cᵀx, Ax = b, x ≥ 0`.
//!
//! [`solve`] is a two-phase revised simplex method with an explicit basis
//! inverse. Columns are stored sparsely because every program built in this
//! crate (transport and martingale constraints) has a handful of nonzeros per
//! column; the basis inverse itself is dense.
//!
//! [`ot_plan`] solves transportation problems with the network form of the
//! same method, which is much faster than the general code and can be
//! warm-started through [`TransportSolver`].

mod simplex;
mod transport;

pub use simplex::solve;
pub use transport::{cost_matrix, ot_plan, CostMatrix, Coupling, StartRule, TransportSolver};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem<T = f64> {
    b: Vec<T>,
    cost: Vec<T>,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> LpProblem<T> {
    /// Program with right-hand side `b` and no columns yet.
    pub fn new(b: Vec<T>) -> Self {
        Self {
            b,
            cost: Vec::new(),
            col_start: vec![0],
            row_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds a program from a dense row-major constraint matrix.
    pub fn from_dense(c: Vec<T>, a: &[Vec<T>], b: Vec<T>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                found: a.len(),
            });
        }
        if let Some(row) = a.iter().find(|r| r.len() != c.len()) {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                found: row.len(),
            });
        }
        let mut p = Self::new(b);
        for (j, cj) in c.into_iter().enumerate() {
            let col = a
                .iter()
                .enumerate()
                .filter(|(_, row)| row[j] != T::zero())
                .map(|(r, row)| (r, row[j]))
                .collect();
            p.push_column(cj, col)?;
        }
        Ok(p)
    }

    /// Appends a variable with cost `cost` and nonzero entries `(row, value)`; returns its index.
    pub fn push_column(&mut self, cost: T, entries: Vec<(usize, T)>) -> Result<usize> {
        if !cost.is_finite() {
            return Err(Error::NonFinite("objective coefficients"));
        }
        for &(r, v) in &entries {
            if r >= self.b.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.b.len(),
                    found: r + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("constraint matrix"));
            }
        }
        for (r, v) in entries {
            self.row_idx.push(r);
            self.vals.push(v);
        }
        self.cost.push(cost);
        self.col_start.push(self.row_idx.len());
        Ok(self.cost.len() - 1)
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn rhs(&self) -> &[T] {
        &self.b
    }

    pub fn costs(&self) -> &[T] {
        &self.cost
    }

    /// Nonzero entries `(row, value)` of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// `Ax`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut ax = vec![T::zero(); self.b.len()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                for (r, v) in self.column(j) {
                    ax[r] = ax[r] + v * xj;
                }
            }
        }
        ax
    }

    /// `‖Ax − b‖∞`.
    pub fn residual(&self, x: &[T]) -> T {
        self.apply(x)
            .iter()
            .zip(&self.b)
            .fold(T::zero(), |acc, (ax, b)| acc.max((*ax - *b).abs()))
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.cost
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (c, x)| acc + *c * *x)
    }

    fn validate(&self) -> Result<()> {
        if self.b.is_empty() {
            return Err(Error::InvalidParameter(
                "linear program has no constraints".into(),
            ));
        }
        if !self.b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T = f64> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    /// Row multipliers `y` with reduced costs `c − Aᵀy ≥ 0` at an optimum.
    pub duals: Vec<T>,
    /// `‖Ax − b‖∞`.
    pub max_residual: T,
    pub iterations: usize,
}
