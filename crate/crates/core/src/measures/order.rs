use super::quantile::{merged_cells, quantile};
use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpStatus};
use crate::scalar::{Real, Scalar};

/// Relative band for convex-order decisions, scaled by [`convex_order_scale`].
pub const DEFAULT_CX_TOL: f64 = 1e-10;

/// Largest LP residual accepted as a martingale coupling.
const LP_RESIDUAL_TOL: f64 = 1e-8;

/// `max(1, E|X₁|, E|X₂|)`.
pub fn convex_order_scale<T: Scalar>(m1: &DiscreteMeasure<T>, m2: &DiscreteMeasure<T>) -> T {
    T::one().max_of(m1.first_moment()).max_of(m2.first_moment())
}

/// `m1 ≤cx m2` for one-dimensional measures with the default tolerance.
pub fn leq_cx_1d<T: Scalar>(m1: &DiscreteMeasure<T>, m2: &DiscreteMeasure<T>) -> Result<bool> {
    leq_cx_1d_tol(m1, m2, DEFAULT_CX_TOL)
}

/// Equal means and `∫_q^1 F₁⁻¹ ≤ ∫_q^1 F₂⁻¹` at every breakpoint, both up to `tol · scale`.
///
/// Exact scalars ignore `tol`.
pub fn leq_cx_1d_tol<T: Scalar>(
    m1: &DiscreteMeasure<T>,
    m2: &DiscreteMeasure<T>,
    tol: f64,
) -> Result<bool> {
    let band = T::tol(tol) * convex_order_scale(m1, m2);
    let cells = merged_cells(&quantile(m1)?, &quantile(m2)?);
    let (mut t1, mut t2) = (T::zero(), T::zero());
    for c in cells.iter().rev() {
        let w = c.hi.clone() - c.lo.clone();
        t1 = t1 + w.clone() * c.v1.clone();
        t2 = t2 + w * c.v2.clone();
        if t1 > t2.clone() + band.clone() {
            return Ok(false);
        }
    }
    Ok((t1 - t2).abs() <= band)
}

/// Linear system of martingale couplings between `m1` and `m2`, with zero cost.
pub fn martingale_feasibility_lp<T: Real>(
    m1: &DiscreteMeasure<T>,
    m2: &DiscreteMeasure<T>,
) -> Result<LpProblem<T>> {
    martingale_lp(m1, m2, &vec![T::zero(); m1.len() * m2.len()])
}

/// Martingale transport program `min Σ c_ij π_ij` over martingale couplings.
///
/// Variable `i·J + j` is the joint mass `π_ij`. Rows are the `I` row sums, the `J`
/// column sums and the `I·d` balance conditions `Σ_j π_ij (y_j − x_i) = 0`.
pub fn martingale_lp<T: Real>(
    m1: &DiscreteMeasure<T>,
    m2: &DiscreteMeasure<T>,
    cost: &[T],
) -> Result<LpProblem<T>> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            found: m2.dim(),
        });
    }
    let (ni, nj, d) = (m1.len(), m2.len(), m1.dim());
    if cost.len() != ni * nj {
        return Err(Error::DimensionMismatch {
            expected: ni * nj,
            found: cost.len(),
        });
    }
    let mut b = Vec::with_capacity(ni + nj + ni * d);
    b.extend_from_slice(m1.weights());
    b.extend_from_slice(m2.weights());
    b.extend(std::iter::repeat_n(T::zero(), ni * d));
    let mut p = LpProblem::new(b);
    for i in 0..ni {
        let x = m1.atom(i);
        for j in 0..nj {
            let y = m2.atom(j);
            let mut col = Vec::with_capacity(2 + d);
            col.push((i, T::one()));
            col.push((ni + j, T::one()));
            for k in 0..d {
                let v = y[k] - x[k];
                if v != T::zero() {
                    col.push((ni + nj + i * d + k, v));
                }
            }
            p.push_column(cost[i * nj + j], col)?;
        }
    }
    Ok(p)
}

/// Strassen test: `m1 ≤cx m2` iff a martingale coupling exists.
pub fn leq_cx_lp<T: Real>(m1: &DiscreteMeasure<T>, m2: &DiscreteMeasure<T>) -> Result<bool> {
    let problem = martingale_feasibility_lp(m1, m2)?;
    let sol = lp::solve(&problem)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.max_residual.to_f64_lossy() <= LP_RESIDUAL_TOL),
        LpStatus::Infeasible => Ok(false),
        status => Err(Error::Solver(format!(
            "feasibility LP ended with status {status:?}"
        ))),
    }
}
