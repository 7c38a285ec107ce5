use super::{LpProblem, LpSolution, LpStatus};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;
/// Minimum pivots between refactorizations of the basis inverse; the interval
/// grows with the row count so the cubic refactor stays amortized.
const REFACTOR_EVERY: usize = 64;
/// Rounds of refactor, dual repair and primal reoptimization after phase 2.
const CLEANUP_ROUNDS: usize = 10;

/// Solves `min cᵀx, Ax = b, x ≥ 0` by the two-phase revised simplex method.
///
/// Rows with `b_r < 0` are negated internally; duals are reported for the
/// original rows. Numerical breakdown of the basis is an error, distinct from
/// the infeasible and unbounded statuses.
pub fn solve<T: Real>(p: &LpProblem<T>) -> Result<LpSolution<T>> {
    p.validate()?;
    let mut s = Simplex::new(p);

    let phase1 = s.run(Phase::One)?;
    if phase1 == LpStatus::IterationLimit {
        return Ok(s.solution(LpStatus::IterationLimit));
    }
    let infeasibility = s
        .basis
        .iter()
        .zip(&s.xb)
        .filter(|(&j, _)| j >= s.n)
        .fold(T::zero(), |acc, (_, &x)| acc + x.max(T::zero()));
    if infeasibility > s.feas_tol {
        return Ok(s.solution(LpStatus::Infeasible));
    }
    s.drive_out_artificials()?;

    let mut phase2 = s.run(Phase::Two)?;
    if phase2 == LpStatus::Optimal {
        phase2 = s.cleanup()?;
    }
    Ok(s.solution(phase2))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a, T> {
    p: &'a LpProblem<T>,
    m: usize,
    n: usize,
    sign: Vec<T>,
    b: Vec<T>,
    /// Variable in each basis position; `n + r` is the artificial of row `r`.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<T>,
    xb: Vec<T>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
    refactor_every: usize,
    degenerate_run: usize,
    feas_tol: T,
    opt_tol: T,
    piv_tol: T,
}

impl<'a, T: Real> Simplex<'a, T> {
    fn new(p: &'a LpProblem<T>) -> Self {
        let (m, n) = (p.num_rows(), p.num_cols());
        let sign: Vec<T> = p
            .rhs()
            .iter()
            .map(|&v| if v < T::zero() { -T::one() } else { T::one() })
            .collect();
        let b: Vec<T> = p.rhs().iter().zip(&sign).map(|(&v, &s)| v * s).collect();
        let bmax = b.iter().fold(T::one(), |acc, &v| acc.max(v));
        let cmax = p.costs().iter().fold(T::one(), |acc, &v| acc.max(v.abs()));
        let mut binv = vec![T::zero(); m * m];
        for r in 0..m {
            binv[r * m + r] = T::one();
        }
        let mut is_basic = vec![false; n + m];
        is_basic[n..].iter_mut().for_each(|b| *b = true);
        let size = (m + n) as u128;
        Self {
            p,
            m,
            n,
            sign,
            xb: b.clone(),
            b,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            iterations: 0,
            max_iterations: usize::try_from(10 * size * size).unwrap_or(usize::MAX),
            since_refactor: 0,
            refactor_every: REFACTOR_EVERY.max(m),
            degenerate_run: 0,
            feas_tol: T::c(1e-9) * bmax,
            opt_tol: T::c(1e-9) * cmax,
            piv_tol: T::c(1e-9),
        }
    }

    /// Column `j` in the sign-adjusted system.
    fn column(&self, j: usize) -> Vec<(usize, T)> {
        if j >= self.n {
            vec![(j - self.n, T::one())]
        } else {
            self.p
                .column(j)
                .map(|(r, v)| (r, v * self.sign[r]))
                .collect()
        }
    }

    fn cost(&self, phase: Phase, j: usize) -> T {
        match (phase, j >= self.n) {
            (Phase::One, true) => T::one(),
            (Phase::One, false) => T::zero(),
            (Phase::Two, true) => T::zero(),
            (Phase::Two, false) => self.p.costs()[j],
        }
    }

    /// `yᵀ = c_Bᵀ B⁻¹`.
    fn prices(&self, phase: Phase) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.cost(phase, j);
            if c != T::zero() {
                for (yr, &bk) in y.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *yr = *yr + c * bk;
                }
            }
        }
        y
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let col = self.column(j);
        (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                col.iter().fold(T::zero(), |acc, &(r, v)| acc + row[r] * v)
            })
            .collect()
    }

    /// `yᵀ a_j` without materializing the column.
    fn dot_column(&self, y: &[T], j: usize) -> T {
        if j >= self.n {
            return y[j - self.n];
        }
        self.p
            .column(j)
            .fold(T::zero(), |acc, (r, v)| acc + y[r] * v * self.sign[r])
    }

    fn reduced_cost(&self, phase: Phase, y: &[T], j: usize) -> T {
        self.cost(phase, j) - self.dot_column(y, j)
    }

    fn choose_entering(&self, phase: Phase, y: &[T]) -> Option<(usize, T)> {
        let bland = self.degenerate_run >= BLAND_AFTER;
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.n {
            if self.is_basic[j] {
                continue;
            }
            let d = self.reduced_cost(phase, y, j);
            if d < -self.opt_tol {
                if bland {
                    return Some((j, d));
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best
    }

    /// Leaving position for direction `w`, or `None` when the ray is unbounded.
    ///
    /// Harris two-pass test: the ratio bound is relaxed by `feas_tol`, then the
    /// largest pivot within the bound is taken, trading tiny infeasibilities for
    /// well-conditioned bases.
    fn choose_leaving(&self, phase: Phase, w: &[T]) -> Option<usize> {
        let wmax = w.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
        // basic artificials on non-redundant rows must stay at zero, so they leave first;
        // on redundant rows `w` is pure rounding noise and they stay
        let stuck = (0..self.m)
            .filter(|&k| {
                phase == Phase::Two && self.basis[k] >= self.n && w[k].abs() > T::c(1e-7) * wmax
            })
            .max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).expect("finite"));
        if stuck.is_some() {
            return stuck;
        }
        let tol = self.piv_tol * wmax;
        let eligible = |k: &usize| w[*k] > tol;
        let bound = (0..self.m)
            .filter(eligible)
            .map(|k| (self.xb[k].max(T::zero()) + self.feas_tol) / w[k])
            .fold(T::infinity(), |a, b| a.min(b));
        if !bound.is_finite() {
            return None;
        }
        if self.degenerate_run >= BLAND_AFTER {
            let theta = (0..self.m)
                .filter(eligible)
                .map(|k| self.xb[k].max(T::zero()) / w[k])
                .fold(T::infinity(), |a, b| a.min(b));
            let slack = T::c(1e-12) * (T::one() + theta);
            return (0..self.m)
                .filter(|k| eligible(k) && self.xb[*k].max(T::zero()) / w[*k] <= theta + slack)
                .min_by_key(|&k| self.basis[k]);
        }
        (0..self.m)
            .filter(|k| eligible(k) && self.xb[*k].max(T::zero()) / w[*k] <= bound)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).expect("finite"))
    }

    /// Basis exchange with a step that treats a slightly negative leaving value as
    /// zero; the shift this introduces is removed by `cleanup`.
    fn pivot(&mut self, entering: usize, r: usize, w: &[T]) -> Result<()> {
        let theta = self.xb[r].max(T::zero()) / w[r];
        self.pivot_with_step(entering, r, w, theta)
    }

    fn pivot_with_step(&mut self, entering: usize, r: usize, w: &[T], theta: T) -> Result<()> {
        let m = self.m;
        let wr = w[r];
        if wr.abs() <= T::c(1e-14) {
            return Err(Error::Solver("pivot element vanished".into()));
        }
        for k in 0..m {
            if k != r {
                self.xb[k] = self.xb[k] - theta * w[k];
            }
        }
        self.xb[r] = theta;

        let pivot_row: Vec<T> = self.binv[r * m..(r + 1) * m]
            .iter()
            .map(|&v| v / wr)
            .collect();
        for k in 0..m {
            if k == r || w[k] == T::zero() {
                continue;
            }
            let f = w[k];
            let row = &mut self.binv[k * m..(k + 1) * m];
            for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                *x = *x - f * pv;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);

        self.is_basic[self.basis[r]] = false;
        self.is_basic[entering] = true;
        self.basis[r] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
        if theta.abs() <= T::c(1e-14) {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        if self.since_refactor >= self.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes `B⁻¹` by Gauss–Jordan elimination with partial pivoting, then `x_B = B⁻¹ b`.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![T::zero(); m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![T::zero(); m * m];
        for r in 0..m {
            inv[r * m + r] = T::one();
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| {
                    a[x * m + col]
                        .abs()
                        .partial_cmp(&a[y * m + col].abs())
                        .expect("finite")
                })
                .expect("non-empty range");
            if a[piv * m + col].abs() <= T::c(1e-13) {
                return Err(Error::Solver("basis matrix became singular".into()));
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            // columns left of `col` are already unit vectors in `a`
            let d = a[col * m + col];
            for c in col..m {
                a[col * m + c] = a[col * m + c] / d;
            }
            for c in 0..m {
                inv[col * m + c] = inv[col * m + c] / d;
            }
            let pivot_a = a[col * m..(col + 1) * m].to_vec();
            let pivot_inv = inv[col * m..(col + 1) * m].to_vec();
            let nz: Vec<usize> = (col + 1..m).filter(|&c| pivot_a[c] != T::zero()).collect();
            let nz_inv: Vec<usize> = (0..m).filter(|&c| pivot_inv[c] != T::zero()).collect();
            for r in 0..m {
                let f = a[r * m + col];
                if r == col || f == T::zero() {
                    continue;
                }
                a[r * m + col] = T::zero();
                for &c in &nz {
                    a[r * m + c] = a[r * m + c] - f * pivot_a[c];
                }
                for &c in &nz_inv {
                    inv[r * m + c] = inv[r * m + c] - f * pivot_inv[c];
                }
            }
        }
        // inv now maps row space to basis positions: (B⁻¹)_{k r}
        self.binv = inv;
        self.xb = (0..m)
            .map(|k| {
                self.binv[k * m..(k + 1) * m]
                    .iter()
                    .zip(&self.b)
                    .fold(T::zero(), |acc, (&x, &b)| acc + x * b)
            })
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    /// Removes the bound shifts of the Harris steps: refactors, restores `x_B ≥ 0` by
    /// dual simplex pivots and reoptimizes, until the basis is clean or the rounds run out.
    fn cleanup(&mut self) -> Result<LpStatus> {
        for _ in 0..CLEANUP_ROUNDS {
            self.polish()?;
            let mut repaired = false;
            while let Some(r) = self.most_negative() {
                if self.iterations >= self.max_iterations {
                    return Ok(LpStatus::IterationLimit);
                }
                let Some(q) = self.dual_entering(r) else {
                    return Ok(LpStatus::Infeasible);
                };
                let w = self.ftran(q);
                self.pivot_with_step(q, r, &w, self.xb[r] / w[r])?;
                repaired = true;
            }
            if !repaired {
                return Ok(LpStatus::Optimal);
            }
            self.polish()?;
            let status = self.run(Phase::Two)?;
            if status != LpStatus::Optimal {
                return Ok(status);
            }
        }
        Ok(LpStatus::Optimal)
    }

    fn most_negative(&self) -> Option<usize> {
        (0..self.m)
            .filter(|&k| self.xb[k] < -self.feas_tol)
            .min_by(|&a, &b| self.xb[a].partial_cmp(&self.xb[b]).expect("finite"))
    }

    /// Dual ratio test for leaving row `r`: among structurals with `(B⁻¹A)_{rj} < 0`,
    /// the one minimizing `d_j / |(B⁻¹A)_{rj}|`, which keeps reduced costs nonnegative.
    fn dual_entering(&self, r: usize) -> Option<usize> {
        let m = self.m;
        let row = &self.binv[r * m..(r + 1) * m];
        let y = self.prices(Phase::Two);
        let alphas: Vec<(usize, T)> = (0..self.n)
            .filter(|&j| !self.is_basic[j])
            .map(|j| (j, self.dot_column(row, j)))
            .collect();
        let amax = alphas.iter().fold(T::one(), |acc, (_, a)| acc.max(a.abs()));
        alphas
            .into_iter()
            .filter(|&(_, a)| a < -self.piv_tol * amax)
            .map(|(j, a)| (j, self.reduced_cost(Phase::Two, &y, j).max(T::zero()) / -a))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
            .map(|(j, _)| j)
    }

    /// Fresh factorization of the final basis plus one step of iterative refinement,
    /// so `x_B` carries no drift from the product-form updates.
    fn polish(&mut self) -> Result<()> {
        let m = self.m;
        self.refactor()?;
        let mut resid = self.b.clone();
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                resid[r] = resid[r] - v * self.xb[k];
            }
        }
        for k in 0..m {
            let dx = self.binv[k * m..(k + 1) * m]
                .iter()
                .zip(&resid)
                .fold(T::zero(), |acc, (&x, &r)| acc + x * r);
            self.xb[k] = self.xb[k] + dx;
        }
        Ok(())
    }

    fn run(&mut self, phase: Phase) -> Result<LpStatus> {
        let m = self.m;
        let mut y = self.prices(phase);
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(LpStatus::IterationLimit);
            }
            let Some((q, dq)) = self.choose_entering(phase, &y) else {
                return Ok(LpStatus::Optimal);
            };
            let w = self.ftran(q);
            let Some(r) = self.choose_leaving(phase, &w) else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(q, r, &w)?;
            if self.since_refactor == 0 {
                y = self.prices(phase);
            } else {
                // yᵀ ← yᵀ + d_q · (row r of the new B⁻¹)
                for (yr, &b) in y.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *yr = *yr + dq * b;
                }
            }
        }
    }

    /// Pivots basic artificials out where a structural column can replace them.
    /// Those that remain sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let alpha = self.dot_column(&row, j).abs();
                if alpha > T::c(1e-7) && best.is_none_or(|(_, a)| alpha > a) {
                    best = Some((j, alpha));
                }
            }
            if let Some((j, _)) = best {
                let w = self.ftran(j);
                self.pivot(j, r, &w)?;
            }
        }
        self.degenerate_run = 0;
        Ok(())
    }

    fn solution(&self, status: LpStatus) -> LpSolution<T> {
        let mut x = vec![T::zero(); self.n];
        for (&j, &v) in self.basis.iter().zip(&self.xb) {
            if j < self.n {
                // clip rounding noise below zero
                x[j] = if v < T::zero() && v > -self.feas_tol {
                    T::zero()
                } else {
                    v
                };
            }
        }
        let y = self.prices(Phase::Two);
        let duals = y.iter().zip(&self.sign).map(|(&v, &s)| v * s).collect();
        LpSolution {
            status,
            objective: self.p.objective(&x),
            max_residual: self.p.residual(&x),
            x,
            duals,
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable() {
        let p = LpProblem::from_dense(vec![1.0], &[vec![1.0]], vec![1.0]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn degenerate_objective() {
        let p = LpProblem::<f64>::from_dense(vec![1.0, 1.0], &[vec![1.0, 1.0]], vec![1.0]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = LpProblem::from_dense(vec![0.0], &[vec![1.0]], vec![-1.0]).unwrap();
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
        let p = LpProblem::from_dense(vec![-1.0, 0.0], &[vec![1.0, -1.0]], vec![0.0]).unwrap();
        assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_and_duals() {
        // min 2x + 3y s.t. -x - y = -4, x - y = 0
        let p = LpProblem::<f64>::from_dense(
            vec![2.0, 3.0],
            &[vec![-1.0, -1.0], vec![1.0, -1.0]],
            vec![-4.0, 0.0],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 10.0).abs() < 1e-12);
        let dual_obj: f64 = s.duals.iter().zip(p.rhs()).map(|(y, b)| y * b).sum();
        assert!((dual_obj - s.objective).abs() < 1e-10);
    }

    #[test]
    fn redundant_rows() {
        // two copies of the same equation plus the total-mass row of a 2x2 transport problem
        let p = LpProblem::<f64>::from_dense(
            vec![1.0, 2.0, 3.0, 1.0],
            &[
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0, 0.0],
            ],
            vec![0.5, 0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(s.max_residual < 1e-12);
    }

    #[test]
    fn runs_in_f32() {
        let p = LpProblem::<f32>::from_dense(vec![1.0, 2.0], &[vec![1.0, 1.0]], vec![3.0]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-5);
    }
}
