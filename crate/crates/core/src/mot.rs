//! Discrete martingale optimal transport.
//!
//! The unknown is the joint mass matrix `π_ij ≥ 0` with row sums `p_i`,
//! column sums `q_j` and conditional means `Σ_j π_ij y_j = p_i x_i`. The
//! conditional kernel is `r_ij = π_ij / p_i`.
//!
//! [`solve_exact`] hands the program to the simplex solver. [`solve_entropic`]
//! adds `ε Σ π_ij (ln π_ij − 1)` and cycles Bregman (KL) projections onto the
//! row, column and per-row martingale constraints, in log-domain so small `ε`
//! does not underflow; [`solve_entropic_continuation`] walks `ε` down a
//! geometric schedule with warm-started duals.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::lp::{self, cost_matrix, CostMatrix, Coupling, LpStatus};
use crate::measures::{martingale_lp, DiscreteMeasure, Seed};
use crate::qp_project::SolveReport;
use rand::Rng;

/// Largest `I·J` handed to the exact solver.
pub const EXACT_SIZE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sense {
    #[default]
    Min,
    Max,
}

impl FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            other => Err(Error::UnknownName {
                kind: "sense",
                name: other.to_string(),
            }),
        }
    }
}

/// Payoff functions `c(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payoff {
    /// `Σ_ℓ |x^ℓ − y^ℓ|^ρ`.
    CoordinatewisePower { rho: f64 },
    /// `max(max_ℓ (y^ℓ − x^ℓ), 0)`.
    BestOf,
    /// `max(y − x, 0)` on the first coordinate.
    CallSpread,
}

impl Payoff {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::CoordinatewisePower { rho } => {
                x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(*rho)).sum()
            }
            Self::BestOf => x.iter().zip(y).map(|(a, b)| b - a).fold(0.0, f64::max),
            Self::CallSpread => (y[0] - x[0]).max(0.0),
        }
    }

    pub fn cost_matrix(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CostMatrix {
        cost_matrix(mu, nu, |x, y| self.eval(x, y))
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CoordinatewisePower { rho } => write!(f, "power:{rho}"),
            Self::BestOf => write!(f, "best-of"),
            Self::CallSpread => write!(f, "call-spread"),
        }
    }
}

/// Parses `power[:ρ]` (default `ρ = 2`), `best-of` and `call-spread`.
impl FromStr for Payoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        match (name, arg) {
            ("power" | "coordinatewise-power", "") => Ok(Self::CoordinatewisePower { rho: 2.0 }),
            ("power" | "coordinatewise-power", a) => {
                let rho: f64 = a
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad payoff exponent `{a}`")))?;
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "payoff exponent must be positive, got {rho}"
                    )));
                }
                Ok(Self::CoordinatewisePower { rho })
            }
            ("best-of", "") => Ok(Self::BestOf),
            ("call-spread", "") => Ok(Self::CallSpread),
            _ => Err(Error::UnknownName {
                kind: "payoff",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MotProblem {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub sense: Sense,
}

impl MotProblem {
    pub fn new(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        cost: CostMatrix,
        sense: Sense,
    ) -> Result<Self> {
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                found: nu.dim(),
            });
        }
        if cost.rows() != mu.len() || cost.cols() != nu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len() * nu.len(),
                found: cost.rows() * cost.cols(),
            });
        }
        Ok(Self {
            mu,
            nu,
            cost,
            sense,
        })
    }

    pub fn with_payoff(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        payoff: Payoff,
        sense: Sense,
    ) -> Result<Self> {
        let cost = payoff.cost_matrix(&mu, &nu);
        Self::new(mu, nu, cost, sense)
    }

    /// Cost as seen by a minimizer: `c` or `−c`.
    fn signed_cost(&self) -> CostMatrix {
        match self.sense {
            Sense::Min => self.cost.clone(),
            Sense::Max => self.cost.negated(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotMethod {
    Exact,
    Entropic { epsilon: f64 },
}

#[derive(Clone, Debug)]
pub struct MotSolution {
    pub coupling: Coupling,
    /// `Σ π_ij c_ij` with the raw cost.
    pub objective: f64,
    /// `max_i ‖Σ_j π_ij (y_j − x_i)‖∞`.
    pub martingale_residual: f64,
    pub marginal_residual: f64,
    pub method: MotMethod,
    /// Iterative solvers only.
    pub report: Option<SolveReport>,
    /// Entropic solver: the martingale violation never grew between cycles.
    pub monotone_residual: bool,
}

impl MotSolution {
    /// Conditional kernel `r_ij = π_ij / p_i` as `(i, j, r_ij)` cells.
    pub fn kernel(&self) -> Vec<(usize, usize, f64)> {
        let p = self.coupling.row_marginal();
        self.coupling
            .entries()
            .iter()
            .map(|&(i, j, m)| (i, j, m / p[i]))
            .collect()
    }
}

/// Solves the martingale transport program by linear programming.
pub fn solve_exact(p: &MotProblem) -> Result<MotSolution> {
    let (ni, nj) = (p.mu.len(), p.nu.len());
    if ni * nj > EXACT_SIZE_LIMIT {
        return Err(Error::ScaleExceeded {
            vars: ni * nj,
            limit: EXACT_SIZE_LIMIT,
        });
    }
    let lp_problem = martingale_lp(&p.mu, &p.nu, p.signed_cost().data())?;
    let sol = lp::solve(&lp_problem)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        status => {
            return Err(Error::Solver(format!(
                "martingale LP ended with status {status:?}"
            )))
        }
    }
    let coupling = Coupling::from_dense(p.mu.weights().to_vec(), p.nu.weights().to_vec(), &sol.x)?;
    Ok(finish(p, coupling, MotMethod::Exact, None, true))
}

fn finish(
    p: &MotProblem,
    coupling: Coupling,
    method: MotMethod,
    report: Option<SolveReport>,
    monotone: bool,
) -> MotSolution {
    MotSolution {
        objective: coupling.cost(&p.cost),
        martingale_residual: coupling.martingale_residual(&p.mu, &p.nu),
        marginal_residual: coupling.marginal_residual(),
        coupling,
        method,
        report,
        monotone_residual: monotone,
    }
}

/// Largest log-odds change `max_j θ·z_j − min_j θ·z_j` accepted from a projection.
const MAX_TILT_SPAN: f64 = 23.0;

/// KL projection of a positive row onto `{w : Σ_j w_j (y_j − x) = 0, Σ_j w_j = Σ_j row_j}`.
///
/// The solution is `w_j ∝ row_j e^{θ·(y_j − x)}`, with `θ` found by damped Newton on the
/// convex function `θ ↦ ln Σ_j row_j e^{θ·(y_j − x)}`. Fails when `x` is not in the
/// relative interior of the hull of the `y_j` carrying positive mass.
pub fn martingale_bregman_project(
    row: &[f64],
    x: &[f64],
    ys: &DiscreteMeasure,
) -> Result<Vec<f64>> {
    if row.len() != ys.len() || x.len() != ys.dim() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            found: row.len(),
        });
    }
    if row.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidWeights("row must be nonnegative".into()));
    }
    let mass: f64 = row.iter().sum();
    let log_row: Vec<f64> = row.iter().map(|w| w.ln()).collect();
    let z = displacements(x, ys);
    let d = ys.dim();
    let theta = tilt(&log_row, &z, d, vec![0.0; d])?;
    // an interior point has a bounded tilt; a boundary point drives some odds to zero
    let exps: Vec<f64> = (0..row.len())
        .filter(|&j| row[j] > 0.0)
        .map(|j| dot(&theta, &z[j * d..(j + 1) * d]))
        .collect();
    let span = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - exps.iter().cloned().fold(f64::INFINITY, f64::min);
    if span > MAX_TILT_SPAN {
        return Err(Error::BoundaryProjection);
    }
    let w = softmax_tilted(&log_row, &z, &theta);
    Ok(w.iter().map(|v| v * mass).collect())
}

/// `z_j = y_j − x`, flattened `J × d`.
fn displacements(x: &[f64], ys: &DiscreteMeasure) -> Vec<f64> {
    ys.atoms()
        .flat_map(|y| y.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect()
}

fn softmax_tilted(log_w: &[f64], z: &[f64], theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let s: Vec<f64> = log_w
        .iter()
        .enumerate()
        .map(|(j, l)| l + dot(theta, &z[j * d..(j + 1) * d]))
        .collect();
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Minimizer `θ` of `ln Σ_j e^{log_w_j + θ·z_j}`, i.e. the tilt with zero mean displacement.
fn tilt(log_w: &[f64], z: &[f64], d: usize, mut theta: Vec<f64>) -> Result<Vec<f64>> {
    let zscale = z.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let target = 1e-13 * zscale;
    let value = |t: &[f64]| {
        log_sum_exp(
            log_w
                .iter()
                .enumerate()
                .map(move |(j, l)| l + dot(t, &z[j * d..(j + 1) * d])),
        )
    };
    let mut g_val = value(&theta);
    for _ in 0..200 {
        let w = softmax_tilted(log_w, z, &theta);
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for (j, wj) in w.iter().enumerate() {
            let zj = &z[j * d..(j + 1) * d];
            for a in 0..d {
                grad[a] += wj * zj[a];
                for b in 0..d {
                    hess[a * d + b] += wj * zj[a] * zj[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                hess[a * d + b] -= grad[a] * grad[b];
            }
        }
        if grad.iter().all(|g| g.abs() <= target) {
            return Ok(theta);
        }
        let ridge = 1e-14 * zscale * zscale;
        for a in 0..d {
            hess[a * d + a] += ridge;
        }
        let step = solve_small(&hess, &grad, d).ok_or(Error::BoundaryProjection)?;
        let slope = -dot(&grad, &step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let v = value(&cand);
            // inside the quadratic region the value change is below roundoff: take the full step
            if v <= g_val + 1e-4 * t * slope || -slope < 1e-12 || t < 1e-12 {
                theta = cand;
                g_val = v;
                break;
            }
            t *= 0.5;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::BoundaryProjection);
        }
    }
    Err(Error::BoundaryProjection)
}

/// Gaussian elimination with partial pivoting for the `d × d` Newton system.
fn solve_small(a: &[f64], b: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = (0..d)
        .map(|r| {
            let mut row = a[r * d..(r + 1) * d].to_vec();
            row.push(b[r]);
            row
        })
        .collect();
    for c in 0..d {
        let piv =
            (c..d).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).expect("finite"))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        for r in 0..d {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=d {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some((0..d).map(|r| m[r][d] / m[r][r]).collect())
}

#[derive(Clone, Debug)]
pub struct EntropicOptions {
    pub max_sweeps: usize,
    /// Convergence when every constraint residual is below this.
    pub tol: f64,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 20_000,
            tol: 1e-9,
        }
    }
}

/// Scaled dual variables: `ln π_ij = −c_ij/ε + α_i + β_j + θ_i·(y_j − x_i)`.
#[derive(Clone, Debug)]
struct Duals {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    theta: Vec<f64>,
    epsilon: f64,
}

impl Duals {
    fn zero(ni: usize, nj: usize, d: usize, epsilon: f64) -> Self {
        Self {
            alpha: vec![0.0; ni],
            beta: vec![0.0; nj],
            theta: vec![0.0; ni * d],
            epsilon,
        }
    }

    /// Keeps the unscaled potentials `ε·α`, `ε·β`, `ε·θ` fixed across a change of `ε`.
    fn rescale(&mut self, epsilon: f64) {
        let f = self.epsilon / epsilon;
        for v in self
            .alpha
            .iter_mut()
            .chain(&mut self.beta)
            .chain(&mut self.theta)
        {
            *v *= f;
        }
        self.epsilon = epsilon;
    }
}

struct Entropic<'a> {
    p: &'a MotProblem,
    /// `−c/ε` with the sign of the sense applied.
    kernel: Vec<f64>,
    /// `y_j − x_i`, flattened `I × J × d`.
    z: Vec<f64>,
    log_p: Vec<f64>,
    log_q: Vec<f64>,
}

impl<'a> Entropic<'a> {
    fn new(p: &'a MotProblem, epsilon: f64) -> Self {
        let c = p.signed_cost();
        let kernel = c.data().iter().map(|v| -v / epsilon).collect();
        let z = p.mu.atoms().flat_map(|x| displacements(x, &p.nu)).collect();
        Self {
            p,
            kernel,
            z,
            log_p: p.mu.weights().iter().map(|w| w.ln()).collect(),
            log_q: p.nu.weights().iter().map(|w| w.ln()).collect(),
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.p.mu.len(), self.p.nu.len(), self.p.mu.dim())
    }

    /// `ln π_ij − α_i`, the part of the exponent that row updates do not touch.
    fn row_exponent(&self, du: &Duals, i: usize) -> Vec<f64> {
        let (_, nj, d) = self.dims();
        let th = &du.theta[i * d..(i + 1) * d];
        (0..nj)
            .map(|j| {
                let k = i * nj + j;
                self.kernel[k] + du.beta[j] + dot(th, &self.z[k * d..(k + 1) * d])
            })
            .collect()
    }

    fn row_update(&self, du: &mut Duals) {
        let (ni, _, _) = self.dims();
        for i in 0..ni {
            let e = self.row_exponent(du, i);
            du.alpha[i] = self.log_p[i] - log_sum_exp(e.iter().copied());
        }
    }

    fn col_update(&self, du: &mut Duals) {
        let (ni, nj, d) = self.dims();
        for j in 0..nj {
            let terms = (0..ni).map(|i| {
                let k = i * nj + j;
                self.kernel[k]
                    + du.alpha[i]
                    + dot(&du.theta[i * d..(i + 1) * d], &self.z[k * d..(k + 1) * d])
            });
            du.beta[j] = self.log_q[j] - log_sum_exp(terms);
        }
    }

    /// Projects every row onto its martingale and row-sum constraints.
    fn martingale_update(&self, du: &mut Duals) -> Result<()> {
        let (ni, nj, d) = self.dims();
        for i in 0..ni {
            // exponent without the current tilt, so `tilt` returns the new θ_i directly
            let th = du.theta[i * d..(i + 1) * d].to_vec();
            let zi = &self.z[i * nj * d..(i + 1) * nj * d];
            let base: Vec<f64> = self
                .row_exponent(du, i)
                .iter()
                .enumerate()
                .map(|(j, e)| e - dot(&th, &zi[j * d..(j + 1) * d]))
                .collect();
            let theta = tilt(&base, zi, d, th)?;
            du.theta[i * d..(i + 1) * d].copy_from_slice(&theta);
            let e = self.row_exponent(du, i);
            du.alpha[i] = self.log_p[i] - log_sum_exp(e.iter().copied());
        }
        Ok(())
    }

    fn plan(&self, du: &Duals) -> Vec<f64> {
        let (ni, nj, _) = self.dims();
        let mut out = Vec::with_capacity(ni * nj);
        for i in 0..ni {
            out.extend(
                self.row_exponent(du, i)
                    .iter()
                    .map(|e| (e + du.alpha[i]).exp()),
            );
        }
        out
    }

    fn residuals(&self, plan: &[f64]) -> (f64, f64, f64) {
        let (ni, nj, d) = self.dims();
        let (p, q) = (self.p.mu.weights(), self.p.nu.weights());
        let mut row_res: f64 = 0.0;
        let mut mart_res: f64 = 0.0;
        let mut cols = vec![0.0; nj];
        for i in 0..ni {
            let row = &plan[i * nj..(i + 1) * nj];
            row_res = row_res.max((row.iter().sum::<f64>() - p[i]).abs());
            let mut bal = vec![0.0; d];
            for (j, v) in row.iter().enumerate() {
                cols[j] += v;
                let k = i * nj + j;
                for (b, zk) in bal.iter_mut().zip(&self.z[k * d..(k + 1) * d]) {
                    *b += v * zk;
                }
            }
            mart_res = bal.iter().fold(mart_res, |a, b| a.max(b.abs()));
        }
        let col_res = cols
            .iter()
            .zip(q)
            .fold(0.0f64, |a, (c, q)| a.max((c - q).abs()));
        (row_res, col_res, mart_res)
    }

    /// Runs Bregman cycles at fixed `ε`; returns `(sweeps, converged, monotone, last residual)`.
    fn run(&self, du: &mut Duals, opts: &EntropicOptions) -> Result<(usize, bool, bool, f64)> {
        let mut monotone = true;
        let mut prev_mart = f64::INFINITY;
        let mut last = f64::INFINITY;
        for sweep in 1..=opts.max_sweeps {
            self.row_update(du);
            self.col_update(du);
            // the martingale violation is measured where it is largest: after the column step
            let (_, _, mart) = self.residuals(&self.plan(du));
            if mart > prev_mart + 1e-12 {
                monotone = false;
            }
            prev_mart = mart;
            self.martingale_update(du)?;
            let (_, col, _) = self.residuals(&self.plan(du));
            last = col.max(mart);
            if last < opts.tol {
                return Ok((sweep, true, monotone, last));
            }
        }
        Ok((opts.max_sweeps, false, monotone, last))
    }
}

/// Makes both marginals exact while keeping the plan nonnegative: scale rows down,
/// scale columns down, then spread the missing mass as a rank-one correction.
fn round_to_marginals(plan: &mut [f64], p: &[f64], q: &[f64]) {
    let nj = q.len();
    for (i, pi) in p.iter().enumerate() {
        let row = &mut plan[i * nj..(i + 1) * nj];
        let s: f64 = row.iter().sum();
        if s > *pi {
            row.iter_mut().for_each(|v| *v *= pi / s);
        }
    }
    let mut cols = vec![0.0; nj];
    for (k, v) in plan.iter().enumerate() {
        cols[k % nj] += v;
    }
    for (j, (c, qj)) in cols.iter().zip(q).enumerate() {
        if *c > *qj {
            let f = qj / c;
            for i in 0..p.len() {
                plan[i * nj + j] *= f;
            }
        }
    }
    let rows: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(i, pi)| pi - plan[i * nj..(i + 1) * nj].iter().sum::<f64>())
        .collect();
    let mut cols = q.to_vec();
    for (k, v) in plan.iter().enumerate() {
        cols[k % nj] -= v;
    }
    let total: f64 = rows.iter().sum();
    if total > 0.0 {
        for (i, ri) in rows.iter().enumerate() {
            for (j, cj) in cols.iter().enumerate() {
                plan[i * nj + j] += ri.max(0.0) * cj.max(0.0) / total;
            }
        }
    }
}

/// Entropic solver at a single `ε`.
pub fn solve_entropic(p: &MotProblem, epsilon: f64, opts: &EntropicOptions) -> Result<MotSolution> {
    solve_entropic_continuation(p, &[epsilon], opts)
}

/// Geometric schedule `ε_k = ε₀·factor^k`, `k < stages`.
pub fn epsilon_schedule(eps0: f64, factor: f64, stages: usize) -> Vec<f64> {
    (0..stages).map(|k| eps0 * factor.powi(k as i32)).collect()
}

/// Default schedule: `ε₀ = max|c|`, halved over 8 stages.
pub fn default_schedule(p: &MotProblem) -> Vec<f64> {
    epsilon_schedule(p.cost.max_abs().max(f64::MIN_POSITIVE), 0.5, 8)
}

/// Entropic solver along a decreasing schedule of `ε`, warm-starting each stage.
pub fn solve_entropic_continuation(
    p: &MotProblem,
    schedule: &[f64],
    opts: &EntropicOptions,
) -> Result<MotSolution> {
    let Some(&first) = schedule.first() else {
        return Err(Error::InvalidParameter("empty epsilon schedule".into()));
    };
    if schedule.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let started = Instant::now();
    let (ni, nj, d) = (p.mu.len(), p.nu.len(), p.mu.dim());
    let mut du = Duals::zero(ni, nj, d, first);
    let mut sweeps = 0;
    let (mut converged, mut monotone, mut last) = (false, true, f64::INFINITY);
    let mut stage_solver = None;
    for &eps in schedule {
        du.rescale(eps);
        let solver = Entropic::new(p, eps);
        let (s, c, m, l) = solver.run(&mut du, opts)?;
        sweeps += s;
        converged = c;
        monotone &= m;
        last = l;
        stage_solver = Some(solver);
    }
    let solver = stage_solver.expect("non-empty schedule");
    let mut plan = solver.plan(&du);
    round_to_marginals(&mut plan, p.mu.weights(), p.nu.weights());
    let coupling = Coupling::from_dense(p.mu.weights().to_vec(), p.nu.weights().to_vec(), &plan)?;
    let epsilon = *schedule.last().expect("non-empty schedule");
    let report = SolveReport {
        iterations: sweeps,
        objective: coupling.cost(&p.cost),
        gap: last,
        marginal_residual: coupling.marginal_residual(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        certified: converged,
    };
    Ok(finish(
        p,
        coupling,
        MotMethod::Entropic { epsilon },
        Some(report),
        monotone,
    ))
}

/// Random feasible instance: `J` targets in `[−1, 1]^d`, each source a random strictly
/// positive average of the targets, each row a random positive kernel tilted to have
/// mean `x_i`; `ν` is the column sum.
pub fn random_interior_instance(
    ni: usize,
    nj: usize,
    d: usize,
    seed: Seed,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let mut rng = seed.rng();
    let flat_y: Vec<f64> = (0..nj * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let support = DiscreteMeasure::new(d, flat_y, vec![1.0 / nj as f64; nj])?;
    let ys: Vec<&[f64]> = support.atoms().collect();
    let p: Vec<f64> = (0..ni).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = p.iter().sum();
    let mut xs = Vec::with_capacity(ni * d);
    let mut q = vec![0.0; nj];
    for pi in &p {
        let lambda: Vec<f64> = (0..nj).map(|_| rng.random_range(0.1..1.0)).collect();
        let ls: f64 = lambda.iter().sum();
        let x: Vec<f64> = (0..d)
            .map(|k| ys.iter().zip(&lambda).map(|(y, l)| y[k] * l).sum::<f64>() / ls)
            .collect();
        let row: Vec<f64> = (0..nj).map(|_| rng.random_range(0.1..1.0)).collect();
        let w = martingale_bregman_project(&row, &x, &support)?;
        let s: f64 = w.iter().sum();
        for (qj, wj) in q.iter_mut().zip(&w) {
            *qj += pi / total * wj / s;
        }
        xs.extend(x);
    }
    let mu = DiscreteMeasure::new(d, xs, p.iter().map(|v| v / total).collect())?;
    let nu = DiscreteMeasure::new(d, support.coords().to_vec(), q)?;
    Ok((mu, nu))
}
