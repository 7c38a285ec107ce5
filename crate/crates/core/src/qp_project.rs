//! Quadratic Wasserstein projection onto `{η : η ≤cx ν}` in any dimension.
//!
//! For `μ_I = Σ p_i δ_{x_i}` and `ν_J = Σ q_j δ_{y_j}` the projection is the
//! image of `μ_I` under the barycentric map `x_i ↦ m_i = Σ_j π_ij y_j / p_i`
//! of a coupling `π ∈ Π(μ_I, ν_J)` minimizing
//!
//! ```text
//! f(π) = Σ_i p_i |x_i − m_i|²
//! ```
//!
//! over the transportation polytope. The objective only depends on the images
//! `M_i = Σ_j π_ij y_j`, where it is strongly convex, so the barycenters are
//! unique even when `π` is not.
//!
//! The solvers are conditional-gradient methods whose linear oracle is the
//! transportation simplex ([`TransportSolver`]), warm-started between calls.
//! Every iterate is a convex combination of transport vertices, hence exactly
//! feasible, and the Frank–Wolfe gap `⟨∇f(π), π − V⟩` bounds the
//! suboptimality. By strong convexity it also bounds
//! `Σ p_i |m_i − m*_i|²`, the squared `W₂` distance to the exact projection.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{CostMatrix, Coupling, StartRule, TransportSolver};
use crate::measures::DiscreteMeasure;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FwVariant {
    /// Plain conditional gradient with exact line search.
    Vanilla,
    /// Conditional gradient with away steps.
    AwayStep,
    /// Fully corrective: Wolfe's minimum-norm-point method on the active vertices.
    #[default]
    FullyCorrective,
}

#[derive(Clone, Debug)]
pub struct QpOptions {
    /// Stop once the Frank–Wolfe gap is below this; `None` means `1e-8·(f(π₀) + 1)`.
    pub tol_gap: Option<f64>,
    pub max_iter: usize,
    pub variant: FwVariant,
    pub start: StartRule,
    /// Only `ρ = 2` is supported.
    pub rho: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol_gap: None,
            max_iter: 50_000,
            variant: FwVariant::default(),
            start: StartRule::default(),
            rho: 2.0,
        }
    }
}

/// Convergence summary shared by the iterative solvers.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective: f64,
    /// Duality-gap certificate of the final iterate (Frank–Wolfe gap or constraint residual).
    pub gap: f64,
    pub marginal_residual: f64,
    pub wall_time_secs: f64,
    /// The stopping tolerance was met before the iteration cap.
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct ProjectionQpResult {
    pub coupling: Coupling,
    /// `m_i = Σ_j π_ij y_j / p_i`, one per atom of `μ`.
    pub barycenters: Vec<Vec<f64>>,
    /// `Σ p_i δ_{m_i}`.
    pub projected: DiscreteMeasure,
    pub report: SolveReport,
}

/// Vertex of the transportation polytope minimizing `⟨gradient, π⟩`.
pub fn fw_linear_oracle(
    gradient: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<Coupling> {
    crate::lp::ot_plan(mu, nu, gradient)
}

/// Projects `mu` onto the measures dominated by `nu` in convex order, for `W₂`.
///
/// Hitting `max_iter` is not an error: the best iterate is returned with
/// `report.certified == false`.
pub fn project_qp(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &QpOptions,
) -> Result<ProjectionQpResult> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if opts.rho != 2.0 {
        return Err(Error::InvalidParameter(format!(
            "the quadratic projection needs rho = 2, got {}; use the one-dimensional projection for other exponents",
            opts.rho
        )));
    }
    if let Some(t) = opts.tol_gap {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(
                "gap tolerance must be positive".into(),
            ));
        }
    }
    let started = Instant::now();
    let mut state = Problem::new(mu, nu, opts.start)?;
    let (weights, iterations, gap, certified) = match opts.variant {
        FwVariant::Vanilla => state.conditional_gradient(opts, false)?,
        FwVariant::AwayStep => state.conditional_gradient(opts, true)?,
        FwVariant::FullyCorrective => state.min_norm_point(opts)?,
    };

    let mut entries = Vec::new();
    for (v, w) in state.vertices.iter().zip(&weights) {
        if *w > 0.0 {
            entries.extend(v.coupling.entries().iter().map(|&(i, j, m)| (i, j, w * m)));
        }
    }
    let coupling = Coupling::new(mu.weights().to_vec(), nu.weights().to_vec(), entries)?;
    let barycenters = coupling.barycenters(nu);
    let objective = barycenters
        .iter()
        .zip(mu.atoms())
        .zip(mu.weights())
        .map(|((m, x), p)| p * sq_dist(m, x))
        .sum();
    let projected = DiscreteMeasure::from_points(barycenters.clone(), mu.weights().to_vec())?;
    let report = SolveReport {
        iterations,
        objective,
        gap,
        marginal_residual: coupling.marginal_residual(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        certified,
    };
    Ok(ProjectionQpResult {
        coupling,
        barycenters,
        projected,
        report,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Vertex {
    coupling: Coupling,
    /// `M(V)_i = Σ_j V_ij y_j`, flattened `I × d`.
    image: Vec<f64>,
}

struct Problem<'a> {
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
    solver: TransportSolver,
    vertices: Vec<Vertex>,
}

impl<'a> Problem<'a> {
    fn new(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, start: StartRule) -> Result<Self> {
        let solver = TransportSolver::for_measures(mu, nu, start)?;
        let mut p = Self {
            mu,
            nu,
            solver,
            vertices: Vec::new(),
        };
        let first = p.solver.coupling();
        p.push_vertex(first);
        Ok(p)
    }

    fn dim(&self) -> usize {
        self.mu.dim()
    }

    fn image(&self, v: &Coupling) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.mu.len() * d];
        for &(i, j, m) in v.entries() {
            for (o, y) in out[i * d..(i + 1) * d].iter_mut().zip(self.nu.atom(j)) {
                *o += m * y;
            }
        }
        out
    }

    /// Index of `v` among the stored vertices, adding it if new.
    fn push_vertex(&mut self, v: Coupling) -> usize {
        if let Some(k) = self.vertices.iter().position(|w| w.coupling == v) {
            return k;
        }
        let image = self.image(&v);
        self.vertices.push(Vertex { coupling: v, image });
        self.vertices.len() - 1
    }

    fn combined_image(&self, weights: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.mu.len() * self.dim()];
        for (v, &w) in self.vertices.iter().zip(weights) {
            if w != 0.0 {
                for (a, b) in m.iter_mut().zip(&v.image) {
                    *a += w * b;
                }
            }
        }
        m
    }

    /// `r_i = x_i − M_i / p_i`.
    fn residuals(&self, image: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut r = vec![0.0; image.len()];
        for (i, (x, p)) in self.mu.atoms().zip(self.mu.weights()).enumerate() {
            for k in 0..d {
                r[i * d + k] = x[k] - image[i * d + k] / p;
            }
        }
        r
    }

    fn objective(&self, r: &[f64]) -> f64 {
        let d = self.dim();
        self.mu
            .weights()
            .iter()
            .enumerate()
            .map(|(i, p)| p * r[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Linear oracle for the gradient `−2 r_i·y_j` (the factor 2 does not change the vertex).
    fn oracle(&mut self, r: &[f64]) -> Result<usize> {
        let d = self.dim();
        let (ni, nj) = (self.mu.len(), self.nu.len());
        let mut c = CostMatrix::zeros(ni, nj);
        for i in 0..ni {
            let ri = &r[i * d..(i + 1) * d];
            for j in 0..nj {
                c.set(i, j, -dot(ri, self.nu.atom(j)));
            }
        }
        let v = self.solver.solve(&c)?;
        Ok(self.push_vertex(v))
    }

    /// `Σ_i r_i·D_i / Σ_i |D_i|² / p_i` for a direction `D` in image space.
    fn line_search(&self, r: &[f64], dir: &[f64]) -> f64 {
        let d = self.dim();
        let num = dot(r, dir);
        let den: f64 = self
            .mu
            .weights()
            .iter()
            .enumerate()
            .map(|(i, p)| dir[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>() / p)
            .sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    fn default_tol(&self, opts: &QpOptions) -> f64 {
        opts.tol_gap.unwrap_or_else(|| {
            let r = self.residuals(&self.vertices[0].image);
            1e-8 * (self.objective(&r) + 1.0)
        })
    }

    /// Returns `(vertex weights, iterations, gap, certified)`.
    fn conditional_gradient(
        &mut self,
        opts: &QpOptions,
        away: bool,
    ) -> Result<(Vec<f64>, usize, f64, bool)> {
        let tol = self.default_tol(opts);
        let mut weights = vec![1.0];
        let mut image = self.vertices[0].image.clone();
        let mut gap = f64::INFINITY;
        for it in 0..opts.max_iter {
            let r = self.residuals(&image);
            let s = self.oracle(&r)?;
            weights.resize(self.vertices.len(), 0.0);
            let fw_dir: Vec<f64> = self.vertices[s]
                .image
                .iter()
                .zip(&image)
                .map(|(a, b)| a - b)
                .collect();
            gap = 2.0 * dot(&r, &fw_dir);
            if gap <= tol {
                return Ok((weights, it, gap.max(0.0), true));
            }

            let away_choice = if away {
                (0..weights.len())
                    .filter(|&k| weights[k] > 0.0)
                    .map(|k| (k, dot(&r, &self.vertices[k].image)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
                    .map(|(k, _)| k)
                    .filter(|&k| {
                        let away_gain = dot(&r, &image) - dot(&r, &self.vertices[k].image);
                        away_gain > 0.5 * gap && weights[k] < 1.0
                    })
            } else {
                None
            };

            match away_choice {
                Some(a) => {
                    let dir: Vec<f64> = image
                        .iter()
                        .zip(&self.vertices[a].image)
                        .map(|(m, v)| m - v)
                        .collect();
                    let max_step = weights[a] / (1.0 - weights[a]);
                    let gamma = self.line_search(&r, &dir).clamp(0.0, max_step);
                    weights.iter_mut().for_each(|w| *w *= 1.0 + gamma);
                    weights[a] -= gamma;
                    if gamma == max_step {
                        weights[a] = 0.0;
                    }
                    image
                        .iter_mut()
                        .zip(&dir)
                        .for_each(|(m, dv)| *m += gamma * dv);
                }
                None => {
                    let gamma = self.line_search(&r, &fw_dir).clamp(0.0, 1.0);
                    weights.iter_mut().for_each(|w| *w *= 1.0 - gamma);
                    weights[s] += gamma;
                    image
                        .iter_mut()
                        .zip(&fw_dir)
                        .for_each(|(m, dv)| *m += gamma * dv);
                }
            }
        }
        Ok((weights, opts.max_iter, gap.max(0.0), false))
    }

    /// Wolfe's minimum-norm-point algorithm.
    ///
    /// In the coordinates `a(V)_i = M(V)_i/√p_i − √p_i x_i` the objective is `|a|²`,
    /// so the projection is the point of minimum norm in the hull of the `a(V)`.
    /// The corral `S` keeps affinely independent vertices with positive weights.
    fn min_norm_point(&mut self, opts: &QpOptions) -> Result<(Vec<f64>, usize, f64, bool)> {
        let tol = self.default_tol(opts);
        let sqrt_p: Vec<f64> = self.mu.weights().iter().map(|p| p.sqrt()).collect();
        let d = self.dim();
        let shifted = |image: &[f64], mu: &DiscreteMeasure| -> Vec<f64> {
            let mut a = vec![0.0; image.len()];
            for (i, x) in mu.atoms().enumerate() {
                for k in 0..d {
                    a[i * d + k] = image[i * d + k] / sqrt_p[i] - sqrt_p[i] * x[k];
                }
            }
            a
        };

        let mut corral: Vec<usize> = vec![0];
        let mut points: Vec<Vec<f64>> = vec![shifted(&self.vertices[0].image, self.mu)];
        let mut gram: Vec<Vec<f64>> = vec![vec![dot(&points[0], &points[0])]];
        let mut lambda = vec![1.0];
        let mut gap = f64::INFINITY;

        for it in 0..opts.max_iter {
            let weights = self.corral_weights(&corral, &lambda);
            let image = self.combined_image(&weights);
            let r = self.residuals(&image);
            let s = self.oracle(&r)?;
            let fw_dir: Vec<f64> = self.vertices[s]
                .image
                .iter()
                .zip(&image)
                .map(|(a, b)| a - b)
                .collect();
            gap = 2.0 * dot(&r, &fw_dir);
            if gap <= tol {
                return Ok((
                    self.corral_weights(&corral, &lambda),
                    it,
                    gap.max(0.0),
                    true,
                ));
            }
            if corral.contains(&s) {
                // no progress is possible at working precision
                let w = self.corral_weights(&corral, &lambda);
                return Ok((w, it, gap.max(0.0), false));
            }

            let a = shifted(&self.vertices[s].image, self.mu);
            for (row, p) in gram.iter_mut().zip(&points) {
                row.push(dot(p, &a));
            }
            let mut last: Vec<f64> = points.iter().map(|p| dot(p, &a)).collect();
            last.push(dot(&a, &a));
            gram.push(last);
            points.push(a);
            corral.push(s);
            lambda.push(0.0);

            loop {
                let alpha = affine_min_norm(&gram);
                if alpha.iter().all(|&v| v > 1e-14) {
                    lambda = alpha;
                    break;
                }
                let mut theta = 1.0f64;
                for (l, a) in lambda.iter().zip(&alpha) {
                    if *a <= 1e-14 && l - a > 0.0 {
                        theta = theta.min(l / (l - a));
                    }
                }
                for (l, a) in lambda.iter_mut().zip(&alpha) {
                    *l = (1.0 - theta) * *l + theta * a;
                }
                let drop_first = lambda
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.partial_cmp(y.1).expect("finite"))
                    .map(|(k, _)| k)
                    .expect("non-empty corral");
                let keep: Vec<usize> = (0..lambda.len())
                    .filter(|&k| k != drop_first && lambda[k] > 1e-14)
                    .collect();
                corral = keep.iter().map(|&k| corral[k]).collect();
                points = keep.iter().map(|&k| points[k].clone()).collect();
                gram = keep
                    .iter()
                    .map(|&a| keep.iter().map(|&b| gram[a][b]).collect())
                    .collect();
                lambda = keep.iter().map(|&k| lambda[k]).collect();
                let total: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= total);
                if corral.len() == 1 {
                    break;
                }
            }
        }
        let w = self.corral_weights(&corral, &lambda);
        Ok((w, opts.max_iter, gap.max(0.0), false))
    }

    fn corral_weights(&self, corral: &[usize], lambda: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for (&k, &l) in corral.iter().zip(lambda) {
            w[k] = l;
        }
        w
    }
}

/// Weights `α` (summing to one) of the minimum-norm point in the affine hull of the
/// points with Gram matrix `gram`: `α ∝ (G + 𝟙𝟙ᵀ)⁻¹ 𝟙`.
fn affine_min_norm(gram: &[Vec<f64>]) -> Vec<f64> {
    let k = gram.len();
    let scale = (0..k).fold(1.0f64, |acc, i| acc.max(gram[i][i]));
    let mut ridge = 0.0;
    loop {
        let h: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| gram[a][b] + 1.0 + if a == b { ridge } else { 0.0 })
                    .collect()
            })
            .collect();
        if let Some(sol) = cholesky_solve(&h, &vec![1.0; k]) {
            let total: f64 = sol.iter().sum();
            return sol.iter().map(|v| v / total).collect();
        }
        ridge = if ridge == 0.0 {
            1e-15 * scale
        } else {
            ridge * 100.0
        };
    }
}

fn cholesky_solve(h: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = h.len();
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|t| l[i][t] * l[j][t]).sum();
            if i == j {
                let v = h[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (h[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|t| l[i][t] * y[t]).sum();
        y[i] = (rhs[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|t| l[t][i] * x[t]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(variant: FwVariant) -> QpOptions {
        QpOptions {
            tol_gap: Some(1e-12),
            variant,
            ..QpOptions::default()
        }
    }

    #[test]
    fn dilation_in_one_dimension() {
        let mu = DiscreteMeasure::uniform_1d(vec![-2.0, 2.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(vec![-1.0, 1.0]).unwrap();
        for v in [
            FwVariant::Vanilla,
            FwVariant::AwayStep,
            FwVariant::FullyCorrective,
        ] {
            let res = project_qp(&mu, &nu, &opts(v)).unwrap();
            assert!(res.report.certified);
            assert!((res.report.objective - 1.0).abs() < 1e-10);
            assert!((res.barycenters[0][0] + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ordered_input_is_fixed() {
        let nu = DiscreteMeasure::uniform(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 3.0]])
            .unwrap();
        let mu = DiscreteMeasure::dirac(nu.mean()).unwrap();
        let res = project_qp(&mu, &nu, &opts(FwVariant::FullyCorrective)).unwrap();
        assert!(res.report.objective < 1e-12);
        assert!(sq_dist(&res.barycenters[0], &nu.mean()) < 1e-12);
    }

    #[test]
    fn rejects_other_exponents() {
        let m = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let o = QpOptions {
            rho: 1.0,
            ..QpOptions::default()
        };
        assert!(matches!(
            project_qp(&m, &m, &o),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn affine_min_norm_of_segment() {
        // points -1 and 3 on the line: minimum norm at 0 = ¾·(−1) + ¼·3
        let alpha = affine_min_norm(&[vec![1.0, -3.0], vec![-3.0, 9.0]]);
        assert!((alpha[0] - 0.75).abs() < 1e-14 && (alpha[1] - 0.25).abs() < 1e-14);
    }
}
