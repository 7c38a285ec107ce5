//! End-to-end numerical studies: convergence of projected empirical measures,
//! explicit-versus-QP agreement, the explicit two-dimensional MOT example and
//! best-of option bounds.
//!
//! Every run draws its samples from `cfg.seed.derive(run, I)`, so rows are
//! reproducible individually and independent of the run order.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{
    center_to_mean, leq_cx_1d_tol, sample, w2_vs_gaussian, w_rho_1d, DiscreteMeasure,
    NamedDistribution, Seed, DEFAULT_CX_TOL,
};
use crate::mot::{solve_exact, MotProblem, MotSolution, Payoff, Sense};
use crate::project1d::{project_down, project_up};
use crate::qp_project::{project_qp, QpOptions};

/// Version of the CSV layouts written by [`write_csv`].
pub const SCHEMA_VERSION: u32 = 1;

/// Variances of the one-dimensional Gaussian pair.
pub const GAUSSIAN_PAIR: (f64, f64) = (1.0, 1.1);

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub seed: Seed,
    pub rho: f64,
    pub cx_tol: f64,
    pub qp: QpOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100],
            runs: 30,
            seed: Seed(0),
            rho: 2.0,
            cx_tol: DEFAULT_CX_TOL,
            qp: QpOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidParameter("sizes must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of run `run` at size `size`; every draw of that run derives from it.
    pub fn run_seed(&self, run: usize, size: usize) -> Seed {
        self.seed.derive(run as u64, size as u64)
    }
}

/// Independent draws of `μ` and `ν` for one `(run, I)` cell.
fn sample_pair(
    mu: &NamedDistribution,
    nu: &NamedDistribution,
    size: usize,
    seed: Seed,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    Ok((
        sample(mu, size, seed.derive(0, 0))?,
        sample(nu, size, seed.derive(1, 0))?,
    ))
}

fn gaussians() -> (NamedDistribution, NamedDistribution) {
    (
        NamedDistribution::Normal {
            sigma2: GAUSSIAN_PAIR.0,
        },
        NamedDistribution::Normal {
            sigma2: GAUSSIAN_PAIR.1,
        },
    )
}

/// Writes `rows` as CSV with a leading `# <name> schema v<N>` line.
pub fn write_csv<S: Serialize>(path: &Path, name: &str, rows: &[S]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# {name} schema v{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `(mean, sample standard deviation)`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One `(I, run)` cell of the convergence study with `μ = N(0, 1)`, `ν = N(0, 1.1)`.
///
/// `down` is `W₂(μ, (μ_I)_{P̲(ν_I)})`, `up` is `W₂((ν_I)_{P̄(μ_I)}, ν)`; the bounds
/// are `2W₂(μ, μ_I) + W₂(ν, ν_I)` and `W₂(μ, μ_I) + 2W₂(ν, ν_I)`. The `_c` columns
/// repeat everything for the mean-centered samples. `proj` is the distance between
/// the sample and its projection, which is the same for both directions.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub size: usize,
    pub run: usize,
    pub w2_down: f64,
    pub w2_up: f64,
    pub bound_down: f64,
    pub bound_up: f64,
    pub proj: f64,
    pub w2_down_c: f64,
    pub w2_up_c: f64,
    pub bound_down_c: f64,
    pub bound_up_c: f64,
    pub proj_c: f64,
    /// The centered samples are already in convex order.
    pub ordered_c: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    /// Log-log slope of the median of `w2_down` against `I`.
    pub slope_down: f64,
    pub slope_up: f64,
    pub slope_down_c: f64,
    pub slope_up_c: f64,
    /// Rows where a distance exceeds its bound by more than `1e-6`.
    pub bound_violations: usize,
    /// Per run, the smallest size whose centered samples are ordered.
    pub first_ordered_c: Vec<Option<usize>>,
}

pub fn exp_convergence(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ConvergenceRow>, ConvergenceSummary)> {
    cfg.validate()?;
    let (dmu, dnu) = gaussians();
    let mut rows = Vec::with_capacity(cfg.sizes.len() * cfg.runs);
    for &size in &cfg.sizes {
        for run in 0..cfg.runs {
            let (mu_i, nu_i) = sample_pair(&dmu, &dnu, size, cfg.run_seed(run, size))?;
            let (d, u, bd, bu, p, _) = convergence_cell(&mu_i, &nu_i, cfg.cx_tol)?;
            let mu_c = center_to_mean(&mu_i, &[0.0])?;
            let nu_c = center_to_mean(&nu_i, &[0.0])?;
            let (dc, uc, bdc, buc, pc, ordered_c) = convergence_cell(&mu_c, &nu_c, cfg.cx_tol)?;
            rows.push(ConvergenceRow {
                size,
                run,
                w2_down: d,
                w2_up: u,
                bound_down: bd,
                bound_up: bu,
                proj: p,
                w2_down_c: dc,
                w2_up_c: uc,
                bound_down_c: bdc,
                bound_up_c: buc,
                proj_c: pc,
                ordered_c,
            });
        }
    }
    let slope = |f: fn(&ConvergenceRow) -> f64| {
        let pts: Vec<(f64, f64)> = cfg
            .sizes
            .iter()
            .map(|&s| {
                let mut v: Vec<f64> = rows.iter().filter(|r| r.size == s).map(f).collect();
                (s as f64, median(&mut v))
            })
            .collect();
        log_log_slope(&pts)
    };
    let slack = 1e-6;
    let bound_violations = rows
        .iter()
        .filter(|r| {
            r.w2_down > r.bound_down + slack
                || r.w2_up > r.bound_up + slack
                || r.w2_down_c > r.bound_down_c + slack
                || r.w2_up_c > r.bound_up_c + slack
        })
        .count();
    let mut sorted_sizes = cfg.sizes.clone();
    sorted_sizes.sort_unstable();
    let first_ordered_c = (0..cfg.runs)
        .map(|run| {
            sorted_sizes.iter().copied().find(|&s| {
                rows.iter()
                    .any(|r| r.run == run && r.size == s && r.ordered_c)
            })
        })
        .collect();
    let summary = ConvergenceSummary {
        slope_down: slope(|r| r.w2_down),
        slope_up: slope(|r| r.w2_up),
        slope_down_c: slope(|r| r.w2_down_c),
        slope_up_c: slope(|r| r.w2_up_c),
        bound_violations,
        first_ordered_c,
    };
    Ok((rows, summary))
}

/// `(down, up, bound_down, bound_up, proj, ordered)` for one sample pair.
fn convergence_cell(
    mu_i: &DiscreteMeasure,
    nu_i: &DiscreteMeasure,
    cx_tol: f64,
) -> Result<(f64, f64, f64, f64, f64, bool)> {
    let (s_mu, s_nu) = GAUSSIAN_PAIR;
    let down = project_down(mu_i, nu_i)?;
    let up = project_up(nu_i, mu_i)?;
    let e_mu = w2_vs_gaussian(mu_i, s_mu)?;
    let e_nu = w2_vs_gaussian(nu_i, s_nu)?;
    Ok((
        w2_vs_gaussian(&down.projected, s_mu)?,
        w2_vs_gaussian(&up.projected, s_nu)?,
        2.0 * e_mu + e_nu,
        e_mu + 2.0 * e_nu,
        down.distance_for(2.0),
        leq_cx_1d_tol(mu_i, nu_i, cx_tol)?,
    ))
}

/// Distance between the explicit and the quadratic-program projections of `μ_I`
/// onto the measures dominated by `ν_I`, Gaussian samples.
#[derive(Clone, Debug, Serialize)]
pub struct Table1Row {
    pub size: usize,
    pub run: usize,
    pub w2_explicit_qp: f64,
    pub qp_iterations: usize,
    pub qp_gap: f64,
    pub qp_certified: bool,
    pub qp_seconds: f64,
}

pub fn exp_table1(cfg: &ExperimentConfig) -> Result<Vec<Table1Row>> {
    cfg.validate()?;
    let (dmu, dnu) = gaussians();
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        for run in 0..cfg.runs {
            let (mu_i, nu_i) = sample_pair(&dmu, &dnu, size, cfg.run_seed(run, size))?;
            let explicit = project_down(&mu_i, &nu_i)?;
            let qp = project_qp(&mu_i, &nu_i, &cfg.qp)?;
            rows.push(Table1Row {
                size,
                run,
                w2_explicit_qp: w_rho_1d(&explicit.projected, &qp.projected, 2.0)?,
                qp_iterations: qp.report.iterations,
                qp_gap: qp.report.gap,
                qp_certified: qp.report.certified,
                qp_seconds: qp.report.wall_time_secs,
            });
        }
    }
    Ok(rows)
}

/// Largest componentwise distance of `y − x` to `{−1, 1}²` counted as on the lines.
pub const CLUSTER_RADIUS: f64 = 0.25;
/// Coupling entries below this mass are ignored by the cluster statistic.
pub const CLUSTER_MASS_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct MotRunRow {
    pub run: usize,
    pub size: usize,
    pub value: f64,
    pub qp_iterations: usize,
    pub qp_gap: f64,
    pub qp_certified: bool,
    pub martingale_residual: f64,
    /// Explicit example only: share of coupling mass with `y − x` near `{−1, 1}²`.
    pub cluster_fraction: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MotSummary {
    pub runs: usize,
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    /// Normal 95% confidence interval of the mean.
    pub ci: (f64, f64),
    pub mean_cluster_fraction: f64,
    pub min_cluster_fraction: f64,
}

fn summarize(rows: &[MotRunRow], size: usize) -> MotSummary {
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (mean, std) = mean_std(&values);
    let half = 1.96 * std / (rows.len() as f64).sqrt();
    let clusters: Vec<f64> = rows.iter().map(|r| r.cluster_fraction).collect();
    MotSummary {
        runs: rows.len(),
        size,
        mean,
        std,
        ci: (mean - half, mean + half),
        mean_cluster_fraction: mean_std(&clusters).0,
        min_cluster_fraction: clusters.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Mass share of coupling entries above [`CLUSTER_MASS_FLOOR`] whose displacement
/// is within [`CLUSTER_RADIUS`] of `{−1, 1}^d` in every coordinate.
pub fn cluster_fraction(sol: &MotSolution, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    for &(i, j, m) in sol.coupling.entries() {
        if m <= CLUSTER_MASS_FLOOR {
            continue;
        }
        total += m;
        let near = mu
            .atom(i)
            .iter()
            .zip(nu.atom(j))
            .all(|(x, y)| ((y - x).abs() - 1.0).abs() <= CLUSTER_RADIUS);
        if near {
            hit += m;
        }
    }
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

/// Projects the centered `μ_I` onto the measures dominated by the centered `ν_I`
/// and returns both marginals of the resulting MOT problem.
fn projected_marginals(
    dmu: &NamedDistribution,
    dnu: &NamedDistribution,
    size: usize,
    center: &[f64],
    seed: Seed,
    qp: &QpOptions,
) -> Result<(
    DiscreteMeasure,
    DiscreteMeasure,
    crate::qp_project::SolveReport,
)> {
    let (mu_i, nu_i) = sample_pair(dmu, dnu, size, seed)?;
    let mu_c = center_to_mean(&mu_i, center)?;
    let nu_c = center_to_mean(&nu_i, center)?;
    let proj = project_qp(&mu_c, &nu_c, qp)?;
    Ok((proj.projected, nu_c, proj.report))
}

/// `μ` uniform on `[−1, 1]²`, `ν` uniform on `[−2, 2]²`, cost `Σ_ℓ |x^ℓ − y^ℓ|^2.5`,
/// minimized. The continuous value is 2.
pub fn exp_2d(cfg: &ExperimentConfig) -> Result<(Vec<MotRunRow>, Vec<MotSummary>)> {
    cfg.validate()?;
    let dmu = NamedDistribution::cube(-1.0, 1.0, 2);
    let dnu = NamedDistribution::cube(-2.0, 2.0, 2);
    let payoff = Payoff::CoordinatewisePower { rho: 2.5 };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &size in &cfg.sizes {
        let start = rows.len();
        for run in 0..cfg.runs {
            let t = Instant::now();
            let (mu, nu, report) = projected_marginals(
                &dmu,
                &dnu,
                size,
                &[0.0, 0.0],
                cfg.run_seed(run, size),
                &cfg.qp,
            )?;
            let sol = solve_exact(&MotProblem::with_payoff(
                mu.clone(),
                nu.clone(),
                payoff,
                Sense::Min,
            )?)?;
            rows.push(MotRunRow {
                run,
                size,
                value: sol.objective,
                qp_iterations: report.iterations,
                qp_gap: report.gap,
                qp_certified: report.certified,
                martingale_residual: sol.martingale_residual,
                cluster_fraction: cluster_fraction(&sol, &mu, &nu),
                seconds: t.elapsed().as_secs_f64(),
            });
        }
        summaries.push(summarize(&rows[start..], size));
    }
    Ok((rows, summaries))
}

#[derive(Clone, Debug, Serialize)]
pub struct BestOfRow {
    pub run: usize,
    pub size: usize,
    pub lower: f64,
    pub upper: f64,
    /// Larger martingale residual of the two exact solves.
    pub martingale_residual: f64,
    pub qp_iterations: usize,
    pub qp_gap: f64,
    pub qp_certified: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BestOfSummary {
    pub runs: usize,
    pub size: usize,
    pub bs_price: f64,
    pub bs_paths: usize,
    pub lower_mean: f64,
    pub lower_std: f64,
    pub upper_mean: f64,
    pub upper_std: f64,
}

/// Monte-Carlo price of `max(Y¹ − X¹, Y² − X², 0)` in the two-asset Black–Scholes
/// model: `X = exp(G − diag Σ/2)`, `Y = X·exp(G′ − diag Σ/2)` with `G, G′ ~ N(0, Σ)` independent.
pub fn best_of_bs_price(paths: usize, seed: Seed) -> f64 {
    let step = NamedDistribution::BivariateLognormal {
        cov: NamedDistribution::ASSET_COV,
        horizon: 1.0,
    };
    let mut rng = seed.rng();
    let mut total = 0.0;
    for _ in 0..paths {
        let x = step.draw(&mut rng);
        let g = step.draw(&mut rng);
        total += (x[0] * (g[0] - 1.0)).max(x[1] * (g[1] - 1.0)).max(0.0);
    }
    total / paths as f64
}

/// Lower and upper MOT bounds for the best-of payoff between the lognormal laws at
/// horizons 1 and 2, after centering both samples on `(1, 1)` and projecting.
pub fn exp_bestof(
    cfg: &ExperimentConfig,
    bs_paths: usize,
) -> Result<(Vec<BestOfRow>, Vec<BestOfSummary>)> {
    cfg.validate()?;
    let lognormal = |horizon| NamedDistribution::BivariateLognormal {
        cov: NamedDistribution::ASSET_COV,
        horizon,
    };
    let (dmu, dnu) = (lognormal(1.0), lognormal(2.0));
    let bs_price = best_of_bs_price(bs_paths, cfg.seed.derive(u64::MAX, 0));
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &size in &cfg.sizes {
        let start = rows.len();
        for run in 0..cfg.runs {
            let t = Instant::now();
            let (mu, nu, report) = projected_marginals(
                &dmu,
                &dnu,
                size,
                &[1.0, 1.0],
                cfg.run_seed(run, size),
                &cfg.qp,
            )?;
            let lower = solve_exact(&MotProblem::with_payoff(
                mu.clone(),
                nu.clone(),
                Payoff::BestOf,
                Sense::Min,
            )?)?;
            let upper = solve_exact(&MotProblem::with_payoff(
                mu,
                nu,
                Payoff::BestOf,
                Sense::Max,
            )?)?;
            rows.push(BestOfRow {
                run,
                size,
                lower: lower.objective,
                upper: upper.objective,
                martingale_residual: lower.martingale_residual.max(upper.martingale_residual),
                qp_iterations: report.iterations,
                qp_gap: report.gap,
                qp_certified: report.certified,
                seconds: t.elapsed().as_secs_f64(),
            });
        }
        let slice = &rows[start..];
        let (lower_mean, lower_std) = mean_std(&slice.iter().map(|r| r.lower).collect::<Vec<_>>());
        let (upper_mean, upper_std) = mean_std(&slice.iter().map(|r| r.upper).collect::<Vec<_>>());
        summaries.push(BestOfSummary {
            runs: slice.len(),
            size,
            bs_price,
            bs_paths,
            lower_mean,
            lower_std,
            upper_mean,
            upper_std,
        });
    }
    Ok((rows, summaries))
}
