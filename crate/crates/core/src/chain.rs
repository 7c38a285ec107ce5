//! Sequences of marginals made increasing in convex order by successive projections.
//!
//! The backward chain keeps the last marginal and projects each earlier sample onto
//! the measures dominated by its successor's link. The forward chain keeps the first
//! marginal and projects each later sample onto the measures dominating its
//! predecessor's link; it is one-dimensional only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{leq_cx_1d_tol, leq_cx_lp, DiscreteMeasure, DEFAULT_CX_TOL};
use crate::mot::EXACT_SIZE_LIMIT;
use crate::project1d::{project_down, project_up};
use crate::qp_project::{project_qp, QpOptions, SolveReport};

/// Largest barycentric residual accepted as a martingale certificate.
const MARTINGALE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainDirection {
    Backward,
    Forward,
}

#[derive(Clone, Debug)]
pub struct ChainOptions {
    /// Exponent of the reported distances; the quadratic projection needs 2 in `d ≥ 2`.
    pub rho: f64,
    /// Keep going past non-certified or unordered links instead of failing.
    pub best_effort: bool,
    pub cx_tol: f64,
    pub qp: QpOptions,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            rho: 2.0,
            best_effort: false,
            cx_tol: DEFAULT_CX_TOL,
            qp: QpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkReport {
    /// Position of the link in the chain, from 0.
    pub index: usize,
    /// `W_ρ` between the sample and the link; `0` for the anchored marginal.
    pub distance: f64,
    /// The projector met its own tolerance.
    pub certified: bool,
    /// The link is in convex order with its neighbour towards the anchor.
    pub ordered: bool,
    /// Iterative projector summary (`d ≥ 2`).
    pub solver: Option<SolveReport>,
}

#[derive(Clone, Debug)]
pub struct MarginalChain {
    pub direction: ChainDirection,
    pub measures: Vec<DiscreteMeasure>,
    pub links: Vec<LinkReport>,
}

impl MarginalChain {
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn all_certified(&self) -> bool {
        self.links.iter().all(|l| l.certified && l.ordered)
    }
}

fn validate(samples: &[DiscreteMeasure]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a chain needs at least two marginals, got {}",
            samples.len()
        )));
    }
    let d = samples[0].dim();
    if let Some(m) = samples.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.dim(),
        });
    }
    Ok(())
}

fn anchor(index: usize) -> LinkReport {
    LinkReport {
        index,
        distance: 0.0,
        certified: true,
        ordered: true,
        solver: None,
    }
}

/// Checks `lower ≤cx upper`: quantiles in 1D, the martingale LP when it is small
/// enough, otherwise the barycentric residual of the projection coupling.
fn ordered(
    lower: &DiscreteMeasure,
    upper: &DiscreteMeasure,
    cx_tol: f64,
    qp_residual: Option<f64>,
) -> Result<bool> {
    if lower.dim() == 1 {
        return leq_cx_1d_tol(lower, upper, cx_tol);
    }
    if lower.len() * upper.len() <= EXACT_SIZE_LIMIT {
        return leq_cx_lp(lower, upper);
    }
    Ok(qp_residual.is_some_and(|r| r <= MARTINGALE_TOL))
}

/// `max_i ‖Σ_j π_ij y_j − p_i m_i‖∞`, scaled by the support size of `ν`.
fn barycentric_residual(res: &crate::qp_project::ProjectionQpResult, nu: &DiscreteMeasure) -> f64 {
    let d = nu.dim();
    let p = res.coupling.row_marginal();
    let mut acc = vec![0.0; p.len() * d];
    for &(i, j, m) in res.coupling.entries() {
        for (k, y) in nu.atom(j).iter().enumerate() {
            acc[i * d + k] += m * y;
        }
    }
    let scale = nu.coords().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let worst = res
        .barycenters
        .iter()
        .enumerate()
        .flat_map(|(i, m)| m.iter().enumerate().map(move |(k, v)| (i, k, *v)))
        .fold(0.0f64, |a, (i, k, v)| {
            a.max((acc[i * d + k] - p[i] * v).abs())
        });
    worst / scale
}

fn check(link: LinkReport, best_effort: bool, gap: (usize, f64)) -> Result<LinkReport> {
    if best_effort {
        return Ok(link);
    }
    if !link.certified {
        return Err(Error::Link {
            link: link.index,
            source: Box::new(Error::NonCertified {
                iterations: gap.0,
                gap: gap.1,
            }),
        });
    }
    if !link.ordered {
        return Err(Error::Link {
            link: link.index,
            source: Box::new(Error::NotInConvexOrder),
        });
    }
    Ok(link)
}

fn wrap<T>(link: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Link {
        link,
        source: Box::new(e),
    })
}

/// Backward induction: the last marginal is kept and link `k` is the projection of
/// `samples[k]` onto the measures dominated by link `k + 1`.
///
/// Uses the explicit projection in one dimension and the quadratic program otherwise.
pub fn backward_chain(samples: &[DiscreteMeasure], opts: &ChainOptions) -> Result<MarginalChain> {
    validate(samples)?;
    let n = samples.len();
    let mut measures = vec![samples[n - 1].clone()];
    let mut links = vec![anchor(n - 1)];
    for k in (0..n - 1).rev() {
        let upper = measures.last().expect("chain is non-empty");
        let (projected, report) = if samples[k].dim() == 1 {
            let res = wrap(k, project_down(&samples[k], upper))?;
            let link = LinkReport {
                index: k,
                distance: res.distance_for(opts.rho),
                certified: true,
                ordered: wrap(k, ordered(&res.projected, upper, opts.cx_tol, None))?,
                solver: None,
            };
            (res.projected, check(link, opts.best_effort, (0, 0.0))?)
        } else {
            let qp = QpOptions {
                rho: opts.rho,
                ..opts.qp.clone()
            };
            let res = wrap(k, project_qp(&samples[k], upper, &qp))?;
            let residual = barycentric_residual(&res, upper);
            let link = LinkReport {
                index: k,
                distance: res.report.objective.max(0.0).sqrt(),
                certified: res.report.certified,
                ordered: wrap(
                    k,
                    ordered(&res.projected, upper, opts.cx_tol, Some(residual)),
                )?,
                solver: Some(res.report.clone()),
            };
            let gap = (res.report.iterations, res.report.gap);
            (res.projected, check(link, opts.best_effort, gap)?)
        };
        measures.push(projected);
        links.push(report);
    }
    measures.reverse();
    links.reverse();
    Ok(MarginalChain {
        direction: ChainDirection::Backward,
        measures,
        links,
    })
}

/// Forward induction in one dimension: the first marginal is kept and link `k` is the
/// projection of `samples[k]` onto the measures dominating link `k − 1`.
pub fn forward_chain(samples: &[DiscreteMeasure], opts: &ChainOptions) -> Result<MarginalChain> {
    validate(samples)?;
    samples[0].require_1d()?;
    let mut measures = vec![samples[0].clone()];
    let mut links = vec![anchor(0)];
    for (k, sample) in samples.iter().enumerate().skip(1) {
        let lower = measures.last().expect("chain is non-empty");
        let res = wrap(k, project_up(sample, lower))?;
        let link = LinkReport {
            index: k,
            distance: res.distance_for(opts.rho),
            certified: true,
            ordered: wrap(k, ordered(lower, &res.projected, opts.cx_tol, None))?,
            solver: None,
        };
        links.push(check(link, opts.best_effort, (0, 0.0))?);
        measures.push(res.projected);
    }
    Ok(MarginalChain {
        direction: ChainDirection::Forward,
        measures,
        links,
    })
}
