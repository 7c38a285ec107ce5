//! Explicit one-dimensional projections onto convex-order sets.
//!
//! With `f(q) = ∫_0^q (F_μ⁻¹ − F_ν⁻¹)` and `ψ` its convex hull:
//!
//! * the projection of `μ` onto `{η : η ≤cx ν}` has quantile `F_μ⁻¹ − ψ′`
//!   ([`project_down`]);
//! * the projection of `ν` onto `{η : μ ≤cx η}` has quantile `F_ν⁻¹ − ψ̃′` with
//!   `ψ̃` the concave hull of `q ↦ f(1) − f(q)` ([`project_up`]);
//! * both projections are at distance `(∫|ψ′|^ρ)^{1/ρ}` for every `ρ ≥ 1`.
//!
//! The result does not depend on `ρ`.

use crate::error::{Error, Result};
use crate::hull::{concave_hull, convex_hull, integrated_quantile_diff, PiecewiseLinear};
use crate::measures::quantile::merged_cells;
use crate::measures::{convex_order_scale, leq_cx_1d, quantile, w_rho_1d, DiscreteMeasure};
use crate::scalar::Scalar;

/// Strict-positivity threshold for component detection, relative to the moment scale.
const COMPONENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Projection of `μ` onto the measures dominated by `ν`.
    Down,
    /// Projection of `ν` onto the measures dominating `μ`.
    Up,
}

#[derive(Clone, Debug)]
pub struct Projection1DResult<T = f64> {
    pub direction: Direction,
    pub projected: DiscreteMeasure<T>,
    /// `ψ` for [`Direction::Down`], `ψ̃` for [`Direction::Up`].
    pub psi: PiecewiseLinear<T>,
    /// `(source atom, image, mass)` of the monotone transport onto `projected`.
    pub transport_pairs: Vec<(T, T, T)>,
}

impl<T: Scalar> Projection1DResult<T> {
    /// `(∫_0^1 |ψ′|^ρ)^{1/ρ}`, the distance between the projected measure and its source.
    pub fn distance_for(&self, rho: f64) -> f64 {
        self.psi.derivative_power_integral(rho).powf(1.0 / rho)
    }
}

/// `μ_{P̲(ν)}`: closest measure to `mu` that is dominated by `nu` in convex order.
///
/// Atoms are `z_i = x_i − (ψ(P_i) − ψ(P_{i−1}))/p_i` with the weights of `mu`.
pub fn project_down<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<Projection1DResult<T>> {
    let qm = quantile(mu)?;
    let qn = quantile(nu)?;
    let psi = convex_hull(&integrated_quantile_diff(&qm, &qn));

    let bp = qm.breakpoints();
    let mut pairs = Vec::with_capacity(qm.len());
    let mut prev = psi.eval(&bp[0]);
    for (k, (x, p)) in qm.values().iter().zip(mu.weights()).enumerate() {
        let next = psi.eval(&bp[k + 1]);
        let p = p.clone();
        let z = x.clone() - (next.clone() - prev) / p.clone();
        pairs.push((x.clone(), z, p));
        prev = next;
    }
    let projected = pairs_to_measure(&pairs)?;
    Ok(Projection1DResult {
        direction: Direction::Down,
        projected,
        psi,
        transport_pairs: pairs,
    })
}

/// `ν_{P̄(μ)}`: closest measure to `nu` that dominates `mu` in convex order.
///
/// Lives on the common refinement of both breakpoint sets, so it has at most `I + J` atoms.
pub fn project_up<T: Scalar>(
    nu: &DiscreteMeasure<T>,
    mu: &DiscreteMeasure<T>,
) -> Result<Projection1DResult<T>> {
    let qm = quantile(mu)?;
    let qn = quantile(nu)?;
    let f = integrated_quantile_diff(&qm, &qn);
    let total = f.values()[f.len() - 1].clone();
    let g = PiecewiseLinear::new(
        f.nodes().to_vec(),
        f.values()
            .iter()
            .map(|v| total.clone() - v.clone())
            .collect(),
    )?;
    let psi = concave_hull(&g);

    let pairs: Vec<(T, T, T)> = merged_cells(&qm, &qn)
        .into_iter()
        .map(|c| {
            let w = c.hi.clone() - c.lo.clone();
            let slope = (psi.eval(&c.hi) - psi.eval(&c.lo)) / w.clone();
            (c.v2.clone(), c.v2 - slope, w)
        })
        .collect();
    let projected = pairs_to_measure(&pairs)?;
    Ok(Projection1DResult {
        direction: Direction::Up,
        projected,
        psi,
        transport_pairs: pairs,
    })
}

fn pairs_to_measure<T: Scalar>(pairs: &[(T, T, T)]) -> Result<DiscreteMeasure<T>> {
    DiscreteMeasure::from_1d(
        pairs.iter().map(|p| p.1.clone()).collect(),
        pairs.iter().map(|p| p.2.clone()).collect(),
    )
}

/// `(W_ρ(ν_{P̄(μ)}, ν), W_ρ(μ, μ_{P̲(ν)}), (∫|ψ′|^ρ)^{1/ρ})`, which coincide.
pub fn distance_identity_check<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    rho: f64,
) -> Result<(f64, f64, f64)> {
    let down = project_down(mu, nu)?;
    let up = project_up(nu, mu)?;
    Ok((
        w_rho_1d(&up.projected, nu, rho)?,
        w_rho_1d(mu, &down.projected, rho)?,
        down.distance_for(rho),
    ))
}

/// Irreducible components of a convex-ordered pair `μ ≤cx ν`.
///
/// `q_intervals[n]` is a maximal open interval where `∫_0^q (F_μ⁻¹ − F_ν⁻¹) > 0`;
/// `t_intervals[n]` is the matching maximal interval where `E(t − X)⁺ < E(t − Y)⁺`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrreducibleComponents<T = f64> {
    pub q_intervals: Vec<(T, T)>,
    pub t_intervals: Vec<(T, T)>,
}

impl<T> IrreducibleComponents<T> {
    pub fn len(&self) -> usize {
        self.q_intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_intervals.is_empty()
    }
}

pub fn irreducible_components<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<IrreducibleComponents<T>> {
    if !leq_cx_1d(mu, nu)? {
        return Err(Error::NotInConvexOrder);
    }
    let tol = T::tol(COMPONENT_TOL) * convex_order_scale(mu, nu);
    let f = integrated_quantile_diff(&quantile(mu)?, &quantile(nu)?);
    let q_intervals = positive_runs(f.nodes(), f.values(), &tol);

    let mut grid: Vec<T> = mu
        .support_1d()?
        .iter()
        .chain(nu.support_1d()?)
        .cloned()
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite atoms"));
    grid.dedup();
    let gap: Vec<T> = grid
        .iter()
        .map(|t| call_potential(nu, t) - call_potential(mu, t))
        .collect();
    let t_intervals = positive_runs(&grid, &gap, &tol);

    if q_intervals.len() != t_intervals.len() {
        return Err(Error::Solver(format!(
            "found {} probability intervals but {} space intervals",
            q_intervals.len(),
            t_intervals.len()
        )));
    }
    Ok(IrreducibleComponents {
        q_intervals,
        t_intervals,
    })
}

/// `E(t − X)⁺`.
fn call_potential<T: Scalar>(m: &DiscreteMeasure<T>, t: &T) -> T {
    m.coords()
        .iter()
        .zip(m.weights())
        .filter(|(x, _)| *x < t)
        .fold(T::zero(), |acc, (x, w)| {
            acc + w.clone() * (t.clone() - x.clone())
        })
}

/// Maximal open intervals `(grid[a-1], grid[b+1])` around runs `a..=b` with `values > tol`.
fn positive_runs<T: Scalar>(grid: &[T], values: &[T], tol: &T) -> Vec<(T, T)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..grid.len() {
        let positive = &values[k] > tol;
        match (positive, start) {
            (true, None) => start = Some(k),
            (false, Some(a)) => {
                runs.push((grid[a.saturating_sub(1)].clone(), grid[k].clone()));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push((
            grid[a.saturating_sub(1)].clone(),
            grid[grid.len() - 1].clone(),
        ));
    }
    runs
}

/// Optimal map `T` evaluated on `supp(μ) ∪ supp(ν_{P̄(μ)})`, sorted by `x`.
///
/// Inside component `n` of `(μ, ν_{P̄(μ)})` the map is the shift `x ↦ x − s_n` by the
/// chord slope of `ψ`; elsewhere it is `F_ν⁻¹ ∘ F_{ν_{P̄(μ)}}`. Atoms of `μ` outside
/// every component are mapped through their own probability cell, which is the value
/// of that formula on the cell and keeps the pushforward exact.
pub fn transport_map<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<Vec<(T, T)>> {
    let down = project_down(mu, nu)?;
    let up = project_up(nu, mu)?;
    let comps = irreducible_components(mu, &up.projected)?;
    let shifts: Vec<T> = comps
        .q_intervals
        .iter()
        .map(|(lo, hi)| (down.psi.eval(hi) - down.psi.eval(lo)) / (hi.clone() - lo.clone()))
        .collect();
    let component_of = |x: &T| {
        comps
            .t_intervals
            .iter()
            .position(|(lo, hi)| lo < x && x < hi)
    };

    let qn = quantile(nu)?;
    let q_up = quantile(&up.projected)?;
    let cdf_up = |x: &T| {
        let k = q_up.values().partition_point(|v| v <= x);
        q_up.breakpoints()[k].clone()
    };

    let mut out: Vec<(T, T)> = down
        .transport_pairs
        .iter()
        .map(|(x, z, _)| match component_of(x) {
            Some(n) => (x.clone(), x.clone() - shifts[n].clone()),
            None => (x.clone(), z.clone()),
        })
        .collect();
    for y in up.projected.coords() {
        if out.iter().any(|(x, _)| x == y) {
            continue;
        }
        let image = match component_of(y) {
            Some(n) => y.clone() - shifts[n].clone(),
            None => qn.eval(&cdf_up(y)),
        };
        out.push((y.clone(), image));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite atoms"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn pm(a: f64) -> DiscreteMeasure {
        DiscreteMeasure::uniform_1d(vec![-a, a]).unwrap()
    }

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn dilation_projects_onto_target() {
        let down = project_down(&pm(2.0), &pm(1.0)).unwrap();
        assert_eq!(down.projected, pm(1.0));
        assert_eq!(down.distance_for(2.0), 1.0);
        let up = project_up(&pm(1.0), &pm(2.0)).unwrap();
        assert_eq!(up.projected, pm(2.0));
        assert_eq!(up.distance_for(2.0), 1.0);
        let (a, b, c) = distance_identity_check(&pm(2.0), &pm(1.0), 2.0).unwrap();
        assert_eq!((a, b, c), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ordered_pair_is_fixed() {
        let mu = DiscreteMeasure::from_1d(vec![-1.0, 0.5], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let nu = pm(3.0);
        let down = project_down(&mu, &nu).unwrap();
        assert_eq!(down.projected, mu);
        assert_eq!(down.distance_for(2.0), 0.0);
        let up = project_up(&nu, &mu).unwrap();
        assert_eq!(up.projected, nu);
    }

    #[test]
    fn dirac_at_mean_leaves_target_unchanged() {
        let nu = DiscreteMeasure::from_1d(vec![-1.0, 2.0, 5.0], vec![0.5, 0.25, 0.25]).unwrap();
        let mu = DiscreteMeasure::dirac(nu.mean()).unwrap();
        assert_eq!(project_up(&nu, &mu).unwrap().projected, nu);
    }

    #[test]
    fn translation_is_undone_exactly() {
        let mu = DiscreteMeasure::uniform_1d(vec![rat(-3), rat(0), rat(1), rat(2)]).unwrap();
        let alpha = BigRational::new(7.into(), 4.into());
        let shifted = mu.shifted(&[alpha]).unwrap();
        let down = project_down(&shifted, &mu).unwrap();
        assert_eq!(down.projected, mu);
        assert!((down.distance_for(2.0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn components_of_a_single_dilation() {
        let dirac = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let comps = irreducible_components(&dirac, &pm(1.0)).unwrap();
        assert_eq!(comps.q_intervals, vec![(0.0, 1.0)]);
        assert_eq!(comps.t_intervals, vec![(-1.0, 1.0)]);
        assert!(irreducible_components(&pm(1.0), &pm(1.0))
            .unwrap()
            .is_empty());
        assert!(matches!(
            irreducible_components(&pm(1.0), &dirac),
            Err(Error::NotInConvexOrder)
        ));
    }

    #[test]
    fn two_separated_dilations() {
        let mu = DiscreteMeasure::uniform_1d(vec![-5.0, 5.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(vec![-6.0, -4.0, 4.0, 6.0]).unwrap();
        let comps = irreducible_components(&mu, &nu).unwrap();
        assert_eq!(comps.q_intervals, vec![(0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(comps.t_intervals, vec![(-6.0, -4.0), (4.0, 6.0)]);
    }

    #[test]
    fn transport_map_on_dilation() {
        let t = transport_map(&pm(2.0), &pm(1.0)).unwrap();
        assert_eq!(t, vec![(-2.0, -1.0), (2.0, 1.0)]);
        let ordered = transport_map(&pm(1.0), &pm(2.0)).unwrap();
        assert!(ordered
            .iter()
            .filter(|(x, _)| x.abs() == 1.0)
            .all(|(x, y)| x == y));
    }
}
