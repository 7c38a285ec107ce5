//! Generators, brute-force oracles and property checks shared by the proptest
//! suites and the acceptance harness. Every check takes a seed and returns the
//! first violation it finds.
#![allow(dead_code)]

use cxot::hull::{convex_hull, PiecewiseLinear};
use cxot::lp::{self, ot_plan, CostMatrix, LpProblem, LpStatus};
use cxot::measures::{baker_discretize, leq_cx_1d, quantile, QuantileFn};
use cxot::mot::{random_interior_instance, solve_exact, MotProblem, Payoff, Sense};
use cxot::project1d::irreducible_components;
use cxot::{Measure, Seed};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    Seed(seed).rng()
}

/// Random positive weights summing to one.
pub fn weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// One-dimensional measure with up to `max_atoms` atoms on a grid of step 1/4, so ties occur.
pub fn measure_1d(rng: &mut impl Rng, max_atoms: usize) -> Measure {
    let n = rng.random_range(1..=max_atoms);
    let xs = (0..n)
        .map(|_| rng.random_range(-12..=12) as f64 / 4.0)
        .collect();
    Measure::from_1d(xs, weights(rng, n)).unwrap()
}

/// `(μ, ν)` with `μ ≤cx ν`: every atom of `μ` is split into a centered two-point law.
pub fn ordered_pair_1d(rng: &mut impl Rng, max_atoms: usize) -> (Measure, Measure) {
    let mu = measure_1d(rng, max_atoms);
    let (mut ys, mut ws) = (Vec::new(), Vec::new());
    for (&x, &p) in mu.coords().iter().zip(mu.weights()) {
        if rng.random_bool(0.2) {
            ys.push(x);
            ws.push(p);
            continue;
        }
        let a = rng.random_range(0.1..2.0);
        let b = rng.random_range(0.1..2.0);
        ys.extend([x - a, x + b]);
        ws.extend([p * b / (a + b), p * a / (a + b)]);
    }
    (mu, Measure::from_1d(ys, ws).unwrap())
}

/// Piecewise-linear function with `k ≥ 2` random nodes and values.
pub fn pwl(rng: &mut impl Rng, k: usize) -> PiecewiseLinear {
    let mut inner: Vec<f64> = (0..k - 2).map(|_| rng.random_range(0.01..0.99)).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut nodes = vec![0.0];
    nodes.extend(inner);
    nodes.push(1.0);
    let values = nodes.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    PiecewiseLinear::new(nodes, values).unwrap()
}

/// Largest convex minorant at every node, by minimizing over all chords spanning it.
pub fn brute_lower_envelope(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let k = nodes.len();
    (0..k)
        .map(|m| {
            let mut best = values[m];
            for a in 0..=m {
                for b in m..k {
                    if a == b {
                        continue;
                    }
                    let t = (nodes[m] - nodes[a]) / (nodes[b] - nodes[a]);
                    best = best.min(values[a] + t * (values[b] - values[a]));
                }
            }
            best
        })
        .collect()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum of `cᵀx` over the basic feasible solutions of `A x = b, x ≥ 0`,
/// with `A` of full row rank.
pub fn vertex_enumeration_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let (m, n) = (a.len(), c.len());
    let mut best: Option<f64> = None;
    for cols in subsets(n, m) {
        let sub: Vec<Vec<f64>> = a
            .iter()
            .map(|row| cols.iter().map(|&j| row[j]).collect())
            .collect();
        let Some(x) = dense_solve(sub, b.to_vec()) else {
            continue;
        };
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let obj: f64 = cols.iter().zip(&x).map(|(&j, v)| c[j] * v).sum();
        if best.is_none_or(|o| obj < o) {
            best = Some(obj);
        }
    }
    best
}

/// Transportation constraints of an `I × J` problem without the redundant last column row.
pub fn transport_system(p: &[f64], q: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (ni, nj) = (p.len(), q.len());
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..ni {
        a.push(
            (0..ni * nj)
                .map(|k| if k / nj == i { 1.0 } else { 0.0 })
                .collect(),
        );
        b.push(p[i]);
    }
    for j in 0..nj - 1 {
        a.push(
            (0..ni * nj)
                .map(|k| if k % nj == j { 1.0 } else { 0.0 })
                .collect(),
        );
        b.push(q[j]);
    }
    (a, b)
}

/// Minimum over permutations of `Σ_i c[i][σ(i)] / n`, the optimum of a uniform square
/// transportation problem by Birkhoff's theorem.
pub fn permutation_min(c: &[Vec<f64>]) -> f64 {
    fn rec(i: usize, used: &mut [bool], acc: f64, c: &[Vec<f64>], best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == c.len() {
            *best = acc;
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                rec(i + 1, used, acc + c[i][j], c, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut vec![false; c.len()], 0.0, c, &mut best);
    best / c.len() as f64
}

/// Baker discretizations preserve convex order across refinements `I → kI`.
pub fn check_baker_preservation(seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mu, nu) = ordered_pair_1d(&mut rng, 6);
    let (qm, qn) = (quantile(&mu).unwrap(), quantile(&nu).unwrap());
    let i = [1usize, 2, 4][rng.random_range(0..3)];
    let k = rng.random_range(1..=3);
    let bm: Measure = baker_discretize(&qm, i).unwrap();
    let bn: Measure = baker_discretize(&qn, k * i).unwrap();
    if leq_cx_1d(&bm, &bn).unwrap() {
        Ok(())
    } else {
        Err(format!(
            "seed {seed}: baker(μ, {i}) not ≤cx baker(ν, {})",
            k * i
        ))
    }
}

/// Monotone-chain hull equals the brute-force lower envelope at every node.
pub fn check_hull_brute_force(seed: u64) -> Check {
    let mut rng = rng(seed);
    let k = rng.random_range(2..=12);
    let f = pwl(&mut rng, k);
    let h = convex_hull(&f);
    let env = brute_lower_envelope(f.nodes(), f.values());
    for (q, e) in f.nodes().iter().zip(&env) {
        let got = h.eval(q);
        if (got - e).abs() > 1e-12 {
            return Err(format!("seed {seed}: hull({q}) = {got}, envelope {e}"));
        }
    }
    Ok(())
}

/// Simplex and transportation simplex agree with vertex enumeration on small transport LPs.
pub fn check_lp_vertex_enumeration(seed: u64) -> Check {
    let mut rng = rng(seed);
    let square = rng.random_bool(0.5);
    let (ni, nj) = if square {
        let n = rng.random_range(1..=6);
        (n, n)
    } else {
        (rng.random_range(1..=3), rng.random_range(1..=3))
    };
    let (p, q) = if square {
        (vec![1.0 / ni as f64; ni], vec![1.0 / nj as f64; nj])
    } else {
        (weights(&mut rng, ni), weights(&mut rng, nj))
    };
    let c: Vec<f64> = (0..ni * nj).map(|_| rng.random_range(0.0..10.0)).collect();
    let oracle = if square {
        let rows: Vec<Vec<f64>> = c.chunks(nj).map(<[f64]>::to_vec).collect();
        permutation_min(&rows)
    } else {
        let (a, b) = transport_system(&p, &q);
        vertex_enumeration_min(&c, &a, &b).ok_or(format!("seed {seed}: no vertex"))?
    };

    let mut problem = LpProblem::new(p.iter().chain(&q).copied().collect());
    for i in 0..ni {
        for j in 0..nj {
            problem
                .push_column(c[i * nj + j], vec![(i, 1.0), (ni + j, 1.0)])
                .unwrap();
        }
    }
    let sol = lp::solve(&problem).map_err(|e| format!("seed {seed}: {e}"))?;
    if sol.status != LpStatus::Optimal || (sol.objective - oracle).abs() > 1e-9 {
        return Err(format!(
            "seed {seed}: simplex {:?} {} vs {oracle}",
            sol.status, sol.objective
        ));
    }
    let mu = Measure::from_points((0..ni).map(|i| vec![i as f64]).collect(), p).unwrap();
    let nu = Measure::from_points((0..nj).map(|j| vec![j as f64]).collect(), q).unwrap();
    let plan = ot_plan(&mu, &nu, &CostMatrix::new(ni, nj, c.clone()).unwrap())
        .map_err(|e| e.to_string())?;
    let cost = plan.cost(&CostMatrix::new(ni, nj, c).unwrap());
    if (cost - oracle).abs() > 1e-9 {
        return Err(format!("seed {seed}: transport simplex {cost} vs {oracle}"));
    }
    Ok(())
}

/// The quantile of the image of Lebesgue measure under a left-continuous step
/// function equals that function inside every step.
pub fn check_quantile_pushforward(seed: u64) -> Check {
    let mut rng = rng(seed);
    let k = rng.random_range(1..=8);
    let mut bps: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.01..0.99)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut breakpoints = vec![0.0];
    breakpoints.extend(bps);
    breakpoints.push(1.0);
    let mut values: Vec<f64> = (0..breakpoints.len() - 1)
        .map(|_| rng.random_range(-4..=4) as f64 / 2.0)
        .collect();
    values.sort_by(f64::total_cmp);
    let f = QuantileFn::new(breakpoints.clone(), values.clone()).unwrap();
    let image = f.to_measure().unwrap();
    let q = quantile(&image).unwrap();
    for (w, &v) in breakpoints.windows(2).zip(&values) {
        for t in [0.01, 0.5, 0.99] {
            let p = w[0] + t * (w[1] - w[0]);
            if q.eval(&p) != v {
                return Err(format!(
                    "seed {seed}: quantile({p}) = {}, step value {v}",
                    q.eval(&p)
                ));
            }
        }
    }
    Ok(())
}

/// Exact MOT couplings are martingales up to `1e-8` times the problem scale.
pub fn check_mot_martingale(seed: u64) -> Check {
    let mut rng = rng(seed);
    let d = rng.random_range(1..=2);
    let ni = rng.random_range(2..=8);
    let nj = rng.random_range(2..=10);
    let (mu, nu) = random_interior_instance(ni, nj, d, Seed(seed)).map_err(|e| e.to_string())?;
    let payoff = if d == 2 && rng.random_bool(0.5) {
        Payoff::BestOf
    } else {
        Payoff::CoordinatewisePower {
            rho: rng.random_range(1.0..3.0),
        }
    };
    let sense = if rng.random_bool(0.5) {
        Sense::Min
    } else {
        Sense::Max
    };
    let sol = solve_exact(&MotProblem::with_payoff(mu, nu, payoff, sense).unwrap())
        .map_err(|e| format!("seed {seed}: {e}"))?;
    if sol.martingale_residual > 1e-8 || sol.marginal_residual > 1e-9 {
        return Err(format!(
            "seed {seed}: martingale residual {:e}, marginal residual {:e}",
            sol.martingale_residual, sol.marginal_residual
        ));
    }
    Ok(())
}

fn cdf(m: &Measure, t: f64, strict: bool) -> f64 {
    m.coords()
        .iter()
        .zip(m.weights())
        .filter(|(&x, _)| if strict { x < t } else { x <= t })
        .map(|(_, w)| w)
        .sum()
}

/// Components match up: `q̲ = F_μ(t̲)`, `q̄ = F_μ(t̄−)` and `F_μ⁻¹` maps each
/// probability interval into its space interval.
pub fn check_components(seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mu, nu) = ordered_pair_1d(&mut rng, 6);
    let comps = irreducible_components(&mu, &nu).map_err(|e| format!("seed {seed}: {e}"))?;
    let qmu = quantile(&mu).unwrap();
    for (&(ql, qh), &(tl, th)) in comps.q_intervals.iter().zip(&comps.t_intervals) {
        if (cdf(&mu, tl, false) - ql).abs() > 1e-9 || (cdf(&mu, th, true) - qh).abs() > 1e-9 {
            return Err(format!(
                "seed {seed}: ({ql}, {qh}) vs F_μ(t̲) = {}, F_μ(t̄−) = {}",
                cdf(&mu, tl, false),
                cdf(&mu, th, true)
            ));
        }
        for t in [0.01, 0.5, 0.99] {
            let x = qmu.eval(&(ql + t * (qh - ql)));
            if x < tl || x > th {
                return Err(format!("seed {seed}: F_μ⁻¹ image {x} outside ({tl}, {th})"));
            }
        }
    }
    Ok(())
}

/// Runs `check` on seeds `0..cases`, returning the failure count and the first message.
pub fn run_cases(cases: u64, check: fn(u64) -> Check) -> (usize, Option<String>) {
    let mut failures = 0;
    let mut first = None;
    for seed in 0..cases {
        if let Err(msg) = check(seed) {
            failures += 1;
            first.get_or_insert(msg);
        }
    }
    (failures, first)
}
