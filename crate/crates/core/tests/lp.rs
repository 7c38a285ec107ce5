mod common;

use common::{rng, vertex_enumeration_min, weights};
use cxot::lp::{self, cost_matrix, ot_plan, CostMatrix, LpProblem, LpSolution, LpStatus};
use cxot::Measure;
use rand::Rng;

/// Random `m × n` system with a strictly feasible point and positive costs.
fn random_lp(r: &mut impl Rng, m: usize, n: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let x0: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let b = a
        .iter()
        .map(|row| row.iter().zip(&x0).map(|(u, v)| u * v).sum())
        .collect();
    let c = (0..n).map(|_| r.random_range(0.0..3.0)).collect();
    (c, a, b)
}

fn assert_certificate(p: &LpProblem, s: &LpSolution) {
    let dual_obj: f64 = s.duals.iter().zip(p.rhs()).map(|(y, b)| y * b).sum();
    assert!(
        (dual_obj - s.objective).abs() <= 1e-8,
        "duality gap {}",
        dual_obj - s.objective
    );
    for j in 0..p.num_cols() {
        let reduced = p.costs()[j] - p.column(j).map(|(r, v)| s.duals[r] * v).sum::<f64>();
        assert!(reduced >= -1e-8, "column {j} prices out at {reduced}");
        assert!((s.x[j] * reduced).abs() <= 1e-8, "slackness at column {j}");
        assert!(s.x[j] >= -1e-12);
    }
    assert!(s.max_residual <= 1e-9);
}

#[test]
fn general_lps_match_vertex_enumeration() {
    for seed in 0..200 {
        let mut r = rng(seed);
        let m = r.random_range(1..=3);
        let n = r.random_range(m..=7);
        let (c, a, b) = random_lp(&mut r, m, n);
        let p = LpProblem::from_dense(c.clone(), &a, b.clone()).unwrap();
        let s = lp::solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal, "seed {seed}");
        let oracle = vertex_enumeration_min(&c, &a, &b).unwrap();
        assert!(
            (s.objective - oracle).abs() <= 1e-9,
            "seed {seed}: {} vs {oracle}",
            s.objective
        );
        assert_certificate(&p, &s);
    }
}

#[test]
fn beale_cycling_example_terminates() {
    let c = vec![0.0, 0.0, 0.0, -0.75, 150.0, -0.02, 6.0];
    let a = vec![
        vec![1.0, 0.0, 0.0, 0.25, -60.0, -0.04, 9.0],
        vec![0.0, 1.0, 0.0, 0.5, -90.0, -0.02, 3.0],
        vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    ];
    let p = LpProblem::<f64>::from_dense(c, &a, vec![0.0, 0.0, 1.0]).unwrap();
    let s = lp::solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective + 0.05).abs() <= 1e-12);
    assert_certificate(&p, &s);
}

#[test]
fn transport_lps_are_optimal_and_certified() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let (ni, nj) = (r.random_range(1..8), r.random_range(1..8));
        let (p, q) = (weights(&mut r, ni), weights(&mut r, nj));
        let mut problem = LpProblem::new(p.iter().chain(&q).copied().collect());
        for i in 0..ni {
            for j in 0..nj {
                problem
                    .push_column(r.random_range(-1.0..1.0), vec![(i, 1.0), (ni + j, 1.0)])
                    .unwrap();
            }
        }
        let s = lp::solve(&problem).unwrap();
        assert_eq!(s.status, LpStatus::Optimal, "seed {seed}");
        assert_certificate(&problem, &s);
        assert_eq!(
            lp::solve(&problem).unwrap().x,
            s.x,
            "seed {seed}: not deterministic"
        );
    }
}

#[test]
fn transport_simplex_matches_general_simplex() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let (ni, nj) = (r.random_range(1..12), r.random_range(1..12));
        let mu = Measure::from_points(
            (0..ni).map(|i| vec![i as f64]).collect(),
            weights(&mut r, ni),
        )
        .unwrap();
        let nu = Measure::from_points(
            (0..nj).map(|j| vec![j as f64]).collect(),
            weights(&mut r, nj),
        )
        .unwrap();
        let c = CostMatrix::new(
            ni,
            nj,
            (0..ni * nj).map(|_| r.random_range(0.0..5.0)).collect(),
        )
        .unwrap();
        let plan = ot_plan(&mu, &nu, &c).unwrap();
        assert!(plan.marginal_residual() <= 1e-9);
        let mut problem =
            LpProblem::new(mu.weights().iter().chain(nu.weights()).copied().collect());
        for i in 0..ni {
            for j in 0..nj {
                problem
                    .push_column(c.get(i, j), vec![(i, 1.0), (ni + j, 1.0)])
                    .unwrap();
            }
        }
        let s = lp::solve(&problem).unwrap();
        assert!((plan.cost(&c) - s.objective).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn forced_split_and_identity_plans() {
    let dirac = Measure::dirac(vec![0.0]).unwrap();
    let pm = Measure::uniform_1d(vec![-1.0, 1.0]).unwrap();
    let c = cost_matrix(&dirac, &pm, |x, y| (x[0] - y[0]).abs());
    assert_eq!(ot_plan(&dirac, &pm, &c).unwrap().cost(&c), 1.0);
    let c = cost_matrix(&pm, &pm, |x, y| (x[0] - y[0]).powi(2));
    let plan = ot_plan(&pm, &pm, &c).unwrap();
    assert_eq!(plan.cost(&c), 0.0);
    assert_eq!(plan.entries(), &[(0, 0, 0.5), (1, 1, 0.5)]);
}
