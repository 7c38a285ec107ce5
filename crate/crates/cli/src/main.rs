use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cxot::chain::{backward_chain, forward_chain, ChainOptions};
use cxot::experiments::{self, write_csv, ExperimentConfig};
use cxot::lp::{self, cost_matrix, ot_plan, Coupling, LpProblem, LpStatus};
use cxot::measures::{read_measure, sample, write_measure, NamedDistribution, DEFAULT_CX_TOL};
use cxot::mot::{self, EntropicOptions, MotProblem, Payoff, Sense};
use cxot::project1d::{project_down, project_up};
use cxot::qp_project::{project_qp, FwVariant, QpOptions};
use cxot::{Error, Measure, Seed};

const EXIT_ORDER: u8 = 2;
const EXIT_NON_CERTIFIED: u8 = 3;
const EXIT_BAD_INPUT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cxot",
    version,
    about = "Wasserstein projections onto convex-order sets and martingale optimal transport"
)]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Stopping tolerance of the iterative solvers (QP gap, entropic residual).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Monte-Carlo runs for the experiments.
    #[arg(long, global = true, default_value_t = 30)]
    runs: usize,
    /// Relative tolerance of the convex-order checks.
    #[arg(long, global = true, default_value_t = DEFAULT_CX_TOL)]
    cx_tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Down,
    Up,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainDirArg {
    Backward,
    Forward,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Entropic,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Vanilla,
    AwayStep,
    FullyCorrective,
}

impl From<VariantArg> for FwVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Vanilla => FwVariant::Vanilla,
            VariantArg::AwayStep => FwVariant::AwayStep,
            VariantArg::FullyCorrective => FwVariant::FullyCorrective,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Explicit one-dimensional projection.
    Project1d {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// `down` projects mu below nu, `up` projects nu above mu.
        #[arg(long, value_enum, default_value = "down")]
        direction: DirectionArg,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        /// Also write the hull nodes to `hull.csv`.
        #[arg(long)]
        dump_hull: bool,
    },
    /// Quadratic-program projection of mu below nu, any dimension.
    ProjectQp {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, value_enum, default_value = "fully-corrective")]
        variant: VariantArg,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
    },
    /// Martingale optimal transport between two ordered measures.
    Mot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// `power[:rho]`, `best-of` or `call-spread`.
        #[arg(long, default_value = "power:2")]
        payoff: String,
        /// `min` or `max`.
        #[arg(long, default_value = "min")]
        sense: String,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        /// Final regularization; the entropic solver walks down to it from `max|c|`.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 20_000)]
        max_sweeps: usize,
    },
    /// Projection chain over several marginals.
    Chain {
        #[arg(long = "dir", value_enum, default_value = "backward")]
        direction: ChainDirArg,
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        /// Keep non-certified or unordered links instead of failing.
        #[arg(long)]
        best_effort: bool,
    },
    /// Convergence of projected Gaussian samples.
    ExpConvergence {
        #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128, 256, 512, 1024, 2048])]
        sizes: Vec<usize>,
    },
    /// Explicit versus quadratic-program projections.
    ExpTable1 {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 50, 100])]
        sizes: Vec<usize>,
    },
    /// Two-dimensional MOT example with a known value.
    #[command(name = "exp-2d")]
    Exp2d {
        #[arg(long, value_delimiter = ',', default_values_t = [100])]
        sizes: Vec<usize>,
    },
    /// MOT bounds on a best-of option.
    ExpBestof {
        #[arg(long, value_delimiter = ',', default_values_t = [100])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        bs_paths: usize,
    },
    /// Cross-checks the simplex solver against the transportation simplex.
    LpSelftest {
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

/// Non-zero exit that is not an error of the library.
struct Status(u8);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Status(code))) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let Some(err) = e.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 1;
    };
    match err.root() {
        Error::NotInConvexOrder | Error::Infeasible => EXIT_ORDER,
        Error::NonCertified { .. } => EXIT_NON_CERTIFIED,
        Error::DimensionMismatch { .. }
        | Error::NotOneDimensional(_)
        | Error::EmptyMeasure
        | Error::InvalidWeights(_)
        | Error::NonFinite(_)
        | Error::InvalidParameter(_)
        | Error::UnknownName { .. }
        | Error::Parse(_)
        | Error::Io(_)
        | Error::Csv(_) => EXIT_BAD_INPUT,
        _ => 1,
    }
}

fn load(path: &Path) -> Result<Measure> {
    read_measure(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(dir.join(name), &text)?;
    println!("{text}");
    Ok(())
}

fn write_coupling(path: &Path, c: &Coupling) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "mass"])?;
    for &(i, j, m) in c.entries() {
        w.write_record([i.to_string(), j.to_string(), format!("{m:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn qp_options(cli: &Cli) -> QpOptions {
    QpOptions {
        tol_gap: cli.tol,
        ..QpOptions::default()
    }
}

fn experiment_config(cli: &Cli, sizes: &[usize]) -> ExperimentConfig {
    ExperimentConfig {
        sizes: sizes.to_vec(),
        runs: cli.runs,
        seed: Seed(cli.seed),
        cx_tol: cli.cx_tol,
        qp: qp_options(cli),
        ..ExperimentConfig::default()
    }
}

fn run(cli: &Cli) -> Result<Option<Status>> {
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Project1d {
            mu,
            nu,
            direction,
            rho,
            dump_hull,
        } => {
            let (mu, nu) = (load(mu)?, load(nu)?);
            let res = match direction {
                DirectionArg::Down => project_down(&mu, &nu)?,
                DirectionArg::Up => project_up(&nu, &mu)?,
            };
            write_measure(out.join("projected.csv"), &res.projected)?;
            if *dump_hull {
                let mut w = csv::Writer::from_path(out.join("hull.csv"))?;
                w.write_record(["q", "psi"])?;
                for (q, v) in res.psi.nodes().iter().zip(res.psi.values()) {
                    w.write_record([q.to_string(), v.to_string()])?;
                }
                w.flush()?;
            }
            #[derive(Serialize)]
            struct Report {
                distance: f64,
                rho: f64,
                atoms: usize,
            }
            write_json(
                out,
                "projection.json",
                &Report {
                    distance: res.distance_for(*rho),
                    rho: *rho,
                    atoms: res.projected.len(),
                },
            )?;
            Ok(None)
        }
        Command::ProjectQp {
            mu,
            nu,
            variant,
            max_iter,
        } => {
            let (mu, nu) = (load(mu)?, load(nu)?);
            let opts = QpOptions {
                variant: (*variant).into(),
                max_iter: *max_iter,
                ..qp_options(cli)
            };
            let res = project_qp(&mu, &nu, &opts)?;
            write_measure(out.join("projected.csv"), &res.projected)?;
            write_coupling(&out.join("coupling.csv"), &res.coupling)?;
            write_json(out, "report.json", &res.report)?;
            Ok((!res.report.certified).then_some(Status(EXIT_NON_CERTIFIED)))
        }
        Command::Mot {
            mu,
            nu,
            payoff,
            sense,
            method,
            eps,
            max_sweeps,
        } => {
            let payoff: Payoff = payoff.parse()?;
            let sense: Sense = sense.parse()?;
            let problem = MotProblem::with_payoff(load(mu)?, load(nu)?, payoff, sense)?;
            let sol = match method {
                MethodArg::Exact => mot::solve_exact(&problem)?,
                MethodArg::Entropic => {
                    let start = problem.cost.max_abs().max(*eps);
                    let stages = (start / eps).log2().ceil().max(0.0) as usize + 1;
                    let mut schedule = mot::epsilon_schedule(start, 0.5, stages);
                    *schedule.last_mut().expect("at least one stage") = *eps;
                    let opts = EntropicOptions {
                        max_sweeps: *max_sweeps,
                        tol: cli.tol.unwrap_or(EntropicOptions::default().tol),
                    };
                    mot::solve_entropic_continuation(&problem, &schedule, &opts)?
                }
            };
            write_coupling(&out.join("coupling.csv"), &sol.coupling)?;
            #[derive(Serialize)]
            struct Report {
                value: f64,
                payoff: String,
                sense: &'static str,
                method: String,
                martingale_residual: f64,
                marginal_residual: f64,
                certified: bool,
                monotone_residual: bool,
            }
            let certified = sol.report.as_ref().is_none_or(|r| r.certified);
            write_json(
                out,
                "value.json",
                &Report {
                    value: sol.objective,
                    payoff: payoff.to_string(),
                    sense: if sense == Sense::Min { "min" } else { "max" },
                    method: format!("{:?}", sol.method),
                    martingale_residual: sol.martingale_residual,
                    marginal_residual: sol.marginal_residual,
                    certified,
                    monotone_residual: sol.monotone_residual,
                },
            )?;
            Ok((!certified).then_some(Status(EXIT_NON_CERTIFIED)))
        }
        Command::Chain {
            direction,
            inputs,
            best_effort,
        } => {
            let samples = inputs.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
            let opts = ChainOptions {
                best_effort: *best_effort,
                cx_tol: cli.cx_tol,
                qp: qp_options(cli),
                ..ChainOptions::default()
            };
            let chain = match direction {
                ChainDirArg::Backward => backward_chain(&samples, &opts)?,
                ChainDirArg::Forward => forward_chain(&samples, &opts)?,
            };
            for (k, m) in chain.measures.iter().enumerate() {
                write_measure(out.join(format!("link_{k}.csv")), m)?;
            }
            write_json(out, "chain.json", &chain.links)?;
            Ok((!chain.all_certified()).then_some(Status(EXIT_NON_CERTIFIED)))
        }
        Command::ExpConvergence { sizes } => {
            let (rows, summary) = experiments::exp_convergence(&experiment_config(cli, sizes))?;
            write_csv(&out.join("convergence.csv"), "convergence", &rows)?;
            write_json(out, "convergence.json", &summary)?;
            Ok(None)
        }
        Command::ExpTable1 { sizes } => {
            let rows = experiments::exp_table1(&experiment_config(cli, sizes))?;
            write_csv(&out.join("table1.csv"), "table1", &rows)?;
            #[derive(Serialize)]
            struct Worst {
                size: usize,
                max_w2: f64,
                max_seconds: f64,
            }
            let worst: Vec<Worst> = sizes
                .iter()
                .map(|&s| {
                    let sel = rows.iter().filter(|r| r.size == s);
                    Worst {
                        size: s,
                        max_w2: sel.clone().map(|r| r.w2_explicit_qp).fold(0.0, f64::max),
                        max_seconds: sel.map(|r| r.qp_seconds).fold(0.0, f64::max),
                    }
                })
                .collect();
            write_json(out, "table1.json", &worst)?;
            Ok(None)
        }
        Command::Exp2d { sizes } => {
            let (rows, summary) = experiments::exp_2d(&experiment_config(cli, sizes))?;
            write_csv(&out.join("exp2d.csv"), "exp2d", &rows)?;
            write_json(out, "exp2d.json", &summary)?;
            Ok(None)
        }
        Command::ExpBestof { sizes, bs_paths } => {
            let (rows, summary) =
                experiments::exp_bestof(&experiment_config(cli, sizes), *bs_paths)?;
            write_csv(&out.join("bestof.csv"), "bestof", &rows)?;
            write_json(out, "bestof.json", &summary)?;
            Ok(None)
        }
        Command::LpSelftest { cases } => lp_selftest(Seed(cli.seed), *cases),
    }
}

/// Random transportation problems solved by both simplex implementations.
fn lp_selftest(seed: Seed, cases: usize) -> Result<Option<Status>> {
    let mut failures = 0;
    for case in 0..cases {
        let s = seed.derive(case as u64, 0);
        let size = 2 + case % 7;
        let box2 = NamedDistribution::cube(-1.0, 1.0, 2);
        let mu = sample(&box2, size, s.derive(0, 0))?;
        let nu = sample(&box2, size + 1, s.derive(1, 0))?;
        let cost = cost_matrix(&mu, &nu, |x, y| {
            x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()
        });
        let network = ot_plan(&mu, &nu, &cost)?.cost(&cost);
        let (ni, nj) = (mu.len(), nu.len());
        let mut problem = LpProblem::new([mu.weights(), nu.weights()].concat());
        for i in 0..ni {
            for j in 0..nj {
                problem.push_column(cost.get(i, j), vec![(i, 1.0), (ni + j, 1.0)])?;
            }
        }
        let sol = lp::solve(&problem)?;
        let ok = sol.status == LpStatus::Optimal
            && (sol.objective - network).abs() <= 1e-9 * (1.0 + network.abs());
        if !ok {
            failures += 1;
            eprintln!(
                "case {case}: simplex {:?} {} vs network {network}",
                sol.status, sol.objective
            );
        }
    }
    println!("lp-selftest: {} of {cases} cases agree", cases - failures);
    Ok((failures > 0).then_some(Status(1)))
}
