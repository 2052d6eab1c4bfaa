//! `synq` command line: model ingestion, transform evaluation, simulation
//! and verification.
//!
//! Exit codes: 0 success, 1 model/validation/usage error, 2 numeric failure
//! (near-pole rejection, bracket overflow), 3 verification failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use synq::model::{model_from_json, AlphaVector, ValidatedModel};
use synq::psi::{psi, psi_derivatives_at_zero, psi_shifted, PsiQuery, PsiSecondDerivative};
use synq::sim::{priority_oracle, simulate, SimConfig, SimEstimate};
use synq::steady_state::{
    decomposition, decomposition_identity_check, lst_2d_closed, lst_w, lst_z, moments_w,
    TransformSpace,
};
use synq::verify::{default_plan, run as run_verify, VerifyPlan};
use synq::Error;

#[derive(Parser)]
#[command(name = "synq", version, about = "Parallel fluid queues under one coupled Lévy input: \
steady-state transforms, decomposition, moments, and Monte Carlo verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Model description file (JSON).
    #[arg(short, long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Z,
    W,
}

#[derive(Subcommand)]
enum Command {
    /// Check every structural assumption of a model file.
    Validate(ModelArg),
    /// Evaluate the Laplace exponent phi (or phi_tilde / phi_k / eta).
    Phi {
        #[command(flatten)]
        model: ModelArg,
        /// Argument vector, comma separated.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "k")]
        v: Option<String>,
        /// Interpret --v as a Z-space alpha and evaluate phi_tilde.
        #[arg(long, requires = "v")]
        tilde: bool,
        /// Interpret --v as the (n-1)-dim tail and evaluate eta.
        #[arg(long, requires = "v", conflicts_with = "tilde")]
        eta: bool,
        /// Evaluate phi_k at --beta with k leading components.
        #[arg(short, long, requires = "beta")]
        k: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Solve for the root psi_k at a nonnegative tail.
    Psi {
        #[command(flatten)]
        model: ModelArg,
        #[arg(short, long)]
        k: usize,
        /// Tail (alpha_{k+1}, ..., alpha_n), comma separated.
        #[arg(long, allow_hyphen_values = true)]
        tail: String,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        /// Tail is a signed Z-space tail; return the shifted root instead.
        #[arg(long)]
        shifted: bool,
        /// Also report the derivatives of psi_k at the zero tail.
        #[arg(long)]
        derivatives: bool,
    },
    /// Evaluate the steady-state workload transform.
    Lst {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "w", ignore_case = true)]
        space: SpaceArg,
        /// One argument point, comma separated.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "alpha_file")]
        alpha: Option<String>,
        /// CSV of argument points (one row per point); output is CSV.
        #[arg(long)]
        alpha_file: Option<PathBuf>,
        /// Use the two-factor closed form (n = 2) instead of the recursion.
        #[arg(long)]
        closed_form: bool,
    },
    /// Factor the workload transform into its n per-level terms.
    Decompose {
        #[command(flatten)]
        model: ModelArg,
        /// W-space point, comma separated.
        #[arg(long, conflicts_with = "alpha_file")]
        alpha: Option<String>,
        #[arg(long)]
        alpha_file: Option<PathBuf>,
    },
    /// Closed-form moments of the input and of the stationary workloads.
    Moments(ModelArg),
    /// Compare the two sides of the distributional identity on a grid.
    CheckIdentity {
        #[command(flatten)]
        model: ModelArg,
        /// alpha_2 grid, comma separated.
        #[arg(long, default_value = "0.5,1,2,5")]
        grid: String,
    },
    /// Monte Carlo simulation of the reflected workload vector.
    Simulate(SimArgs),
    /// Preemptive-resume priority oracle against the parallel simulation.
    PriorityCheck(SimArgs),
    /// Run a verification plan and emit the JSON report.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        /// Plan file (JSON); the built-in default plan when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Override the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 5000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    /// Euler step width (required when sigma > 0).
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    burn_in: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// W-space transform probe point, repeatable.
    #[arg(long = "alpha-w")]
    alpha_w: Vec<String>,
    /// Z-space transform probe point, repeatable.
    #[arg(long = "alpha-z", allow_hyphen_values = true)]
    alpha_z: Vec<String>,
    /// Dump per-replication summaries as CSV to this file.
    #[arg(long)]
    dump_reps: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NearPole { .. }
            | Error::BracketOverflow { .. }
            | Error::InfiniteMean
            | Error::InfiniteMoment(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SYNQ_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = synq::configure_threads(n) {
                    eprintln!("synq: could not size the worker pool: {e}");
                }
            }
            _ => eprintln!("synq: ignoring invalid SYNQ_THREADS={threads}"),
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("synq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_model(arg: &ModelArg) -> Result<ValidatedModel, Failure> {
    let text = fs::read_to_string(&arg.model).map_err(|e| {
        Failure::usage(format!("cannot read {}: {e}", arg.model.display()))
    })?;
    Ok(model_from_json(&text)?)
}

fn parse_vec(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("not a number: '{}'", p.trim())))
        })
        .collect()
}

/// Rows of comma-separated decimals; a non-numeric first row is a header.
fn parse_alpha_file(path: &PathBuf, n: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_vec(line) {
            Ok(v) => {
                if v.len() != n {
                    return Err(Failure::usage(format!(
                        "{}:{}: expected {n} columns, found {}",
                        path.display(),
                        ln + 1,
                        v.len()
                    )));
                }
                rows.push(v);
            }
            Err(e) if ln == 0 => {
                let _ = e; // header row
            }
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Failure::usage(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string(value)
        .map_err(|e| Failure::usage(format!("serialization: {e}")))?;
    println!("{s}");
    Ok(())
}

fn print_json_pretty<T: Serialize>(value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::usage(format!("serialization: {e}")))?;
    println!("{s}");
    Ok(())
}

fn dispatch(cmd: Command) -> Result<ExitCode, Failure> {
    match cmd {
        Command::Validate(arg) => {
            let model = load_model(&arg)?;
            #[derive(Serialize)]
            struct Out {
                valid: bool,
                n: usize,
                stable: bool,
                cumulative_mean: Vec<f64>,
            }
            let st = model.stability();
            print_json(&Out {
                valid: true,
                n: model.n(),
                stable: st.stable,
                cumulative_mean: st.cumulative_mean,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Phi {
            model,
            v,
            tilde,
            eta,
            k,
            beta,
        } => {
            let m = load_model(&model)?;
            #[derive(Serialize)]
            struct Out {
                kind: &'static str,
                argument: Vec<f64>,
                value: f64,
            }
            let out = if let (Some(k), Some(beta)) = (k, beta) {
                Out {
                    kind: "phi_k",
                    argument: vec![k as f64, beta],
                    value: m.phi_k(k, beta)?,
                }
            } else {
                let v = parse_vec(&v.ok_or_else(|| Failure::usage("--v or --k/--beta required"))?)?;
                if tilde {
                    Out {
                        kind: "phi_tilde",
                        value: m.phi_tilde(&v)?,
                        argument: v,
                    }
                } else if eta {
                    Out {
                        kind: "eta",
                        value: m.eta(&v)?,
                        argument: v,
                    }
                } else {
                    Out {
                        kind: "phi",
                        value: m.phi(&v)?,
                        argument: v,
                    }
                }
            };
            print_json(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Psi {
            model,
            k,
            tail,
            tolerance,
            shifted,
            derivatives,
        } => {
            let m = load_model(&model)?;
            let tail = parse_vec(&tail)?;
            #[derive(Serialize)]
            struct Out {
                k: usize,
                beta: f64,
                residual: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                bracket: Option<(f64, f64)>,
                #[serde(skip_serializing_if = "Option::is_none")]
                shifted: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                first_derivatives_at_zero: Option<Vec<f64>>,
                #[serde(skip_serializing_if = "Option::is_none")]
                second_derivatives_at_zero: Option<Vec<Vec<f64>>>,
            }
            let mut out = if shifted {
                let value = psi_shifted(&m, k, &tail)?;
                Out {
                    k,
                    beta: value,
                    residual: m.phi_tilde(
                        &[vec![0.0; k - 1], vec![value], tail.clone()].concat(),
                    )?,
                    bracket: None,
                    shifted: Some(value),
                    first_derivatives_at_zero: None,
                    second_derivatives_at_zero: None,
                }
            } else {
                let r = psi(&m, &PsiQuery::new(k, tail).with_tolerance(tolerance))?;
                Out {
                    k,
                    beta: r.beta,
                    residual: r.residual,
                    bracket: Some(r.bracket),
                    shifted: None,
                    first_derivatives_at_zero: None,
                    second_derivatives_at_zero: None,
                }
            };
            if derivatives {
                let d = psi_derivatives_at_zero(&m, k)?;
                out.first_derivatives_at_zero = Some(d.first);
                out.second_derivatives_at_zero = Some(match d.second {
                    PsiSecondDerivative::Closed(v) => vec![vec![v]],
                    PsiSecondDerivative::FiniteDifference(h) => h,
                });
            }
            print_json(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Lst {
            model,
            space,
            alpha,
            alpha_file,
            closed_form,
        } => {
            let m = load_model(&model)?;
            let eval = |a: &[f64]| -> synq::Result<f64> {
                match (space, closed_form) {
                    (SpaceArg::Z, false) => lst_z(&m, a),
                    (SpaceArg::W, false) => lst_w(&m, a),
                    (SpaceArg::Z, true) => lst_2d_closed(&m, a[0], a[1], TransformSpace::Z),
                    (SpaceArg::W, true) => lst_2d_closed(&m, a[0], a[1], TransformSpace::W),
                }
            };
            if let Some(alpha) = alpha {
                let a = parse_vec(&alpha)?;
                #[derive(Serialize)]
                struct Out {
                    space: &'static str,
                    alpha: Vec<f64>,
                    value: f64,
                }
                print_json(&Out {
                    space: match space {
                        SpaceArg::Z => "Z",
                        SpaceArg::W => "W",
                    },
                    value: eval(&a)?,
                    alpha: a,
                })?;
            } else {
                let path = alpha_file
                    .ok_or_else(|| Failure::usage("one of --alpha or --alpha-file required"))?;
                let rows = parse_alpha_file(&path, m.n())?;
                print!("{}", lst_csv_header(m.n(), false));
                for row in rows {
                    let v = eval(&row)?;
                    println!("{},{}", join_csv(&row), v);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Decompose {
            model,
            alpha,
            alpha_file,
        } => {
            let m = load_model(&model)?;
            if let Some(alpha) = alpha {
                let a = parse_vec(&alpha)?;
                let d = decomposition(&m, &a)?;
                #[derive(Serialize)]
                struct Out {
                    alpha: Vec<f64>,
                    factors: Vec<f64>,
                    product: f64,
                }
                print_json(&Out {
                    alpha: a,
                    factors: d.factors,
                    product: d.product,
                })?;
            } else {
                let path = alpha_file
                    .ok_or_else(|| Failure::usage("one of --alpha or --alpha-file required"))?;
                let rows = parse_alpha_file(&path, m.n())?;
                print!("{}", lst_csv_header(m.n(), true));
                for row in rows {
                    let d = decomposition(&m, &row)?;
                    let w = lst_w(&m, &row)?;
                    println!("{},{},{}", join_csv(&row), w, join_csv(&d.factors));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Moments(arg) => {
            let m = load_model(&arg)?;
            #[derive(Serialize)]
            struct Out {
                moments: synq::model::MomentTable,
                stable: bool,
                #[serde(skip_serializing_if = "Option::is_none")]
                workload: Option<synq::steady_state::WorkloadMoments>,
            }
            let workload = if m.n() == 2 && m.is_stable() {
                Some(moments_w(&m)?)
            } else {
                None
            };
            print_json_pretty(&Out {
                moments: m.moments(),
                stable: m.is_stable(),
                workload,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckIdentity { model, grid } => {
            let m = load_model(&model)?;
            let grid = parse_vec(&grid)?;
            let report = decomposition_identity_check(&m, &grid)?;
            print_json_pretty(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let m = load_model(&args.model)?;
            let cfg = sim_config(&args, &m)?;
            let est = simulate(&m, &cfg)?;
            dump_reps(&args, &est)?;
            print_json_pretty(&est)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PriorityCheck(args) => {
            let m = load_model(&args.model)?;
            let cfg = sim_config(&args, &m)?;
            let parallel = simulate(&m, &cfg)?;
            let priority = priority_oracle(&m, &cfg)?;
            dump_reps(&args, &priority)?;
            #[derive(Serialize)]
            struct Out {
                parallel_mean_z: Vec<synq::sim::Estimate>,
                priority_mean_z: Vec<synq::sim::Estimate>,
                z_scores: Vec<f64>,
                within_band: bool,
            }
            let z_scores: Vec<f64> = parallel
                .mean_z
                .iter()
                .zip(&priority.mean_z)
                .map(|(a, b)| {
                    let joint = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
                    if joint > 0.0 {
                        (a.value - b.value).abs() / joint
                    } else {
                        0.0
                    }
                })
                .collect();
            let within_band = z_scores.iter().all(|z| *z <= 3.0);
            print_json_pretty(&Out {
                parallel_mean_z: parallel.mean_z,
                priority_mean_z: priority.mean_z,
                z_scores,
                within_band,
            })?;
            Ok(if within_band {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Verify {
            model,
            plan,
            seed,
            out,
        } => {
            let m = load_model(&model)?;
            let mut plan = match plan {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| {
                        Failure::usage(format!("cannot read {}: {e}", path.display()))
                    })?;
                    serde_json::from_str::<VerifyPlan>(&text)
                        .map_err(|e| Failure::usage(format!("plan: {e}")))?
                }
                None => default_plan(&m),
            };
            if let Some(seed) = seed {
                plan.sim.seed = seed;
            }
            let report = run_verify(&m, &plan);
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::usage(format!("serialization: {e}")))?;
            match out {
                Some(path) => fs::write(&path, json.as_bytes()).map_err(|e| {
                    Failure::usage(format!("cannot write {}: {e}", path.display()))
                })?,
                None => println!("{json}"),
            }
            Ok(if report.overall_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
    }
}

fn lst_csv_header(n: usize, with_factors: bool) -> String {
    let mut cols: Vec<String> = (1..=n).map(|i| format!("alpha_{i}")).collect();
    cols.push("value".into());
    if with_factors {
        cols.extend((1..=n).map(|i| format!("factor_{i}")));
    }
    cols.join(",") + "\n"
}

fn join_csv(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn sim_config(args: &SimArgs, model: &ValidatedModel) -> Result<SimConfig, Failure> {
    let mut grid = Vec::new();
    for s in &args.alpha_w {
        grid.push(AlphaVector::w(parse_vec(s)?)?);
    }
    for s in &args.alpha_z {
        grid.push(AlphaVector::z(parse_vec(s)?)?);
    }
    if grid.is_empty() {
        grid = synq::verify::default_alpha_grid(model.n());
    }
    let mut cfg = SimConfig::new(args.horizon, args.replications, args.seed);
    cfg.burn_in_fraction = args.burn_in;
    cfg.step = args.step;
    cfg.alpha_grid = grid;
    Ok(cfg)
}

fn dump_reps(args: &SimArgs, est: &SimEstimate) -> Result<(), Failure> {
    let Some(path) = &args.dump_reps else {
        return Ok(());
    };
    let mut out = String::from("replication,estimator,value\n");
    for row in est.per_replication() {
        for (i, v) in row.time_avg_z.iter().enumerate() {
            out.push_str(&format!("{},time_avg_z_{},{}\n", row.replication, i + 1, v));
        }
        for (i, v) in row.ensemble_z.iter().enumerate() {
            out.push_str(&format!("{},ensemble_z_{},{}\n", row.replication, i + 1, v));
        }
    }
    fs::write(path, out.as_bytes())
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}
