//! Command-line front end: reads JSON models, prints JSON results on stdout
//! and a one-line summary on stderr.
//!
//! Exit status: 0 on success, 2 when the requested accuracy was not reached
//! (the best certified result is still printed), 1 on input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hardcore::engine::{
    free_energy, regime_report_finite, regime_report_periodic, weitz_partition_approx,
    weitz_partition_exact_with, CertifiedInterval, EngineConfig, Normalization,
};
use hardcore::graph::{brute_force_partition, count_saw, estimate_connective_constant};
use hardcore::io::{self, interval_json, real, regime_json};
use hardcore::oracle::{power_iteration, strip_free_energy_2d, transfer_free_energy_1d};
use hardcore::periodic::{ball_where, PeriodicVertex};
use hardcore::reductions::{
    constraintedness, entropy, monomer_dimer_free_energy, pressure, spectral_radius_safe,
};
use hardcore::saw::{build_tsaw, SawGraph};
use hardcore::Error;

#[derive(Parser)]
#[command(name = "hardcore", version, about = "Certified hardcore-model partition functions and free energies")]
struct Cli {
    /// Target accuracy: additive for free energies, multiplicative for partition functions.
    #[arg(long, global = true, default_value_t = 1e-3)]
    epsilon: f64,
    /// Largest walk-tree depth tried before giving up.
    #[arg(long, global = true, default_value_t = 40)]
    depth_cap: usize,
    /// Walk-tree nodes allowed per factor and depth.
    #[arg(long, global = true, default_value_t = 10_000_000)]
    node_budget: u64,
    #[arg(long, global = true, value_enum, default_value_t = NormArg::PerVertex)]
    normalization: NormArg,
    /// Worker threads: a positive integer or "auto" (all cores).
    #[arg(long, global = true, env = "HARDCORE_ENGINE_THREADS", value_parser = parse_threads)]
    threads: Option<Threads>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// `None` is "auto": rayon's default pool size.
#[derive(Clone, Copy)]
struct Threads(Option<usize>);

fn parse_threads(s: &str) -> std::result::Result<Threads, String> {
    match s {
        "auto" => Ok(Threads(None)),
        _ => match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
            Ok(n) => Ok(Threads(Some(n))),
        },
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum NormArg {
    PerVertex,
    PerGroupElement,
}

#[derive(Subcommand)]
enum Command {
    /// Partition function of a finite graph: exact when the walk trees fit the budget, else a certified interval.
    Partition {
        input: PathBuf,
        /// Skip the exact computation and return a certified interval.
        #[arg(long)]
        approx: bool,
    },
    /// Free energy of a periodic graph.
    FreeEnergy { input: PathBuf },
    /// Topological entropy per site of a shift of finite type with a safe symbol.
    Entropy {
        input: PathBuf,
        /// Also report the constraintedness estimate from walks of this length.
        #[arg(long)]
        constraintedness: Option<usize>,
    },
    /// Pressure per site of a shift of finite type with a vacuum state.
    Pressure { input: PathBuf },
    /// Monomer-dimer free energy of a periodic graph, per edge orbit.
    Matching {
        input: PathBuf,
        /// Activity of every edge.
        #[arg(long, default_value_t = 1.0)]
        edge_lambda: f64,
    },
    /// Spectral radius of a 0-1 matrix with a safe symbol.
    SpectralRadius { input: PathBuf },
    /// Degree and connective-constant regime of a finite or periodic model.
    Regime {
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        saw_depth: usize,
    },
    /// Self-avoiding walk counts from a vertex (a domain vertex at the origin for periodic input).
    SawCount {
        input: PathBuf,
        #[arg(long)]
        vertex: String,
        #[arg(long)]
        depth: usize,
        /// Print the materialized walk tree (truncated at --depth) instead of counts.
        #[arg(long)]
        dump_tree: bool,
    },
    /// Reference values from the independent oracles.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exhaustive enumeration on a finite graph.
    Brute { input: PathBuf },
    /// Transfer-matrix free energy of a one-dimensional periodic graph.
    Transfer { input: PathBuf },
    /// Strip transfer-matrix values of a two-dimensional periodic graph.
    Strip {
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        width: usize,
    },
    /// Perron eigenvalue by power iteration.
    Power { input: PathBuf },
}

enum Outcome {
    Done(Value, String),
    Unconverged(Value, String),
}

fn read(path: &Path) -> hardcore::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn is_periodic(text: &str) -> bool {
    serde_json::from_str::<Value>(text).is_ok_and(|v| v.get("group").is_some())
}

fn summary(what: &str, iv: &CertifiedInterval) -> String {
    format!(
        "{what} in [{:.10}, {:.10}] (width {:.2e}, depth {})",
        iv.lower,
        iv.upper,
        iv.width(),
        iv.depth_used
    )
}

fn interval_outcome(
    what: &str,
    res: hardcore::Result<CertifiedInterval>,
    epsilon: f64,
    normalization: Option<Normalization>,
    extra: impl Fn(&mut serde_json::Map<String, Value>),
) -> hardcore::Result<Outcome> {
    let (iv, ok, why) = match res {
        Ok(iv) => (iv, true, None),
        Err(Error::NoConvergence { reason, best }) => (*best, false, Some(reason)),
        Err(e) => return Err(e),
    };
    let mut v = interval_json(&iv, epsilon, normalization, None, ok);
    if let Value::Object(m) = &mut v {
        extra(m);
        if let Some(r) = &why {
            m.insert("reason".into(), json!(r));
        }
    }
    let text = summary(what, &iv);
    Ok(if ok {
        Outcome::Done(v, text)
    } else {
        Outcome::Unconverged(v, format!("{text}; not converged: {}", why.unwrap_or_default()))
    })
}

fn run(cli: &Cli) -> hardcore::Result<Outcome> {
    if !(cli.epsilon > 0.0) {
        return Err(Error::InvalidInput("--epsilon must be positive".into()));
    }
    let normalization = match cli.normalization {
        NormArg::PerVertex => Normalization::PerVertex,
        NormArg::PerGroupElement => Normalization::PerGroupElement,
    };
    let cfg = EngineConfig {
        depth_cap: cli.depth_cap,
        node_budget: cli.node_budget,
        normalization,
        ..EngineConfig::default()
    };
    let eps = cli.epsilon;
    match &cli.command {
        Command::Partition { input, approx } => {
            let (g, lambda) = io::parse_finite_graph(&read(input)?)?;
            let exact = if *approx {
                Err(Error::BudgetExceeded { budget: 0 })
            } else {
                weitz_partition_exact_with(&g, &lambda, &cfg)
            };
            match exact {
                Ok(z) => Ok(Outcome::Done(json!({ "exact": real(z) }), format!("Z = {z}"))),
                Err(Error::BudgetExceeded { .. }) => interval_outcome(
                    "Z",
                    weitz_partition_approx(&g, &lambda, eps, &cfg),
                    eps,
                    None,
                    |_| {},
                ),
                Err(e) => Err(e),
            }
        }
        Command::FreeEnergy { input } => {
            let pg = io::parse_periodic_graph(&read(input)?)?;
            let regime = regime_report_periodic(&pg, 10)?;
            interval_outcome("f", free_energy(&pg, eps, &cfg), eps, Some(normalization), |m| {
                m.insert("regime".into(), json!(regime.regime));
            })
        }
        Command::Entropy { input, constraintedness: saw } => {
            let (ts, _) = io::parse_transition_system(&read(input)?)?;
            let report = saw.map(|l| constraintedness(&ts, l)).transpose()?;
            interval_outcome("h", entropy(&ts, eps, &cfg), eps, None, |m| {
                if let Some(r) = &report {
                    let mut v = serde_json::to_value(r).expect("report");
                    v["lambda_c_of_degree"] = real(r.lambda_c_of_degree);
                    v["lambda_c_of_mu"] = r.lambda_c_of_mu.map_or(Value::Null, real);
                    m.insert("constraintedness".into(), v);
                }
            })
        }
        Command::Pressure { input } => {
            let (ts, phi) = io::parse_transition_system(&read(input)?)?;
            interval_outcome("p", pressure(&ts, &phi, eps, &cfg), eps, None, |_| {})
        }
        Command::Matching { input, edge_lambda } => {
            let pg = io::parse_periodic_graph(&read(input)?)?;
            let activity = vec![*edge_lambda; pg.edge_orbits().len()];
            interval_outcome(
                "f_matching",
                monomer_dimer_free_energy(&pg, &activity, eps, &cfg),
                eps,
                Some(normalization),
                |_| {},
            )
        }
        Command::SpectralRadius { input } => {
            let (m, a) = io::parse_safe_matrix(&read(input)?)?;
            interval_outcome("rho", spectral_radius_safe(&m, a, eps, &cfg), eps, None, |_| {})
        }
        Command::Regime { input, saw_depth } => {
            let text = read(input)?;
            let report = if is_periodic(&text) {
                regime_report_periodic(&io::parse_periodic_graph(&text)?, *saw_depth)?
            } else {
                let (g, lambda) = io::parse_finite_graph(&text)?;
                regime_report_finite(&g, &lambda, *saw_depth)?
            };
            let line = format!("regime {:?}", report.regime).to_lowercase();
            Ok(Outcome::Done(regime_json(&report), line))
        }
        Command::SawCount { input, vertex, depth, dump_tree } => {
            let text = read(input)?;
            let (graph, view, root) = if is_periodic(&text) {
                let pg = io::parse_periodic_graph(&text)?;
                let i = pg
                    .labels()
                    .iter()
                    .position(|l| l == vertex)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown domain vertex {vertex:?}")))?;
                let b = ball_where(&pg, &PeriodicVertex::origin(pg.dimension(), i), depth + 1, |_| false)?;
                let view = SawGraph::from_ball(&b);
                (b.graph, view, 0)
            } else {
                let (g, lambda) = io::parse_finite_graph(&text)?;
                let v = g
                    .labels()
                    .and_then(|l| l.iter().position(|x| x == vertex))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown vertex {vertex:?}")))?;
                let view = SawGraph::from_finite(&g, &lambda, &vec![false; g.vertex_count()])?;
                (g, view, v)
            };
            if *dump_tree {
                let tree = build_tsaw(&view, root, Some(*depth), cli.node_budget)?;
                let text = format!("walk tree with {} nodes", tree.node_count());
                return Ok(Outcome::Done(tree.to_json(), text));
            }
            let counts = count_saw(&graph, root, *depth)?;
            let mu = estimate_connective_constant(&counts).ok();
            let text = format!("N = {counts:?}");
            Ok(Outcome::Done(json!({ "counts": counts, "mu_hat": mu }), text))
        }
        Command::Oracle { which } => match which {
            OracleCommand::Brute { input } => {
                let (g, lambda) = io::parse_finite_graph(&read(input)?)?;
                let z = brute_force_partition(&g, &lambda)?;
                Ok(Outcome::Done(json!({ "exact": real(z) }), format!("Z = {z}")))
            }
            OracleCommand::Transfer { input } => {
                let f = transfer_free_energy_1d(&io::parse_periodic_graph(&read(input)?)?)?;
                Ok(Outcome::Done(json!({ "free_energy": f }), format!("f = {f}")))
            }
            OracleCommand::Strip { input, width } => {
                let (lo, hi) = strip_free_energy_2d(&io::parse_periodic_graph(&read(input)?)?, *width)?;
                let text = format!("strip width {width}: [{lo}, {hi}] (reference band, not certified)");
                Ok(Outcome::Done(json!({ "width": width, "lower": lo, "upper": hi, "certified": false }), text))
            }
            OracleCommand::Power { input } => {
                let (m, _) = io::parse_safe_matrix(&read(input)?)?;
                let dense: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
                let rho = power_iteration(&dense)?;
                Ok(Outcome::Done(json!({ "spectral_radius": rho }), format!("rho = {rho}")))
            }
        },
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::BudgetExceeded { .. } => "budget_exceeded",
        Error::NoConvergence { .. } => "no_convergence",
        Error::NotReducible(_) => "not_reducible",
        Error::OracleUnsupported(_) => "oracle_unsupported",
    }
}

fn emit(cli: &Cli, value: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json") + "\n";
    match &cli.output {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let v = json!({ "error": { "kind": "invalid_input", "message": e.kind().to_string() } });
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            return ExitCode::from(1);
        }
    };
    let pool = match cli.threads.and_then(|t| t.0) {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let (value, line, code) = match pool.install(|| run(&cli)) {
        Ok(Outcome::Done(v, line)) => (v, line, 0),
        Ok(Outcome::Unconverged(v, line)) => (v, line, 2),
        Err(e) => {
            let v = json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } });
            (v, format!("error: {e}"), 1)
        }
    };
    eprintln!("{line}");
    if let Err(e) = emit(&cli, &value) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
