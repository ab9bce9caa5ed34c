//! `restless-sched`: command-line driver for the restless-core toolkit.
//!
//! Exit codes: 0 success, 1 domain failure (no regime holds, a bound or
//! certification check fails), 2 usage or input-format error.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use restless_core::assumptions::{classify, Clause3Variant, Regime};
use restless_core::belief::{InstanceDoc, ModelInstance};
use restless_core::bounds::{check_bounds_suite, BOUND_SLACK};
use restless_core::dp::{DpSolver, ValueReport, AGREEMENT_TOL};
use restless_core::filter::BeliefProfile;
use restless_core::generate::{gen_assumption1_instance, gen_assumption2_instance, perturb_violate, GeneratorParams};
use restless_core::policy::{
    policy_value, HashedRandomPolicy, MyopicPolicy, PolicyRule, RoundRobinPolicy, StayOnPolicy,
    DEFAULT_NODE_BUDGET,
};
use restless_core::simulate::{estimate_value, simulate_totals, summarize};
use restless_core::spectral::{default_series_terms, discount_matrices, eigendecompose, matrix_rows, reward_separation_check};
use restless_core::sweep::{certify_sweep, SweepConfig, SweepKind, SweepStatus, GAP_TOL};

use output::{emit, fmt_f64, to_csv, to_json};

#[derive(Debug, Parser)]
#[command(name = "restless-sched", version, about = "Belief-state scheduling of restless projects")]
struct Cli {
    /// Run everything on one thread for bit-exact reruns.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Compare the second threshold condition against (A')²e_X instead of (A')²e_1.
    #[arg(long, global = true)]
    alt_clause3: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Out {
    /// Artifact path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify an instance against both assumption families.
    Validate {
        instance: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Eigendecomposition, discount matrix and reward separation margins.
    Spectral {
        instance: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Optimal first action and value by exact dynamic programming.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Optimal versus myopic value report.
    Compare {
        instance: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: usize,
        /// Largest optimal-minus-myopic gap still counted as agreement.
        #[arg(long, default_value_t = GAP_TOL)]
        gap_tol: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Sampled checks of the value-difference bounds (CSV).
    Bounds {
        instance: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// A check fails when either slack is below minus this value.
        #[arg(long, default_value_t = BOUND_SLACK)]
        slack_tol: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Monte Carlo estimate of a policy's discounted reward.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        n_traj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// myopic, round-robin, stay-on:K or random:SEED.
        #[arg(long, default_value = "myopic", value_parser = parse_policy)]
        policy: PolicyChoice,
        /// Also write per-trajectory totals as CSV.
        #[arg(long)]
        dump_csv: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Random instance satisfying (or deliberately violating) an assumption family.
    Generate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        regime: Option<u8>,
        /// Clause to break, e.g. 1.5; starts from an increasing-family instance.
        #[arg(long, conflicts_with = "regime")]
        violate: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dims: DimArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Generate, solve and certify a batch of instances (CSV).
    CertifySweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), required_unless_present = "violate")]
        regime: Option<u8>,
        #[arg(long, conflicts_with = "regime")]
        violate: Option<String>,
        #[arg(long, default_value_t = 100)]
        n_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Values drawn for the state, observation and project counts.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
        horizons: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.6])]
        betas: Vec<f64>,
        #[arg(long, default_value_t = GAP_TOL)]
        gap_tol: f64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Debug, Args)]
struct DimArgs {
    /// State count, `K` or `MIN..MAX`.
    #[arg(long, default_value = "2..3", value_parser = parse_range)]
    n_states: (usize, usize),
    #[arg(long, default_value = "2..3", value_parser = parse_range)]
    n_obs: (usize, usize),
    #[arg(long, default_value = "2..3", value_parser = parse_range)]
    n_projects: (usize, usize),
    #[arg(long, default_value_t = 0.3)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.6)]
    beta_max: f64,
    #[arg(long, default_value_t = 10_000)]
    max_attempts: usize,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once("..") {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => {
            let k = parse(s)?;
            Ok((k, k))
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum PolicyChoice {
    Myopic,
    RoundRobin,
    StayOn(usize),
    Random(u64),
}

fn parse_policy(s: &str) -> Result<PolicyChoice, String> {
    let bad = |e: std::num::ParseIntError| format!("`{s}`: {e}");
    match s.split_once(':') {
        None if s == "myopic" => Ok(PolicyChoice::Myopic),
        None if s == "round-robin" => Ok(PolicyChoice::RoundRobin),
        Some(("stay-on", k)) => Ok(PolicyChoice::StayOn(k.parse().map_err(bad)?)),
        Some(("random", k)) => Ok(PolicyChoice::Random(k.parse().map_err(bad)?)),
        _ => Err(format!("unknown policy `{s}`")),
    }
}

impl PolicyChoice {
    fn build(self) -> Box<dyn PolicyRule> {
        match self {
            PolicyChoice::Myopic => Box::new(MyopicPolicy),
            PolicyChoice::RoundRobin => Box::new(RoundRobinPolicy),
            PolicyChoice::StayOn(k) => Box::new(StayOnPolicy(k)),
            PolicyChoice::Random(seed) => Box::new(HashedRandomPolicy { seed }),
        }
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    /// The computation ran but a domain check did not hold.
    Domain(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => f.write_str(m),
        }
    }
}

impl From<restless_core::Error> for Failure {
    fn from(e: restless_core::Error) -> Self {
        use restless_core::Error as E;
        match e {
            E::InvalidInstance(_)
            | E::Json(_)
            | E::InvalidArgument(_)
            | E::InvalidBelief(_)
            | E::DimensionMismatch { .. }
            | E::IndexOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn load_instance(path: &Path) -> Result<ModelInstance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let doc: InstanceDoc =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    ModelInstance::from_doc(&doc).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn put(out: &Out, text: &str) -> CliResult {
    Ok(emit(out.output.as_deref(), text)?)
}

fn check_tol(name: &str, v: f64) -> CliResult {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must be a finite non-negative number, got {v}")))
    }
}

fn configure_threads(deterministic: bool) -> CliResult {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var("RESTLESS_SCHED_THREADS") {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(Failure::Usage(format!("RESTLESS_SCHED_THREADS must be a positive integer, got `{v}`"))),
            },
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectralOut {
    eigenvalues: Vec<f64>,
    residual: f64,
    subdominant_modulus: f64,
    upsilon: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    margins: Vec<f64>,
    min_pair_margin: f64,
    separation_holds: bool,
    series_terms: usize,
}

#[derive(Serialize)]
struct SolveOut {
    optimal_value: f64,
    optimal_first_action: usize,
    nodes: usize,
}

#[derive(Serialize)]
struct CompareOut {
    #[serde(flatten)]
    report: ValueReport,
    regime: Regime,
    myopic_optimal: bool,
}

fn run(cli: Cli) -> CliResult {
    configure_threads(cli.deterministic)?;
    let parallel = !cli.deterministic;
    let variant = if cli.alt_clause3 {
        Clause3Variant::Alt
    } else {
        Clause3Variant::Literal
    };

    match cli.command {
        Command::Validate { instance, out } => {
            let inst = load_instance(&instance)?;
            let cls = classify(&inst, variant);
            put(&out, &to_json(&cls)?)?;
            if cls.regime == Regime::Neither {
                let why = cls
                    .assumption1
                    .first_failure()
                    .map(|c| format!("clause {} fails", c.id))
                    .unwrap_or_default();
                return Err(Failure::Domain(format!("no assumption family holds ({why})")));
            }
            Ok(())
        }
        Command::Spectral { instance, out } => {
            let inst = load_instance(&instance)?;
            let dec = eigendecompose(inst.transition())?;
            let dm = discount_matrices(&dec, inst.beta())?;
            let sep = reward_separation_check(inst.reward(), &dm.q)?;
            let report = SpectralOut {
                eigenvalues: dec.eigenvalues.clone(),
                residual: dec.residual,
                subdominant_modulus: dec.subdominant_modulus(),
                upsilon: dm.upsilon.clone(),
                q: matrix_rows(&dm.q),
                margins: sep.margins.clone(),
                min_pair_margin: sep.min_pair_margin,
                separation_holds: sep.verdict.holds(),
                series_terms: default_series_terms(inst.beta(), dec.subdominant_modulus()),
            };
            put(&out, &to_json(&report)?)
        }
        Command::Solve {
            instance,
            horizon,
            node_budget,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let mut solver = DpSolver::new(&inst, horizon).with_node_budget(node_budget);
            let (optimal_value, optimal_first_action) = solver.optimal_value(&BeliefProfile::initial(&inst))?;
            let report = SolveOut {
                optimal_value,
                optimal_first_action,
                nodes: solver.nodes(),
            };
            put(&out, &to_json(&report)?)
        }
        Command::Compare {
            instance,
            horizon,
            node_budget,
            gap_tol,
            out,
        } => {
            check_tol("gap-tol", gap_tol)?;
            let inst = load_instance(&instance)?;
            let regime = classify(&inst, variant).regime;
            let profile = BeliefProfile::initial(&inst);
            let mut solver = DpSolver::new(&inst, horizon).with_node_budget(node_budget);
            let (optimal_value, optimal_first_action) = solver.optimal_value(&profile)?;
            let myopic_value = policy_value(&inst, &profile, solver.settings(), &MyopicPolicy)?.value;
            let report = ValueReport {
                optimal_value,
                myopic_value,
                gap: optimal_value - myopic_value,
                per_depth_node_counts: solver.per_depth_node_counts().to_vec(),
                argmax_agreement: solver.argmax_agreement(),
                optimal_first_action,
            };
            let myopic_optimal = report.gap <= gap_tol && report.argmax_agreement == 1.0;
            let gap = report.gap;
            put(
                &out,
                &to_json(&CompareOut {
                    report,
                    regime,
                    myopic_optimal,
                })?,
            )?;
            if regime != Regime::Neither && !myopic_optimal {
                return Err(Failure::Domain(format!(
                    "myopic rule is not optimal on a verified instance (gap {gap:e}, agreement tolerance {AGREEMENT_TOL:e})"
                )));
            }
            Ok(())
        }
        Command::Bounds {
            instance,
            samples,
            seed,
            slack_tol,
            out,
        } => {
            check_tol("slack-tol", slack_tol)?;
            let inst = load_instance(&instance)?;
            let regime = classify(&inst, variant).regime;
            if regime == Regime::Neither {
                return Err(Failure::Domain("no assumption family holds; bounds do not apply".into()));
            }
            let suite = check_bounds_suite(&inst, regime, samples, seed, parallel)?;
            let mut violations = 0;
            let rows: Vec<Vec<String>> = suite
                .samples
                .iter()
                .map(|s| {
                    let ok = s.slack_low >= -slack_tol && s.slack_high >= -slack_tol;
                    violations += usize::from(!ok);
                    vec![
                        s.case.to_string(),
                        s.t.to_string(),
                        s.horizon.to_string(),
                        fmt_f64(s.slack_low),
                        fmt_f64(s.slack_high),
                        if ok { "pass" } else { "fail" }.to_string(),
                    ]
                })
                .collect();
            put(
                &out,
                &to_csv(&["case", "t", "T", "slack_low", "slack_high", "verdict"], &rows)?,
            )?;
            eprintln!("{regime}: {} checks, {violations} violations", rows.len());
            if violations > 0 {
                return Err(Failure::Domain(format!("{violations} bound violations")));
            }
            Ok(())
        }
        Command::Simulate {
            instance,
            horizon,
            n_traj,
            seed,
            policy,
            dump_csv,
            out,
        } => {
            if n_traj < 2 {
                return Err(Failure::Usage("--n-traj must be at least 2".into()));
            }
            let inst = load_instance(&instance)?;
            let rule = policy.build();
            let estimate = match &dump_csv {
                Some(path) => {
                    let totals = simulate_totals(&inst, rule.as_ref(), horizon, n_traj, seed, parallel)?;
                    let rows: Vec<Vec<String>> = totals
                        .iter()
                        .enumerate()
                        .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)])
                        .collect();
                    emit(Some(path), &to_csv(&["trajectory", "total"], &rows)?)?;
                    summarize(&totals, seed)
                }
                None => estimate_value(&inst, rule.as_ref(), horizon, n_traj, seed, parallel)?,
            };
            put(&out, &to_json(&estimate)?)
        }
        Command::Generate {
            regime,
            violate,
            seed,
            dims,
            out,
        } => {
            let params = GeneratorParams {
                n_states: dims.n_states,
                n_obs: dims.n_obs,
                n_projects: dims.n_projects,
                beta: (dims.beta_min, dims.beta_max),
                max_attempts: dims.max_attempts,
                clause3: variant,
            };
            params.validate()?;
            let inst = match (regime, violate) {
                (_, Some(clause)) => {
                    let base = gen_assumption1_instance(&params, seed)?;
                    perturb_violate(&base, &clause, seed, variant)?
                }
                (Some(2), None) => gen_assumption2_instance(&params, seed)?,
                _ => gen_assumption1_instance(&params, seed)?,
            };
            put(&out, &to_json(&inst.to_doc())?)
        }
        Command::CertifySweep {
            regime,
            violate,
            n_instances,
            seed,
            dims,
            horizons,
            betas,
            gap_tol,
            out,
        } => {
            check_tol("gap-tol", gap_tol)?;
            if dims.is_empty() || horizons.is_empty() || betas.is_empty() {
                return Err(Failure::Usage("--dims, --horizons and --betas need at least one value".into()));
            }
            let kind = match (regime, violate) {
                (_, Some(clause)) => SweepKind::Violate(clause),
                (Some(2), None) => SweepKind::Regime2,
                _ => SweepKind::Regime1,
            };
            let verified_kind = !matches!(kind, SweepKind::Violate(_));
            let cfg = SweepConfig {
                dims,
                horizons,
                betas,
                clause3: variant,
                parallel,
                ..SweepConfig::new(kind, n_instances, seed)
            };
            let summary = certify_sweep(&cfg)?;
            let (mut verified, mut passed) = (0usize, 0usize);
            let rows: Vec<Vec<String>> = summary
                .rows
                .iter()
                .map(|r| {
                    let status = match (&r.status, &r.report) {
                        (SweepStatus::Error(e), _) => format!("error: {e}"),
                        (_, Some(rep)) if verified_kind => {
                            verified += 1;
                            if rep.gap <= gap_tol && rep.argmax_agreement == 1.0 {
                                passed += 1;
                                "pass".into()
                            } else {
                                "fail".into()
                            }
                        }
                        _ => "recorded".into(),
                    };
                    let (opt, myo, gap, agr) = match &r.report {
                        Some(rep) => (
                            fmt_f64(rep.optimal_value),
                            fmt_f64(rep.myopic_value),
                            fmt_f64(rep.gap),
                            fmt_f64(rep.argmax_agreement),
                        ),
                        None => Default::default(),
                    };
                    vec![
                        r.instance.to_string(),
                        r.regime.clone(),
                        r.n_states.to_string(),
                        r.n_obs.to_string(),
                        r.n_projects.to_string(),
                        r.horizon.to_string(),
                        fmt_f64(r.beta),
                        opt,
                        myo,
                        gap,
                        agr,
                        status,
                    ]
                })
                .collect();
            let header = [
                "instance", "regime", "X", "Y", "N", "T", "beta", "optimal", "myopic", "gap", "agreement", "status",
            ];
            put(&out, &to_csv(&header, &rows)?)?;
            eprintln!(
                "{} instances: {passed}/{verified} verified passed, {} generation or solver errors",
                rows.len(),
                summary.errors
            );
            if passed < verified {
                return Err(Failure::Domain(format!("{} verified instances failed", verified - passed)));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("restless-sched: {f}");
            match f {
                Failure::Domain(_) => ExitCode::from(1),
                Failure::Usage(_) => ExitCode::from(2),
            }
        }
    }
}
