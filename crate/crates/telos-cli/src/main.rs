//! Command-line frontend: model validation, graph rendering, sampling,
//! independence queries, intervention application, teleological checks,
//! and the two canned demonstration pipelines.
//!
//! Exit codes: 0 success (or verdict consistent), 1 usage error,
//! 2 invalid model or data, 3 detection-positive or violation verdict
//! (so shell pipelines can branch on detection).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use telos::dsep::{d_separated, implied_independencies, DsepError};
use telos::io::{
    check_columns, csv_to_string, detection_report_json, discovery_report_json, emit_dot,
    markov_report_json, read_csv, read_model, read_op, write_csv, write_model, IoError,
    LoadedModel,
};
use telos::operators::{apply_spec, Applied, InterventionSpec, STAR_SUFFIX};
use telos::repro::{
    heating_report_json, run_repro_heating, run_repro_smoking, smoking_report_json, REPRO_ALPHA,
    REPRO_MAX_COND, REPRO_N,
};
use telos::sampling::{sample_dataset, sample_twin, Dataset, DEFAULT_MAX_TRIES};
use telos::scm::{induce_full_dag, validate_model};
use telos::teleo::{
    detect_agent, discover_intention, markov_check, verify_sfm_hypothesis, SimulatedAgent,
    Verdict,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_POSITIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "telos",
    version,
    about = "Structural causal models with intentional interventions: \
             sampling, independence checking, agent detection, and \
             intention discovery."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pipeline {
    Heating,
    Smoking,
}

#[derive(Args)]
struct TestFlags {
    /// Significance level for each independence test.
    #[arg(long, default_value_t = REPRO_ALPHA)]
    alpha: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the structural rules.
    Validate {
        /// Model JSON file.
        model: PathBuf,
    },
    /// Render the model graph (exogenous vertices included).
    Graph {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
        format: GraphFormat,
        /// Output path; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw seeded samples as CSV.
    Sample {
        model: PathBuf,
        /// Number of rows.
        #[arg(short)]
        n: usize,
        /// RNG seed (falls back to TELEO_SEED, then 0).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// For twin models, emit only the observed world's columns.
        #[arg(long)]
        observed_only: bool,
    },
    /// Answer one d-separation query on the model's full graph.
    Dsep {
        model: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Conditioning set, comma-separated.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// List all graph-implied independencies among observed variables.
    Independencies {
        model: PathBuf,
        #[arg(long, default_value_t = REPRO_MAX_COND)]
        max_cond: usize,
    },
    /// Apply an intervention file to a model and write the result.
    Apply {
        model: PathBuf,
        /// Intervention JSON file.
        op: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Test data against the model's implied independencies.
    ///
    /// For a twin model file this verifies the twin hypothesis: the
    /// check runs on the full two-world graph restricted to the
    /// observed columns. Exits 3 on a violated verdict.
    MarkovCheck {
        model: PathBuf,
        data: PathBuf,
        #[command(flatten)]
        test: TestFlags,
        #[arg(long, default_value_t = REPRO_MAX_COND)]
        max_cond: usize,
    },
    /// Detect an intentional intervention from observational data.
    ///
    /// Columns must be the model's endogenous variables; a dataset
    /// whose columns all carry the replica suffix is relabeled first.
    /// Exits 3 when an agent is detected.
    DetectAgent {
        model: PathBuf,
        data: PathBuf,
        #[command(flatten)]
        test: TestFlags,
    },
    /// Identify which candidate variables a policy listens to.
    ///
    /// The policy file supplies the hidden agent for a simulated
    /// system. Exits 3 when any candidate is listened to.
    DiscoverIntention {
        model: PathBuf,
        /// Intentional-intervention JSON file (the agent's policy).
        #[arg(long)]
        policy: PathBuf,
        /// The agent's decision variable.
        #[arg(long)]
        target: String,
        /// Candidate goal variables, comma-separated.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
        #[arg(short, default_value_t = REPRO_N)]
        n: usize,
        #[command(flatten)]
        test: TestFlags,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a canned end-to-end pipeline and print its JSON report.
    ///
    /// Exits 3 when a stage verdict deviates from the expected
    /// sequence.
    Repro {
        #[arg(value_enum)]
        pipeline: Pipeline,
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; the smoking pipeline also writes a histogram
        /// CSV next to it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Invalid(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<DsepError> for CliError {
    fn from(e: DsepError) -> Self {
        // The model parsed; a bad vertex or overlapping arguments come
        // from the user's query.
        CliError::Usage(e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

/// Seed precedence: --seed flag, then TELEO_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("TELEO_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("TELEO_SEED is not an integer: `{text}`"))),
        Err(_) => Ok(0),
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            CliError::Invalid(format!("cannot write `{}`: {e}", path.display()))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_valid(loaded: &LoadedModel) -> Result<(), CliError> {
    let problems = model_problems(loaded);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(problems.join("; ")))
    }
}

fn model_problems(loaded: &LoadedModel) -> Vec<String> {
    // Twin worlds share exogenous partners by construction, which the
    // plain-model bijection rule forbids; the twin's own validation
    // covers that structure instead.
    let exempt = |v: &&telos::scm::Violation| {
        !(matches!(loaded, LoadedModel::Twin(_)) && v.rule == telos::scm::Rule::SharedPartner)
    };
    let mut problems: Vec<String> = validate_model(loaded.model())
        .iter()
        .filter(exempt)
        .map(|v| v.to_string())
        .collect();
    if let LoadedModel::Twin(twin) = loaded {
        problems.extend(twin.validate());
    }
    problems
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Validate { model } => {
            let loaded = read_model(&model)?;
            let problems = model_problems(&loaded);
            if problems.is_empty() {
                println!("ok: {}", loaded.name());
                Ok(0)
            } else {
                for p in &problems {
                    println!("violation: {p}");
                }
                Ok(EXIT_INVALID)
            }
        }
        Command::Graph {
            model,
            format: GraphFormat::Dot,
            output,
        } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let dot = emit_dot(&loaded)?;
            emit(&dot, output.as_deref())?;
            Ok(0)
        }
        Command::Sample {
            model,
            n,
            seed,
            output,
            observed_only,
        } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let seed = resolve_seed(seed)?;
            let data = match &loaded {
                LoadedModel::Plain(m) => sample_dataset(m, n, seed).map_err(invalid)?,
                LoadedModel::Twin(t) => {
                    let full =
                        sample_twin(t, n, seed, 0.0, DEFAULT_MAX_TRIES).map_err(invalid)?;
                    if observed_only {
                        full.project(&t.observed_names()).map_err(invalid)?
                    } else {
                        full
                    }
                }
            };
            emit(&csv_to_string(&data), output.as_deref())?;
            Ok(0)
        }
        Command::Dsep { model, x, y, given } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let dag = induce_full_dag(loaded.model()).map_err(invalid)?;
            let given: BTreeSet<String> = given.into_iter().collect();
            let separated = d_separated(&dag, &x, &y, &given)?;
            println!("{}", if separated { "separated" } else { "connected" });
            Ok(0)
        }
        Command::Independencies { model, max_cond } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let dag = induce_full_dag(loaded.model()).map_err(invalid)?;
            let observed: BTreeSet<String> = match &loaded {
                LoadedModel::Plain(m) => {
                    m.endogenous_names().iter().map(|s| s.to_string()).collect()
                }
                LoadedModel::Twin(t) => t
                    .observed_names()
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            };
            for stmt in implied_independencies(&dag, &observed, max_cond)? {
                println!("{stmt}");
            }
            Ok(0)
        }
        Command::Apply { model, op, output } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let base = match &loaded {
                LoadedModel::Plain(m) => m,
                LoadedModel::Twin(_) => {
                    return Err(CliError::Invalid(
                        "operators apply to plain models, not twin files".to_string(),
                    ))
                }
            };
            let spec = read_op(&op)?;
            let result = match apply_spec(base, &spec).map_err(invalid)? {
                Applied::Plain(m) => LoadedModel::Plain(m),
                Applied::Twin(t) => LoadedModel::Twin(t),
            };
            write_model(&result, &output)?;
            Ok(0)
        }
        Command::MarkovCheck {
            model,
            data,
            test,
            max_cond,
        } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let dataset = read_csv(&data)?;
            let report = match &loaded {
                LoadedModel::Plain(m) => {
                    check_columns(&dataset, m.endogenous_names())?;
                    let dag = induce_full_dag(m).map_err(invalid)?;
                    let observed: BTreeSet<String> =
                        m.endogenous_names().iter().map(|s| s.to_string()).collect();
                    markov_check(&dag, &dataset, &observed, test.alpha, max_cond)
                        .map_err(invalid)?
                }
                LoadedModel::Twin(t) => {
                    check_columns(&dataset, t.model.endogenous_names())?;
                    verify_sfm_hypothesis(t, &dataset, test.alpha, max_cond).map_err(invalid)?
                }
            };
            let json = markov_report_json(&report);
            println!("{}", serde_json::to_string_pretty(&json).expect("report"));
            Ok(if report.verdict == Verdict::Violated {
                EXIT_POSITIVE
            } else {
                0
            })
        }
        Command::DetectAgent { model, data, test } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let base = match &loaded {
                LoadedModel::Plain(m) => m,
                LoadedModel::Twin(_) => {
                    return Err(CliError::Invalid(
                        "detection runs against the causal hypothesis, a plain model"
                            .to_string(),
                    ))
                }
            };
            let mut dataset = read_csv(&data)?;
            // An observer inside the starred world labels columns with
            // base names; accept a fully starred header and relabel.
            if dataset
                .columns
                .iter()
                .all(|c| c.ends_with(STAR_SUFFIX))
            {
                dataset = dataset
                    .rename_columns(|c| c.strip_suffix(STAR_SUFFIX).unwrap_or(c).to_string())
                    .map_err(invalid)?;
            }
            check_columns(&dataset, base.endogenous_names())?;
            let report =
                detect_agent(base, &dataset, test.alpha, REPRO_MAX_COND).map_err(invalid)?;
            let json = detection_report_json(&report);
            println!("{}", serde_json::to_string_pretty(&json).expect("report"));
            Ok(if report.detected { EXIT_POSITIVE } else { 0 })
        }
        Command::DiscoverIntention {
            model,
            policy,
            target,
            candidates,
            n,
            test,
            seed,
        } => {
            let loaded = read_model(&model)?;
            require_valid(&loaded)?;
            let base = match &loaded {
                LoadedModel::Plain(m) => m.clone(),
                LoadedModel::Twin(_) => {
                    return Err(CliError::Invalid(
                        "discovery starts from a plain base model".to_string(),
                    ))
                }
            };
            let spec = read_op(&policy)?;
            let (policy_target, policy_expr) = match spec {
                InterventionSpec::Intentional { target, policy } => (target, policy),
                other => {
                    return Err(CliError::Invalid(format!(
                        "policy file must hold an intentional intervention, found `{}`",
                        other.kind()
                    )))
                }
            };
            if policy_target != target {
                return Err(CliError::Usage(format!(
                    "--target {target} does not match the policy file's target `{policy_target}`"
                )));
            }
            if candidates.is_empty() {
                return Err(CliError::Usage(
                    "--candidates must name at least one variable".to_string(),
                ));
            }
            let seed = resolve_seed(seed)?;
            let agent = SimulatedAgent {
                base: base.clone(),
                target: target.clone(),
                policy: policy_expr,
            };
            let report = discover_intention(
                &base,
                &agent,
                &target,
                &candidates,
                n,
                test.alpha,
                seed,
                &BTreeMap::new(),
            )
            .map_err(invalid)?;
            let json = discovery_report_json(&report);
            println!("{}", serde_json::to_string_pretty(&json).expect("report"));
            Ok(if report.listened.is_empty() {
                0
            } else {
                EXIT_POSITIVE
            })
        }
        Command::Repro {
            pipeline,
            seed,
            output,
        } => {
            let seed = resolve_seed(seed)?;
            let (json, ok, histogram): (serde_json::Value, bool, Option<Dataset>) =
                match pipeline {
                    Pipeline::Heating => {
                        let report = run_repro_heating(seed).map_err(invalid)?;
                        (heating_report_json(&report), report.ok, None)
                    }
                    Pipeline::Smoking => {
                        let report = run_repro_smoking(seed).map_err(invalid)?;
                        let hist = report.histogram.clone();
                        (smoking_report_json(&report), report.ok, Some(hist))
                    }
                };
            let mut text = serde_json::to_string_pretty(&json).expect("report");
            text.push('\n');
            emit(&text, output.as_deref())?;
            if let (Some(path), Some(hist)) = (&output, histogram) {
                let mut hist_path = path.clone();
                hist_path.set_extension("hist.csv");
                write_csv(&hist, &hist_path)?;
            }
            if output.is_some() {
                println!("{}", if ok { "ok" } else { "verdict mismatch" });
            }
            Ok(if ok { 0 } else { EXIT_POSITIVE })
        }
    }
}
