//! Teleological inference: testing data against a causal hypothesis,
//! detecting agents, and discovering what their policies listen to.
//!
//! The detection route: a causal DAG implies conditional independencies
//! among observed variables; [`markov_check`] tests each one on data.
//! An agent whose policy reads the outcomes its action influences
//! induces dependence between variables the causal graph keeps
//! independent, so systematic violations flag an intentional
//! intervention ([`detect_agent`]), and the violating pairs point at
//! the variables involved. The reverse direction does not hold: a
//! policy that reads nothing leaves Markovianity intact, so absence of
//! violations cannot rule an agent out.
//!
//! The discovery route ([`discover_intention`]): intervene on each
//! candidate goal variable at two values and compare the distribution
//! of the agent's decision across the two regimes. Candidates whose
//! manipulation shifts the decision are the ones the policy listens to.

use crate::dsep::{implied_independencies, DsepError, IndependenceStatement};
use crate::operators::{
    apply_spec, build_sfm_unchecked, Applied, InterventionSpec, OperatorError, TwinModel,
    STAR_SUFFIX,
};
use crate::sampling::{derive_seed, sample_twin, Dataset, SampleError, DEFAULT_MAX_TRIES};
use crate::scm::{induce_dag, Dag, GraphError, ScmModel};
use crate::stats::{
    fisher_z_test, partial_correlation, two_proportion_test, StatsError, TestResult,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Overall outcome of a Markovianity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
        })
    }
}

/// Per-statement outcome: a test, or a documented reason it was skipped
/// (degenerate columns make a correlation undefined, which is data, not
/// a failure of the whole check).
#[derive(Debug, Clone, PartialEq)]
pub enum StatementOutcome {
    Tested(TestResult),
    Skipped(String),
}

/// Result of checking every graph-implied independence against data.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub tested: Vec<(IndependenceStatement, StatementOutcome)>,
    pub violations: Vec<(IndependenceStatement, TestResult)>,
    pub verdict: Verdict,
    /// True when no statement produced a test result: the graph implies
    /// nothing among the observed variables (or every statement was
    /// skipped), so "consistent" carries no evidence.
    pub vacuous: bool,
}

/// Inference failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TeleoError {
    #[error("dataset is missing column `{0}`")]
    MissingColumn(String),
    #[error("dataset columns {found:?} do not match the endogenous variables {expected:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("candidate `{candidate}` is not a strict descendant of target `{target}`")]
    CandidateNotDescendant { candidate: String, target: String },
    #[error("candidate experiment returned no `{0}` column")]
    MissingOutcomeColumn(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Dsep(#[from] DsepError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Tests every independence implied by `dag` among `observed` against
/// the dataset, at level `alpha` with conditioning sets up to
/// `max_cond`.
pub fn markov_check(
    dag: &Dag,
    data: &Dataset,
    observed: &BTreeSet<String>,
    alpha: f64,
    max_cond: usize,
) -> Result<MarkovReport, TeleoError> {
    for name in observed {
        if !data.columns.iter().any(|c| c == name) {
            return Err(TeleoError::MissingColumn(name.clone()));
        }
    }
    let statements = implied_independencies(dag, observed, max_cond)?;
    let mut tested = Vec::with_capacity(statements.len());
    let mut violations = Vec::new();
    for stmt in statements {
        let outcome = match partial_correlation(data, &stmt.x, &stmt.y, &stmt.given) {
            Ok(r) => {
                let result = fisher_z_test(r, data.n(), stmt.given.len(), alpha)?;
                if result.dependent {
                    violations.push((stmt.clone(), result));
                }
                StatementOutcome::Tested(result)
            }
            Err(err @ (StatsError::ConstantColumn(_) | StatsError::DegenerateConditioning(_))) => {
                StatementOutcome::Skipped(err.to_string())
            }
            Err(other) => return Err(other.into()),
        };
        tested.push((stmt, outcome));
    }
    let vacuous = !tested
        .iter()
        .any(|(_, o)| matches!(o, StatementOutcome::Tested(_)));
    let verdict = if violations.is_empty() {
        Verdict::Consistent
    } else {
        Verdict::Violated
    };
    Ok(MarkovReport {
        tested,
        violations,
        verdict,
        vacuous,
    })
}

/// A violated pair with the colliders that could explain it: children
/// shared by both variables in the hypothesized graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationLocus {
    pub x: String,
    pub y: String,
    pub common_children: BTreeSet<String>,
}

/// Outcome of agent detection on observational data.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub markov: MarkovReport,
    pub detected: bool,
    /// Union of the variables appearing in violated statements. A
    /// heuristic localization, not an identification: Markovianity
    /// violations prove an intervention, not which variable it hit.
    pub candidates: BTreeSet<String>,
    pub loci: Vec<ViolationLocus>,
}

/// Checks observational data against the model's causal graph and
/// flags the footprint of an intentional intervention.
///
/// The data's columns must be exactly the model's endogenous variables;
/// an observer of a starred world labels its columns with the base
/// names.
pub fn detect_agent(
    model: &ScmModel,
    data: &Dataset,
    alpha: f64,
    max_cond: usize,
) -> Result<DetectionReport, TeleoError> {
    let expected: BTreeSet<&str> = model.endogenous.iter().map(|v| v.name.as_str()).collect();
    let found: BTreeSet<&str> = data.columns.iter().map(String::as_str).collect();
    if expected != found {
        return Err(TeleoError::ColumnMismatch {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.iter().map(|s| s.to_string()).collect(),
        });
    }
    let dag = induce_dag(model).map_err(|e| TeleoError::Sample(SampleError::InvalidModel(e.to_string())))?;
    let observed: BTreeSet<String> = expected.iter().map(|s| s.to_string()).collect();
    let markov = markov_check(&dag, data, &observed, alpha, max_cond)?;
    let mut candidates = BTreeSet::new();
    let mut loci = Vec::new();
    for (stmt, _) in &markov.violations {
        candidates.insert(stmt.x.clone());
        candidates.insert(stmt.y.clone());
        let cx = dag.children(&stmt.x)?;
        let cy = dag.children(&stmt.y)?;
        loci.push(ViolationLocus {
            x: stmt.x.clone(),
            y: stmt.y.clone(),
            common_children: cx
                .intersection(&cy)
                .map(|s| s.to_string())
                .collect(),
        });
    }
    Ok(DetectionReport {
        detected: markov.verdict == Verdict::Violated,
        markov,
        candidates,
        loci,
    })
}

/// Tests whether a hypothesized twin model explains observed data: runs
/// the Markov check against the twin's full graph (shared exogenous
/// vertices included) restricted to its observed columns.
///
/// A consistent verdict is one-sided evidence: the hypothesis is not
/// refuted. When the twin graph implies no independencies among the
/// observed columns the report is vacuously consistent and says so.
pub fn verify_sfm_hypothesis(
    sfm: &TwinModel,
    data: &Dataset,
    alpha: f64,
    max_cond: usize,
) -> Result<MarkovReport, TeleoError> {
    let dag = sfm.full_graph()?;
    let observed: BTreeSet<String> = sfm
        .observed_names()
        .into_iter()
        .map(|s| s.to_string())
        .collect();
    markov_check(&dag, data, &observed, alpha, max_cond)
}

/// A black-box system containing an agent: ask for data observed after
/// installing an intervention in the agent's environment.
pub trait AgentSystem {
    /// Returns a dataset of `n` rows containing (at least) the starred
    /// decision columns, sampled after applying `intervention` to the
    /// environment the agent acts in.
    fn observe(
        &self,
        intervention: &InterventionSpec,
        n: usize,
        seed: u64,
    ) -> Result<Dataset, TeleoError>;
}

/// Simulation stand-in for a real agent system: a base model and the
/// hidden policy the agent uses on its target variable.
///
/// `observe` applies the requested intervention to the base mechanism
/// (both worlds see it), installs the policy, and samples the resulting
/// twin. The descendant check is skipped at this point: the policy was
/// validated against the original model, and the probe intervention may
/// have cut the very edges that made the goal a descendant.
pub struct SimulatedAgent {
    pub base: ScmModel,
    pub target: String,
    pub policy: crate::expr::Expr,
}

impl AgentSystem for SimulatedAgent {
    fn observe(
        &self,
        intervention: &InterventionSpec,
        n: usize,
        seed: u64,
    ) -> Result<Dataset, TeleoError> {
        let modified = match apply_spec(&self.base, intervention)? {
            Applied::Plain(m) => m,
            Applied::Twin(_) => {
                return Err(TeleoError::Operator(OperatorError::UnknownTarget(
                    "nested twin interventions are not part of the probe protocol".to_string(),
                )))
            }
        };
        let sfm = build_sfm_unchecked(&modified, &self.target, &self.policy)?;
        Ok(sample_twin(&sfm, n, seed, 0.0, DEFAULT_MAX_TRIES)?)
    }
}

/// One candidate's experiment in a discovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub name: String,
    pub values: (f64, f64),
    pub result: TestResult,
}

/// Outcome of intention discovery.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryReport {
    pub target: String,
    pub candidates: Vec<CandidateResult>,
    pub listened: BTreeSet<String>,
    /// Per-candidate significance level actually applied (alpha divided
    /// by the number of candidates).
    pub corrected_alpha: f64,
}

/// Picks intervention values for candidates without caller-supplied
/// pairs: {0, 1} for columns that look binary in a pilot sample,
/// mean plus/minus one standard deviation otherwise.
pub fn default_value_pairs(
    base: &ScmModel,
    candidates: &[String],
    seed: u64,
) -> Result<BTreeMap<String, (f64, f64)>, TeleoError> {
    let pilot = crate::sampling::sample_dataset(base, 1024, derive_seed(seed, u64::MAX))?;
    let mut out = BTreeMap::new();
    for name in candidates {
        let col = pilot
            .column(name)
            .map_err(|_| TeleoError::MissingColumn(name.clone()))?;
        let binary = col.iter().all(|&v| v == 0.0 || v == 1.0);
        if binary {
            out.insert(name.clone(), (0.0, 1.0));
        } else {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            out.insert(name.clone(), (mean - sd, mean + sd));
        }
    }
    Ok(out)
}

/// Identifies which candidate variables the agent's policy listens to.
///
/// For each candidate, the agent system is observed under perfect
/// interventions at two values; the distribution of the starred target
/// is compared across the two regimes (two-proportion test when the
/// outcome is binary, Fisher z against a regime indicator otherwise).
/// Bonferroni correction across candidates keeps the family-wise level
/// at `alpha`. Every candidate must be a strict descendant of the
/// target in the base graph.
pub fn discover_intention(
    base: &ScmModel,
    agent: &dyn AgentSystem,
    target: &str,
    candidates: &[String],
    n: usize,
    alpha: f64,
    seed: u64,
    value_pairs: &BTreeMap<String, (f64, f64)>,
) -> Result<DiscoveryReport, TeleoError> {
    let dag = induce_dag(base)
        .map_err(|e| TeleoError::Sample(SampleError::InvalidModel(e.to_string())))?;
    let descendants = dag.descendants(target)?;
    for c in candidates {
        if c == target || !descendants.contains(c.as_str()) {
            return Err(TeleoError::CandidateNotDescendant {
                candidate: c.clone(),
                target: target.to_string(),
            });
        }
    }
    let defaults = {
        let missing: Vec<String> = candidates
            .iter()
            .filter(|c| !value_pairs.contains_key(*c))
            .cloned()
            .collect();
        if missing.is_empty() {
            BTreeMap::new()
        } else {
            default_value_pairs(base, &missing, seed)?
        }
    };
    let outcome_column = format!("{target}{STAR_SUFFIX}");
    let corrected_alpha = alpha / candidates.len().max(1) as f64;
    let mut results = Vec::with_capacity(candidates.len());
    let mut listened = BTreeSet::new();
    for (i, c) in candidates.iter().enumerate() {
        let (lo, hi) = value_pairs
            .get(c)
            .or_else(|| defaults.get(c))
            .copied()
            .expect("every candidate has a value pair");
        let mut outcomes = Vec::with_capacity(2);
        for (j, value) in [lo, hi].into_iter().enumerate() {
            let spec = InterventionSpec::Do {
                target: c.clone(),
                value,
            };
            let data = agent.observe(&spec, n, derive_seed(seed, (2 * i + j + 1) as u64))?;
            let col = data
                .column(&outcome_column)
                .map_err(|_| TeleoError::MissingOutcomeColumn(outcome_column.clone()))?;
            outcomes.push(col);
        }
        let (low, high) = (&outcomes[0], &outcomes[1]);
        let binary = low
            .iter()
            .chain(high.iter())
            .all(|&v| v == 0.0 || v == 1.0);
        let result = if binary {
            let k1 = low.iter().filter(|&&v| v == 1.0).count();
            let k2 = high.iter().filter(|&&v| v == 1.0).count();
            two_proportion_test(k1, low.len(), k2, high.len(), corrected_alpha)?
        } else {
            // Regime indicator against the pooled outcome.
            let rows: Vec<Vec<f64>> = low
                .iter()
                .map(|&v| vec![0.0, v])
                .chain(high.iter().map(|&v| vec![1.0, v]))
                .collect();
            let pooled = Dataset {
                columns: vec!["regime".to_string(), "outcome".to_string()],
                rows,
                provenance: crate::sampling::Provenance {
                    model: base.name.clone(),
                    seed,
                    n: low.len() + high.len(),
                    op: format!("discovery[{c}]"),
                },
            };
            let r = partial_correlation(&pooled, "regime", "outcome", &BTreeSet::new())?;
            fisher_z_test(r, pooled.n(), 0, corrected_alpha)?
        };
        if result.dependent {
            listened.insert(c.clone());
        }
        results.push(CandidateResult {
            name: c.clone(),
            values: (lo, hi),
            result,
        });
    }
    Ok(DiscoveryReport {
        target: target.to_string(),
        candidates: results,
        listened,
        corrected_alpha,
    })
}
