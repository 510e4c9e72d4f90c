//! Model-to-model operators: perfect intervention, mechanism change,
//! counterfactual twin construction, and intentional intervention.
//!
//! The first two rewrite a single equation and return a plain model.
//! The latter two return a [`TwinModel`]: a joint model over the base
//! variables and a starred replica of each, sharing the exogenous
//! variables. The two constructions differ in what the starred world
//! means and which world an observer sees:
//!
//! * counterfactual twin: the starred replica carries a perfect
//!   intervention; evidence on the unstarred world is recorded for
//!   abduction at sampling time; the unstarred world is observed.
//! * intentional intervention: the starred target's equation becomes the
//!   agent's policy, which reads *unstarred* goal variables (the
//!   counterfactual outcomes the agent reasons about); the starred world
//!   is observed. The result is a structural final model (SFM).
//!
//! Policy edges only ever point from the unstarred world into the
//! starred one, so twin construction cannot introduce cycles.

use crate::expr::Expr;
use crate::scm::{induce_dag, induce_full_dag, Dag, EndogenousVar, ScmModel};

use std::collections::BTreeMap;

use thiserror::Error;

/// Suffix that marks replica variables in twin models.
pub const STAR_SUFFIX: &str = "_star";

/// A requested intervention, as read from an operation file.
#[derive(Debug, Clone, PartialEq)]
pub enum InterventionSpec {
    /// Perfect intervention: fix the target to a constant.
    Do { target: String, value: f64 },
    /// Mechanism change: replace the target's equation.
    Mechanism { target: String, equation: Expr },
    /// Counterfactual: evidence on the factual world, a perfect
    /// intervention in the replica.
    Counterfactual {
        target: String,
        value: f64,
        evidence: BTreeMap<String, f64>,
    },
    /// Intentional intervention: the replica target follows a policy
    /// over counterfactual (unstarred) outcomes.
    Intentional { target: String, policy: Expr },
}

impl InterventionSpec {
    pub fn target(&self) -> &str {
        match self {
            InterventionSpec::Do { target, .. }
            | InterventionSpec::Mechanism { target, .. }
            | InterventionSpec::Counterfactual { target, .. }
            | InterventionSpec::Intentional { target, .. } => target,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InterventionSpec::Do { .. } => "do",
            InterventionSpec::Mechanism { .. } => "mechanism",
            InterventionSpec::Counterfactual { .. } => "counterfactual",
            InterventionSpec::Intentional { .. } => "intentional",
        }
    }
}

/// Which twin world an observer of the model's data sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum World {
    Unstarred,
    Starred,
}

/// A twin model: base variables plus a starred replica per variable,
/// sharing exogenous variables.
///
/// `model.endogenous` lists the base variables in declaration order
/// followed by their replicas in the same order. `target` names the
/// intervened base variable (its replica carries the changed equation).
/// `evidence` is the conditioning applied to the unstarred world when
/// sampling; intentional interventions leave it empty, but any twin may
/// carry evidence (conditioning and the observed marker are orthogonal).
#[derive(Debug, Clone, PartialEq)]
pub struct TwinModel {
    pub model: ScmModel,
    pub observed: World,
    pub target: String,
    pub evidence: BTreeMap<String, f64>,
}

/// Operator failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OperatorError {
    #[error("target `{0}` is not an endogenous variable of the model")]
    UnknownTarget(String),
    #[error("evidence names `{0}`, which is not an endogenous variable")]
    UnknownEvidenceVariable(String),
    #[error("equation for `{target}` reads `{variable}`, which is not in scope")]
    OutOfScopeReference { target: String, variable: String },
    #[error("mechanism change on `{target}` creates a cycle: {detail}")]
    CycleIntroduced { target: String, detail: String },
    #[error("variable `{0}` collides with the reserved `{STAR_SUFFIX}` replica namespace")]
    StarCollision(String),
    #[error("policy reads `{0}`, which is not an endogenous variable of the base model")]
    PolicyReadsUnknown(String),
    #[error("policy goal `{goal}` is not a descendant of target `{target}`")]
    GoalNotDescendant { goal: String, target: String },
}

fn require_endogenous(model: &ScmModel, target: &str) -> Result<usize, OperatorError> {
    model
        .endogenous
        .iter()
        .position(|v| v.name == target)
        .ok_or_else(|| OperatorError::UnknownTarget(target.to_string()))
}

/// Perfect intervention: returns the model with `target`'s equation
/// replaced by the constant `value`.
///
/// All edges into the target disappear from the induced graph; the
/// exogenous partner remains declared but unused.
pub fn apply_do(model: &ScmModel, target: &str, value: f64) -> Result<ScmModel, OperatorError> {
    let idx = require_endogenous(model, target)?;
    let mut out = model.clone();
    out.endogenous[idx].equation = Expr::Number(value);
    Ok(out)
}

/// Mechanism change: returns the model with `target`'s equation replaced.
///
/// The new equation may read other endogenous variables and the
/// target's own exogenous partner; it must not create a cycle.
pub fn apply_mechanism_change(
    model: &ScmModel,
    target: &str,
    equation: Expr,
) -> Result<ScmModel, OperatorError> {
    let idx = require_endogenous(model, target)?;
    let partner = model.endogenous[idx].exogenous.clone();
    for free in equation.free_variables() {
        let visible = free != target
            && (free == partner || model.endogenous.iter().any(|v| v.name == free));
        if !visible {
            return Err(OperatorError::OutOfScopeReference {
                target: target.to_string(),
                variable: free,
            });
        }
    }
    let mut out = model.clone();
    out.endogenous[idx].equation = equation;
    if let Err(err) = induce_dag(&out) {
        return Err(OperatorError::CycleIntroduced {
            target: target.to_string(),
            detail: err.to_string(),
        });
    }
    Ok(out)
}

fn starred(name: &str) -> String {
    format!("{name}{STAR_SUFFIX}")
}

/// Rejects base models that already use the replica namespace.
fn check_star_free(model: &ScmModel) -> Result<(), OperatorError> {
    for name in model
        .endogenous
        .iter()
        .map(|v| v.name.as_str())
        .chain(model.exogenous.iter().map(|v| v.name.as_str()))
    {
        if name.ends_with(STAR_SUFFIX) {
            return Err(OperatorError::StarCollision(name.to_string()));
        }
    }
    Ok(())
}

/// Builds the twin skeleton: base variables unchanged, replicas with
/// endogenous references renamed into the starred world, exogenous
/// partners shared. The caller then rewrites the target replica.
fn twin_skeleton(model: &ScmModel, suffix_tag: &str) -> ScmModel {
    let endo_names: Vec<String> = model.endogenous.iter().map(|v| v.name.clone()).collect();
    let rename = |v: &str| {
        if endo_names.iter().any(|n| n == v) {
            starred(v)
        } else {
            v.to_string()
        }
    };
    let mut endogenous = model.endogenous.clone();
    for base in &model.endogenous {
        endogenous.push(EndogenousVar {
            name: starred(&base.name),
            exogenous: base.exogenous.clone(),
            equation: base.equation.rename_vars(rename),
        });
    }
    ScmModel {
        name: format!("{}{suffix_tag}", model.name),
        endogenous,
        exogenous: model.exogenous.clone(),
    }
}

/// Counterfactual twin: replica world under do(target_star = value),
/// with `evidence` recorded for abduction-aware sampling of the factual
/// world. The unstarred columns are the observed ones.
pub fn build_twin(
    model: &ScmModel,
    target: &str,
    value: f64,
    evidence: &BTreeMap<String, f64>,
) -> Result<TwinModel, OperatorError> {
    require_endogenous(model, target)?;
    check_star_free(model)?;
    for key in evidence.keys() {
        require_endogenous(model, key)
            .map_err(|_| OperatorError::UnknownEvidenceVariable(key.clone()))?;
    }
    let mut twin = twin_skeleton(model, "_twin");
    let n = model.endogenous.len();
    let idx = require_endogenous(model, target)?;
    twin.endogenous[n + idx].equation = Expr::Number(value);
    Ok(TwinModel {
        model: twin,
        observed: World::Unstarred,
        target: target.to_string(),
        evidence: evidence.clone(),
    })
}

/// Intentional intervention: builds the structural final model.
///
/// The starred target's equation becomes `policy`, whose references
/// point at unstarred variables. Every variable the policy reads must
/// be an endogenous descendant of the target (the target itself
/// counts). The starred columns are the observed ones.
pub fn build_sfm(model: &ScmModel, target: &str, policy: &Expr) -> Result<TwinModel, OperatorError> {
    let dag = induce_dag(model).map_err(|e| OperatorError::CycleIntroduced {
        target: target.to_string(),
        detail: e.to_string(),
    })?;
    let descendants = dag
        .descendants(target)
        .map_err(|_| OperatorError::UnknownTarget(target.to_string()))?;
    for goal in policy.free_variables() {
        if model.endogenous_var(&goal).is_none() {
            return Err(OperatorError::PolicyReadsUnknown(goal));
        }
        if !descendants.contains(goal.as_str()) {
            return Err(OperatorError::GoalNotDescendant {
                goal,
                target: target.to_string(),
            });
        }
    }
    build_sfm_unchecked(model, target, policy)
}

/// [`build_sfm`] without the goal-descendant requirement.
///
/// Discovery protocols intervene on the base mechanism before handing
/// the model to the agent; such edits can remove the descendant
/// relation the policy was originally validated against, while the
/// policy itself is unchanged. This entry point still checks naming,
/// scope, and structure.
pub fn build_sfm_unchecked(
    model: &ScmModel,
    target: &str,
    policy: &Expr,
) -> Result<TwinModel, OperatorError> {
    let idx = require_endogenous(model, target)?;
    check_star_free(model)?;
    for goal in policy.free_variables() {
        if model.endogenous_var(&goal).is_none() {
            return Err(OperatorError::PolicyReadsUnknown(goal));
        }
    }
    let mut twin = twin_skeleton(model, "_sfm");
    let n = model.endogenous.len();
    twin.endogenous[n + idx].equation = policy.clone();
    Ok(TwinModel {
        model: twin,
        observed: World::Starred,
        target: target.to_string(),
        evidence: BTreeMap::new(),
    })
}

/// Result of applying an [`InterventionSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Plain(ScmModel),
    Twin(TwinModel),
}

/// Dispatches a spec to the matching operator.
pub fn apply_spec(model: &ScmModel, spec: &InterventionSpec) -> Result<Applied, OperatorError> {
    match spec {
        InterventionSpec::Do { target, value } => {
            Ok(Applied::Plain(apply_do(model, target, *value)?))
        }
        InterventionSpec::Mechanism { target, equation } => Ok(Applied::Plain(
            apply_mechanism_change(model, target, equation.clone())?,
        )),
        InterventionSpec::Counterfactual {
            target,
            value,
            evidence,
        } => Ok(Applied::Twin(build_twin(model, target, *value, evidence)?)),
        InterventionSpec::Intentional { target, policy } => {
            Ok(Applied::Twin(build_sfm(model, target, policy)?))
        }
    }
}

impl TwinModel {
    /// Number of base (unstarred) endogenous variables.
    pub fn base_count(&self) -> usize {
        self.model.endogenous.len() / 2
    }

    pub fn base_names(&self) -> Vec<&str> {
        self.model.endogenous[..self.base_count()]
            .iter()
            .map(|v| v.name.as_str())
            .collect()
    }

    pub fn starred_names(&self) -> Vec<&str> {
        self.model.endogenous[self.base_count()..]
            .iter()
            .map(|v| v.name.as_str())
            .collect()
    }

    /// Column names an observer of this twin sees.
    pub fn observed_names(&self) -> Vec<&str> {
        match self.observed {
            World::Unstarred => self.base_names(),
            World::Starred => self.starred_names(),
        }
    }

    /// Full graph over both worlds and the shared exogenous vertices.
    pub fn full_graph(&self) -> Result<Dag, OperatorError> {
        induce_full_dag(&self.model).map_err(|e| OperatorError::CycleIntroduced {
            target: self.target.clone(),
            detail: e.to_string(),
        })
    }

    /// Checks the twin-shape invariants, returning human-readable
    /// problems (empty = valid). Used when reloading twin files.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let total = self.model.endogenous.len();
        if total % 2 != 0 {
            out.push(format!(
                "twin model must have an even number of endogenous variables, found {total}"
            ));
            return out;
        }
        let n = total / 2;
        let base = &self.model.endogenous[..n];
        let replica = &self.model.endogenous[n..];
        let endo_names: Vec<String> = base.iter().map(|v| v.name.clone()).collect();
        let rename = |v: &str| {
            if endo_names.iter().any(|m| m == v) {
                starred(v)
            } else {
                v.to_string()
            }
        };
        let mut target_ok = false;
        for (b, r) in base.iter().zip(replica) {
            if r.name != starred(&b.name) {
                out.push(format!(
                    "replica of `{}` must be named `{}`, found `{}`",
                    b.name,
                    starred(&b.name),
                    r.name
                ));
                continue;
            }
            if r.exogenous != b.exogenous {
                out.push(format!(
                    "replica `{}` must share exogenous partner `{}`, found `{}`",
                    r.name, b.exogenous, r.exogenous
                ));
            }
            if b.name == self.target {
                target_ok = true;
                continue;
            }
            if r.equation != b.equation.rename_vars(rename) {
                out.push(format!(
                    "replica `{}` deviates from the base equation outside the intervened target",
                    r.name
                ));
            }
        }
        if !target_ok {
            out.push(format!(
                "target `{}` is not a base endogenous variable",
                self.target
            ));
        }
        for key in self.evidence.keys() {
            if !endo_names.iter().any(|m| m == key) {
                out.push(format!("evidence names unknown variable `{key}`"));
            }
        }
        if let Err(err) = induce_full_dag(&self.model) {
            out.push(format!("twin graph is invalid: {err}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::scm::{validate_model, Distribution, ExogenousVar};

    fn var(name: &str, exo: &str, eq: &str) -> EndogenousVar {
        EndogenousVar {
            name: name.to_string(),
            exogenous: exo.to_string(),
            equation: parse_expression(eq).unwrap(),
        }
    }

    fn bern(name: &str, p: f64) -> ExogenousVar {
        ExogenousVar {
            name: name.to_string(),
            distribution: Distribution::Bernoulli { p },
        }
    }

    fn norm(name: &str, mean: f64, variance: f64) -> ExogenousVar {
        ExogenousVar {
            name: name.to_string(),
            distribution: Distribution::Normal { mean, variance },
        }
    }

    fn heating() -> ScmModel {
        ScmModel {
            name: "heating".to_string(),
            endogenous: vec![
                var("W", "U_W", "U_W"),
                var("T", "U_T", "W + H + U_T"),
                var("H", "U_H", "U_H"),
            ],
            exogenous: vec![
                bern("U_W", 0.5),
                norm("U_T", 0.0, 1e-20),
                bern("U_H", 0.5),
            ],
        }
    }

    fn smoking() -> ScmModel {
        ScmModel {
            name: "smoking".to_string(),
            endogenous: vec![
                var("S", "U_S", "U_S"),
                var("D", "U_D", "0.3*S + U_D"),
                var("P", "U_P", "0.5*S + U_P + 1"),
            ],
            exogenous: vec![
                bern("U_S", 0.5),
                norm("U_D", 0.0, 1.0),
                norm("U_P", 0.0, 1.0),
            ],
        }
    }

    fn chain_zxy() -> ScmModel {
        ScmModel {
            name: "chain".to_string(),
            endogenous: vec![
                var("Z", "U_Z", "U_Z"),
                var("X", "U_X", "Z + U_X"),
                var("Y", "U_Y", "X + U_Y"),
            ],
            exogenous: vec![
                norm("U_Z", 0.0, 1.0),
                norm("U_X", 0.0, 1.0),
                norm("U_Y", 0.0, 1.0),
            ],
        }
    }

    #[test]
    fn do_removes_incoming_edges_and_keeps_outgoing() {
        let m = chain_zxy();
        let out = apply_do(&m, "X", 1.0).unwrap();
        let dag = induce_dag(&out).unwrap();
        assert_eq!(dag.edges(), [("X", "Y")]);
        assert_eq!(out.endogenous[1].equation, Expr::Number(1.0));
        assert_eq!(validate_model(&out), Vec::new());
    }

    #[test]
    fn do_on_smoking_duration() {
        let out = apply_do(&smoking(), "D", 0.0).unwrap();
        let dag = induce_dag(&out).unwrap();
        assert_eq!(dag.edges(), [("S", "P")]);
    }

    #[test]
    fn do_on_absent_variable_fails() {
        assert_eq!(
            apply_do(&heating(), "Q", 1.0),
            Err(OperatorError::UnknownTarget("Q".to_string()))
        );
    }

    #[test]
    fn mechanism_change_reduces_signature() {
        let out =
            apply_mechanism_change(&heating(), "T", parse_expression("W + U_T").unwrap()).unwrap();
        let dag = induce_dag(&out).unwrap();
        assert_eq!(dag.edges(), [("W", "T")]);
    }

    #[test]
    fn mechanism_change_rejects_cycles() {
        let err = apply_mechanism_change(&heating(), "W", parse_expression("T + U_W").unwrap())
            .unwrap_err();
        assert!(matches!(err, OperatorError::CycleIntroduced { .. }));
    }

    #[test]
    fn mechanism_change_rejects_foreign_noise() {
        let err = apply_mechanism_change(&heating(), "T", parse_expression("W + U_H").unwrap())
            .unwrap_err();
        assert_eq!(
            err,
            OperatorError::OutOfScopeReference {
                target: "T".to_string(),
                variable: "U_H".to_string(),
            }
        );
    }

    #[test]
    fn constant_mechanism_equals_do() {
        let a = apply_mechanism_change(&heating(), "H", parse_expression("1").unwrap()).unwrap();
        let b = apply_do(&heating(), "H", 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counterfactual_twin_structure() {
        let m = chain_zxy();
        let evidence = BTreeMap::from([("X".to_string(), 1.0)]);
        let twin = build_twin(&m, "X", 0.0, &evidence).unwrap();
        assert_eq!(twin.observed, World::Unstarred);
        assert_eq!(twin.base_names(), ["Z", "X", "Y"]);
        assert_eq!(twin.starred_names(), ["Z_star", "X_star", "Y_star"]);
        // Factual world untouched; replica target fixed by intervention.
        assert_eq!(twin.model.endogenous[1].equation, parse_expression("Z + U_X").unwrap());
        assert_eq!(twin.model.endogenous[4].equation, Expr::Number(0.0));
        // Replica equations reference starred variables, shared noise.
        assert_eq!(
            twin.model.endogenous[5].equation,
            parse_expression("X_star + U_Y").unwrap()
        );
        assert_eq!(twin.model.endogenous[5].exogenous, "U_Y");
        assert_eq!(twin.evidence, evidence);
        assert_eq!(twin.validate(), Vec::<String>::new());
    }

    #[test]
    fn counterfactual_twin_with_empty_evidence_is_plain_replica() {
        let twin = build_twin(&heating(), "H", 1.0, &BTreeMap::new()).unwrap();
        assert!(twin.evidence.is_empty());
        assert_eq!(twin.model.endogenous[5].equation, Expr::Number(1.0));
    }

    #[test]
    fn twin_shares_exogenous_unless_intervened() {
        let twin = build_twin(&heating(), "H", 1.0, &BTreeMap::new()).unwrap();
        let graph = twin.full_graph().unwrap();
        // Shared noise: U_W feeds both worlds' W.
        assert_eq!(
            graph.children("U_W").unwrap(),
            std::collections::BTreeSet::from(["W", "W_star"])
        );
        // The intervened replica reads nothing.
        assert!(graph.parents("H_star").unwrap().is_empty());
    }

    #[test]
    fn sfm_matches_expected_heating_graph() {
        let policy = parse_expression("if(T < 0.5, 1, 0)").unwrap();
        let sfm = build_sfm(&heating(), "H", &policy).unwrap();
        assert_eq!(sfm.observed, World::Starred);
        assert_eq!(sfm.observed_names(), ["W_star", "T_star", "H_star"]);
        let graph = sfm.full_graph().unwrap();
        let mut edges: Vec<(&str, &str)> = graph.edges();
        edges.sort();
        assert_eq!(
            edges,
            [
                ("H", "T"),
                ("H_star", "T_star"),
                ("T", "H_star"),
                ("U_H", "H"),
                ("U_T", "T"),
                ("U_T", "T_star"),
                ("U_W", "W"),
                ("U_W", "W_star"),
                ("W", "T"),
                ("W_star", "T_star"),
            ]
        );
        assert_eq!(sfm.validate(), Vec::<String>::new());
    }

    #[test]
    fn sfm_policy_must_read_descendants() {
        let policy = parse_expression("if(D > 0, 1, 0)").unwrap();
        let err = build_sfm(&smoking(), "P", &policy).unwrap_err();
        assert_eq!(
            err,
            OperatorError::GoalNotDescendant {
                goal: "D".to_string(),
                target: "P".to_string(),
            }
        );
    }

    #[test]
    fn sfm_target_itself_is_a_valid_goal() {
        let policy = parse_expression("if(S > 0, 0, 1)").unwrap();
        assert!(build_sfm(&smoking(), "S", &policy).is_ok());
    }

    #[test]
    fn unchecked_sfm_skips_only_the_descendant_rule() {
        let policy = parse_expression("if(D > 0, 1, 0)").unwrap();
        assert!(build_sfm_unchecked(&smoking(), "P", &policy).is_ok());
        let unknown = parse_expression("if(Q > 0, 1, 0)").unwrap();
        assert_eq!(
            build_sfm_unchecked(&smoking(), "P", &unknown),
            Err(OperatorError::PolicyReadsUnknown("Q".to_string()))
        );
    }

    #[test]
    fn constant_policy_sfm_matches_empty_evidence_twin_structure() {
        let policy = parse_expression("0").unwrap();
        let sfm = build_sfm(&heating(), "H", &policy).unwrap();
        let twin = build_twin(&heating(), "H", 0.0, &BTreeMap::new()).unwrap();
        // Same structural equations in both worlds; only the observation
        // marker and provenance name differ.
        assert_eq!(
            sfm.model.endogenous, twin.model.endogenous,
            "constant policy must equal the perfect replica intervention"
        );
        assert_eq!(sfm.model.exogenous, twin.model.exogenous);
    }

    #[test]
    fn star_namespace_is_reserved() {
        let mut m = heating();
        m.endogenous.push(var("H_star", "U_Q", "U_Q"));
        m.exogenous.push(bern("U_Q", 0.5));
        let err = build_twin(&m, "H", 1.0, &BTreeMap::new()).unwrap_err();
        assert_eq!(err, OperatorError::StarCollision("H_star".to_string()));
    }

    #[test]
    fn evidence_keys_must_be_endogenous() {
        let evidence = BTreeMap::from([("U_W".to_string(), 1.0)]);
        let err = build_twin(&heating(), "H", 1.0, &evidence).unwrap_err();
        assert_eq!(
            err,
            OperatorError::UnknownEvidenceVariable("U_W".to_string())
        );
    }

    #[test]
    fn twin_validate_flags_replica_drift() {
        let mut twin = build_twin(&heating(), "H", 1.0, &BTreeMap::new()).unwrap();
        twin.model.endogenous[4].equation = parse_expression("W_star + U_T").unwrap();
        let problems = twin.validate();
        assert!(problems.iter().any(|p| p.contains("T_star")));
    }

    #[test]
    fn apply_spec_dispatches() {
        let m = heating();
        let spec = InterventionSpec::Do {
            target: "H".to_string(),
            value: 1.0,
        };
        assert!(matches!(apply_spec(&m, &spec), Ok(Applied::Plain(_))));
        let spec = InterventionSpec::Intentional {
            target: "H".to_string(),
            policy: parse_expression("if(T < 0.5, 1, 0)").unwrap(),
        };
        assert!(matches!(apply_spec(&m, &spec), Ok(Applied::Twin(_))));
    }

    #[test]
    fn replica_fidelity_restores_base() {
        let m = smoking();
        let policy = parse_expression("if(P > 1, 1, 0)").unwrap();
        let sfm = build_sfm(&m, "S", &policy).unwrap();
        let n = sfm.base_count();
        // Unstarred world is the base model verbatim.
        assert_eq!(&sfm.model.endogenous[..n], &m.endogenous[..]);
        // Starred world, with the intervention undone and names restored,
        // is the base model again.
        let restore = |v: &str| v.strip_suffix(STAR_SUFFIX).unwrap_or(v).to_string();
        for (i, b) in m.endogenous.iter().enumerate() {
            if b.name == sfm.target {
                continue;
            }
            let r = &sfm.model.endogenous[n + i];
            assert_eq!(r.equation.rename_vars(restore), b.equation);
        }
    }
}
