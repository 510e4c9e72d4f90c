//! Model representation, validation, and induced causal graphs.
//!
//! A model is a list of endogenous variables, each with a structural
//! equation and exactly one private exogenous partner, plus the
//! distributions of those exogenous variables. Validation checks the
//! well-formedness rules (partnering, reference scope, acyclicity,
//! distribution parameters) and reports violations as data rather than
//! failing fast, so a caller can show all problems at once.
//!
//! [`Dag`] is the induced graph over a chosen vertex set. Declaration
//! order is the canonical variable order everywhere: graph vertices,
//! sampling columns, and topological tie-breaks all follow it, which
//! keeps outputs byte-reproducible.

use crate::expr::Expr;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Distribution of an exogenous variable.
///
/// `Normal` is parameterized by mean and *variance*. Degenerate cases
/// (variance 0, p of 0 or 1) are allowed and behave as point masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Bernoulli { p: f64 },
    Normal { mean: f64, variance: f64 },
}

/// An endogenous variable: name, exogenous partner, structural equation.
#[derive(Debug, Clone, PartialEq)]
pub struct EndogenousVar {
    pub name: String,
    pub exogenous: String,
    pub equation: Expr,
}

/// An exogenous variable and its distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousVar {
    pub name: String,
    pub distribution: Distribution,
}

/// A structural causal model.
///
/// Lists are in declaration order. The struct itself is plain data;
/// call [`validate_model`] to check the well-formedness rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmModel {
    pub name: String,
    pub endogenous: Vec<EndogenousVar>,
    pub exogenous: Vec<ExogenousVar>,
}

impl ScmModel {
    pub fn endogenous_names(&self) -> Vec<&str> {
        self.endogenous.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn exogenous_names(&self) -> Vec<&str> {
        self.exogenous.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn endogenous_var(&self, name: &str) -> Option<&EndogenousVar> {
        self.endogenous.iter().find(|v| v.name == name)
    }

    pub fn exogenous_var(&self, name: &str) -> Option<&ExogenousVar> {
        self.exogenous.iter().find(|v| v.name == name)
    }
}

/// Identifier of a validation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    DuplicateName,
    UnknownPartner,
    SharedPartner,
    UnpartneredExogenous,
    SelfReference,
    UnknownReference,
    InvalidProbability,
    InvalidVariance,
    NonFiniteParameter,
    Cycle,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::DuplicateName => "duplicate-name",
            Rule::UnknownPartner => "unknown-partner",
            Rule::SharedPartner => "shared-partner",
            Rule::UnpartneredExogenous => "unpartnered-exogenous",
            Rule::SelfReference => "self-reference",
            Rule::UnknownReference => "unknown-reference",
            Rule::InvalidProbability => "invalid-probability",
            Rule::InvalidVariance => "invalid-variance",
            Rule::NonFiniteParameter => "non-finite-parameter",
            Rule::Cycle => "cycle",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One broken rule, naming the offending variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub variable: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.variable, self.message)
    }
}

/// Checks every model invariant and returns the violations found.
///
/// An empty report means the model is valid. Violations are reported in
/// a deterministic order (per-variable, declaration order first).
pub fn validate_model(model: &ScmModel) -> Vec<Violation> {
    let mut out = Vec::new();

    // Name uniqueness across both variable kinds.
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for name in model
        .endogenous
        .iter()
        .map(|v| v.name.as_str())
        .chain(model.exogenous.iter().map(|v| v.name.as_str()))
    {
        if !seen.insert(name) {
            out.push(Violation {
                variable: name.to_string(),
                rule: Rule::DuplicateName,
                message: "variable name declared more than once".to_string(),
            });
        }
    }

    let endo_names: BTreeSet<&str> = model.endogenous.iter().map(|v| v.name.as_str()).collect();
    let exo_names: BTreeSet<&str> = model.exogenous.iter().map(|v| v.name.as_str()).collect();

    // Partnering: each endogenous names an existing exogenous partner,
    // and each exogenous partners exactly one endogenous variable.
    let mut partner_uses: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for v in &model.endogenous {
        if exo_names.contains(v.exogenous.as_str()) {
            partner_uses
                .entry(v.exogenous.as_str())
                .or_default()
                .push(v.name.as_str());
        } else {
            out.push(Violation {
                variable: v.name.to_string(),
                rule: Rule::UnknownPartner,
                message: format!("exogenous partner `{}` is not declared", v.exogenous),
            });
        }
    }
    for exo in &model.exogenous {
        match partner_uses.get(exo.name.as_str()).map(Vec::as_slice) {
            None | Some([]) => out.push(Violation {
                variable: exo.name.to_string(),
                rule: Rule::UnpartneredExogenous,
                message: "exogenous variable partners no endogenous variable".to_string(),
            }),
            Some([_]) => {}
            Some(users) => out.push(Violation {
                variable: exo.name.to_string(),
                rule: Rule::SharedPartner,
                message: format!(
                    "exogenous variable partners {} endogenous variables ({})",
                    users.len(),
                    users.join(", ")
                ),
            }),
        }
    }

    // Reference scope: each equation may read other endogenous variables
    // and its own exogenous partner, nothing else.
    for v in &model.endogenous {
        for free in v.equation.free_variables() {
            if free == v.name {
                out.push(Violation {
                    variable: v.name.to_string(),
                    rule: Rule::SelfReference,
                    message: "equation references the variable it defines".to_string(),
                });
            } else if free != v.exogenous && !endo_names.contains(free.as_str()) {
                let detail = if exo_names.contains(free.as_str()) {
                    "an exogenous variable partnered elsewhere"
                } else {
                    "not declared"
                };
                out.push(Violation {
                    variable: v.name.to_string(),
                    rule: Rule::UnknownReference,
                    message: format!("equation reads `{free}`, which is {detail}"),
                });
            }
        }
    }

    // Distribution parameters.
    for exo in &model.exogenous {
        match exo.distribution {
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation {
                        variable: exo.name.to_string(),
                        rule: Rule::InvalidProbability,
                        message: format!("bernoulli p = {p} is outside [0, 1]"),
                    });
                }
            }
            Distribution::Normal { mean, variance } => {
                if !mean.is_finite() {
                    out.push(Violation {
                        variable: exo.name.to_string(),
                        rule: Rule::NonFiniteParameter,
                        message: format!("normal mean = {mean} is not finite"),
                    });
                }
                if !(variance >= 0.0) || !variance.is_finite() {
                    out.push(Violation {
                        variable: exo.name.to_string(),
                        rule: Rule::InvalidVariance,
                        message: format!("normal variance = {variance} is not a finite nonnegative number"),
                    });
                }
            }
        }
    }

    // Acyclicity of the induced endogenous graph. Only meaningful when the
    // reference checks above passed for the variables involved; unknown
    // references are simply ignored here.
    let n = model.endogenous.len();
    let index: HashMap<&str, usize> = model
        .endogenous
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (j, v) in model.endogenous.iter().enumerate() {
        for free in v.equation.free_variables() {
            if free == v.name {
                continue;
            }
            if let Some(&i) = index.get(free.as_str()) {
                children[i].push(j);
                indegree[j] += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut emitted = 0usize;
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        emitted += 1;
        for &j in &children[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if emitted < n {
        let stuck: Vec<&str> = model
            .endogenous
            .iter()
            .enumerate()
            .filter(|(j, _)| indegree[*j] > 0)
            .map(|(_, v)| v.name.as_str())
            .collect();
        out.push(Violation {
            variable: stuck.first().copied().unwrap_or("?").to_string(),
            rule: Rule::Cycle,
            message: format!(
                "structural equations form a cycle through {{{}}}",
                stuck.join(", ")
            ),
        });
    }

    out
}

/// Graph query failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("edges form a cycle through {{{0}}}")]
    Cycle(String),
    #[error("edge endpoint `{0}` is not a declared vertex")]
    DanglingEdge(String),
}

/// A directed acyclic graph over named vertices.
///
/// Vertex order is the declaration order and is preserved by all
/// queries. Construction rejects dangling edge endpoints and cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    vertices: Vec<String>,
    index: HashMap<String, usize>,
    parent_sets: Vec<BTreeSet<usize>>,
    child_sets: Vec<BTreeSet<usize>>,
}

impl Dag {
    pub fn new<I>(vertices: Vec<String>, edges: I) -> Result<Dag, GraphError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(GraphError::UnknownVertex(format!("{v} (declared twice)")));
            }
        }
        let n = vertices.len();
        let mut parent_sets = vec![BTreeSet::new(); n];
        let mut child_sets = vec![BTreeSet::new(); n];
        for (from, to) in edges {
            let &i = index
                .get(&from)
                .ok_or_else(|| GraphError::DanglingEdge(from.clone()))?;
            let &j = index
                .get(&to)
                .ok_or_else(|| GraphError::DanglingEdge(to.clone()))?;
            parent_sets[j].insert(i);
            child_sets[i].insert(j);
        }
        let dag = Dag {
            vertices,
            index,
            parent_sets,
            child_sets,
        };
        dag.check_acyclic()?;
        Ok(dag)
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        if self.topological_indices().len() < self.vertices.len() {
            let placed: BTreeSet<usize> = self.topological_indices().into_iter().collect();
            let stuck: Vec<&str> = (0..self.vertices.len())
                .filter(|i| !placed.contains(i))
                .map(|i| self.vertices[i].as_str())
                .collect();
            return Err(GraphError::Cycle(stuck.join(", ")));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn contains(&self, v: &str) -> bool {
        self.index.contains_key(v)
    }

    /// Edges in deterministic (source-index, target-index) order.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (i, children) in self.child_sets.iter().enumerate() {
            for &j in children {
                out.push((self.vertices[i].as_str(), self.vertices[j].as_str()));
            }
        }
        out
    }

    pub(crate) fn index_of(&self, v: &str) -> Result<usize, GraphError> {
        self.index
            .get(v)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(v.to_string()))
    }

    pub(crate) fn parent_indices(&self, i: usize) -> &BTreeSet<usize> {
        &self.parent_sets[i]
    }

    pub fn parents(&self, v: &str) -> Result<BTreeSet<&str>, GraphError> {
        let i = self.index_of(v)?;
        Ok(self.parent_sets[i]
            .iter()
            .map(|&j| self.vertices[j].as_str())
            .collect())
    }

    pub fn children(&self, v: &str) -> Result<BTreeSet<&str>, GraphError> {
        let i = self.index_of(v)?;
        Ok(self.child_sets[i]
            .iter()
            .map(|&j| self.vertices[j].as_str())
            .collect())
    }

    /// Vertices reachable from `v` by a directed path, including `v`.
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<&str>, GraphError> {
        let start = self.index_of(v)?;
        Ok(self
            .reach(start, |i| &self.child_sets[i])
            .into_iter()
            .map(|i| self.vertices[i].as_str())
            .collect())
    }

    /// Vertices from which `v` is reachable, including `v`.
    pub fn ancestors(&self, v: &str) -> Result<BTreeSet<&str>, GraphError> {
        let start = self.index_of(v)?;
        Ok(self
            .reach(start, |i| &self.parent_sets[i])
            .into_iter()
            .map(|i| self.vertices[i].as_str())
            .collect())
    }

    fn reach<'a, F>(&'a self, start: usize, step: F) -> BTreeSet<usize>
    where
        F: Fn(usize) -> &'a BTreeSet<usize>,
    {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(step(i).iter().copied());
            }
        }
        seen
    }

    /// Ancestor closure of a vertex set (each vertex included).
    pub(crate) fn ancestral_indices(&self, seeds: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = seeds.iter().copied().collect();
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(self.parent_sets[i].iter().copied());
            }
        }
        seen
    }

    fn topological_indices(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut indegree: Vec<usize> = (0..n).map(|i| self.parent_sets[i].len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &j in &self.child_sets[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        order
    }

    /// Topological order with ties broken by declaration order.
    ///
    /// Deterministic: repeated calls return the same permutation.
    pub fn topological_order(&self) -> Vec<&str> {
        self.topological_indices()
            .into_iter()
            .map(|i| self.vertices[i].as_str())
            .collect()
    }
}

/// Model-to-graph failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum InduceError {
    #[error("invalid model: {0}")]
    Graph(#[from] GraphError),
}

/// Induces the causal DAG over endogenous variables.
///
/// Vertices are the endogenous names in declaration order; there is an
/// edge A → B iff A appears free in B's equation and A is endogenous.
pub fn induce_dag(model: &ScmModel) -> Result<Dag, InduceError> {
    let endo: BTreeSet<&str> = model.endogenous.iter().map(|v| v.name.as_str()).collect();
    let vertices: Vec<String> = model.endogenous.iter().map(|v| v.name.clone()).collect();
    let mut edges = Vec::new();
    for v in &model.endogenous {
        for free in v.equation.free_variables() {
            if endo.contains(free.as_str()) && free != v.name {
                edges.push((free, v.name.clone()));
            }
        }
    }
    Ok(Dag::new(vertices, edges)?)
}

/// Induces the DAG over endogenous *and* exogenous variables.
///
/// Adds each exogenous vertex with an edge into every equation that
/// reads it. In a valid model that is one edge (to its partner), but
/// twin structures share exogenous parents across two variables, and
/// those shared vertices are exactly what separation queries over twin
/// graphs need to see.
pub fn induce_full_dag(model: &ScmModel) -> Result<Dag, InduceError> {
    let endo: BTreeSet<&str> = model.endogenous.iter().map(|v| v.name.as_str()).collect();
    let exo: BTreeSet<&str> = model.exogenous.iter().map(|v| v.name.as_str()).collect();
    let mut vertices: Vec<String> = model.endogenous.iter().map(|v| v.name.clone()).collect();
    vertices.extend(model.exogenous.iter().map(|v| v.name.clone()));
    let mut edges = Vec::new();
    for v in &model.endogenous {
        for free in v.equation.free_variables() {
            if free == v.name {
                continue;
            }
            if endo.contains(free.as_str()) || exo.contains(free.as_str()) {
                edges.push((free, v.name.clone()));
            }
        }
    }
    Ok(Dag::new(vertices, edges)?)
}
