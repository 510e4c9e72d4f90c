//! File formats: model JSON, intervention JSON, dataset CSV, DOT graph
//! rendering, and JSON report serialization.
//!
//! Model files are strict: unknown keys are rejected and schema errors
//! carry a JSON pointer to the offending element. Equations are parsed
//! at load time, so a file that reads back is ready to sample.
//!
//! Twin models are carried by the same schema plus an optional `twin`
//! section recording the observed world, the intervened target, and any
//! evidence; a file without that section loads as a plain model.

use crate::expr::{parse_expression, ParseError};
use crate::operators::{InterventionSpec, TwinModel, World};
use crate::sampling::{Dataset, Provenance};
use crate::scm::{induce_full_dag, Dag, Distribution, EndogenousVar, ExogenousVar, ScmModel};
use crate::stats::TestResult;
use crate::dsep::IndependenceStatement;
use crate::teleo::{DetectionReport, DiscoveryReport, MarkovReport, StatementOutcome};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

/// IO failure.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read `{path}`: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("equation for `{variable}` does not parse: {source}")]
    Equation {
        variable: String,
        source: ParseError,
    },
    #[error("twin section is inconsistent: {0}")]
    Twin(String),
    #[error("csv has no header row")]
    EmptyCsv,
    #[error("csv header field {0} is empty")]
    EmptyHeader(usize),
    #[error("csv header repeats column `{0}`")]
    DuplicateHeader(String),
    #[error("csv line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv line {line}, column `{column}`: `{value}` is not a number")]
    BadNumber {
        line: usize,
        column: String,
        value: String,
    },
    #[error("column `{0}` is not declared by the model")]
    UnknownHeader(String),
}

/// A model file's content: plain, or a twin with its marker section.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedModel {
    Plain(ScmModel),
    Twin(TwinModel),
}

impl LoadedModel {
    pub fn model(&self) -> &ScmModel {
        match self {
            LoadedModel::Plain(m) => m,
            LoadedModel::Twin(t) => &t.model,
        }
    }

    pub fn name(&self) -> &str {
        &self.model().name
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    endogenous: Vec<EndoFile>,
    exogenous: Vec<ExoFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    twin: Option<TwinFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndoFile {
    name: String,
    exogenous: String,
    equation: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExoFile {
    name: String,
    distribution: DistFile,
}

// A plain struct rather than a tagged enum: serde cannot combine
// `deny_unknown_fields` with internal tagging, and the explicit check
// yields pointer-precise errors for missing parameters.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistFile {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwinFile {
    observed: String,
    target: String,
    #[serde(default)]
    evidence: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "op")]
enum OpFile {
    #[serde(rename = "do")]
    Do { target: String, value: f64 },
    #[serde(rename = "mechanism")]
    Mechanism { target: String, equation: String },
    #[serde(rename = "counterfactual")]
    Counterfactual {
        target: String,
        value: f64,
        #[serde(default)]
        evidence: BTreeMap<String, f64>,
    },
    #[serde(rename = "intentional")]
    Intentional { target: String, equation: String },
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            serde_path_to_error::Segment::Seq { index } => {
                let _ = write!(out, "/{index}");
            }
            serde_path_to_error::Segment::Map { key } => {
                let _ = write!(out, "/{key}");
            }
            serde_path_to_error::Segment::Enum { variant } => {
                let _ = write!(out, "/{variant}");
            }
            serde_path_to_error::Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn from_json_strict<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, IoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| IoError::Schema {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

fn dist_from_file(file: &DistFile, pointer: String) -> Result<Distribution, IoError> {
    let fail = |message: String| IoError::Schema {
        pointer: pointer.clone(),
        message,
    };
    match file.kind.as_str() {
        "bernoulli" => {
            if file.mean.is_some() || file.variance.is_some() {
                return Err(fail("bernoulli takes only `p`".to_string()));
            }
            let p = file.p.ok_or_else(|| fail("bernoulli requires `p`".to_string()))?;
            Ok(Distribution::Bernoulli { p })
        }
        "normal" => {
            if file.p.is_some() {
                return Err(fail("normal takes `mean` and `variance`, not `p`".to_string()));
            }
            let mean = file
                .mean
                .ok_or_else(|| fail("normal requires `mean`".to_string()))?;
            let variance = file
                .variance
                .ok_or_else(|| fail("normal requires `variance`".to_string()))?;
            Ok(Distribution::Normal { mean, variance })
        }
        other => Err(fail(format!(
            "unknown distribution type `{other}` (expected `bernoulli` or `normal`)"
        ))),
    }
}

fn dist_to_file(dist: &Distribution) -> DistFile {
    match dist {
        Distribution::Bernoulli { p } => DistFile {
            kind: "bernoulli".to_string(),
            p: Some(*p),
            mean: None,
            variance: None,
        },
        Distribution::Normal { mean, variance } => DistFile {
            kind: "normal".to_string(),
            p: None,
            mean: Some(*mean),
            variance: Some(*variance),
        },
    }
}

/// Parses model JSON. Schema violations carry a JSON pointer; equation
/// parse failures name the variable. A `twin` section must describe a
/// well-formed twin over the listed variables.
pub fn parse_model_json(text: &str) -> Result<LoadedModel, IoError> {
    let file: ModelFile = from_json_strict(text)?;
    let mut endogenous = Vec::with_capacity(file.endogenous.len());
    for e in &file.endogenous {
        let equation = parse_expression(&e.equation).map_err(|source| IoError::Equation {
            variable: e.name.clone(),
            source,
        })?;
        endogenous.push(EndogenousVar {
            name: e.name.clone(),
            exogenous: e.exogenous.clone(),
            equation,
        });
    }
    let mut exogenous = Vec::with_capacity(file.exogenous.len());
    for (i, x) in file.exogenous.iter().enumerate() {
        exogenous.push(ExogenousVar {
            name: x.name.clone(),
            distribution: dist_from_file(&x.distribution, format!("/exogenous/{i}/distribution"))?,
        });
    }
    let model = ScmModel {
        name: file.name,
        endogenous,
        exogenous,
    };
    match file.twin {
        None => Ok(LoadedModel::Plain(model)),
        Some(twin) => {
            let observed = match twin.observed.as_str() {
                "starred" => World::Starred,
                "unstarred" => World::Unstarred,
                other => {
                    return Err(IoError::Schema {
                        pointer: "/twin/observed".to_string(),
                        message: format!("expected `starred` or `unstarred`, found `{other}`"),
                    })
                }
            };
            let twin = TwinModel {
                model,
                observed,
                target: twin.target,
                evidence: twin.evidence,
            };
            let problems = twin.validate();
            if !problems.is_empty() {
                return Err(IoError::Twin(problems.join("; ")));
            }
            Ok(LoadedModel::Twin(twin))
        }
    }
}

/// Serializes a model to canonical JSON: pretty-printed, equations in
/// minimal-parenthesis form, trailing newline.
pub fn model_to_json(loaded: &LoadedModel) -> String {
    let model = loaded.model();
    let file = ModelFile {
        name: model.name.clone(),
        endogenous: model
            .endogenous
            .iter()
            .map(|v| EndoFile {
                name: v.name.clone(),
                exogenous: v.exogenous.clone(),
                equation: v.equation.to_string(),
            })
            .collect(),
        exogenous: model
            .exogenous
            .iter()
            .map(|x| ExoFile {
                name: x.name.clone(),
                distribution: dist_to_file(&x.distribution),
            })
            .collect(),
        twin: match loaded {
            LoadedModel::Plain(_) => None,
            LoadedModel::Twin(t) => Some(TwinFile {
                observed: match t.observed {
                    World::Starred => "starred".to_string(),
                    World::Unstarred => "unstarred".to_string(),
                },
                target: t.target.clone(),
                evidence: t.evidence.clone(),
            }),
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

/// Reads a model file from disk.
pub fn read_model(path: &Path) -> Result<LoadedModel, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_json(&text)
}

/// Writes a model file to disk in canonical form.
pub fn write_model(loaded: &LoadedModel, path: &Path) -> Result<(), IoError> {
    fs::write(path, model_to_json(loaded)).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Parses an intervention file.
pub fn parse_op_json(text: &str) -> Result<InterventionSpec, IoError> {
    let file: OpFile = from_json_strict(text)?;
    Ok(match file {
        OpFile::Do { target, value } => InterventionSpec::Do { target, value },
        OpFile::Mechanism { target, equation } => InterventionSpec::Mechanism {
            equation: parse_expression(&equation).map_err(|source| IoError::Equation {
                variable: target.clone(),
                source,
            })?,
            target,
        },
        OpFile::Counterfactual {
            target,
            value,
            evidence,
        } => InterventionSpec::Counterfactual {
            target,
            value,
            evidence,
        },
        OpFile::Intentional { target, equation } => InterventionSpec::Intentional {
            policy: parse_expression(&equation).map_err(|source| IoError::Equation {
                variable: target.clone(),
                source,
            })?,
            target,
        },
    })
}

/// Reads an intervention file from disk.
pub fn read_op(path: &Path) -> Result<InterventionSpec, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_op_json(&text)
}

/// Serializes an intervention to JSON.
pub fn op_to_json(spec: &InterventionSpec) -> String {
    let file = match spec {
        InterventionSpec::Do { target, value } => OpFile::Do {
            target: target.clone(),
            value: *value,
        },
        InterventionSpec::Mechanism { target, equation } => OpFile::Mechanism {
            target: target.clone(),
            equation: equation.to_string(),
        },
        InterventionSpec::Counterfactual {
            target,
            value,
            evidence,
        } => OpFile::Counterfactual {
            target: target.clone(),
            value: *value,
            evidence: evidence.clone(),
        },
        InterventionSpec::Intentional { target, policy } => OpFile::Intentional {
            target: target.clone(),
            equation: policy.to_string(),
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("op serializes");
    text.push('\n');
    text
}

/// Renders a dataset as CSV: header row of column names, one row per
/// sample, shortest round-trip decimals, LF line endings.
pub fn csv_to_string(data: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&data.columns.join(","));
    out.push('\n');
    for row in &data.rows {
        let mut first = true;
        for value in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{value}");
        }
        out.push('\n');
    }
    out
}

/// Writes a dataset as CSV.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), IoError> {
    fs::write(path, csv_to_string(data)).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Parses CSV text into a dataset. The header row names the columns;
/// every data row must have the same arity and numeric fields.
pub fn parse_csv(text: &str) -> Result<Dataset, IoError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(IoError::EmptyCsv)?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    for (i, c) in columns.iter().enumerate() {
        if c.is_empty() {
            return Err(IoError::EmptyHeader(i + 1));
        }
        if columns[..i].contains(c) {
            return Err(IoError::DuplicateHeader(c.clone()));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(IoError::RaggedRow {
                line: i + 2,
                expected: columns.len(),
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (field, column) in fields.iter().zip(&columns) {
            let value: f64 = field.trim().parse().map_err(|_| IoError::BadNumber {
                line: i + 2,
                column: column.clone(),
                value: field.trim().to_string(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    let n = rows.len();
    Ok(Dataset {
        columns,
        rows,
        provenance: Provenance {
            model: String::new(),
            seed: 0,
            n,
            op: "read_csv".to_string(),
        },
    })
}

/// Reads a dataset from a CSV file.
pub fn read_csv(path: &Path) -> Result<Dataset, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

/// Errors unless every dataset column is one of the allowed names.
pub fn check_columns<'a, I>(data: &Dataset, allowed: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = &'a str>,
{
    let allowed: Vec<&str> = allowed.into_iter().collect();
    for c in &data.columns {
        if !allowed.contains(&c.as_str()) {
            return Err(IoError::UnknownHeader(c.clone()));
        }
    }
    Ok(())
}

fn dot_graph(name: &str, dag: &Dag, model: &ScmModel, gray: &[&str]) -> String {
    let exo: Vec<&str> = model.exogenous.iter().map(|x| x.name.as_str()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{name}\" {{");
    for v in dag.vertices() {
        let style = if exo.contains(&v.as_str()) {
            "style=dashed"
        } else {
            "style=solid"
        };
        let color = if gray.contains(&v.as_str()) {
            ", color=gray50, fontcolor=gray50"
        } else {
            ""
        };
        let _ = writeln!(out, "  \"{v}\" [shape=ellipse, {style}{color}];");
    }
    for (from, to) in dag.edges() {
        let style = if exo.contains(&from) {
            "style=dashed"
        } else {
            "style=solid"
        };
        let color = if gray.contains(&to) {
            ", color=gray50"
        } else {
            ""
        };
        let _ = writeln!(out, "  \"{from}\" -> \"{to}\" [{style}{color}];");
    }
    out.push_str("}\n");
    out
}

/// Renders the model's full graph (exogenous vertices included) as DOT.
/// Endogenous variables are solid ellipses, exogenous dashed; in a twin
/// the counterfactual (unstarred) world is gray, matching the reading
/// that the starred world is the observed one.
pub fn emit_dot(loaded: &LoadedModel) -> Result<String, IoError> {
    match loaded {
        LoadedModel::Plain(model) => {
            let dag = induce_full_dag(model).map_err(|e| IoError::Twin(e.to_string()))?;
            Ok(dot_graph(&model.name, &dag, model, &[]))
        }
        LoadedModel::Twin(twin) => {
            let dag = induce_full_dag(&twin.model).map_err(|e| IoError::Twin(e.to_string()))?;
            let gray: Vec<&str> = match twin.observed {
                World::Starred => twin.base_names(),
                World::Unstarred => twin.starred_names(),
            };
            Ok(dot_graph(&twin.model.name, &dag, &twin.model, &gray))
        }
    }
}

fn test_result_json(t: &TestResult) -> serde_json::Value {
    json!({
        "statistic": t.statistic,
        "p_value": t.p_value,
        "n": t.n,
        "decision_alpha": t.decision_alpha,
        "dependent": t.dependent,
    })
}

fn statement_json(s: &IndependenceStatement) -> serde_json::Value {
    json!({
        "x": s.x,
        "y": s.y,
        "given": s.given.iter().collect::<Vec<_>>(),
        "display": s.to_string(),
    })
}

/// JSON form of a Markov check report.
pub fn markov_report_json(report: &MarkovReport) -> serde_json::Value {
    let tested: Vec<serde_json::Value> = report
        .tested
        .iter()
        .map(|(stmt, outcome)| match outcome {
            StatementOutcome::Tested(result) => json!({
                "statement": statement_json(stmt),
                "status": "tested",
                "result": test_result_json(result),
            }),
            StatementOutcome::Skipped(reason) => json!({
                "statement": statement_json(stmt),
                "status": "skipped",
                "reason": reason,
            }),
        })
        .collect();
    let violations: Vec<serde_json::Value> = report
        .violations
        .iter()
        .map(|(stmt, result)| {
            json!({
                "statement": statement_json(stmt),
                "result": test_result_json(result),
            })
        })
        .collect();
    json!({
        "tested": tested,
        "violations": violations,
        "verdict": report.verdict.to_string(),
        "vacuous": report.vacuous,
    })
}

/// JSON form of an agent-detection report.
pub fn detection_report_json(report: &DetectionReport) -> serde_json::Value {
    json!({
        "markov": markov_report_json(&report.markov),
        "detected": report.detected,
        "candidates": report.candidates.iter().collect::<Vec<_>>(),
        "loci": report
            .loci
            .iter()
            .map(|l| json!({
                "x": l.x,
                "y": l.y,
                "common_children": l.common_children.iter().collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>(),
    })
}

/// JSON form of an intention-discovery report.
pub fn discovery_report_json(report: &DiscoveryReport) -> serde_json::Value {
    json!({
        "target": report.target,
        "corrected_alpha": report.corrected_alpha,
        "candidates": report
            .candidates
            .iter()
            .map(|c| json!({
                "name": c.name,
                "values": [c.values.0, c.values.1],
                "result": test_result_json(&c.result),
            }))
            .collect::<Vec<_>>(),
        "listened": report.listened.iter().collect::<Vec<_>>(),
    })
}
