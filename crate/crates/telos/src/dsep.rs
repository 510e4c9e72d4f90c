//! d-separation queries and enumeration of graph-implied independencies.
//!
//! `d_separated` answers the classical criterion: x and y are separated
//! given Z iff every path between them is blocked (a chain or fork is
//! blocked when its middle vertex is in Z; a collider is blocked when
//! neither it nor any of its descendants is in Z). The implementation
//! uses the ancestral-subgraph/moralization reduction; the contract is
//! the path definition, and an independent path enumerator in the test
//! suite checks agreement.
//!
//! Vertices are whatever the caller's graph contains: queries over
//! graphs that include exogenous vertices work unchanged, which is how
//! shared-noise backdoor paths in twin graphs are handled.

use crate::scm::{Dag, GraphError};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A conditional independence statement x independent of y given Z.
///
/// Unordered in (x, y): construction puts the lexicographically smaller
/// name first, so statements compare and deduplicate canonically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndependenceStatement {
    pub x: String,
    pub y: String,
    pub given: BTreeSet<String>,
}

impl IndependenceStatement {
    /// Canonicalizes the pair order. Panics if x == y or either side is
    /// in the conditioning set; callers validate beforehand.
    pub fn new(x: impl Into<String>, y: impl Into<String>, given: BTreeSet<String>) -> Self {
        let (x, y) = (x.into(), y.into());
        assert_ne!(x, y, "independence statement needs two distinct variables");
        assert!(
            !given.contains(&x) && !given.contains(&y),
            "conditioning set overlaps the tested pair"
        );
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        IndependenceStatement { x, y, given }
    }
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} _||_ {}", self.x, self.y)?;
        if !self.given.is_empty() {
            let given: Vec<&str> = self.given.iter().map(String::as_str).collect();
            write!(f, " | {}", given.join(", "))?;
        }
        Ok(())
    }
}

/// Query failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DsepError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("query arguments overlap: {0}")]
    OverlappingArguments(String),
}

/// Tests whether `x` and `y` are d-separated given `given`.
pub fn d_separated(
    dag: &Dag,
    x: &str,
    y: &str,
    given: &BTreeSet<String>,
) -> Result<bool, DsepError> {
    if x == y {
        return Err(DsepError::OverlappingArguments(format!(
            "x and y are both `{x}`"
        )));
    }
    for z in given {
        if z == x || z == y {
            return Err(DsepError::OverlappingArguments(format!(
                "`{z}` appears both as a tested variable and in the conditioning set"
            )));
        }
    }
    let ix = dag.index_of(x)?;
    let iy = dag.index_of(y)?;
    let mut iz = BTreeSet::new();
    for z in given {
        iz.insert(dag.index_of(z)?);
    }

    // Moral graph of the ancestral closure of {x, y} ∪ Z: keep ancestors,
    // drop directions, marry co-parents. x and y are d-separated given Z
    // iff Z cuts every undirected path between them in that graph.
    let mut seeds: BTreeSet<usize> = iz.clone();
    seeds.insert(ix);
    seeds.insert(iy);
    let keep = dag.ancestral_indices(&seeds);

    let n = dag.vertices().len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let connect = |a: usize, b: usize, adj: &mut Vec<BTreeSet<usize>>| {
        adj[a].insert(b);
        adj[b].insert(a);
    };
    for &v in &keep {
        let parents: Vec<usize> = dag
            .parent_indices(v)
            .iter()
            .copied()
            .filter(|p| keep.contains(p))
            .collect();
        for &p in &parents {
            connect(p, v, &mut adj);
        }
        for (i, &p) in parents.iter().enumerate() {
            for &q in &parents[i + 1..] {
                connect(p, q, &mut adj);
            }
        }
    }

    // Reachability from x avoiding conditioned vertices.
    let mut visited = BTreeSet::new();
    let mut stack = vec![ix];
    while let Some(v) = stack.pop() {
        if v == iy {
            return Ok(false);
        }
        if iz.contains(&v) || !visited.insert(v) {
            continue;
        }
        stack.extend(adj[v].iter().copied());
    }
    Ok(true)
}

/// Enumerates every independence the graph implies among `observed`.
///
/// Returns canonical statements (x, y | Z) with x, y observed and
/// Z ranging over observed subsets of size at most `max_cond`, in a
/// deterministic order: pair lexicographic, then conditioning sets by
/// size and lexicographic content.
pub fn implied_independencies(
    dag: &Dag,
    observed: &BTreeSet<String>,
    max_cond: usize,
) -> Result<Vec<IndependenceStatement>, DsepError> {
    let names: Vec<&String> = observed.iter().collect();
    for name in &names {
        dag.index_of(name)?;
    }
    let mut out = Vec::new();
    for (i, x) in names.iter().enumerate() {
        for y in &names[i + 1..] {
            let rest: Vec<&String> = names
                .iter()
                .copied()
                .filter(|v| v != x && v != y)
                .collect();
            for given in subsets_up_to(&rest, max_cond) {
                if d_separated(dag, x, y, &given)? {
                    out.push(IndependenceStatement::new(
                        x.as_str(),
                        y.as_str(),
                        given,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Subsets of `items` of size 0..=k, ordered by size then lexicographic.
fn subsets_up_to(items: &[&String], k: usize) -> Vec<BTreeSet<String>> {
    let mut out = vec![BTreeSet::new()];
    let mut current: Vec<BTreeSet<String>> = out.clone();
    for _ in 0..k.min(items.len()) {
        let mut next = Vec::new();
        for set in &current {
            let last = set.iter().next_back();
            for item in items {
                if last.is_none_or(|l| *item > l) {
                    let mut grown = set.clone();
                    grown.insert((*item).clone());
                    next.push(grown);
                }
            }
        }
        out.extend(next.iter().cloned());
        current = next;
    }
    out
}
