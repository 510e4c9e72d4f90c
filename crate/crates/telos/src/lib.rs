//! Structural causal models with intentional interventions.
//!
//! This crate implements a small engine for structural causal models
//! (SCMs): parsing and validating models, inducing their causal DAGs,
//! answering d-separation queries, drawing seeded samples, and applying
//! interventions. Beyond the classical perfect intervention and
//! mechanism change, it supports *intentional* interventions, where an
//! agent's policy for a variable is written as a function of the
//! counterfactual outcomes the agent cares about. Applying one yields a
//! structural final model (SFM): a twin network in which the starred
//! (intervened) world is observed and policy edges run from unstarred
//! goal variables into the starred decision variable.
//!
//! On top of the model machinery sit two inference procedures:
//!
//! * [`teleo::markov_check`] / [`teleo::detect_agent`]: test sampled
//!   data against the independencies implied by a hypothesized causal
//!   DAG. Systematic violations flag the footprint of an agent acting
//!   for reasons, and the violating statements point at the variables
//!   being read by its policy.
//! * [`teleo::discover_intention`]: probe a black-box agent system with
//!   interventions on candidate goal variables and report which ones
//!   the agent's decisions respond to.
//!
//! The [`repro`] module packages two end-to-end simulation studies (a
//! thermostat-style heating loop and a smoking addiction model) that
//! exercise the whole stack.

pub mod dsep;
pub mod expr;
pub mod io;
pub mod operators;
pub mod repro;
pub mod sampling;
pub mod scm;
pub mod stats;
pub mod teleo;
