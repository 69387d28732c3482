//! Causal-fairness learning and auditing toolkit.
//!
//! The pipeline has three stages:
//!
//! 1. **Model the domain** as a role-labeled causal DAG ([`graph`]): which
//!    variable is the sensitive attribute, which are base variables,
//!    resolving variables, covariates, the outcome.
//! 2. **Learn the mechanisms** with a latent-variable VAE over that graph
//!    ([`cevae`]): an inference network recovers the unobserved confounder,
//!    generative networks with per-attribute branch heads reconstruct each
//!    observed variable, and retained posteriors support factual and
//!    counterfactual decoding.
//! 3. **Intervene**: train auxiliary predictors on inputs that block unfair
//!    paths ([`fairpred`]), quantify fairness with oracle and model scores
//!    ([`metrics`]), and audit arbitrary black-box models by comparing their
//!    behavior on factual versus counterfactual reconstructions ([`audit`]).
//!
//! Ground truth for tests and oracle metrics comes from explicit structural
//! causal models ([`scm`]) with retained exogenous noise, which make exact
//! counterfactuals and path-specific effects computable.
//!
//! Everything numerical is `f64`; all randomness flows from a single seed
//! through named substreams ([`rng`]), so every result in the pipeline is
//! reproducible bit-for-bit from its config.

pub mod audit;
pub mod cevae;
pub mod data;
pub mod error;
pub mod fairpred;
pub mod graph;
pub mod metrics;
pub mod nnet;
pub mod rng;
pub mod scm;
pub mod stats;

pub use audit::{AuditConfig, AuditReport, BlackBoxAdapter, ForestConfig};
pub use cevae::{APolicy, CevaeCheckpoint, CevaeModel, ReconMode, TrainConfig};
pub use data::{ColumnSchema, Dataset, DistKind};
pub use error::{Error, Result};
pub use fairpred::{AuxCheckpoint, AuxConfig, AuxModel, InputSelection, InputSource};
pub use graph::{CausalGraph, Identifiability, Path, PathSet, Role};
pub use metrics::{CfMode, MetricReport, PredictionPair, RecordPredictor};
pub use scm::{Mechanism, PseEstimate, Scm};
