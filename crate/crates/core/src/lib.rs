//! Benchmark harness comparing distributed serverless training on low-latency
//! edge links against centralized training behind a slower cloud link.
//!
//! The training workload is real (TF-IDF features, a passive-aggressive
//! classifier and k-fold grid search) and runs inside in-process function
//! replicas. Network transfers are simulated from per-link delay, jitter,
//! loss and bandwidth figures.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod faas;
pub mod netlink;
pub mod runner;
pub mod seed;
pub mod stats;
pub mod textml;

pub use corpus::{Dataset, DocumentRecord, Label, SplitResult, SplitSpec, TrainingRequest};
pub use error::{Error, Result};
pub use faas::{ComputeNode, Deployment, DispatchPolicy, InvocationRecord};
pub use netlink::{LinkProfile, LinkSpec, TransferOutcome};
pub use runner::{ComparisonReport, RepetitionResult, ScenarioConfig, ScenarioResult};
pub use textml::{CvConfig, CvResult, PacHyperParams, PacModel, SparseVector, TfIdfModel};
