//! Joint distance covariance and friends: centered distance matrices,
//! dependence metrics, bootstrap independence tests, additive-noise DAG
//! selection and simulation drivers.

pub mod causal;
pub mod centering;
pub mod data;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod simulate;

pub use causal::{DagModel, SemFit, SemTestOptions, SplineConfig};
pub use centering::{CenterKind, CenteredMatrix, DistanceMatrix};
pub use data::{Dataset, Estimator, Group, GroupSpec, MetricConfig, TestResult, Variant};
pub use error::{Error, Result};
pub use inference::{BootstrapConfig, NormalityTestConfig, PValueRule};
pub use metrics::{MetricKind, MetricValue, Statistic};
pub use simulate::{ExperimentConfig, ExperimentReport, GeneratorSpec, TestSpec};
