//! Additive-noise structural equation models over labeled DAGs.

mod dag;
mod sem;
mod spline;

pub use dag::{enumerate_dags, parse_candidates, DagModel, MAX_ENUMERATE_NODES};
pub use sem::{
    fit_additive_sem, rank_order, residual_bootstrap_test, select_dag, standardize_columns, RankedModel, SemFit,
    SemTestOptions,
};
pub use spline::{SplineBasis, SplineConfig};
