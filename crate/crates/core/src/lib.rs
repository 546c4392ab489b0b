//! Convex-hull extrapolation auditing for tabular data.
//!
//! A query is *interpolated* when it lies inside the convex hull of the
//! training points and *extrapolated* otherwise. This crate encodes tabular
//! records ([`ingest`], [`transform`]), decides hull membership with
//! certificates and computes projections ([`hull`]), and turns the
//! projection residual into per-feature extrapolation reports ([`report`]).
//! [`harness`] wires these into train/test and k-fold pipelines; [`oracle`]
//! is an exhaustive exact solver for small instances used in testing.

mod fingerprint;

pub mod harness;
pub mod hull;
pub mod ingest;
pub mod oracle;
pub mod report;
pub mod transform;

pub use harness::{
    make_synthetic, run_analysis, run_cv, Analysis, CrossValidation, SplitPlan, SyntheticDistribution,
};
pub use hull::{
    batch_classify, classify, project, MembershipVerdict, PointSet, Projection, SolverConfig,
    Status, Variant,
};
pub use ingest::{load_table, ColumnKind, ColumnSpec, RawTable, Schema};
pub use report::{build_report, summarize_cohort, CohortSummary, ExtrapolationReport};
pub use transform::{fit_transform, Dataset, FeatureTransform, ScalingMode, UnknownPolicy};
