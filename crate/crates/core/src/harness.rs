//! Splitting, cross-validation and batch evaluation pipelines.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hull::{batch_classify, HullError, PointSet, SolverConfig};
use crate::ingest::{ColumnKind, IngestError, RawTable};
use crate::report::{
    build_report, summarize_cohort, CohortSummary, ExtrapolationReport, ReportContext, ReportError,
};
use crate::transform::{Dataset, FeatureTransform, ScalingMode, TransformError, UnknownPolicy};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{rows} rows cannot be split into {k} folds")]
    TooFewRows { rows: usize, k: usize },
    #[error("invalid split plan: {0}")]
    InvalidPlan(String),
    #[error("invalid synthetic request: {0}")]
    InvalidSynthetic(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    GivenSplit,
    /// `fraction` of the rows become the test set.
    Holdout { fraction: f64 },
    Kfold { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitPlan {
    pub fn given_split() -> Self {
        Self {
            mode: SplitMode::GivenSplit,
            seed: 0,
        }
    }

    pub fn holdout(fraction: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::Holdout { fraction },
            seed,
        }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::Kfold { k },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match self.mode {
            SplitMode::GivenSplit => Ok(()),
            SplitMode::Holdout { fraction } if !(fraction > 0.0 && fraction < 1.0) => Err(
                HarnessError::InvalidPlan(format!("holdout fraction must lie in (0, 1), got {fraction}")),
            ),
            SplitMode::Kfold { k } if k < 2 => Err(HarnessError::InvalidPlan(format!(
                "k must be at least 2, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Reports for every test row, in test-table order, plus their summary.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub reports: Vec<ExtrapolationReport>,
    pub summary: CohortSummary,
    pub transform: FeatureTransform,
}

fn check_same_schema(train: &RawTable, test: &RawTable) -> Result<(), HarnessError> {
    let a = train.columns();
    let b = test.columns();
    if a.len() != b.len() {
        return Err(HarnessError::SchemaMismatch(format!(
            "train has {} columns, test has {}",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if x.name != y.name || x.kind != y.kind {
            return Err(HarnessError::SchemaMismatch(format!(
                "column '{}' ({:?}) does not match '{}' ({:?})",
                x.name, x.kind, y.name, y.kind
            )));
        }
    }
    Ok(())
}

/// Fits the transform on `train` alone, then classifies and reports every
/// row of `test` against the hull of the encoded training rows.
///
/// Test categories never seen in training are encoded as zero vectors and
/// listed in the report provenance.
pub fn run_analysis(
    train: &RawTable,
    test: &RawTable,
    config: &SolverConfig,
    scaling: ScalingMode,
    significance: f64,
) -> Result<Analysis, HarnessError> {
    check_same_schema(train, test)?;
    config.validate()?;
    if test.row_count() == 0 {
        return Err(ReportError::EmptyCohort.into());
    }
    let transform =
        FeatureTransform::fit(train, scaling)?.with_unknown_policy(UnknownPolicy::ZeroVector);
    let points = PointSet::new(transform.apply_table(train)?.matrix)?;
    let dataset = Dataset::new(points, transform.clone())?;
    let context = ReportContext::new(&dataset, config, significance)?;

    let encoded = transform.apply_table(test)?;
    let queries: Vec<&[f64]> = encoded
        .matrix
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let verdicts = batch_classify(dataset.points(), &queries, config);

    let reports = verdicts
        .into_iter()
        .enumerate()
        .map(|(i, verdict)| {
            let id = test.source_row(i).to_string();
            Ok(build_report(&verdict?, &transform, &id, &context, &encoded.unseen[i])?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let summary = summarize_cohort(&reports)?;
    Ok(Analysis {
        reports,
        summary,
        transform,
    })
}

/// Shuffles `0..n` under `seed` and deals it into `k` folds whose sizes
/// differ by at most one. Each fold is returned in ascending order.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, HarnessError> {
    if k < 2 {
        return Err(HarnessError::InvalidPlan(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(HarnessError::TooFewRows { rows: n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Splits off a seeded random test set of `round(fraction · n)` rows, kept
/// between 1 and `n − 1`. Both tables keep the original row order.
pub fn holdout_split(
    table: &RawTable,
    fraction: f64,
    seed: u64,
) -> Result<(RawTable, RawTable), HarnessError> {
    SplitPlan::holdout(fraction, seed).validate()?;
    let n = table.row_count();
    if n < 2 {
        return Err(HarnessError::TooFewRows { rows: n, k: 2 });
    }
    let size = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..size].to_vec();
    let mut train = order[size..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((table.subset(&train), table.subset(&test)))
}

#[derive(Clone, Debug)]
pub struct Fold {
    pub index: usize,
    /// Row positions in the input table.
    pub test_rows: Vec<usize>,
    pub analysis: Analysis,
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub folds: Vec<Fold>,
    /// Summary over the reports of every fold together.
    pub pooled: CohortSummary,
}

impl CrossValidation {
    pub fn summaries(&self) -> Vec<&CohortSummary> {
        self.folds
            .iter()
            .map(|f| &f.analysis.summary)
            .chain(std::iter::once(&self.pooled))
            .collect()
    }
}

/// k-fold cross-validation: each fold is classified against the hull of the
/// other folds, with the transform refitted on those rows only.
pub fn run_cv(
    table: &RawTable,
    plan: &SplitPlan,
    config: &SolverConfig,
    scaling: ScalingMode,
    significance: f64,
) -> Result<CrossValidation, HarnessError> {
    plan.validate()?;
    let SplitMode::Kfold { k } = plan.mode else {
        return Err(HarnessError::InvalidPlan(
            "cross-validation needs a kfold plan".into(),
        ));
    };
    config.validate()?;
    let n = table.row_count();
    let assignments = kfold_indices(n, k, plan.seed)?;
    let mut fold_of = vec![0usize; n];
    for (f, rows) in assignments.iter().enumerate() {
        for &r in rows {
            fold_of[r] = f;
        }
    }

    let mut folds = Vec::with_capacity(k);
    for (index, test_rows) in assignments.into_iter().enumerate() {
        let train_rows: Vec<usize> = (0..n).filter(|&r| fold_of[r] != index).collect();
        let analysis = run_analysis(
            &table.subset(&train_rows),
            &table.subset(&test_rows),
            config,
            scaling,
            significance,
        )?;
        folds.push(Fold {
            index,
            test_rows,
            analysis,
        });
    }
    let all: Vec<ExtrapolationReport> = folds
        .iter()
        .flat_map(|f| f.analysis.reports.iter().cloned())
        .collect();
    let pooled = summarize_cohort(&all)?;
    Ok(CrossValidation { folds, pooled })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticDistribution {
    /// Independent standard normal coordinates.
    Gaussian,
    /// Independent uniform coordinates on `[0, 1)`.
    UniformBox,
}

impl FromStr for SyntheticDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform_box" | "uniform" => Ok(Self::UniformBox),
            other => Err(format!(
                "unknown distribution '{other}' (expected gaussian or uniform_box)"
            )),
        }
    }
}

impl fmt::Display for SyntheticDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::UniformBox => "uniform_box",
        })
    }
}

fn column_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// A numeric table with columns `x0 … x{d-1}`, drawn row by row from a
/// ChaCha8 stream seeded with `seed`.
pub fn make_synthetic(
    n: usize,
    d: usize,
    distribution: SyntheticDistribution,
    seed: u64,
) -> Result<RawTable, HarnessError> {
    if n == 0 || d == 0 {
        return Err(HarnessError::InvalidSynthetic(format!(
            "need n >= 1 and d >= 1, got n={n}, d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); d];
    for _ in 0..n {
        for col in columns.iter_mut() {
            col.push(match distribution {
                SyntheticDistribution::Gaussian => StandardNormal.sample(&mut rng),
                SyntheticDistribution::UniformBox => rng.random::<f64>(),
            });
        }
    }
    Ok(RawTable::from_numeric_columns(column_names(d), columns)?)
}

/// `count` random convex combinations of `support` distinct rows of an
/// all-numeric table, with flat Dirichlet weights. Every result lies in the
/// hull of the table's rows.
pub fn convex_combinations(
    table: &RawTable,
    count: usize,
    support: usize,
    seed: u64,
) -> Result<RawTable, HarnessError> {
    let n = table.row_count();
    if count == 0 || support == 0 || support > n {
        return Err(HarnessError::InvalidSynthetic(format!(
            "need 1 <= support <= {n} and count >= 1, got support={support}, count={count}"
        )));
    }
    let columns: Vec<&[f64]> = table
        .columns()
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            table.numeric_column(j).ok_or_else(|| {
                HarnessError::InvalidSynthetic(format!(
                    "column '{}' is {:?}, not numeric",
                    spec.name, spec.kind
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::with_capacity(count); columns.len()];
    for _ in 0..count {
        let rows = index::sample(&mut rng, n, support).into_vec();
        let raw: Vec<f64> = (0..support).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        for (col, values) in out.iter_mut().zip(&columns) {
            col.push(rows.iter().zip(&raw).map(|(&r, w)| w / total * values[r]).sum());
        }
    }
    let names = table.columns().iter().map(|c| c.name.clone()).collect();
    Ok(RawTable::from_numeric_columns(names, out)?)
}

/// Whether every column of `table` is numeric (no categorical, target or
/// ignored columns).
pub fn is_all_numeric(table: &RawTable) -> bool {
    table.columns().iter().all(|c| c.kind == ColumnKind::Numeric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::Status;
    use crate::ingest::{ColumnSpec, Schema, Value};

    fn one_d(values: &[f64]) -> RawTable {
        RawTable::from_numeric_columns(vec!["x".into()], vec![values.to_vec()]).unwrap()
    }

    fn analyse(train: &RawTable, test: &RawTable) -> Analysis {
        run_analysis(train, test, &SolverConfig::default(), ScalingMode::MinMax, 0.05).unwrap()
    }

    #[test]
    fn interval_fraction_half() {
        let a = analyse(&one_d(&[3.0, 7.0]), &one_d(&[5.0, 9.0]));
        assert_eq!(a.summary.extrapolation_fraction, 0.5);
        assert_eq!(a.reports[0].status, Status::Inside);
        assert_eq!(a.reports[1].status, Status::Outside);
        assert_eq!(a.reports[1].query_id, "2");
        assert!((a.reports[1].attributions[0].component - 2.0).abs() < 1e-12);
    }

    #[test]
    fn training_rows_are_inside() {
        let train = make_synthetic(50, 3, SyntheticDistribution::Gaussian, 7).unwrap();
        let test = train.subset(&[0, 5, 17, 49]);
        let a = analyse(&train, &test);
        assert_eq!(a.summary.extrapolation_fraction, 0.0);
        assert_eq!(a.summary.inside, 4);
    }

    #[test]
    fn schema_mismatch_detected() {
        let other = RawTable::from_numeric_columns(vec!["y".into()], vec![vec![1.0]]).unwrap();
        let err = run_analysis(
            &one_d(&[1.0, 2.0]),
            &other,
            &SolverConfig::default(),
            ScalingMode::MinMax,
            0.05,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::SchemaMismatch(_)));
    }

    #[test]
    fn unseen_categories_are_flagged() {
        let schema = Schema::new(vec![
            ColumnSpec::new("c", ColumnKind::Categorical),
            ColumnSpec::new("x", ColumnKind::Numeric),
        ]);
        let row = |c: &str, x: f64| vec![Value::Category(c.into()), Value::Number(x)];
        let train = RawTable::from_rows(schema.clone(), &[row("a", 0.0), row("b", 1.0)]).unwrap();
        let test = RawTable::from_rows(schema, &[row("z", 0.5), row("a", 0.0)]).unwrap();
        let a = analyse(&train, &test);
        assert_eq!(a.reports[0].provenance.unseen_categories, vec!["c".to_string()]);
        assert_eq!(a.reports[0].status, Status::Outside);
        assert!(a.reports[1].provenance.unseen_categories.is_empty());
        assert_eq!(a.reports[1].status, Status::Inside);
    }

    #[test]
    fn folds_partition_rows() {
        let folds = kfold_indices(4, 2, 1).unwrap();
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2]);
        let folds = kfold_indices(23, 5, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, kfold_indices(23, 5, 9).unwrap());
        assert_ne!(folds, kfold_indices(23, 5, 10).unwrap());
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(
            kfold_indices(3, 5, 0),
            Err(HarnessError::TooFewRows { rows: 3, k: 5 })
        ));
        assert!(matches!(kfold_indices(3, 1, 0), Err(HarnessError::InvalidPlan(_))));
        assert!(SplitPlan::holdout(1.0, 0).validate().is_err());
        assert!(SplitPlan::holdout(0.0, 0).validate().is_err());
        assert!(SplitPlan::holdout(0.3, 0).validate().is_ok());
        let t = one_d(&[1.0, 2.0, 3.0]);
        let cfg = SolverConfig::default();
        let err = run_cv(&t, &SplitPlan::given_split(), &cfg, ScalingMode::MinMax, 0.05);
        assert!(matches!(err, Err(HarnessError::InvalidPlan(_))));
    }

    #[test]
    fn identical_rows_never_extrapolate() {
        let t = one_d(&[4.0; 10]);
        let cv = run_cv(
            &t,
            &SplitPlan::kfold(5, 3),
            &SolverConfig::default(),
            ScalingMode::MinMax,
            0.05,
        )
        .unwrap();
        assert_eq!(cv.folds.len(), 5);
        for f in &cv.folds {
            assert_eq!(f.analysis.summary.extrapolation_fraction, 0.0);
        }
        assert_eq!(cv.pooled.total, 10);
    }

    #[test]
    fn cv_is_deterministic_and_refits() {
        let t = make_synthetic(40, 2, SyntheticDistribution::UniformBox, 5).unwrap();
        let cfg = SolverConfig::default();
        let plan = SplitPlan::kfold(5, 11);
        let a = run_cv(&t, &plan, &cfg, ScalingMode::MinMax, 0.05).unwrap();
        let b = run_cv(&t, &plan, &cfg, ScalingMode::MinMax, 0.05).unwrap();
        assert_eq!(a.pooled, b.pooled);
        let outside: usize = a.folds.iter().map(|f| f.analysis.summary.outside).sum();
        assert_eq!(a.pooled.extrapolation_fraction, outside as f64 / 40.0);
        let fps: std::collections::BTreeSet<String> =
            a.folds.iter().map(|f| f.analysis.transform.fingerprint()).collect();
        assert_eq!(fps.len(), 5);
    }

    #[test]
    fn holdout_sizes() {
        let t = one_d(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (train, test) = holdout_split(&t, 0.3, 2).unwrap();
        assert_eq!((train.row_count(), test.row_count()), (7, 3));
    }

    #[test]
    fn synthetic_is_reproducible() {
        let a = make_synthetic(3, 1, SyntheticDistribution::Gaussian, 42).unwrap();
        let b = make_synthetic(3, 1, SyntheticDistribution::Gaussian, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_count(), 3);
        let c = make_synthetic(3, 1, SyntheticDistribution::Gaussian, 43).unwrap();
        assert_ne!(a, c);
        let u = make_synthetic(100, 2, SyntheticDistribution::UniformBox, 1).unwrap();
        assert!(u.numeric_column(1).unwrap().iter().all(|x| (0.0..1.0).contains(x)));
        assert!(make_synthetic(0, 2, SyntheticDistribution::Gaussian, 1).is_err());
    }

    #[test]
    fn convex_combinations_are_inside() {
        let train = make_synthetic(200, 2, SyntheticDistribution::UniformBox, 3).unwrap();
        let queries = convex_combinations(&train, 50, 5, 4).unwrap();
        assert!(is_all_numeric(&queries));
        let a = analyse(&train, &queries);
        assert_eq!(a.summary.inside, 50);
    }
}
