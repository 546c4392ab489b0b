//! Per-query extrapolation reports and cohort summaries.
//!
//! The residual `q − p*` of a projection is split over the output columns of
//! each original feature. Numeric features report the signed residual in raw
//! units; categorical features report the Euclidean norm of their one-hot
//! block. A feature's share is its squared block norm over the squared
//! distance, so shares sum to one for any query outside the hull.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::hull::{MembershipVerdict, SolverConfig, Status};
use crate::transform::{Dataset, Encoding, FeatureKind, FeatureTransform};

/// Shares below this are reported without a direction.
const NEGLIGIBLE_SHARE: f64 = 1e-12;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("dimension mismatch: verdict has {found} coordinates, transform produces {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot summarize an empty cohort")]
    EmptyCohort,
    #[error("significance threshold must lie in [0, 1], got {0}")]
    InvalidSignificance(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AboveRange,
    BelowRange,
    WithinRange,
    CategoryMismatch,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub feature: String,
    pub kind: FeatureKind,
    /// Signed residual in raw units (numeric) or one-hot block norm (categorical).
    pub component: f64,
    pub share: f64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub margin: f64,
    pub normal_norm: f64,
    pub support_row: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub final_gap: f64,
    pub converged: bool,
    pub active_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_fingerprint: String,
    pub transform_fingerprint: String,
    pub training_table_fingerprint: String,
    pub solver: SolverConfig,
    pub significance: f64,
    pub diagnostics: SolverDiagnostics,
    /// Features whose query category was unseen in training and encoded as zeros.
    pub unseen_categories: Vec<String>,
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub query_id: String,
    pub status: Status,
    pub distance: f64,
    pub certificate: Option<CertificateSummary>,
    /// Every original feature once, by descending share then name.
    pub attributions: Vec<FeatureAttribution>,
    pub significant_features: Vec<String>,
    pub provenance: Provenance,
}

/// Run-level inputs shared by every report of an analysis.
#[derive(Clone, Debug)]
pub struct ReportContext {
    pub dataset_fingerprint: String,
    pub transform_fingerprint: String,
    pub training_table_fingerprint: String,
    pub solver: SolverConfig,
    pub significance: f64,
    pub timestamp: String,
}

impl ReportContext {
    pub fn new(
        dataset: &Dataset,
        solver: &SolverConfig,
        significance: f64,
    ) -> Result<Self, ReportError> {
        if !(0.0..=1.0).contains(&significance) {
            return Err(ReportError::InvalidSignificance(significance));
        }
        Ok(Self {
            dataset_fingerprint: dataset.points().fingerprint(),
            transform_fingerprint: dataset.transform().fingerprint(),
            training_table_fingerprint: dataset.transform().fitted_on().to_owned(),
            solver: solver.clone(),
            significance,
            timestamp: now_rfc3339(),
        })
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Builds the disclosure report for one classified query.
pub fn build_report(
    verdict: &MembershipVerdict,
    transform: &FeatureTransform,
    query_id: &str,
    context: &ReportContext,
    unseen_categories: &[String],
) -> Result<ExtrapolationReport, ReportError> {
    let residual = &verdict.projection.residual;
    if residual.len() != transform.output_dim() {
        return Err(ReportError::DimensionMismatch {
            expected: transform.output_dim(),
            found: residual.len(),
        });
    }
    let inside = verdict.status == Status::Inside;
    let total: f64 = residual.iter().map(|r| r * r).sum();

    let mut attributions: Vec<FeatureAttribution> = transform
        .features()
        .iter()
        .map(|f| {
            let block = &residual[f.offset..f.offset + f.width()];
            let sq: f64 = block.iter().map(|r| r * r).sum();
            let share = if inside || total <= 0.0 { 0.0 } else { sq / total };
            let negligible = share < NEGLIGIBLE_SHARE;
            match &f.encoding {
                Encoding::Numeric { scale, .. } => {
                    let r = block[0];
                    let direction = if negligible {
                        Direction::WithinRange
                    } else if r > 0.0 {
                        Direction::AboveRange
                    } else {
                        Direction::BelowRange
                    };
                    FeatureAttribution {
                        feature: f.name.clone(),
                        kind: FeatureKind::Numeric,
                        component: if inside { 0.0 } else { r * scale },
                        share,
                        direction,
                    }
                }
                Encoding::Categorical { .. } => FeatureAttribution {
                    feature: f.name.clone(),
                    kind: FeatureKind::Categorical,
                    component: if inside { 0.0 } else { sq.sqrt() },
                    share,
                    direction: if negligible {
                        Direction::None
                    } else {
                        Direction::CategoryMismatch
                    },
                },
            }
        })
        .collect();
    attributions.sort_by(|a, b| {
        b.share
            .total_cmp(&a.share)
            .then_with(|| a.feature.cmp(&b.feature))
    });

    let significant_features = if inside {
        Vec::new()
    } else {
        attributions
            .iter()
            .filter(|a| a.share > context.significance)
            .map(|a| a.feature.clone())
            .collect()
    };

    let certificate = verdict.certificate.as_ref().map(|c| CertificateSummary {
        margin: c.margin,
        normal_norm: c.normal.iter().map(|x| x * x).sum::<f64>().sqrt(),
        support_row: c.support_row,
    });

    let p = &verdict.projection;
    Ok(ExtrapolationReport {
        query_id: query_id.to_owned(),
        status: verdict.status,
        distance: p.distance,
        certificate,
        attributions,
        significant_features,
        provenance: Provenance {
            dataset_fingerprint: context.dataset_fingerprint.clone(),
            transform_fingerprint: context.transform_fingerprint.clone(),
            training_table_fingerprint: context.training_table_fingerprint.clone(),
            solver: context.solver.clone(),
            significance: context.significance,
            diagnostics: SolverDiagnostics {
                iterations: p.iterations,
                final_gap: p.final_gap,
                converged: p.converged,
                active_rows: p.weights.len(),
            },
            unseen_categories: unseen_categories.to_vec(),
            timestamp: context.timestamp.clone(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceQuantiles {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrequency {
    pub feature: String,
    /// Reports in which the feature is significant.
    pub count: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub total: usize,
    pub inside: usize,
    pub outside: usize,
    pub indeterminate: usize,
    pub extrapolation_fraction: f64,
    pub indeterminate_fraction: f64,
    pub distance_quantiles: DistanceQuantiles,
    pub feature_significance: Vec<FeatureFrequency>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_cohort(reports: &[ExtrapolationReport]) -> Result<CohortSummary, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyCohort);
    }
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    let total = reports.len();
    let (inside, outside, indeterminate) = (
        count(Status::Inside),
        count(Status::Outside),
        count(Status::Indeterminate),
    );
    let mut distances: Vec<f64> = reports.iter().map(|r| r.distance).collect();
    distances.sort_by(f64::total_cmp);

    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for r in reports {
        for a in &r.attributions {
            freq.entry(a.feature.as_str()).or_default();
        }
        for f in &r.significant_features {
            *freq.entry(f.as_str()).or_default() += 1;
        }
    }
    let mut feature_significance: Vec<FeatureFrequency> = freq
        .into_iter()
        .map(|(feature, count)| FeatureFrequency {
            feature: feature.to_owned(),
            count,
            fraction: count as f64 / total as f64,
        })
        .collect();
    feature_significance.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.feature.cmp(&b.feature)));

    Ok(CohortSummary {
        total,
        inside,
        outside,
        indeterminate,
        extrapolation_fraction: outside as f64 / total as f64,
        indeterminate_fraction: indeterminate as f64 / total as f64,
        distance_quantiles: DistanceQuantiles {
            min: distances[0],
            p25: quantile(&distances, 0.25),
            median: quantile(&distances, 0.5),
            p75: quantile(&distances, 0.75),
            p95: quantile(&distances, 0.95),
            max: distances[total - 1],
        },
        feature_significance,
    })
}

impl CohortSummary {
    /// Aligned plain-text rendering for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut line = |label: &str, value: String| {
            out.push_str(&format!("{label:<24}{value:>14}\n"));
        };
        line("queries", self.total.to_string());
        line("inside", self.inside.to_string());
        line("outside", self.outside.to_string());
        line("indeterminate", self.indeterminate.to_string());
        line("extrapolation fraction", format!("{:.4}", self.extrapolation_fraction));
        line("indeterminate fraction", format!("{:.4}", self.indeterminate_fraction));
        let q = &self.distance_quantiles;
        out.push('\n');
        out.push_str(&format!(
            "{:<10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}\n",
            "distance", "min", "p25", "median", "p75", "p95", "max"
        ));
        out.push_str(&format!(
            "{:<10}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}\n",
            "", q.min, q.p25, q.median, q.p75, q.p95, q.max
        ));
        if !self.feature_significance.is_empty() {
            let width = self
                .feature_significance
                .iter()
                .map(|f| f.feature.len())
                .max()
                .unwrap_or(0)
                .max(7);
            out.push('\n');
            out.push_str(&format!(
                "{:<width$}  {:>11}  {:>8}\n",
                "feature", "significant", "fraction"
            ));
            for f in &self.feature_significance {
                out.push_str(&format!(
                    "{:<width$}  {:>11}  {:>8.4}\n",
                    f.feature, f.count, f.fraction
                ));
            }
        }
        out
    }
}

/// Writes floats with 17 significant digits.
struct SignificantDigits<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            #[inline]
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for SignificantDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn write_json<T: Serialize, F: Formatter>(value: &T, formatter: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits(formatter));
    value.serialize(&mut ser).expect("report types serialize");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Single-line JSON with fixed field order and 17 significant digits.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    write_json(value, serde_json::ser::CompactFormatter)
}

/// Indented JSON with fixed field order and 17 significant digits.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    write_json(value, PrettyFormatter::with_indent(b"  "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{classify, SolverConfig};
    use crate::ingest::{parse_table, ColumnKind, ColumnSpec, RawTable, Schema};
    use crate::transform::{fit_transform, ScalingMode};

    fn interval() -> (FeatureTransform, Dataset) {
        let t = RawTable::from_numeric_columns(vec!["x".into()], vec![vec![3.0, 7.0]]).unwrap();
        fit_transform(&t, ScalingMode::MinMax).unwrap()
    }

    fn report_for(q_raw: f64) -> ExtrapolationReport {
        let (t, data) = interval();
        let cfg = SolverConfig::default();
        let q = t.apply(&[crate::ingest::Cell::Number(q_raw)]).unwrap();
        let verdict = classify(data.points(), &q, &cfg).unwrap();
        let ctx = ReportContext::new(&data, &cfg, DEFAULT_SIGNIFICANCE).unwrap();
        build_report(&verdict, &t, "q", &ctx, &[]).unwrap()
    }

    #[test]
    fn single_numeric_feature_above_range() {
        let r = report_for(9.0);
        assert_eq!(r.status, Status::Outside);
        assert_eq!(r.attributions.len(), 1);
        let a = &r.attributions[0];
        assert_eq!(a.component, 2.0);
        assert_eq!(a.direction, Direction::AboveRange);
        assert_eq!(a.share, 1.0);
        assert_eq!(r.significant_features, vec!["x"]);
        assert_eq!(r.certificate.as_ref().unwrap().margin, 0.25);
    }

    #[test]
    fn below_range() {
        let r = report_for(1.0);
        assert_eq!(r.attributions[0].component, -2.0);
        assert_eq!(r.attributions[0].direction, Direction::BelowRange);
    }

    #[test]
    fn inside_report_is_empty() {
        let r = report_for(5.0);
        assert_eq!(r.status, Status::Inside);
        assert!(r.significant_features.is_empty());
        assert!(r.attributions.iter().all(|a| a.share == 0.0));
        assert!(r.certificate.is_none());
    }

    #[test]
    fn categorical_block_norm_and_sorting() {
        let schema = Schema::new(vec![
            ColumnSpec::new("b_num", ColumnKind::Numeric),
            ColumnSpec::new("a_cat", ColumnKind::Categorical),
        ]);
        let table = parse_table("b_num,a_cat\n0,X\n1,Y\n".as_bytes(), &schema).unwrap();
        let (t, data) = fit_transform(&table, ScalingMode::MinMax).unwrap();
        let cfg = SolverConfig::default();
        // Raw (1, X) lies outside the segment joining (0, X) and (1, Y).
        let q = t
            .apply(&[crate::ingest::Cell::Number(1.0), crate::ingest::Cell::Category("X")])
            .unwrap();
        let verdict = classify(data.points(), &q, &cfg).unwrap();
        let ctx = ReportContext::new(&data, &cfg, 0.05).unwrap();
        let r = build_report(&verdict, &t, "q", &ctx, &[]).unwrap();
        assert_eq!(r.status, Status::Outside);
        let total: f64 = r.attributions.iter().map(|a| a.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let cat = r.attributions.iter().find(|a| a.feature == "a_cat").unwrap();
        assert_eq!(cat.direction, Direction::CategoryMismatch);
        assert!(cat.component > 0.0);
        // Nearest point is (1/3, 2/3, 1/3); residual (2/3, 1/3, -1/3).
        assert!((cat.share - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.attributions[0].feature, "b_num");
        assert!((r.attributions[0].component - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let (t, data) = interval();
        let cfg = SolverConfig::default();
        let points = crate::hull::PointSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let verdict = classify(&points, &[1.0, 1.0], &cfg).unwrap();
        let ctx = ReportContext::new(&data, &cfg, 0.05).unwrap();
        assert!(matches!(
            build_report(&verdict, &t, "q", &ctx, &[]),
            Err(ReportError::DimensionMismatch { .. })
        ));
        assert!(ReportContext::new(&data, &cfg, 1.5).is_err());
    }

    #[test]
    fn cohort_fraction_and_quantiles() {
        let mut reports = Vec::new();
        for i in 0..10 {
            let mut r = report_for(if i % 2 == 0 { 9.0 } else { 5.0 });
            r.query_id = i.to_string();
            reports.push(r);
        }
        let s = summarize_cohort(&reports).unwrap();
        assert_eq!(s.total, 10);
        assert_eq!(s.outside, 5);
        assert_eq!(s.extrapolation_fraction, 0.5);
        assert_eq!(s.distance_quantiles.max, 0.5);
        assert_eq!(s.distance_quantiles.min, 0.0);
        assert_eq!(s.feature_significance[0].count, 5);
        assert!(s.to_table().contains("extrapolation fraction"));
        assert!(matches!(summarize_cohort(&[]), Err(ReportError::EmptyCohort)));
    }

    #[test]
    fn all_inside_cohort() {
        let reports: Vec<_> = (0..4).map(|_| report_for(4.0)).collect();
        let s = summarize_cohort(&reports).unwrap();
        assert_eq!(s.extrapolation_fraction, 0.0);
        assert!(s.distance_quantiles.max <= 1e-6);
    }

    #[test]
    fn quantile_interpolation() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.25), 2.0);
        assert_eq!(quantile(&xs, 0.95), 4.8);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn json_field_order_and_precision() {
        let r = report_for(9.0);
        let line = to_json_line(&r);
        let keys = [
            "\"query_id\"",
            "\"status\"",
            "\"distance\"",
            "\"certificate\"",
            "\"attributions\"",
            "\"significant_features\"",
            "\"provenance\"",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(line.contains("\"distance\":5.0000000000000000e-1"));
        let back: ExtrapolationReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
        let pretty = to_json_pretty(&r);
        assert!(pretty.contains("\n  \"status\": \"Outside\""));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = to_json_line(&x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
