//! Reversible numeric encoding of tabular records.
//!
//! Numeric columns are mapped affinely, `(x - shift) / scale`; categorical
//! columns are one-hot expanded in first-appearance order. The convex hull
//! lives in the encoded space, so out-of-range queries are never clipped.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::fingerprint::Fingerprinter;
use crate::hull::{HullError, PointSet};
use crate::ingest::{Cell, ColumnKind, RawTable};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("table has no data rows")]
    EmptyTable,
    #[error("schema has no numeric or categorical columns")]
    NoFeatures,
    #[error("categorical feature '{0}' has no observed category")]
    NoObservedCategory(String),
    #[error("feature '{feature}': unseen category '{label}'")]
    UnknownCategory { feature: String, label: String },
    #[error("feature '{feature}': missing value")]
    MissingValue { feature: String },
    #[error("feature '{feature}': {message}")]
    InvalidCell { feature: String, message: String },
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{0}' is not numeric")]
    NotNumeric(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid transform file: {0}")]
    Format(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Points(#[from] HullError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Map each numeric feature's training range onto [0, 1].
    #[default]
    MinMax,
    /// Centre on the training mean and divide by the population standard deviation.
    ZScore,
    None,
}

impl FromStr for ScalingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minmax" | "min-max" | "min_max" => Ok(Self::MinMax),
            "zscore" | "z-score" | "z_score" => Ok(Self::ZScore),
            "none" => Ok(Self::None),
            other => Err(format!(
                "unknown scaling mode '{other}' (expected minmax, zscore or none)"
            )),
        }
    }
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MinMax => "minmax",
            Self::ZScore => "zscore",
            Self::None => "none",
        })
    }
}

/// What to do with a categorical value absent from the training data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    Error,
    /// Encode as an all-zero block. Every training row has a one in each
    /// block, so the encoded query is strictly outside the hull.
    ZeroVector,
}

impl FromStr for UnknownPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "error" => Ok(Self::Error),
            "zero" | "zero_vector" | "zero-vector" => Ok(Self::ZeroVector),
            other => Err(format!(
                "unknown category policy '{other}' (expected error or zero_vector)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    Numeric {
        shift: f64,
        scale: f64,
        /// Set when the training values left no spread; `scale` is then 1.
        #[serde(default)]
        degenerate: bool,
    },
    Categorical {
        categories: Vec<String>,
        unknown_policy: UnknownPolicy,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Index of the source column in the fitted schema.
    pub column: usize,
    /// First output coordinate of this feature.
    pub offset: usize,
    #[serde(flatten)]
    pub encoding: Encoding,
}

impl Feature {
    pub fn width(&self) -> usize {
        match &self.encoding {
            Encoding::Numeric { .. } => 1,
            Encoding::Categorical { categories, .. } => categories.len(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.encoding, Encoding::Numeric { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// The contiguous output columns produced by one original feature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureBlock {
    pub name: String,
    pub kind: FeatureKind,
    pub range: Range<usize>,
}

/// A fitted encoding from raw records to hull-space vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    /// Column names of the schema the transform was fitted on.
    columns: Vec<String>,
    scaling: ScalingMode,
    output_dim: usize,
    fitted_on: String,
    features: Vec<Feature>,
}

/// An encoded record plus the names of features whose category was unseen.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub vector: Vec<f64>,
    pub unseen: Vec<String>,
}

/// An encoded table.
#[derive(Clone, Debug)]
pub struct EncodedTable {
    pub matrix: Array2<f64>,
    /// Per row, the features encoded under the zero-vector policy.
    pub unseen: Vec<Vec<String>>,
}

impl FeatureTransform {
    /// Fits on `train`. Categorical features get [`UnknownPolicy::Error`].
    pub fn fit(train: &RawTable, scaling: ScalingMode) -> Result<Self, TransformError> {
        if train.row_count() == 0 {
            return Err(TransformError::EmptyTable);
        }
        let mut features = Vec::new();
        let mut offset = 0;
        for (col, spec) in train.columns().iter().enumerate() {
            let encoding = match spec.kind {
                ColumnKind::Numeric => {
                    let values = train.numeric_column(col).expect("numeric storage");
                    fit_numeric(&spec.name, values, scaling)?
                }
                ColumnKind::Categorical => {
                    let categories: Vec<String> = train
                        .observed_labels(col)
                        .into_iter()
                        .map(str::to_owned)
                        .collect();
                    if categories.is_empty() {
                        return Err(TransformError::NoObservedCategory(spec.name.clone()));
                    }
                    Encoding::Categorical {
                        categories,
                        unknown_policy: UnknownPolicy::Error,
                    }
                }
                ColumnKind::Ignored | ColumnKind::Target => continue,
            };
            let feature = Feature {
                name: spec.name.clone(),
                column: col,
                offset,
                encoding,
            };
            offset += feature.width();
            features.push(feature);
        }
        if features.is_empty() {
            return Err(TransformError::NoFeatures);
        }
        Ok(Self {
            columns: train.columns().iter().map(|c| c.name.clone()).collect(),
            scaling,
            output_dim: offset,
            fitted_on: train.fingerprint(),
            features,
        })
    }

    pub fn with_unknown_policy(mut self, policy: UnknownPolicy) -> Self {
        for f in &mut self.features {
            if let Encoding::Categorical { unknown_policy, .. } = &mut f.encoding {
                *unknown_policy = policy;
            }
        }
        self
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn scaling(&self) -> ScalingMode {
        self.scaling
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Fingerprint of the training table this transform was fitted on.
    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    pub fn degenerate_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| matches!(f.encoding, Encoding::Numeric { degenerate: true, .. }))
            .map(|f| f.name.as_str())
            .collect()
    }

    pub fn feature_blocks(&self) -> Vec<FeatureBlock> {
        self.features
            .iter()
            .map(|f| FeatureBlock {
                name: f.name.clone(),
                kind: if f.is_numeric() {
                    FeatureKind::Numeric
                } else {
                    FeatureKind::Categorical
                },
                range: f.offset..f.offset + f.width(),
            })
            .collect()
    }

    /// Content hash of the serialized transform.
    pub fn fingerprint(&self) -> String {
        let mut h = Fingerprinter::new("feature-transform");
        h.bytes(
            serde_json::to_string(self)
                .expect("transform serializes")
                .as_bytes(),
        );
        h.finish()
    }

    /// Encodes one record laid out in the fitted schema's column order.
    pub fn apply(&self, row: &[Cell<'_>]) -> Result<Vec<f64>, TransformError> {
        Ok(self.apply_flagged(row)?.vector)
    }

    pub fn apply_flagged(&self, row: &[Cell<'_>]) -> Result<Encoded, TransformError> {
        if row.len() != self.columns.len() {
            return Err(TransformError::SchemaMismatch(format!(
                "record has {} fields, transform expects {}",
                row.len(),
                self.columns.len()
            )));
        }
        let mut vector = vec![0.0; self.output_dim];
        let mut unseen = Vec::new();
        for f in &self.features {
            let cell = row[f.column];
            match (&f.encoding, cell) {
                (_, Cell::Missing) => {
                    return Err(TransformError::MissingValue {
                        feature: f.name.clone(),
                    })
                }
                (Encoding::Numeric { shift, scale, .. }, Cell::Number(x)) => {
                    vector[f.offset] = (x - shift) / scale;
                }
                (
                    Encoding::Categorical {
                        categories,
                        unknown_policy,
                    },
                    Cell::Category(label),
                ) => match categories.iter().position(|c| c == label) {
                    Some(k) => vector[f.offset + k] = 1.0,
                    None => match unknown_policy {
                        UnknownPolicy::Error => {
                            return Err(TransformError::UnknownCategory {
                                feature: f.name.clone(),
                                label: label.to_owned(),
                            })
                        }
                        UnknownPolicy::ZeroVector => unseen.push(f.name.clone()),
                    },
                },
                (Encoding::Numeric { .. }, Cell::Category(s)) => {
                    return Err(TransformError::InvalidCell {
                        feature: f.name.clone(),
                        message: format!("label '{s}' in a numeric feature"),
                    })
                }
                (Encoding::Categorical { .. }, Cell::Number(x)) => {
                    return Err(TransformError::InvalidCell {
                        feature: f.name.clone(),
                        message: format!("number {x} in a categorical feature"),
                    })
                }
            }
        }
        Ok(Encoded { vector, unseen })
    }

    /// Encodes every row of a table whose columns match the fitted schema.
    pub fn apply_table(&self, table: &RawTable) -> Result<EncodedTable, TransformError> {
        let names: Vec<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
        if names != self.columns {
            return Err(TransformError::SchemaMismatch(format!(
                "table columns {names:?} differ from fitted columns {:?}",
                self.columns
            )));
        }
        let n = table.row_count();
        let mut matrix = Array2::zeros((n, self.output_dim));
        let mut unseen = Vec::with_capacity(n);
        for r in 0..n {
            let enc = self.apply_flagged(&table.row(r))?;
            matrix
                .row_mut(r)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&enc.vector);
            unseen.push(enc.unseen);
        }
        Ok(EncodedTable { matrix, unseen })
    }

    /// Maps an encoded numeric coordinate back to raw units.
    pub fn invert_numeric(&self, feature: &str, value: f64) -> Result<f64, TransformError> {
        let f = self
            .feature(feature)
            .ok_or_else(|| TransformError::UnknownFeature(feature.to_owned()))?;
        match f.encoding {
            Encoding::Numeric { shift, scale, .. } => Ok(value * scale + shift),
            Encoding::Categorical { .. } => Err(TransformError::NotNumeric(feature.to_owned())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transform serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TransformError> {
        let t: Self =
            serde_json::from_str(text).map_err(|e| TransformError::Format(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TransformError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| TransformError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransformError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TransformError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<(), TransformError> {
        let mut offset = 0;
        for f in &self.features {
            if f.offset != offset || f.column >= self.columns.len() {
                return Err(TransformError::Format(format!(
                    "feature '{}' has an inconsistent layout",
                    f.name
                )));
            }
            match &f.encoding {
                Encoding::Numeric { shift, scale, .. } => {
                    if !(scale.is_finite() && *scale > 0.0 && shift.is_finite()) {
                        return Err(TransformError::Format(format!(
                            "feature '{}' needs a finite shift and positive scale",
                            f.name
                        )));
                    }
                }
                Encoding::Categorical { categories, .. } if categories.is_empty() => {
                    return Err(TransformError::NoObservedCategory(f.name.clone()))
                }
                Encoding::Categorical { .. } => {}
            }
            offset += f.width();
        }
        if offset != self.output_dim || self.features.is_empty() {
            return Err(TransformError::Format("output_dim does not match features".into()));
        }
        Ok(())
    }
}

fn fit_numeric(name: &str, values: &[f64], scaling: ScalingMode) -> Result<Encoding, TransformError> {
    let present: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if present.is_empty() {
        return Err(TransformError::MissingValue {
            feature: name.to_owned(),
        });
    }
    let (shift, spread) = match scaling {
        ScalingMode::MinMax => {
            let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi - lo)
        }
        ScalingMode::ZScore => {
            let n = present.len() as f64;
            let mean = present.iter().sum::<f64>() / n;
            let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        ScalingMode::None => (0.0, 1.0),
    };
    let degenerate = !(spread.is_finite() && spread > 0.0);
    Ok(Encoding::Numeric {
        shift,
        scale: if degenerate { 1.0 } else { spread },
        degenerate,
    })
}

/// Training points in encoded space together with the transform that made them.
#[derive(Clone, Debug)]
pub struct Dataset {
    points: PointSet,
    transform: FeatureTransform,
    feature_blocks: Vec<FeatureBlock>,
}

impl Dataset {
    pub fn new(points: PointSet, transform: FeatureTransform) -> Result<Self, TransformError> {
        if points.dim() != transform.output_dim() {
            return Err(TransformError::SchemaMismatch(format!(
                "points have dimension {}, transform produces {}",
                points.dim(),
                transform.output_dim()
            )));
        }
        let feature_blocks = transform.feature_blocks();
        Ok(Self {
            points,
            transform,
            feature_blocks,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn transform(&self) -> &FeatureTransform {
        &self.transform
    }

    pub fn feature_blocks(&self) -> &[FeatureBlock] {
        &self.feature_blocks
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.points.dim()
    }
}

/// Fits a transform on `train` and encodes its rows as the hull's vertex set.
pub fn fit_transform(
    train: &RawTable,
    scaling: ScalingMode,
) -> Result<(FeatureTransform, Dataset), TransformError> {
    let transform = FeatureTransform::fit(train, scaling)?;
    let encoded = transform.apply_table(train)?;
    let points = PointSet::new(encoded.matrix)?;
    let dataset = Dataset::new(points, transform.clone())?;
    Ok((transform, dataset))
}
