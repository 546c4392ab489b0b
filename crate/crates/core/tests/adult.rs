//! Checks against the UCI Adult files shipped under `data/adult`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use hullaudit_core::{load_table, ColumnKind, FeatureTransform, ScalingMode, Schema};

fn data(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult").join(file)
}

/// Complete records of a raw Adult file, split by hand.
fn complete_records(file: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(data(file))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('|'))
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect::<Vec<_>>())
        .filter(|r| r.iter().all(|f| f != "?"))
        .collect()
}

#[test]
fn schema_has_fourteen_attributes_and_a_label() {
    let schema = Schema::from_path(data("adult.toml")).unwrap();
    assert_eq!(schema.columns.len(), 15);
    let features = schema.columns.iter().filter(|c| c.kind != ColumnKind::Target).count();
    assert_eq!(features, 14);
    let numeric = schema.columns.iter().filter(|c| c.kind == ColumnKind::Numeric).count();
    assert_eq!(numeric, 6);
}

#[test]
fn row_counts_match_raw_files() {
    let schema = Schema::from_path(data("adult.toml")).unwrap();
    let train = load_table(data("adult.data"), &schema).unwrap();
    let test = load_table(data("adult.test"), &schema).unwrap();
    assert_eq!(train.row_count(), complete_records("adult.data").len());
    assert_eq!(test.row_count(), complete_records("adult.test").len());
    assert_eq!(train.row_count(), 30162);
    assert_eq!(test.row_count(), 15060);
    assert_eq!(train.dropped_incomplete(), 32561 - 30162);
    assert_eq!(test.dropped_incomplete(), 16281 - 15060);
}

#[test]
fn encoded_width_matches_category_count() {
    let schema = Schema::from_path(data("adult.toml")).unwrap();
    let train = load_table(data("adult.data"), &schema).unwrap();
    let transform = FeatureTransform::fit(&train, ScalingMode::MinMax).unwrap();

    let records = complete_records("adult.data");
    let mut expected = 0;
    for (j, spec) in schema.columns.iter().enumerate() {
        expected += match spec.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => records.iter().map(|r| r[j].as_str()).collect::<BTreeSet<_>>().len(),
            _ => 0,
        };
    }
    assert_eq!(transform.output_dim(), expected);
    assert_eq!(transform.features().len(), 14);

    let encoded = transform.apply_table(&train).unwrap();
    for row in encoded.matrix.rows() {
        assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(row.iter().filter(|&&x| x == 1.0).count() >= 8);
    }
}
