use hullaudit_core::ingest::{parse_table, Value};
use hullaudit_core::{ColumnKind, ColumnSpec, RawTable, Schema};
use proptest::prelude::*;

fn cell(kind: ColumnKind) -> BoxedStrategy<Value> {
    match kind {
        ColumnKind::Numeric => prop_oneof![
            (-1e12f64..1e12).prop_map(Value::Number),
            any::<i32>().prop_map(|x| Value::Number(f64::from(x))),
            (-1e-3f64..1e-3).prop_map(Value::Number),
        ]
        .boxed(),
        _ => "[a-z][a-z0-9_-]{0,8}".prop_map(Value::Category).boxed(),
    }
}

fn table() -> impl Strategy<Value = (Schema, Vec<Vec<Value>>)> {
    (
        prop::collection::vec(prop_oneof![Just(ColumnKind::Numeric), Just(ColumnKind::Categorical)], 1..6),
        prop::sample::select(vec![',', '\t', ';']),
        any::<bool>(),
    )
        .prop_flat_map(|(kinds, delimiter, header)| {
            let row: Vec<BoxedStrategy<Value>> = kinds.iter().map(|&k| cell(k)).collect();
            let specs: Vec<ColumnSpec> = kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| ColumnSpec::new(format!("c{i}"), k))
                .collect();
            let mut schema = Schema::new(specs);
            schema.delimiter = delimiter;
            schema.header = header;
            (Just(schema), prop::collection::vec(row, 1..30))
        })
}

proptest! {
    #[test]
    fn write_then_parse_is_identity((schema, rows) in table()) {
        let original = RawTable::from_rows(schema.clone(), &rows).unwrap();
        let mut buf = Vec::new();
        original.write_delimited(&mut buf).unwrap();
        let parsed = parse_table(buf.as_slice(), &schema).unwrap();
        prop_assert_eq!(&parsed, &original);
        prop_assert_eq!(parsed.fingerprint(), original.fingerprint());
    }
}
