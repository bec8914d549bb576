mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use tabinstruct::fidelity::{ks_statistic, shape_score, trend_score, tv_distance};
use tabinstruct::instruct::shuffle_records;
use tabinstruct::llm::Backoff;
use tabinstruct::metadata::{parse_metadata_response, render_metadata_response, ColumnMetadata, TableMetadata};
use tabinstruct::parse::{parse_llm_output, ParseStatus};
use tabinstruct::registry::Task;
use tabinstruct::seed;
use tabinstruct::table::{load_csv_str, serialize_rows, to_csv_string, Cell, ColumnSchema, DataType, RowFormat, Table};
use tabinstruct::utility::{auc, Encoder};

fn dtype() -> impl Strategy<Value = DataType> {
    prop_oneof![Just(DataType::Numerical), Just(DataType::Categorical), Just(DataType::Textual)]
}

fn cell(dtype: DataType) -> BoxedStrategy<Cell> {
    match dtype {
        DataType::Numerical => prop_oneof![
            8 => (-1e6f64..1e6).prop_map(Cell::Num),
            2 => (-50i32..50).prop_map(|v| Cell::Num(v as f64)),
            1 => Just(Cell::Missing),
        ]
        .boxed(),
        _ => prop_oneof![
            8 => "[a-zA-Z][a-zA-Z0-9 ,;.'\"|-]{0,12}[a-zA-Z0-9]".prop_map(Cell::Str),
            2 => "[a-z]{1,3}".prop_map(Cell::Str),
            1 => Just(Cell::Missing),
        ]
        .boxed(),
    }
}

/// Random valid tables; every row keeps at least one present cell.
fn table() -> impl Strategy<Value = Table> {
    prop::collection::vec(dtype(), 1..6)
        .prop_flat_map(|dtypes| {
            let row = dtypes.iter().map(|&d| cell(d)).collect::<Vec<_>>();
            (Just(dtypes), prop::collection::vec(row, 1..25))
        })
        .prop_map(|(dtypes, mut rows)| {
            for row in &mut rows {
                if row.iter().all(Cell::is_missing) {
                    row[0] = match dtypes[0] {
                        DataType::Numerical => Cell::Num(1.0),
                        _ => Cell::text("x"),
                    };
                }
            }
            let schema = dtypes.iter().enumerate().map(|(i, &d)| ColumnSchema::new(format!("col_{i}"), d)).collect();
            Table::new(schema, rows).unwrap()
        })
}

fn rendered(t: &Table) -> Vec<Vec<String>> {
    t.rows().iter().map(|r| r.iter().map(Cell::render).collect()).collect()
}

/// Sup-distance over every distinct value, by direct counting.
fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.iter()
        .map(|&v| {
            let fa = a.iter().filter(|&&x| x <= v).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&x| x <= v).count() as f64 / b.len() as f64;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max)
}

fn tv_oracle(a: &[u8], b: &[u8]) -> f64 {
    let mut ca: BTreeMap<u8, usize> = BTreeMap::new();
    let mut cb: BTreeMap<u8, usize> = BTreeMap::new();
    a.iter().for_each(|v| *ca.entry(*v).or_default() += 1);
    b.iter().for_each(|v| *cb.entry(*v).or_default() += 1);
    let mut keys: Vec<u8> = ca.keys().chain(cb.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    let s: f64 = keys
        .iter()
        .map(|k| {
            let pa = *ca.get(k).unwrap_or(&0) as f64 / a.len() as f64;
            let pb = *cb.get(k).unwrap_or(&0) as f64 / b.len() as f64;
            (pa - pb).abs()
        })
        .sum();
    0.5 * s
}

fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut halves, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            halves += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (halves as f64 / 2.0) / pairs as f64
}

fn small_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(0i32..5).prop_map(f64::from), -3.0f64..3.0], 1..=8)
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((prop_oneof![(0i32..10).prop_map(f64::from), -1.0f64..1.0], any::<bool>()), 2..=200)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
        .prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, ..ProptestConfig::default() })]

    #[test]
    fn parser_is_total(raw in prop_oneof![
        any::<String>(),
        "[a-c0-9,|\\- \n`\"#*:.]{0,300}",
        "(col_0,col_1\n)?([0-9a-z]{0,3}(,[0-9a-z]{0,3}){0,3}\n){0,6}",
    ], n in 1usize..30) {
        let schema = vec![ColumnSchema::new("col_0", DataType::Numerical), ColumnSchema::new("col_1", DataType::Categorical)];
        let out = parse_llm_output(&raw, &schema, n);
        match out.status {
            ParseStatus::Clean => {
                prop_assert_eq!(out.rows_recovered, n);
                prop_assert!(out.discarded_spans.is_empty());
            }
            ParseStatus::Rejected => {
                prop_assert!(out.table.is_none());
                prop_assert_eq!(out.rows_recovered, 0);
            }
            ParseStatus::Salvaged => prop_assert!(out.rows_recovered >= 1),
        }
        prop_assert!(out.rows_recovered <= n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_clean(t in table(), pipe in any::<bool>()) {
        let format = if pipe { RowFormat::PipeTable } else { RowFormat::CsvBlock };
        let idx: Vec<usize> = (0..t.n_rows()).collect();
        let text = serialize_rows(&t, &idx, format).unwrap();
        let out = parse_llm_output(&text, t.schema(), t.n_rows());
        prop_assert_eq!(out.status, ParseStatus::Clean, "{}", text);
        let back = out.table.unwrap();
        prop_assert_eq!(rendered(&back), rendered(&t));
    }

    #[test]
    fn trailing_prose_only_demotes_to_salvaged(t in table(), prose in "[A-Z][a-z ]{3,40}[.!]") {
        let idx: Vec<usize> = (0..t.n_rows()).collect();
        let text = serialize_rows(&t, &idx, RowFormat::CsvBlock).unwrap();
        let clean = parse_llm_output(&text, t.schema(), t.n_rows());
        prop_assume!(clean.status == ParseStatus::Clean);
        let noisy = parse_llm_output(&format!("{text}\n\n{prose}"), t.schema(), t.n_rows());
        prop_assert_eq!(noisy.status, ParseStatus::Salvaged);
        prop_assert_eq!(noisy.table.map(|t| rendered(&t)), clean.table.map(|t| rendered(&t)));
    }

    #[test]
    fn csv_emit_load_round_trip(t in table()) {
        let back = load_csv_str(&to_csv_string(&t), None).unwrap();
        prop_assert_eq!(back.n_rows(), t.n_rows());
        prop_assert_eq!(rendered(&back), rendered(&t));
    }

    #[test]
    fn csv_block_has_one_record_per_row(t in table(), pick in prop::collection::vec(any::<prop::sample::Index>(), 0..10)) {
        let idx: Vec<usize> = pick.iter().map(|i| i.index(t.n_rows())).collect();
        let text = serialize_rows(&t, &idx, RowFormat::CsvBlock).unwrap();
        let n = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes()).records().count();
        prop_assert_eq!(n, idx.len() + 1);
    }

    #[test]
    fn dtype_inference_ignores_row_order(t in table(), s in any::<u64>()) {
        let mut idx: Vec<usize> = (0..t.n_rows()).collect();
        idx.shuffle(&mut seed::stream(s, &[]));
        let a = load_csv_str(&to_csv_string(&t), None).unwrap();
        let b = load_csv_str(&to_csv_string(&t.select_rows(&idx).unwrap()), None).unwrap();
        let da: Vec<DataType> = a.schema().iter().map(|c| c.dtype).collect();
        let db: Vec<DataType> = b.schema().iter().map(|c| c.dtype).collect();
        prop_assert_eq!(da, db);
    }

    #[test]
    fn fidelity_identity_and_bounds(t in table(), other in table()) {
        let s = shape_score(&t, &t);
        if let Ok(s) = s {
            prop_assert_eq!(s.shape, 100.0);
        }
        if let Ok(tr) = trend_score(&t, &t) {
            prop_assert!((tr.trend - 100.0).abs() <= 1e-9, "{}", tr.trend);
        }
        if let Ok(s) = shape_score(&t, &other) {
            prop_assert!(s.per_column.iter().all(|c| (0.0..=100.0).contains(&c.score)));
        }
        if let Ok(tr) = trend_score(&t, &other) {
            prop_assert!(tr.per_pair.iter().all(|p| (0.0..=100.0).contains(&p.score)));
        }
    }

    #[test]
    fn fidelity_permutation_invariance(t in table(), s in any::<u64>()) {
        let mut idx: Vec<usize> = (0..t.n_rows()).collect();
        idx.shuffle(&mut seed::stream(s, &[]));
        let shuffled = t.select_rows(&idx).unwrap();
        if let (Ok(a), Ok(b)) = (shape_score(&t, &t), shape_score(&t, &shuffled)) {
            prop_assert_eq!(a.shape, b.shape);
        }
        if let (Ok(a), Ok(b)) = (trend_score(&t, &t), trend_score(&t, &shuffled)) {
            prop_assert!((a.trend - b.trend).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn ks_matches_brute_force(a in small_sample(), b in small_sample()) {
        let ks = ks_statistic(&a, &b).unwrap();
        prop_assert!((ks - ks_oracle(&a, &b)).abs() <= 1e-12);
        prop_assert_eq!(ks, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ks));
    }

    #[test]
    fn tv_matches_frequency_arithmetic(a in prop::collection::vec(0u8..5, 1..30), b in prop::collection::vec(0u8..5, 1..30)) {
        let tv = tv_distance(&a, &b).unwrap();
        prop_assert_eq!(tv, tv_oracle(&a, &b));
        prop_assert_eq!(tv, tv_distance(&b, &a).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn auc_matches_pair_counting((scores, labels) in labelled_scores()) {
        prop_assert_eq!(auc(&scores, &labels).unwrap(), auc_oracle(&scores, &labels));
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, labels) in labelled_scores()) {
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() * 3.0 - 7.0).collect();
        prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&warped, &labels).unwrap());
    }
}

proptest! {
    #[test]
    fn backoff_ceilings_grow_and_bound_delays(base_ms in 1u64..2000, s in any::<u64>()) {
        let b = Backoff { base: std::time::Duration::from_millis(base_ms) };
        let mut rng = seed::stream(s, &[]);
        for k in 1..8 {
            prop_assert!(b.ceiling(k) <= b.ceiling(k + 1));
            prop_assert!(b.delay(k, &mut rng) <= b.ceiling(k));
        }
    }

    #[test]
    fn shuffle_is_a_seeded_permutation(n in 0usize..200, s in any::<u64>()) {
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        shuffle_records(&mut a, s);
        shuffle_records(&mut b, s);
        prop_assert_eq!(&a, &b);
        a.sort();
        prop_assert_eq!(a, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn standardized_real_features(rows in prop::collection::vec((-1e3f64..1e3, -5f64..5.0, 0u8..3), 3..60)) {
        prop_assume!(rows.iter().any(|r| r.0 != rows[0].0) && rows.iter().any(|r| r.1 != rows[0].1));
        let schema = vec![
            ColumnSchema::new("a", DataType::Numerical),
            ColumnSchema::new("b", DataType::Numerical),
            ColumnSchema::new("y", DataType::Categorical),
        ];
        let cells = rows.iter().map(|&(a, b, y)| vec![Cell::Num(a), Cell::Num(b), Cell::text(format!("c{y}"))]).collect();
        let t = Table::new(schema, cells).unwrap();
        let enc = Encoder::fit(&t, "y", Task::Classification).unwrap();
        let m = enc.transform(&t, "real").unwrap();
        for j in 0..m.features.cols() {
            let col: Vec<f64> = (0..m.features.rows()).map(|i| m.features.get(i, j)).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-9, "mean {}", mean);
            prop_assert!((sd - 1.0).abs() <= 1e-9, "sd {}", sd);
        }
    }

    #[test]
    fn metadata_render_parse_lossless(general in "[A-Za-z][A-Za-z0-9 ,.]{0,60}", descs in prop::collection::vec("[A-Za-z][A-Za-z0-9 ,.;]{0,40}", 1..6)) {
        let schema: Vec<ColumnSchema> = descs.iter().enumerate().map(|(i, _)| ColumnSchema::new(format!("field_{i}"), DataType::Numerical)).collect();
        let meta = TableMetadata {
            general_description: general.trim().to_string(),
            columns: schema.iter().zip(&descs).map(|(c, d)| ColumnMetadata { name: c.name.clone(), dtype: c.dtype, description: d.trim().to_string() }).collect(),
        };
        prop_assume!(!meta.general_description.is_empty() && meta.columns.iter().all(|c| !c.description.is_empty()));
        let draft = parse_metadata_response(&render_metadata_response(&meta), &schema);
        prop_assert!(draft.issues.is_empty(), "{:?}", draft.issues);
        prop_assert_eq!(draft.parsed.unwrap(), meta);
    }

    #[test]
    fn metadata_parse_is_total(raw in any::<String>()) {
        let schema = vec![ColumnSchema::new("a", DataType::Numerical)];
        let d = parse_metadata_response(&raw, &schema);
        prop_assert_eq!(d.parsed.is_some(), d.issues.iter().all(|i| !i.is_structural()));
    }
}
