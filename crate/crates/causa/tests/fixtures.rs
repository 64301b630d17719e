//! Generated fixtures must match their generators. Set
//! `CAUSA_REGENERATE_FIXTURES=1` to rewrite them.

use std::path::PathBuf;

use causa::rgnn_files::ModelFile;
use causa::synth;
use causa_core::rgnn::scalar_model;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn csv_text(ds: &causa_core::CausalDataset) -> String {
    let (header, rows) = ds.to_records();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn check(name: &str, expected: String) {
    let path = fixture(name);
    if std::env::var_os("CAUSA_REGENERATE_FIXTURES").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    let actual = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} is stale; rerun with CAUSA_REGENERATE_FIXTURES=1");
}

#[test]
fn randomized_csv_matches_generator() {
    check("randomized.csv", csv_text(&synth::randomized(400, 10.0, 1.0, 2024)));
}

#[test]
fn scalar_model_matches_constructor() {
    let m = scalar_model(0.5, 1.0, Some(1.0), 0.9).unwrap();
    check("rgnn_scalar.json", ModelFile::from_model(&m).to_json());
}
