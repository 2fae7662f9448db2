// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::sync::Arc;

use common::sorted;
use minituple::skim::{self, merge_files, run_skim, InputFile, SkimConfig, SkimRules, Strategy};
use minituple::{Error, FieldTree, FileSink, Reader, TypeSpec, Value, WriterOptions};

fn small_writer() -> WriterOptions {
    WriterOptions { target_page_bytes: 1024, target_cluster_bytes: 16 * 1024, ..Default::default() }
}

fn inputs(dir: &Path, partitions: &[&str], files: usize, entries: u64) -> Vec<InputFile> {
    skim::generate_inputs(dir, partitions, files, entries, 3, &small_writer()).unwrap()
}

fn config(inputs: Vec<InputFile>, rules: SkimRules, out: &Path, strategy: Strategy, threads: usize) -> SkimConfig {
    SkimConfig {
        inputs,
        rules,
        threads,
        writer: small_writer(),
        output_dir: out.to_path_buf(),
        strategy,
        keep_intermediate: false,
    }
}

fn read(path: &Path) -> Vec<Value> {
    Reader::open(path).unwrap().read_all().unwrap()
}

#[test]
fn identity_skim_is_union_of_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let ins = inputs(&dir.path().join("in"), &["only"], 4, 300);
    let mut all: Vec<Value> = ins.iter().flat_map(|i| read(&i.path)).collect();
    all.sort();
    for strategy in [Strategy::Parallel, Strategy::SeparateMerge, Strategy::Imt] {
        let out = dir.path().join(format!("{strategy:?}"));
        let report = run_skim(&config(ins.clone(), SkimRules::default(), &out, strategy, 3)).unwrap();
        assert_eq!(report.partitions[0].entries_in, 1200);
        assert_eq!(report.partitions[0].entries_out, 1200);
        assert_eq!(report.partitions[0].uncompressed_out, report.partitions[0].uncompressed_in);
        assert_eq!(sorted(read(&report.partitions[0].output)), all, "{strategy:?}");
    }
}

#[test]
fn strategies_agree_and_match_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let parts = ["a", "b", "c"];
    let ins = inputs(&dir.path().join("in"), &parts, 3, 400);
    let rules = skim::agc_rules();
    let compiled = skim::CompiledSkim::compile(&skim::skim_input_schema(), &rules).unwrap();
    let mut outputs = Vec::new();
    for (k, strategy) in [Strategy::Parallel, Strategy::SeparateMerge, Strategy::Imt].into_iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let report = run_skim(&config(ins.clone(), rules.clone(), &out, strategy, 2)).unwrap();
        assert_eq!(report.partitions.len(), 3);
        let per_part: Vec<Vec<Value>> = report.partitions.iter().map(|p| sorted(read(&p.output))).collect();
        for (p, got) in parts.iter().zip(&per_part) {
            let expected: Vec<Value> = ins
                .iter()
                .filter(|i| i.partition == *p)
                .flat_map(|i| read(&i.path))
                .filter_map(|e| compiled.skim_entry(&e))
                .collect();
            assert_eq!(got, &sorted(expected));
        }
        for p in &report.partitions {
            assert!(p.uncompressed_out < p.uncompressed_in);
            assert!(p.entries_out < p.entries_in);
        }
        outputs.push(per_part);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn separate_merge_needs_double_storage() {
    let dir = tempfile::tempdir().unwrap();
    let ins = inputs(&dir.path().join("in"), &["a", "b"], 3, 500);
    let out = dir.path().join("out");
    let report = run_skim(&config(ins, skim::agc_rules(), &out, Strategy::SeparateMerge, 2)).unwrap();
    assert!(report.merge_seconds > 0.0);
    assert!(report.peak_storage_bytes as f64 >= 1.9 * report.output_bytes as f64);
    assert!(!out.join("separate").exists());
    let more = inputs(&dir.path().join("in2"), &["a"], 2, 100);
    let parallel = run_skim(&config(more, skim::agc_rules(), &dir.path().join("p"), Strategy::Parallel, 2)).unwrap();
    assert_eq!(parallel.merge_seconds, 0.0);
    assert_eq!(parallel.peak_storage_bytes, parallel.output_bytes);
}

#[test]
fn merge_preserves_per_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let schema = FieldTree::build("e", &TypeSpec::parse("{id: i64}").unwrap()).unwrap();
    let write = |name: &str, ids: std::ops::Range<i64>| {
        let path = dir.path().join(name);
        let entries: Vec<Value> = ids.map(|i| Value::Record(vec![Value::I64(i)])).collect();
        minituple::writer::sequential_write(Arc::new(FileSink::create(&path).unwrap()), schema.clone(), WriterOptions::default(), &entries)
            .unwrap();
        path
    };
    let a = write("a.mnt", 0..3);
    let b = write("b.mnt", 10..15);
    let merged = dir.path().join("m.mnt");
    let stats = merge_files(&[&a, &b], &merged, WriterOptions::default()).unwrap();
    assert_eq!(stats.entries, 8);
    let ids: Vec<Value> = read(&merged);
    let expected: Vec<Value> = (0..3).chain(10..15).map(|i| Value::Record(vec![Value::I64(i)])).collect();
    assert_eq!(ids, expected);

    let single = dir.path().join("s.mnt");
    merge_files(&[&b], &single, WriterOptions { target_page_bytes: 8, target_cluster_bytes: 16, ..Default::default() }).unwrap();
    assert_eq!(read(&single), read(&b));

    let other = FieldTree::build("e", &TypeSpec::parse("{id: i32}").unwrap()).unwrap();
    let c = dir.path().join("c.mnt");
    minituple::writer::sequential_write(Arc::new(FileSink::create(&c).unwrap()), other, WriterOptions::default(), &[]).unwrap();
    assert!(matches!(merge_files(&[&a, &c], &dir.path().join("x.mnt"), WriterOptions::default()), Err(Error::SchemaMismatch(_))));
}

#[test]
fn partition_schema_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ins = inputs(&dir.path().join("in"), &["a"], 1, 10);
    let other = dir.path().join("other.mnt");
    let schema = FieldTree::build("e", &TypeSpec::parse("{id: i64}").unwrap()).unwrap();
    minituple::writer::sequential_write(Arc::new(FileSink::create(&other).unwrap()), schema, WriterOptions::default(), &[]).unwrap();
    ins.push(InputFile { path: other, partition: "a".into() });
    let err = run_skim(&config(ins, SkimRules::default(), &dir.path().join("out"), Strategy::Parallel, 1)).unwrap_err();
    assert!(matches!(err, Error::SchemaMismatch(_)));
}

#[test]
fn config_file_paths_are_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let ins = inputs(dir.path(), &["a", "b"], 2, 50);
    let json = serde_json::json!({
        "inputs": ins.iter().map(|i| serde_json::json!({
            "path": i.path.file_name().unwrap().to_str().unwrap(),
            "partition": i.partition,
        })).collect::<Vec<_>>(),
        "keep_fields": ["id", "jets"],
        "entry_predicate": [{"collection": "leptons", "leaf": "pt", "threshold": 20.0, "min_count": 1}],
        "element_filters": [{"collection": "jets", "leaf": "pt", "min": 30.0}],
        "threads": 2,
        "strategy": "imt",
        "output_dir": "out",
    });
    let path = dir.path().join("skim.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    let config = SkimConfig::from_json_file(&path).unwrap();
    assert_eq!(config.strategy, Strategy::Imt);
    assert!(config.inputs.iter().all(|i| i.path.exists()));
    assert_eq!(config.output_dir, dir.path().join("out"));
    let report = run_skim(&config).unwrap();
    assert!(report.partitions[0].output.starts_with(dir.path().join("out")));
    let out = Reader::open(&report.partitions[0].output).unwrap();
    assert_eq!(out.schema().type_spec(0).to_string(), "{id: i64, jets: vec<{pt: f32}>}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"inputs": [], "threshold": 1}"#).unwrap();
    assert!(matches!(SkimConfig::from_json_file(&bad).and_then(|c| c.validate()), Err(Error::Config(_))));
}

#[test]
fn empty_partition_output_after_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let ins = inputs(&dir.path().join("in"), &["a"], 2, 50);
    let rules = SkimRules {
        entry_predicate: vec![skim::CountAtLeast { collection: "jets".into(), leaf: "pt".into(), threshold: 1e9, min_count: 1 }],
        ..Default::default()
    };
    for strategy in [Strategy::Parallel, Strategy::SeparateMerge, Strategy::Imt] {
        let out = dir.path().join(format!("{strategy:?}"));
        let report = run_skim(&config(ins.clone(), rules.clone(), &out, strategy, 2)).unwrap();
        assert_eq!(report.partitions[0].entries_out, 0);
        assert!(read(&report.partitions[0].output).is_empty());
    }
}
