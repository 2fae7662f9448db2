// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use common::*;
use minituple::codec::CodecId;
use minituple::reader::ColumnData;
use minituple::{Compression, FieldTree, FileSink, ParallelWriter, Reader, TypeSpec, Value, WriterOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sequential_preserves_order(seed in any::<u64>(), n in 0usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = random_schema(&mut rng);
        let entries = random_entries(&mut rng, &schema, n);
        let opts = random_options(&mut rng);
        let back = read_back(write_sequential(&schema, &entries, opts));
        prop_assert_eq!(back, entries);
    }

    #[test]
    fn parallel_preserves_multiset(seed in any::<u64>(), n in 0usize..120, threads in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = random_schema(&mut rng);
        let entries = random_entries(&mut rng, &schema, n);
        let opts = random_options(&mut rng);
        let back = read_back(write_parallel(&schema, &entries, opts, threads));
        prop_assert_eq!(sorted(back), sorted(entries));
    }

    #[test]
    fn projection_matches_in_memory(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = random_schema(&mut rng);
        let entries = random_entries(&mut rng, &schema, n);
        let bytes = write_sequential(&schema, &entries, random_options(&mut rng));
        let top: Vec<String> = schema.children(0).iter().map(|&c| schema.path(c)).collect();
        let keep = vec![top[seed as usize % top.len()].clone()];
        let projection = schema.project(&keep).unwrap();
        let reader = Reader::from_source(Arc::new(bytes)).unwrap().with_projection(&keep).unwrap();
        prop_assert_eq!(reader.output_schema(), projection.tree());
        let expected: Vec<Value> = entries.iter().map(|e| projection.apply(e)).collect();
        prop_assert_eq!(reader.read_all().unwrap(), expected);
    }
}

fn event_schema() -> FieldTree {
    FieldTree::build("e", &TypeSpec::parse("{id: i64, hits: vec<{x: f32, y: f64}>, tag: i32}").unwrap()).unwrap()
}

fn event(i: i64) -> Value {
    Value::Record(vec![
        Value::I64(i),
        Value::Collection(
            (0..i % 5)
                .map(|k| Value::Record(vec![Value::F32(k as f32), Value::F64(i as f64 * 0.5)]))
                .collect(),
        ),
        Value::I32(-(i as i32)),
    ])
}

fn small_clusters() -> WriterOptions {
    WriterOptions {
        target_page_bytes: 64,
        target_cluster_bytes: 256,
        ..Default::default()
    }
}

#[test]
fn random_access_across_clusters() {
    let schema = event_schema();
    let entries: Vec<Value> = (0..500).map(event).collect();
    let reader = Reader::from_source(Arc::new(write_sequential(&schema, &entries, small_clusters()))).unwrap();
    assert!(reader.footer().clusters.len() > 10);
    for i in [0u64, 1, 77, 250, 498, 499] {
        assert_eq!(reader.read_entry(i).unwrap(), entries[i as usize]);
    }
    assert!(matches!(reader.read_entry(500), Err(minituple::Error::IndexOutOfRange { .. })));
}

#[test]
fn projected_read_skips_pages() {
    let schema = event_schema();
    let entries: Vec<Value> = (0..2000).map(event).collect();
    let bytes = write_sequential(&schema, &entries, small_clusters());
    let full = Reader::from_source(Arc::new(bytes.clone())).unwrap();
    full.read_all().unwrap();
    let narrow = Reader::from_source(Arc::new(bytes)).unwrap().with_projection(&["tag"]).unwrap();
    let tags = narrow.read_all().unwrap();
    assert_eq!(tags[7], Value::Record(vec![Value::I32(-7)]));
    assert!(narrow.pages_read() * 3 < full.pages_read());
}

#[test]
fn column_offsets_stay_cluster_local() {
    let schema = event_schema();
    let entries: Vec<Value> = (0..500).map(event).collect();
    let reader = Reader::from_source(Arc::new(write_sequential(&schema, &entries, small_clusters()))).unwrap();
    let offsets_col = schema.field_column(schema.find("hits").unwrap()).unwrap();
    let first = reader.load_cluster(1).unwrap();
    let Some(ColumnData::U64(ends)) = &first.columns[offsets_col] else { panic!("offset column") };
    let mut total = 0;
    for (k, end) in ends.iter().enumerate() {
        total += (first.first_entry + k as u64) % 5;
        assert_eq!(*end, total);
    }
}

#[test]
fn file_sink_roundtrip_with_preallocation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.mnt");
    let schema = event_schema();
    let entries: Vec<Value> = (0..3000).map(event).collect();
    let opts = WriterOptions {
        preallocate: true,
        compression: Compression { codec: CodecId::Lz4, level: 0 },
        ..small_clusters()
    };
    let w = ParallelWriter::create(Arc::new(FileSink::create(&path).unwrap()), schema.clone(), opts).unwrap();
    let mut ctx = w.create_context().unwrap();
    for e in &entries {
        ctx.fill(e).unwrap();
    }
    ctx.finish().unwrap();
    let stats = w.close().unwrap();
    assert_eq!(stats.entries, 3000);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), stats.bytes_written);
    let reader = Reader::open(&path).unwrap();
    assert_eq!(reader.read_all().unwrap(), entries);
}

#[test]
fn empty_file_is_valid() {
    let schema = event_schema();
    let reader = Reader::from_source(Arc::new(write_sequential(&schema, &[], WriterOptions::default()))).unwrap();
    assert_eq!(reader.n_entries(), 0);
    assert!(reader.read_all().unwrap().is_empty());
    assert_eq!(reader.schema(), &schema);
}
