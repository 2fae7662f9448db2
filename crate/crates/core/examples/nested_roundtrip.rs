// SPDX-License-Identifier: Apache-2.0

//! Shreds two small events into five flat columns and reads them back.

use std::sync::Arc;

use minituple::writer::sequential_write;
use minituple::{Compression, FieldTree, MemSink, Reader, TypeSpec, Value, WriterOptions};

fn track(energy: f32, ids: &[i32]) -> Value {
    Value::Record(vec![Value::F32(energy), Value::Collection(ids.iter().map(|&i| Value::I32(i)).collect())])
}

fn main() -> minituple::Result<()> {
    let spec = TypeSpec::parse("{fId: i64, fTracks: vec<{fEnergy: f32, fIds: vec<i32>}>}")?;
    let schema = FieldTree::build("Event", &spec)?;
    let entries = [
        Value::Record(vec![Value::I64(6873), Value::Collection(vec![track(25.4, &[42, 27]), track(32.8, &[16])])]),
        Value::Record(vec![Value::I64(6874), Value::Collection(vec![track(14.7, &[21, 8])])]),
    ];

    let sink = MemSink::new();
    let opts = WriterOptions { compression: Compression::NONE, ..Default::default() };
    sequential_write(Arc::new(sink.clone()), schema.clone(), opts, &entries)?;

    let reader = Reader::from_source(Arc::new(sink.to_vec()))?;
    let cluster = reader.load_cluster(0)?;
    for (desc, data) in schema.columns().iter().zip(&cluster.columns) {
        println!("{:<24} {:?}  {:?}", schema.path(desc.source_field), desc.role, data.as_ref().expect("all columns loaded"));
    }
    assert_eq!(reader.read_all()?, entries);
    println!("{} entries read back unchanged", reader.n_entries());
    Ok(())
}
