// SPDX-License-Identifier: Apache-2.0

//! Clusters are sealed without knowing where they will land in the file.
//! Here they are built on detached contexts and committed in reverse order.

use std::sync::Arc;

use minituple::{Compression, FieldTree, FillContext, MemSink, ParallelWriter, Reader, TypeSpec, Value, WriterOptions};

fn main() -> minituple::Result<()> {
    let schema = Arc::new(FieldTree::build("e", &TypeSpec::parse("{id: i64, hits: vec<{x: f32, ch: vec<i32>}>}")?)?);
    let options = WriterOptions { compression: Compression::NONE, ..Default::default() };

    let mut sealed = Vec::new();
    for batch in 0..3i64 {
        let mut ctx = FillContext::detached(schema.clone(), options.clone())?;
        for i in 0..100 {
            let id = batch * 100 + i;
            let hits = (0..id % 4)
                .map(|k| Value::Record(vec![Value::F32(k as f32), Value::Collection((0..k as i32).map(Value::I32).collect())]))
                .collect();
            ctx.fill(&Value::Record(vec![Value::I64(id), Value::Collection(hits)]))?;
        }
        sealed.push(ctx.seal_cluster()?);
    }
    let payloads: Vec<Vec<Vec<u8>>> = sealed.iter().map(page_bytes).collect();

    let sink = MemSink::new();
    let writer = ParallelWriter::create(Arc::new(sink.clone()), schema, options)?;
    for cluster in sealed.into_iter().rev() {
        writer.commit_cluster(cluster)?;
    }
    writer.close()?;

    let reader = Reader::from_source(Arc::new(sink.to_vec()))?;
    for (k, desc) in reader.footer().clusters.iter().enumerate() {
        let first = reader.read_entry(desc.first_entry)?;
        let page = &desc.columns[0].pages[0];
        println!("cluster {k}: file offset {:>5}, first id {:?}", page.file_offset, first.as_record().unwrap()[0]);
    }
    // Offsets in the file are the cluster-local ones the contexts produced.
    let on_disk: Vec<Vec<Vec<u8>>> = (0..3).map(|k| reader.load_cluster(k).map(|c| cluster_bytes(&c))).collect::<minituple::Result<_>>()?;
    let expected: Vec<_> = payloads.into_iter().rev().collect();
    assert_eq!(on_disk, expected);
    println!("page payloads unchanged by relocation");
    Ok(())
}

fn page_bytes(cluster: &minituple::SealedCluster) -> Vec<Vec<u8>> {
    cluster.columns.iter().map(|c| c.pages.iter().flat_map(|p| p.bytes().unwrap().to_vec()).collect()).collect()
}

fn cluster_bytes(cluster: &minituple::reader::ClusterData) -> Vec<Vec<u8>> {
    use minituple::reader::ColumnData::*;
    cluster
        .columns
        .iter()
        .map(|c| match c.as_ref().unwrap() {
            U64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            I64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        })
        .collect()
}
