// SPDX-License-Identifier: Apache-2.0

//! Concatenates files with the same schema; mismatched schemas are refused.

use minituple::bench::{synthetic_schema, EventGenerator};
use minituple::skim::{merge_files, skim_input_schema, SkimEventGenerator};
use minituple::{Error, ParallelWriter, Reader, WriterOptions};

fn main() -> minituple::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut parts = Vec::new();
    for k in 0..3u64 {
        let path = dir.path().join(format!("part{k}.mnt"));
        let writer = ParallelWriter::create_file(&path, synthetic_schema(), WriterOptions::default())?;
        let mut ctx = writer.create_context()?;
        for entry in EventGenerator::new(11, k).take(10_000 * (k as usize + 1)) {
            ctx.fill(&entry)?;
        }
        ctx.finish()?;
        writer.close()?;
        parts.push(path);
    }

    let merged = dir.path().join("merged.mnt");
    let stats = merge_files(&parts, &merged, WriterOptions::default())?;
    let reader = Reader::open(&merged)?;
    println!("merged {} files: {} entries, {} clusters, {} bytes", parts.len(), reader.n_entries(), stats.clusters, reader.file_len());

    let other = dir.path().join("other.mnt");
    let writer = ParallelWriter::create_file(&other, skim_input_schema(), WriterOptions::default())?;
    let mut ctx = writer.create_context()?;
    ctx.fill(&SkimEventGenerator::new(1).next().expect("endless"))?;
    ctx.finish()?;
    writer.close()?;
    match merge_files(&[parts[0].clone(), other], &dir.path().join("bad.mnt"), WriterOptions::default()) {
        Err(Error::SchemaMismatch(why)) => println!("refused: {why}"),
        other => panic!("expected a schema mismatch, got {other:?}"),
    }
    Ok(())
}
