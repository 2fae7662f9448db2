// SPDX-License-Identifier: Apache-2.0

//! Several threads fill their own contexts and commit clusters into one file.

use std::time::Instant;

use minituple::bench::{synthetic_schema, EventGenerator};
use minituple::{ParallelWriter, Reader, WriterOptions};

fn main() -> minituple::Result<()> {
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get()).clamp(2, 8);
    let per_thread = 200_000;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("events.mnt");

    let options = WriterOptions { target_cluster_bytes: 4 << 20, ..Default::default() };
    let writer = ParallelWriter::create_file(&path, synthetic_schema(), options)?;
    let start = Instant::now();
    std::thread::scope(|s| -> minituple::Result<()> {
        let workers: Vec<_> = (0..threads)
            .map(|t| {
                let mut ctx = writer.create_context()?;
                Ok(s.spawn(move || -> minituple::Result<()> {
                    for entry in EventGenerator::new(1, t as u64).take(per_thread) {
                        ctx.fill(&entry)?;
                    }
                    ctx.finish()
                }))
            })
            .collect::<minituple::Result<_>>()?;
        workers.into_iter().try_for_each(|w| w.join().expect("worker panicked"))
    })?;
    let stats = writer.close()?;
    let secs = start.elapsed().as_secs_f64();

    println!("{threads} threads, {} entries in {} clusters, {} pages", stats.entries, stats.clusters, stats.pages);
    println!(
        "{:.1} MB uncompressed -> {:.1} MB on disk, {:.1} MB/s, {} lock acquisitions",
        stats.bytes_uncompressed as f64 / 1e6,
        stats.bytes_compressed as f64 / 1e6,
        stats.bytes_uncompressed as f64 / 1e6 / secs,
        stats.lock_acquisitions
    );

    // Cluster order depends on scheduling; the set of entries does not.
    let reader = Reader::open(&path)?;
    let values: usize = reader.entries().map(|e| e.map(|v| v.as_record().unwrap()[1].as_collection().unwrap().len())).sum::<minituple::Result<_>>()?;
    assert_eq!(reader.n_entries(), (threads * per_thread) as u64);
    println!("read back {} entries holding {values} values", reader.n_entries());
    Ok(())
}
