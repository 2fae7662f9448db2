// SPDX-License-Identifier: Apache-2.0

//! Writes the same file with and without preallocation of reserved space.

use minituple::bench::{run_benchmark, BenchConfig, BenchMode, SinkKind};
use minituple::{Reader, WriterOptions};

fn main() -> minituple::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("bench.mnt");
    for preallocate in [false, true] {
        let config = BenchConfig {
            threads: 2,
            entries_per_thread: 300_000,
            sink: SinkKind::File(path.clone()),
            mode: BenchMode::Buffered,
            options: WriterOptions { preallocate, target_cluster_bytes: 4 << 20, ..Default::default() },
            repetitions: 3,
            seed: 1,
        };
        let r = run_benchmark(&config)?;
        let reader = Reader::open(&path)?;
        println!(
            "preallocate={preallocate:<5}  {:.1} MB/s  file {} bytes, {} entries",
            r.bandwidth / 1e6,
            reader.file_len(),
            reader.n_entries()
        );
    }
    Ok(())
}
