// SPDX-License-Identifier: Apache-2.0

//! Fixed work per thread, growing thread count. Prints one CSV row per run.

use minituple::bench::{run_benchmark, BenchConfig, BenchMode, BenchResult, SinkKind};
use minituple::WriterOptions;

fn main() -> minituple::Result<()> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut threads = vec![1, 2, 4];
    threads.push(cores.min(8));
    threads.sort_unstable();
    threads.dedup();

    println!("{}", BenchResult::CSV_HEADER);
    let mut base = None;
    for t in threads {
        let config = BenchConfig {
            threads: t,
            entries_per_thread: 250_000,
            sink: SinkKind::Null,
            mode: BenchMode::Buffered,
            options: WriterOptions::default(),
            repetitions: 3,
            seed: 42,
        };
        let r = run_benchmark(&config)?;
        println!("{}", r.csv_row());
        let one = *base.get_or_insert(r.bandwidth);
        eprintln!("T={t}: speedup {:.2} on {cores} cores", r.bandwidth / one);
    }
    Ok(())
}
