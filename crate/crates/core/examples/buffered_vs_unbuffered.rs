// SPDX-License-Identifier: Apache-2.0

//! Buffered mode takes the commit lock once per cluster, unbuffered mode
//! once per page. Small pages make the difference visible.

use minituple::bench::{run_benchmark, BenchConfig, BenchMode, SinkKind};
use minituple::WriterOptions;

fn main() -> minituple::Result<()> {
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get()).min(8);
    println!("mode        threads  MB/s    locks   ci");
    for mode in [BenchMode::Buffered, BenchMode::Unbuffered] {
        let config = BenchConfig {
            threads,
            entries_per_thread: 200_000,
            sink: SinkKind::Null,
            mode,
            options: WriterOptions { target_page_bytes: 4096, target_cluster_bytes: 8 << 20, ..Default::default() },
            repetitions: 3,
            seed: 3,
        };
        let r = run_benchmark(&config)?;
        println!(
            "{:<11} {threads:>7}  {:>6.1}  {:>6}   {}",
            format!("{mode:?}").to_lowercase(),
            r.logical_bandwidth / 1e6,
            r.lock_acquisitions,
            r.ci_half_width.map_or("-".into(), |c| format!("{:.1}%", c * 100.0)),
        );
    }
    Ok(())
}
