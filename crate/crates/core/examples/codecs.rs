// SPDX-License-Identifier: Apache-2.0

//! Compression ratio and write speed of each page codec on the same events.

use std::sync::Arc;
use std::time::Instant;

use minituple::bench::{synthetic_schema, EventGenerator};
use minituple::writer::sequential_write;
use minituple::{CodecId, Compression, NullSink, WriterOptions};

fn main() -> minituple::Result<()> {
    let entries: Vec<_> = EventGenerator::new(42, 0).take(300_000).collect();
    println!("codec    level  ratio   MB/s");
    for (codec, level) in [(CodecId::None, 0), (CodecId::Lz4, 0), (CodecId::Deflate, 0), (CodecId::Zstd, 1), (CodecId::Zstd, 0), (CodecId::Zstd, 9)] {
        let options = WriterOptions { compression: Compression::new(codec, level), ..Default::default() };
        let start = Instant::now();
        let stats = sequential_write(Arc::new(NullSink::new()), synthetic_schema(), options, &entries)?;
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{:<8} {level:>5}  {:.3}  {:>6.1}",
            format!("{codec:?}").to_lowercase(),
            stats.bytes_compressed as f64 / stats.bytes_uncompressed as f64,
            stats.bytes_uncompressed as f64 / 1e6 / secs
        );
    }
    Ok(())
}
