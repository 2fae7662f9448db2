// SPDX-License-Identifier: Apache-2.0

//! Synthetic weak-scaling write benchmark.
//!
//! Every worker writes a fixed number of entries `{id: i64, values: vec<f32>}`
//! where the collection length is Poisson(5) and the values are uniform in
//! `[0, 100)`; about 36 uncompressed bytes per entry. Each configuration is
//! repeated and summarized by the harmonic mean of the per-repetition
//! bandwidths together with the 95 % confidence half-width.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Barrier};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::format::sink::{FileSink, NullSink, Sink};
use crate::parwriter::{ParallelWriter, WriteStats};
use crate::reader::Reader;
use crate::schema::{FieldTree, LeafType, TypeSpec, Value};
use crate::writer::{SequentialWriter, WriteMode, WriterOptions};

pub const POISSON_MEAN: f64 = 5.0;
pub const VALUE_RANGE: (f32, f32) = (0.0, 100.0);
/// Maximum accepted 95 % confidence half-width relative to the mean.
pub const CI_LIMIT: f64 = 0.05;

pub fn synthetic_schema() -> FieldTree {
    let spec = TypeSpec::record([
        ("id", TypeSpec::Leaf(LeafType::I64)),
        ("values", TypeSpec::collection(TypeSpec::Leaf(LeafType::F32))),
    ]);
    FieldTree::build("Event", &spec).expect("static schema")
}

/// Draws one synthetic event.
pub fn generate_entry<R: Rng + ?Sized>(rng: &mut R, id: i64) -> Value {
    let poisson = Poisson::new(POISSON_MEAN).expect("positive mean");
    let uniform = Uniform::new(VALUE_RANGE.0, VALUE_RANGE.1).expect("non-empty range");
    let n = poisson.sample(rng) as usize;
    Value::Record(vec![
        Value::I64(id),
        Value::Collection((0..n).map(|_| Value::F32(uniform.sample(rng))).collect()),
    ])
}

/// Per-worker deterministic event stream seeded with `seed ^ worker`.
pub struct EventGenerator {
    rng: ChaCha8Rng,
    next_id: i64,
    poisson: Poisson<f64>,
    uniform: Uniform<f32>,
}

impl EventGenerator {
    pub fn new(seed: u64, worker: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed ^ worker),
            next_id: 0,
            poisson: Poisson::new(POISSON_MEAN).expect("positive mean"),
            uniform: Uniform::new(VALUE_RANGE.0, VALUE_RANGE.1).expect("non-empty range"),
        }
    }

    /// Collection length and values of the next event, without building a
    /// [`Value`].
    pub fn next_raw(&mut self, values: &mut Vec<f32>) -> i64 {
        let n = self.poisson.sample(&mut self.rng) as usize;
        values.clear();
        values.extend((0..n).map(|_| self.uniform.sample(&mut self.rng)));
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Overwrites `entry` with the next event, reusing its allocations.
    pub fn next_into(&mut self, entry: &mut Value) {
        if !matches!(entry.as_record(), Some([Value::I64(_), Value::Collection(_)])) {
            *entry = Value::Record(vec![Value::I64(0), Value::Collection(Vec::new())]);
        }
        let Value::Record(members) = entry else { unreachable!() };
        let n = self.poisson.sample(&mut self.rng) as usize;
        if let Value::Collection(values) = &mut members[1] {
            values.clear();
            values.extend((0..n).map(|_| Value::F32(self.uniform.sample(&mut self.rng))));
        }
        members[0] = Value::I64(self.next_id);
        self.next_id += 1;
    }
}

impl Iterator for EventGenerator {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        let n = self.poisson.sample(&mut self.rng) as usize;
        let values = (0..n).map(|_| Value::F32(self.uniform.sample(&mut self.rng))).collect();
        let id = self.next_id;
        self.next_id += 1;
        Some(Value::Record(vec![Value::I64(id), Value::Collection(values)]))
    }
}

/// Uncompressed bytes an event occupies in the synthetic schema.
pub fn entry_bytes(entry: &Value) -> u64 {
    let n = entry.as_record().and_then(|m| m[1].as_collection()).map_or(0, <[Value]>::len);
    8 + 8 + 4 * n as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkKind {
    Null,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    Buffered,
    Unbuffered,
    /// One independent sequential writer per thread.
    SeparateFiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub threads: usize,
    pub entries_per_thread: u64,
    pub sink: SinkKind,
    pub mode: BenchMode,
    pub options: WriterOptions,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            entries_per_thread: 1_000_000,
            sink: SinkKind::Null,
            mode: BenchMode::Buffered,
            options: WriterOptions::default(),
            repetitions: 5,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.entries_per_thread == 0 {
            return Err(Error::Config("entries_per_thread must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub wall_seconds: f64,
    pub entries: u64,
    pub bytes_written: u64,
    pub bytes_compressed: u64,
    pub bytes_uncompressed: u64,
    pub lock_acquisitions: u64,
}

impl Repetition {
    pub fn bandwidth(&self) -> f64 {
        self.bytes_written as f64 / self.wall_seconds
    }

    pub fn logical_bandwidth(&self) -> f64 {
        self.bytes_uncompressed as f64 / self.wall_seconds
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub mode: BenchMode,
    pub threads: usize,
    pub entries: u64,
    pub repetitions: Vec<Repetition>,
    /// Harmonic mean of physical bytes per second.
    pub bandwidth: f64,
    /// Harmonic mean of uncompressed bytes per second.
    pub logical_bandwidth: f64,
    /// 95 % confidence half-width of the bandwidth over its mean; `None` with
    /// a single repetition.
    pub ci_half_width: Option<f64>,
    pub ci_ok: bool,
    pub lock_acquisitions: u64,
    pub bytes_compressed: u64,
    pub bytes_uncompressed: u64,
    pub wall_seconds: f64,
}

impl BenchResult {
    pub const CSV_HEADER: &'static str =
        "mode,threads,entries,reps,bandwidth,logical_bandwidth,ci_half_width,ci_ok,lock_acquisitions,bytes_compressed,bytes_uncompressed,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.1},{:.1},{},{},{},{},{},{:.6}",
            serde_json::to_value(self.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            self.threads,
            self.entries,
            self.repetitions.len(),
            self.bandwidth,
            self.logical_bandwidth,
            self.ci_half_width.map_or(String::new(), |c| format!("{c:.4}")),
            self.ci_ok,
            self.lock_acquisitions,
            self.bytes_compressed,
            self.bytes_uncompressed,
            self.wall_seconds,
        )
    }
}

pub fn harmonic_mean(xs: &[f64]) -> f64 {
    xs.len() as f64 / xs.iter().map(|x| 1.0 / x).sum::<f64>()
}

/// Half-width of the two-sided 95 % Student-t interval for the mean, relative
/// to `reference`.
pub fn ci95_half_width(xs: &[f64], reference: f64) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.975);
    Some(t * (var / n as f64).sqrt() / reference)
}

fn sink_for(kind: &SinkKind, suffix: Option<usize>) -> Result<Arc<dyn Sink>> {
    Ok(match kind {
        SinkKind::Null => Arc::new(NullSink::new()),
        SinkKind::File(p) => Arc::new(FileSink::create(file_path(p, suffix))?),
    })
}

fn file_path(p: &Path, suffix: Option<usize>) -> PathBuf {
    match suffix {
        None => p.to_path_buf(),
        Some(t) => {
            let mut s = p.as_os_str().to_owned();
            s.push(format!(".{t}"));
            PathBuf::from(s)
        }
    }
}

fn fill_worker(ctx_fill: &mut dyn FnMut(&Value) -> Result<()>, seed: u64, worker: usize, n: u64) -> Result<()> {
    let mut generator = EventGenerator::new(seed, worker as u64);
    let mut entry = Value::Record(Vec::new());
    for _ in 0..n {
        generator.next_into(&mut entry);
        ctx_fill(&entry)?;
    }
    Ok(())
}

fn run_once(config: &BenchConfig) -> Result<Repetition> {
    let threads = config.threads;
    let n = config.entries_per_thread;
    let seed = config.seed;
    let barrier = Barrier::new(threads + 1);
    let (elapsed, stats): (f64, Vec<WriteStats>) = match config.mode {
        BenchMode::Buffered | BenchMode::Unbuffered => {
            let mut options = config.options.clone();
            options.mode = if config.mode == BenchMode::Buffered { WriteMode::Buffered } else { WriteMode::Unbuffered };
            let writer = ParallelWriter::create(sink_for(&config.sink, None)?, synthetic_schema(), options)?;
            let (start, results) = std::thread::scope(|s| {
                let handles: Vec<_> = (0..threads)
                    .map(|t| {
                        let (writer, barrier) = (&writer, &barrier);
                        s.spawn(move || -> Result<()> {
                            let mut ctx = writer.create_context()?;
                            barrier.wait();
                            fill_worker(&mut |e| ctx.fill(e), seed, t, n)?;
                            ctx.finish()
                        })
                    })
                    .collect();
                barrier.wait();
                let start = Instant::now();
                let results: Vec<_> = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
                (start, results)
            });
            results.into_iter().collect::<Result<Vec<()>>>()?;
            let stats = writer.close()?;
            (start.elapsed().as_secs_f64(), vec![stats])
        }
        BenchMode::SeparateFiles => {
            let (start, results) = std::thread::scope(|s| {
                let handles: Vec<_> = (0..threads)
                    .map(|t| {
                        let barrier = &barrier;
                        let sink_kind = &config.sink;
                        let options = config.options.clone();
                        s.spawn(move || -> Result<WriteStats> {
                            let sink = sink_for(sink_kind, Some(t))?;
                            barrier.wait();
                            let mut w = SequentialWriter::create(sink, synthetic_schema(), options)?;
                            fill_worker(&mut |e| w.fill(e), seed, t, n)?;
                            w.close()
                        })
                    })
                    .collect();
                barrier.wait();
                let start = Instant::now();
                let results: Vec<_> = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
                (start, results)
            });
            let elapsed = start.elapsed().as_secs_f64();
            (elapsed, results.into_iter().collect::<Result<Vec<_>>>()?)
        }
    };
    let rep = Repetition {
        wall_seconds: elapsed,
        entries: stats.iter().map(|s| s.entries).sum(),
        bytes_written: stats.iter().map(|s| s.bytes_written).sum(),
        bytes_compressed: stats.iter().map(|s| s.bytes_compressed).sum(),
        bytes_uncompressed: stats.iter().map(|s| s.bytes_uncompressed).sum(),
        lock_acquisitions: stats.iter().map(|s| s.lock_acquisitions).sum(),
    };
    if let SinkKind::File(p) = &config.sink {
        verify_output(config, p, rep.entries)?;
    }
    Ok(rep)
}

fn verify_output(config: &BenchConfig, path: &Path, expected: u64) -> Result<()> {
    let paths: Vec<PathBuf> = match config.mode {
        BenchMode::SeparateFiles => (0..config.threads).map(|t| file_path(path, Some(t))).collect(),
        _ => vec![path.to_path_buf()],
    };
    let mut seen = 0u64;
    for p in paths {
        let r = Reader::open(&p)?;
        for e in r.entries() {
            e?;
            seen += 1;
        }
    }
    if seen != expected {
        return Err(Error::Corrupt(format!("read back {seen} entries, wrote {expected}")));
    }
    Ok(())
}

/// Runs all repetitions of one configuration.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchResult> {
    config.validate()?;
    let mut reps = Vec::with_capacity(config.repetitions);
    for i in 0..config.repetitions {
        let rep = run_once(config)?;
        log::info!(
            "rep {i}: {:.3} s, {:.1} MB/s",
            rep.wall_seconds,
            rep.bandwidth() / 1e6
        );
        reps.push(rep);
    }
    Ok(summarize(config, reps))
}

fn summarize(config: &BenchConfig, reps: Vec<Repetition>) -> BenchResult {
    let bw: Vec<f64> = reps.iter().map(Repetition::bandwidth).collect();
    let logical: Vec<f64> = reps.iter().map(Repetition::logical_bandwidth).collect();
    let bandwidth = harmonic_mean(&bw);
    let ci_half_width = ci95_half_width(&bw, bandwidth);
    let ci_ok = ci_half_width.is_none_or(|c| c < CI_LIMIT);
    if !ci_ok {
        log::warn!(
            "95% confidence half-width {:.1}% exceeds {:.0}% of the mean",
            ci_half_width.unwrap_or(0.0) * 100.0,
            CI_LIMIT * 100.0
        );
    }
    let last = reps.last().expect("at least one repetition").clone();
    BenchResult {
        mode: config.mode,
        threads: config.threads,
        entries: last.entries,
        bandwidth,
        logical_bandwidth: harmonic_mean(&logical),
        ci_half_width,
        ci_ok,
        lock_acquisitions: last.lock_acquisitions,
        bytes_compressed: last.bytes_compressed,
        bytes_uncompressed: last.bytes_uncompressed,
        wall_seconds: reps.iter().map(|r| r.wall_seconds).sum::<f64>() / reps.len() as f64,
        repetitions: reps,
    }
}

/// Baseline: generate the same events and copy their element bytes into a
/// page-sized buffer, with no format around them. Returns (bytes, seconds).
pub fn raw_copy_baseline(entries: u64, seed: u64, page_bytes: usize) -> (u64, f64) {
    let mut generator = EventGenerator::new(seed, 0);
    let mut page: Vec<u8> = Vec::with_capacity(page_bytes);
    let mut values = Vec::new();
    let mut total = 0u64;
    let mut offset = 0u64;
    let start = Instant::now();
    let push = |page: &mut Vec<u8>, bytes: &[u8], total: &mut u64| {
        if page.len() + bytes.len() > page_bytes {
            std::hint::black_box(&page[..]);
            page.clear();
        }
        page.extend_from_slice(bytes);
        *total += bytes.len() as u64;
    };
    for _ in 0..entries {
        let id = generator.next_raw(&mut values);
        offset += values.len() as u64;
        push(&mut page, &id.to_le_bytes(), &mut total);
        push(&mut page, &offset.to_le_bytes(), &mut total);
        for v in &values {
            push(&mut page, &v.to_le_bytes(), &mut total);
        }
    }
    std::hint::black_box(&page);
    (total, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_statistics() {
        let mut g = EventGenerator::new(7, 0);
        let mut total = 0usize;
        let n = 1_000_000;
        let mut values = Vec::new();
        for _ in 0..n {
            g.next_raw(&mut values);
            assert!(values.iter().all(|v| (0.0..100.0).contains(v)));
            total += values.len();
        }
        let mean = total as f64 / n as f64;
        assert!((4.97..=5.03).contains(&mean), "mean {mean}");
    }

    #[test]
    fn generator_is_deterministic() {
        let a: Vec<_> = EventGenerator::new(3, 1).take(100).collect();
        let b: Vec<_> = EventGenerator::new(3, 1).take(100).collect();
        let c: Vec<_> = EventGenerator::new(3, 2).take(100).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // the raw path draws the same stream
        let mut g = EventGenerator::new(3, 1);
        let mut values = Vec::new();
        for e in &a {
            let id = g.next_raw(&mut values);
            let expect = Value::Record(vec![
                Value::I64(id),
                Value::Collection(values.iter().map(|&v| Value::F32(v)).collect()),
            ]);
            assert_eq!(&expect, e);
        }
    }

    #[test]
    fn statistics_helpers() {
        assert!((harmonic_mean(&[1.0, 4.0, 4.0]) - 2.0).abs() < 1e-12);
        assert_eq!(ci95_half_width(&[5.0], 5.0), None);
        let ci = ci95_half_width(&[10.0, 10.0, 10.0], 10.0).unwrap();
        assert_eq!(ci, 0.0);
        // n = 2: t(0.975, 1) = 12.706, s = sqrt(2), s/sqrt(2) = 1
        let ci = ci95_half_width(&[9.0, 11.0], 10.0).unwrap();
        assert!((ci - 1.2706).abs() < 1e-3, "{ci}");
    }

    #[test]
    fn config_validation() {
        let c = BenchConfig { repetitions: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = BenchConfig { entries_per_thread: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
