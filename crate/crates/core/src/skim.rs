// SPDX-License-Identifier: Apache-2.0

//! Partitioned dataset skimming.
//!
//! Input files are grouped into partitions; every partition produces one
//! output file. Three reductions are applied per entry:
//!
//! * horizontal: only `keep_fields` survive,
//! * vertical: entries failing any [`CountAtLeast`] rule are dropped,
//! * element: collection items below an [`ElementFilter`] minimum are removed.
//!
//! Three execution strategies are available. [`Strategy::Parallel`] shares one
//! [`ParallelWriter`] per partition between all workers, which pull input
//! files from a global queue. [`Strategy::SeparateMerge`] writes one file per
//! input and merges afterwards. [`Strategy::Imt`] runs one sequential writer
//! per partition and only parallelizes page compression.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parwriter::{ParallelWriter, WriteStats};
use crate::reader::Reader;
use crate::schema::{FieldKind, FieldTree, Projection, TypeSpec, Value, ITEM_NAME};
use crate::writer::{FillContext, SequentialWriter, WriterOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub partition: String,
}

/// Keep an entry only if at least `min_count` items of `collection` have
/// `leaf > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountAtLeast {
    pub collection: String,
    /// Path of the leaf inside one collection item; empty if the item itself
    /// is the leaf.
    #[serde(default)]
    pub leaf: String,
    pub threshold: f64,
    pub min_count: usize,
}

/// Drop items of `collection` whose `leaf` is below `min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFilter {
    pub collection: String,
    #[serde(default)]
    pub leaf: String,
    pub min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Parallel,
    SeparateMerge,
    Imt,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Self::Parallel),
            "separate-merge" => Ok(Self::SeparateMerge),
            "imt" => Ok(Self::Imt),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// The per-entry part of a skim configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkimRules {
    /// Field paths to keep; empty keeps everything.
    pub keep_fields: Vec<String>,
    pub entry_predicate: Vec<CountAtLeast>,
    pub element_filters: Vec<ElementFilter>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkimConfig {
    pub inputs: Vec<InputFile>,
    #[serde(flatten)]
    pub rules: SkimRules,
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default)]
    pub writer: WriterOptions,
    #[serde(default)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub strategy: Strategy,
    /// Keep the per-input files of [`Strategy::SeparateMerge`].
    #[serde(default)]
    pub keep_intermediate: bool,
}

fn one() -> usize {
    1
}

impl SkimConfig {
    /// Loads a JSON config; relative input and output paths are taken
    /// relative to the config file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for input in &mut config.inputs {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.inputs.is_empty() {
            return Err(Error::Config("no inputs".into()));
        }
        for r in &self.rules.entry_predicate {
            if !r.threshold.is_finite() {
                return Err(Error::Config(format!("threshold of `{}` is not finite", r.collection)));
            }
        }
        for f in &self.rules.element_filters {
            if !f.min.is_finite() {
                return Err(Error::Config(format!("minimum of `{}` is not finite", f.collection)));
            }
        }
        Ok(())
    }
}

/// Positions of record members leading from a value to a sub-value.
type IndexPath = Vec<usize>;

fn get<'a>(mut v: &'a Value, path: &[usize]) -> &'a Value {
    for &i in path {
        v = &v.as_record().expect("compiled against this schema")[i];
    }
    v
}

fn get_mut<'a>(mut v: &'a mut Value, path: &[usize]) -> &'a mut Value {
    for &i in path {
        match v {
            Value::Record(m) => v = &mut m[i],
            _ => unreachable!("compiled against this schema"),
        }
    }
    v
}

/// Member positions from `from` down to `field`; only records may be crossed.
fn record_path(tree: &FieldTree, from: usize, field: usize, what: &str) -> Result<IndexPath> {
    let mut path = Vec::new();
    let mut cur = field;
    while cur != from {
        let parent = tree.field(cur).parent.ok_or_else(|| Error::Config(format!("`{what}` is not below its collection")))?;
        if tree.field(parent).kind != FieldKind::Record {
            return Err(Error::Config(format!("`{what}` crosses a nested collection")));
        }
        path.push(tree.children(parent).iter().position(|&c| c == cur).expect("child of parent"));
        cur = parent;
    }
    path.reverse();
    Ok(path)
}

fn resolve_item_leaf(tree: &FieldTree, collection: &str, leaf: &str) -> Result<(IndexPath, IndexPath)> {
    let coll = tree
        .find(collection)
        .ok_or_else(|| Error::Config(format!("unknown collection `{collection}`")))?;
    if tree.field(coll).kind != FieldKind::Collection {
        return Err(Error::Config(format!("`{collection}` is not a collection")));
    }
    let coll_path = record_path(tree, 0, coll, collection)?;
    let item = tree.children(coll)[0];
    let full = if leaf.is_empty() { format!("{collection}.{ITEM_NAME}") } else { format!("{collection}.{ITEM_NAME}.{leaf}") };
    let leaf_field = tree.find(&full).ok_or_else(|| Error::Config(format!("unknown field `{full}`")))?;
    if tree.field(leaf_field).kind != FieldKind::Leaf {
        return Err(Error::Config(format!("`{full}` is not a numeric leaf")));
    }
    let leaf_path = record_path(tree, item, leaf_field, &full)?;
    Ok((coll_path, leaf_path))
}

#[derive(Debug, Clone)]
struct CompiledRule {
    collection: IndexPath,
    leaf: IndexPath,
    threshold: f64,
    min_count: usize,
}

#[derive(Debug, Clone)]
struct CompiledFilter {
    collection: IndexPath,
    leaf: IndexPath,
    min: f64,
}

/// Skim rules resolved against an input schema.
#[derive(Debug, Clone)]
pub struct CompiledSkim {
    read_paths: Vec<String>,
    read: Projection,
    output: Projection,
    rules: Vec<CompiledRule>,
    filters: Vec<CompiledFilter>,
}

impl CompiledSkim {
    pub fn compile(source: &FieldTree, rules: &SkimRules) -> Result<Self> {
        let config_err = |e: Error| match e {
            Error::UnknownField(p) => Error::Config(format!("unknown field `{p}`")),
            other => other,
        };
        let mut read_paths = Vec::new();
        if !rules.keep_fields.is_empty() {
            read_paths.extend(rules.keep_fields.iter().cloned());
            for r in &rules.entry_predicate {
                resolve_item_leaf(source, &r.collection, &r.leaf)?;
                read_paths.push(if r.leaf.is_empty() {
                    r.collection.clone()
                } else {
                    format!("{}.{ITEM_NAME}.{}", r.collection, r.leaf)
                });
            }
        }
        let read = source.project(&read_paths).map_err(config_err)?;
        let output = read.tree().project(&rules.keep_fields).map_err(config_err)?;
        let rules_c = rules
            .entry_predicate
            .iter()
            .map(|r| {
                let (collection, leaf) = resolve_item_leaf(read.tree(), &r.collection, &r.leaf)?;
                Ok(CompiledRule { collection, leaf, threshold: r.threshold, min_count: r.min_count })
            })
            .collect::<Result<_>>()?;
        let filters = rules
            .element_filters
            .iter()
            .map(|f| {
                let (collection, leaf) = resolve_item_leaf(output.tree(), &f.collection, &f.leaf)?;
                Ok(CompiledFilter { collection, leaf, min: f.min })
            })
            .collect::<Result<_>>()?;
        Ok(Self { read_paths, read, output, rules: rules_c, filters })
    }

    /// Field paths a reader has to materialize; empty means all.
    pub fn read_paths(&self) -> &[String] {
        &self.read_paths
    }

    pub fn read_schema(&self) -> &FieldTree {
        self.read.tree()
    }

    pub fn output_schema(&self) -> &FieldTree {
        self.output.tree()
    }

    /// Skims an entry of the full input schema.
    pub fn skim_entry(&self, entry: &Value) -> Option<Value> {
        self.skim_read_entry(&self.read.apply(entry))
    }

    /// Skims an entry already projected to [`read_schema`](Self::read_schema).
    pub fn skim_read_entry(&self, entry: &Value) -> Option<Value> {
        for r in &self.rules {
            let items = get(entry, &r.collection).as_collection().expect("collection");
            let passing = items
                .iter()
                .filter(|it| get(it, &r.leaf).as_f64().is_some_and(|x| x > r.threshold))
                .count();
            if passing < r.min_count {
                return None;
            }
        }
        let mut out = self.output.apply(entry);
        for f in &self.filters {
            if let Value::Collection(items) = get_mut(&mut out, &f.collection) {
                items.retain(|it| get(it, &f.leaf).as_f64().is_some_and(|x| x >= f.min));
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PartitionReport {
    pub name: String,
    pub inputs: usize,
    pub output: PathBuf,
    pub entries_in: u64,
    pub entries_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub uncompressed_in: u64,
    pub uncompressed_out: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkimReport {
    pub strategy: Strategy,
    pub threads: usize,
    pub partitions: Vec<PartitionReport>,
    /// Skimming (and writing) time.
    pub skim_seconds: f64,
    /// Post-processing merge time; zero except for `separate-merge`.
    pub merge_seconds: f64,
    pub wall_seconds: f64,
    /// Largest amount of output storage in use at any point.
    pub peak_storage_bytes: u64,
    pub output_bytes: u64,
}

struct Partition {
    name: String,
    inputs: Vec<usize>,
    compiled: CompiledSkim,
    bytes_in: u64,
    uncompressed_in: u64,
    entries_in: AtomicU64,
    entries_out: AtomicU64,
}

fn prepare(config: &SkimConfig) -> Result<Vec<Partition>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, input) in config.inputs.iter().enumerate() {
        groups
            .entry(input.partition.clone())
            .or_insert_with(|| {
                order.push(input.partition.clone());
                Vec::new()
            })
            .push(i);
    }
    order
        .into_iter()
        .map(|name| {
            let inputs = groups.remove(&name).expect("grouped");
            let mut schema: Option<FieldTree> = None;
            let (mut bytes_in, mut uncompressed_in) = (0, 0);
            for &i in &inputs {
                let r = Reader::open(&config.inputs[i].path)?;
                bytes_in += r.file_len();
                uncompressed_in += r.uncompressed_bytes();
                match &schema {
                    None => schema = Some(r.schema().clone()),
                    Some(s) if s != r.schema() => {
                        return Err(Error::SchemaMismatch(format!(
                            "{} differs from the other inputs of partition `{name}`",
                            config.inputs[i].path.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
            let compiled = CompiledSkim::compile(schema.as_ref().expect("non-empty group"), &config.rules)?;
            Ok(Partition {
                name,
                inputs,
                compiled,
                bytes_in,
                uncompressed_in,
                entries_in: AtomicU64::new(0),
                entries_out: AtomicU64::new(0),
            })
        })
        .collect()
}

fn skim_file(path: &Path, part: &Partition, fill: &mut dyn FnMut(&Value) -> Result<()>) -> Result<()> {
    let reader = Reader::open(path)?.with_projection(part.compiled.read_paths())?;
    let (mut n_in, mut n_out) = (0, 0);
    for e in reader.entries() {
        n_in += 1;
        if let Some(out) = part.compiled.skim_read_entry(&e?) {
            fill(&out)?;
            n_out += 1;
        }
    }
    part.entries_in.fetch_add(n_in, Ordering::Relaxed);
    part.entries_out.fetch_add(n_out, Ordering::Relaxed);
    Ok(())
}

fn output_path(dir: &Path, partition: &str) -> PathBuf {
    dir.join(format!("{partition}.mnt"))
}

/// Runs `jobs` on `threads` scoped workers pulling from a shared queue.
fn run_pool<S, F>(threads: usize, jobs: usize, init: impl Fn() -> S + Sync, work: F, done: impl Fn(S) -> Result<()> + Sync) -> Result<()>
where
    F: Fn(&mut S, usize) -> Result<()> + Sync,
{
    let next = AtomicUsize::new(0);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads.min(jobs.max(1)) {
            s.spawn(|| {
                let mut state = init();
                let result = (|| {
                    loop {
                        let j = next.fetch_add(1, Ordering::Relaxed);
                        if j >= jobs || first_error.lock().unwrap().is_some() {
                            break;
                        }
                        work(&mut state, j)?;
                    }
                    done(state)
                })();
                if let Err(e) = result {
                    first_error.lock().unwrap().get_or_insert(e);
                }
            });
        }
    });
    match first_error.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Runs the skim described by `config`.
pub fn run_skim(config: &SkimConfig) -> Result<SkimReport> {
    config.validate()?;
    let started = Instant::now();
    let parts = prepare(config)?;
    fs::create_dir_all(&config.output_dir)?;
    let writer_opts = config.writer.clone();
    let outputs: Vec<PathBuf> = parts.iter().map(|p| output_path(&config.output_dir, &p.name)).collect();
    let mut merge_seconds = 0.0;
    let mut peak_storage = 0u64;

    let skim_start = Instant::now();
    let stats: Vec<WriteStats> = match config.strategy {
        Strategy::Parallel => {
            let writers = parts
                .iter()
                .zip(&outputs)
                .map(|(p, out)| ParallelWriter::create_file(out, p.compiled.output_schema().clone(), writer_opts.clone()))
                .collect::<Result<Vec<_>>>()?;
            let jobs: Vec<(usize, usize)> = interleave(&parts);
            run_pool(
                config.threads,
                jobs.len(),
                HashMap::<usize, FillContext>::new,
                |contexts, j| {
                    let (p, input) = jobs[j];
                    let ctx = match contexts.entry(p) {
                        std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
                        std::collections::hash_map::Entry::Vacant(v) => v.insert(writers[p].create_context()?),
                    };
                    skim_file(&config.inputs[input].path, &parts[p], &mut |e| ctx.fill(e))
                },
                |contexts| contexts.into_values().try_for_each(FillContext::finish),
            )?;
            writers.into_iter().map(ParallelWriter::close).collect::<Result<_>>()?
        }
        Strategy::SeparateMerge => {
            let parts_dir = config.output_dir.join("separate");
            fs::create_dir_all(&parts_dir)?;
            let jobs: Vec<(usize, usize)> = interleave(&parts);
            let part_files: Vec<PathBuf> = jobs
                .iter()
                .map(|&(p, input)| parts_dir.join(format!("{}.{input}.mnt", parts[p].name)))
                .collect();
            run_pool(
                config.threads,
                jobs.len(),
                || (),
                |_, j| {
                    let (p, input) = jobs[j];
                    let schema = parts[p].compiled.output_schema().clone();
                    let mut w = SequentialWriter::create(
                        Arc::new(crate::format::sink::FileSink::create(&part_files[j])?),
                        schema,
                        writer_opts.clone(),
                    )?;
                    skim_file(&config.inputs[input].path, &parts[p], &mut |e| w.fill(e))?;
                    w.close().map(drop)
                },
                |_| Ok(()),
            )?;
            let intermediate: u64 = part_files.iter().map(|f| fs::metadata(f).map(|m| m.len())).sum::<std::io::Result<u64>>()?;
            let merge_start = Instant::now();
            let results: Vec<Mutex<Option<WriteStats>>> = parts.iter().map(|_| Mutex::new(None)).collect();
            run_pool(
                config.threads,
                parts.len(),
                || (),
                |_, p| {
                    let inputs: Vec<&Path> = jobs
                        .iter()
                        .zip(&part_files)
                        .filter(|((q, _), _)| *q == p)
                        .map(|(_, f)| f.as_path())
                        .collect();
                    let s = merge_files(&inputs, &outputs[p], writer_opts.clone())?;
                    *results[p].lock().unwrap() = Some(s);
                    Ok(())
                },
                |_| Ok(()),
            )?;
            merge_seconds = merge_start.elapsed().as_secs_f64();
            let merged: Vec<WriteStats> = results.into_iter().map(|m| m.into_inner().unwrap().expect("merged")).collect();
            peak_storage = intermediate + merged.iter().map(|s| s.bytes_written).sum::<u64>();
            if !config.keep_intermediate {
                fs::remove_dir_all(&parts_dir)?;
            }
            merged
        }
        Strategy::Imt => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let opts = WriterOptions { parallel_compression: true, ..writer_opts.clone() };
            pool.install(|| {
                parts
                    .par_iter()
                    .zip(outputs.par_iter())
                    .map(|(p, out)| {
                        let sink = Arc::new(crate::format::sink::FileSink::create(out)?);
                        let mut w = SequentialWriter::create(sink, p.compiled.output_schema().clone(), opts.clone())?;
                        for &input in &p.inputs {
                            skim_file(&config.inputs[input].path, p, &mut |e| w.fill(e))?;
                        }
                        w.close()
                    })
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };
    let total = skim_start.elapsed().as_secs_f64();
    let skim_seconds = total - merge_seconds;

    let partitions: Vec<PartitionReport> = parts
        .iter()
        .zip(&stats)
        .zip(&outputs)
        .map(|((p, s), out)| PartitionReport {
            name: p.name.clone(),
            inputs: p.inputs.len(),
            output: out.clone(),
            entries_in: p.entries_in.load(Ordering::Relaxed),
            entries_out: p.entries_out.load(Ordering::Relaxed),
            bytes_in: p.bytes_in,
            bytes_out: s.bytes_written,
            uncompressed_in: p.uncompressed_in,
            uncompressed_out: s.bytes_uncompressed,
        })
        .collect();
    let output_bytes = partitions.iter().map(|p| p.bytes_out).sum();
    Ok(SkimReport {
        strategy: config.strategy,
        threads: config.threads,
        partitions,
        skim_seconds,
        merge_seconds,
        wall_seconds: started.elapsed().as_secs_f64(),
        peak_storage_bytes: peak_storage.max(output_bytes),
        output_bytes,
    })
}

/// (partition, input) jobs, round-robin over partitions so that workers
/// spread across writers.
fn interleave(parts: &[Partition]) -> Vec<(usize, usize)> {
    let longest = parts.iter().map(|p| p.inputs.len()).max().unwrap_or(0);
    (0..longest)
        .flat_map(|k| parts.iter().enumerate().filter_map(move |(p, part)| part.inputs.get(k).map(|&i| (p, i))))
        .collect()
}

/// Concatenates same-schema files into a freshly clustered output.
pub fn merge_files<P: AsRef<Path>>(inputs: &[P], output: &Path, options: WriterOptions) -> Result<WriteStats> {
    let readers = inputs.iter().map(Reader::open).collect::<Result<Vec<_>>>()?;
    let first = readers.first().ok_or_else(|| Error::Config("nothing to merge".into()))?;
    for (r, p) in readers.iter().zip(inputs).skip(1) {
        if r.schema() != first.schema() {
            return Err(Error::SchemaMismatch(format!(
                "{} does not match {}",
                p.as_ref().display(),
                inputs[0].as_ref().display()
            )));
        }
    }
    let sink = Arc::new(crate::format::sink::FileSink::create(output)?);
    let mut w = SequentialWriter::create(sink, first.schema().clone(), options)?;
    for r in &readers {
        for e in r.entries() {
            w.fill(&e?)?;
        }
    }
    w.close()
}

/// Schema of the synthetic skimming inputs.
pub fn skim_input_schema() -> FieldTree {
    let spec = TypeSpec::parse("{id: i64, leptons: vec<{pt: f32}>, jets: vec<{pt: f32}>}").expect("static");
    FieldTree::build("Event", &spec).expect("static")
}

/// Partition names of the bundled nine-partition example.
pub const AGC_PARTITIONS: [&str; 9] = [
    "ttbar__nominal",
    "ttbar__scaledown",
    "ttbar__scaleup",
    "ttbar__ME_var",
    "ttbar__PS_var",
    "single_top_s_chan__nominal",
    "single_top_t_chan__nominal",
    "single_top_tW__nominal",
    "wjets__nominal",
];

/// Rules shaped like the analysis cuts: at least one lepton and four jets
/// above 20, and items below 20 dropped.
pub fn agc_rules() -> SkimRules {
    SkimRules {
        keep_fields: vec!["id".into(), "leptons".into(), "jets".into()],
        entry_predicate: vec![
            CountAtLeast { collection: "leptons".into(), leaf: "pt".into(), threshold: 20.0, min_count: 1 },
            CountAtLeast { collection: "jets".into(), leaf: "pt".into(), threshold: 20.0, min_count: 4 },
        ],
        element_filters: vec![
            ElementFilter { collection: "leptons".into(), leaf: "pt".into(), min: 20.0 },
            ElementFilter { collection: "jets".into(), leaf: "pt".into(), min: 20.0 },
        ],
    }
}

/// Generator for synthetic skimming inputs.
pub struct SkimEventGenerator {
    rng: ChaCha8Rng,
    next_id: i64,
    leptons: Poisson<f64>,
    jets: Poisson<f64>,
    pt: Uniform<f32>,
}

impl SkimEventGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            leptons: Poisson::new(1.5).expect("positive"),
            jets: Poisson::new(5.0).expect("positive"),
            pt: Uniform::new(0.0, 80.0).expect("range"),
        }
    }
}

impl Iterator for SkimEventGenerator {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        let collection = |n: f64, rng: &mut ChaCha8Rng| {
            Value::Collection((0..n as usize).map(|_| Value::Record(vec![Value::F32(self.pt.sample(rng))])).collect())
        };
        let nl = self.leptons.sample(&mut self.rng);
        let nj = self.jets.sample(&mut self.rng);
        let leptons = collection(nl, &mut self.rng);
        let jets = collection(nj, &mut self.rng);
        let id = self.next_id;
        self.next_id += 1;
        Some(Value::Record(vec![Value::I64(id), leptons, jets]))
    }
}

/// Writes `files_per_partition` inputs of `entries_per_file` synthetic events
/// for each partition into `dir`.
pub fn generate_inputs(
    dir: &Path,
    partitions: &[&str],
    files_per_partition: usize,
    entries_per_file: u64,
    seed: u64,
    options: &WriterOptions,
) -> Result<Vec<InputFile>> {
    fs::create_dir_all(dir)?;
    let schema = Arc::new(skim_input_schema());
    let jobs: Vec<(usize, usize)> = (0..partitions.len())
        .flat_map(|p| (0..files_per_partition).map(move |f| (p, f)))
        .collect();
    jobs.par_iter()
        .map(|&(p, f)| {
            let path = dir.join(format!("{}.{f}.mnt", partitions[p]));
            let sink = Arc::new(crate::format::sink::FileSink::create(&path)?);
            let mut w = SequentialWriter::create(sink, schema.clone(), options.clone())?;
            let stream_seed = seed ^ ((p as u64) << 32 | f as u64);
            for e in SkimEventGenerator::new(stream_seed).take(entries_per_file as usize) {
                w.fill(&e)?;
            }
            w.close()?;
            Ok(InputFile { path, partition: partitions[p].to_string() })
        })
        .collect()
}
