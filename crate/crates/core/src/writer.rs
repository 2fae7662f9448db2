// SPDX-License-Identifier: Apache-2.0

//! Page and cluster staging, and the sequential writer.
//!
//! A [`FillContext`] shreds entries into per-column open pages. Full pages are
//! sealed (compressed) right away, on the filling thread. Once the cluster
//! reaches its size target the context hands a [`SealedCluster`] to the
//! writer it belongs to. Nothing inside a sealed cluster depends on where it
//! will be placed in the file.

use std::sync::atomic::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{self, CodecId, Compression};
use crate::error::{Error, Result};
use crate::format::sink::Sink;
use crate::parwriter::{ParallelWriter, Shared, WriteStats};
use crate::schema::{FieldKind, FieldTree, LeafType, Value};

/// Unit of writing used by a [`ParallelWriter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WriteMode {
    /// Whole clusters: pages stay in memory until the cluster is committed.
    #[default]
    Buffered,
    /// Single pages: every sealed page is written immediately.
    Unbuffered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WriterOptions {
    pub target_page_bytes: u32,
    /// Uncompressed bytes after which a cluster is flushed.
    pub target_cluster_bytes: u64,
    /// Optional hard cap on entries per cluster, mostly for tests.
    pub max_entries_per_cluster: Option<u64>,
    pub compression: Compression,
    pub preallocate: bool,
    pub mode: WriteMode,
    /// Write page bytes after leaving the commit lock.
    pub decoupled_write: bool,
    /// Compress a cluster's pages in parallel (rayon) at seal time instead of
    /// eagerly on the filling thread.
    pub parallel_compression: bool,
}

impl Default for WriterOptions {
    fn default() -> Self {
        Self {
            target_page_bytes: 64 * 1024,
            target_cluster_bytes: 50 * 1024 * 1024,
            max_entries_per_cluster: None,
            compression: Compression::default(),
            preallocate: false,
            mode: WriteMode::Buffered,
            decoupled_write: false,
            parallel_compression: false,
        }
    }
}

impl WriterOptions {
    pub fn validate(&self, schema: &FieldTree) -> Result<()> {
        let widest = schema.columns().iter().map(|c| c.element_width()).max().unwrap_or(0);
        if (self.target_page_bytes as usize) < widest {
            return Err(Error::InvalidOptions(format!(
                "page size {} is smaller than an element ({widest} bytes)",
                self.target_page_bytes
            )));
        }
        if self.target_cluster_bytes < u64::from(self.target_page_bytes) {
            return Err(Error::InvalidOptions(format!(
                "cluster size {} is smaller than page size {}",
                self.target_cluster_bytes, self.target_page_bytes
            )));
        }
        if self.max_entries_per_cluster == Some(0) {
            return Err(Error::InvalidOptions("max_entries_per_cluster must be positive".into()));
        }
        Ok(())
    }
}

/// Where a sealed page's bytes currently live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PagePayload {
    /// Compressed (or stored) bytes awaiting commit.
    InMemory(Vec<u8>),
    /// Already written by an unbuffered commit.
    Written { file_offset: u64, on_disk_bytes: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedPage {
    pub n_elements: u32,
    pub uncompressed_bytes: u32,
    pub codec: CodecId,
    pub payload: PagePayload,
}

impl StagedPage {
    pub fn on_disk_bytes(&self) -> u32 {
        match &self.payload {
            PagePayload::InMemory(b) => b.len() as u32,
            PagePayload::Written { on_disk_bytes, .. } => *on_disk_bytes,
        }
    }

    pub fn bytes(&self) -> Option<&[u8]> {
        match &self.payload {
            PagePayload::InMemory(b) => Some(b),
            PagePayload::Written { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SealedColumn {
    pub n_elements: u64,
    pub pages: Vec<StagedPage>,
}

/// A finished, relocatable cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedCluster {
    pub n_entries: u64,
    pub columns: Vec<SealedColumn>,
}

impl SealedCluster {
    pub fn n_pages(&self) -> usize {
        self.columns.iter().map(|c| c.pages.len()).sum()
    }

    pub fn in_memory_bytes(&self) -> u64 {
        self.columns
            .iter()
            .flat_map(|c| &c.pages)
            .filter_map(StagedPage::bytes)
            .map(|b| b.len() as u64)
            .sum()
    }

    pub fn uncompressed_bytes(&self) -> u64 {
        self.columns
            .iter()
            .flat_map(|c| &c.pages)
            .map(|p| u64::from(p.uncompressed_bytes))
            .sum()
    }
}

#[derive(Debug)]
struct ColumnStage {
    capacity: usize,
    open: Vec<u8>,
    open_elements: u32,
    n_elements: u64,
    sealed: Vec<StagedPage>,
    /// Stored pages waiting for parallel compression at cluster seal.
    raw: Vec<usize>,
}

/// Per-thread staging area for one open cluster.
///
/// Contexts created by a [`ParallelWriter`] flush themselves into it when the
/// cluster is full; call [`finish`](Self::finish) to commit the remainder.
/// A context dropped while still holding entries counts as outstanding and
/// makes the writer's `close` fail.
pub struct FillContext {
    schema: Arc<FieldTree>,
    options: WriterOptions,
    columns: Vec<ColumnStage>,
    bases: Vec<u64>,
    n_entries: u64,
    uncompressed_bytes: u64,
    owner: Option<Arc<Shared>>,
    compress_calls: u64,
    /// Per-column `(open bytes, open elements, elements)` before the current entry.
    undo: Vec<(usize, u32, u64)>,
    undo_bases: Vec<u64>,
}

impl std::fmt::Debug for FillContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FillContext")
            .field("n_entries", &self.n_entries)
            .field("uncompressed_bytes", &self.uncompressed_bytes)
            .field("attached", &self.owner.is_some())
            .finish()
    }
}

impl FillContext {
    /// A context not attached to any writer; clusters are obtained with
    /// [`seal_cluster`](Self::seal_cluster).
    pub fn detached(schema: Arc<FieldTree>, options: WriterOptions) -> Result<Self> {
        options.validate(&schema)?;
        Ok(Self::with_owner(schema, options, None))
    }

    pub(crate) fn with_owner(schema: Arc<FieldTree>, options: WriterOptions, owner: Option<Arc<Shared>>) -> Self {
        let page = options.target_page_bytes as usize;
        let columns = schema
            .columns()
            .iter()
            .map(|c| {
                let capacity = page / c.element_width();
                ColumnStage {
                    capacity,
                    open: Vec::new(),
                    open_elements: 0,
                    n_elements: 0,
                    sealed: Vec::new(),
                    raw: Vec::new(),
                }
            })
            .collect();
        let bases = vec![0; schema.n_columns()];
        Self {
            schema,
            options,
            columns,
            bases,
            n_entries: 0,
            uncompressed_bytes: 0,
            owner,
            compress_calls: 0,
            undo: Vec::new(),
            undo_bases: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Arc<FieldTree> {
        &self.schema
    }

    pub fn n_entries(&self) -> u64 {
        self.n_entries
    }

    pub fn uncompressed_bytes(&self) -> u64 {
        self.uncompressed_bytes
    }

    /// Number of pages this context compressed so far.
    pub fn compress_calls(&self) -> u64 {
        self.compress_calls
    }

    fn unbuffered(&self) -> bool {
        self.owner.is_some() && self.options.mode == WriteMode::Unbuffered
    }

    pub fn fill(&mut self, entry: &Value) -> Result<()> {
        if let Some(owner) = &self.owner {
            owner.check_open()?;
        }
        self.undo.clear();
        self.undo.extend(self.columns.iter().map(|c| (c.open.len(), c.open_elements, c.n_elements)));
        self.undo_bases.clear();
        self.undo_bases.extend_from_slice(&self.bases);
        let Self { schema, columns, bases, .. } = self;
        let mut walk = Shred { tree: schema, columns, bases, added: 0, overfull: false };
        if !walk.field(0, entry) {
            self.rollback();
            return Err(self.schema.check_entry(entry).err().unwrap_or_else(|| Error::TypeMismatch {
                path: String::new(),
                reason: "entry does not match the schema".into(),
            }));
        }
        let (added, overfull) = (walk.added, walk.overfull);
        if overfull {
            let unbuffered = self.unbuffered();
            let Self { options, columns, owner, compress_calls, .. } = self;
            for (col, stage) in columns.iter_mut().enumerate() {
                if stage.open_elements as usize >= stage.capacity {
                    split_pages(stage, col, options, owner.as_deref(), unbuffered, compress_calls)?;
                }
            }
        }
        if self.n_entries == 0 {
            if let Some(owner) = &self.owner {
                owner.pending.fetch_add(1, Ordering::AcqRel);
            }
        }
        self.n_entries += 1;
        self.uncompressed_bytes += added;
        if self.owner.is_some() && self.cluster_full() {
            self.flush_cluster()?;
        }
        Ok(())
    }

    /// Restores the open pages to their state before the current entry.
    fn rollback(&mut self) {
        for (stage, &(len, open_elements, n_elements)) in self.columns.iter_mut().zip(&self.undo) {
            stage.open.truncate(len);
            stage.open_elements = open_elements;
            stage.n_elements = n_elements;
        }
        self.bases.copy_from_slice(&self.undo_bases);
    }

    fn cluster_full(&self) -> bool {
        self.uncompressed_bytes >= self.options.target_cluster_bytes
            || self.options.max_entries_per_cluster.is_some_and(|m| self.n_entries >= m)
    }

    /// Seals all open pages and returns the cluster; the context is reset.
    pub fn seal_cluster(&mut self) -> Result<SealedCluster> {
        if self.n_entries == 0 {
            return Err(Error::EmptyCluster);
        }
        let unbuffered = self.unbuffered();
        let Self { options, columns, owner, compress_calls, .. } = self;
        for (col, stage) in columns.iter_mut().enumerate() {
            if stage.open_elements > 0 {
                seal_page(stage, col, options, owner.as_deref(), unbuffered, compress_calls)?;
            }
        }
        if self.options.parallel_compression {
            self.compress_raw_pages()?;
        }
        let columns = self
            .columns
            .iter_mut()
            .map(|s| SealedColumn { n_elements: std::mem::take(&mut s.n_elements), pages: std::mem::take(&mut s.sealed) })
            .collect();
        let sealed = SealedCluster { n_entries: self.n_entries, columns };
        self.n_entries = 0;
        self.uncompressed_bytes = 0;
        self.bases.iter_mut().for_each(|b| *b = 0);
        if let Some(owner) = &self.owner {
            owner.pending.fetch_sub(1, Ordering::AcqRel);
        }
        Ok(sealed)
    }

    fn compress_raw_pages(&mut self) -> Result<()> {
        let compression = self.options.compression;
        let mut todo: Vec<&mut StagedPage> = Vec::new();
        for stage in &mut self.columns {
            let raw = std::mem::take(&mut stage.raw);
            let mut idx = raw.into_iter().peekable();
            for (i, page) in stage.sealed.iter_mut().enumerate() {
                if idx.peek() == Some(&i) {
                    idx.next();
                    todo.push(page);
                }
            }
        }
        if compression.codec != CodecId::None {
            self.compress_calls += todo.len() as u64;
        }
        todo.into_par_iter().try_for_each(|page| -> Result<()> {
            if let PagePayload::InMemory(bytes) = &mut page.payload {
                let (codec, out) = codec::compress_page(compression, std::mem::take(bytes))?;
                page.codec = codec;
                *bytes = out;
            }
            Ok(())
        })
    }

    /// Seals the current cluster and commits it to the owning writer.
    pub fn flush_cluster(&mut self) -> Result<()> {
        let owner = self.owner.clone().ok_or_else(|| {
            Error::InvalidOptions("detached context has no writer to flush into".into())
        })?;
        let sealed = self.seal_cluster()?;
        owner.commit_cluster(sealed)
    }

    /// Commits whatever is left and releases the context.
    pub fn finish(mut self) -> Result<()> {
        if self.n_entries > 0 {
            self.flush_cluster()?;
        }
        Ok(())
    }
}

/// Checks an entry against the schema while appending it to the open pages.
///
/// Pages may grow past their capacity during the walk; they are cut to size
/// once the whole entry is known to match, so a mismatch can be rolled back.
struct Shred<'a> {
    tree: &'a FieldTree,
    columns: &'a mut [ColumnStage],
    bases: &'a mut [u64],
    added: u64,
    overfull: bool,
}

impl Shred<'_> {
    fn field(&mut self, field: usize, value: &Value) -> bool {
        let f = self.tree.field(field);
        match value {
            Value::Record(members) => {
                let kids = self.tree.children(field);
                if f.kind != FieldKind::Record || kids.len() != members.len() {
                    return false;
                }
                kids.iter().zip(members).all(|(&c, v)| match v {
                    Value::Record(_) | Value::Collection(_) => self.field(c, v),
                    leaf => self.leaf(c, leaf),
                })
            }
            Value::Collection(items) => {
                if f.kind != FieldKind::Collection {
                    return false;
                }
                let col = self.column(field);
                self.bases[col] += items.len() as u64;
                let end = self.bases[col];
                self.push(col, end.to_le_bytes());
                let item = self.tree.children(field)[0];
                match self.tree.field(item).leaf_type {
                    Some(t) => {
                        let col = self.column(item);
                        match t {
                            LeafType::I32 => self.leaves::<4>(col, items, |v| match *v {
                                Value::I32(x) => Some(x.to_le_bytes()),
                                _ => None,
                            }),
                            LeafType::I64 => self.leaves::<8>(col, items, |v| match *v {
                                Value::I64(x) => Some(x.to_le_bytes()),
                                _ => None,
                            }),
                            LeafType::F32 => self.leaves::<4>(col, items, |v| match *v {
                                Value::F32(x) => Some(x.to_le_bytes()),
                                _ => None,
                            }),
                            LeafType::F64 => self.leaves::<8>(col, items, |v| match *v {
                                Value::F64(x) => Some(x.to_le_bytes()),
                                _ => None,
                            }),
                        }
                    }
                    None => items.iter().all(|v| self.field(item, v)),
                }
            }
            leaf => self.leaf(field, leaf),
        }
    }

    #[inline(always)]
    fn leaf(&mut self, field: usize, value: &Value) -> bool {
        let Some(t) = self.tree.field(field).leaf_type else {
            return false;
        };
        let col = self.column(field);
        match (t, value) {
            (LeafType::I32, &Value::I32(x)) => self.push(col, x.to_le_bytes()),
            (LeafType::I64, &Value::I64(x)) => self.push(col, x.to_le_bytes()),
            (LeafType::F32, &Value::F32(x)) => self.push(col, x.to_le_bytes()),
            (LeafType::F64, &Value::F64(x)) => self.push(col, x.to_le_bytes()),
            _ => return false,
        }
        true
    }

    #[inline]
    fn column(&self, field: usize) -> usize {
        self.tree.field_column(field).expect("non-record fields own a column")
    }

    /// Appends a run of leaf items; false if one has the wrong type.
    fn leaves<const N: usize>(&mut self, col: usize, items: &[Value], bytes: impl Fn(&Value) -> Option<[u8; N]>) -> bool {
        let stage = &mut self.columns[col];
        stage.open.reserve(if stage.open.capacity() == 0 { stage.capacity * N } else { items.len() * N });
        for v in items {
            let Some(b) = bytes(v) else {
                return false;
            };
            stage.open.extend_from_slice(&b);
        }
        stage.open_elements += items.len() as u32;
        stage.n_elements += items.len() as u64;
        self.added += (N * items.len()) as u64;
        self.overfull |= stage.open_elements as usize >= stage.capacity;
        true
    }

    #[inline(always)]
    fn push<const N: usize>(&mut self, col: usize, bytes: [u8; N]) {
        let stage = &mut self.columns[col];
        if stage.open.capacity() == 0 {
            stage.open.reserve_exact(stage.capacity * N);
        }
        stage.open.extend_from_slice(&bytes);
        stage.open_elements += 1;
        stage.n_elements += 1;
        self.added += N as u64;
        self.overfull |= stage.open_elements as usize >= stage.capacity;
    }
}

/// Seals every full page of an overfull column, keeping the remainder open.
fn split_pages(
    stage: &mut ColumnStage,
    column: usize,
    options: &WriterOptions,
    owner: Option<&Shared>,
    unbuffered: bool,
    compress_calls: &mut u64,
) -> Result<()> {
    let total = stage.open_elements as usize;
    let width = stage.open.len() / total;
    let page = stage.capacity * width;
    let full = total / stage.capacity;
    let mut rest = Vec::with_capacity(page);
    rest.extend_from_slice(&stage.open[full * page..]);
    let mut first = std::mem::take(&mut stage.open);
    let middle: Vec<Vec<u8>> = (1..full).map(|k| first[k * page..(k + 1) * page].to_vec()).collect();
    first.truncate(page);
    for bytes in std::iter::once(first).chain(middle) {
        stage.open = bytes;
        stage.open_elements = stage.capacity as u32;
        seal_page(stage, column, options, owner, unbuffered, compress_calls)?;
    }
    stage.open = rest;
    stage.open_elements = (total - full * stage.capacity) as u32;
    Ok(())
}

fn seal_page(
    stage: &mut ColumnStage,
    column: usize,
    options: &WriterOptions,
    owner: Option<&Shared>,
    unbuffered: bool,
    compress_calls: &mut u64,
) -> Result<()> {
    let n_elements = std::mem::take(&mut stage.open_elements);
    let raw = std::mem::take(&mut stage.open);
    let uncompressed_bytes = raw.len() as u32;
    if options.parallel_compression && !unbuffered {
        stage.raw.push(stage.sealed.len());
        stage.sealed.push(StagedPage {
            n_elements,
            uncompressed_bytes,
            codec: CodecId::None,
            payload: PagePayload::InMemory(raw),
        });
        return Ok(());
    }
    if options.compression.codec != CodecId::None {
        *compress_calls += 1;
    }
    let (codec, bytes) = codec::compress_page(options.compression, raw)?;
    let mut page = StagedPage { n_elements, uncompressed_bytes, codec, payload: PagePayload::InMemory(bytes) };
    if unbuffered {
        let owner = owner.expect("unbuffered contexts have an owner");
        let locator = owner.commit_page(column, &page)?;
        page.payload = PagePayload::Written {
            file_offset: locator.file_offset,
            on_disk_bytes: locator.on_disk_bytes,
        };
    }
    stage.sealed.push(page);
    Ok(())
}

/// Single-threaded writer: a [`ParallelWriter`] driven by one context.
pub struct SequentialWriter {
    writer: ParallelWriter,
    context: FillContext,
}

impl SequentialWriter {
    pub fn create(sink: Arc<dyn Sink>, schema: impl Into<Arc<FieldTree>>, mut options: WriterOptions) -> Result<Self> {
        options.mode = WriteMode::Buffered;
        let writer = ParallelWriter::create(sink, schema, options)?;
        let context = writer.create_context()?;
        Ok(Self { writer, context })
    }

    pub fn fill(&mut self, entry: &Value) -> Result<()> {
        self.context.fill(entry)
    }

    pub fn n_entries_committed(&self) -> u64 {
        self.writer.n_entries()
    }

    pub fn close(self) -> Result<WriteStats> {
        self.context.finish()?;
        self.writer.close()
    }
}

/// Writes `entries` in order into a new file on `sink`.
pub fn sequential_write<'a, I>(
    sink: Arc<dyn Sink>,
    schema: impl Into<Arc<FieldTree>>,
    options: WriterOptions,
    entries: I,
) -> Result<WriteStats>
where
    I: IntoIterator<Item = &'a Value>,
{
    let mut w = SequentialWriter::create(sink, schema, options)?;
    for e in entries {
        w.fill(e)?;
    }
    w.close()
}
