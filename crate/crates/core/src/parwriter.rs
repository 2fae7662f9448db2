// SPDX-License-Identifier: Apache-2.0

//! Multithreaded writing of one file.
//!
//! Threads fill their own [`FillContext`]s without any coordination. Only
//! committing needs the writer's exclusion region, once per cluster in
//! buffered mode:
//!
//! 1. reserve the cluster's on-disk bytes at the end of the file,
//! 2. assign the next entry range and per-column element ranges,
//! 3. write the pages at their offsets (or after leaving the region, with
//!    `decoupled_write`),
//! 4. append the cluster descriptor.
//!
//! Cluster order in the file is commit order. In unbuffered mode every page
//! takes the region on its own and the descriptor is committed at the end of
//! the cluster, which is where lock contention comes from.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::format::sink::{FileSink, Sink};
use crate::format::{self, ClusterDescriptor, ColumnRange, Container, FileFooter, PageLocator};
use crate::schema::FieldTree;
use crate::sync::CommitLock;
use crate::writer::{FillContext, PagePayload, SealedCluster, StagedPage, WriteMode, WriterOptions};

/// Summary returned by [`ParallelWriter::close`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteStats {
    pub mode: WriteMode,
    pub entries: u64,
    pub clusters: u64,
    pub pages: u64,
    /// On-disk page bytes.
    pub bytes_compressed: u64,
    /// Uncompressed page bytes.
    pub bytes_uncompressed: u64,
    /// Everything that reached the sink, header and footer included.
    pub bytes_written: u64,
    pub lock_acquisitions: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Default)]
struct CommitState {
    clusters: Vec<ClusterDescriptor>,
    n_entries: u64,
    column_elements: Vec<u64>,
    bytes_compressed: u64,
    bytes_uncompressed: u64,
    pages: u64,
}

pub(crate) struct Shared {
    container: Container,
    schema: Arc<FieldTree>,
    options: WriterOptions,
    state: CommitLock<CommitState>,
    closed: AtomicBool,
    poisoned: AtomicBool,
    pub(crate) pending: AtomicUsize,
    n_entries: AtomicU64,
    started: Instant,
}

impl Shared {
    pub(crate) fn check_open(&self) -> Result<()> {
        if self.closed.load(Ordering::Acquire) {
            return Err(Error::WriterClosed);
        }
        if self.poisoned.load(Ordering::Acquire) {
            return Err(Error::WriterPoisoned);
        }
        Ok(())
    }

    fn poison<T>(&self, r: Result<T>) -> Result<T> {
        if r.is_err() {
            self.poisoned.store(true, Ordering::Release);
        }
        r
    }

    pub(crate) fn commit_cluster(&self, sealed: SealedCluster) -> Result<()> {
        self.check_open()?;
        if sealed.columns.len() != self.schema.n_columns() {
            return Err(Error::ForeignCluster(format!(
                "{} columns, schema has {}",
                sealed.columns.len(),
                self.schema.n_columns()
            )));
        }
        if sealed.n_entries == 0 {
            return Err(Error::EmptyCluster);
        }
        let total = sealed.in_memory_bytes();
        let mut writes: Vec<(u64, &[u8])> = Vec::new();
        {
            let mut st = self.state.lock();
            self.check_open()?;
            let mut cursor = if total > 0 {
                self.poison(self.container.append_reserved(total))?
            } else {
                0
            };
            if st.column_elements.is_empty() {
                st.column_elements = vec![0; self.schema.n_columns()];
            }
            let mut columns = Vec::with_capacity(sealed.columns.len());
            for (col, sc) in sealed.columns.iter().enumerate() {
                let mut pages = Vec::with_capacity(sc.pages.len());
                for p in &sc.pages {
                    let file_offset = match &p.payload {
                        PagePayload::InMemory(bytes) => {
                            let at = cursor;
                            cursor += bytes.len() as u64;
                            writes.push((at, bytes));
                            at
                        }
                        PagePayload::Written { file_offset, .. } => *file_offset,
                    };
                    pages.push(PageLocator {
                        file_offset,
                        on_disk_bytes: p.on_disk_bytes(),
                        uncompressed_bytes: p.uncompressed_bytes,
                        n_elements: p.n_elements,
                        codec: p.codec,
                    });
                    st.bytes_uncompressed += u64::from(p.uncompressed_bytes);
                    if matches!(p.payload, PagePayload::InMemory(_)) {
                        st.bytes_compressed += u64::from(p.on_disk_bytes());
                        st.pages += 1;
                    }
                }
                columns.push(ColumnRange { first_element: st.column_elements[col], n_elements: sc.n_elements, pages });
                st.column_elements[col] += sc.n_elements;
            }
            if !self.options.decoupled_write {
                for &(at, bytes) in &writes {
                    self.poison(self.container.write_at(at, bytes))?;
                }
            }
            let first_entry = st.n_entries;
            st.clusters.push(ClusterDescriptor { first_entry, n_entries: sealed.n_entries, columns });
            st.n_entries += sealed.n_entries;
            self.n_entries.store(st.n_entries, Ordering::Relaxed);
        }
        if self.options.decoupled_write {
            for &(at, bytes) in &writes {
                self.poison(self.container.write_at(at, bytes))?;
            }
        }
        Ok(())
    }

    pub(crate) fn commit_page(&self, _column: usize, page: &StagedPage) -> Result<PageLocator> {
        self.check_open()?;
        if page.n_elements == 0 {
            return Err(Error::EmptyPage);
        }
        let bytes = page
            .bytes()
            .ok_or_else(|| Error::InvalidOptions("page was already written".into()))?;
        let locator;
        {
            let mut st = self.state.lock();
            let at = self.poison(self.container.append_reserved(bytes.len() as u64))?;
            if !self.options.decoupled_write {
                self.poison(self.container.write_at(at, bytes))?;
            }
            st.bytes_compressed += bytes.len() as u64;
            st.pages += 1;
            locator = PageLocator {
                file_offset: at,
                on_disk_bytes: bytes.len() as u32,
                uncompressed_bytes: page.uncompressed_bytes,
                n_elements: page.n_elements,
                codec: page.codec,
            };
        }
        if self.options.decoupled_write {
            self.poison(self.container.write_at(locator.file_offset, bytes))?;
        }
        Ok(locator)
    }
}

/// Shared handle for writing one file from many threads.
pub struct ParallelWriter {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for ParallelWriter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelWriter")
            .field("container", &self.shared.container)
            .field("n_entries", &self.n_entries())
            .finish()
    }
}

impl ParallelWriter {
    /// Starts a new file on `sink` and writes its header.
    pub fn create(sink: Arc<dyn Sink>, schema: impl Into<Arc<FieldTree>>, options: WriterOptions) -> Result<Self> {
        let schema = schema.into();
        options.validate(&schema)?;
        let container = Container::new(sink, options.preallocate);
        format::write_header(&container, &schema, options.compression.codec)?;
        let shared = Shared {
            container,
            schema,
            options,
            state: CommitLock::new(CommitState::default()),
            closed: AtomicBool::new(false),
            poisoned: AtomicBool::new(false),
            pending: AtomicUsize::new(0),
            n_entries: AtomicU64::new(0),
            started: Instant::now(),
        };
        Ok(Self { shared: Arc::new(shared) })
    }

    pub fn create_file(path: impl AsRef<Path>, schema: impl Into<Arc<FieldTree>>, options: WriterOptions) -> Result<Self> {
        Self::create(Arc::new(FileSink::create(path)?), schema, options)
    }

    pub fn schema(&self) -> &Arc<FieldTree> {
        &self.shared.schema
    }

    pub fn options(&self) -> &WriterOptions {
        &self.shared.options
    }

    /// A fresh context; any number may exist at once.
    pub fn create_context(&self) -> Result<FillContext> {
        self.shared.check_open()?;
        Ok(FillContext::with_owner(
            self.shared.schema.clone(),
            self.shared.options.clone(),
            Some(self.shared.clone()),
        ))
    }

    /// Commits a sealed cluster: one acquisition of the exclusion region.
    pub fn commit_cluster(&self, sealed: SealedCluster) -> Result<()> {
        self.shared.commit_cluster(sealed)
    }

    /// Writes one compressed page immediately and returns where it went.
    pub fn commit_page(&self, column: usize, codec: CodecId, bytes: Vec<u8>, uncompressed_bytes: u32, n_elements: u32) -> Result<PageLocator> {
        if column >= self.shared.schema.n_columns() {
            return Err(Error::ForeignCluster(format!("column {column} out of range")));
        }
        let page = StagedPage { n_elements, uncompressed_bytes, codec, payload: PagePayload::InMemory(bytes) };
        self.shared.commit_page(column, &page)
    }

    /// Exclusion-region acquisitions so far.
    pub fn lock_acquisitions(&self) -> u64 {
        self.shared.state.acquisitions()
    }

    /// Entries committed so far.
    pub fn n_entries(&self) -> u64 {
        self.shared.n_entries.load(Ordering::Relaxed)
    }

    pub fn bytes_written(&self) -> u64 {
        self.shared.container.bytes_written()
    }

    /// Writes footer and trailer. Fails if a context still holds entries.
    pub fn close(self) -> Result<WriteStats> {
        let sh = &self.shared;
        let st = sh.state.lock();
        if sh.poisoned.load(Ordering::Acquire) {
            return Err(Error::WriterPoisoned);
        }
        if sh.closed.load(Ordering::Acquire) {
            return Err(Error::WriterClosed);
        }
        let pending = sh.pending.load(Ordering::Acquire);
        if pending > 0 {
            return Err(Error::OutstandingContexts(pending));
        }
        sh.closed.store(true, Ordering::Release);
        let footer = FileFooter { clusters: st.clusters.clone() };
        sh.poison(format::write_footer_and_trailer(&sh.container, &footer))?;
        sh.poison(sh.container.flush())?;
        Ok(WriteStats {
            mode: sh.options.mode,
            entries: st.n_entries,
            clusters: st.clusters.len() as u64,
            pages: st.pages,
            bytes_compressed: st.bytes_compressed,
            bytes_uncompressed: st.bytes_uncompressed,
            bytes_written: sh.container.bytes_written(),
            lock_acquisitions: sh.state.acquisitions(),
            wall_seconds: sh.started.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Compression;
    use crate::format::sink::{MemSink, NullSink};
    use crate::reader::Reader;
    use crate::schema::{TypeSpec, Value};
    use std::io;

    fn schema() -> Arc<FieldTree> {
        Arc::new(FieldTree::build("e", &TypeSpec::parse("{id: i64, v: vec<f32>}").unwrap()).unwrap())
    }

    fn entry(id: i64) -> Value {
        Value::Record(vec![
            Value::I64(id),
            Value::Collection((0..id % 4).map(|k| Value::F32(k as f32 + 0.5)).collect()),
        ])
    }

    fn opts() -> WriterOptions {
        WriterOptions { max_entries_per_cluster: Some(3), ..Default::default() }
    }

    #[test]
    fn two_threads_commit_in_some_order() {
        let sink = MemSink::new();
        let w = ParallelWriter::create(Arc::new(sink.clone()), schema(), WriterOptions::default()).unwrap();
        std::thread::scope(|s| {
            for (start, n) in [(0, 3), (100, 5)] {
                let w = &w;
                s.spawn(move || {
                    let mut ctx = w.create_context().unwrap();
                    for i in 0..n {
                        ctx.fill(&entry(start + i)).unwrap();
                    }
                    ctx.finish().unwrap();
                });
            }
        });
        let stats = w.close().unwrap();
        assert_eq!(stats.entries, 8);
        assert_eq!(stats.lock_acquisitions, 3);
        let r = Reader::from_source(Arc::new(sink.to_vec())).unwrap();
        let ranges: Vec<_> = r.footer().clusters.iter().map(|c| (c.first_entry, c.n_entries)).collect();
        assert!(ranges == vec![(0, 3), (3, 5)] || ranges == vec![(0, 5), (5, 3)], "{ranges:?}");
    }

    #[test]
    fn buffered_lock_budget() {
        let w = ParallelWriter::create(Arc::new(NullSink::new()), schema(), opts()).unwrap();
        let mut ctx = w.create_context().unwrap();
        for i in 0..10 {
            ctx.fill(&entry(i)).unwrap();
        }
        ctx.finish().unwrap();
        let stats = w.close().unwrap();
        assert_eq!(stats.clusters, 4);
        assert_eq!(stats.lock_acquisitions, stats.clusters + 1);
    }

    #[test]
    fn unbuffered_locks_per_page() {
        let o = WriterOptions {
            mode: WriteMode::Unbuffered,
            target_page_bytes: 16,
            target_cluster_bytes: 1 << 20,
            ..Default::default()
        };
        let w = ParallelWriter::create(Arc::new(NullSink::new()), schema(), o).unwrap();
        let mut ctx = w.create_context().unwrap();
        for i in 0..40 {
            ctx.fill(&entry(i)).unwrap();
        }
        let before = w.lock_acquisitions();
        assert!(before > 0, "pages are committed while filling");
        let sealed = ctx.seal_cluster().unwrap();
        let pages = sealed.n_pages() as u64;
        w.commit_cluster(sealed).unwrap();
        assert_eq!(w.lock_acquisitions(), pages + 1);
        let stats = w.close().unwrap();
        assert_eq!(stats.pages, pages);
    }

    #[test]
    fn zero_element_page_rejected() {
        let w = ParallelWriter::create(Arc::new(NullSink::new()), schema(), WriterOptions::default()).unwrap();
        assert!(matches!(w.commit_page(0, CodecId::None, vec![], 0, 0), Err(Error::EmptyPage)));
    }

    #[test]
    fn close_rules() {
        let w = ParallelWriter::create(Arc::new(NullSink::new()), schema(), WriterOptions::default()).unwrap();
        let mut ctx = w.create_context().unwrap();
        ctx.fill(&entry(1)).unwrap();
        assert!(matches!(w.close(), Err(Error::OutstandingContexts(1))));
        drop(ctx);

        let w = ParallelWriter::create(Arc::new(NullSink::new()), schema(), WriterOptions::default()).unwrap();
        let mut ctx = w.create_context().unwrap();
        let stats = w.close().unwrap();
        assert_eq!(stats.entries, 0);
        assert!(matches!(ctx.fill(&entry(1)), Err(Error::WriterClosed)));
    }

    struct FailingSink {
        after: AtomicUsize,
    }

    impl Sink for FailingSink {
        fn write_at(&self, _: u64, _: &[u8]) -> io::Result<()> {
            if self.after.fetch_sub(1, Ordering::SeqCst) == 0 {
                self.after.store(0, Ordering::SeqCst);
                return Err(io::Error::other("disk on fire"));
            }
            Ok(())
        }
    }

    #[test]
    fn io_error_poisons() {
        let sink = Arc::new(FailingSink { after: AtomicUsize::new(1) });
        let w = ParallelWriter::create(sink, schema(), opts()).unwrap();
        let mut ctx = w.create_context().unwrap();
        let mut saw_error = false;
        for i in 0..9 {
            if ctx.fill(&entry(i)).is_err() {
                saw_error = true;
                break;
            }
        }
        assert!(saw_error);
        assert!(matches!(w.create_context(), Err(Error::WriterPoisoned)));
        assert!(matches!(w.close(), Err(Error::WriterPoisoned)));
    }

    #[test]
    fn decoupled_write_same_bytes() {
        let run = |decoupled: bool| {
            let sink = MemSink::new();
            let o = WriterOptions { decoupled_write: decoupled, compression: Compression::default(), ..opts() };
            let w = ParallelWriter::create(Arc::new(sink.clone()), schema(), o).unwrap();
            let mut ctx = w.create_context().unwrap();
            for i in 0..20 {
                ctx.fill(&entry(i)).unwrap();
            }
            ctx.finish().unwrap();
            w.close().unwrap();
            sink.to_vec()
        };
        assert_eq!(run(false), run(true));
    }
}
