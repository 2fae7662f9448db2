// SPDX-License-Identifier: Apache-2.0

//! Reading files back.
//!
//! [`Reader::open`] validates trailer, header, footer checksum and the
//! footer's structural invariants before anything else is touched. Entries are
//! rebuilt one cluster at a time: the needed columns of a cluster are decoded
//! once, then collections are cut out of their child columns using the
//! cluster-local offsets (`[offset[i-1], offset[i])`, with `offset[-1] = 0`).

use std::fs::File;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::codec::{self, CodecId};
use crate::error::{Error, Result};
use crate::format::sink::Source;
use crate::format::{FileFooter, FileTrailer, Header, PageLocator, HEADER_FIXED_LEN, TRAILER_LEN};
use crate::schema::{ColumnDescriptor, ElementType, FieldKind, FieldTree, LeafType, Projection, Value};

/// Decoded elements of one column within one cluster.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    U64(Vec<u64>),
    I32(Vec<i32>),
    I64(Vec<i64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ColumnData {
    fn empty(t: ElementType) -> Self {
        match t {
            ElementType::U64 => Self::U64(Vec::new()),
            ElementType::Leaf(LeafType::I32) => Self::I32(Vec::new()),
            ElementType::Leaf(LeafType::I64) => Self::I64(Vec::new()),
            ElementType::Leaf(LeafType::F32) => Self::F32(Vec::new()),
            ElementType::Leaf(LeafType::F64) => Self::F64(Vec::new()),
        }
    }

    fn extend_le(&mut self, bytes: &[u8]) {
        match self {
            Self::U64(v) => v.extend(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()))),
            Self::I32(v) => v.extend(bytes.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap()))),
            Self::I64(v) => v.extend(bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap()))),
            Self::F32(v) => v.extend(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()))),
            Self::F64(v) => v.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()))),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::U64(v) => v.len(),
            Self::I32(v) => v.len(),
            Self::I64(v) => v.len(),
            Self::F32(v) => v.len(),
            Self::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn extend_from(&mut self, other: ColumnData) {
        match (self, other) {
            (Self::U64(a), Self::U64(b)) => a.extend(b),
            (Self::I32(a), Self::I32(b)) => a.extend(b),
            (Self::I64(a), Self::I64(b)) => a.extend(b),
            (Self::F32(a), Self::F32(b)) => a.extend(b),
            (Self::F64(a), Self::F64(b)) => a.extend(b),
            _ => unreachable!("same column"),
        }
    }

    fn value(&self, i: usize) -> Option<Value> {
        Some(match self {
            Self::I32(v) => Value::I32(*v.get(i)?),
            Self::I64(v) => Value::I64(*v.get(i)?),
            Self::F32(v) => Value::F32(*v.get(i)?),
            Self::F64(v) => Value::F64(*v.get(i)?),
            Self::U64(_) => return None,
        })
    }
}

/// The decoded columns of one cluster; unneeded columns are `None`.
#[derive(Debug, Clone)]
pub struct ClusterData {
    pub index: usize,
    pub first_entry: u64,
    pub n_entries: u64,
    pub columns: Vec<Option<ColumnData>>,
}

/// Read-only handle on a complete file. Safe to share between threads.
pub struct Reader {
    source: Arc<dyn Source>,
    header: Header,
    header_len: u64,
    footer: FileFooter,
    file_len: u64,
    projection: Option<Projection>,
    needed: Vec<bool>,
    pages_read: AtomicU64,
}

impl std::fmt::Debug for Reader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Reader")
            .field("entries", &self.n_entries())
            .field("clusters", &self.footer.clusters.len())
            .field("file_len", &self.file_len)
            .finish()
    }
}

impl Reader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_source(Arc::new(File::open(path)?))
    }

    pub fn from_source(source: Arc<dyn Source>) -> Result<Self> {
        let file_len = source.len()?;
        if file_len < (HEADER_FIXED_LEN + TRAILER_LEN) as u64 {
            return Err(Error::Incomplete(format!("file of {file_len} bytes")));
        }
        let mut tail = [0u8; TRAILER_LEN];
        source.read_at(file_len - TRAILER_LEN as u64, &mut tail)?;
        let trailer = FileTrailer::decode(&tail, file_len)?;

        let mut fixed = [0u8; HEADER_FIXED_LEN];
        source.read_at(0, &mut fixed)?;
        let (_, schema_len) = Header::decode_fixed(&fixed)?;
        let header_len = (HEADER_FIXED_LEN + schema_len) as u64;
        if header_len > trailer.footer_offset {
            return Err(Error::Corrupt("header overlaps footer".into()));
        }
        let mut head = vec![0u8; header_len as usize];
        source.read_at(0, &mut head)?;
        let header = Header::decode(&head)?;

        let footer_len = usize::try_from(trailer.footer_len)
            .map_err(|_| Error::Corrupt("footer length".into()))?;
        let mut footer_bytes = vec![0u8; footer_len];
        source.read_at(trailer.footer_offset, &mut footer_bytes)?;
        let footer = FileFooter::decode(&footer_bytes, header.schema.n_columns())?;
        footer.validate(&header.schema, header_len, trailer.footer_offset)?;

        let needed = vec![true; header.schema.n_columns()];
        Ok(Self {
            source,
            header,
            header_len,
            footer,
            file_len,
            projection: None,
            needed,
            pages_read: AtomicU64::new(0),
        })
    }

    /// Restricts reading to the given field paths (see [`FieldTree::project`]).
    pub fn with_projection<S: AsRef<str>>(mut self, keep: &[S]) -> Result<Self> {
        let projection = self.header.schema.project(keep)?;
        self.needed = projection.source_columns();
        self.projection = Some(projection);
        Ok(self)
    }

    /// Schema stored in the file.
    pub fn schema(&self) -> &FieldTree {
        &self.header.schema
    }

    /// Schema of the values this reader returns.
    pub fn output_schema(&self) -> &FieldTree {
        self.projection.as_ref().map_or(&self.header.schema, Projection::tree)
    }

    pub fn default_codec(&self) -> CodecId {
        self.header.codec
    }

    pub fn footer(&self) -> &FileFooter {
        &self.footer
    }

    pub fn header_len(&self) -> u64 {
        self.header_len
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn n_entries(&self) -> u64 {
        self.footer.n_entries()
    }

    /// Σ uncompressed page bytes over the whole file.
    pub fn uncompressed_bytes(&self) -> u64 {
        self.footer
            .clusters
            .iter()
            .flat_map(|c| &c.columns)
            .flat_map(|r| &r.pages)
            .map(|p| u64::from(p.uncompressed_bytes))
            .sum()
    }

    /// Pages loaded and decoded so far by this handle.
    pub fn pages_read(&self) -> u64 {
        self.pages_read.load(Ordering::Relaxed)
    }

    fn read_page(&self, desc: &ColumnDescriptor, p: &PageLocator, out: &mut ColumnData) -> Result<()> {
        let mut frame = vec![0u8; p.on_disk_bytes as usize];
        self.source.read_at(p.file_offset, &mut frame)?;
        self.pages_read.fetch_add(1, Ordering::Relaxed);
        let bytes = match p.codec {
            CodecId::None => frame,
            c => codec::decompress(c, &frame, p.uncompressed_bytes as usize)?,
        };
        debug_assert_eq!(bytes.len(), p.n_elements as usize * desc.element_width());
        out.extend_le(&bytes);
        Ok(())
    }

    /// Decodes the needed columns of cluster `index`.
    pub fn load_cluster(&self, index: usize) -> Result<ClusterData> {
        let c = self
            .footer
            .clusters
            .get(index)
            .ok_or_else(|| Error::IndexOutOfRange { index: index as u64, len: self.footer.clusters.len() as u64 })?;
        let schema = &self.header.schema;
        let mut columns = Vec::with_capacity(schema.n_columns());
        for (col, (range, desc)) in c.columns.iter().zip(schema.columns()).enumerate() {
            if !self.needed[col] {
                columns.push(None);
                continue;
            }
            let mut data = ColumnData::empty(desc.element_type);
            for p in &range.pages {
                self.read_page(desc, p, &mut data)?;
            }
            columns.push(Some(data));
        }
        Ok(ClusterData { index, first_entry: c.first_entry, n_entries: c.n_entries, columns })
    }

    /// All elements of one column, cluster after cluster. Offsets stay
    /// cluster-local.
    pub fn column_elements(&self, column: usize) -> Result<ColumnData> {
        let schema = &self.header.schema;
        let desc = schema
            .columns()
            .get(column)
            .ok_or_else(|| Error::IndexOutOfRange { index: column as u64, len: schema.n_columns() as u64 })?;
        let mut out = ColumnData::empty(desc.element_type);
        for c in &self.footer.clusters {
            let mut data = ColumnData::empty(desc.element_type);
            for p in &c.columns[column].pages {
                self.read_page(desc, p, &mut data)?;
            }
            out.extend_from(data);
        }
        Ok(out)
    }

    /// Rebuilds entry `local` of a loaded cluster.
    pub fn entry_in(&self, cluster: &ClusterData, local: u64) -> Result<Value> {
        if local >= cluster.n_entries {
            return Err(Error::IndexOutOfRange { index: local, len: cluster.n_entries });
        }
        self.unshred(cluster, 0, local as usize)
    }

    fn unshred(&self, cluster: &ClusterData, field: usize, index: usize) -> Result<Value> {
        let schema = &self.header.schema;
        let f = schema.field(field);
        let column = |id: usize| -> Result<&ColumnData> {
            cluster.columns[id]
                .as_ref()
                .ok_or_else(|| Error::Corrupt(format!("column {id} not loaded")))
        };
        let short = || Error::Corrupt(format!("cluster {} field `{}` is short", cluster.index, schema.path(field)));
        match f.kind {
            FieldKind::Leaf => {
                let col = schema.field_column(field).expect("leaves own a column");
                column(col)?.value(index).ok_or_else(short)
            }
            FieldKind::Record => {
                let mut members = Vec::with_capacity(schema.children(field).len());
                for &c in schema.children(field) {
                    if self.projection.as_ref().is_some_and(|p| !p.keeps_field(c)) {
                        continue;
                    }
                    members.push(self.unshred(cluster, c, index)?);
                }
                Ok(Value::Record(members))
            }
            FieldKind::Collection => {
                let col = schema.field_column(field).expect("collections own a column");
                let ColumnData::U64(offsets) = column(col)? else {
                    unreachable!("offset columns hold u64");
                };
                let end = *offsets.get(index).ok_or_else(short)?;
                let start = if index == 0 { 0 } else { offsets[index - 1] };
                if start > end {
                    return Err(Error::Corrupt(format!(
                        "cluster {} offsets of `{}` decrease",
                        cluster.index,
                        schema.path(field)
                    )));
                }
                let item = schema.children(field)[0];
                let mut items = Vec::with_capacity((end - start).min(1 << 16) as usize);
                for i in start..end {
                    items.push(self.unshred(cluster, item, i as usize)?);
                }
                Ok(Value::Collection(items))
            }
        }
    }

    fn cluster_of(&self, global: u64) -> Option<usize> {
        if global >= self.n_entries() {
            return None;
        }
        let k = self.footer.clusters.partition_point(|c| c.first_entry <= global);
        Some(k - 1)
    }

    /// Random access to one entry. Loads the whole cluster; use
    /// [`entries`](Self::entries) for scans.
    pub fn read_entry(&self, global: u64) -> Result<Value> {
        let k = self
            .cluster_of(global)
            .ok_or(Error::IndexOutOfRange { index: global, len: self.n_entries() })?;
        let cluster = self.load_cluster(k)?;
        self.entry_in(&cluster, global - cluster.first_entry)
    }

    /// Iterates over all entries in file order, decoding every page once.
    pub fn entries(&self) -> Entries<'_> {
        Entries { reader: self, cluster: None, next_cluster: 0, local: 0, failed: false }
    }

    /// Collects every entry.
    pub fn read_all(&self) -> Result<Vec<Value>> {
        self.entries().collect()
    }
}

/// Cluster-sequential entry iterator.
pub struct Entries<'a> {
    reader: &'a Reader,
    cluster: Option<ClusterData>,
    next_cluster: usize,
    local: u64,
    failed: bool,
}

impl Iterator for Entries<'_> {
    type Item = Result<Value>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if let Some(c) = &self.cluster {
                if self.local < c.n_entries {
                    let r = self.reader.entry_in(c, self.local);
                    self.local += 1;
                    self.failed = r.is_err();
                    return Some(r);
                }
            }
            if self.next_cluster >= self.reader.footer.clusters.len() {
                return None;
            }
            match self.reader.load_cluster(self.next_cluster) {
                Ok(c) => self.cluster = Some(c),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
            self.next_cluster += 1;
            self.local = 0;
        }
    }
}
