// SPDX-License-Identifier: Apache-2.0

//! The on-disk container.
//!
//! All integers are little-endian.
//!
//! ```text
//! header   "MNT1" | u16 version=1 | u16 flags=0 | u8 codec | 3 reserved
//!          | u32 schema_len | schema bytes
//! pages    raw or compressed element arrays, no per-page framing
//! footer   u32 n_clusters, then per cluster
//!            u64 first_entry | u64 n_entries
//!            per column: u64 first_element | u64 n_elements | u32 n_pages
//!              per page: u64 file_offset | u32 on_disk | u32 uncompressed
//!                        | u32 n_elements | u8 codec
//!          u32 crc32c of everything above
//! trailer  u64 footer_offset | u64 footer_len | "MNTF"
//! ```
//!
//! `footer_len` includes the checksum, so `footer_offset + footer_len + 20`
//! is the file size.

pub mod sink;

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::schema::FieldTree;
use sink::Sink;

pub const HEADER_MAGIC: [u8; 4] = *b"MNT1";
pub const TRAILER_MAGIC: [u8; 4] = *b"MNTF";
pub const VERSION: u16 = 1;
pub const HEADER_FIXED_LEN: usize = 16;
pub const TRAILER_LEN: usize = 20;

const PAGE_LOCATOR_LEN: usize = 8 + 4 + 4 + 4 + 1;
const COLUMN_RANGE_FIXED_LEN: usize = 8 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageLocator {
    pub file_offset: u64,
    pub on_disk_bytes: u32,
    pub uncompressed_bytes: u32,
    pub n_elements: u32,
    pub codec: CodecId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnRange {
    pub first_element: u64,
    pub n_elements: u64,
    pub pages: Vec<PageLocator>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterDescriptor {
    pub first_entry: u64,
    pub n_entries: u64,
    pub columns: Vec<ColumnRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileFooter {
    pub clusters: Vec<ClusterDescriptor>,
}

impl FileFooter {
    pub fn n_entries(&self) -> u64 {
        self.clusters.iter().map(|c| c.n_entries).sum()
    }

    pub fn n_pages(&self) -> usize {
        self.clusters
            .iter()
            .flat_map(|c| &c.columns)
            .map(|r| r.pages.len())
            .sum()
    }

    /// Serialized footer including the trailing checksum.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.clusters.len() as u32).to_le_bytes());
        for c in &self.clusters {
            out.extend_from_slice(&c.first_entry.to_le_bytes());
            out.extend_from_slice(&c.n_entries.to_le_bytes());
            for r in &c.columns {
                out.extend_from_slice(&r.first_element.to_le_bytes());
                out.extend_from_slice(&r.n_elements.to_le_bytes());
                out.extend_from_slice(&(r.pages.len() as u32).to_le_bytes());
                for p in &r.pages {
                    out.extend_from_slice(&p.file_offset.to_le_bytes());
                    out.extend_from_slice(&p.on_disk_bytes.to_le_bytes());
                    out.extend_from_slice(&p.uncompressed_bytes.to_le_bytes());
                    out.extend_from_slice(&p.n_elements.to_le_bytes());
                    out.push(p.codec as u8);
                }
            }
        }
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses a footer for a schema with `n_columns` columns. Verifies the
    /// checksum first; structural checks live in [`FileFooter::validate`].
    pub fn decode(bytes: &[u8], n_columns: usize) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Corrupt(format!("footer of {} bytes", bytes.len())));
        }
        let (payload, crc) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc.try_into().expect("4 bytes"));
        let computed = crc32c::crc32c(payload);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = ByteReader::new(payload);
        let n_clusters = r.u32()? as usize;
        let min_cluster = 16 + n_columns * COLUMN_RANGE_FIXED_LEN;
        if n_clusters.saturating_mul(min_cluster) > r.remaining() {
            return Err(Error::Corrupt(format!("{n_clusters} clusters do not fit the footer")));
        }
        let mut clusters = Vec::with_capacity(n_clusters);
        for _ in 0..n_clusters {
            let first_entry = r.u64()?;
            let n_entries = r.u64()?;
            let mut columns = Vec::with_capacity(n_columns);
            for _ in 0..n_columns {
                let first_element = r.u64()?;
                let n_elements = r.u64()?;
                let n_pages = r.u32()? as usize;
                if n_pages.saturating_mul(PAGE_LOCATOR_LEN) > r.remaining() {
                    return Err(Error::Corrupt(format!("{n_pages} pages do not fit the footer")));
                }
                let mut pages = Vec::with_capacity(n_pages);
                for _ in 0..n_pages {
                    pages.push(PageLocator {
                        file_offset: r.u64()?,
                        on_disk_bytes: r.u32()?,
                        uncompressed_bytes: r.u32()?,
                        n_elements: r.u32()?,
                        codec: CodecId::try_from(r.u8()?)?,
                    });
                }
                columns.push(ColumnRange { first_element, n_elements, pages });
            }
            clusters.push(ClusterDescriptor { first_entry, n_entries, columns });
        }
        if r.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing footer bytes", r.remaining())));
        }
        Ok(Self { clusters })
    }

    /// Checks the structural invariants against the schema and the byte
    /// range `[data_start, data_end)` that pages must fall into.
    pub fn validate(&self, schema: &FieldTree, data_start: u64, data_end: u64) -> Result<()> {
        let corrupt = |m: String| Err(Error::Corrupt(m));
        let n_columns = schema.n_columns();
        let mut next_entry = 0u64;
        let mut next_element = vec![0u64; n_columns];
        let mut extents = Vec::new();
        for (k, c) in self.clusters.iter().enumerate() {
            if c.first_entry != next_entry {
                return corrupt(format!("cluster {k} starts at entry {}, expected {next_entry}", c.first_entry));
            }
            if c.n_entries == 0 {
                return corrupt(format!("cluster {k} is empty"));
            }
            if c.columns.len() != n_columns {
                return corrupt(format!("cluster {k} has {} columns", c.columns.len()));
            }
            next_entry = next_entry
                .checked_add(c.n_entries)
                .ok_or_else(|| Error::Corrupt("entry count overflow".into()))?;
            for (col, (r, desc)) in c.columns.iter().zip(schema.columns()).enumerate() {
                if r.first_element != next_element[col] {
                    return corrupt(format!(
                        "cluster {k} column {col} starts at element {}, expected {}",
                        r.first_element, next_element[col]
                    ));
                }
                if !schema.is_nested(desc.source_field) && r.n_elements != c.n_entries {
                    return corrupt(format!(
                        "cluster {k} column {col} has {} elements for {} entries",
                        r.n_elements, c.n_entries
                    ));
                }
                let mut sum = 0u64;
                for p in &r.pages {
                    if p.n_elements == 0 {
                        return corrupt(format!("cluster {k} column {col} has an empty page"));
                    }
                    sum += u64::from(p.n_elements);
                    let expected = u64::from(p.n_elements) * desc.element_width() as u64;
                    if u64::from(p.uncompressed_bytes) != expected {
                        return corrupt(format!(
                            "page at {} claims {} uncompressed bytes, expected {expected}",
                            p.file_offset, p.uncompressed_bytes
                        ));
                    }
                    let size_ok = match p.codec {
                        CodecId::None => p.on_disk_bytes == p.uncompressed_bytes,
                        _ => p.on_disk_bytes <= p.uncompressed_bytes && p.on_disk_bytes > 0,
                    };
                    if !size_ok {
                        return corrupt(format!("page at {} has inconsistent sizes", p.file_offset));
                    }
                    let end = p.file_offset.checked_add(u64::from(p.on_disk_bytes));
                    if p.file_offset < data_start || end.map_or(true, |e| e > data_end) {
                        return corrupt(format!("page at {} lies outside the data region", p.file_offset));
                    }
                    extents.push((p.file_offset, u64::from(p.on_disk_bytes)));
                }
                if sum != r.n_elements {
                    return corrupt(format!(
                        "cluster {k} column {col} pages hold {sum} elements, range says {}",
                        r.n_elements
                    ));
                }
                next_element[col] += r.n_elements;
            }
        }
        extents.sort_unstable();
        for w in extents.windows(2) {
            if w[0].0 + w[0].1 > w[1].0 {
                return corrupt(format!("pages at {} and {} overlap", w[0].0, w[1].0));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileTrailer {
    pub footer_offset: u64,
    pub footer_len: u64,
}

impl FileTrailer {
    pub fn encode(&self) -> [u8; TRAILER_LEN] {
        let mut out = [0u8; TRAILER_LEN];
        out[0..8].copy_from_slice(&self.footer_offset.to_le_bytes());
        out[8..16].copy_from_slice(&self.footer_len.to_le_bytes());
        out[16..20].copy_from_slice(&TRAILER_MAGIC);
        out
    }

    /// Parses the last 20 bytes of a file of `file_len` bytes.
    pub fn decode(bytes: &[u8; TRAILER_LEN], file_len: u64) -> Result<Self> {
        if bytes[16..20] != TRAILER_MAGIC {
            return Err(Error::Incomplete("trailer magic missing".into()));
        }
        let t = Self {
            footer_offset: u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")),
            footer_len: u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")),
        };
        let end = t
            .footer_offset
            .checked_add(t.footer_len)
            .and_then(|e| e.checked_add(TRAILER_LEN as u64));
        if end != Some(file_len) {
            return Err(Error::Incomplete(format!(
                "trailer describes footer [{}, +{}) in a file of {file_len} bytes",
                t.footer_offset, t.footer_len
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub codec: CodecId,
    pub schema: FieldTree,
}

impl Header {
    pub fn encode(&self) -> Vec<u8> {
        let schema = self.schema.encode();
        let mut out = Vec::with_capacity(HEADER_FIXED_LEN + schema.len());
        out.extend_from_slice(&HEADER_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.push(self.codec as u8);
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(schema.len() as u32).to_le_bytes());
        out.extend_from_slice(&schema);
        out
    }

    /// Parses the fixed part, returning the schema length still to be read.
    pub fn decode_fixed(bytes: &[u8; HEADER_FIXED_LEN]) -> Result<(CodecId, usize)> {
        if bytes[0..4] != HEADER_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let codec = CodecId::try_from(bytes[8])?;
        let schema_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        Ok((codec, schema_len))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let fixed: &[u8; HEADER_FIXED_LEN] = bytes
            .get(..HEADER_FIXED_LEN)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Incomplete("header truncated".into()))?;
        let (codec, schema_len) = Self::decode_fixed(fixed)?;
        let schema = bytes
            .get(HEADER_FIXED_LEN..HEADER_FIXED_LEN + schema_len)
            .ok_or_else(|| Error::Incomplete("schema truncated".into()))?;
        Ok(Self { codec, schema: FieldTree::decode(schema)? })
    }
}

/// A sink plus the file's logical end. Space is handed out by
/// [`append_reserved`](Container::append_reserved); every write must land in
/// a region obtained that way.
pub struct Container {
    sink: Arc<dyn Sink>,
    end: AtomicU64,
    preallocate: AtomicBool,
    bytes_written: AtomicU64,
}

impl std::fmt::Debug for Container {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Container")
            .field("end", &self.end())
            .field("bytes_written", &self.bytes_written())
            .finish()
    }
}

impl Container {
    pub fn new(sink: Arc<dyn Sink>, preallocate: bool) -> Self {
        Self {
            sink,
            end: AtomicU64::new(0),
            preallocate: AtomicBool::new(preallocate),
            bytes_written: AtomicU64::new(0),
        }
    }

    pub fn end(&self) -> u64 {
        self.end.load(Ordering::Acquire)
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written.load(Ordering::Relaxed)
    }

    /// Whether preallocation is (still) enabled. It switches itself off the
    /// first time the sink reports no support.
    pub fn preallocating(&self) -> bool {
        self.preallocate.load(Ordering::Relaxed)
    }

    /// Atomically advances the logical end by `n_bytes` and returns the start
    /// of the reserved region.
    pub fn append_reserved(&self, n_bytes: u64) -> Result<u64> {
        if n_bytes == 0 {
            return Err(Error::ZeroReservation);
        }
        let offset = self.end.fetch_add(n_bytes, Ordering::AcqRel);
        if self.preallocate.load(Ordering::Relaxed) {
            match self.sink.preallocate(offset, n_bytes) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::Unsupported => {
                    if self.preallocate.swap(false, Ordering::Relaxed) {
                        log::warn!("sink does not support preallocation; continuing without it");
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(offset)
    }

    pub fn write_at(&self, offset: u64, data: &[u8]) -> Result<()> {
        debug_assert!(offset + data.len() as u64 <= self.end(), "write outside reserved space");
        self.sink.write_at(offset, data)?;
        self.bytes_written.fetch_add(data.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        Ok(self.sink.flush()?)
    }
}

/// Writes the header at the start of an empty container.
pub fn write_header(container: &Container, schema: &FieldTree, codec: CodecId) -> Result<u64> {
    if container.end() != 0 {
        return Err(Error::InvalidOptions("header must be the first write".into()));
    }
    let bytes = Header { codec, schema: schema.clone() }.encode();
    let offset = container.append_reserved(bytes.len() as u64)?;
    container.write_at(offset, &bytes)?;
    Ok(bytes.len() as u64)
}

/// Appends footer and trailer, completing the file.
pub fn write_footer_and_trailer(container: &Container, footer: &FileFooter) -> Result<()> {
    let mut bytes = footer.encode();
    let footer_len = bytes.len() as u64;
    let offset = container.append_reserved(footer_len + TRAILER_LEN as u64)?;
    bytes.extend_from_slice(&FileTrailer { footer_offset: offset, footer_len }.encode());
    container.write_at(offset, &bytes)
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self
            .buf
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::Corrupt("footer truncated".into()))?;
        self.pos += N;
        Ok(s.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}
