// SPDX-License-Identifier: Apache-2.0

use std::io;

/// Errors raised while building schemas, writing, or reading files.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    // schema construction
    #[error("duplicate field name `{name}` under `{parent}`")]
    DuplicateField { parent: String, name: String },
    #[error("record `{0}` has no fields")]
    EmptyRecord(String),
    #[error("unsupported leaf type `{0}`")]
    UnsupportedLeafType(String),
    #[error("invalid field name `{0}`")]
    InvalidName(String),
    #[error("invalid type description: {0}")]
    TypeSyntax(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("entry does not match schema at `{path}`: {reason}")]
    TypeMismatch { path: String, reason: String },
    #[error("unknown field path `{0}`")]
    UnknownField(String),

    // file format
    #[error("bad magic number")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("incomplete file: {0}")]
    Incomplete(String),
    #[error("footer checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("codec failure: {0}")]
    Codec(String),
    #[error("reservation of zero bytes")]
    ZeroReservation,

    // writing
    #[error("invalid writer options: {0}")]
    InvalidOptions(String),
    #[error("cluster holds no entries")]
    EmptyCluster,
    #[error("page holds no elements")]
    EmptyPage,
    #[error("writer is closed")]
    WriterClosed,
    #[error("writer failed earlier and no longer accepts commits")]
    WriterPoisoned,
    #[error("{0} fill context(s) still hold unsealed entries")]
    OutstandingContexts(usize),
    #[error("sealed cluster does not belong to this writer: {0}")]
    ForeignCluster(String),

    // reading
    #[error("entry index {index} out of range (file has {len} entries)")]
    IndexOutOfRange { index: u64, len: u64 },

    // tools
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
