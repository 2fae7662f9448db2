// SPDX-License-Identifier: Apache-2.0

//! Single-file columnar storage for nested data.
//!
//! Nested entries are decomposed into a [`schema::FieldTree`] and shredded into
//! flat columns of fixed-size elements. Columns are cut into pages (the unit of
//! compression) and all pages of a consecutive range of entries form a cluster.
//!
//! Clusters are relocatable: collection offsets are stored relative to the start
//! of the cluster, so a sealed cluster can be compressed on any thread and placed
//! at any file offset without touching its bytes. [`parwriter::ParallelWriter`]
//! builds on this to let many threads fill independent [`writer::FillContext`]s
//! and commit finished clusters into one file under a single short critical
//! section.
//!
//! ```text
//! +--------+--------------------------------------+--------+---------+
//! | header | pages of cluster 0 | cluster 1 | ... | footer | trailer |
//! +--------+--------------------------------------+--------+---------+
//! ```
//!
//! The [`bench`] and [`skim`] modules drive the writer with a synthetic
//! weak-scaling workload and a partitioned skimming pipeline.

pub mod bench;
pub mod codec;
pub mod error;
pub mod format;
pub mod parwriter;
pub mod reader;
pub mod schema;
pub mod skim;
mod sync;
pub mod writer;

pub use codec::{CodecId, Compression};
pub use error::{Error, Result};
pub use format::sink::{FileSink, MemSink, NullSink, Sink, Source};
pub use parwriter::{ParallelWriter, WriteStats};
pub use reader::Reader;
pub use schema::{FieldTree, LeafType, TypeSpec, Value};
pub use writer::{FillContext, SealedCluster, SequentialWriter, WriteMode, WriterOptions};
