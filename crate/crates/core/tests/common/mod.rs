// SPDX-License-Identifier: Apache-2.0

//! Random schemas, entries and writer options shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use minituple::codec::{CodecId, Compression};
use minituple::{FieldTree, LeafType, MemSink, ParallelWriter, Reader, TypeSpec, Value, WriteMode, WriterOptions};
use rand::seq::IndexedRandom;
use rand::Rng;

const LEAVES: [LeafType; 4] = [LeafType::I32, LeafType::I64, LeafType::F32, LeafType::F64];

pub fn random_spec<R: Rng>(rng: &mut R, depth: u32) -> TypeSpec {
    let n = rng.random_range(1..=4);
    TypeSpec::record((0..n).map(|i| (format!("m{i}"), random_member(rng, depth))))
}

fn random_member<R: Rng>(rng: &mut R, depth: u32) -> TypeSpec {
    let roll = if depth == 0 { 0 } else { rng.random_range(0..10) };
    match roll {
        0..=5 => TypeSpec::Leaf(*LEAVES.choose(rng).unwrap()),
        6..=7 => TypeSpec::collection(random_member(rng, depth - 1)),
        _ => random_spec(rng, depth - 1),
    }
}

pub fn random_schema<R: Rng>(rng: &mut R) -> FieldTree {
    FieldTree::build("root", &random_spec(rng, 3)).unwrap()
}

fn random_f64<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..20) {
        0 => f64::NAN,
        1 => -0.0,
        2 => f64::INFINITY,
        3 => f64::from_bits(rng.random()),
        _ => rng.random_range(-1e6..1e6),
    }
}

pub fn random_value<R: Rng>(rng: &mut R, spec: &TypeSpec) -> Value {
    match spec {
        TypeSpec::Leaf(LeafType::I32) => Value::I32(rng.random()),
        TypeSpec::Leaf(LeafType::I64) => Value::I64(rng.random()),
        TypeSpec::Leaf(LeafType::F32) => Value::F32(random_f64(rng) as f32),
        TypeSpec::Leaf(LeafType::F64) => Value::F64(random_f64(rng)),
        TypeSpec::Record(members) => Value::Record(members.iter().map(|(_, t)| random_value(rng, t)).collect()),
        TypeSpec::Collection(item) => {
            let n = rng.random_range(0..5);
            Value::Collection((0..n).map(|_| random_value(rng, item)).collect())
        }
    }
}

pub fn random_entries<R: Rng>(rng: &mut R, schema: &FieldTree, n: usize) -> Vec<Value> {
    let spec = schema.type_spec(0);
    (0..n).map(|_| random_value(rng, &spec)).collect()
}

pub fn random_options<R: Rng>(rng: &mut R) -> WriterOptions {
    let codec = *[CodecId::None, CodecId::Zstd, CodecId::Lz4, CodecId::Deflate].choose(rng).unwrap();
    let page = *[8u32, 16, 64, 256, 4096, 65536].choose(rng).unwrap();
    WriterOptions {
        target_page_bytes: page,
        target_cluster_bytes: u64::from(page) * *[1u64, 4, 64, 1024].choose(rng).unwrap(),
        max_entries_per_cluster: if rng.random_bool(0.3) { Some(rng.random_range(1..20)) } else { None },
        compression: Compression { codec, level: 0 },
        preallocate: rng.random_bool(0.2),
        mode: if rng.random_bool(0.5) { WriteMode::Buffered } else { WriteMode::Unbuffered },
        decoupled_write: rng.random_bool(0.5),
        parallel_compression: rng.random_bool(0.3),
    }
}

pub fn cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Writes `entries` with `threads` workers, each filling a contiguous chunk.
pub fn write_parallel(schema: &FieldTree, entries: &[Value], options: WriterOptions, threads: usize) -> Vec<u8> {
    let sink = MemSink::new();
    let writer = ParallelWriter::create(Arc::new(sink.clone()), schema.clone(), options).unwrap();
    let chunk = entries.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        for part in entries.chunks(chunk) {
            let mut ctx = writer.create_context().unwrap();
            s.spawn(move || {
                for e in part {
                    ctx.fill(e).unwrap();
                }
                ctx.finish().unwrap();
            });
        }
    });
    writer.close().unwrap();
    sink.to_vec()
}

pub fn write_sequential(schema: &FieldTree, entries: &[Value], options: WriterOptions) -> Vec<u8> {
    let sink = MemSink::new();
    minituple::writer::sequential_write(Arc::new(sink.clone()), schema.clone(), options, entries).unwrap();
    sink.to_vec()
}

pub fn read_back(bytes: Vec<u8>) -> Vec<Value> {
    Reader::from_source(Arc::new(bytes)).unwrap().read_all().unwrap()
}

pub fn sorted(mut v: Vec<Value>) -> Vec<Value> {
    v.sort();
    v
}

/// Rewrites the footer of a complete file: `edit` receives the footer payload
/// without its checksum; the checksum and trailer are recomputed.
pub fn edit_footer(file: &[u8], edit: impl FnOnce(&mut Vec<u8>)) -> Vec<u8> {
    let n = file.len();
    let off = u64::from_le_bytes(file[n - 20..n - 12].try_into().unwrap()) as usize;
    let len = u64::from_le_bytes(file[n - 12..n - 4].try_into().unwrap()) as usize;
    let mut payload = file[off..off + len - 4].to_vec();
    edit(&mut payload);
    let mut out = file[..off].to_vec();
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32c::crc32c(&payload).to_le_bytes());
    out.extend_from_slice(&(off as u64).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64 + 4).to_le_bytes());
    out.extend_from_slice(b"MNTF");
    out
}

/// Offset of the footer in a complete file.
pub fn footer_offset(file: &[u8]) -> usize {
    let n = file.len();
    u64::from_le_bytes(file[n - 20..n - 12].try_into().unwrap()) as usize
}
