// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use common::*;
use minituple::codec::CodecId;
use minituple::{Compression, Error, FieldTree, Reader, TypeSpec, Value, WriterOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Byte position of the first page's codec id inside the footer payload.
const FIRST_CODEC_BYTE: usize = 4 + 16 + 20 + 20;

fn sample_file(codec: CodecId) -> (FieldTree, Vec<Value>, Vec<u8>) {
    let schema = FieldTree::build("e", &TypeSpec::parse("{id: i64, v: vec<f32>}").unwrap()).unwrap();
    let entries: Vec<Value> = (0..400)
        .map(|i| Value::Record(vec![Value::I64(i), Value::Collection((0..i % 7).map(|k| Value::F32(k as f32)).collect())]))
        .collect();
    let opts = WriterOptions {
        target_page_bytes: 128,
        target_cluster_bytes: 1024,
        compression: Compression { codec, level: 0 },
        ..Default::default()
    };
    let bytes = write_sequential(&schema, &entries, opts);
    (schema, entries, bytes)
}

fn open(bytes: Vec<u8>) -> minituple::Result<Reader> {
    Reader::from_source(Arc::new(bytes))
}

#[test]
fn every_truncation_is_rejected() {
    let (_, _, bytes) = sample_file(CodecId::Zstd);
    for cut in 0..bytes.len() {
        assert!(open(bytes[..cut].to_vec()).is_err(), "accepted a file cut at {cut}");
    }
    assert!(matches!(open(bytes[..bytes.len() - 1].to_vec()), Err(Error::Incomplete(_))));
}

#[test]
fn footer_bit_flips_fail_the_checksum() {
    let (_, _, bytes) = sample_file(CodecId::Zstd);
    let start = footer_offset(&bytes);
    for pos in start..bytes.len() - 24 {
        let mut b = bytes.clone();
        b[pos] ^= 0x10;
        assert!(matches!(open(b), Err(Error::Checksum { .. })), "flip at {pos}");
    }
}

#[test]
fn header_damage() {
    let (_, _, bytes) = sample_file(CodecId::None);
    let mut b = bytes.clone();
    b[0] = b'X';
    assert!(matches!(open(b), Err(Error::BadMagic)));
    let mut b = bytes.clone();
    b[4] = 9;
    assert!(matches!(open(b), Err(Error::UnsupportedVersion(9))));
    let mut b = bytes;
    b[8] = 200;
    assert!(matches!(open(b), Err(Error::UnknownCodec(200))));
}

#[test]
fn unknown_page_codec() {
    let (_, _, bytes) = sample_file(CodecId::Zstd);
    let b = edit_footer(&bytes, |p| p[FIRST_CODEC_BYTE] = 7);
    assert!(matches!(open(b), Err(Error::UnknownCodec(7))));
}

#[test]
fn edited_footer_roundtrips_when_unchanged() {
    let (_, entries, bytes) = sample_file(CodecId::Lz4);
    let same = edit_footer(&bytes, |_| {});
    assert_eq!(same, bytes);
    assert_eq!(open(same).unwrap().read_all().unwrap(), entries);
}

#[test]
fn data_corruption_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for codec in [CodecId::None, CodecId::Zstd, CodecId::Lz4, CodecId::Deflate] {
        let (_, _, bytes) = sample_file(codec);
        let data_end = footer_offset(&bytes);
        for _ in 0..300 {
            let mut b = bytes.clone();
            for _ in 0..rng.random_range(1..4) {
                let pos = rng.random_range(0..data_end);
                b[pos] ^= rng.random_range(1..=255u8);
            }
            if let Ok(r) = open(b) {
                let _ = r.read_all();
            }
        }
    }
}

#[test]
fn offset_column_corruption_is_detected() {
    let (schema, _, bytes) = sample_file(CodecId::None);
    let reader = open(bytes.clone()).unwrap();
    let col = schema.field_column(schema.find("v").unwrap()).unwrap();
    let page = reader.footer().clusters[0].columns[col].pages[0];
    let mut b = bytes;
    // first end offset of cluster 0 becomes huge
    let at = page.file_offset as usize;
    b[at..at + 8].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(open(b).unwrap().read_all().is_err());
}
