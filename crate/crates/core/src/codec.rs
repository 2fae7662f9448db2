// SPDX-License-Identifier: Apache-2.0

//! Page compression.
//!
//! Every codec produces a self-contained frame for one page. Frames carry no
//! length prefix: the page locator records both the on-disk and the
//! uncompressed size, and [`decompress`] insists on the latter.

use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wire ids of the supported page codecs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum CodecId {
    None = 0,
    Zstd = 1,
    Lz4 = 2,
    Deflate = 3,
}

impl TryFrom<u8> for CodecId {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::None),
            1 => Ok(Self::Zstd),
            2 => Ok(Self::Lz4),
            3 => Ok(Self::Deflate),
            other => Err(Error::UnknownCodec(other)),
        }
    }
}

impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "zstd" => Ok(Self::Zstd),
            "lz4" => Ok(Self::Lz4),
            "deflate" | "zlib" => Ok(Self::Deflate),
            other => Err(Error::Config(format!("unknown codec `{other}`"))),
        }
    }
}

/// Codec plus level. Level 0 selects the backend's default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compression {
    pub codec: CodecId,
    #[serde(default)]
    pub level: i32,
}

impl Compression {
    pub const NONE: Self = Self { codec: CodecId::None, level: 0 };

    pub const fn new(codec: CodecId, level: i32) -> Self {
        Self { codec, level }
    }
}

impl Default for Compression {
    fn default() -> Self {
        Self { codec: CodecId::Zstd, level: 0 }
    }
}

static COMPRESS_CALLS: AtomicU64 = AtomicU64::new(0);
static COMPRESS_CALLS_IN_COMMIT: AtomicU64 = AtomicU64::new(0);

/// Total `compress` calls in this process.
pub fn compress_calls() -> u64 {
    COMPRESS_CALLS.load(Ordering::Relaxed)
}

/// `compress` calls made while the calling thread held a writer's commit lock.
/// Should stay at zero.
pub fn compress_calls_in_commit_region() -> u64 {
    COMPRESS_CALLS_IN_COMMIT.load(Ordering::Relaxed)
}

pub fn compress(codec: CodecId, level: i32, payload: &[u8]) -> Result<Vec<u8>> {
    COMPRESS_CALLS.fetch_add(1, Ordering::Relaxed);
    if crate::sync::in_commit_region() {
        COMPRESS_CALLS_IN_COMMIT.fetch_add(1, Ordering::Relaxed);
    }
    match codec {
        CodecId::None => Ok(payload.to_vec()),
        CodecId::Zstd => {
            let level = if level == 0 { zstd::DEFAULT_COMPRESSION_LEVEL } else { level };
            zstd::bulk::compress(payload, level).map_err(|e| Error::Codec(format!("zstd: {e}")))
        }
        CodecId::Lz4 => Ok(lz4_flex::block::compress(payload)),
        CodecId::Deflate => {
            let level = if level <= 0 { 6 } else { level.min(9) as u32 };
            let mut enc = flate2::write::DeflateEncoder::new(
                Vec::with_capacity(payload.len() / 2),
                flate2::Compression::new(level),
            );
            enc.write_all(payload)?;
            Ok(enc.finish()?)
        }
    }
}

pub fn decompress(codec: CodecId, frame: &[u8], expected_len: usize) -> Result<Vec<u8>> {
    let out = match codec {
        CodecId::None => frame.to_vec(),
        CodecId::Zstd => {
            // bulk::decompress treats the capacity as an upper bound; the exact
            // length is checked below
            zstd::bulk::decompress(frame, expected_len)
                .map_err(|e| Error::Codec(format!("zstd: {e}")))?
        }
        CodecId::Lz4 => lz4_flex::block::decompress(frame, expected_len)
            .map_err(|e| Error::Codec(format!("lz4: {e}")))?,
        CodecId::Deflate => {
            let mut out = Vec::with_capacity(expected_len);
            flate2::read::DeflateDecoder::new(frame)
                .take(expected_len as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|e| Error::Codec(format!("deflate: {e}")))?;
            out
        }
    };
    if out.len() != expected_len {
        return Err(Error::Codec(format!(
            "{codec:?} frame decoded to {} bytes, expected {expected_len}",
            out.len()
        )));
    }
    Ok(out)
}

/// Compresses a page, falling back to stored form unless the frame is
/// strictly smaller than the payload.
pub fn compress_page(compression: Compression, payload: Vec<u8>) -> Result<(CodecId, Vec<u8>)> {
    if compression.codec == CodecId::None {
        return Ok((CodecId::None, payload));
    }
    let frame = compress(compression.codec, compression.level, &payload)?;
    if frame.len() < payload.len() {
        Ok((compression.codec, frame))
    } else {
        Ok((CodecId::None, payload))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngCore, SeedableRng};

    const ALL: [CodecId; 4] = [CodecId::None, CodecId::Zstd, CodecId::Lz4, CodecId::Deflate];

    #[test]
    fn constant_page_compresses_well() {
        let page = vec![7u8; 64 * 1024];
        let frame = compress(CodecId::Zstd, 0, &page).unwrap();
        assert!(frame.len() < 1024, "frame is {} bytes", frame.len());
        assert!(frame.len() * 64 < page.len());
    }

    #[test]
    fn random_page_is_stored() {
        let mut page = vec![0u8; 64 * 1024];
        rand_chacha::ChaCha8Rng::seed_from_u64(1).fill_bytes(&mut page);
        for c in [CodecId::Zstd, CodecId::Lz4, CodecId::Deflate] {
            let (codec, stored) = compress_page(Compression::new(c, 0), page.clone()).unwrap();
            assert_eq!(codec, CodecId::None);
            assert_eq!(stored, page);
        }
    }

    #[test]
    fn none_is_identity() {
        assert_eq!(compress(CodecId::None, 0, b"abc").unwrap(), b"abc");
        assert_eq!(decompress(CodecId::None, b"abc", 3).unwrap(), b"abc");
        assert!(decompress(CodecId::None, b"abc", 4).is_err());
    }

    #[test]
    fn truncated_and_mislabeled_frames_fail() {
        let page: Vec<u8> = (0..4096u32).flat_map(|i| (i % 17).to_le_bytes()).collect();
        for c in [CodecId::Zstd, CodecId::Lz4, CodecId::Deflate] {
            let frame = compress(c, 0, &page).unwrap();
            assert!(decompress(c, &frame[..frame.len() / 2], page.len()).is_err(), "{c:?}");
            assert!(decompress(c, &frame, page.len() + 1).is_err(), "{c:?}");
            assert!(decompress(c, &frame, page.len() - 1).is_err(), "{c:?}");
        }
    }

    #[test]
    fn deterministic() {
        let page: Vec<u8> = (0..10_000u32).map(|i| (i * 31 % 251) as u8).collect();
        for c in ALL {
            assert_eq!(compress(c, 0, &page).unwrap(), compress(c, 0, &page).unwrap());
        }
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(CodecId::try_from(9), Err(Error::UnknownCodec(9))));
        assert_eq!("ZSTD".parse::<CodecId>().unwrap(), CodecId::Zstd);
    }

    proptest! {
        #[test]
        fn round_trip(data in proptest::collection::vec(any::<u8>(), 1..4096), idx in 0usize..4) {
            let codec = ALL[idx];
            let frame = compress(codec, 0, &data).unwrap();
            prop_assert_eq!(decompress(codec, &frame, data.len()).unwrap(), data);
        }
    }
}
