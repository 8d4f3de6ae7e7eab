//! Compact form of a record batch and its exact inverse.
//!
//! Encoding drops the constant tag and the UTC offset, keeps four of the six
//! price fraction digits, stores timestamps as bounded deltas against
//! periodic base timestamps, and replaces composite keys with dictionary ids.
//! Ids are either kept one per entry ([`IdEncoding::Bytewise`]) or packed into
//! a Huffman-coded bit stream ([`IdEncoding::BitwiseHuffman`]).

mod bitvec;
mod huffman;
mod serial;

use std::fmt;

use thiserror::Error;

pub use bitvec::{BitVector, BitVectorError};
pub use huffman::{bitpack_ids, bitunpack_ids, frequencies, huffman_build, Code, HuffmanCodeTable, MAX_CODE_LEN};
pub use serial::{parse_compact, serialize_compact};

use crate::dictionary::{CompositeKey, Dictionary, KeyId};
use crate::record::{SpotPriceRecord, MAX_EPOCH, PRICE_GRANULE};

pub const DEFAULT_BASE_INTERVAL_SECONDS: u32 = 86_400;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("record {index} is earlier than its predecessor")]
    UnsortedInput { index: usize },
    #[error("record {index} has key {key} which is not in the dictionary")]
    UnknownKey { index: usize, key: CompositeKey },
    #[error("key id {0} is not in the dictionary")]
    UnknownId(KeyId),
    #[error("corrupt id stream: {0}")]
    CorruptBitstream(String),
    #[error("frequency map is empty")]
    EmptyFrequencyMap,
    #[error("no code for id {0}")]
    MissingCode(KeyId),
    #[error("invalid code table: {0}")]
    InvalidCodeTable(String),
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("malformed compact payload at line {line}: {reason}")]
    MalformedCompactPayload { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum IdEncoding {
    /// One sequential id per entry.
    #[default]
    Bytewise,
    /// Canonical Huffman codes packed into a bit vector.
    BitwiseHuffman,
}

impl IdEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bytewise => "bytewise",
            Self::BitwiseHuffman => "huffman",
        }
    }
}

impl fmt::Display for IdEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IdEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bytewise" => Ok(Self::Bytewise),
            "huffman" | "bitwise" => Ok(Self::BitwiseHuffman),
            other => Err(format!("unknown id encoding {other:?} (expected bytewise or huffman)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    /// A new base timestamp starts once a delta would reach this value.
    pub base_interval_seconds: u32,
    pub id_encoding: IdEncoding,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self { base_interval_seconds: DEFAULT_BASE_INTERVAL_SECONDS, id_encoding: IdEncoding::Bytewise }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.base_interval_seconds == 0 {
            return Err(CodecError::InvalidConfig("base_interval_seconds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Price with the two always-zero trailing digits removed: units of 10^-4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompactPrice(pub u64);

impl CompactPrice {
    pub const SCALE: u64 = 10_000;

    pub fn from_micro(price_micro: u64) -> Self {
        debug_assert_eq!(price_micro % PRICE_GRANULE, 0);
        Self(price_micro / PRICE_GRANULE)
    }

    pub fn to_micro(self) -> u64 {
        self.0 * PRICE_GRANULE
    }

    /// Parses `<digits>.<4 digits>` with no redundant leading zeros.
    pub fn parse(text: &str) -> Option<Self> {
        let (int_part, frac) = text.split_once('.')?;
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(int_part) || frac.len() != 4 || !digits(frac) || (int_part.len() > 1 && int_part.starts_with('0')) {
            return None;
        }
        let units: u64 = int_part.parse().ok()?;
        let frac: u64 = frac.parse().ok()?;
        let value = units.checked_mul(Self::SCALE)?.checked_add(frac)?;
        value.checked_mul(PRICE_GRANULE)?;
        Some(Self(value))
    }
}

impl fmt::Display for CompactPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:04}", self.0 / Self::SCALE, self.0 % Self::SCALE)
    }
}

/// A record with the redundant parts removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredRecord<'a> {
    pub price: CompactPrice,
    pub timestamp_epoch: i64,
    pub key: &'a CompositeKey,
}

pub fn filter_fields(record: &SpotPriceRecord) -> FilteredRecord<'_> {
    FilteredRecord {
        price: CompactPrice::from_micro(record.price_micro),
        timestamp_epoch: record.timestamp_epoch,
        key: &record.key,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompactEntry {
    pub price: CompactPrice,
    pub delta_seconds: u32,
    /// Present in bytewise batches; `None` when ids live in the Huffman payload.
    pub key_id: Option<KeyId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub base_epoch: i64,
    pub entries: Vec<CompactEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanIds {
    pub table: HuffmanCodeTable,
    pub payload: BitVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactBatch {
    pub base_interval_seconds: u32,
    pub segments: Vec<Segment>,
    /// Present iff the batch was encoded with [`IdEncoding::BitwiseHuffman`].
    pub huffman: Option<HuffmanIds>,
}

impl CompactBatch {
    pub fn record_count(&self) -> usize {
        self.segments.iter().map(|s| s.entries.len()).sum()
    }

    pub fn id_encoding(&self) -> IdEncoding {
        if self.huffman.is_some() {
            IdEncoding::BitwiseHuffman
        } else {
            IdEncoding::Bytewise
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, &CompactEntry)> {
        self.segments.iter().flat_map(|s| s.entries.iter().map(move |e| (s.base_epoch, e)))
    }
}

/// Encodes a timestamp-sorted record list.
pub fn encode_batch(
    records: &[SpotPriceRecord],
    dict: &Dictionary,
    cfg: &CodecConfig,
) -> Result<CompactBatch, CodecError> {
    cfg.validate()?;
    let interval = i64::from(cfg.base_interval_seconds);
    let mut segments: Vec<Segment> = Vec::new();
    let mut ids = Vec::with_capacity(records.len());
    let mut prev_ts = i64::MIN;

    for (index, record) in records.iter().enumerate() {
        let filtered = filter_fields(record);
        if filtered.timestamp_epoch < prev_ts {
            return Err(CodecError::UnsortedInput { index });
        }
        prev_ts = filtered.timestamp_epoch;
        let id = match dict.lookup(filtered.key) {
            Ok(id) => id,
            Err(_) => return Err(CodecError::UnknownKey { index, key: filtered.key.clone() }),
        };
        ids.push(id);

        let needs_base = segments
            .last()
            .is_none_or(|s| filtered.timestamp_epoch - s.base_epoch >= interval);
        if needs_base {
            segments.push(Segment { base_epoch: filtered.timestamp_epoch, entries: Vec::new() });
        }
        let segment = segments.last_mut().expect("segment opened above");
        let delta = (filtered.timestamp_epoch - segment.base_epoch) as u32;
        segment.entries.push(CompactEntry { price: filtered.price, delta_seconds: delta, key_id: None });
    }

    let huffman = match cfg.id_encoding {
        IdEncoding::Bytewise => {
            for (entry, id) in segments.iter_mut().flat_map(|s| s.entries.iter_mut()).zip(&ids) {
                entry.key_id = Some(*id);
            }
            None
        }
        IdEncoding::BitwiseHuffman if ids.is_empty() => Some(HuffmanIds {
            table: HuffmanCodeTable::from_lengths([])?,
            payload: BitVector::new(),
        }),
        IdEncoding::BitwiseHuffman => {
            let table = huffman_build(&frequencies(&ids))?;
            let payload = bitpack_ids(&ids, &table)?;
            Some(HuffmanIds { table, payload })
        }
    };

    Ok(CompactBatch { base_interval_seconds: cfg.base_interval_seconds, segments, huffman })
}

/// Restores the exact records an encoded batch came from.
pub fn decode_batch(batch: &CompactBatch, dict: &Dictionary) -> Result<Vec<SpotPriceRecord>, CodecError> {
    let count = batch.record_count();
    let ids: Vec<KeyId> = match &batch.huffman {
        Some(h) => {
            if batch.entries().any(|(_, e)| e.key_id.is_some()) {
                return Err(CodecError::CorruptBitstream("entry carries an inline id in a huffman batch".into()));
            }
            bitunpack_ids(&h.payload, &h.table, count)?
        }
        None => batch
            .entries()
            .enumerate()
            .map(|(i, (_, e))| {
                e.key_id.ok_or_else(|| CodecError::CorruptBitstream(format!("entry {i} has no id")))
            })
            .collect::<Result<_, _>>()?,
    };

    let mut out = Vec::with_capacity(count);
    for ((base, entry), id) in batch.entries().zip(ids) {
        let key = dict.reverse(id).map_err(|_| CodecError::UnknownId(id))?;
        let timestamp_epoch = base + i64::from(entry.delta_seconds);
        if timestamp_epoch > MAX_EPOCH {
            return Err(CodecError::CorruptBitstream(format!("timestamp {timestamp_epoch} out of range")));
        }
        out.push(SpotPriceRecord { price_micro: entry.price.to_micro(), timestamp_epoch, key: key.clone() });
    }
    Ok(out)
}
