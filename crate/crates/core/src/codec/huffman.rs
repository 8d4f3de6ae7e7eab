//! Canonical Huffman codes over dictionary ids.
//!
//! Only code lengths are ever transmitted. Codes are reassigned canonically
//! by sorting on `(length, id)`, so two parties holding the same lengths
//! produce identical bit streams.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::bitvec::BitVector;
use super::CodecError;
use crate::dictionary::KeyId;

/// Longest code the packed representation supports.
pub const MAX_CODE_LEN: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Code {
    pub bits: u64,
    pub len: u8,
}

impl Code {
    pub fn to_bit_string(self) -> String {
        (0..self.len).rev().map(|s| if (self.bits >> s) & 1 == 1 { '1' } else { '0' }).collect()
    }
}

/// Prefix-free code table in canonical form.
#[derive(Debug, Clone)]
pub struct HuffmanCodeTable {
    /// Symbols in canonical `(length, id)` order with their lengths.
    canonical: Vec<(KeyId, u8)>,
    codes: HashMap<KeyId, Code>,
    /// Indexed by code length: (first canonical code, symbol count, offset into `canonical`).
    by_len: Vec<(u64, u64, usize)>,
}

impl PartialEq for HuffmanCodeTable {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for HuffmanCodeTable {}

impl HuffmanCodeTable {
    /// Builds the canonical table for the given code lengths.
    ///
    /// Lengths must lie in `1..=64` and satisfy Kraft's inequality.
    pub fn from_lengths<I>(lengths: I) -> Result<Self, CodecError>
    where
        I: IntoIterator<Item = (KeyId, u8)>,
    {
        let mut canonical: Vec<(KeyId, u8)> = lengths.into_iter().collect();
        canonical.sort_by_key(|&(id, len)| (len, id));
        if let Some(w) = canonical.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CodecError::InvalidCodeTable(format!("id {} listed twice", w[0].0)));
        }
        // Kraft sum scaled by 2^64 so it fits a u128 exactly.
        let mut kraft: u128 = 0;
        for &(id, len) in &canonical {
            if len == 0 || len > MAX_CODE_LEN {
                return Err(CodecError::InvalidCodeTable(format!("id {id} has code length {len}")));
            }
            kraft += 1u128 << (MAX_CODE_LEN - len);
        }
        if kraft > 1u128 << MAX_CODE_LEN {
            return Err(CodecError::InvalidCodeTable("code lengths violate Kraft's inequality".into()));
        }

        let max_len = canonical.last().map_or(0, |&(_, l)| l) as usize;
        let mut by_len = vec![(0u64, 0u64, 0usize); max_len + 1];
        let mut codes = HashMap::with_capacity(canonical.len());
        let mut next: u64 = 0;
        let mut prev_len = canonical.first().map_or(0, |&(_, l)| l);
        for (pos, &(id, len)) in canonical.iter().enumerate() {
            if len != prev_len {
                next <<= len - prev_len;
                prev_len = len;
            }
            let slot = &mut by_len[len as usize];
            if slot.1 == 0 {
                *slot = (next, 0, pos);
            }
            slot.1 += 1;
            codes.insert(id, Code { bits: next, len });
            next = next.wrapping_add(1);
        }
        Ok(Self { canonical, codes, by_len })
    }

    pub fn code(&self, id: KeyId) -> Option<Code> {
        self.codes.get(&id).copied()
    }

    /// `(id, length)` pairs in canonical order.
    pub fn lengths(&self) -> &[(KeyId, u8)] {
        &self.canonical
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn max_len(&self) -> u8 {
        self.canonical.last().map_or(0, |&(_, l)| l)
    }

    /// Codes as `"0"`/`"1"` strings keyed by id.
    pub fn code_strings(&self) -> BTreeMap<KeyId, String> {
        self.codes.iter().map(|(&id, &c)| (id, c.to_bit_string())).collect()
    }

    /// Reads one symbol starting at `bits[pos]`, returning it and the next position.
    fn decode_one(&self, bits: &BitVector, mut pos: usize) -> Result<(KeyId, usize), CodecError> {
        let start = pos;
        let mut code: u64 = 0;
        for len in 1..self.by_len.len() {
            let bit = bits.get(pos).ok_or_else(|| {
                CodecError::CorruptBitstream(format!("bit stream ends inside a code starting at bit {start}"))
            })?;
            pos += 1;
            code = (code << 1) | u64::from(bit);
            let (first, count, offset) = self.by_len[len];
            if count > 0 && code >= first && code - first < count {
                return Ok((self.canonical[offset + (code - first) as usize].0, pos));
            }
        }
        Err(CodecError::CorruptBitstream(format!("no code matches the bits at {start}")))
    }
}

/// Optimal code lengths for the given symbol frequencies, canonicalized.
///
/// A single symbol gets the one-bit code `0`.
pub fn huffman_build(freqs: &BTreeMap<KeyId, u64>) -> Result<HuffmanCodeTable, CodecError> {
    if freqs.is_empty() {
        return Err(CodecError::EmptyFrequencyMap);
    }
    if let Some((&id, _)) = freqs.iter().find(|(_, &f)| f == 0) {
        return Err(CodecError::InvalidCodeTable(format!("id {id} has zero frequency")));
    }
    if freqs.len() == 1 {
        let (&id, _) = freqs.iter().next().unwrap();
        return HuffmanCodeTable::from_lengths([(id, 1)]);
    }

    // Node arena: leaves first (in id order), then internal nodes. Ties on
    // weight go to the node created earliest, which keeps the shape deterministic.
    let symbols: Vec<KeyId> = freqs.keys().copied().collect();
    let mut parent: Vec<usize> = vec![usize::MAX; symbols.len()];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        freqs.values().enumerate().map(|(i, &f)| Reverse((f, i))).collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        let node = parent.len();
        parent.push(usize::MAX);
        parent[a] = node;
        parent[b] = node;
        heap.push(Reverse((wa.saturating_add(wb), node)));
    }

    // Parents always have larger indices, so one reverse sweep yields depths.
    let mut depth = vec![0u32; parent.len()];
    for n in (0..parent.len()).rev() {
        if parent[n] != usize::MAX {
            depth[n] = depth[parent[n]] + 1;
        }
    }
    let mut lengths = Vec::with_capacity(symbols.len());
    for (i, &id) in symbols.iter().enumerate() {
        let len = u8::try_from(depth[i])
            .ok()
            .filter(|&l| l <= MAX_CODE_LEN)
            .ok_or_else(|| CodecError::InvalidCodeTable(format!("code for id {id} exceeds {MAX_CODE_LEN} bits")))?;
        lengths.push((id, len));
    }
    HuffmanCodeTable::from_lengths(lengths)
}

/// Tallies id occurrences.
pub fn frequencies(ids: &[KeyId]) -> BTreeMap<KeyId, u64> {
    let mut freqs = BTreeMap::new();
    for &id in ids {
        *freqs.entry(id).or_insert(0) += 1;
    }
    freqs
}

/// Concatenates the codes of `ids` in order.
pub fn bitpack_ids(ids: &[KeyId], table: &HuffmanCodeTable) -> Result<BitVector, CodecError> {
    let mut out = BitVector::with_capacity(ids.len() * usize::from(table.max_len().max(1)));
    for &id in ids {
        let code = table.code(id).ok_or(CodecError::MissingCode(id))?;
        out.push_bits(code.bits, code.len);
    }
    Ok(out)
}

/// Decodes exactly `count` ids; the stream must end exactly after the last one.
pub fn bitunpack_ids(bits: &BitVector, table: &HuffmanCodeTable, count: usize) -> Result<Vec<KeyId>, CodecError> {
    let mut out = Vec::with_capacity(count);
    let mut pos = 0;
    while out.len() < count {
        let (id, next) = table.decode_one(bits, pos)?;
        out.push(id);
        pos = next;
    }
    if pos != bits.len() {
        return Err(CodecError::CorruptBitstream(format!(
            "{} trailing bits after {count} symbols",
            bits.len() - pos
        )));
    }
    Ok(out)
}
