//! Line-oriented text form of a [`CompactBatch`].
//!
//! ```text
//! #C bytewise 86400 3          header: id encoding, base interval, record count
//! #B 2019-05-08T17:08:38       opens a segment
//! 0.0415,0,3                   price, delta seconds, key id
//! 0.0420,37,0
//! #B 2019-05-09T17:08:38
//! 0.0419,0,3
//! ```
//!
//! Huffman batches drop the trailing `,<id>` from entry lines and end with
//! `#T <id>:<len> ...` (canonical order) and `#P <bit-length> <hex>`.

use std::fmt::Write;

use super::{BitVector, CodecError, CompactBatch, CompactEntry, CompactPrice, HuffmanCodeTable, HuffmanIds, IdEncoding, Segment};
use crate::dictionary::KeyId;
use crate::record::{format_naive_timestamp, parse_naive_timestamp, MAX_EPOCH};

pub fn serialize_compact(batch: &CompactBatch) -> Vec<u8> {
    let mut out = String::with_capacity(32 + batch.record_count() * 16);
    let _ = writeln!(out, "#C {} {} {}", batch.id_encoding(), batch.base_interval_seconds, batch.record_count());
    for segment in &batch.segments {
        let _ = writeln!(out, "#B {}", format_naive_timestamp(segment.base_epoch));
        for e in &segment.entries {
            match (batch.huffman.is_some(), e.key_id) {
                (false, Some(id)) => {
                    let _ = writeln!(out, "{},{},{}", e.price, e.delta_seconds, id);
                }
                _ => {
                    let _ = writeln!(out, "{},{}", e.price, e.delta_seconds);
                }
            }
        }
    }
    if let Some(h) = &batch.huffman {
        out.push_str("#T");
        for (id, len) in h.table.lengths() {
            let _ = write!(out, " {id}:{len}");
        }
        out.push('\n');
        let _ = write!(out, "#P {}", h.payload.len());
        if !h.payload.is_empty() {
            let _ = write!(out, " {}", hex::encode(h.payload.as_bytes()));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_compact(payload: &[u8]) -> Result<CompactBatch, CodecError> {
    let text = std::str::from_utf8(payload).map_err(|e| malformed(0, format!("not UTF-8: {e}")))?;
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(malformed(text.lines().count(), "missing final newline"));
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = lines.next().ok_or_else(|| malformed(1, "empty payload"))?;
    let (encoding, interval, count) = parse_header(line_no, header)?;
    let huffman_mode = encoding == IdEncoding::BitwiseHuffman;

    let mut segments: Vec<Segment> = Vec::new();
    let mut table_line: Option<(usize, &str)> = None;
    let mut payload_line: Option<(usize, &str)> = None;
    let mut prev_ts = i64::MIN;

    for (line_no, line) in lines {
        if payload_line.is_some() {
            return Err(malformed(line_no, "content after #P line"));
        }
        if table_line.is_some() {
            if line.starts_with("#P") {
                payload_line = Some((line_no, line));
                continue;
            }
            return Err(malformed(line_no, "expected #P after #T"));
        }
        if let Some(rest) = line.strip_prefix("#B ") {
            let base = parse_naive_timestamp(rest).ok_or_else(|| malformed(line_no, format!("bad base timestamp {rest:?}")))?;
            if let Some(prev) = segments.last() {
                if base <= prev.base_epoch {
                    return Err(malformed(line_no, "base timestamps must strictly increase"));
                }
                if prev.entries.is_empty() {
                    return Err(malformed(line_no, "empty segment"));
                }
            }
            if base < prev_ts {
                return Err(malformed(line_no, "timestamps must not decrease"));
            }
            segments.push(Segment { base_epoch: base, entries: Vec::new() });
        } else if line == "#T" || line.starts_with("#T ") {
            if !huffman_mode {
                return Err(malformed(line_no, "#T line in a bytewise payload"));
            }
            table_line = Some((line_no, line));
        } else if line.starts_with('#') {
            return Err(malformed(line_no, format!("unknown directive {line:?}")));
        } else {
            let segment = segments.last_mut().ok_or_else(|| malformed(line_no, "entry before first #B line"))?;
            let entry = parse_entry(line_no, line, huffman_mode)?;
            if entry.delta_seconds >= interval {
                return Err(malformed(line_no, format!("delta {} not below interval {interval}", entry.delta_seconds)));
            }
            let ts = segment.base_epoch + i64::from(entry.delta_seconds);
            if ts < prev_ts {
                return Err(malformed(line_no, "timestamps must not decrease"));
            }
            if ts > MAX_EPOCH {
                return Err(malformed(line_no, "timestamp out of range"));
            }
            prev_ts = ts;
            segment.entries.push(entry);
        }
    }

    let last_line = text.lines().count();
    if segments.last().is_some_and(|s| s.entries.is_empty()) {
        return Err(malformed(last_line, "empty segment"));
    }
    let total: usize = segments.iter().map(|s| s.entries.len()).sum();
    if total != count {
        return Err(malformed(last_line, format!("header declares {count} records, found {total}")));
    }

    let huffman = if huffman_mode {
        let (t_no, t_line) = table_line.ok_or_else(|| malformed(last_line, "missing #T line"))?;
        let (p_no, p_line) = payload_line.ok_or_else(|| malformed(last_line, "missing #P line"))?;
        let table = parse_table(t_no, t_line)?;
        let payload = parse_bits(p_no, p_line)?;
        Some(HuffmanIds { table, payload })
    } else {
        None
    };

    Ok(CompactBatch { base_interval_seconds: interval, segments, huffman })
}

fn malformed(line: usize, reason: impl Into<String>) -> CodecError {
    CodecError::MalformedCompactPayload { line, reason: reason.into() }
}

fn parse_header(line_no: usize, line: &str) -> Result<(IdEncoding, u32, usize), CodecError> {
    let parts: Vec<&str> = line.split(' ').collect();
    let ["#C", encoding, interval, count] = parts[..] else {
        return Err(malformed(line_no, format!("bad header {line:?}")));
    };
    let encoding = match encoding {
        "bytewise" => IdEncoding::Bytewise,
        "huffman" => IdEncoding::BitwiseHuffman,
        other => return Err(malformed(line_no, format!("unknown id encoding {other:?}"))),
    };
    let interval: u32 = parse_canonical(interval).ok_or_else(|| malformed(line_no, "bad base interval"))?;
    if interval == 0 {
        return Err(malformed(line_no, "base interval must be positive"));
    }
    let count: usize = parse_canonical(count).ok_or_else(|| malformed(line_no, "bad record count"))?;
    Ok((encoding, interval, count))
}

fn parse_entry(line_no: usize, line: &str, huffman_mode: bool) -> Result<CompactEntry, CodecError> {
    let fields: Vec<&str> = line.split(',').collect();
    let (price, delta, id) = match (huffman_mode, &fields[..]) {
        (false, [p, d, id]) => (*p, *d, Some(*id)),
        (true, [p, d]) => (*p, *d, None),
        _ => return Err(malformed(line_no, format!("bad entry {line:?}"))),
    };
    let price = CompactPrice::parse(price).ok_or_else(|| malformed(line_no, format!("bad price {price:?}")))?;
    let delta_seconds = parse_canonical(delta).ok_or_else(|| malformed(line_no, format!("bad delta {delta:?}")))?;
    let key_id = match id {
        Some(id) => Some(parse_canonical::<KeyId>(id).ok_or_else(|| malformed(line_no, format!("bad id {id:?}")))?),
        None => None,
    };
    Ok(CompactEntry { price, delta_seconds, key_id })
}

fn parse_table(line_no: usize, line: &str) -> Result<HuffmanCodeTable, CodecError> {
    let mut pairs = Vec::new();
    for item in line["#T".len()..].split(' ').skip(1) {
        let (id, len) = item.split_once(':').ok_or_else(|| malformed(line_no, format!("bad table item {item:?}")))?;
        let id: KeyId = parse_canonical(id).ok_or_else(|| malformed(line_no, format!("bad id {id:?}")))?;
        let len: u8 = parse_canonical(len).ok_or_else(|| malformed(line_no, format!("bad length {len:?}")))?;
        pairs.push((id, len));
    }
    let table = HuffmanCodeTable::from_lengths(pairs.iter().copied())
        .map_err(|e| malformed(line_no, e.to_string()))?;
    if table.lengths() != pairs.as_slice() {
        return Err(malformed(line_no, "table not in canonical (length, id) order"));
    }
    Ok(table)
}

fn parse_bits(line_no: usize, line: &str) -> Result<BitVector, CodecError> {
    let parts: Vec<&str> = line.split(' ').collect();
    let (len, hex_digits) = match parts[..] {
        ["#P", "0"] => ("0", ""),
        ["#P", len, hex_digits] if !hex_digits.is_empty() => (len, hex_digits),
        _ => return Err(malformed(line_no, format!("bad payload line {line:?}"))),
    };
    let len: usize = parse_canonical(len).ok_or_else(|| malformed(line_no, "bad bit length"))?;
    if hex_digits.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(malformed(line_no, "hex digits must be lowercase"));
    }
    let bytes = hex::decode(hex_digits).map_err(|e| malformed(line_no, e.to_string()))?;
    BitVector::from_parts(bytes, len).map_err(|e| malformed(line_no, e.to_string()))
}

/// Decimal without sign or redundant leading zeros, so parsing and printing agree.
fn parse_canonical<T: std::str::FromStr>(s: &str) -> Option<T> {
    let ok = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s.len() == 1 || !s.starts_with('0'));
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_batch, CodecConfig};
    use crate::dictionary::{default_universe, Dictionary};
    use crate::record::{gen_records, GeneratorConfig, SpotPriceRecord};

    fn sample() -> Vec<SpotPriceRecord> {
        let u = default_universe();
        let t = 1_557_335_318;
        vec![
            SpotPriceRecord { price_micro: 41_500, timestamp_epoch: t, key: u[3].clone() },
            SpotPriceRecord { price_micro: 42_000, timestamp_epoch: t + 37, key: u[0].clone() },
            SpotPriceRecord { price_micro: 41_900, timestamp_epoch: t + 86_400, key: u[3].clone() },
        ]
    }

    #[test]
    fn bytewise_layout() {
        let d = Dictionary::build(default_universe()).unwrap();
        let b = encode_batch(&sample(), &d, &CodecConfig::default()).unwrap();
        let text = String::from_utf8(serialize_compact(&b)).unwrap();
        assert_eq!(
            text,
            "#C bytewise 86400 3\n#B 2019-05-08T17:08:38\n0.0415,0,3\n0.0420,37,0\n#B 2019-05-09T17:08:38\n0.0419,0,3\n"
        );
        assert_eq!(parse_compact(text.as_bytes()).unwrap(), b);
    }

    #[test]
    fn huffman_layout() {
        let d = Dictionary::build(default_universe()).unwrap();
        let cfg = CodecConfig { id_encoding: IdEncoding::BitwiseHuffman, ..Default::default() };
        let b = encode_batch(&sample(), &d, &cfg).unwrap();
        let text = String::from_utf8(serialize_compact(&b)).unwrap();
        // ids [3, 0, 3]: freq {0:1, 3:2} -> lengths 0:1, 3:1 -> codes 0="0", 3="1" -> "101".
        assert_eq!(
            text,
            "#C huffman 86400 3\n#B 2019-05-08T17:08:38\n0.0415,0\n0.0420,37\n#B 2019-05-09T17:08:38\n0.0419,0\n#T 0:1 3:1\n#P 3 a0\n"
        );
        assert_eq!(parse_compact(text.as_bytes()).unwrap(), b);
    }

    #[test]
    fn empty_batches_are_header_only() {
        let d = Dictionary::build(default_universe()).unwrap();
        let b = encode_batch(&[], &d, &CodecConfig::default()).unwrap();
        assert_eq!(serialize_compact(&b), b"#C bytewise 86400 0\n");
        assert_eq!(parse_compact(b"#C bytewise 86400 0\n").unwrap(), b);

        let cfg = CodecConfig { id_encoding: IdEncoding::BitwiseHuffman, ..Default::default() };
        let b = encode_batch(&[], &d, &cfg).unwrap();
        assert_eq!(serialize_compact(&b), b"#C huffman 86400 0\n#T\n#P 0\n");
        assert_eq!(parse_compact(&serialize_compact(&b)).unwrap(), b);
    }

    #[test]
    fn rejects_malformed_payloads() {
        let cases: &[&str] = &[
            "",
            "#C bytewise 86400 0",
            "#C bytewise 0 0\n",
            "#C zip 86400 0\n",
            "#C bytewise 86400 1\n",
            "#C bytewise 86400 1\n0.0415,0,3\n",
            "#C bytewise 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n",
            "#C bytewise 86400 1\n#B 2019-05-08T17:08:38\n0.0415,86400,3\n",
            "#C bytewise 86400 1\n#B 2019-05-08T17:08:38\n0.415,0,3\n",
            "#C bytewise 86400 1\n#B 2019-05-08T17:08:38\n0.0415,01,3\n",
            "#C bytewise 86400 2\n#B 2019-05-08T17:08:38\n0.0415,5,3\n0.0415,4,3\n",
            "#C bytewise 86400 2\n#B 2019-05-08T17:08:38\n0.0415,0,3\n#B 2019-05-08T17:08:38\n0.0415,0,3\n",
            "#C bytewise 86400 1\n#B 2019-05-08T17:08:38\n#B 2019-05-09T17:08:38\n0.0415,0,3\n",
            "#C bytewise 86400 0\n#T\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1\n#P 1 01\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1\n#P 9 00\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1 1:1\n#P 1 00\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1\n#P 1 00\nextra\n",
            "#C huffman 86400 1\n#B 2019-05-08T17:08:38\n0.0415,0\n#T 3:1\n#P 1 zz\n",
        ];
        for case in cases {
            assert!(
                matches!(parse_compact(case.as_bytes()), Err(CodecError::MalformedCompactPayload { .. })),
                "accepted {case:?}"
            );
        }
    }

    #[test]
    fn generated_batches_round_trip() {
        let d = Dictionary::build(default_universe()).unwrap();
        let recs = gen_records(650, &GeneratorConfig::with_seed(1)).unwrap();
        for enc in [IdEncoding::Bytewise, IdEncoding::BitwiseHuffman] {
            let cfg = CodecConfig { id_encoding: enc, base_interval_seconds: 3_600 };
            let b = encode_batch(&recs, &d, &cfg).unwrap();
            assert_eq!(parse_compact(&serialize_compact(&b)).unwrap(), b);
        }
    }
}
