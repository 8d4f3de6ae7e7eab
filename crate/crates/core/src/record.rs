//! Raw spot-price records and their tab-separated line format.
//!
//! A line carries six columns in this order:
//!
//! ```text
//! SPOTINSTANCEPRICE<TAB>0.041500<TAB>2019-05-08T17:08:38+0000<TAB>m3.large<TAB>Linux/UNIX<TAB>us-east-1a
//! ```
//!
//! Prices are held as integer micro-units and timestamps as UTC epoch seconds,
//! so a well-formed line renders back byte-for-byte.

use std::fmt;

use chrono::{DateTime, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dictionary::CompositeKey;

/// Constant first column of every record.
pub const RECORD_TAG: &str = "SPOTINSTANCEPRICE";

/// UTC offset suffix carried by every raw timestamp.
pub const UTC_OFFSET: &str = "+0000";

pub const FIELD_SEPARATOR: char = '\t';

/// Micro-units per currency unit.
pub const MICROS_PER_UNIT: u64 = 1_000_000;

/// Raw prices always end in two zero digits, so micro-prices are multiples of this.
pub const PRICE_GRANULE: u64 = 100;

/// Last second representable with a four digit year (9999-12-31T23:59:59Z).
pub const MAX_EPOCH: i64 = 253_402_300_799;

const NAIVE_TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed record line: {0}")]
    MalformedLine(String),
    #[error("bad record tag {0:?}")]
    BadTag(String),
    #[error("price {0:?} has non-zero trailing digits")]
    BadPrice(String),
    #[error("timestamp offset {0:?} is not +0000")]
    BadOffset(String),
}

/// One raw price observation. The tag column is implied by [`RECORD_TAG`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpotPriceRecord {
    pub price_micro: u64,
    pub timestamp_epoch: i64,
    pub key: CompositeKey,
}

impl SpotPriceRecord {
    pub fn new(price_micro: u64, timestamp_epoch: i64, key: CompositeKey) -> Result<Self, RecordError> {
        if !price_micro.is_multiple_of(PRICE_GRANULE) {
            return Err(RecordError::BadPrice(format_price_micro(price_micro)));
        }
        if !(0..=MAX_EPOCH).contains(&timestamp_epoch) {
            return Err(RecordError::MalformedLine(format!(
                "timestamp {timestamp_epoch} outside 0..={MAX_EPOCH}"
            )));
        }
        Ok(Self { price_micro, timestamp_epoch, key })
    }

    pub fn tag(&self) -> &'static str {
        RECORD_TAG
    }
}

impl fmt::Display for SpotPriceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{RECORD_TAG}\t{}\t{}{UTC_OFFSET}\t{}\t{}\t{}",
            format_price_micro(self.price_micro),
            format_naive_timestamp(self.timestamp_epoch),
            self.key.instance_type,
            self.key.operating_system,
            self.key.zone,
        )
    }
}

/// Parses one record line (without its trailing newline).
pub fn parse_record(line: &str) -> Result<SpotPriceRecord, RecordError> {
    let fields: Vec<&str> = line.split(FIELD_SEPARATOR).collect();
    let [tag, price, timestamp, instance_type, os, zone] = fields[..] else {
        return Err(RecordError::MalformedLine(format!(
            "expected 6 tab-separated fields, found {}",
            fields.len()
        )));
    };
    if tag != RECORD_TAG {
        return Err(RecordError::BadTag(tag.to_string()));
    }
    let price_micro = parse_price_micro(price)?;
    let timestamp_epoch = parse_offset_timestamp(timestamp)?;
    let key = CompositeKey::new(instance_type, os, zone)
        .map_err(|e| RecordError::MalformedLine(e.to_string()))?;
    SpotPriceRecord::new(price_micro, timestamp_epoch, key)
}

/// Renders a record in the exact raw line format, without a newline.
pub fn render_record(record: &SpotPriceRecord) -> String {
    record.to_string()
}

/// Parses a whole raw file body: one record per LF-terminated line.
pub fn parse_records(text: &str) -> Result<Vec<SpotPriceRecord>, (usize, RecordError)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_record(line).map_err(|e| (i + 1, e)))
        .collect()
}

/// Renders records as a raw file body, every line LF-terminated.
pub fn render_records(records: &[SpotPriceRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96);
    for r in records {
        use fmt::Write;
        let _ = writeln!(out, "{r}");
    }
    out
}

/// `41500` -> `"0.041500"`.
pub fn format_price_micro(price_micro: u64) -> String {
    format!("{}.{:06}", price_micro / MICROS_PER_UNIT, price_micro % MICROS_PER_UNIT)
}

fn parse_price_micro(text: &str) -> Result<u64, RecordError> {
    let malformed = || RecordError::MalformedLine(format!("unparseable price {text:?}"));
    let (int_part, frac_part) = text.split_once('.').ok_or_else(malformed)?;
    if int_part.is_empty()
        || frac_part.len() != 6
        || !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
        || (int_part.len() > 1 && int_part.starts_with('0'))
    {
        return Err(malformed());
    }
    let units: u64 = int_part.parse().map_err(|_| malformed())?;
    let frac: u64 = frac_part.parse().map_err(|_| malformed())?;
    let micro = units
        .checked_mul(MICROS_PER_UNIT)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(malformed)?;
    if !frac_part.ends_with("00") {
        return Err(RecordError::BadPrice(text.to_string()));
    }
    Ok(micro)
}

/// `YYYY-MM-DDTHH:MM:SS` rendering of epoch seconds (UTC, no offset).
pub fn format_naive_timestamp(epoch: i64) -> String {
    DateTime::from_timestamp(epoch, 0)
        .map(|dt| dt.naive_utc().format(NAIVE_TS_FORMAT).to_string())
        .unwrap_or_else(|| format!("<invalid epoch {epoch}>"))
}

/// Parses `YYYY-MM-DDTHH:MM:SS` (exactly 19 characters) to epoch seconds.
pub fn parse_naive_timestamp(text: &str) -> Option<i64> {
    let b = text.as_bytes();
    if b.len() != 19 {
        return None;
    }
    let shape_ok = b.iter().enumerate().all(|(i, &c)| match i {
        4 | 7 => c == b'-',
        10 => c == b'T',
        13 | 16 => c == b':',
        _ => c.is_ascii_digit(),
    });
    if !shape_ok {
        return None;
    }
    let naive = NaiveDateTime::parse_from_str(text, NAIVE_TS_FORMAT).ok()?;
    let epoch = naive.and_utc().timestamp();
    (0..=MAX_EPOCH).contains(&epoch).then_some(epoch)
}

fn parse_offset_timestamp(text: &str) -> Result<i64, RecordError> {
    if text.len() != 24 || !text.is_char_boundary(19) {
        return Err(RecordError::MalformedLine(format!("unparseable timestamp {text:?}")));
    }
    let (naive, offset) = text.split_at(19);
    let epoch = parse_naive_timestamp(naive)
        .ok_or_else(|| RecordError::MalformedLine(format!("unparseable timestamp {text:?}")))?;
    if offset != UTC_OFFSET {
        return Err(RecordError::BadOffset(offset.to_string()));
    }
    Ok(epoch)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("max_step_seconds must be at least 1")]
    ZeroStep,
    #[error("key universe is empty")]
    EmptyUniverse,
    #[error("price range ({0}, {1}) must be ordered multiples of 100 micro-units")]
    BadPriceRange(u64, u64),
    #[error("start epoch {0} outside 0..={MAX_EPOCH}")]
    BadStart(i64),
}

/// Parameters for the synthetic price-history generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub start_epoch: i64,
    pub max_step_seconds: u32,
    pub key_universe: Vec<CompositeKey>,
    /// Inclusive bounds in micro-units.
    pub price_range_micro: (u64, u64),
}

impl GeneratorConfig {
    /// Start of the default corpus: 2019-05-08T17:08:38Z.
    pub const DEFAULT_START: i64 = 1_557_335_318;
    pub const DEFAULT_MAX_STEP: u32 = 600;
    pub const DEFAULT_PRICE_RANGE: (u64, u64) = (10_000, 2_000_000);

    /// Seeded config over [`crate::dictionary::default_universe`].
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            start_epoch: Self::DEFAULT_START,
            max_step_seconds: Self::DEFAULT_MAX_STEP,
            key_universe: crate::dictionary::default_universe(),
            price_range_micro: Self::DEFAULT_PRICE_RANGE,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let (lo, hi) = self.price_range_micro;
        if self.max_step_seconds == 0 {
            return Err(GeneratorError::ZeroStep);
        }
        if self.key_universe.is_empty() {
            return Err(GeneratorError::EmptyUniverse);
        }
        if lo > hi || lo % PRICE_GRANULE != 0 || hi % PRICE_GRANULE != 0 {
            return Err(GeneratorError::BadPriceRange(lo, hi));
        }
        if !(0..=MAX_EPOCH).contains(&self.start_epoch) {
            return Err(GeneratorError::BadStart(self.start_epoch));
        }
        Ok(())
    }
}

/// Deterministic synthetic price history with non-decreasing timestamps.
///
/// Timestamps saturate at [`MAX_EPOCH`] so very long runs stay renderable.
pub fn gen_records(n: usize, cfg: &GeneratorConfig) -> Result<Vec<SpotPriceRecord>, GeneratorError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.price_range_micro;
    let mut ts = cfg.start_epoch;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let step = rng.random_range(0..=cfg.max_step_seconds);
            ts = (ts + i64::from(step)).min(MAX_EPOCH);
        }
        let granules = rng.random_range(lo / PRICE_GRANULE..=hi / PRICE_GRANULE);
        let key = cfg.key_universe[rng.random_range(0..cfg.key_universe.len())].clone();
        out.push(SpotPriceRecord { price_micro: granules * PRICE_GRANULE, timestamp_epoch: ts, key });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str =
        "SPOTINSTANCEPRICE\t0.041500\t2019-05-08T17:08:38+0000\tm3.large\tLinux/UNIX\tus-east-1a";

    fn key(a: &str, b: &str, c: &str) -> CompositeKey {
        CompositeKey::new(a, b, c).unwrap()
    }

    #[test]
    fn parses_sample_line() {
        let r = parse_record(LINE).unwrap();
        assert_eq!(r.price_micro, 41500);
        assert_eq!(r.timestamp_epoch, 1_557_335_318);
        assert_eq!(r.key, key("m3.large", "Linux/UNIX", "us-east-1a"));
        assert_eq!(r.tag(), RECORD_TAG);
        assert_eq!(render_record(&r), LINE);
    }

    #[test]
    fn parses_epoch_origin() {
        let line = "SPOTINSTANCEPRICE\t0.000000\t1970-01-01T00:00:00+0000\ta\tb\tc";
        let r = parse_record(line).unwrap();
        assert_eq!(r, SpotPriceRecord { price_micro: 0, timestamp_epoch: 0, key: key("a", "b", "c") });
        assert_eq!(render_record(&r), line);
    }

    #[test]
    fn rejects_nonzero_trailing_price_digits() {
        let line = LINE.replace("0.041500", "0.041501");
        assert_eq!(parse_record(&line), Err(RecordError::BadPrice("0.041501".into())));
    }

    #[test]
    fn rejects_bad_tag_and_offset() {
        let line = LINE.replace(RECORD_TAG, "SPOTPRICE");
        assert!(matches!(parse_record(&line), Err(RecordError::BadTag(_))));
        let line = LINE.replace("+0000", "+0100");
        assert_eq!(parse_record(&line), Err(RecordError::BadOffset("+0100".into())));
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in [
            "",
            "SPOTINSTANCEPRICE\t0.041500",
            &format!("{LINE}\textra"),
            &LINE.replace("0.041500", "0.0415"),
            &LINE.replace("0.041500", "00.041500"),
            &LINE.replace("0.041500", "-0.041500"),
            &LINE.replace("0.041500", "0.04150x"),
            &LINE.replace("2019-05-08T17:08:38", "2019-05-08 17:08:38"),
            &LINE.replace("2019-05-08T17:08:38", "2019-02-30T17:08:38"),
            &LINE.replace("2019-05-08T17:08:38", "1969-12-31T23:59:59"),
            &LINE.replace("m3.large", ""),
        ] {
            assert!(
                matches!(parse_record(bad), Err(RecordError::MalformedLine(_))),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn constructor_enforces_invariants() {
        let k = key("a", "b", "c");
        assert!(SpotPriceRecord::new(41_501, 0, k.clone()).is_err());
        assert!(SpotPriceRecord::new(41_500, -1, k.clone()).is_err());
        assert!(SpotPriceRecord::new(41_500, MAX_EPOCH, k).is_ok());
    }

    #[test]
    fn generator_is_deterministic_and_ordered() {
        let cfg = GeneratorConfig::with_seed(7);
        assert!(gen_records(0, &cfg).unwrap().is_empty());
        assert_eq!(gen_records(5, &cfg).unwrap(), gen_records(5, &cfg).unwrap());
        assert_ne!(gen_records(5, &cfg).unwrap(), gen_records(5, &GeneratorConfig::with_seed(8)).unwrap());

        let recs = gen_records(650, &GeneratorConfig::with_seed(1)).unwrap();
        assert_eq!(recs.len(), 650);
        for w in recs.windows(2) {
            let gap = w[1].timestamp_epoch - w[0].timestamp_epoch;
            assert!((0..=i64::from(GeneratorConfig::DEFAULT_MAX_STEP)).contains(&gap));
        }
        let universe = crate::dictionary::default_universe();
        for r in &recs {
            assert_eq!(r.price_micro % PRICE_GRANULE, 0);
            assert!(universe.contains(&r.key));
            assert_eq!(parse_record(&render_record(r)).as_ref(), Ok(r));
        }
    }

    #[test]
    fn generator_rejects_bad_config() {
        let mut cfg = GeneratorConfig::with_seed(1);
        cfg.max_step_seconds = 0;
        assert_eq!(cfg.validate(), Err(GeneratorError::ZeroStep));
        let mut cfg = GeneratorConfig::with_seed(1);
        cfg.key_universe.clear();
        assert_eq!(gen_records(1, &cfg), Err(GeneratorError::EmptyUniverse));
        let mut cfg = GeneratorConfig::with_seed(1);
        cfg.price_range_micro = (200, 100);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn multi_line_body_reports_line_numbers() {
        let body = format!("{LINE}\n{}\n", LINE.replace("+0000", "-0300"));
        let (line, err) = parse_records(&body).unwrap_err();
        assert_eq!(line, 2);
        assert!(matches!(err, RecordError::BadOffset(_)));
    }
}
