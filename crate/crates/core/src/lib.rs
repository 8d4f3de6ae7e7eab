//! Compact representation of spot-price record streams.
//!
//! The pipeline is: parse raw records ([`record`]), map composite service keys
//! to sequential ids through an injected lookup table ([`dictionary`]), and
//! encode batches into a queryable compact form ([`codec`]). [`latency`] holds
//! the arithmetic used to compare compact and plain transfers.

pub mod codec;
pub mod dictionary;
pub mod latency;
pub mod record;

pub use codec::{
    decode_batch, encode_batch, parse_compact, serialize_compact, CodecConfig, CodecError, CompactBatch, IdEncoding,
};
pub use dictionary::{CompositeKey, Dictionary, DictionaryError, KeyId};
pub use latency::{ProcessingMode, ReportFormat, Seconds};
pub use record::{parse_record, render_record, GeneratorConfig, RecordError, SpotPriceRecord};

/// Latency observation in `f64` seconds.
pub type Measurement = latency::LatencyMeasurement<f64>;
/// Latency observation in `f32` seconds.
pub type Measurement32 = latency::LatencyMeasurement<f32>;
/// Sweep report in `f64` seconds.
pub type Report = latency::BenchReport<f64>;
/// Sweep report in `f32` seconds.
pub type Report32 = latency::BenchReport<f32>;
pub type Row = latency::BenchRow<f64>;
