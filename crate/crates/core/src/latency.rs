//! Latency measurements, computation-to-communication ratios and sweep reports.
//!
//! Everything here is generic over the float type used for durations so the
//! same arithmetic serves `f64` reports and `f32` dashboards.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display, Write};

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

/// Scalar type for durations in seconds.
pub trait Seconds: Float + FromPrimitive + Display + Debug + Default + Send + Sync + 'static {
    fn from_millis(ms: u64) -> Self {
        Self::from_u64(ms).unwrap() / Self::from_u64(1_000).unwrap()
    }

    fn from_nanos(ns: u64) -> Self {
        Self::from_u64(ns).unwrap() / Self::from_u64(1_000_000_000).unwrap()
    }

    fn from_duration(d: std::time::Duration) -> Self {
        Self::from_f64(d.as_secs_f64()).unwrap()
    }
}

impl<T> Seconds for T where T: Float + FromPrimitive + Display + Debug + Default + Send + Sync + 'static {}

/// How the edge node handled a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcessingMode {
    /// Records are converted to the compact form.
    Cds,
    /// Records are buffered and forwarded unchanged.
    Relay,
}

impl ProcessingMode {
    pub const ALL: [ProcessingMode; 2] = [ProcessingMode::Cds, ProcessingMode::Relay];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cds => "cds",
            Self::Relay => "relay",
        }
    }
}

impl fmt::Display for ProcessingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProcessingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cds" => Ok(Self::Cds),
            "relay" => Ok(Self::Relay),
            other => Err(format!("unknown mode {other:?} (expected cds or relay)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyMeasurement<T> {
    pub record_amount: usize,
    pub mode: ProcessingMode,
    pub wall_clock_seconds: T,
    pub processing_seconds: T,
    pub bytes_received: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("degenerate measurement: wall-clock {wall_clock} s does not exceed processing {processing} s")]
pub struct DegenerateMeasurement {
    pub wall_clock: f64,
    pub processing: f64,
}

/// `processing / (wall_clock - processing)`.
pub fn ratio<T: Seconds>(wall_clock: T, processing: T) -> Result<T, DegenerateMeasurement> {
    if wall_clock > processing && processing >= T::zero() {
        Ok(processing / (wall_clock - processing))
    } else {
        Err(DegenerateMeasurement {
            wall_clock: wall_clock.to_f64().unwrap_or(f64::NAN),
            processing: processing.to_f64().unwrap_or(f64::NAN),
        })
    }
}

pub fn compute_ratio<T: Seconds>(m: &LatencyMeasurement<T>) -> Result<T, DegenerateMeasurement> {
    ratio(m.wall_clock_seconds, m.processing_seconds)
}

/// Arithmetic-mean latencies for one (record amount, mode) cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanLatency<T> {
    pub wall_clock_seconds: T,
    pub processing_seconds: T,
    pub samples: usize,
}

impl<T: Seconds> MeanLatency<T> {
    pub fn of<'a, I>(measurements: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a LatencyMeasurement<T>>,
    {
        let (mut wall, mut proc, mut n) = (T::zero(), T::zero(), 0usize);
        for m in measurements {
            wall = wall + m.wall_clock_seconds;
            proc = proc + m.processing_seconds;
            n += 1;
        }
        let count = T::from_usize(n)?;
        (n > 0).then(|| Self { wall_clock_seconds: wall / count, processing_seconds: proc / count, samples: n })
    }

    pub fn ratio(&self) -> Result<T, DegenerateMeasurement> {
        ratio(self.wall_clock_seconds, self.processing_seconds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow<T> {
    pub record_amount: usize,
    pub cds: MeanLatency<T>,
    pub relay: MeanLatency<T>,
    /// `None` flags a degenerate mean (no positive communication time).
    pub cds_ratio: Option<T>,
    pub relay_ratio: Option<T>,
    /// CDS minus relay.
    pub wall_clock_difference: T,
    pub processing_difference: T,
}

impl<T: Seconds> BenchRow<T> {
    pub fn new(record_amount: usize, cds: MeanLatency<T>, relay: MeanLatency<T>) -> Self {
        Self {
            record_amount,
            cds,
            relay,
            cds_ratio: cds.ratio().ok(),
            relay_ratio: relay.ratio().ok(),
            wall_clock_difference: cds.wall_clock_seconds - relay.wall_clock_seconds,
            processing_difference: cds.processing_seconds - relay.processing_seconds,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.cds_ratio.is_none() || self.relay_ratio.is_none()
    }

    pub fn mean(&self, mode: ProcessingMode) -> &MeanLatency<T> {
        match mode {
            ProcessingMode::Cds => &self.cds,
            ProcessingMode::Relay => &self.relay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport<T> {
    /// Sorted by record amount.
    pub rows: Vec<BenchRow<T>>,
    pub repetitions: usize,
    pub corpus_descriptor: String,
    /// Every measurement taken, including ones from an aborted sweep.
    pub measurements: Vec<LatencyMeasurement<T>>,
    /// Set when the sweep stopped early.
    pub failure: Option<String>,
}

impl<T: Seconds> BenchReport<T> {
    /// Groups measurements by record amount; amounts missing either mode produce no row.
    pub fn from_measurements(
        measurements: Vec<LatencyMeasurement<T>>,
        repetitions: usize,
        corpus_descriptor: impl Into<String>,
    ) -> Self {
        let mut cells: BTreeMap<(usize, ProcessingMode), Vec<LatencyMeasurement<T>>> = BTreeMap::new();
        for m in &measurements {
            cells.entry((m.record_amount, m.mode)).or_default().push(*m);
        }
        let amounts: Vec<usize> = {
            let mut a: Vec<usize> = cells.keys().map(|&(n, _)| n).collect();
            a.dedup();
            a
        };
        let rows = amounts
            .into_iter()
            .filter_map(|n| {
                let cds = MeanLatency::of(cells.get(&(n, ProcessingMode::Cds))?)?;
                let relay = MeanLatency::of(cells.get(&(n, ProcessingMode::Relay))?)?;
                Some(BenchRow::new(n, cds, relay))
            })
            .collect();
        Self { rows, repetitions, corpus_descriptor: corpus_descriptor.into(), measurements, failure: None }
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Allowance for noisy monotonicity checks on live sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTolerance {
    /// Adjacent-row decreases tolerated per mode.
    pub max_violations_per_mode: usize,
    /// Largest tolerated relative drop for each such decrease.
    pub max_relative_drop: f64,
}

impl Default for TrendTolerance {
    fn default() -> Self {
        Self { max_violations_per_mode: 1, max_relative_drop: 0.10 }
    }
}

/// Direction-of-effect checks on a live sweep. Returns one message per failed check.
///
/// Per row, mean CDS processing must be at least the relay processing. Per
/// mode, mean processing must not decrease with record amount, except for the
/// drops `tol` allows.
pub fn check_trends<T: Seconds>(report: &BenchReport<T>, tol: TrendTolerance) -> Vec<String> {
    let mut failures = Vec::new();
    for row in &report.rows {
        if row.cds.processing_seconds < row.relay.processing_seconds {
            failures.push(format!(
                "{} records: cds processing {} s below relay processing {} s",
                row.record_amount, row.cds.processing_seconds, row.relay.processing_seconds
            ));
        }
    }
    for mode in ProcessingMode::ALL {
        let mut violations = 0;
        for pair in report.rows.windows(2) {
            let (a, b) = (pair[0].mean(mode).processing_seconds, pair[1].mean(mode).processing_seconds);
            if b >= a {
                continue;
            }
            violations += 1;
            let drop = ((a - b) / a).to_f64().unwrap_or(f64::INFINITY);
            if drop > tol.max_relative_drop {
                failures.push(format!(
                    "{mode} processing fell {:.1}% from {} to {} records",
                    drop * 100.0,
                    pair[0].record_amount,
                    pair[1].record_amount
                ));
            }
        }
        if violations > tol.max_violations_per_mode {
            failures.push(format!(
                "{mode} processing decreased {violations} times (allowed {})",
                tol.max_violations_per_mode
            ));
        }
    }
    failures
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format {other:?} (expected csv or markdown)")),
        }
    }
}

pub const CSV_HEADER: &str = "record_amount,cds_wall,cds_proc,relay_wall,relay_proc,cds_ratio,relay_ratio,wall_diff,proc_diff";

/// Renders a report. Undefined ratios are left empty in CSV and shown as `n/a` in markdown.
pub fn emit_report<T: Seconds>(report: &BenchReport<T>, format: ReportFormat) -> String {
    let mut out = String::new();
    let opt = |r: Option<T>| r.map(|v| v.to_string()).unwrap_or_default();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.record_amount,
                    r.cds.wall_clock_seconds,
                    r.cds.processing_seconds,
                    r.relay.wall_clock_seconds,
                    r.relay.processing_seconds,
                    opt(r.cds_ratio),
                    opt(r.relay_ratio),
                    r.wall_clock_difference,
                    r.processing_difference,
                );
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Record Amount | CDS Wall-clock Latency | CDS Processing Latency | Non-CDS Wall-clock Latency | Non-CDS Processing Latency |\n");
            out.push_str("|:-:|:-:|:-:|:-:|:-:|\n");
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "| {} | {:.3}s | {:.3}s | {:.3}s | {:.3}s |",
                    r.record_amount,
                    r.cds.wall_clock_seconds,
                    r.cds.processing_seconds,
                    r.relay.wall_clock_seconds,
                    r.relay.processing_seconds,
                );
            }
        }
    }
    out
}

/// Published latencies, in seconds, measured on a microcontroller edge node over WiFi:
/// (record amount, CDS wall-clock, CDS processing, relay wall-clock, relay processing).
pub const REFERENCE_LATENCIES: [(usize, f64, f64, f64, f64); 7] = [
    (12, 1.852, 0.735, 1.921, 0.539),
    (25, 2.935, 1.765, 2.992, 1.012),
    (50, 5.039, 3.533, 4.902, 1.935),
    (100, 9.148, 6.950, 8.672, 3.830),
    (200, 17.258, 13.791, 16.633, 7.713),
    (400, 33.588, 27.199, 31.837, 14.868),
    (600, 50.765, 41.630, 48.487, 23.314),
];

/// Record amounts of the default sweep, matching the reference table.
pub const DEFAULT_SWEEP_AMOUNTS: [usize; 7] = [12, 25, 50, 100, 200, 400, 600];

/// The reference table as a one-sample-per-cell report.
pub fn reference_report<T: Seconds>() -> BenchReport<T> {
    let secs = |v: f64| T::from_f64(v).unwrap();
    let rows = REFERENCE_LATENCIES
        .iter()
        .map(|&(n, cw, cp, rw, rp)| {
            let cds = MeanLatency { wall_clock_seconds: secs(cw), processing_seconds: secs(cp), samples: 1 };
            let relay = MeanLatency { wall_clock_seconds: secs(rw), processing_seconds: secs(rp), samples: 1 };
            BenchRow::new(n, cds, relay)
        })
        .collect();
    BenchReport {
        rows,
        repetitions: 1,
        corpus_descriptor: "reference measurements".into(),
        measurements: Vec::new(),
        failure: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureCheck {
    /// (record amount, cds ratio, relay ratio).
    pub ratios: Vec<(usize, f64, f64)>,
    pub failures: Vec<String>,
}

impl FixtureCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes both ratios on every reference row and checks that CDS processing
/// always exceeds relay processing and that the CDS ratio strictly rises with
/// record amount.
pub fn reference_fixture_check() -> FixtureCheck {
    let report = reference_report::<f64>();
    let mut ratios = Vec::new();
    let mut failures = Vec::new();
    for row in &report.rows {
        match (row.cds_ratio, row.relay_ratio) {
            (Some(c), Some(r)) => ratios.push((row.record_amount, c, r)),
            _ => failures.push(format!("{} records: degenerate reference row", row.record_amount)),
        }
        if row.cds.processing_seconds <= row.relay.processing_seconds {
            failures.push(format!("{} records: cds processing does not exceed relay processing", row.record_amount));
        }
    }
    for pair in ratios.windows(2) {
        if pair[1].1 <= pair[0].1 {
            failures.push(format!(
                "cds ratio {} at {} records does not exceed {} at {} records",
                pair[1].1, pair[1].0, pair[0].1, pair[0].0
            ));
        }
    }
    FixtureCheck { ratios, failures }
}
