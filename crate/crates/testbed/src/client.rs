//! Measuring client and the sweep driver built on it.

use std::time::Instant;

use cds_core::latency::{BenchReport, LatencyMeasurement, Seconds};
use cds_core::ProcessingMode;
use thiserror::Error;
use tracing::{info, warn};

use crate::edge::{HEADER_PROCESSING_MILLIS, HEADER_PROCESSING_NANOS};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("edge node unreachable: {0}")]
    EdgeUnreachable(String),
    #[error("edge node answered {status}: {body}")]
    EdgeError { status: u16, body: String },
    #[error("edge response lacks a usable processing-time header")]
    MissingProcessingTime,
}

/// One completed request: the timing and what came back.
#[derive(Debug, Clone)]
pub struct Fetched<T> {
    pub measurement: LatencyMeasurement<T>,
    pub payload: Vec<u8>,
}

/// Requests `n` records in `mode` and times the exchange from sending the
/// request to receiving the last body byte.
pub async fn client_fetch<T: Seconds>(
    http: &reqwest::Client,
    edge_url: &str,
    n: usize,
    mode: ProcessingMode,
) -> Result<Fetched<T>, ClientError> {
    let url = format!("{}/process?records={n}&mode={mode}", edge_url.trim_end_matches('/'));
    let started = Instant::now();
    let resp = http.get(&url).send().await.map_err(|e| ClientError::EdgeUnreachable(e.to_string()))?;
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.bytes().await.map_err(|e| ClientError::EdgeUnreachable(e.to_string()))?;
    let wall_clock = started.elapsed();

    if !status.is_success() {
        return Err(ClientError::EdgeError {
            status: status.as_u16(),
            body: String::from_utf8_lossy(&body).trim().to_string(),
        });
    }
    let header_u64 = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).and_then(|v| v.parse::<u64>().ok());
    let processing = match (header_u64(HEADER_PROCESSING_NANOS), header_u64(HEADER_PROCESSING_MILLIS)) {
        (Some(ns), _) => T::from_nanos(ns),
        (None, Some(ms)) => T::from_millis(ms),
        (None, None) => return Err(ClientError::MissingProcessingTime),
    };
    Ok(Fetched {
        measurement: LatencyMeasurement {
            record_amount: n,
            mode,
            wall_clock_seconds: T::from_duration(wall_clock),
            processing_seconds: processing,
            bytes_received: body.len(),
        },
        payload: body.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub repetitions: usize,
    /// Requests per cell whose measurements are discarded.
    pub warmup: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { repetitions: 5, warmup: 0 }
    }
}

/// Sweeps `amounts` × both modes with sequential requests, no think time.
///
/// A failed request stops the sweep; the report then keeps every measurement
/// taken so far and carries the error in `failure`.
pub async fn run_sweep<T: Seconds>(
    edge_url: &str,
    amounts: &[usize],
    opts: SweepOptions,
    corpus_descriptor: &str,
    mut observe: impl FnMut(&Fetched<T>),
) -> BenchReport<T> {
    let http = reqwest::Client::new();
    let mut measurements = Vec::new();
    let mut failure = None;
    let mut sorted = amounts.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    'sweep: for &n in &sorted {
        for mode in ProcessingMode::ALL {
            for i in 0..opts.warmup + opts.repetitions.max(1) {
                match client_fetch::<T>(&http, edge_url, n, mode).await {
                    Ok(f) if i >= opts.warmup => {
                        observe(&f);
                        measurements.push(f.measurement);
                    }
                    Ok(_) => {}
                    Err(e) => {
                        warn!(records = n, %mode, error = %e, "sweep aborted");
                        failure = Some(format!("{n} records, {mode}: {e}"));
                        break 'sweep;
                    }
                }
            }
        }
        info!(records = n, "row measured");
    }

    let mut report = BenchReport::from_measurements(measurements, opts.repetitions.max(1), corpus_descriptor);
    report.failure = failure;
    report
}
