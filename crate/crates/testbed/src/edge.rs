//! Edge node: on each request it fetches raw records from the source, then
//! either converts them to the compact form or relays them unchanged, and
//! reports how long that local processing took.
//!
//! Requests are handled one at a time. The processing timer starts after the
//! last byte of the cascade response is in memory and stops before the reply
//! is handed back to the HTTP layer.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Query, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use cds_core::codec::{encode_batch, serialize_compact, CodecConfig, CodecError};
use cds_core::dictionary::{load_dictionary, Dictionary, DictionaryError};
use cds_core::record::{parse_records, RecordError};
use cds_core::ProcessingMode;
use thiserror::Error;
use tokio::sync::Mutex;
use tracing::{debug, info, warn};

use crate::parse_count;

pub const PROCESS_PATH: &str = "/process";
pub const HEADER_PROCESSING_MILLIS: &str = "x-processing-millis";
/// Same measurement at nanosecond resolution; loopback runs are too fast for milliseconds.
pub const HEADER_PROCESSING_NANOS: &str = "x-processing-nanos";
pub const HEADER_RECORDS: &str = "x-records";
pub const HEADER_BYTES_IN: &str = "x-bytes-in";

pub const DEFAULT_MAX_RECORDS: usize = 650;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConfig {
    /// Base URL of the data source, e.g. `http://127.0.0.1:8080`.
    pub source_url: String,
    /// Mode used when a request does not name one.
    pub mode: ProcessingMode,
    pub max_records: usize,
    pub dictionary_path: PathBuf,
    pub codec: CodecConfig,
}

impl EdgeConfig {
    pub fn new(source_url: impl Into<String>, dictionary_path: impl Into<PathBuf>) -> Self {
        Self {
            source_url: source_url.into(),
            mode: ProcessingMode::Cds,
            max_records: DEFAULT_MAX_RECORDS,
            dictionary_path: dictionary_path.into(),
            codec: CodecConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessingReport {
    pub processing: Duration,
    pub records_in: usize,
    pub bytes_in: usize,
    pub bytes_out: usize,
    pub mode: ProcessingMode,
}

impl ProcessingReport {
    pub fn processing_millis(&self) -> u64 {
        self.processing.as_millis() as u64
    }

    pub fn processing_nanos(&self) -> u64 {
        self.processing.as_nanos() as u64
    }
}

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("{requested} records requested but this edge node handles at most {max}")]
    TooManyRecords { requested: usize, max: usize },
    #[error("data source unreachable: {0}")]
    SourceUnreachable(String),
    #[error("data source answered {status}: {body}")]
    SourceStatus { status: u16, body: String },
    #[error("source payload is not UTF-8")]
    NotUtf8,
    #[error("source line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("cannot load dictionary {path}: {source}")]
    Dictionary { path: PathBuf, source: DictionaryError },
    #[error("invalid edge config: {0}")]
    Config(String),
}

impl EdgeError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::TooManyRecords { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            Self::SourceUnreachable(_) | Self::SourceStatus { .. } => StatusCode::BAD_GATEWAY,
            Self::NotUtf8 | Self::Record { .. } | Self::Codec(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Dictionary { .. } | Self::Config(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Buffers the incoming bytes, splits them into records and re-emits each record.
pub fn relay_records(raw: &[u8]) -> (Vec<u8>, ProcessingReport) {
    let started = Instant::now();
    let cache = raw.to_vec();
    let records: Vec<&[u8]> = cache.split_inclusive(|&b| b == b'\n').collect();
    let mut out = Vec::with_capacity(cache.len());
    for record in &records {
        out.extend_from_slice(record);
    }
    let processing = started.elapsed();
    let report = ProcessingReport {
        processing,
        records_in: records.len(),
        bytes_in: raw.len(),
        bytes_out: out.len(),
        mode: ProcessingMode::Relay,
    };
    (out, report)
}

/// Parses raw record lines and returns their compact serialization.
pub fn compact_records(raw: &[u8], dict: &Dictionary, codec: &CodecConfig) -> Result<(Vec<u8>, ProcessingReport), EdgeError> {
    let started = Instant::now();
    let text = std::str::from_utf8(raw).map_err(|_| EdgeError::NotUtf8)?;
    let records = parse_records(text).map_err(|(line, source)| EdgeError::Record { line, source })?;
    let batch = encode_batch(&records, dict, codec)?;
    let out = serialize_compact(&batch);
    let processing = started.elapsed();
    let report = ProcessingReport {
        processing,
        records_in: records.len(),
        bytes_in: raw.len(),
        bytes_out: out.len(),
        mode: ProcessingMode::Cds,
    };
    Ok((out, report))
}

pub struct EdgeNode {
    cfg: EdgeConfig,
    dict: Dictionary,
    http: reqwest::Client,
    in_flight: Mutex<()>,
}

impl EdgeNode {
    /// Loads the lookup table named in `cfg`.
    pub fn from_config(cfg: EdgeConfig) -> Result<Self, EdgeError> {
        let dict = load_dictionary(&cfg.dictionary_path)
            .map_err(|source| EdgeError::Dictionary { path: cfg.dictionary_path.clone(), source })?;
        Self::with_dictionary(cfg, dict)
    }

    pub fn with_dictionary(cfg: EdgeConfig, dict: Dictionary) -> Result<Self, EdgeError> {
        if cfg.max_records == 0 {
            return Err(EdgeError::Config("max_records must be at least 1".into()));
        }
        cfg.codec.validate()?;
        Ok(Self { cfg, dict, http: reqwest::Client::new(), in_flight: Mutex::new(()) })
    }

    pub fn config(&self) -> &EdgeConfig {
        &self.cfg
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    /// Fetches `n` records from the source and processes them in `mode`.
    pub async fn handle(&self, n: usize, mode: ProcessingMode) -> Result<(Vec<u8>, ProcessingReport), EdgeError> {
        if n > self.cfg.max_records {
            return Err(EdgeError::TooManyRecords { requested: n, max: self.cfg.max_records });
        }
        let _turn = self.in_flight.lock().await;
        let raw = self.fetch_source(n).await?;
        match mode {
            ProcessingMode::Relay => Ok(relay_records(&raw)),
            ProcessingMode::Cds => compact_records(&raw, &self.dict, &self.cfg.codec),
        }
    }

    async fn fetch_source(&self, n: usize) -> Result<Vec<u8>, EdgeError> {
        let url = format!("{}/data?records={n}", self.cfg.source_url.trim_end_matches('/'));
        let resp = self.http.get(&url).send().await.map_err(|e| EdgeError::SourceUnreachable(e.to_string()))?;
        let status = resp.status();
        let body = resp.bytes().await.map_err(|e| EdgeError::SourceUnreachable(e.to_string()))?;
        if !status.is_success() {
            return Err(EdgeError::SourceStatus {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&body).trim().to_string(),
            });
        }
        Ok(body.to_vec())
    }
}

/// Router answering `GET /process?records=N&mode=cds|relay`.
pub fn edge_router(node: Arc<EdgeNode>) -> Router {
    Router::new().route(PROCESS_PATH, get(process)).with_state(node)
}

async fn process(State(node): State<Arc<EdgeNode>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(n) = q.get("records").and_then(|v| parse_count(v)) else {
        return (StatusCode::BAD_REQUEST, "expected records=<non-negative integer>\n").into_response();
    };
    let mode = match q.get("mode").map(|m| m.parse::<ProcessingMode>()) {
        None => node.config().mode,
        Some(Ok(m)) => m,
        Some(Err(e)) => return (StatusCode::BAD_REQUEST, format!("{e}\n")).into_response(),
    };
    match node.handle(n, mode).await {
        Ok((payload, report)) => {
            debug!(records = n, %mode, nanos = report.processing_nanos(), bytes_out = report.bytes_out, "processed");
            let mut headers = HeaderMap::new();
            headers.insert(HEADER_PROCESSING_MILLIS, HeaderValue::from(report.processing_millis()));
            headers.insert(HEADER_PROCESSING_NANOS, HeaderValue::from(report.processing_nanos()));
            headers.insert(HEADER_RECORDS, HeaderValue::from(report.records_in as u64));
            headers.insert(HEADER_BYTES_IN, HeaderValue::from(report.bytes_in as u64));
            headers.insert(axum::http::header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
            (headers, payload).into_response()
        }
        Err(e) => {
            let status = e.status();
            if status.is_server_error() {
                warn!(records = n, %mode, error = %e, "request failed");
            } else {
                info!(records = n, %mode, error = %e, "request refused");
            }
            (status, format!("{e}\n")).into_response()
        }
    }
}
