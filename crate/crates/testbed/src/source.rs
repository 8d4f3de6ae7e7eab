//! HTTP data source hosting raw price files named `prices-<N>.tsv`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tracing::debug;

use crate::parse_count;

pub const DATA_PATH: &str = "/data";

/// Files available to the source, keyed by the record count in their name.
#[derive(Debug, Clone, Default)]
pub struct SourceIndex {
    files: BTreeMap<usize, PathBuf>,
}

impl SourceIndex {
    pub fn scan(dir: &Path) -> std::io::Result<Self> {
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if let Some(n) = name.strip_prefix("prices-").and_then(|s| s.strip_suffix(".tsv")) {
                if let Some(n) = parse_count(n) {
                    files.insert(n, path);
                }
            }
        }
        Ok(Self { files })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Smallest file that holds at least `n` records.
    pub fn file_for(&self, n: usize) -> Option<&Path> {
        self.files.range(n..).next().map(|(_, p)| p.as_path())
    }
}

/// Router answering `GET /data?records=N` with the first N lines of the
/// smallest sufficient file.
pub fn source_router(index: SourceIndex) -> Router {
    Router::new().route(DATA_PATH, get(serve_data)).with_state(Arc::new(index))
}

async fn serve_data(State(index): State<Arc<SourceIndex>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(n) = q.get("records").and_then(|v| parse_count(v)) else {
        return (StatusCode::BAD_REQUEST, "expected records=<non-negative integer>\n").into_response();
    };
    if n == 0 {
        return text_ok(Vec::new());
    }
    let Some(path) = index.file_for(n) else {
        return (StatusCode::NOT_FOUND, format!("no hosted file holds {n} records\n")).into_response();
    };
    let contents = match tokio::fs::read(path).await {
        Ok(c) => c,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}\n", path.display())).into_response(),
    };
    let body: Vec<u8> = contents.split_inclusive(|&b| b == b'\n').take(n).flatten().copied().collect();
    let served = body.iter().filter(|&&b| b == b'\n').count();
    if served < n {
        return (StatusCode::NOT_FOUND, format!("{} holds only {served} records\n", path.display())).into_response();
    }
    debug!(records = n, file = %path.display(), bytes = body.len(), "served");
    text_ok(body)
}

fn text_ok(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response()
}
