//! Three-process testbed: a data source serving raw price files, an edge node
//! that turns them into compact batches (or relays them), and a client that
//! measures wall-clock against the edge's self-reported processing time.

pub mod client;
pub mod config;
pub mod edge;
pub mod source;

use std::future::Future;
use std::net::SocketAddr;

use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use client::{client_fetch, run_sweep, ClientError, Fetched, SweepOptions};
pub use edge::{compact_records, edge_router, relay_records, EdgeConfig, EdgeError, EdgeNode, ProcessingReport};
pub use source::{source_router, SourceIndex};

/// Decimal count without sign or leading zeros.
pub(crate) fn parse_count(s: &str) -> Option<usize> {
    let canonical = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s.len() == 1 || !s.starts_with('0'));
    canonical.then(|| s.parse().ok()).flatten()
}

/// Serves `router` on `listener` until `shutdown` resolves.
pub async fn serve_until(router: Router, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}

/// A service running on a background task.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub async fn spawn(router: Router, bind: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(bind).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(serve_until(router, listener, async {
            let _ = rx.await;
        }));
        Ok(Self { addr, stop: Some(tx), task })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for the server task.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::parse_count;

    #[test]
    fn counts_are_canonical() {
        assert_eq!(parse_count("0"), Some(0));
        assert_eq!(parse_count("650"), Some(650));
        for bad in ["", "abc", "-1", "+1", "012", "1.0", " 1"] {
            assert_eq!(parse_count(bad), None, "{bad}");
        }
    }
}
