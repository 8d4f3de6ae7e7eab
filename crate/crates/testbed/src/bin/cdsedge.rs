//! `cdsedge`: generate price data, run the source and edge services, encode or
//! decode files offline, and benchmark compact against relayed transfers.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use cds_core::codec::{decode_batch, encode_batch, parse_compact, serialize_compact, CodecConfig, CodecError, IdEncoding};
use cds_core::dictionary::{default_universe, load_dictionary, save_dictionary, Dictionary};
use cds_core::latency::{check_trends, emit_report, reference_fixture_check, ReportFormat, TrendTolerance, DEFAULT_SWEEP_AMOUNTS};
use cds_core::record::{gen_records, parse_records, render_records, GeneratorConfig};
use cds_core::ProcessingMode;
use cds_testbed::config::FileConfig;
use cds_testbed::edge::DEFAULT_MAX_RECORDS;
use cds_testbed::{edge_router, run_sweep, serve_until, source_router, EdgeConfig, EdgeNode, SourceIndex, SweepOptions};
use clap::{Parser, Subcommand};
use tokio::net::TcpListener;
use tracing::info;

const DEFAULT_SOURCE_ADDR: &str = "127.0.0.1:8080";
const DEFAULT_EDGE_ADDR: &str = "127.0.0.1:8081";
const DEFAULT_SOURCE_URL: &str = "http://127.0.0.1:8080";
const DEFAULT_EDGE_URL: &str = "http://127.0.0.1:8081";
const DEFAULT_DATA_DIR: &str = "data";
const DEFAULT_DICTIONARY: &str = "dict.tsv";

#[derive(Parser)]
#[command(name = "cdsedge", version, about = "Compact spot-price records on an edge node")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic price file `prices-<N>.tsv`.
    Gen {
        /// Number of records.
        #[arg(long)]
        n: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Dictionary file whose keys the generator draws from [default: built-in 128-key universe].
        #[arg(long)]
        universe: Option<PathBuf>,
        /// Also write the key universe as a dictionary file here.
        #[arg(long)]
        dict_out: Option<PathBuf>,
        /// Largest gap between consecutive timestamps, in seconds.
        #[arg(long, default_value_t = GeneratorConfig::DEFAULT_MAX_STEP)]
        max_step: u32,
        /// First timestamp, epoch seconds.
        #[arg(long, default_value_t = GeneratorConfig::DEFAULT_START)]
        start_epoch: i64,
    },
    /// Serve raw price files over `GET /data?records=N`.
    ServeSource {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding prices-<N>.tsv files [default: data].
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Bind address [default: 127.0.0.1:8080].
        #[arg(long)]
        addr: Option<String>,
    },
    /// Run the edge node serving `GET /process?records=N&mode=cds|relay`.
    ServeEdge {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bind address [default: 127.0.0.1:8081].
        #[arg(long)]
        addr: Option<String>,
        /// Data source base URL [default: http://127.0.0.1:8080].
        #[arg(long)]
        source_url: Option<String>,
        /// Lookup table to inject at startup [default: dict.tsv].
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Largest record amount accepted per request [default: 650].
        #[arg(long)]
        max_records: Option<usize>,
        /// Mode for requests that do not name one: cds or relay [default: cds].
        #[arg(long)]
        mode: Option<String>,
        /// Id encoding for compact payloads: bytewise or huffman [default: bytewise].
        #[arg(long)]
        id_encoding: Option<String>,
        /// Base timestamp interval in seconds [default: 86400].
        #[arg(long)]
        base_interval: Option<u32>,
    },
    /// Encode a raw price file into the compact text form.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// bytewise or huffman.
        #[arg(long, default_value = "bytewise")]
        id_encoding: String,
        /// Base timestamp interval in seconds.
        #[arg(long, default_value_t = cds_core::codec::DEFAULT_BASE_INTERVAL_SECONDS)]
        base_interval: u32,
    },
    /// Decode a compact file back into raw price lines.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dict: PathBuf,
    },
    /// Sweep record amounts against a running edge node and report latencies.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Edge node base URL [default: http://127.0.0.1:8081].
        #[arg(long)]
        edge_url: Option<String>,
        /// Comma-separated record amounts [default: 12,25,50,100,200,400,600].
        #[arg(long, value_delimiter = ',')]
        amounts: Option<Vec<usize>>,
        /// Measured requests per amount and mode [default: 5].
        #[arg(long)]
        reps: Option<usize>,
        /// Discarded requests per amount and mode before measuring [default: 0].
        #[arg(long)]
        warmup: Option<usize>,
        /// Report file [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Fail when processing-latency trends break the noise tolerance.
        #[arg(long)]
        check_trends: bool,
    },
    /// Recompute ratios on the embedded reference measurements; exit 0 when they hold.
    Fixture,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen { n, seed, out, universe, dict_out, max_step, start_epoch } => {
            let key_universe = match &universe {
                Some(path) => load_dictionary(path)
                    .with_context(|| format!("loading universe {}", path.display()))?
                    .entries()
                    .to_vec(),
                None => default_universe(),
            };
            let cfg = GeneratorConfig {
                seed,
                start_epoch,
                max_step_seconds: max_step,
                key_universe,
                ..GeneratorConfig::with_seed(seed)
            };
            if let Some(path) = dict_out {
                let dict = Dictionary::build(cfg.key_universe.iter().cloned())?;
                save_dictionary(&dict, &path).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
            let records = gen_records(n, &cfg)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join(format!("prices-{n}.tsv"));
            std::fs::write(&path, render_records(&records)).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ServeSource { config, dir, addr } => {
            let file = FileConfig::load_optional(config.as_deref())?;
            let dir = dir.or(file.source.data_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
            let addr = parse_addr(addr.or(file.source.addr).as_deref().unwrap_or(DEFAULT_SOURCE_ADDR))?;
            let index = SourceIndex::scan(&dir).with_context(|| format!("scanning {}", dir.display()))?;
            runtime()?.block_on(async move {
                let listener = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                let local = listener.local_addr()?;
                info!(addr = %local, dir = %dir.display(), files = index.len(), "source ready");
                serve_until(source_router(index), listener, shutdown_signal()).await?;
                info!("source stopped");
                Ok(ExitCode::SUCCESS)
            })
        }
        Command::ServeEdge { config, addr, source_url, dictionary, max_records, mode, id_encoding, base_interval } => {
            let file = FileConfig::load_optional(config.as_deref())?;
            let e = file.edge;
            let addr = parse_addr(addr.or(e.addr).as_deref().unwrap_or(DEFAULT_EDGE_ADDR))?;
            let mode: ProcessingMode = mode.or(e.mode).as_deref().unwrap_or("cds").parse().map_err(|m: String| anyhow!(m))?;
            let id_encoding: IdEncoding =
                id_encoding.or(e.id_encoding).as_deref().unwrap_or("bytewise").parse().map_err(|m: String| anyhow!(m))?;
            let cfg = EdgeConfig {
                source_url: source_url.or(e.source_url).unwrap_or_else(|| DEFAULT_SOURCE_URL.into()),
                mode,
                max_records: max_records.or(e.max_records).unwrap_or(DEFAULT_MAX_RECORDS),
                dictionary_path: dictionary.or(e.dictionary).unwrap_or_else(|| PathBuf::from(DEFAULT_DICTIONARY)),
                codec: CodecConfig {
                    base_interval_seconds: base_interval
                        .or(e.base_interval_seconds)
                        .unwrap_or(cds_core::codec::DEFAULT_BASE_INTERVAL_SECONDS),
                    id_encoding,
                },
            };
            let node = EdgeNode::from_config(cfg)?;
            runtime()?.block_on(async move {
                let listener = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                let local = listener.local_addr()?;
                let c = node.config();
                info!(
                    addr = %local,
                    source_url = %c.source_url,
                    mode = %c.mode,
                    max_records = c.max_records,
                    id_encoding = %c.codec.id_encoding,
                    dictionary = %c.dictionary_path.display(),
                    entries = node.dictionary().len(),
                    "edge ready"
                );
                serve_until(edge_router(Arc::new(node)), listener, shutdown_signal()).await?;
                info!("edge stopped");
                Ok(ExitCode::SUCCESS)
            })
        }
        Command::Encode { input, out, dict, id_encoding, base_interval } => {
            let dict = load_dictionary(&dict).with_context(|| format!("loading {}", dict.display()))?;
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let records = parse_records(&text)
                .map_err(|(line, e)| anyhow!("{}:{line}: {e}", input.display()))?;
            let cfg = CodecConfig { base_interval_seconds: base_interval, id_encoding: id_encoding.parse().map_err(|m: String| anyhow!(m))? };
            let batch = encode_batch(&records, &dict, &cfg).map_err(|e| match e {
                CodecError::UnknownKey { index, ref key } => {
                    anyhow!("{}:{}: unknown key {key}", input.display(), index + 1)
                }
                CodecError::UnsortedInput { index } => {
                    anyhow!("{}:{}: timestamp earlier than previous line", input.display(), index + 1)
                }
                other => anyhow!(other),
            })?;
            write_file(&out, &serialize_compact(&batch))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Decode { input, out, dict } => {
            let dict = load_dictionary(&dict).with_context(|| format!("loading {}", dict.display()))?;
            let payload = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let batch = parse_compact(&payload).with_context(|| format!("parsing {}", input.display()))?;
            let records = decode_batch(&batch, &dict).with_context(|| format!("decoding {}", input.display()))?;
            write_file(&out, render_records(&records).as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config, edge_url, amounts, reps, warmup, out, format, check_trends: trends } => {
            let file = FileConfig::load_optional(config.as_deref())?;
            let b = file.bench;
            let edge_url = edge_url.or(b.edge_url).unwrap_or_else(|| DEFAULT_EDGE_URL.into());
            let amounts = amounts.or(b.amounts).unwrap_or_else(|| DEFAULT_SWEEP_AMOUNTS.to_vec());
            let opts = SweepOptions {
                repetitions: reps.or(b.repetitions).unwrap_or(5),
                warmup: warmup.or(b.warmup).unwrap_or(0),
            };
            if opts.repetitions == 0 {
                bail!("--reps must be at least 1");
            }
            let format: ReportFormat = format.parse().map_err(|m: String| anyhow!(m))?;
            let report = runtime()?.block_on(run_sweep::<f64>(&edge_url, &amounts, opts, &edge_url, |_| {}));
            let mut text = emit_report(&report, format);
            let mut failed = false;
            if let Some(reason) = &report.failure {
                eprintln!("incomplete sweep: {reason}");
                text.push_str(&match format {
                    ReportFormat::Csv => format!("# incomplete: {reason}\n"),
                    ReportFormat::Markdown => format!("\n**Incomplete:** {reason}\n"),
                });
                failed = true;
            }
            for row in report.rows.iter().filter(|r| r.is_degenerate()) {
                eprintln!("{} records: degenerate measurement, ratio undefined", row.record_amount);
            }
            if trends {
                for f in check_trends(&report, TrendTolerance::default()) {
                    eprintln!("trend check failed: {f}");
                    failed = true;
                }
            }
            match out {
                Some(path) => write_file(&path, text.as_bytes())?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Fixture => {
            let check = reference_fixture_check();
            println!("record_amount,cds_ratio,relay_ratio");
            for (n, c, r) in &check.ratios {
                println!("{n},{c:.6},{r:.6}");
            }
            for f in &check.failures {
                eprintln!("fixture check failed: {f}");
            }
            Ok(if check.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn parse_addr(s: &str) -> Result<SocketAddr> {
    s.parse().with_context(|| format!("invalid bind address {s:?}"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    info!("shutdown requested");
}
