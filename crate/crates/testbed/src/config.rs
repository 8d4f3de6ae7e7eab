//! Optional TOML config file shared by the service subcommands.
//!
//! ```toml
//! [source]
//! addr = "127.0.0.1:8080"
//! data_dir = "data"
//!
//! [edge]
//! addr = "127.0.0.1:8081"
//! source_url = "http://127.0.0.1:8080"
//! dictionary = "dict.tsv"
//! max_records = 650
//! mode = "cds"
//! id_encoding = "bytewise"
//! base_interval_seconds = 86400
//!
//! [bench]
//! edge_url = "http://127.0.0.1:8081"
//! amounts = [12, 25, 50, 100, 200, 400, 600]
//! repetitions = 5
//! warmup = 0
//! ```
//!
//! Every key is optional. Command-line flags override the file, and the file
//! overrides built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub edge: EdgeSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub addr: Option<String>,
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub addr: Option<String>,
    pub source_url: Option<String>,
    pub dictionary: Option<PathBuf>,
    pub max_records: Option<usize>,
    pub mode: Option<String>,
    pub id_encoding: Option<String>,
    pub base_interval_seconds: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub edge_url: Option<String>,
    pub amounts: Option<Vec<usize>>,
    pub repetitions: Option<usize>,
    pub warmup: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))
    }

    pub fn load_optional(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg: FileConfig = toml::from_str(
            "[edge]\nsource_url = \"http://h:1\"\nmax_records = 10\n[bench]\namounts = [1, 2]\n",
        )
        .unwrap();
        assert_eq!(cfg.edge.source_url.as_deref(), Some("http://h:1"));
        assert_eq!(cfg.edge.max_records, Some(10));
        assert_eq!(cfg.bench.amounts, Some(vec![1, 2]));
        assert_eq!(cfg.source, SourceSection::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("[edge]\nmax_record = 1\n").is_err());
        assert!(toml::from_str::<FileConfig>("[client]\n").is_err());
    }
}
