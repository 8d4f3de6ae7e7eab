//! Lookup table between composite service keys and dense sequential ids.
//!
//! The persisted form is one `instance_type<TAB>operating_system<TAB>zone`
//! line per entry; the zero-based line number is the id.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// Dense id assigned to a [`CompositeKey`].
pub type KeyId = u32;

/// Counts of distinct instance types, operating systems and zones in the full catalog.
pub const FULL_INSTANCE_TYPES: usize = 402;
pub const FULL_OPERATING_SYSTEMS: usize = 8;
pub const FULL_ZONES: usize = 56;
pub const FULL_UNIVERSE_SIZE: usize = FULL_INSTANCE_TYPES * FULL_OPERATING_SYSTEMS * FULL_ZONES;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("cannot build a dictionary from an empty key set")]
    EmptyKeySet,
    #[error("unknown composite key {0}")]
    UnknownKey(CompositeKey),
    #[error("unknown key id {0}")]
    UnknownId(KeyId),
    #[error("invalid key token {0:?}: tokens must be non-empty and free of tabs and line breaks")]
    InvalidToken(String),
    #[error("dictionary has more than {} entries", KeyId::MAX)]
    TooManyKeys,
    #[error("malformed dictionary file at line {line}: {reason}")]
    MalformedDictionaryFile { line: usize, reason: String },
    #[error("dictionary i/o failure: {0}")]
    Io(#[from] io::Error),
}

/// The (instance type, operating system, zone) triple identifying a service instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeKey {
    pub instance_type: String,
    pub operating_system: String,
    pub zone: String,
}

impl CompositeKey {
    pub fn new(
        instance_type: impl Into<String>,
        operating_system: impl Into<String>,
        zone: impl Into<String>,
    ) -> Result<Self, DictionaryError> {
        let key = Self {
            instance_type: instance_type.into(),
            operating_system: operating_system.into(),
            zone: zone.into(),
        };
        for token in [&key.instance_type, &key.operating_system, &key.zone] {
            if !valid_token(token) {
                return Err(DictionaryError::InvalidToken(token.clone()));
            }
        }
        Ok(key)
    }
}

impl fmt::Display for CompositeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.instance_type, self.operating_system, self.zone)
    }
}

fn valid_token(token: &str) -> bool {
    !token.is_empty() && !token.contains(['\t', '\n', '\r'])
}

/// Immutable bijection between composite keys and ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    entries: Vec<CompositeKey>,
    index: HashMap<CompositeKey, KeyId>,
}

impl Dictionary {
    /// Builds a dictionary, dropping repeated keys after their first occurrence.
    pub fn build<I>(keys: I) -> Result<Self, DictionaryError>
    where
        I: IntoIterator<Item = CompositeKey>,
    {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for key in keys {
            if index.contains_key(&key) {
                continue;
            }
            let id = KeyId::try_from(entries.len()).map_err(|_| DictionaryError::TooManyKeys)?;
            index.insert(key.clone(), id);
            entries.push(key);
        }
        if entries.is_empty() {
            return Err(DictionaryError::EmptyKeySet);
        }
        Ok(Self { entries, index })
    }

    pub fn lookup(&self, key: &CompositeKey) -> Result<KeyId, DictionaryError> {
        self.index.get(key).copied().ok_or_else(|| DictionaryError::UnknownKey(key.clone()))
    }

    pub fn reverse(&self, id: KeyId) -> Result<&CompositeKey, DictionaryError> {
        self.entries.get(id as usize).ok_or(DictionaryError::UnknownId(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false for a built dictionary; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CompositeKey] {
        &self.entries
    }

    /// Writes the line format and returns the number of bytes written.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<u64> {
        let mut written = 0u64;
        for k in &self.entries {
            let line = format!("{}\t{}\t{}\n", k.instance_type, k.operating_system, k.zone);
            out.write_all(line.as_bytes())?;
            written += line.len() as u64;
        }
        out.flush()?;
        Ok(written)
    }

    /// Parses the line format. Duplicate keys are an error here, unlike [`Dictionary::build`],
    /// because they would make line numbers disagree with ids.
    pub fn parse(text: &str) -> Result<Self, DictionaryError> {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let malformed = |reason: String| DictionaryError::MalformedDictionaryFile { line: i + 1, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            let [instance_type, os, zone] = fields[..] else {
                return Err(malformed(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let key = CompositeKey::new(instance_type, os, zone).map_err(|e| malformed(e.to_string()))?;
            let id = KeyId::try_from(entries.len()).map_err(|_| DictionaryError::TooManyKeys)?;
            if let Some(prev) = index.insert(key.clone(), id) {
                return Err(malformed(format!("duplicate key {key}, first seen at line {}", prev + 1)));
            }
            entries.push(key);
        }
        if entries.is_empty() {
            return Err(DictionaryError::MalformedDictionaryFile { line: 0, reason: "no entries".into() });
        }
        Ok(Self { entries, index })
    }
}

pub fn build_dictionary(keys: &[CompositeKey]) -> Result<Dictionary, DictionaryError> {
    Dictionary::build(keys.iter().cloned())
}

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<u64, DictionaryError> {
    let file = fs::File::create(path)?;
    Ok(dict.write_to(BufWriter::new(file))?)
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary, DictionaryError> {
    Dictionary::parse(&fs::read_to_string(path)?)
}

const DEFAULT_INSTANCE_TYPES: [&str; 8] = [
    "m3.large", "m3.xlarge", "m5.2xlarge", "c5.large", "c5.xlarge", "r5.large", "t3.micro", "t3.small",
];
const DEFAULT_OPERATING_SYSTEMS: [&str; 4] =
    ["Linux/UNIX", "SUSE Linux", "Windows", "Red Hat Enterprise Linux"];
const DEFAULT_ZONES: [&str; 4] = ["us-east-1a", "us-east-1b", "us-east-1c", "us-west-2a"];

/// The 128-key universe used by the default synthetic corpus.
pub fn default_universe() -> Vec<CompositeKey> {
    cartesian(&DEFAULT_INSTANCE_TYPES, &DEFAULT_OPERATING_SYSTEMS, &DEFAULT_ZONES)
}

/// Synthetic stand-in for the full catalog: every combination of 402 instance
/// types, 8 operating systems and 56 zones, named `itype-NNN`, `os-N`, `zone-NN`.
pub fn full_universe() -> Vec<CompositeKey> {
    let types: Vec<String> = (0..FULL_INSTANCE_TYPES).map(|i| format!("itype-{i:03}")).collect();
    let systems: Vec<String> = (0..FULL_OPERATING_SYSTEMS).map(|i| format!("os-{i}")).collect();
    let zones: Vec<String> = (0..FULL_ZONES).map(|i| format!("zone-{i:02}")).collect();
    cartesian(&types, &systems, &zones)
}

fn cartesian<S: AsRef<str>>(types: &[S], systems: &[S], zones: &[S]) -> Vec<CompositeKey> {
    let mut out = Vec::with_capacity(types.len() * systems.len() * zones.len());
    for t in types {
        for o in systems {
            for z in zones {
                out.push(CompositeKey {
                    instance_type: t.as_ref().to_string(),
                    operating_system: o.as_ref().to_string(),
                    zone: z.as_ref().to_string(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(a: &str, b: &str, c: &str) -> CompositeKey {
        CompositeKey::new(a, b, c).unwrap()
    }

    #[test]
    fn singleton_and_dedup() {
        let k0 = key("m3.large", "Linux/UNIX", "us-east-1a");
        let k1 = key("c5.large", "Windows", "us-east-1b");
        let d = build_dictionary(std::slice::from_ref(&k0)).unwrap();
        assert_eq!(d.lookup(&k0).unwrap(), 0);
        assert_eq!(d.reverse(0).unwrap(), &k0);
        assert!(matches!(d.reverse(1), Err(DictionaryError::UnknownId(1))));

        let d = build_dictionary(&[k0.clone(), k1.clone(), k0.clone()]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.lookup(&k0).unwrap(), 0);
        assert_eq!(d.lookup(&k1).unwrap(), 1);
        assert!(matches!(d.lookup(&key("x", "y", "z")), Err(DictionaryError::UnknownKey(_))));
    }

    #[test]
    fn empty_key_set_is_rejected() {
        assert!(matches!(build_dictionary(&[]), Err(DictionaryError::EmptyKeySet)));
    }

    #[test]
    fn invalid_tokens_are_rejected() {
        assert!(CompositeKey::new("", "b", "c").is_err());
        assert!(CompositeKey::new("a", "b\tc", "d").is_err());
        assert!(CompositeKey::new("a", "b", "c\n").is_err());
        assert!(CompositeKey::new("a", "SUSE Linux", "c").is_ok());
    }

    #[test]
    fn default_universe_bijection() {
        let d = Dictionary::build(default_universe()).unwrap();
        assert_eq!(d.len(), 128);
        for (i, k) in d.entries().iter().enumerate() {
            assert_eq!(d.lookup(k).unwrap() as usize, i);
            assert_eq!(d.reverse(i as KeyId).unwrap(), k);
        }
        assert!(d.reverse(d.len() as KeyId).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.tsv");
        let d = build_dictionary(&[key("a", "b", "c"), key("d", "e", "f"), key("g", "h", "i")]).unwrap();
        let written = save_dictionary(&d, &path).unwrap();
        assert_eq!(written, std::fs::metadata(&path).unwrap().len());
        assert_eq!(load_dictionary(&path).unwrap(), d);
    }

    #[test]
    fn parse_rejects_duplicates_and_bad_lines() {
        let err = Dictionary::parse("a\tb\tc\nd\te\tf\na\tb\tc\n").unwrap_err();
        assert!(matches!(err, DictionaryError::MalformedDictionaryFile { line: 3, .. }));
        let err = Dictionary::parse("a\tb\tc\nd\te\n").unwrap_err();
        assert!(matches!(err, DictionaryError::MalformedDictionaryFile { line: 2, .. }));
        let err = Dictionary::parse("a\t\tc\n").unwrap_err();
        assert!(matches!(err, DictionaryError::MalformedDictionaryFile { line: 1, .. }));
        assert!(Dictionary::parse("").is_err());
    }

    #[test]
    fn missing_file_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dictionary(dir.path().join("nope")), Err(DictionaryError::Io(_))));
    }
}
