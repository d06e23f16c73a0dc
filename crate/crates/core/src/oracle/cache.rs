use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::parse::{parse_predicates, ParsePolicy};
use super::{DecompositionOracle, OracleFailure, OracleRequest, OracleResponse, ResponseSource};

/// One line of the cache file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub fingerprint: String,
    pub task: String,
    pub prompts: [String; 2],
    pub responses: [String; 2],
    pub tasks: Vec<String>,
    pub timestamp: u64,
}

/// Fingerprint-keyed exchange store, optionally backed by an append-only
/// JSON-lines file. The first record for a fingerprint wins.
#[derive(Debug, Default)]
pub struct ExchangeCache {
    entries: BTreeMap<String, CacheRecord>,
    path: Option<PathBuf>,
}

impl ExchangeCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; new records are appended to it.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{}:{}: {e}", path.display(), i + 1),
                    )
                })?;
                entries.entry(rec.fingerprint.clone()).or_insert(rec);
            }
        }
        Ok(ExchangeCache {
            entries,
            path: Some(path),
        })
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CacheRecord> {
        self.entries.get(fingerprint)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &CacheRecord> {
        self.entries.values()
    }

    pub fn insert(&mut self, record: CacheRecord) -> io::Result<()> {
        if self.entries.contains_key(&record.fingerprint) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&record).map_err(io::Error::other)?;
            writeln!(f, "{line}")?;
        }
        self.entries.insert(record.fingerprint.clone(), record);
        Ok(())
    }
}

/// Wraps an oracle with an exchange cache. Without an inner oracle it only
/// replays: misses fail with [`OracleFailure::NoAnswer`].
pub struct CachingOracle {
    inner: Option<Box<dyn DecompositionOracle>>,
    cache: Mutex<ExchangeCache>,
}

impl CachingOracle {
    pub fn new(inner: Box<dyn DecompositionOracle>, cache: ExchangeCache) -> Self {
        CachingOracle {
            inner: Some(inner),
            cache: Mutex::new(cache),
        }
    }

    pub fn replay(cache: ExchangeCache) -> Self {
        CachingOracle {
            inner: None,
            cache: Mutex::new(cache),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DecompositionOracle for CachingOracle {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        let fingerprint = request.fingerprint();
        if let Some(rec) = self.cache.lock().unwrap().get(&fingerprint) {
            let parsed =
                parse_predicates(&rec.tasks.join("\n"), request.domain, ParsePolicy::Strict)
                    .map_err(OracleFailure::Unparseable)?;
            return Ok(OracleResponse {
                tasks: parsed.tasks,
                prompts: (rec.prompts[0].clone(), rec.prompts[1].clone()),
                raw: (rec.responses[0].clone(), rec.responses[1].clone()),
                source: ResponseSource::Cache,
            });
        }
        let Some(inner) = &self.inner else {
            return Err(OracleFailure::NoAnswer(format!(
                "no cached exchange for {}",
                request.task
            )));
        };
        let response = inner.decompose(request)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let record = CacheRecord {
            fingerprint,
            task: request.task.to_string(),
            prompts: [response.prompts.0.clone(), response.prompts.1.clone()],
            responses: [response.raw.0.clone(), response.raw.1.clone()],
            tasks: response.tasks.iter().map(|t| t.to_string()).collect(),
            timestamp,
        };
        if let Err(e) = self.cache.lock().unwrap().insert(record) {
            tracing::warn!("could not persist oracle exchange: {e}");
        }
        Ok(response)
    }

    fn is_deterministic(&self) -> bool {
        self.inner.as_ref().is_none_or(|i| i.is_deterministic())
    }

    fn describe(&self) -> String {
        match &self.inner {
            Some(i) => format!("{} (cached)", i.describe()),
            None => "replay".into(),
        }
    }
}
