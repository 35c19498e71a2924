//! DBpedia lookup: label/description matching and a caching HTTP client.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::preprocess::{preprocess, tokens};
use super::record::{distinct_origins, Source, TermRecord};
use crate::error::{Error, Result};

/// Largest accepted |label tokens| / |term tokens|.
pub const MAX_LENGTH_RATIO: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbpediaDoc {
    pub label: String,
    pub description: String,
}

/// Token-set overlap between a preprocessed term and a preprocessed
/// document label: `(|s1 ∩ s2| / |s1|, |s2| / |s1|)`.
pub fn overlap_ratios(term: &str, doc_label: &str) -> Result<(f64, f64)> {
    let s1: HashSet<&str> = tokens(term).collect();
    let s2: HashSet<&str> = tokens(doc_label).collect();
    if s1.is_empty() {
        return Err(Error::invalid("term has no tokens"));
    }
    let common = s1.intersection(&s2).count();
    let n1 = s1.len() as f64;
    Ok((common as f64 / n1, s2.len() as f64 / n1))
}

/// True when the document label covers every term token and is at most
/// 25% longer.
pub fn label_matches(term: &str, doc_label: &str) -> bool {
    let term = preprocess(term);
    let label = preprocess(doc_label);
    match overlap_ratios(&term, &label) {
        Ok((r1, r2)) => r1 == 1.0 && r2 <= MAX_LENGTH_RATIO,
        Err(_) => false,
    }
}

/// Appends one `dbpedia` record per matching document for each labeled
/// term. `docs` is keyed by the raw term that was queried.
pub fn match_dbpedia(records: Vec<TermRecord>, docs: &BTreeMap<String, Vec<DbpediaDoc>>) -> Vec<TermRecord> {
    let added: Vec<TermRecord> = distinct_origins(&records)
        .into_iter()
        .filter(|r| r.label.is_some())
        .flat_map(|rec| {
            docs.get(&rec.term)
                .into_iter()
                .flatten()
                .filter(|d| !d.description.trim().is_empty() && label_matches(&rec.term, &d.label))
                .map(|d| rec.variant(d.description.trim(), Source::Dbpedia))
        })
        .collect();
    let mut records = records;
    records.extend(added);
    records
}

fn strip_tags(s: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"<[^>]*>").unwrap());
    re.replace_all(s, "").trim().to_string()
}

fn first_text(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(strip_tags(s)),
        Value::Array(items) => items.iter().find_map(|i| i.as_str()).map(strip_tags),
        _ => None,
    }
}

/// Extracts label/description pairs from a lookup response. Accepts both
/// the current (`docs`, `label`, `comment`) and legacy (`results`,
/// `Label`, `Description`) layouts.
pub fn parse_lookup_response(raw: &str) -> Result<Vec<DbpediaDoc>> {
    let value: Value = serde_json::from_str(raw)?;
    let items = ["docs", "results", "Results"]
        .iter()
        .find_map(|k| value.get(k))
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("lookup response has no result array"))?;
    Ok(items
        .iter()
        .filter_map(|item| {
            let label = first_text(item.get("label").or_else(|| item.get("Label")))?;
            if label.is_empty() {
                return None;
            }
            let description = first_text(
                item.get("description")
                    .or_else(|| item.get("Description"))
                    .or_else(|| item.get("comment")),
            )
            .unwrap_or_default();
            Some(DbpediaDoc { label, description })
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    term: String,
    response: String,
}

/// Result of looking up one term.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupOutcome {
    pub term: String,
    pub docs: Vec<DbpediaDoc>,
    pub from_cache: bool,
    pub error: Option<String>,
}

/// Lookup client that persists raw responses as JSON lines keyed by term and
/// never repeats a query whose response is already cached.
pub struct DbpediaClient {
    endpoint: String,
    cache_path: PathBuf,
    cache: HashMap<String, String>,
    agent: ureq::Agent,
    network_calls: usize,
}

impl DbpediaClient {
    pub fn new(endpoint: impl Into<String>, cache_path: impl Into<PathBuf>) -> Result<Self> {
        let cache_path = cache_path.into();
        let cache = read_cache(&cache_path)?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(20)))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(DbpediaClient {
            endpoint: endpoint.into(),
            cache_path,
            cache,
            agent,
            network_calls: 0,
        })
    }

    pub fn network_calls(&self) -> usize {
        self.network_calls
    }

    fn query(&mut self, term: &str) -> std::result::Result<String, String> {
        self.network_calls += 1;
        let mut resp = self
            .agent
            .get(&self.endpoint)
            .query("query", term)
            .query("format", "json")
            .call()
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }

    fn persist(&mut self, term: &str, response: &str) -> Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.cache_path)
            .map_err(|e| Error::io(&self.cache_path, e))?;
        let line = serde_json::to_string(&CacheLine {
            term: term.to_string(),
            response: response.to_string(),
        })?;
        writeln!(file, "{line}").map_err(|e| Error::io(&self.cache_path, e))?;
        self.cache.insert(term.to_string(), response.to_string());
        Ok(())
    }

    /// Looks up one term. Network failures become an error entry; malformed
    /// responses are logged and yield no documents.
    pub fn lookup(&mut self, term: &str) -> Result<LookupOutcome> {
        let (raw, from_cache) = match self.cache.get(term) {
            Some(raw) => (raw.clone(), true),
            None => match self.query(term) {
                Ok(raw) => {
                    self.persist(term, &raw)?;
                    (raw, false)
                }
                Err(e) => {
                    return Ok(LookupOutcome {
                        term: term.to_string(),
                        docs: Vec::new(),
                        from_cache: false,
                        error: Some(e),
                    })
                }
            },
        };
        let docs = parse_lookup_response(&raw).unwrap_or_else(|e| {
            warn!("skipping malformed lookup response for `{term}`: {e}");
            Vec::new()
        });
        Ok(LookupOutcome {
            term: term.to_string(),
            docs,
            from_cache,
            error: None,
        })
    }

    pub fn fetch<'a, I>(&mut self, terms: I) -> Result<Vec<LookupOutcome>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = HashSet::new();
        terms
            .into_iter()
            .filter(|t| seen.insert(*t))
            .map(|t| self.lookup(t))
            .collect()
    }
}

fn read_cache(path: &Path) -> Result<HashMap<String, String>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let context = path.display().to_string();
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CacheLine = serde_json::from_str(&line).map_err(|e| Error::parse(&context, i + 1, e.to_string()))?;
        out.insert(entry.term, entry.response);
    }
    Ok(out)
}

/// Parsed documents for every cached term, keyed by term.
pub fn load_cached_docs(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<DbpediaDoc>>> {
    Ok(read_cache(path.as_ref())?
        .into_iter()
        .map(|(term, raw)| {
            let docs = parse_lookup_response(&raw).unwrap_or_else(|e| {
                warn!("skipping malformed cached response for `{term}`: {e}");
                Vec::new()
            });
            (term, docs)
        })
        .collect())
}
