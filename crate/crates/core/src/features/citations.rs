//! Global citation counts for cited papers.
//!
//! Lookups go through a [`CitationProvider`]; answers (including
//! "not found") are cached on disk so repeated runs never hit the provider
//! twice for the same title and year. Provider failures are soft: they are
//! recorded in the [`FetchReport`] and the reference keeps its old count.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::Reference;

pub const CACHE_ENV: &str = "BASELINE_SCOPE_CACHE";
pub const CACHE_FILE: &str = "citation_counts.tsv";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Found(u64),
    NotFound,
}

pub trait CitationProvider {
    fn name(&self) -> &str;
    fn lookup(&self, title: &str, year: Option<i32>) -> Result<Lookup, ProviderError>;
}

/// Lowercased title with punctuation runs collapsed to single spaces, then
/// `|year` (empty when unknown).
pub fn cache_key(title: &str, year: Option<i32>) -> String {
    let mut norm = String::with_capacity(title.len());
    let mut gap = false;
    for c in title.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if gap && !norm.is_empty() {
                norm.push(' ');
            }
            norm.push(c);
            gap = false;
        } else {
            gap = true;
        }
    }
    match year {
        Some(y) => format!("{norm}|{y}"),
        None => format!("{norm}|"),
    }
}

/// File-backed provider: tab-separated `title year count` lines, with an
/// optional header. A blank year matches any requested year.
#[derive(Debug, Default)]
pub struct StubProvider {
    counts: HashMap<String, u64>,
    calls: Cell<usize>,
    offline: bool,
}

impl StubProvider {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, Option<i32>, u64)>) -> Self {
        StubProvider {
            counts: entries.into_iter().map(|(t, y, c)| (cache_key(t, y), c)).collect(),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text =
            fs::read_to_string(path).map_err(|e| ProviderError::Unreachable(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line.starts_with("title\t")) {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [title, year, count] = fields[..] else {
                return Err(ProviderError::Malformed(format!("line {}: expected 3 fields", i + 1)));
            };
            let year = match year.trim() {
                "" => None,
                y => Some(
                    y.parse::<i32>()
                        .map_err(|e| ProviderError::Malformed(format!("line {}: {e}", i + 1)))?,
                ),
            };
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|e| ProviderError::Malformed(format!("line {}: {e}", i + 1)))?;
            entries.push((cache_key(title, year), count));
        }
        Ok(StubProvider {
            counts: entries.into_iter().collect(),
            ..Default::default()
        })
    }

    /// A stub whose every lookup fails as unreachable.
    pub fn offline() -> Self {
        StubProvider {
            offline: true,
            ..Default::default()
        }
    }

    /// Number of lookups served so far.
    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

impl CitationProvider for StubProvider {
    fn name(&self) -> &str {
        "stub"
    }

    fn lookup(&self, title: &str, year: Option<i32>) -> Result<Lookup, ProviderError> {
        self.calls.set(self.calls.get() + 1);
        if self.offline {
            return Err(ProviderError::Unreachable("stub is offline".into()));
        }
        let found = self
            .counts
            .get(&cache_key(title, year))
            .or_else(|| self.counts.get(&cache_key(title, None)));
        Ok(found.map_or(Lookup::NotFound, |&c| Lookup::Found(c)))
    }
}

/// Minimal GET transport so the HTTP client can be exercised without a network.
pub trait HttpTransport {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> Result<String, ProviderError>;
}

#[derive(Debug, Deserialize)]
struct SearchResponse {
    #[serde(default)]
    data: Vec<SearchHit>,
}

#[derive(Debug, Deserialize)]
struct SearchHit {
    title: Option<String>,
    year: Option<i32>,
    #[serde(rename = "citationCount")]
    citation_count: Option<u64>,
}

/// Title search against a scholarly-graph API returning `citationCount`.
pub struct ScholarlyGraphProvider<T> {
    transport: T,
    base_url: String,
    api_key: Option<String>,
}

impl<T: HttpTransport> ScholarlyGraphProvider<T> {
    pub const DEFAULT_BASE_URL: &'static str = "https://api.semanticscholar.org/graph/v1";

    pub fn new(transport: T, api_key: Option<String>) -> Self {
        ScholarlyGraphProvider {
            transport,
            base_url: Self::DEFAULT_BASE_URL.to_string(),
            api_key,
        }
    }

    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = base_url.into();
        self
    }

    pub fn search_url(&self, title: &str) -> String {
        let query: String = url::form_urlencoded::Serializer::new(String::new())
            .append_pair("query", title)
            .append_pair("fields", "title,year,citationCount")
            .append_pair("limit", "5")
            .finish();
        format!("{}/paper/search?{query}", self.base_url.trim_end_matches('/'))
    }

    /// Picks the first hit whose normalized title (and year, when given) matches.
    pub fn parse_response(body: &str, title: &str, year: Option<i32>) -> Result<Lookup, ProviderError> {
        let response: SearchResponse =
            serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let wanted = cache_key(title, None);
        let hit = response.data.iter().find(|h| {
            h.title.as_deref().is_some_and(|t| cache_key(t, None) == wanted)
                && (year.is_none() || h.year.is_none() || h.year == year)
        });
        Ok(match hit.and_then(|h| h.citation_count) {
            Some(c) => Lookup::Found(c),
            None => Lookup::NotFound,
        })
    }
}

impl<T: HttpTransport> CitationProvider for ScholarlyGraphProvider<T> {
    fn name(&self) -> &str {
        "scholarly-graph"
    }

    fn lookup(&self, title: &str, year: Option<i32>) -> Result<Lookup, ProviderError> {
        let url = self.search_url(title);
        let headers: Vec<(&str, &str)> = self.api_key.as_deref().map(|k| ("x-api-key", k)).into_iter().collect();
        let body = self.transport.get(&url, &headers)?;
        Self::parse_response(&body, title, year)
    }
}

#[cfg(feature = "http")]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl ReqwestTransport {
    pub fn new(timeout: std::time::Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

#[cfg(feature = "http")]
impl HttpTransport for ReqwestTransport {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> Result<String, ProviderError> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let resp = req.send().map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ProviderError::Unreachable(format!("HTTP {}", resp.status())));
        }
        resp.text().map_err(|e| ProviderError::Unreachable(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntry {
    pub count: Option<u64>,
    pub timestamp: u64,
}

/// Append-only on-disk cache: one `key<TAB>count<TAB>timestamp` line per
/// answer, `NA` standing for "not found". Later lines win.
#[derive(Debug)]
pub struct CountCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, CacheEntry>,
}

impl CountCache {
    pub fn in_memory() -> Self {
        CountCache {
            path: None,
            entries: BTreeMap::new(),
        }
    }

    /// `$BASELINE_SCOPE_CACHE`, falling back to `.baseline-scope-cache`.
    pub fn default_dir() -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".baseline-scope-cache"))
    }

    pub fn open(dir: &Path) -> Result<Self, ProviderError> {
        let cache_err = |e: std::io::Error| ProviderError::Cache {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(cache_err)?;
        let path = dir.join(CACHE_FILE);
        let mut entries = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(cache_err)?;
            for (i, line) in text.lines().enumerate() {
                let malformed = || ProviderError::Cache {
                    path: path.display().to_string(),
                    message: format!("line {} malformed", i + 1),
                };
                let mut parts = line.split('\t');
                let (Some(key), Some(count), Some(ts), None) = (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(malformed());
                };
                let count = match count {
                    "NA" => None,
                    c => Some(c.parse().map_err(|_| malformed())?),
                };
                let timestamp = ts.parse().map_err(|_| malformed())?;
                entries.insert(key.to_string(), CacheEntry { count, timestamp });
            }
        }
        Ok(CountCache {
            path: Some(path),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: String, count: Option<u64>) -> Result<(), ProviderError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Some(path) = &self.path {
            let mut file =
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| ProviderError::Cache {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
            let count_field = count.map_or_else(|| "NA".to_string(), |c| c.to_string());
            writeln!(file, "{key}\t{count_field}\t{timestamp}").map_err(|e| ProviderError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        self.entries.insert(key, CacheEntry { count, timestamp });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Filled(u64),
    NotFound,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchEntry {
    pub ref_id: String,
    pub key: String,
    pub outcome: FetchOutcome,
    pub from_cache: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchReport {
    pub entries: Vec<FetchEntry>,
    pub provider_calls: usize,
}

impl FetchReport {
    pub fn failures(&self) -> impl Iterator<Item = &FetchEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.outcome, FetchOutcome::Failed(_)))
    }
}

/// Fills `citation_count` on every reference it can resolve.
pub fn fetch_citation_counts(
    refs: &mut [Reference],
    provider: &dyn CitationProvider,
    cache: &mut CountCache,
) -> Result<FetchReport, ProviderError> {
    let mut report = FetchReport::default();
    for r in refs.iter_mut() {
        let key = cache_key(&r.cited_title, r.cited_year);
        let (outcome, from_cache) = match cache.get(&key) {
            Some(entry) => (entry.count.map_or(FetchOutcome::NotFound, FetchOutcome::Filled), true),
            None => {
                report.provider_calls += 1;
                match provider.lookup(&r.cited_title, r.cited_year) {
                    Ok(Lookup::Found(c)) => {
                        cache.insert(key.clone(), Some(c))?;
                        (FetchOutcome::Filled(c), false)
                    }
                    Ok(Lookup::NotFound) => {
                        cache.insert(key.clone(), None)?;
                        (FetchOutcome::NotFound, false)
                    }
                    Err(e) => (FetchOutcome::Failed(e.to_string()), false),
                }
            }
        };
        match outcome {
            FetchOutcome::Filled(c) => r.citation_count = Some(c),
            FetchOutcome::NotFound => r.citation_count = None,
            FetchOutcome::Failed(_) => {}
        }
        report.entries.push(FetchEntry {
            ref_id: r.ref_id.clone(),
            key,
            outcome,
            from_cache,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn reference(id: &str, title: &str, year: Option<i32>) -> Reference {
        Reference {
            ref_id: id.into(),
            raw_string: String::new(),
            cited_title: title.into(),
            cited_year: year,
            citation_count: None,
            label: Label::Unlabeled,
        }
    }

    fn stub() -> StubProvider {
        StubProvider::from_entries([
            ("LexRank: Graph-based Lexical Centrality", Some(2004), 3000),
            ("Moses: Open Source Toolkit", Some(2007), 5000),
            ("A Maximum Entropy Approach", None, 12),
        ])
    }

    #[test]
    fn key_normalization() {
        assert_eq!(
            cache_key("  LexRank: Graph-based!! ", Some(2004)),
            "lexrank graph based|2004"
        );
        assert_eq!(cache_key("X", None), "x|");
    }

    #[test]
    fn fills_known_titles_and_reports_unknown() {
        let provider = stub();
        let mut cache = CountCache::in_memory();
        let mut refs = vec![
            reference("a", "LexRank: graph-based lexical centrality", Some(2004)),
            reference("b", "Moses: open source toolkit", Some(2007)),
            reference("c", "A maximum entropy approach", Some(1996)),
            reference("d", "Unknown paper", Some(2001)),
        ];
        let report = fetch_citation_counts(&mut refs, &provider, &mut cache).unwrap();
        let counts: Vec<_> = refs.iter().map(|r| r.citation_count).collect();
        assert_eq!(counts, vec![Some(3000), Some(5000), Some(12), None]);
        assert_eq!(report.entries[3].outcome, FetchOutcome::NotFound);
        assert_eq!(report.provider_calls, 4);
    }

    #[test]
    fn repeated_fetch_served_from_disk_cache() {
        let dir = tempfile::tempdir().unwrap();
        let mut refs = vec![
            reference("a", "Moses: open source toolkit", Some(2007)),
            reference("d", "Unknown paper", None),
        ];
        {
            let provider = stub();
            let mut cache = CountCache::open(dir.path()).unwrap();
            fetch_citation_counts(&mut refs, &provider, &mut cache).unwrap();
            assert_eq!(provider.calls(), 2);
        }
        let provider = stub();
        let mut cache = CountCache::open(dir.path()).unwrap();
        assert_eq!(cache.len(), 2);
        let report = fetch_citation_counts(&mut refs, &provider, &mut cache).unwrap();
        assert_eq!(provider.calls(), 0);
        assert_eq!(report.provider_calls, 0);
        assert!(report.entries.iter().all(|e| e.from_cache));
        assert_eq!(refs[0].citation_count, Some(5000));
    }

    #[test]
    fn unreachable_provider_is_soft_failure() {
        let provider = StubProvider::offline();
        let mut cache = CountCache::in_memory();
        let mut refs = vec![reference("a", "Anything", None)];
        refs[0].citation_count = Some(7);
        let report = fetch_citation_counts(&mut refs, &provider, &mut cache).unwrap();
        assert_eq!(report.failures().count(), 1);
        assert_eq!(refs[0].citation_count, Some(7));
        assert!(cache.is_empty());
    }

    #[test]
    fn stub_file_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.tsv");
        fs::write(
            &path,
            "title\tyear\tcount\nMoses: Open Source Toolkit\t2007\t5000\nAny Year\t\t3\n",
        )
        .unwrap();
        let p = StubProvider::load(&path).unwrap();
        assert_eq!(
            p.lookup("moses open source toolkit", Some(2007)).unwrap(),
            Lookup::Found(5000)
        );
        assert_eq!(p.lookup("any year", Some(1999)).unwrap(), Lookup::Found(3));
        fs::write(&path, "broken line\n").unwrap();
        assert!(StubProvider::load(&path).is_err());
    }

    struct CannedTransport(String, std::cell::RefCell<Vec<String>>);

    impl HttpTransport for CannedTransport {
        fn get(&self, url: &str, headers: &[(&str, &str)]) -> Result<String, ProviderError> {
            self.1.borrow_mut().push(format!("{url} {headers:?}"));
            Ok(self.0.clone())
        }
    }

    #[test]
    fn graph_client_builds_query_and_parses_counts() {
        let body = r#"{"total": 2, "data": [
            {"paperId": "x", "title": "Something else", "year": 2004, "citationCount": 1},
            {"paperId": "y", "title": "LexRank: Graph-based Lexical Centrality", "year": 2004, "citationCount": 3011}
        ]}"#;
        let client = ScholarlyGraphProvider::new(CannedTransport(body.into(), Default::default()), Some("k".into()))
            .with_base_url("http://localhost:9/graph/v1/");
        let got = client
            .lookup("LexRank: graph-based lexical centrality", Some(2004))
            .unwrap();
        assert_eq!(got, Lookup::Found(3011));
        let calls = client.transport.1.borrow();
        assert!(calls[0].starts_with("http://localhost:9/graph/v1/paper/search?query=LexRank%3A+graph-based"));
        assert!(calls[0].contains("fields=title%2Cyear%2CcitationCount"));
        assert!(calls[0].contains("x-api-key"));

        assert_eq!(
            ScholarlyGraphProvider::<CannedTransport>::parse_response(
                body,
                "LexRank: graph-based lexical centrality",
                Some(1990)
            )
            .unwrap(),
            Lookup::NotFound
        );
        assert!(ScholarlyGraphProvider::<CannedTransport>::parse_response("<html>", "t", None).is_err());
    }
}
