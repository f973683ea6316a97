//! Polls vocabulary URLs and archives each distinct version.
//!
//! A fetched document is a new version only when its in-namespace term set
//! (kinds and deprecation flags included) differs from the latest archived
//! one; byte-level edits that leave the terms alone are logged as cosmetic.
//! Stored files and the fetch log are only ever appended to.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::vocab::{extract_terms, parse_document, TermKind, VocabFormat, VocabManifestEntry, VocabVersion};

pub const ACCEPT: &str = "text/turtle, application/n-triples;q=0.9";
pub const MAX_REDIRECTS: usize = 5;
pub const FETCH_LOG: &str = "fetch_log.jsonl";
pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchedVocab {
    pub id: String,
    pub namespace: String,
    pub url: String,
}

fn default_interval() -> String {
    "1day".to_owned()
}

fn default_timeout() -> String {
    "30s".to_owned()
}

/// TOML watch configuration.
///
/// ```toml
/// archive_dir = "archive"
/// interval = "1day"
///
/// [[vocabulary]]
/// id = "GN"
/// namespace = "http://www.geonames.org/ontology#"
/// url = "http://www.geonames.org/ontology/ontology_v3.1.ttl"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchConfig {
    pub archive_dir: PathBuf,
    #[serde(default = "default_interval")]
    pub interval: String,
    #[serde(default = "default_timeout")]
    pub timeout: String,
    #[serde(rename = "vocabulary", default)]
    pub vocabularies: Vec<WatchedVocab>,
}

impl WatchConfig {
    /// Parses the TOML text; a relative `archive_dir` resolves against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: WatchConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.archive_dir = base_dir.join(&cfg.archive_dir);
        let mut ids = BTreeSet::new();
        for v in &cfg.vocabularies {
            if !ids.insert(&v.id) {
                return Err(Error::Config(format!("vocabulary {} listed twice", v.id)));
            }
            if v.id.is_empty() || v.id.contains(['/', '\\', '.']) {
                return Err(Error::Config(format!("vocabulary id {:?} is not a plain name", v.id)));
            }
        }
        cfg.interval_duration()?;
        cfg.timeout_duration()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn interval_duration(&self) -> Result<Duration> {
        humantime::parse_duration(&self.interval).map_err(|e| Error::Config(format!("interval: {e}")))
    }

    pub fn timeout_duration(&self) -> Result<Duration> {
        humantime::parse_duration(&self.timeout).map_err(|e| Error::Config(format!("timeout: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub final_url: String,
    pub status: u16,
    pub content_type: String,
    pub format: VocabFormat,
    pub body: Vec<u8>,
    /// URLs visited before `final_url`.
    pub redirects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("HTTP status {status}")]
    Status { status: u16, redirects: Vec<String> },
    #[error("unsupported content type {content_type:?}")]
    UnsupportedType {
        status: u16,
        content_type: String,
        redirects: Vec<String>,
    },
    #[error("more than {MAX_REDIRECTS} redirects")]
    TooManyRedirects { redirects: Vec<String> },
    #[error("{0}")]
    Transport(String),
}

impl FetchError {
    fn status(&self) -> Option<u16> {
        match self {
            FetchError::Status { status, .. } | FetchError::UnsupportedType { status, .. } => Some(*status),
            _ => None,
        }
    }

    fn redirects(&self) -> Vec<String> {
        match self {
            FetchError::Status { redirects, .. }
            | FetchError::UnsupportedType { redirects, .. }
            | FetchError::TooManyRedirects { redirects } => redirects.clone(),
            FetchError::Transport(_) => Vec::new(),
        }
    }
}

pub trait Fetcher: Sync {
    fn fetch(&self, url: &str) -> std::result::Result<FetchResponse, FetchError>;
}

/// Maps a `Content-Type` value to a document format.
pub fn format_for(content_type: &str) -> Option<VocabFormat> {
    let mime = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match mime.as_str() {
        "text/turtle" | "application/x-turtle" => Some(VocabFormat::Turtle),
        "application/n-triples" => Some(VocabFormat::NTriples),
        _ => None,
    }
}

/// Blocking HTTP client with manual redirect handling.
pub struct HttpFetcher {
    agent: ureq::Agent,
    max_body: u64,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        HttpFetcher {
            agent: config.into(),
            max_body: 64 * 1024 * 1024,
        }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> std::result::Result<FetchResponse, FetchError> {
        let mut current = url::Url::parse(url).map_err(|e| FetchError::Transport(format!("{url}: {e}")))?;
        let mut redirects = Vec::new();
        loop {
            let mut resp = self
                .agent
                .get(current.as_str())
                .header("Accept", ACCEPT)
                .call()
                .map_err(|e| FetchError::Transport(format!("{current}: {e}")))?;
            let status = resp.status().as_u16();
            if matches!(status, 301 | 302 | 303 | 307 | 308) {
                let location = resp
                    .headers()
                    .get("location")
                    .and_then(|v| v.to_str().ok())
                    .ok_or_else(|| FetchError::Transport(format!("{current}: redirect without Location")))?;
                let next = current
                    .join(location)
                    .map_err(|e| FetchError::Transport(format!("{current}: bad Location: {e}")))?;
                redirects.push(current.to_string());
                if redirects.len() > MAX_REDIRECTS {
                    return Err(FetchError::TooManyRedirects { redirects });
                }
                current = next;
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(FetchError::Status { status, redirects });
            }
            let content_type = resp
                .headers()
                .get("content-type")
                .and_then(|v| v.to_str().ok())
                .unwrap_or("")
                .to_owned();
            let Some(format) = format_for(&content_type) else {
                return Err(FetchError::UnsupportedType {
                    status,
                    content_type,
                    redirects,
                });
            };
            let body = resp
                .body_mut()
                .with_config()
                .limit(self.max_body)
                .read_to_vec()
                .map_err(|e| FetchError::Transport(format!("{current}: {e}")))?;
            return Ok(FetchResponse {
                final_url: current.to_string(),
                status,
                content_type,
                format,
                body,
                redirects,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    NewVersion,
    Unchanged,
    /// Bytes differ but the term set does not.
    Cosmetic,
    /// Term set changed on a day that already has a version; picked up on
    /// the next day's fetch.
    Deferred,
    FetchFailed,
    ParseFailed,
}

/// One line of the fetch log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub vocab_id: String,
    pub fetch_time: DateTime<Utc>,
    pub url: String,
    pub outcome: Outcome,
    pub http_status: Option<u16>,
    pub content_type: Option<String>,
    pub content_hash: Option<String>,
    /// Relative to the archive directory.
    pub stored_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub redirects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The comparable part of a version: in-namespace terms with their flags.
pub type TermSet = BTreeSet<(String, TermKind, bool)>;

pub fn term_set(v: &VocabVersion) -> TermSet {
    v.namespace_terms().map(|t| (t.iri.clone(), t.kind, t.deprecated)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchivedVersion {
    pub date: NaiveDate,
    pub hash: String,
    pub path: PathBuf,
    pub terms: TermSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detection {
    NewVersion(TermSet),
    Unchanged,
    Cosmetic,
    ParseFailed(String),
}

/// Classifies fetched bytes against the latest archived version.
pub fn detect_new_version(
    vocab: &WatchedVocab,
    bytes: &[u8],
    format: VocabFormat,
    latest: Option<&ArchivedVersion>,
) -> Detection {
    let hash = content_hash(bytes);
    if latest.is_some_and(|l| l.hash == hash) {
        return Detection::Unchanged;
    }
    let triples = match parse_document(bytes, format, Some(&vocab.namespace), &vocab.url) {
        Ok(t) => t,
        Err(e) => return Detection::ParseFailed(e.to_string()),
    };
    // the date is irrelevant to the comparison
    let version = extract_terms(&triples, &vocab.namespace, NaiveDate::MIN, &vocab.id);
    let terms = term_set(&version);
    match latest {
        Some(l) if l.terms == terms => Detection::Cosmetic,
        _ => Detection::NewVersion(terms),
    }
}

/// Manifest rows implied by a fetch log: one per `NewVersion` entry.
pub fn manifest_from_log(entries: &[ArchiveEntry]) -> Vec<(String, NaiveDate, PathBuf)> {
    entries
        .iter()
        .filter(|e| e.outcome == Outcome::NewVersion)
        .filter_map(|e| {
            e.stored_path
                .as_ref()
                .map(|p| (e.vocab_id.clone(), e.fetch_time.date_naive(), p.clone()))
        })
        .collect()
}

pub fn read_fetch_log(archive_dir: &Path) -> Result<Vec<ArchiveEntry>> {
    let path = archive_dir.join(FETCH_LOG);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            origin: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

/// Archive state reconstructed from the fetch log.
struct ArchiveState {
    latest: BTreeMap<String, ArchivedVersion>,
    stored: BTreeMap<(String, String), PathBuf>,
}

fn load_state(dir: &Path, config: &WatchConfig, log: &[ArchiveEntry]) -> Result<ArchiveState> {
    let mut stored = BTreeMap::new();
    let mut newest: BTreeMap<&str, &ArchiveEntry> = BTreeMap::new();
    for e in log {
        if let (Some(h), Some(p)) = (&e.content_hash, &e.stored_path) {
            stored.entry((e.vocab_id.clone(), h.clone())).or_insert_with(|| p.clone());
        }
        if e.outcome == Outcome::NewVersion {
            newest.insert(&e.vocab_id, e);
        }
    }
    let mut latest = BTreeMap::new();
    for v in &config.vocabularies {
        let Some(e) = newest.get(v.id.as_str()) else { continue };
        let (Some(hash), Some(rel)) = (&e.content_hash, &e.stored_path) else { continue };
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
        let format = VocabFormat::from_path(&path);
        let terms = match detect_new_version(v, &bytes, format, None) {
            Detection::NewVersion(t) => t,
            _ => return Err(Error::Archive(format!("{}: archived file no longer parses", path.display()))),
        };
        latest.insert(
            v.id.clone(),
            ArchivedVersion {
                date: e.fetch_time.date_naive(),
                hash: hash.clone(),
                path: rel.clone(),
                terms,
            },
        );
    }
    Ok(ArchiveState { latest, stored })
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// One polling round: fetch every vocabulary concurrently, then record the
/// results in configuration order. Returns the new log entries.
pub fn watch_once(config: &WatchConfig, fetcher: &dyn Fetcher, now: DateTime<Utc>) -> Result<Vec<ArchiveEntry>> {
    let dir = &config.archive_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log = read_fetch_log(dir)?;
    let mut state = load_state(dir, config, &log)?;

    let responses: Vec<_> = config
        .vocabularies
        .par_iter()
        .map(|v| fetcher.fetch(&v.url))
        .collect();

    let manifest = dir.join(MANIFEST);
    if !manifest.exists() {
        append_line(&manifest, "vocab_id,version_date,path")?;
    }
    let today = now.date_naive();
    let mut written = Vec::new();
    for (v, response) in config.vocabularies.iter().zip(responses) {
        let mut entry = ArchiveEntry {
            vocab_id: v.id.clone(),
            fetch_time: now,
            url: v.url.clone(),
            outcome: Outcome::FetchFailed,
            http_status: None,
            content_type: None,
            content_hash: None,
            stored_path: None,
            redirects: Vec::new(),
            note: None,
        };
        match response {
            Err(e) => {
                entry.http_status = e.status();
                entry.redirects = e.redirects();
                entry.note = Some(e.to_string());
            }
            Ok(resp) => {
                let hash = content_hash(&resp.body);
                entry.http_status = Some(resp.status);
                entry.content_type = Some(resp.content_type.clone());
                entry.content_hash = Some(hash.clone());
                entry.redirects = resp.redirects.clone();
                let latest = state.latest.get(&v.id);
                match detect_new_version(v, &resp.body, resp.format, latest) {
                    Detection::Unchanged => {
                        entry.outcome = Outcome::Unchanged;
                        entry.stored_path = latest.map(|l| l.path.clone());
                    }
                    Detection::Cosmetic => {
                        entry.outcome = Outcome::Cosmetic;
                        entry.note = Some("term set unchanged".into());
                    }
                    Detection::ParseFailed(msg) => {
                        entry.outcome = Outcome::ParseFailed;
                        entry.note = Some(msg);
                    }
                    Detection::NewVersion(_) if latest.is_some_and(|l| l.date >= today) => {
                        entry.outcome = Outcome::Deferred;
                        entry.note = Some(format!("a version is already dated {today}"));
                    }
                    Detection::NewVersion(terms) => {
                        let key = (v.id.clone(), hash.clone());
                        let rel = match state.stored.get(&key) {
                            Some(p) => p.clone(),
                            None => {
                                let rel = PathBuf::from(&v.id)
                                    .join(format!("{today}-{}.{}", &hash[..8], resp.format.extension()));
                                let path = dir.join(&rel);
                                let parent = path.parent().expect("has parent");
                                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                                fs::write(&path, &resp.body).map_err(|e| Error::io(&path, e))?;
                                state.stored.insert(key, rel.clone());
                                rel
                            }
                        };
                        append_line(&manifest, &format!("{},{},{}", v.id, today, rel.display()))?;
                        entry.outcome = Outcome::NewVersion;
                        entry.stored_path = Some(rel.clone());
                        state.latest.insert(
                            v.id.clone(),
                            ArchivedVersion {
                                date: today,
                                hash,
                                path: rel,
                                terms,
                            },
                        );
                    }
                }
            }
        }
        append_line(&dir.join(FETCH_LOG), &serde_json::to_string(&entry)?)?;
        log::info!("{} {}: {:?}", v.id, v.url, entry.outcome);
        written.push(entry);
    }
    Ok(written)
}

/// Polls until `stop` is set, sleeping `interval` between rounds. Failed
/// rounds are logged and retried on the next tick.
pub fn watch_daemon(config: &WatchConfig, fetcher: &dyn Fetcher, interval: Duration, stop: &AtomicBool) {
    while !stop.load(Ordering::Relaxed) {
        if let Err(e) = watch_once(config, fetcher, Utc::now()) {
            log::error!("watch round failed: {e}");
        }
        let mut slept = Duration::ZERO;
        while slept < interval && !stop.load(Ordering::Relaxed) {
            let step = Duration::from_millis(200).min(interval - slept);
            std::thread::sleep(step);
            slept += step;
        }
    }
}

/// Reads the archive manifest as vocabulary manifest entries.
pub fn archived_versions(config: &WatchConfig) -> Result<Vec<VocabManifestEntry>> {
    let path = config.archive_dir.join(MANIFEST);
    let mut text = String::new();
    File::open(&path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(&path, e))?;
    let namespaces = config
        .vocabularies
        .iter()
        .map(|v| (v.id.clone(), v.namespace.clone()))
        .collect();
    let m = crate::vocab::VocabManifest::parse(text.as_bytes(), &config.archive_dir, &path.display().to_string(), &namespaces)?;
    Ok(m.entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    const NS: &str = "http://ex.org/v#";

    fn vocab() -> WatchedVocab {
        WatchedVocab { id: "V".into(), namespace: NS.into(), url: "http://ex.org/v".into() }
    }

    fn doc(terms: &[&str]) -> Vec<u8> {
        let mut s = String::from("@prefix owl: <http://www.w3.org/2002/07/owl#> .\n");
        for t in terms {
            s.push_str(&format!("<{NS}{t}> a owl:Class .\n"));
        }
        s.into_bytes()
    }

    struct Scripted(Mutex<Vec<std::result::Result<FetchResponse, FetchError>>>);

    impl Fetcher for Scripted {
        fn fetch(&self, _: &str) -> std::result::Result<FetchResponse, FetchError> {
            self.0.lock().unwrap().remove(0)
        }
    }

    fn ok(body: Vec<u8>) -> std::result::Result<FetchResponse, FetchError> {
        Ok(FetchResponse {
            final_url: "http://ex.org/v".into(),
            status: 200,
            content_type: "text/turtle".into(),
            format: VocabFormat::Turtle,
            body,
            redirects: vec![],
        })
    }

    fn at(day: u32) -> DateTime<Utc> {
        format!("2024-03-{day:02}T06:00:00Z").parse().unwrap()
    }

    #[test]
    fn detection_rules() {
        let v = vocab();
        let first = match detect_new_version(&v, &doc(&["A"]), VocabFormat::Turtle, None) {
            Detection::NewVersion(t) => t,
            d => panic!("{d:?}"),
        };
        let latest = ArchivedVersion {
            date: at(1).date_naive(),
            hash: content_hash(&doc(&["A"])),
            path: "x".into(),
            terms: first,
        };
        assert_eq!(detect_new_version(&v, &doc(&["A"]), VocabFormat::Turtle, Some(&latest)), Detection::Unchanged);
        let mut spaced = doc(&["A"]);
        spaced.extend_from_slice(b"\n\n   \n");
        assert_eq!(detect_new_version(&v, &spaced, VocabFormat::Turtle, Some(&latest)), Detection::Cosmetic);
        assert!(matches!(
            detect_new_version(&v, &doc(&["A", "B"]), VocabFormat::Turtle, Some(&latest)),
            Detection::NewVersion(_)
        ));
        assert!(matches!(
            detect_new_version(&v, b"<<< not turtle", VocabFormat::Turtle, Some(&latest)),
            Detection::ParseFailed(_)
        ));
    }

    #[test]
    fn rounds_append_and_replay() {
        let tmp = tempfile::tempdir().unwrap();
        let config = WatchConfig {
            archive_dir: tmp.path().join("archive"),
            interval: "1day".into(),
            timeout: "5s".into(),
            vocabularies: vec![vocab()],
        };
        let fetcher = Scripted(Mutex::new(vec![
            ok(doc(&["A"])),
            ok(doc(&["A"])),
            ok(doc(&["A", "B"])),
            ok(doc(&["A", "B", "C"])),
            Err(FetchError::Status { status: 404, redirects: vec![] }),
            ok(doc(&["A"])),
        ]));
        let outcomes: Vec<Outcome> = [1, 2, 3, 3, 4, 5]
            .iter()
            .map(|d| watch_once(&config, &fetcher, at(*d)).unwrap()[0].outcome)
            .collect();
        assert_eq!(
            outcomes,
            vec![
                Outcome::NewVersion,
                Outcome::Unchanged,
                Outcome::NewVersion,
                Outcome::Deferred,
                Outcome::FetchFailed,
                Outcome::NewVersion,
            ]
        );
        let log = read_fetch_log(&config.archive_dir).unwrap();
        assert_eq!(log.len(), 6);
        assert_eq!(log[4].http_status, Some(404));
        // reverting to the first document reuses its stored file
        assert_eq!(log[5].stored_path, log[0].stored_path);

        let replayed: String = std::iter::once("vocab_id,version_date,path".to_owned())
            .chain(manifest_from_log(&log).into_iter().map(|(id, d, p)| format!("{id},{d},{}", p.display())))
            .map(|l| l + "\n")
            .collect();
        let on_disk = fs::read_to_string(config.archive_dir.join(MANIFEST)).unwrap();
        assert_eq!(on_disk, replayed);
        let entries = archived_versions(&config).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].namespace, NS);
    }

    #[test]
    fn config_parses_and_rejects_duplicates() {
        let text = "archive_dir = \"a\"\ninterval = \"6h\"\n[[vocabulary]]\nid = \"V\"\nnamespace = \"http://x/\"\nurl = \"http://x/\"\n";
        let c = WatchConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.archive_dir, Path::new("/base/a"));
        assert_eq!(c.interval_duration().unwrap(), Duration::from_secs(6 * 3600));
        let dup = format!("{text}[[vocabulary]]\nid = \"V\"\nnamespace = \"http://y/\"\nurl = \"http://y/\"\n");
        assert!(WatchConfig::parse(&dup, Path::new(".")).is_err());
    }
}
