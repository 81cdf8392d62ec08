//! Corpus ingestion: image discovery, OCR text extraction with a pluggable
//! backend, a content-addressed extraction cache and a monthly call quota.
//!
//! The cache is keyed by the sha256 of the image bytes, so renaming a file
//! or re-running over an unchanged corpus never re-extracts. The quota
//! ledger counts every backend invocation (any backend kind) and resets when
//! the calendar month changes; it exists to keep metered OCR services from
//! being drained by accident.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::parallel::bounded_map;

/// Image extensions the scanner accepts (case-insensitive).
pub const SUPPORTED_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];
/// Environment variable holding the vision service's subscription key.
pub const VISION_KEY_ENV: &str = "VISION_API_KEY";
/// Default parallel extraction width.
pub const DEFAULT_OCR_WORKERS: usize = 4;

/// Which OCR implementation extracts text from images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcrBackendKind {
    /// Reads `<stem>.txt` next to each image, verbatim. No network; suited
    /// to tests and to corpora with pre-extracted text.
    Sidecar,
    /// Posts the raw image bytes to a vision REST endpoint.
    HttpVision,
}

impl OcrBackendKind {
    pub fn label(&self) -> &'static str {
        match self {
            OcrBackendKind::Sidecar => "sidecar",
            OcrBackendKind::HttpVision => "http_vision",
        }
    }
}

impl std::fmt::Display for OcrBackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OcrBackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "sidecar" => Ok(OcrBackendKind::Sidecar),
            "http_vision" | "http-vision" | "http" => Ok(OcrBackendKind::HttpVision),
            other => Err(Error::InvalidConfig(format!(
                "unknown ocr backend {other:?} (expected sidecar or http_vision)"
            ))),
        }
    }
}

/// OCR settings shared by indexing and checking.
#[derive(Debug, Clone)]
pub struct OcrConfig {
    pub kind: OcrBackendKind,
    /// Vision endpoint URL; required for [`OcrBackendKind::HttpVision`].
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the subscription key. The
    /// key itself is never accepted on the command line so it cannot leak
    /// into shell history.
    pub api_key_env: String,
    /// Maximum backend calls per calendar month; `None` is unlimited.
    pub quota: Option<u64>,
    pub workers: usize,
}

impl Default for OcrConfig {
    fn default() -> Self {
        OcrConfig {
            kind: OcrBackendKind::Sidecar,
            endpoint: None,
            api_key_env: VISION_KEY_ENV.to_string(),
            quota: None,
            workers: DEFAULT_OCR_WORKERS,
        }
    }
}

/// One discovered corpus image, content-hashed for caching.
#[derive(Debug, Clone)]
pub struct ImageDoc {
    pub doc_id: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: Vec<u8>,
}

/// Result of scanning a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusScan {
    /// Images sorted by document id.
    pub docs: Vec<ImageDoc>,
    /// Human-readable notes about files that were skipped.
    pub skipped: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn is_supported_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let lower = e.to_lowercase();
            SUPPORTED_EXTENSIONS.contains(&lower.as_str())
        })
        .unwrap_or(false)
}

/// Scans one directory (non-recursive) for corpus images. The document id is
/// the file stem; two images sharing a stem is an error because ids must be
/// unique. `.txt` files are silently ignored (they are sidecar text
/// companions); any other non-image file is reported in `skipped`.
pub fn scan_corpus(dir: &Path) -> Result<CorpusScan> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            skipped.push(format!("skipping directory {}", path.display()));
            continue;
        }
        if is_supported_image(&path) {
            paths.push(path);
        } else if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            skipped.push(format!("skipping non-image file {}", path.display()));
        }
    }
    paths.sort();
    skipped.sort();

    let mut docs: Vec<ImageDoc> = Vec::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in paths {
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::UnsupportedFormat(path.clone()))?
            .to_string();
        if let Some(first) = seen.get(&doc_id) {
            return Err(Error::DuplicateDocId {
                id: doc_id,
                first: first.clone(),
                second: path,
            });
        }
        seen.insert(doc_id.clone(), path.clone());
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let sha256 = sha256_hex(&bytes);
        docs.push(ImageDoc {
            doc_id,
            path,
            sha256,
            bytes,
        });
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no supported images ({}) in {}",
            SUPPORTED_EXTENSIONS.join("/"),
            dir.display()
        )));
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(CorpusScan { docs, skipped })
}

/// Raw OCR output for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedText {
    pub doc_id: String,
    pub raw_text: String,
    pub backend_id: OcrBackendKind,
    /// RFC 3339 timestamp of the original extraction (cache hits keep it).
    pub extracted_at: String,
}

/// One cache record, keyed externally by the image content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub doc_id: String,
    pub raw_text: String,
    pub backend_id: OcrBackendKind,
    pub extracted_at: String,
}

/// Content-addressed extraction cache, persisted as pretty JSON with sorted
/// keys so reruns are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrCache {
    pub entries: BTreeMap<String, CacheEntry>,
}

impl OcrCache {
    /// Loads the cache; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(raw) => serde_json::from_str(&raw).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(OcrCache::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Monthly backend-call counter, persisted beside the cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaLedger {
    /// `YYYY-MM` of the month the counter belongs to.
    pub month: String,
    pub used: u64,
}

impl QuotaLedger {
    pub fn current_month() -> String {
        chrono::Utc::now().format("%Y-%m").to_string()
    }

    /// Loads the ledger, resetting the counter when the month has rolled
    /// over. A missing file starts at zero.
    pub fn load(path: &Path) -> Result<Self> {
        let month = Self::current_month();
        match std::fs::read_to_string(path) {
            Ok(raw) => {
                let ledger: QuotaLedger = serde_json::from_str(&raw).map_err(|e| Error::Json {
                    path: path.to_path_buf(),
                    source: e,
                })?;
                if ledger.month == month {
                    Ok(ledger)
                } else {
                    Ok(QuotaLedger { month, used: 0 })
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Ok(QuotaLedger { month, used: 0 })
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Runs one backend extraction. This is the only place OCR calls happen, so
/// quota accounting wraps exactly these invocations.
fn run_backend(config: &OcrConfig, doc: &ImageDoc) -> Result<String> {
    match config.kind {
        OcrBackendKind::Sidecar => {
            let expected = doc.path.with_extension("txt");
            if !expected.exists() {
                return Err(Error::MissingSidecar {
                    image: doc.path.clone(),
                    expected,
                });
            }
            std::fs::read_to_string(&expected).map_err(|e| Error::io(&expected, e))
        }
        OcrBackendKind::HttpVision => {
            let endpoint = config.endpoint.as_deref().ok_or_else(|| {
                Error::InvalidConfig("http_vision backend requires an endpoint".to_string())
            })?;
            let key = std::env::var(&config.api_key_env).map_err(|_| {
                Error::OcrHttp(format!(
                    "{} is not set (the vision subscription key is read from the \
                     environment, never from flags)",
                    config.api_key_env
                ))
            })?;
            let response = ureq::post(endpoint)
                .set("Ocp-Apim-Subscription-Key", &key)
                .set("Content-Type", "application/octet-stream")
                .send_bytes(&doc.bytes)
                .map_err(|e| Error::OcrHttp(e.to_string()))?;
            #[derive(Deserialize)]
            struct VisionResponse {
                lines: Vec<String>,
            }
            let parsed: VisionResponse = response
                .into_json()
                .map_err(|e| Error::OcrHttp(format!("invalid response body: {e}")))?;
            Ok(parsed.lines.join("\n"))
        }
    }
}

/// Extracts the whole corpus, serving unchanged images from the cache.
/// Extraction is keyed by content hash, so byte-identical images cost one
/// backend call between them (and zero once cached).
///
/// Cache misses run in parallel (bounded by `config.workers`) after a
/// sequential quota check: if the remaining quota covers only part of the
/// misses, that part is still extracted and cached before the call fails, so
/// a rerun resumes where this one stopped. The cache and ledger files are
/// written whenever anything changed, even on failure.
pub fn extract_corpus(
    docs: &[ImageDoc],
    config: &OcrConfig,
    cache_path: &Path,
    quota_path: &Path,
) -> Result<Vec<ExtractedText>> {
    let mut cache = OcrCache::load(cache_path)?;
    let mut ledger = QuotaLedger::load(quota_path)?;

    // One backend call per unique content hash: files with identical bytes
    // share a single extraction, in first-appearance order.
    let mut seen = HashSet::new();
    let misses: Vec<&ImageDoc> = docs
        .iter()
        .filter(|d| {
            cache
                .entries
                .get(&d.sha256)
                .is_none_or(|e| e.backend_id != config.kind)
                && seen.insert(d.sha256.clone())
        })
        .collect();

    // Quota gate: run what fits, then fail deterministically.
    let (to_run, quota_hit) = match config.quota {
        Some(limit) => {
            let allowed = limit.saturating_sub(ledger.used) as usize;
            if misses.len() > allowed {
                (&misses[..allowed], Some(limit))
            } else {
                (&misses[..], None)
            }
        }
        None => (&misses[..], None),
    };

    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let quota_state = Mutex::new(&mut ledger);
    let outcomes: Vec<(String, String, Result<String>)> =
        bounded_map(to_run.to_vec(), config.workers.max(1), |doc: &ImageDoc| {
            {
                let mut ledger = quota_state.lock().unwrap();
                ledger.used += 1;
            }
            (
                doc.sha256.clone(),
                doc.doc_id.clone(),
                run_backend(config, doc),
            )
        });

    let mut first_error: Option<Error> = None;
    let mut cache_dirty = false;
    for (sha, doc_id, outcome) in outcomes {
        match outcome {
            Ok(raw_text) => {
                cache.entries.insert(
                    sha,
                    CacheEntry {
                        doc_id,
                        raw_text,
                        backend_id: config.kind,
                        extracted_at: stamp.clone(),
                    },
                );
                cache_dirty = true;
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    if cache_dirty {
        cache.save(cache_path)?;
    }
    ledger.save(quota_path)?;

    if let Some(e) = first_error {
        return Err(e);
    }
    if let Some(limit) = quota_hit {
        return Err(Error::QuotaExceeded { quota: limit });
    }

    Ok(docs
        .iter()
        .map(|d| {
            let entry = &cache.entries[&d.sha256];
            ExtractedText {
                doc_id: d.doc_id.clone(),
                raw_text: entry.raw_text.clone(),
                backend_id: entry.backend_id,
                extracted_at: entry.extracted_at.clone(),
            }
        })
        .collect())
}

/// Loads and extracts a single query image without touching any cache; the
/// quota ledger is still charged because a backend call happens.
pub fn extract_query(path: &Path, config: &OcrConfig, quota_path: &Path) -> Result<ExtractedText> {
    if !is_supported_image(path) {
        return Err(Error::UnsupportedFormat(path.to_path_buf()));
    }
    let doc_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::UnsupportedFormat(path.to_path_buf()))?
        .to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let sha256 = sha256_hex(&bytes);
    let doc = ImageDoc {
        doc_id: doc_id.clone(),
        path: path.to_path_buf(),
        sha256,
        bytes,
    };

    let mut ledger = QuotaLedger::load(quota_path)?;
    if let Some(limit) = config.quota {
        if ledger.used >= limit {
            return Err(Error::QuotaExceeded { quota: limit });
        }
    }
    ledger.used += 1;
    let outcome = run_backend(config, &doc);
    ledger.save(quota_path)?;
    let raw_text = outcome?;
    Ok(ExtractedText {
        doc_id,
        raw_text,
        backend_id: config.kind,
        extracted_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};

    fn write_image(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    fn write_sidecar(dir: &Path, stem: &str, text: &str) {
        std::fs::write(dir.join(format!("{stem}.txt")), text).unwrap();
    }

    fn paths(dir: &Path) -> (PathBuf, PathBuf) {
        (dir.join("ocr_cache.json"), dir.join("ocr_quota.json"))
    }

    #[test]
    fn scan_accepts_supported_extensions_case_insensitively() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"a");
        write_image(dir.path(), "b.JPG", b"b");
        write_image(dir.path(), "c.jpeg", b"c");
        write_image(dir.path(), "d.BMP", b"d");
        let scan = scan_corpus(dir.path()).unwrap();
        let ids: Vec<&str> = scan.docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c", "d"]);
        assert!(scan.skipped.is_empty());
    }

    #[test]
    fn scan_warns_on_non_images_but_not_on_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"a");
        write_sidecar(dir.path(), "a", "text");
        write_image(dir.path(), "notes.pdf", b"pdf");
        let scan = scan_corpus(dir.path()).unwrap();
        assert_eq!(scan.docs.len(), 1);
        assert_eq!(scan.skipped.len(), 1);
        assert!(scan.skipped[0].contains("notes.pdf"));
    }

    #[test]
    fn scan_rejects_duplicate_stems() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"1");
        write_image(dir.path(), "a.jpg", b"2");
        let err = scan_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId { .. }), "{err}");
    }

    #[test]
    fn scan_rejects_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "readme.md", b"not an image");
        let err = scan_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus(_)), "{err}");
    }

    #[test]
    fn sidecar_extraction_reads_text_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"imgbytes");
        write_sidecar(dir.path(), "a", "Line one\nLine two\n");
        let scan = scan_corpus(dir.path()).unwrap();
        let (cache, quota) = paths(dir.path());
        let texts = extract_corpus(&scan.docs, &OcrConfig::default(), &cache, &quota).unwrap();
        assert_eq!(texts.len(), 1);
        assert_eq!(texts[0].raw_text, "Line one\nLine two\n");
        assert_eq!(texts[0].backend_id, OcrBackendKind::Sidecar);
    }

    #[test]
    fn missing_sidecar_is_reported_but_cache_keeps_successes() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"a");
        write_sidecar(dir.path(), "a", "alpha");
        write_image(dir.path(), "b.png", b"b");
        // no sidecar for b
        let scan = scan_corpus(dir.path()).unwrap();
        let (cache_path, quota_path) = paths(dir.path());
        let config = OcrConfig {
            workers: 1,
            ..OcrConfig::default()
        };
        let err = extract_corpus(&scan.docs, &config, &cache_path, &quota_path).unwrap_err();
        assert!(matches!(err, Error::MissingSidecar { .. }), "{err}");
        // The success was cached, so fixing b and rerunning extracts only b.
        let cache = OcrCache::load(&cache_path).unwrap();
        assert_eq!(cache.entries.len(), 1);
        write_sidecar(dir.path(), "b", "beta");
        let texts = extract_corpus(&scan.docs, &config, &cache_path, &quota_path).unwrap();
        assert_eq!(texts[1].raw_text, "beta");
        let ledger = QuotaLedger::load(&quota_path).unwrap();
        assert_eq!(ledger.used, 3); // a, failed b, retried b
    }

    #[test]
    fn unchanged_rerun_makes_zero_backend_calls() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"a");
        write_sidecar(dir.path(), "a", "alpha");
        let scan = scan_corpus(dir.path()).unwrap();
        let (cache, quota) = paths(dir.path());
        let config = OcrConfig::default();
        let first = extract_corpus(&scan.docs, &config, &cache, &quota).unwrap();
        // Deleting the sidecar proves the second run never touches the
        // backend: it must come entirely from the cache.
        std::fs::remove_file(dir.path().join("a.txt")).unwrap();
        let second = extract_corpus(&scan.docs, &config, &cache, &quota).unwrap();
        assert_eq!(first, second);
        let ledger = QuotaLedger::load(&quota).unwrap();
        assert_eq!(ledger.used, 1);
    }

    #[test]
    fn changed_bytes_invalidate_the_cache_entry() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"v1");
        write_sidecar(dir.path(), "a", "first text");
        let (cache, quota) = paths(dir.path());
        let config = OcrConfig::default();
        let scan = scan_corpus(dir.path()).unwrap();
        extract_corpus(&scan.docs, &config, &cache, &quota).unwrap();
        write_image(dir.path(), "a.png", b"v2");
        write_sidecar(dir.path(), "a", "second text");
        let scan = scan_corpus(dir.path()).unwrap();
        let texts = extract_corpus(&scan.docs, &config, &cache, &quota).unwrap();
        assert_eq!(texts[0].raw_text, "second text");
        assert_eq!(QuotaLedger::load(&quota).unwrap().used, 2);
    }

    #[test]
    fn identical_bytes_share_one_extraction() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png", b"same");
        write_sidecar(dir.path(), "a", "shared text");
        write_image(dir.path(), "b.png", b"same");
        let (cache, quota) = paths(dir.path());
        let scan = scan_corpus(dir.path()).unwrap();
        let texts = extract_corpus(&scan.docs, &OcrConfig::default(), &cache, &quota).unwrap();
        assert_eq!(texts.len(), 2);
        assert_eq!(texts[0].doc_id, "a");
        assert_eq!(texts[1].doc_id, "b");
        assert_eq!(texts[1].raw_text, "shared text");
        assert_eq!(QuotaLedger::load(&quota).unwrap().used, 1);
    }

    #[test]
    fn quota_stops_extraction_but_keeps_partial_cache() {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [("a", "one"), ("b", "two"), ("c", "three")] {
            write_image(dir.path(), &format!("{name}.png"), name.as_bytes());
            write_sidecar(dir.path(), name, text);
        }
        let (cache_path, quota_path) = paths(dir.path());
        let config = OcrConfig {
            quota: Some(2),
            workers: 1,
            ..OcrConfig::default()
        };
        let scan = scan_corpus(dir.path()).unwrap();
        let err = extract_corpus(&scan.docs, &config, &cache_path, &quota_path).unwrap_err();
        assert!(matches!(err, Error::QuotaExceeded { quota: 2 }), "{err}");
        let cache = OcrCache::load(&cache_path).unwrap();
        assert_eq!(cache.entries.len(), 2, "first two extractions are kept");
        assert_eq!(QuotaLedger::load(&quota_path).unwrap().used, 2);
        // With a raised quota the rerun only extracts the remaining doc.
        let config = OcrConfig {
            quota: Some(3),
            ..config
        };
        let texts = extract_corpus(&scan.docs, &config, &cache_path, &quota_path).unwrap();
        assert_eq!(texts.len(), 3);
        assert_eq!(QuotaLedger::load(&quota_path).unwrap().used, 3);
    }

    #[test]
    fn quota_resets_on_month_rollover() {
        let dir = tempfile::tempdir().unwrap();
        let quota_path = dir.path().join("ocr_quota.json");
        QuotaLedger {
            month: "1999-01".to_string(),
            used: 1_000_000,
        }
        .save(&quota_path)
        .unwrap();
        let ledger = QuotaLedger::load(&quota_path).unwrap();
        assert_eq!(ledger.used, 0);
        assert_eq!(ledger.month, QuotaLedger::current_month());
    }

    #[test]
    fn query_extraction_charges_quota_but_writes_no_cache() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_image(dir.path(), "q.png", b"q");
        write_sidecar(dir.path(), "q", "query text");
        let (cache_path, quota_path) = paths(dir.path());
        let text = extract_query(&img, &OcrConfig::default(), &quota_path).unwrap();
        assert_eq!(text.raw_text, "query text");
        assert!(!cache_path.exists());
        assert_eq!(QuotaLedger::load(&quota_path).unwrap().used, 1);
        // An exhausted quota refuses the call before it happens.
        let config = OcrConfig {
            quota: Some(1),
            ..OcrConfig::default()
        };
        let err = extract_query(&img, &config, &quota_path).unwrap_err();
        assert!(matches!(err, Error::QuotaExceeded { quota: 1 }), "{err}");
    }

    #[test]
    fn query_rejects_unsupported_extension() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_image(dir.path(), "q.gif", b"gif");
        let err = extract_query(&path, &OcrConfig::default(), &dir.path().join("quota.json"))
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)), "{err}");
    }

    /// Minimal single-request HTTP server for backend tests.
    fn one_shot_server(
        status_line: &'static str,
        body: &'static str,
    ) -> (String, std::thread::JoinHandle<(String, Vec<u8>)>) {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let (headers, mut body_bytes);
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                    headers = String::from_utf8_lossy(&buf[..pos]).to_string();
                    body_bytes = buf[pos + 4..].to_vec();
                    break;
                }
            }
            let content_length: usize = headers
                .lines()
                .find_map(|l| {
                    l.to_lowercase()
                        .strip_prefix("content-length:")
                        .map(|v| v.trim().parse().unwrap())
                })
                .unwrap_or(0);
            while body_bytes.len() < content_length {
                let n = stream.read(&mut chunk).unwrap();
                body_bytes.extend_from_slice(&chunk[..n]);
            }
            let response = format!(
                "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
            (headers, body_bytes)
        });
        (format!("http://{addr}/vision"), handle)
    }

    fn http_config(endpoint: String, key_env: &str) -> OcrConfig {
        OcrConfig {
            kind: OcrBackendKind::HttpVision,
            endpoint: Some(endpoint),
            api_key_env: key_env.to_string(),
            quota: None,
            workers: 1,
        }
    }

    #[test]
    fn http_vision_posts_bytes_and_joins_lines() {
        let (endpoint, server) = one_shot_server(
            "HTTP/1.1 200 OK",
            r#"{"lines": ["Round one", "Round two"]}"#,
        );
        std::env::set_var("TEST_VISION_KEY_OK", "sekrit");
        let dir = tempfile::tempdir().unwrap();
        let img = write_image(dir.path(), "q.png", b"PNGBYTES");
        let text = extract_query(
            &img,
            &http_config(endpoint, "TEST_VISION_KEY_OK"),
            &dir.path().join("quota.json"),
        )
        .unwrap();
        assert_eq!(text.raw_text, "Round one\nRound two");
        assert_eq!(text.backend_id, OcrBackendKind::HttpVision);
        let (headers, body) = server.join().unwrap();
        assert!(
            headers.contains("Ocp-Apim-Subscription-Key: sekrit"),
            "headers were:\n{headers}"
        );
        assert_eq!(body, b"PNGBYTES");
    }

    #[test]
    fn http_vision_surfaces_service_errors() {
        let (endpoint, server) = one_shot_server("HTTP/1.1 403 Forbidden", r#"{"error": "no"}"#);
        std::env::set_var("TEST_VISION_KEY_403", "bad");
        let dir = tempfile::tempdir().unwrap();
        let img = write_image(dir.path(), "q.png", b"x");
        let err = extract_query(
            &img,
            &http_config(endpoint, "TEST_VISION_KEY_403"),
            &dir.path().join("quota.json"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OcrHttp(_)), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn http_vision_requires_key_in_environment() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_image(dir.path(), "q.png", b"x");
        let err = extract_query(
            &img,
            &http_config(
                "http://127.0.0.1:1/vision".to_string(),
                "TEST_VISION_KEY_UNSET",
            ),
            &dir.path().join("quota.json"),
        )
        .unwrap_err();
        assert!(
            err.to_string().contains("TEST_VISION_KEY_UNSET"),
            "error should name the env var: {err}"
        );
    }

    #[test]
    fn http_vision_requires_endpoint() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_image(dir.path(), "q.png", b"x");
        let config = OcrConfig {
            kind: OcrBackendKind::HttpVision,
            endpoint: None,
            ..OcrConfig::default()
        };
        let err = extract_query(&img, &config, &dir.path().join("quota.json")).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
    }

    #[test]
    fn backend_kind_strings_round_trip() {
        assert_eq!(
            "sidecar".parse::<OcrBackendKind>().unwrap(),
            OcrBackendKind::Sidecar
        );
        assert_eq!(
            "http_vision".parse::<OcrBackendKind>().unwrap(),
            OcrBackendKind::HttpVision
        );
        assert!("tesseract".parse::<OcrBackendKind>().is_err());
        assert_eq!(OcrBackendKind::HttpVision.label(), "http_vision");
    }
}
