use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use kgvo::archive::{
    archived_versions, manifest_from_log, read_fetch_log, watch_once, HttpFetcher, Outcome, WatchConfig, FETCH_LOG,
    MANIFEST,
};
use kgvo::vocab::{load_version, VocabManifest};

const NS: &str = "http://h.example.org/ns#";

/// path -> (status, extra headers, body)
type Routes = Arc<Mutex<HashMap<String, (u16, Vec<(String, String)>, Vec<u8>)>>>;

/// Minimal HTTP/1.1 server answering from a mutable route table, one
/// request per connection.
fn serve() -> (String, Routes) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let routes: Routes = Arc::default();
    let table = routes.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_owned();
            let (status, headers, body) = table
                .lock()
                .unwrap()
                .get(&path)
                .cloned()
                .unwrap_or((404, vec![], b"not found".to_vec()));
            let mut out = format!("HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n", body.len());
            for (k, v) in headers {
                out.push_str(&format!("{k}: {v}\r\n"));
            }
            out.push_str("\r\n");
            let _ = stream.write_all(out.as_bytes());
            let _ = stream.write_all(&body);
        }
    });
    (base, routes)
}

fn doc(terms: &[&str], comment: &str) -> Vec<u8> {
    let mut s = format!("# {comment}\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n");
    for t in terms {
        s.push_str(&format!("<{NS}{t}> a owl:Class .\n"));
    }
    s.into_bytes()
}

fn turtle(routes: &Routes, path: &str, body: Vec<u8>) {
    routes
        .lock()
        .unwrap()
        .insert(path.into(), (200, vec![("Content-Type".into(), "text/turtle; charset=utf-8".into())], body));
}

fn redirect(routes: &Routes, from: &str, status: u16, to: &str) {
    routes
        .lock()
        .unwrap()
        .insert(from.into(), (status, vec![("Location".into(), to.into())], vec![]));
}

fn config(dir: &Path, base: &str) -> WatchConfig {
    let text = format!(
        "archive_dir = \"archive\"\ntimeout = \"5s\"\n\
         [[vocabulary]]\nid = \"A\"\nnamespace = \"{NS}\"\nurl = \"{base}/a\"\n\
         [[vocabulary]]\nid = \"B\"\nnamespace = \"{NS}\"\nurl = \"{base}/b\"\n\
         [[vocabulary]]\nid = \"C\"\nnamespace = \"{NS}\"\nurl = \"{base}/c\"\n"
    );
    WatchConfig::parse(&text, dir).unwrap()
}

fn at(day: u32, hour: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 3, day, hour, 0, 0).unwrap()
}

fn outcomes(entries: &[kgvo::archive::ArchiveEntry]) -> Vec<(String, Outcome)> {
    entries.iter().map(|e| (e.vocab_id.clone(), e.outcome)).collect()
}

#[test]
fn watcher_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    let (base, routes) = serve();
    let cfg = config(tmp.path(), &base);
    let fetcher = HttpFetcher::new(Duration::from_secs(5));

    // A: plain 200; B: 404; C: 303 -> 302 -> 200
    turtle(&routes, "/a", doc(&["X", "Y"], "v1"));
    redirect(&routes, "/c", 303, "/c2");
    redirect(&routes, "/c2", 302, &format!("{base}/c3"));
    turtle(&routes, "/c3", doc(&["Z"], "c"));

    let first = watch_once(&cfg, &fetcher, at(1, 8)).unwrap();
    assert_eq!(
        outcomes(&first),
        [("A".into(), Outcome::NewVersion), ("B".into(), Outcome::FetchFailed), ("C".into(), Outcome::NewVersion)]
    );
    assert_eq!(first[1].http_status, Some(404));
    assert_eq!(first[2].redirects, [format!("{base}/c"), format!("{base}/c2")]);
    let stored = first[0].stored_path.clone().unwrap();
    assert!(stored.starts_with("A"));
    assert!(stored.to_str().unwrap().starts_with("A/2020-03-01-"));
    assert!(stored.to_str().unwrap().ends_with(".ttl"));

    // same bytes: unchanged; comment edit: cosmetic; new term same day: deferred
    let again = watch_once(&cfg, &fetcher, at(1, 9)).unwrap();
    assert_eq!(again[0].outcome, Outcome::Unchanged);
    turtle(&routes, "/a", doc(&["X", "Y"], "reformatted"));
    assert_eq!(watch_once(&cfg, &fetcher, at(1, 10)).unwrap()[0].outcome, Outcome::Cosmetic);
    turtle(&routes, "/a", doc(&["X", "Y", "W"], "v2"));
    assert_eq!(watch_once(&cfg, &fetcher, at(1, 11)).unwrap()[0].outcome, Outcome::Deferred);

    let snapshot_files: Vec<_> = std::fs::read_dir(tmp.path().join("archive/A")).unwrap().collect();
    assert_eq!(snapshot_files.len(), 1, "cosmetic and deferred fetches store nothing");
    let log_before = std::fs::read_to_string(tmp.path().join("archive").join(FETCH_LOG)).unwrap();

    // next day the new term set is archived; B now redirects into a loop
    redirect(&routes, "/b", 301, "/b");
    let next = watch_once(&cfg, &fetcher, at(2, 0)).unwrap();
    assert_eq!(next[0].outcome, Outcome::NewVersion);
    assert_eq!(next[1].outcome, Outcome::FetchFailed);
    assert!(next[1].note.as_deref().unwrap().contains("redirects"));
    assert_eq!(next[2].outcome, Outcome::Unchanged);

    // a revert to earlier bytes reuses the stored file
    turtle(&routes, "/a", doc(&["X", "Y"], "v1"));
    let revert = watch_once(&cfg, &fetcher, at(3, 0)).unwrap();
    assert_eq!(revert[0].outcome, Outcome::NewVersion);
    assert_eq!(revert[0].stored_path.as_ref(), Some(&stored));

    // unsupported media type
    routes
        .lock()
        .unwrap()
        .insert("/b".into(), (200, vec![("Content-Type".into(), "text/html".into())], b"<html/>".to_vec()));
    assert_eq!(watch_once(&cfg, &fetcher, at(4, 0)).unwrap()[1].outcome, Outcome::FetchFailed);

    // the log only grows, and replaying it yields the manifest
    let archive = tmp.path().join("archive");
    let log_after = std::fs::read_to_string(archive.join(FETCH_LOG)).unwrap();
    assert!(log_after.starts_with(&log_before));
    let entries = read_fetch_log(&archive).unwrap();
    assert_eq!(entries.len(), 7 * 3);
    let replayed: Vec<String> = manifest_from_log(&entries)
        .into_iter()
        .map(|(id, d, p)| format!("{id},{d},{}", p.display()))
        .collect();
    let manifest = std::fs::read_to_string(archive.join(MANIFEST)).unwrap();
    let rows: Vec<&str> = manifest.lines().skip(1).collect();
    assert_eq!(rows, replayed);
    assert_eq!(rows.len(), 4);

    // the manifest feeds term extraction directly
    let versions = archived_versions(&cfg).unwrap();
    assert_eq!(versions.len(), 4);
    let ns = cfg.vocabularies.iter().map(|v| (v.id.clone(), v.namespace.clone())).collect();
    let by_vocab = VocabManifest::load(&archive.join(MANIFEST), &ns).unwrap().load_versions().unwrap();
    assert_eq!(by_vocab["A"].len(), 3);
    let e = &versions[0];
    let v = load_version(&e.path, &e.vocab_id, NS, e.version_date).unwrap();
    assert_eq!(v.namespace_term_count(), 2);
}
