//! The `diff`, `index` and `report` pipeline stages and their output files.
//!
//! Layout under the output directory:
//!
//! | file | columns |
//! |------|---------|
//! | `changes/<vocab>.csv` (+ `.json`) | `vocab_id,term,kind,from,to` |
//! | `summary.csv` | `vocab_id,versions,changes,added,removed,deprecated,undeprecated,recreated` |
//! | `ineligible.csv` | `vocab_id,reasons` |
//! | `usage/<date>.csv` | `date,term,pld,count` |
//! | `parse_stats.csv` | `date,lines_total,quads_emitted,lines_skipped,lines_ignored` |
//! | `index_stats.json` | parse and attribution counters per date |
//! | `selection.csv` | `vocab_id,eligible,reasons` |
//! | `report/adoption.csv` | `vocab_id,term,publish_date,first_use,lag_days,instances,plds` |
//! | `report/adoption_stats.csv` | `vocab_id,new_terms,adopted,pct_used,instances,mu_days,sigma_days` |
//! | `report/unused.csv` | `vocab_id,total_terms,unused,pct_unused` |
//! | `report/deprecated_usage.csv` | `vocab_id,term,deprecation_date,snapshot,count` |
//! | `report/deprecated_plds.csv` | `date,rank,pld,deprecated_terms,triples` |
//! | `report/top_plds.csv` | `vocab_id,rank,pld,count` |
//! | `report/snapshot_top_pld.csv` | `date,pld,count` |
//! | `report/timeseries.csv` | `vocab_id,date,kind,count` |
//! | `report/term_timeseries.csv` | `vocab_id,term,date,count` |
//! | `report/report.json` | all report tables, same field names |
//!
//! Counts are exact integers. `mu_days` and `sigma_days` have two decimals
//! and are empty when undefined. `plds` is the number of adopting PLDs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adoption::{
    compute_adoption, deprecated_term_plds, deprecated_usage, unused_terms, usage_timeseries, vocab_stats,
    SeriesSelector,
};
use crate::config::{RunConfig, Stage};
use crate::dates::DateWindow;
use crate::diff::{build_change_log, check_selection, ChangeKind, ChangeLog, SelectionVerdict};
use crate::error::{Error, Result};
use crate::pld::Pld;
use crate::quad::{open_snapshot, ParseStats, SnapshotManifest};
use crate::usage::{AttributionStats, SnapshotUsage, TrackedTerms, UsageAccumulator};
use crate::vocab::{union_of, VocabManifest, VocabVersion};
use crate::VocabAdoptionStats;

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `header` then one serialized row per item. The header is written
/// even when there are no rows.
fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fixed2(x: Option<f64>) -> Option<String> {
    x.map(|v| format!("{v:.2}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub vocab_id: String,
    pub versions: usize,
    pub changes: usize,
    pub added: usize,
    pub removed: usize,
    pub deprecated: usize,
    pub undeprecated: usize,
    pub recreated: usize,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 8] = [
        "vocab_id", "versions", "changes", "added", "removed", "deprecated", "undeprecated", "recreated",
    ];

    pub fn of(log: &ChangeLog) -> Self {
        SummaryRow {
            vocab_id: log.vocab_id.clone(),
            versions: log.versions.len(),
            changes: log.total_changes,
            added: log.count(ChangeKind::Added),
            removed: log.count(ChangeKind::Removed),
            deprecated: log.count(ChangeKind::Deprecated),
            undeprecated: log.count(ChangeKind::Undeprecated),
            recreated: log.count(ChangeKind::Recreated),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub vocab_id: String,
    pub eligible: bool,
    pub reasons: String,
}

impl SelectionRow {
    pub const HEADER: [&'static str; 3] = ["vocab_id", "eligible", "reasons"];

    fn of(v: &SelectionVerdict) -> Self {
        SelectionRow {
            vocab_id: v.vocab_id.clone(),
            eligible: v.eligible,
            reasons: v.reasons_joined(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStatsRow {
    pub date: NaiveDate,
    pub lines_total: u64,
    pub quads_emitted: u64,
    pub lines_skipped: u64,
    pub lines_ignored: u64,
}

impl ParseStatsRow {
    pub const HEADER: [&'static str; 5] = ["date", "lines_total", "quads_emitted", "lines_skipped", "lines_ignored"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionRow {
    pub vocab_id: String,
    pub term: String,
    pub publish_date: NaiveDate,
    pub first_use: Option<NaiveDate>,
    pub lag_days: Option<i64>,
    pub instances: u64,
    pub plds: usize,
}

impl AdoptionRow {
    pub const HEADER: [&'static str; 7] =
        ["vocab_id", "term", "publish_date", "first_use", "lag_days", "instances", "plds"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionStatsRow {
    pub vocab_id: String,
    pub new_terms: usize,
    pub adopted: usize,
    pub pct_used: u32,
    pub instances: u64,
    pub mu_days: Option<String>,
    pub sigma_days: Option<String>,
}

impl AdoptionStatsRow {
    pub const HEADER: [&'static str; 7] =
        ["vocab_id", "new_terms", "adopted", "pct_used", "instances", "mu_days", "sigma_days"];

    pub fn of(s: &VocabAdoptionStats) -> Self {
        AdoptionStatsRow {
            vocab_id: s.vocab_id.clone(),
            new_terms: s.new_terms,
            adopted: s.adopted_terms,
            pct_used: s.pct_used,
            instances: s.total_instances,
            mu_days: fixed2(s.mu_days),
            sigma_days: fixed2(s.sigma_days),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnusedRow {
    pub vocab_id: String,
    pub total_terms: usize,
    pub unused: usize,
    pub pct_unused: u32,
}

impl UnusedRow {
    pub const HEADER: [&'static str; 4] = ["vocab_id", "total_terms", "unused", "pct_unused"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecatedUsageRow {
    pub vocab_id: String,
    pub term: String,
    pub deprecation_date: NaiveDate,
    pub snapshot: NaiveDate,
    pub count: u64,
}

impl DeprecatedUsageRow {
    pub const HEADER: [&'static str; 5] = ["vocab_id", "term", "deprecation_date", "snapshot", "count"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecatedPldRow {
    pub date: NaiveDate,
    pub rank: usize,
    pub pld: String,
    pub deprecated_terms: usize,
    pub triples: u64,
}

impl DeprecatedPldRow {
    pub const HEADER: [&'static str; 5] = ["date", "rank", "pld", "deprecated_terms", "triples"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopPldRow {
    pub vocab_id: String,
    pub rank: usize,
    pub pld: String,
    pub count: u64,
}

impl TopPldRow {
    pub const HEADER: [&'static str; 4] = ["vocab_id", "rank", "pld", "count"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotTopPldRow {
    pub date: NaiveDate,
    pub pld: String,
    pub count: u64,
}

impl SnapshotTopPldRow {
    pub const HEADER: [&'static str; 3] = ["date", "pld", "count"];
}

/// `kind` is `snapshot` (count = triples) or `version` (a publication
/// marker, count empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub vocab_id: String,
    pub date: NaiveDate,
    pub kind: String,
    pub count: Option<u64>,
}

impl TimeseriesRow {
    pub const HEADER: [&'static str; 4] = ["vocab_id", "date", "kind", "count"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermTimeseriesRow {
    pub vocab_id: String,
    pub term: String,
    pub date: NaiveDate,
    pub count: u64,
}

impl TermTimeseriesRow {
    pub const HEADER: [&'static str; 4] = ["vocab_id", "term", "date", "count"];
}

fn load_versions(cfg: &RunConfig) -> Result<BTreeMap<String, Vec<VocabVersion>>> {
    let path = cfg
        .vocab_manifest
        .as_ref()
        .ok_or_else(|| Error::Config("vocab_manifest is not set".into()))?;
    VocabManifest::load(path, &cfg.namespaces)?.load_versions()
}

fn load_snapshots(cfg: &RunConfig) -> Result<SnapshotManifest> {
    let path = cfg
        .corpus_manifest
        .as_ref()
        .ok_or_else(|| Error::Config("corpus_manifest is not set".into()))?;
    let mut m = SnapshotManifest::load(path)?;
    let window = cfg.window();
    m.entries.retain(|e| window.contains(e.date));
    Ok(m)
}

/// Reads `usage/<date>.csv` files inside the configured date range, by date.
pub fn load_timeline(cfg: &RunConfig) -> Result<Vec<SnapshotUsage>> {
    let dir = cfg.usage_dir();
    let window = cfg.window();
    let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&dir, e)),
    };
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let u = SnapshotUsage::load(&f)?;
        if window.contains(u.snapshot_date) {
            out.push(u);
        }
    }
    out.sort_by_key(|u| u.snapshot_date);
    Ok(out)
}

/// The corpus window: configured bounds, else the span of `dates`.
fn corpus_window(cfg: &RunConfig, dates: &[NaiveDate]) -> DateWindow {
    DateWindow::new(
        cfg.start.or_else(|| dates.iter().min().copied()),
        cfg.end.or_else(|| dates.iter().max().copied()),
    )
}

fn selection(
    versions: &BTreeMap<String, Vec<VocabVersion>>,
    window: &DateWindow,
    timeline: Option<&[SnapshotUsage]>,
) -> Vec<SelectionVerdict> {
    versions
        .iter()
        .map(|(id, vs)| {
            let dates: Vec<NaiveDate> = vs.iter().map(|v| v.version_date).collect();
            let used = match (timeline, union_of(vs)) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(tl), Some(u)) => u
                    .namespace_terms()
                    .any(|t| tl.iter().any(|s| s.term_total(&t.iri) > 0)),
            };
            check_selection(id, &dates, window, used)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DiffOutcome {
    pub logs: Vec<ChangeLog>,
    pub verdicts: Vec<SelectionVerdict>,
}

impl DiffOutcome {
    pub fn any_ineligible(&self) -> bool {
        self.verdicts.iter().any(|v| !v.eligible)
    }
}

/// Builds change logs for every vocabulary with at least two versions and
/// applies the selection criteria. The direct-use criterion is evaluated
/// only when an index already exists in the output directory.
pub fn run_diff(cfg: &RunConfig) -> Result<DiffOutcome> {
    cfg.validate(Stage::Diff)?;
    let versions = load_versions(cfg)?;
    let timeline = cfg.usage_dir().is_dir().then(|| load_timeline(cfg)).transpose()?;
    let corpus_dates: Vec<NaiveDate> = match (&timeline, &cfg.corpus_manifest) {
        (Some(tl), _) => tl.iter().map(|u| u.snapshot_date).collect(),
        (None, Some(p)) if p.exists() => load_snapshots(cfg)?.dates(),
        _ => Vec::new(),
    };
    let window = corpus_window(cfg, &corpus_dates);
    let verdicts = selection(&versions, &window, timeline.as_deref());

    let logs: Vec<ChangeLog> = versions
        .values()
        .filter(|vs| vs.len() >= 2)
        .map(|vs| build_change_log(vs))
        .collect::<std::result::Result<_, _>>()?;

    let out = &cfg.output_dir;
    mkdir(&out.join("changes"))?;
    for log in &logs {
        let csv_path = out.join("changes").join(format!("{}.csv", log.vocab_id));
        let mut buf = Vec::new();
        log.write_csv(&mut buf, true)?;
        fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = out.join("changes").join(format!("{}.json", log.vocab_id));
        write_text(&json_path, &serde_json::to_string_pretty(log)?)?;
    }
    let summary: Vec<SummaryRow> = logs.iter().map(SummaryRow::of).collect();
    write_rows(&out.join("summary.csv"), &SummaryRow::HEADER, &summary)?;
    let ineligible: Vec<(String, String)> = verdicts
        .iter()
        .filter(|v| !v.eligible)
        .map(|v| (v.vocab_id.clone(), v.reasons_joined()))
        .collect();
    write_rows(&out.join("ineligible.csv"), &["vocab_id", "reasons"], &ineligible)?;
    Ok(DiffOutcome { logs, verdicts })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotIndexStats {
    pub date: NaiveDate,
    pub files: usize,
    pub parse: ParseStats,
    pub attribution: AttributionStats,
}

fn add_stats(into: &mut SnapshotIndexStats, parse: ParseStats, attr: AttributionStats) {
    into.files += 1;
    let p = &mut into.parse;
    p.lines_total += parse.lines_total;
    p.quads_emitted += parse.quads_emitted;
    p.lines_skipped += parse.lines_skipped;
    p.lines_ignored += parse.lines_ignored;
    p.first_error_samples.extend(parse.first_error_samples);
    p.first_error_samples.truncate(10);
    let a = &mut into.attribution;
    a.matched_quads += attr.matched_quads;
    a.without_pld += attr.without_pld;
    a.fallback_pld += attr.fallback_pld;
    a.non_ascii_host += attr.non_ascii_host;
}

/// Indexes every snapshot file in parallel and writes one usage file per
/// snapshot date (files sharing a date are merged).
pub fn run_index(cfg: &RunConfig) -> Result<Vec<SnapshotIndexStats>> {
    cfg.validate(Stage::Index)?;
    let versions = load_versions(cfg)?;
    let tracked = TrackedTerms::from_versions(versions.values().flatten());
    let rules = cfg.suffix_rules()?;
    let snapshots = load_snapshots(cfg)?;

    let per_file: Vec<(SnapshotUsage, ParseStats, AttributionStats)> = snapshots
        .entries
        .par_iter()
        .map(|entry| -> Result<_> {
            let mut stream = open_snapshot(&entry.path, entry.date)?;
            let mut acc = UsageAccumulator::new(entry.date, &tracked, &rules, cfg.attribution);
            for q in stream.by_ref() {
                acc.observe(&q?);
            }
            let attr = acc.attribution_stats();
            log::info!("indexed {} ({})", entry.path.display(), entry.date);
            Ok((acc.finish(), stream.into_stats(), attr))
        })
        .collect::<Result<_>>()?;

    let mut merged: BTreeMap<NaiveDate, (SnapshotUsage, SnapshotIndexStats)> = BTreeMap::new();
    for (usage, parse, attr) in per_file {
        let date = usage.snapshot_date;
        let slot = merged.entry(date).or_insert_with(|| {
            (
                SnapshotUsage::empty(date),
                SnapshotIndexStats { date, ..Default::default() },
            )
        });
        slot.0 = slot.0.merge(&usage)?;
        add_stats(&mut slot.1, parse, attr);
    }

    let dir = cfg.usage_dir();
    mkdir(&dir)?;
    let mut stats = Vec::new();
    for (date, (usage, s)) in merged {
        let path = dir.join(format!("{date}.csv"));
        let mut buf = Vec::new();
        usage.write_csv(&mut buf, true)?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        stats.push(s);
    }
    let rows: Vec<ParseStatsRow> = stats
        .iter()
        .map(|s| ParseStatsRow {
            date: s.date,
            lines_total: s.parse.lines_total,
            quads_emitted: s.parse.quads_emitted,
            lines_skipped: s.parse.lines_skipped,
            lines_ignored: s.parse.lines_ignored,
        })
        .collect();
    write_rows(&cfg.output_dir.join("parse_stats.csv"), &ParseStatsRow::HEADER, &rows)?;
    write_text(
        &cfg.output_dir.join("index_stats.json"),
        &serde_json::to_string_pretty(&stats)?,
    )?;
    Ok(stats)
}

/// Every report table, as written to `report/`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reports {
    pub selection: Vec<SelectionRow>,
    pub adoption: Vec<AdoptionRow>,
    pub adoption_stats: Vec<AdoptionStatsRow>,
    pub unused: Vec<UnusedRow>,
    pub deprecated_usage: Vec<DeprecatedUsageRow>,
    pub deprecated_plds: Vec<DeprecatedPldRow>,
    pub top_plds: Vec<TopPldRow>,
    pub snapshot_top_pld: Vec<SnapshotTopPldRow>,
    pub timeseries: Vec<TimeseriesRow>,
    pub term_timeseries: Vec<TermTimeseriesRow>,
}

struct VocabReport {
    adoption: Vec<AdoptionRow>,
    stats: AdoptionStatsRow,
    unused: Option<UnusedRow>,
    deprecated: Vec<DeprecatedUsageRow>,
    top: Vec<TopPldRow>,
    series: Vec<TimeseriesRow>,
    term_series: Vec<TermTimeseriesRow>,
}

fn vocab_report(log: &ChangeLog, union: &VocabVersion, timeline: &[SnapshotUsage]) -> Result<VocabReport> {
    let id = &log.vocab_id;
    let records = compute_adoption(log, timeline);
    let stats: VocabAdoptionStats = vocab_stats(id, &records);
    let adoption = records
        .iter()
        .map(|r| AdoptionRow {
            vocab_id: id.clone(),
            term: r.term_iri.clone(),
            publish_date: r.publish_date,
            first_use: r.first_use_snapshot,
            lag_days: r.lag_days,
            instances: r.instance_count,
            plds: r.adopting_plds.len(),
        })
        .collect();
    let unused = match unused_terms(union, timeline) {
        Ok(u) => Some(UnusedRow {
            vocab_id: u.vocab_id,
            total_terms: u.total_terms,
            unused: u.unused,
            pct_unused: u.pct_unused,
        }),
        Err(Error::EmptyUniverse(_)) => None,
        Err(e) => return Err(e),
    };
    let mut deprecated = Vec::new();
    for r in deprecated_usage(log, timeline) {
        for (snap, n) in &r.post_deprecation_counts {
            deprecated.push(DeprecatedUsageRow {
                vocab_id: id.clone(),
                term: r.term_iri.clone(),
                deprecation_date: r.deprecation_date,
                snapshot: *snap,
                count: *n,
            });
        }
    }
    let top = crate::usage::top_plds(timeline, union)
        .into_iter()
        .enumerate()
        .map(|(i, (pld, count))| TopPldRow {
            vocab_id: id.clone(),
            rank: i + 1,
            pld: pld.to_string(),
            count,
        })
        .collect();

    let vocab_series = usage_timeseries(timeline, SeriesSelector::Vocab(union), &log.versions, None);
    let mut series: Vec<TimeseriesRow> = vocab_series
        .points
        .iter()
        .map(|(d, n)| TimeseriesRow {
            vocab_id: id.clone(),
            date: *d,
            kind: "snapshot".into(),
            count: Some(*n),
        })
        .chain(vocab_series.markers.iter().map(|d| TimeseriesRow {
            vocab_id: id.clone(),
            date: *d,
            kind: "version".into(),
            count: None,
        }))
        .collect();
    series.sort_by(|a, b| (a.date, &a.kind).cmp(&(b.date, &b.kind)));

    let mut term_series = Vec::new();
    for r in &records {
        let s = usage_timeseries(timeline, SeriesSelector::Term(&r.term_iri), &[], Some(r.publish_date));
        for (d, n) in s.points {
            term_series.push(TermTimeseriesRow {
                vocab_id: id.clone(),
                term: r.term_iri.clone(),
                date: d,
                count: n,
            });
        }
    }
    Ok(VocabReport {
        adoption,
        stats: AdoptionStatsRow::of(&stats),
        unused,
        deprecated,
        top,
        series,
        term_series,
    })
}

/// Computes the reports from the usage files already in the output
/// directory; corpora are not re-read.
pub fn build_reports(cfg: &RunConfig) -> Result<Reports> {
    let versions = load_versions(cfg)?;
    let timeline = load_timeline(cfg)?;
    let dates: Vec<NaiveDate> = timeline.iter().map(|u| u.snapshot_date).collect();
    let window = corpus_window(cfg, &dates);
    let verdicts = selection(&versions, &window, Some(&timeline));
    let eligible: BTreeSet<&str> = verdicts.iter().filter(|v| v.eligible).map(|v| v.vocab_id.as_str()).collect();

    let work: Vec<(&Vec<VocabVersion>, VocabVersion)> = versions
        .iter()
        .filter(|(id, _)| eligible.contains(id.as_str()))
        .filter_map(|(_, vs)| union_of(vs).map(|u| (vs, u)))
        .collect();
    let logs: Vec<ChangeLog> = work
        .iter()
        .map(|(vs, _)| build_change_log(vs))
        .collect::<std::result::Result<_, _>>()?;
    let per_vocab: Vec<VocabReport> = work
        .par_iter()
        .zip(logs.par_iter())
        .map(|((_, union), log)| vocab_report(log, union, &timeline))
        .collect::<Result<_>>()?;

    let mut r = Reports {
        selection: verdicts.iter().map(SelectionRow::of).collect(),
        ..Default::default()
    };
    for v in per_vocab {
        r.adoption.extend(v.adoption);
        r.adoption_stats.push(v.stats);
        r.unused.extend(v.unused);
        r.deprecated_usage.extend(v.deprecated);
        r.top_plds.extend(v.top);
        r.timeseries.extend(v.series);
        r.term_timeseries.extend(v.term_series);
    }

    let tracked: BTreeSet<&str> = work
        .iter()
        .flat_map(|(_, u)| u.namespace_terms().map(|t| t.iri.as_str()))
        .collect();
    for snap in &timeline {
        let one = std::slice::from_ref(snap);
        let reports: Vec<_> = logs.iter().flat_map(|l| deprecated_usage(l, one)).collect();
        for (i, p) in deprecated_term_plds(&reports).into_iter().enumerate() {
            r.deprecated_plds.push(DeprecatedPldRow {
                date: snap.snapshot_date,
                rank: i + 1,
                pld: p.pld.to_string(),
                deprecated_terms: p.deprecated_terms,
                triples: p.triples,
            });
        }
        let mut per_pld: BTreeMap<&Pld, u64> = BTreeMap::new();
        for (k, n) in &snap.counts {
            if let Some(p) = &k.pld {
                if tracked.contains(k.term_iri.as_str()) {
                    *per_pld.entry(p).or_default() += n;
                }
            }
        }
        // first maximum in name order
        if let Some((pld, count)) = per_pld.into_iter().fold(None, |best: Option<(&Pld, u64)>, (p, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((p, n)),
        }) {
            r.snapshot_top_pld.push(SnapshotTopPldRow {
                date: snap.snapshot_date,
                pld: pld.to_string(),
                count,
            });
        }
    }
    Ok(r)
}

/// Builds the reports and writes them under `report/`, plus `selection.csv`.
pub fn run_report(cfg: &RunConfig) -> Result<Reports> {
    cfg.validate(Stage::Report)?;
    let r = build_reports(cfg)?;
    let dir = cfg.report_dir();
    mkdir(&dir)?;
    write_rows(&cfg.output_dir.join("selection.csv"), &SelectionRow::HEADER, &r.selection)?;
    write_rows(&dir.join("adoption.csv"), &AdoptionRow::HEADER, &r.adoption)?;
    write_rows(&dir.join("adoption_stats.csv"), &AdoptionStatsRow::HEADER, &r.adoption_stats)?;
    write_rows(&dir.join("unused.csv"), &UnusedRow::HEADER, &r.unused)?;
    write_rows(&dir.join("deprecated_usage.csv"), &DeprecatedUsageRow::HEADER, &r.deprecated_usage)?;
    write_rows(&dir.join("deprecated_plds.csv"), &DeprecatedPldRow::HEADER, &r.deprecated_plds)?;
    write_rows(&dir.join("top_plds.csv"), &TopPldRow::HEADER, &r.top_plds)?;
    write_rows(&dir.join("snapshot_top_pld.csv"), &SnapshotTopPldRow::HEADER, &r.snapshot_top_pld)?;
    write_rows(&dir.join("timeseries.csv"), &TimeseriesRow::HEADER, &r.timeseries)?;
    write_rows(&dir.join("term_timeseries.csv"), &TermTimeseriesRow::HEADER, &r.term_timeseries)?;
    write_text(&dir.join("report.json"), &serde_json::to_string_pretty(&r)?)?;
    Ok(r)
}
