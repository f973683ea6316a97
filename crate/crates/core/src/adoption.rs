//! Adoption lags, unused-term shares and continued use of deprecated terms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diff::{ChangeKind, ChangeLog};
use crate::error::{Error, Result};
use crate::pld::Pld;
use crate::usage::SnapshotUsage;
use crate::vocab::VocabVersion;

/// `100 * part / whole` rounded half-up to an integer, computed exactly.
pub fn percent_half_up(part: u64, whole: u64) -> u32 {
    assert!(whole > 0, "percentage of an empty whole");
    let (p, w) = (u128::from(part), u128::from(whole));
    ((200 * p + w) / (2 * w)) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionRecord {
    pub term_iri: String,
    pub publish_date: NaiveDate,
    pub first_use_snapshot: Option<NaiveDate>,
    /// `first_use_snapshot - publish_date` in days; negative for uses
    /// observed before publication.
    pub lag_days: Option<i64>,
    pub instance_count: u64,
    pub adopting_plds: BTreeSet<Pld>,
}

/// One record per term introduced by an `Added` event, ordered by
/// publication date then IRI. A term added again after removal keeps its
/// first publication date.
pub fn compute_adoption(change_log: &ChangeLog, timeline: &[SnapshotUsage]) -> Vec<AdoptionRecord> {
    let mut published: BTreeMap<&str, NaiveDate> = BTreeMap::new();
    for ev in change_log.events_of(ChangeKind::Added) {
        published
            .entry(&ev.term_iri)
            .and_modify(|d| *d = (*d).min(ev.to_version))
            .or_insert(ev.to_version);
    }

    let mut snapshots: Vec<&SnapshotUsage> = timeline.iter().collect();
    snapshots.sort_by_key(|s| s.snapshot_date);

    let mut records: Vec<AdoptionRecord> = published
        .into_iter()
        .map(|(term, publish_date)| AdoptionRecord {
            term_iri: term.to_owned(),
            publish_date,
            first_use_snapshot: None,
            lag_days: None,
            instance_count: 0,
            adopting_plds: BTreeSet::new(),
        })
        .collect();
    let index: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.term_iri.clone(), i))
        .collect();

    for snap in snapshots {
        for (key, n) in &snap.counts {
            let Some(&i) = index.get(&key.term_iri) else { continue };
            let rec = &mut records[i];
            rec.instance_count += n;
            if rec.first_use_snapshot.is_none() {
                rec.first_use_snapshot = Some(snap.snapshot_date);
                rec.lag_days = Some((snap.snapshot_date - rec.publish_date).num_days());
            }
            if let Some(pld) = &key.pld {
                rec.adopting_plds.insert(pld.clone());
            }
        }
    }
    records.sort_by(|a, b| (a.publish_date, &a.term_iri).cmp(&(b.publish_date, &b.term_iri)));
    records
}

/// Per-vocabulary adoption summary over newly created terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionStats<F> {
    pub vocab_id: String,
    pub new_terms: usize,
    pub adopted_terms: usize,
    /// Zero when there are no new terms.
    pub pct_used: u32,
    pub total_instances: u64,
    pub mu_days: Option<F>,
    /// Population standard deviation; absent below two adopted terms.
    pub sigma_days: Option<F>,
}

pub fn vocab_stats<F: Float>(vocab_id: &str, records: &[AdoptionRecord]) -> AdoptionStats<F> {
    let lags: Vec<i64> = records.iter().filter_map(|r| r.lag_days).collect();
    let n = lags.len();
    let pct_used = if records.is_empty() {
        0
    } else {
        percent_half_up(n as u64, records.len() as u64)
    };
    let cast = |x: i128| F::from(x).expect("finite");
    let (mu, sigma) = if n == 0 {
        (None, None)
    } else {
        let sum: i128 = lags.iter().map(|&x| i128::from(x)).sum();
        let sum_sq: i128 = lags.iter().map(|&x| i128::from(x) * i128::from(x)).sum();
        let n128 = n as i128;
        let mu = cast(sum) / cast(n128);
        // n^2 * variance, exact in integers
        let scaled_var = n128 * sum_sq - sum * sum;
        let sigma = (n >= 2).then(|| cast(scaled_var).sqrt() / cast(n128));
        (Some(mu), sigma)
    };
    AdoptionStats {
        vocab_id: vocab_id.to_owned(),
        new_terms: records.len(),
        adopted_terms: n,
        pct_used,
        total_instances: records.iter().map(|r| r.instance_count).sum(),
        mu_days: mu,
        sigma_days: sigma,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnusedTermsReport {
    pub vocab_id: String,
    pub total_terms: usize,
    pub unused: usize,
    pub pct_unused: u32,
}

/// `universe` should be the union of all versions' in-namespace terms.
pub fn unused_terms(universe: &VocabVersion, timeline: &[SnapshotUsage]) -> Result<UnusedTermsReport> {
    let terms: Vec<&str> = universe.namespace_terms().map(|t| t.iri.as_str()).collect();
    if terms.is_empty() {
        return Err(Error::EmptyUniverse(universe.vocab_id.clone()));
    }
    let unused = terms
        .iter()
        .filter(|t| timeline.iter().all(|s| s.term_total(t) == 0))
        .count();
    Ok(UnusedTermsReport {
        vocab_id: universe.vocab_id.clone(),
        total_terms: terms.len(),
        unused,
        pct_unused: percent_half_up(unused as u64, terms.len() as u64),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecatedUsageReport {
    pub term_iri: String,
    pub deprecation_date: NaiveDate,
    /// Snapshots dated on or after the deprecation with at least one use.
    pub post_deprecation_counts: BTreeMap<NaiveDate, u64>,
    /// By total post-deprecation count, descending, then name.
    pub offending_plds: Vec<(Pld, u64)>,
}

impl DeprecatedUsageReport {
    pub fn total(&self) -> u64 {
        self.post_deprecation_counts.values().sum()
    }
}

/// One report per `Deprecated` event, in change-log order.
pub fn deprecated_usage(change_log: &ChangeLog, timeline: &[SnapshotUsage]) -> Vec<DeprecatedUsageReport> {
    change_log
        .events_of(ChangeKind::Deprecated)
        .map(|ev| {
            let mut series = BTreeMap::new();
            let mut plds: BTreeMap<&Pld, u64> = BTreeMap::new();
            for snap in timeline.iter().filter(|s| s.snapshot_date >= ev.to_version) {
                let n = snap.term_total(&ev.term_iri);
                if n == 0 {
                    continue;
                }
                *series.entry(snap.snapshot_date).or_default() += n;
                for (k, c) in snap.counts.iter().filter(|(k, _)| k.term_iri == ev.term_iri) {
                    if let Some(p) = &k.pld {
                        *plds.entry(p).or_default() += c;
                    }
                }
            }
            DeprecatedUsageReport {
                term_iri: ev.term_iri.clone(),
                deprecation_date: ev.to_version,
                post_deprecation_counts: series,
                offending_plds: rank(plds),
            }
        })
        .collect()
}

fn rank(totals: BTreeMap<&Pld, u64>) -> Vec<(Pld, u64)> {
    let mut out: Vec<(Pld, u64)> = totals.into_iter().map(|(p, n)| (p.clone(), n)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// A PLD that kept using deprecated terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecatedPld {
    pub pld: Pld,
    pub deprecated_terms: usize,
    pub triples: u64,
}

/// PLDs ranked by the number of distinct deprecated terms they used after
/// deprecation, then by triples, then by name.
pub fn deprecated_term_plds(reports: &[DeprecatedUsageReport]) -> Vec<DeprecatedPld> {
    let mut by_pld: BTreeMap<&Pld, (BTreeSet<&str>, u64)> = BTreeMap::new();
    for r in reports {
        for (p, n) in &r.offending_plds {
            let e = by_pld.entry(p).or_default();
            e.0.insert(&r.term_iri);
            e.1 += n;
        }
    }
    let mut out: Vec<DeprecatedPld> = by_pld
        .into_iter()
        .map(|(p, (terms, triples))| DeprecatedPld {
            pld: p.clone(),
            deprecated_terms: terms.len(),
            triples,
        })
        .collect();
    out.sort_by(|a, b| {
        b.deprecated_terms
            .cmp(&a.deprecated_terms)
            .then(b.triples.cmp(&a.triples))
            .then_with(|| a.pld.cmp(&b.pld))
    });
    out
}

#[derive(Debug, Clone, Copy)]
pub enum SeriesSelector<'a> {
    Term(&'a str),
    /// All in-namespace terms of the given version (usually the union).
    Vocab(&'a VocabVersion),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// One point per snapshot, zeros included, by date.
    pub points: Vec<(NaiveDate, u64)>,
    /// Version publication dates inside the series range.
    pub markers: Vec<NaiveDate>,
}

/// Per-snapshot totals for a term or vocabulary from `since` on.
pub fn usage_timeseries(
    timeline: &[SnapshotUsage],
    selector: SeriesSelector<'_>,
    versions: &[NaiveDate],
    since: Option<NaiveDate>,
) -> TimeSeries {
    let keep = |d: &NaiveDate| since.is_none_or(|s| *d >= s);
    let mut points: Vec<(NaiveDate, u64)> = timeline
        .iter()
        .filter(|s| keep(&s.snapshot_date))
        .map(|s| {
            let n = match selector {
                SeriesSelector::Term(t) => s.term_total(t),
                SeriesSelector::Vocab(v) => v.namespace_terms().map(|t| s.term_total(&t.iri)).sum(),
            };
            (s.snapshot_date, n)
        })
        .collect();
    points.sort();
    let mut markers: Vec<NaiveDate> = versions.iter().copied().filter(keep).collect();
    markers.sort();
    markers.dedup();
    TimeSeries { points, markers }
}
