//! Per-snapshot term usage counts keyed by (term, PLD).
//!
//! A quad uses a property when the property is its predicate, and uses a
//! class when it is `rdf:type <class>`. `rdf:type` itself is never tracked,
//! so one quad matches at most one term.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dates::parse_date;
use crate::error::{Error, Result};
use crate::ns::rdf;
use crate::pld::{Pld, SuffixRules};
use crate::quad::{Quad, Term};
use crate::vocab::{TermKind, VocabVersion};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// PLD of the graph label when present, else of the subject.
    #[default]
    ContextFirst,
    SubjectOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UseRule {
    /// Property in predicate position, class as `rdf:type` object.
    #[default]
    Modeling,
    /// Any occurrence of the term IRI in any position. For sensitivity
    /// analysis only; a quad may count for several terms.
    Mentions,
}

/// The universe of terms being counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackedTerms {
    kinds: HashMap<String, TermKind>,
}

impl TrackedTerms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, iri: impl Into<String>, kind: TermKind) {
        let iri = iri.into();
        if iri != rdf::TYPE {
            self.kinds.insert(iri, kind);
        }
    }

    /// In-namespace terms of every given version.
    pub fn from_versions<'a>(versions: impl IntoIterator<Item = &'a VocabVersion>) -> Self {
        let mut out = Self::new();
        for v in versions {
            for t in v.namespace_terms() {
                out.insert(t.iri.clone(), t.kind);
            }
        }
        out
    }

    pub fn kind(&self, iri: &str) -> Option<TermKind> {
        self.kinds.get(iri).copied()
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// The tracked term a quad uses under the modeling rule, if any.
    pub fn used_by<'q>(&self, quad: &'q Quad) -> Option<&'q str> {
        match self.kinds.get(quad.predicate.as_str()) {
            Some(TermKind::Property) => return Some(&quad.predicate),
            Some(TermKind::Class) | None => {}
        }
        if quad.predicate == rdf::TYPE {
            if let Term::Iri(o) = &quad.object {
                if self.kind(o) == Some(TermKind::Class) {
                    return Some(o);
                }
            }
        }
        None
    }

    fn mentioned_by<'q>(&self, quad: &'q Quad) -> Vec<&'q str> {
        let mut out = Vec::new();
        for iri in [quad.subject.as_iri(), Some(quad.predicate.as_str()), quad.object.as_iri()]
            .into_iter()
            .flatten()
        {
            if self.kinds.contains_key(iri) && !out.contains(&iri) {
                out.push(iri);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UsageKey {
    pub term_iri: String,
    pub pld: Option<Pld>,
}

/// Usage counts of one snapshot. Present keys always have count >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotUsage {
    pub snapshot_date: NaiveDate,
    pub counts: BTreeMap<UsageKey, u64>,
    pub per_term_totals: BTreeMap<String, u64>,
    pub per_pld_totals: BTreeMap<Option<Pld>, u64>,
}

impl SnapshotUsage {
    pub fn empty(snapshot_date: NaiveDate) -> Self {
        SnapshotUsage {
            snapshot_date,
            counts: BTreeMap::new(),
            per_term_totals: BTreeMap::new(),
            per_pld_totals: BTreeMap::new(),
        }
    }

    pub fn from_counts(snapshot_date: NaiveDate, counts: BTreeMap<UsageKey, u64>) -> Self {
        let mut out = SnapshotUsage::empty(snapshot_date);
        for (k, n) in counts.into_iter().filter(|(_, n)| *n > 0) {
            *out.per_term_totals.entry(k.term_iri.clone()).or_default() += n;
            *out.per_pld_totals.entry(k.pld.clone()).or_default() += n;
            out.counts.insert(k, n);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn term_total(&self, iri: &str) -> u64 {
        self.per_term_totals.get(iri).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.per_term_totals.values().sum()
    }

    /// Pointwise sum of two shards of the same snapshot.
    pub fn merge(&self, other: &SnapshotUsage) -> Result<SnapshotUsage> {
        if self.snapshot_date != other.snapshot_date {
            return Err(Error::UsageDateMismatch {
                left: self.snapshot_date,
                right: other.snapshot_date,
            });
        }
        let mut counts = self.counts.clone();
        for (k, n) in &other.counts {
            *counts.entry(k.clone()).or_default() += n;
        }
        Ok(SnapshotUsage::from_counts(self.snapshot_date, counts))
    }

    pub const CSV_HEADER: [&'static str; 4] = ["date", "term", "pld", "count"];

    /// Writes sorted `date,term,pld,count` rows; a missing PLD is an empty field.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if header {
            w.write_record(Self::CSV_HEADER)?;
        }
        let date = self.snapshot_date.to_string();
        for (k, n) in &self.counts {
            w.write_record([
                date.as_str(),
                &k.term_iri,
                k.pld.as_ref().map_or("", |p| p.as_str()),
                &n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`SnapshotUsage::write_csv`] (with header) into
    /// one usage per date, each date in `extra_dates` included even if empty.
    pub fn read_csv<R: Read>(input: R, extra_dates: &[NaiveDate]) -> Result<Vec<SnapshotUsage>> {
        let mut by_date: BTreeMap<NaiveDate, BTreeMap<UsageKey, u64>> =
            extra_dates.iter().map(|d| (*d, BTreeMap::new())).collect();
        let mut rdr = csv::Reader::from_reader(input);
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || Error::Config(format!("bad usage row {:?}", rec));
            let date = rec.get(0).and_then(parse_date).ok_or_else(bad)?;
            let term = rec.get(1).ok_or_else(bad)?.to_owned();
            let pld = rec.get(2).filter(|s| !s.is_empty()).map(Pld::from_resolved);
            let n: u64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            *by_date
                .entry(date)
                .or_default()
                .entry(UsageKey { term_iri: term, pld })
                .or_default() += n;
        }
        Ok(by_date
            .into_iter()
            .map(|(d, c)| SnapshotUsage::from_counts(d, c))
            .collect())
    }

    /// Reads a per-snapshot file named `<date>.csv`.
    pub fn load(path: &Path) -> Result<SnapshotUsage> {
        let date = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(parse_date)
            .ok_or_else(|| Error::Config(format!("{}: file name is not a date", path.display())))?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut all = Self::read_csv(file, &[date])?;
        match all.len() {
            1 => Ok(all.remove(0)),
            _ => Err(Error::Config(format!("{}: rows for other dates", path.display()))),
        }
    }
}

/// Counters for attribution anomalies seen while indexing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionStats {
    pub matched_quads: u64,
    pub without_pld: u64,
    pub fallback_pld: u64,
    pub non_ascii_host: u64,
}

/// Incremental indexer; feed quads with [`observe`](Self::observe).
pub struct UsageAccumulator<'a> {
    date: NaiveDate,
    tracked: &'a TrackedTerms,
    rules: &'a SuffixRules,
    attribution: Attribution,
    rule: UseRule,
    counts: HashMap<UsageKey, u64>,
    stats: AttributionStats,
}

impl<'a> UsageAccumulator<'a> {
    pub fn new(
        date: NaiveDate,
        tracked: &'a TrackedTerms,
        rules: &'a SuffixRules,
        attribution: Attribution,
    ) -> Self {
        UsageAccumulator {
            date,
            tracked,
            rules,
            attribution,
            rule: UseRule::Modeling,
            counts: HashMap::new(),
            stats: AttributionStats::default(),
        }
    }

    pub fn with_rule(mut self, rule: UseRule) -> Self {
        self.rule = rule;
        self
    }

    fn publisher(&mut self, quad: &Quad) -> Option<Pld> {
        let source = match (self.attribution, &quad.context) {
            (Attribution::ContextFirst, Some(ctx)) => ctx,
            _ => &quad.subject,
        };
        let lookup = match source {
            Term::Iri(iri) => self.rules.resolve(iri),
            _ => return None,
        };
        self.stats.fallback_pld += u64::from(lookup.fallback);
        self.stats.non_ascii_host += u64::from(lookup.non_ascii);
        lookup.pld
    }

    fn bump(&mut self, term: &str, pld: Option<Pld>) {
        self.stats.matched_quads += 1;
        self.stats.without_pld += u64::from(pld.is_none());
        *self
            .counts
            .entry(UsageKey {
                term_iri: term.to_owned(),
                pld,
            })
            .or_default() += 1;
    }

    pub fn observe(&mut self, quad: &Quad) {
        match self.rule {
            UseRule::Modeling => {
                if let Some(term) = self.tracked.used_by(quad) {
                    let pld = self.publisher(quad);
                    self.bump(term, pld);
                }
            }
            UseRule::Mentions => {
                let terms = self.tracked.mentioned_by(quad);
                if !terms.is_empty() {
                    let pld = self.publisher(quad);
                    for t in terms {
                        self.bump(t, pld.clone());
                    }
                }
            }
        }
    }

    pub fn attribution_stats(&self) -> AttributionStats {
        self.stats
    }

    pub fn finish(self) -> SnapshotUsage {
        SnapshotUsage::from_counts(self.date, self.counts.into_iter().collect())
    }
}

/// Counts tracked-term uses in one snapshot's quads.
pub fn index_snapshot<I>(
    snapshot_date: NaiveDate,
    quads: I,
    tracked: &TrackedTerms,
    rules: &SuffixRules,
    attribution: Attribution,
) -> SnapshotUsage
where
    I: IntoIterator<Item = Quad>,
{
    let mut acc = UsageAccumulator::new(snapshot_date, tracked, rules, attribution);
    for q in quads {
        acc.observe(&q);
    }
    acc.finish()
}

/// Splits the quads round-robin over `shards` accumulators, each on its own
/// thread, and merges the results. Equal to [`index_snapshot`] on the same
/// input.
pub fn index_snapshot_sharded<I>(
    snapshot_date: NaiveDate,
    quads: I,
    tracked: &TrackedTerms,
    rules: &SuffixRules,
    attribution: Attribution,
    shards: usize,
) -> SnapshotUsage
where
    I: IntoIterator<Item = Quad>,
{
    use std::sync::mpsc;

    const BATCH: usize = 1024;
    let shards = shards.max(1);
    // Consumers block on their channel, so they get plain threads rather
    // than rayon workers.
    let results: Vec<SnapshotUsage> = std::thread::scope(|s| {
        let (senders, handles): (Vec<_>, Vec<_>) = (0..shards)
            .map(|_| {
                let (tx, rx) = mpsc::sync_channel::<Vec<Quad>>(4);
                let h = s.spawn(move || {
                    let mut acc = UsageAccumulator::new(snapshot_date, tracked, rules, attribution);
                    for batch in rx {
                        for q in &batch {
                            acc.observe(q);
                        }
                    }
                    acc.finish()
                });
                (tx, h)
            })
            .unzip();
        let mut batches: Vec<Vec<Quad>> = (0..shards).map(|_| Vec::with_capacity(BATCH)).collect();
        for (i, q) in quads.into_iter().enumerate() {
            let k = i % shards;
            batches[k].push(q);
            if batches[k].len() == BATCH {
                let full = std::mem::replace(&mut batches[k], Vec::with_capacity(BATCH));
                senders[k].send(full).expect("shard thread alive");
            }
        }
        for (tx, b) in senders.into_iter().zip(batches) {
            tx.send(b).expect("shard thread alive");
        }
        handles.into_iter().map(|h| h.join().expect("shard thread panicked")).collect()
    });
    results
        .iter()
        .try_fold(SnapshotUsage::empty(snapshot_date), |acc, u| acc.merge(u))
        .expect("shards share one date")
}

/// PLDs ranked by triples using the vocabulary's terms over the timeline;
/// ties broken alphabetically. Unattributed uses are left out.
pub fn top_plds(timeline: &[SnapshotUsage], vocab: &VocabVersion) -> Vec<(Pld, u64)> {
    let mut totals: BTreeMap<&Pld, u64> = BTreeMap::new();
    for snap in timeline {
        for (k, n) in &snap.counts {
            let Some(pld) = &k.pld else { continue };
            if vocab.terms.get(&k.term_iri).is_some_and(|t| t.defined_in_namespace) {
                *totals.entry(pld).or_default() += n;
            }
        }
    }
    let mut ranked: Vec<(Pld, u64)> = totals.into_iter().map(|(p, n)| (p.clone(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}
