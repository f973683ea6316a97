//! Term-level change sets between successive vocabulary versions.
//!
//! Removal and deprecation are kept apart: a deprecated term still exists,
//! a removed one does not. A term that comes back non-deprecated after a
//! removal or deprecation gets an extra `Recreated` event, which is not
//! counted in `total_changes`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::DateWindow;
use crate::vocab::{TermRecord, VocabVersion};

/// Declaration order is the tie-break order within one version date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Added,
    Removed,
    Deprecated,
    Undeprecated,
    Recreated,
}

impl ChangeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Added => "added",
            ChangeKind::Removed => "removed",
            ChangeKind::Deprecated => "deprecated",
            ChangeKind::Undeprecated => "undeprecated",
            ChangeKind::Recreated => "recreated",
        }
    }

    /// Whether the event counts towards `ChangeLog::total_changes`.
    pub fn is_counted(self) -> bool {
        matches!(self, ChangeKind::Added | ChangeKind::Removed | ChangeKind::Deprecated)
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Field order gives the event order: version, kind, then IRI.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChangeEvent {
    #[serde(rename = "to")]
    pub to_version: NaiveDate,
    pub kind: ChangeKind,
    #[serde(rename = "term")]
    pub term_iri: String,
    #[serde(rename = "from")]
    pub from_version: NaiveDate,
}

impl ChangeEvent {
    pub fn new(term_iri: impl Into<String>, kind: ChangeKind, from: NaiveDate, to: NaiveDate) -> Self {
        ChangeEvent {
            to_version: to,
            kind,
            term_iri: term_iri.into(),
            from_version: from,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeLog {
    pub vocab_id: String,
    pub versions: Vec<NaiveDate>,
    pub events: Vec<ChangeEvent>,
    pub total_changes: usize,
}

impl ChangeLog {
    pub fn count(&self, kind: ChangeKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn events_of(&self, kind: ChangeKind) -> impl Iterator<Item = &ChangeEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub const CSV_HEADER: [&'static str; 5] = ["vocab_id", "term", "kind", "from", "to"];

    /// Writes `vocab_id,term,kind,from,to` rows in event order.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if header {
            w.write_record(Self::CSV_HEADER)?;
        }
        for e in &self.events {
            w.write_record([
                self.vocab_id.as_str(),
                &e.term_iri,
                e.kind.as_str(),
                &e.from_version.to_string(),
                &e.to_version.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionFailure {
    FewerThanTwoVersions,
    VersionsOutsideCorpusWindow,
    NoDirectUse,
}

impl SelectionFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionFailure::FewerThanTwoVersions => "fewer-than-two-versions",
            SelectionFailure::VersionsOutsideCorpusWindow => "versions-outside-corpus-window",
            SelectionFailure::NoDirectUse => "no-direct-use",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionVerdict {
    pub vocab_id: String,
    pub eligible: bool,
    pub reasons: Vec<SelectionFailure>,
}

impl SelectionVerdict {
    pub fn reasons_joined(&self) -> String {
        self.reasons.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{vocab_id}: versions dated {earlier} and {later} are not strictly increasing")]
    NotIncreasing {
        vocab_id: String,
        earlier: NaiveDate,
        later: NaiveDate,
    },
    #[error("cannot diff versions of different vocabularies ({0} vs {1})")]
    VocabMismatch(String, String),
    #[error("{} is not eligible: {}", .0.vocab_id, .0.reasons_joined())]
    Ineligible(SelectionVerdict),
}

fn namespace_terms(v: &VocabVersion) -> BTreeMap<&str, &TermRecord> {
    v.namespace_terms().map(|t| (t.iri.as_str(), t)).collect()
}

/// Changes from `v1` to `v2`, over in-namespace terms only.
///
/// A term that first appears already deprecated yields both `Added` and
/// `Deprecated`; absence counts as "not deprecated".
pub fn diff_versions(v1: &VocabVersion, v2: &VocabVersion) -> Result<BTreeSet<ChangeEvent>, DiffError> {
    if v1.vocab_id != v2.vocab_id {
        return Err(DiffError::VocabMismatch(v1.vocab_id.clone(), v2.vocab_id.clone()));
    }
    if v1.version_date >= v2.version_date {
        return Err(DiffError::NotIncreasing {
            vocab_id: v1.vocab_id.clone(),
            earlier: v1.version_date,
            later: v2.version_date,
        });
    }
    let (from, to) = (v1.version_date, v2.version_date);
    let old = namespace_terms(v1);
    let new = namespace_terms(v2);
    let mut out = BTreeSet::new();
    for (iri, rec) in &new {
        let before = old.get(iri);
        if before.is_none() {
            out.insert(ChangeEvent::new(*iri, ChangeKind::Added, from, to));
        }
        let was_deprecated = before.is_some_and(|b| b.deprecated);
        if rec.deprecated && !was_deprecated {
            out.insert(ChangeEvent::new(*iri, ChangeKind::Deprecated, from, to));
        }
        if !rec.deprecated && was_deprecated {
            out.insert(ChangeEvent::new(*iri, ChangeKind::Undeprecated, from, to));
        }
    }
    for iri in old.keys() {
        if !new.contains_key(iri) {
            out.insert(ChangeEvent::new(*iri, ChangeKind::Removed, from, to));
        }
    }
    Ok(out)
}

/// Folds pairwise diffs over an ordered version list and detects recreations.
pub fn build_change_log(versions: &[VocabVersion]) -> Result<ChangeLog, DiffError> {
    let Some(first) = versions.first() else {
        return Err(DiffError::Ineligible(SelectionVerdict {
            vocab_id: String::new(),
            eligible: false,
            reasons: vec![SelectionFailure::FewerThanTwoVersions],
        }));
    };
    if versions.len() < 2 {
        return Err(DiffError::Ineligible(SelectionVerdict {
            vocab_id: first.vocab_id.clone(),
            eligible: false,
            reasons: vec![SelectionFailure::FewerThanTwoVersions],
        }));
    }

    let mut events: BTreeSet<ChangeEvent> = BTreeSet::new();
    // term -> date of the deprecation/removal still awaiting a comeback
    let mut pending: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for pair in versions.windows(2) {
        let (v1, v2) = (&pair[0], &pair[1]);
        let changes = diff_versions(v1, v2)?;
        for e in &changes {
            if matches!(e.kind, ChangeKind::Deprecated | ChangeKind::Removed) {
                pending.entry(e.term_iri.clone()).or_insert(v2.version_date);
            }
        }
        for rec in v2.namespace_terms().filter(|t| !t.deprecated) {
            if let Some(since) = pending.remove(&rec.iri) {
                events.insert(ChangeEvent::new(&rec.iri, ChangeKind::Recreated, since, v2.version_date));
            }
        }
        events.extend(changes);
    }

    let total_changes = events.iter().filter(|e| e.kind.is_counted()).count();
    Ok(ChangeLog {
        vocab_id: first.vocab_id.clone(),
        versions: versions.iter().map(|v| v.version_date).collect(),
        events: events.into_iter().collect(),
        total_changes,
    })
}

/// Applies the vocabulary selection criteria: at least two versions, at
/// least one version dated inside the corpus window, and at least one
/// triple in the corpus using a term directly.
pub fn check_selection(
    vocab_id: &str,
    version_dates: &[NaiveDate],
    corpus_window: &DateWindow,
    has_direct_use: bool,
) -> SelectionVerdict {
    let mut reasons = Vec::new();
    if version_dates.len() < 2 {
        reasons.push(SelectionFailure::FewerThanTwoVersions);
    }
    if !version_dates.iter().any(|d| corpus_window.contains(*d)) {
        reasons.push(SelectionFailure::VersionsOutsideCorpusWindow);
    }
    if !has_direct_use {
        reasons.push(SelectionFailure::NoDirectUse);
    }
    SelectionVerdict {
        vocab_id: vocab_id.to_owned(),
        eligible: reasons.is_empty(),
        reasons,
    }
}
