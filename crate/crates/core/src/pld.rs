//! Pay-level-domain resolution against a public suffix list.
//!
//! The PLD of a host is its public suffix plus one more label. Hosts whose
//! suffix matches no rule fall back to their last two labels (the implicit
//! `*` rule) and are flagged as such.

use std::collections::HashSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Public suffix list snapshot pinned with this crate.
pub const BUNDLED_PSL: &str = include_str!("../data/public_suffix_list.dat");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pld(String);

impl Pld {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps an already-resolved registrable domain, e.g. one read back from a report.
    pub fn from_resolved(value: impl Into<String>) -> Self {
        Pld(value.into())
    }
}

impl fmt::Display for Pld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRules {
    exact: HashSet<String>,
    /// `*.foo.bar` is stored as `foo.bar`.
    wildcard: HashSet<String>,
    /// `!www.ck` is stored as `www.ck`.
    exception: HashSet<String>,
    pub source_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PldLookup {
    pub pld: Option<Pld>,
    /// No listed rule matched; the last two labels were used.
    pub fallback: bool,
    /// The host contained non-ASCII characters.
    pub non_ascii: bool,
}

impl PldLookup {
    fn none() -> Self {
        PldLookup {
            pld: None,
            fallback: false,
            non_ascii: false,
        }
    }
}

impl SuffixRules {
    /// Parses the standard list format: `//` comments, one rule per line,
    /// `*.` wildcards and `!` exceptions. Only the first whitespace-separated
    /// token of a line counts.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = SuffixRules {
            exact: HashSet::new(),
            wildcard: HashSet::new(),
            exception: HashSet::new(),
            source_version: "unknown".to_owned(),
        };
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix("//") {
                if let Some(v) = comment.trim().strip_prefix("VERSION:") {
                    rules.source_version = v.trim().to_owned();
                }
                continue;
            }
            let Some(rule) = line.split_whitespace().next() else {
                continue;
            };
            if let Some(rest) = rule.strip_prefix('!') {
                rules.exception.insert(to_ascii(rest));
            } else if let Some(rest) = rule.strip_prefix("*.") {
                rules.wildcard.insert(to_ascii(rest));
            } else {
                rules.exact.insert(to_ascii(rule));
            }
        }
        if rules.rule_count() == 0 {
            return Err(Error::Psl("no rules in list".into()));
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_PSL).expect("bundled list parses")
    }

    pub fn rule_count(&self) -> usize {
        self.exact.len() + self.wildcard.len() + self.exception.len()
    }

    pub fn is_exact_rule(&self, rule: &str) -> bool {
        self.exact.contains(rule)
    }

    pub fn is_wildcard_rule(&self, parent: &str) -> bool {
        self.wildcard.contains(parent)
    }

    pub fn is_exception_rule(&self, rule: &str) -> bool {
        self.exception.contains(rule)
    }

    /// Public suffix of a normalized host, as a byte offset into it, and
    /// whether the implicit `*` rule had to be used.
    fn suffix_start(&self, host: &str) -> (usize, bool) {
        // label start offsets, leftmost first
        let mut starts = vec![0];
        starts.extend(host.match_indices('.').map(|(i, _)| i + 1));

        for (i, &s) in starts.iter().enumerate() {
            if self.exception.contains(&host[s..]) {
                // an exception rule's suffix drops its leftmost label
                return (starts.get(i + 1).copied().unwrap_or(host.len()), false);
            }
        }
        for (i, &s) in starts.iter().enumerate() {
            let candidate = &host[s..];
            if self.exact.contains(candidate) {
                return (s, false);
            }
            if let Some(&parent) = starts.get(i + 1) {
                if self.wildcard.contains(&host[parent..]) {
                    return (s, false);
                }
            }
        }
        (*starts.last().expect("non-empty"), true)
    }

    /// Registrable domain of a bare host name, or `None` if the host is
    /// itself a public suffix or is not a DNS name. Internationalized names
    /// are matched and returned in their ASCII (punycode) form.
    pub fn registrable_domain(&self, host: &str) -> PldLookup {
        let non_ascii = !host.is_ascii();
        let Some(host) = normalize_host(host) else {
            return PldLookup::none();
        };
        let (suffix, fallback) = self.suffix_start(&host);
        if suffix == 0 {
            return PldLookup {
                pld: None,
                fallback,
                non_ascii,
            };
        }
        // suffix - 1 is the dot before the suffix
        let start = host[..suffix - 1].rfind('.').map_or(0, |i| i + 1);
        PldLookup {
            pld: Some(Pld(host[start..].to_owned())),
            fallback,
            non_ascii,
        }
    }

    /// Full lookup of an IRI (or blank node / literal text, which yield none).
    pub fn resolve(&self, iri: &str) -> PldLookup {
        match host_of(iri) {
            Some(h) => self.registrable_domain(h),
            None => PldLookup::none(),
        }
    }

    pub fn extract_pld(&self, iri: &str) -> Option<Pld> {
        self.resolve(iri).pld
    }
}

/// Host part of an IRI authority, without userinfo or port. `None` for IRIs
/// without an authority (urn:, mailto:) and for blank node labels.
pub fn host_of(iri: &str) -> Option<&str> {
    let (scheme, rest) = iri.split_once(':')?;
    if scheme.is_empty() || !scheme.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'+' | b'-' | b'.')) {
        return None;
    }
    let rest = rest.strip_prefix("//")?;
    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let authority = &rest[..authority_end];
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    if host_port.starts_with('[') {
        // IPv6 literal
        return None;
    }
    let host = host_port.split_once(':').map_or(host_port, |(h, _)| h);
    (!host.is_empty()).then_some(host)
}

fn normalize_host(host: &str) -> Option<String> {
    let host = host.strip_suffix('.').unwrap_or(host);
    if host.is_empty() || host.starts_with('.') || host.split('.').any(str::is_empty) {
        return None;
    }
    if host.parse::<Ipv4Addr>().is_ok() {
        return None;
    }
    Some(to_ascii(host))
}

/// Lowercased IDNA ASCII form. Names that fail as a whole (typically on
/// cross-label bidi checks) are converted label by label, and labels IDNA
/// rejects outright are kept lowercased.
fn to_ascii(name: &str) -> String {
    if name.is_ascii() {
        return name.to_ascii_lowercase();
    }
    idna::domain_to_ascii(name).unwrap_or_else(|_| {
        name.split('.')
            .map(|l| idna::domain_to_ascii(l).unwrap_or_else(|_| l.to_lowercase()))
            .collect::<Vec<_>>()
            .join(".")
    })
}
