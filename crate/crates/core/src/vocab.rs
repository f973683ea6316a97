//! Term extraction from vocabulary documents.
//!
//! A vocabulary version is the dated set of classes and properties that a
//! document declares through `rdf:type`. Terms outside the vocabulary's
//! namespace are kept but flagged, since diffing and reporting only look at
//! the terms a vocabulary defines itself.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dates::parse_date;
use crate::error::{Error, Result};
use crate::ns::{owl, rdf, rdfs, vs};
use crate::quad::{parse_quad_line, Literal, Term};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Class,
    Property,
}

impl TermKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TermKind::Class => "class",
            TermKind::Property => "property",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermRecord {
    pub iri: String,
    pub kind: TermKind,
    pub deprecated: bool,
    pub defined_in_namespace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "kebab-case")]
pub enum ExtractWarning {
    /// No term of the document falls inside the namespace.
    NoNamespaceTerms,
    /// Typed both class-like and property-like; recorded as a property.
    KindConflict { iri: String },
    /// Contradicting deprecation markers; recorded as deprecated.
    DeprecationConflict { iri: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabVersion {
    pub vocab_id: String,
    pub namespace: String,
    pub version_date: NaiveDate,
    /// Keyed by IRI, so each term appears once.
    pub terms: BTreeMap<String, TermRecord>,
    pub warnings: Vec<ExtractWarning>,
}

impl VocabVersion {
    pub fn new(vocab_id: impl Into<String>, namespace: impl Into<String>, version_date: NaiveDate) -> Self {
        VocabVersion {
            vocab_id: vocab_id.into(),
            namespace: namespace.into(),
            version_date,
            terms: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Adds a term, deriving the namespace flag. Used by fixtures and generators.
    pub fn with_term(mut self, iri: impl Into<String>, kind: TermKind, deprecated: bool) -> Self {
        self.insert(iri.into(), kind, deprecated);
        self
    }

    pub fn insert(&mut self, iri: String, kind: TermKind, deprecated: bool) {
        let defined_in_namespace = iri.starts_with(&self.namespace);
        self.terms.insert(
            iri.clone(),
            TermRecord {
                iri,
                kind,
                deprecated,
                defined_in_namespace,
            },
        );
    }

    pub fn namespace_terms(&self) -> impl Iterator<Item = &TermRecord> {
        self.terms.values().filter(|t| t.defined_in_namespace)
    }

    pub fn namespace_term_count(&self) -> usize {
        self.namespace_terms().count()
    }

    /// True when the version carries any extraction warning.
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Merges the in-namespace terms of every version into one set. Kind and
/// deprecation come from the latest version containing the term.
pub fn union_of(versions: &[VocabVersion]) -> Option<VocabVersion> {
    let mut sorted: Vec<&VocabVersion> = versions.iter().collect();
    sorted.sort_by_key(|v| v.version_date);
    let last = *sorted.last()?;
    let mut out = VocabVersion::new(&last.vocab_id, &last.namespace, last.version_date);
    for v in sorted {
        for t in v.namespace_terms() {
            out.terms.insert(t.iri.clone(), t.clone());
        }
    }
    Some(out)
}

const CLASS_TYPES: [&str; 3] = [rdfs::CLASS, owl::CLASS, owl::DEPRECATED_CLASS];

const PROPERTY_TYPES: [&str; 6] = [
    rdf::PROPERTY,
    owl::OBJECT_PROPERTY,
    owl::DATATYPE_PROPERTY,
    owl::ANNOTATION_PROPERTY,
    owl::FUNCTIONAL_PROPERTY,
    owl::DEPRECATED_PROPERTY,
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Deprecation {
    pub deprecated: bool,
    pub conflict: bool,
}

/// Decides deprecation from the statements about one IRI.
///
/// Markers: `owl:deprecated` with lexical form `true`, typing as
/// `owl:DeprecatedClass` / `owl:DeprecatedProperty`, or a `vs:term_status`
/// of `deprecated` (any case).
pub fn is_deprecated<'a, I>(statements: I) -> Deprecation
where
    I: IntoIterator<Item = &'a Triple>,
{
    let mut marked = false;
    let mut denied = false;
    for t in statements {
        match (t.predicate.as_str(), &t.object) {
            (owl::DEPRECATED, Term::Literal(Literal { lexical_form, .. })) => {
                match lexical_form.trim() {
                    "true" => marked = true,
                    "false" => denied = true,
                    _ => {}
                }
            }
            (rdf::TYPE, Term::Iri(ty)) if ty == owl::DEPRECATED_CLASS || ty == owl::DEPRECATED_PROPERTY => {
                marked = true
            }
            (vs::TERM_STATUS, Term::Literal(Literal { lexical_form, .. }))
                if lexical_form.trim().eq_ignore_ascii_case("deprecated") =>
            {
                marked = true
            }
            _ => {}
        }
    }
    Deprecation {
        deprecated: marked,
        conflict: marked && denied,
    }
}

/// Builds the dated term set of one vocabulary document.
pub fn extract_terms(
    doc: &[Triple],
    namespace: &str,
    version_date: NaiveDate,
    vocab_id: &str,
) -> VocabVersion {
    let mut by_subject: HashMap<&str, Vec<&Triple>> = HashMap::new();
    for t in doc {
        if let Term::Iri(s) = &t.subject {
            by_subject.entry(s.as_str()).or_default().push(t);
        }
    }

    let mut version = VocabVersion::new(vocab_id, namespace, version_date);
    let mut subjects: Vec<_> = by_subject.into_iter().collect();
    subjects.sort_unstable_by_key(|(s, _)| *s);
    for (iri, stmts) in subjects {
        let mut class_like = false;
        let mut property_like = false;
        for t in &stmts {
            if t.predicate != rdf::TYPE {
                continue;
            }
            if let Term::Iri(ty) = &t.object {
                class_like |= CLASS_TYPES.contains(&ty.as_str());
                property_like |= PROPERTY_TYPES.contains(&ty.as_str());
            }
        }
        let kind = match (class_like, property_like) {
            (false, false) => continue,
            (true, true) => {
                version.warnings.push(ExtractWarning::KindConflict { iri: iri.to_owned() });
                TermKind::Property
            }
            (true, false) => TermKind::Class,
            (false, true) => TermKind::Property,
        };
        let dep = is_deprecated(stmts.iter().copied());
        if dep.conflict {
            version
                .warnings
                .push(ExtractWarning::DeprecationConflict { iri: iri.to_owned() });
        }
        version.insert(iri.to_owned(), kind, dep.deprecated);
    }
    if version.namespace_term_count() == 0 {
        version.warnings.push(ExtractWarning::NoNamespaceTerms);
    }
    version
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabFormat {
    Turtle,
    NTriples,
}

impl VocabFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nt") => VocabFormat::NTriples,
            _ => VocabFormat::Turtle,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            VocabFormat::Turtle => "ttl",
            VocabFormat::NTriples => "nt",
        }
    }
}

/// Parses a vocabulary document into triples. Any syntax error rejects the
/// whole document.
pub fn parse_document(
    reader: impl Read,
    format: VocabFormat,
    base_iri: Option<&str>,
    origin: &str,
) -> Result<Vec<Triple>> {
    let fail = |message: String| Error::VocabParse {
        origin: origin.to_owned(),
        message,
    };
    match format {
        VocabFormat::NTriples => {
            let mut out = Vec::new();
            for (idx, line) in BufReader::new(reader).lines().enumerate() {
                let line = line.map_err(|e| fail(e.to_string()))?;
                match parse_quad_line(&line) {
                    Ok(stmt) if stmt.context.is_none() => out.push(Triple {
                        subject: stmt.subject,
                        predicate: stmt.predicate,
                        object: stmt.object,
                    }),
                    Ok(_) => return Err(fail(format!("line {}: graph label in N-Triples", idx + 1))),
                    Err(r) if r.is_ignorable() => {}
                    Err(r) => return Err(fail(format!("line {}: {r}", idx + 1))),
                }
            }
            Ok(out)
        }
        VocabFormat::Turtle => {
            let mut parser = oxttl::TurtleParser::new();
            if let Some(base) = base_iri {
                parser = parser.with_base_iri(base).map_err(|e| fail(e.to_string()))?;
            }
            parser
                .for_reader(reader)
                .map(|r| r.map(from_ox).map_err(|e| fail(e.to_string())))
                .collect()
        }
    }
}

fn from_ox(t: oxrdf::Triple) -> Triple {
    let subject = match t.subject {
        oxrdf::NamedOrBlankNode::NamedNode(n) => Term::Iri(n.into_string()),
        oxrdf::NamedOrBlankNode::BlankNode(b) => Term::Blank(b.into_string()),
    };
    let object = match t.object {
        oxrdf::Term::NamedNode(n) => Term::Iri(n.into_string()),
        oxrdf::Term::BlankNode(b) => Term::Blank(b.into_string()),
        oxrdf::Term::Literal(l) => {
            let (value, datatype, language) = l.destruct();
            Term::Literal(Literal {
                lexical_form: value,
                // simple literals come back with no datatype, as in N-Quads
                datatype: datatype.map(|d| d.into_string()),
                language_tag: language,
            })
        }
    };
    Triple {
        subject,
        predicate: t.predicate.into_string(),
        object,
    }
}

pub fn load_version(
    path: &Path,
    vocab_id: &str,
    namespace: &str,
    version_date: NaiveDate,
) -> Result<VocabVersion> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let triples = parse_document(
        file,
        VocabFormat::from_path(path),
        Some(namespace),
        &path.display().to_string(),
    )?;
    Ok(extract_terms(&triples, namespace, version_date, vocab_id))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabManifestEntry {
    pub vocab_id: String,
    pub namespace: String,
    pub version_date: NaiveDate,
    pub path: PathBuf,
}

/// CSV list of vocabulary documents: `vocab_id,namespace,version_date,path`.
///
/// The `namespace` column may be omitted (the archive watcher writes
/// `vocab_id,version_date,path`); namespaces then come from `namespaces`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabManifest {
    pub entries: Vec<VocabManifestEntry>,
}

impl VocabManifest {
    pub fn parse(
        reader: impl Read,
        base_dir: &Path,
        origin: &str,
        namespaces: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let bad = |line: usize, message: String| Error::Manifest {
            origin: origin.to_owned(),
            line,
            message,
        };
        let (Some(id_col), Some(date_col), Some(path_col)) =
            (col("vocab_id"), col("version_date"), col("path"))
        else {
            return Err(bad(1, "header must name vocab_id, version_date and path".into()));
        };
        let ns_col = col("namespace");
        let mut entries = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = idx + 2;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let vocab_id = field(id_col).to_owned();
            let namespace = match ns_col.map(field).filter(|s| !s.is_empty()) {
                Some(ns) => ns.to_owned(),
                None => namespaces
                    .get(&vocab_id)
                    .cloned()
                    .ok_or_else(|| bad(line, format!("no namespace known for {vocab_id}")))?,
            };
            let version_date = parse_date(field(date_col))
                .ok_or_else(|| bad(line, format!("bad date {:?}", field(date_col))))?;
            entries.push(VocabManifestEntry {
                vocab_id,
                namespace,
                version_date,
                path: base_dir.join(field(path_col)),
            });
        }
        Ok(VocabManifest { entries })
    }

    pub fn load(path: &Path, namespaces: &BTreeMap<String, String>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(file, base, &path.display().to_string(), namespaces)
    }

    /// Loads every listed document, grouped by vocabulary and sorted by date.
    pub fn load_versions(&self) -> Result<BTreeMap<String, Vec<VocabVersion>>> {
        let mut out: BTreeMap<String, Vec<VocabVersion>> = BTreeMap::new();
        for e in &self.entries {
            let v = load_version(&e.path, &e.vocab_id, &e.namespace, e.version_date)?;
            for w in &v.warnings {
                log::warn!("{} {}: {:?}", e.vocab_id, e.version_date, w);
            }
            out.entry(e.vocab_id.clone()).or_default().push(v);
        }
        for versions in out.values_mut() {
            versions.sort_by_key(|v| v.version_date);
        }
        Ok(out)
    }
}
