//! Synthetic corpora with known answers.
//!
//! A [`CorpusSpec`] describes vocabulary version schedules, planted term
//! uses and noise. [`generate`] writes N-Quads snapshots, Turtle vocabulary
//! documents, manifests and a run config, plus a `truth/` directory holding
//! every report the pipeline should produce. The expected values are
//! computed straight from the spec by the code in this module, which does
//! not call the diff, usage or adoption modules.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flate2::write::GzEncoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{TermKind, VocabVersion};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const NOISE_VOCAB: &str = "http://vocab.noise.example/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Snapshot dates, strictly increasing.
    pub snapshots: Vec<NaiveDate>,
    #[serde(default)]
    pub gzip: bool,
    pub vocabularies: Vec<VocabSpec>,
    #[serde(default)]
    pub usages: Vec<PlantedUsage>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabSpec {
    pub id: String,
    pub namespace: String,
    pub versions: Vec<VersionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VersionSpec {
    pub date: NaiveDate,
    /// Applied in order to the previous version's terms.
    pub edits: Vec<Edit>,
}

/// Term edits; `term` is a local name appended to the namespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum Edit {
    Add { term: String, kind: TermKind },
    Remove { term: String },
    Deprecate { term: String },
    Undeprecate { term: String },
}

impl Edit {
    pub fn add(term: impl Into<String>, kind: TermKind) -> Self {
        Edit::Add { term: term.into(), kind }
    }

    pub fn term(&self) -> &str {
        match self {
            Edit::Add { term, .. }
            | Edit::Remove { term }
            | Edit::Deprecate { term }
            | Edit::Undeprecate { term } => term,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedUsage {
    pub vocab: String,
    /// Local name of a term of the vocabulary (any version).
    pub term: String,
    /// Registrable domain the uses are published under; `None` plants uses
    /// in blank-node graphs with blank subjects.
    pub pld: Option<String>,
    pub snapshot: NaiveDate,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Fraction of all data lines that are malformed.
    pub malformed_rate: f64,
    /// Fraction of well-formed quads that use no tracked term.
    pub untracked_rate: f64,
    /// Lower bound on untracked quads per snapshot.
    pub min_untracked: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            malformed_rate: 0.0,
            untracked_rate: 0.0,
            min_untracked: 0,
        }
    }
}

/// `round(base * rate / (1 - rate))`: the count that makes the extra lines
/// a `rate` share of the total.
pub fn share_count(base: u64, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    (base as f64 * rate / (1.0 - rate)).round() as u64
}

fn is_local_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn is_pld_shape(s: &str) -> bool {
    let labels: Vec<&str> = s.split('.').collect();
    labels.len() >= 2
        && labels.iter().all(|l| {
            !l.is_empty() && l.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        })
}

/// Term state of one version: local name -> (kind, deprecated).
type State = BTreeMap<String, (TermKind, bool)>;

impl VocabSpec {
    /// Term states after each version, or the list of edit violations.
    fn states(&self) -> std::result::Result<Vec<State>, Vec<String>> {
        let mut errors = Vec::new();
        let mut out = Vec::new();
        let mut state = State::new();
        let mut kinds: BTreeMap<&str, TermKind> = BTreeMap::new();
        for v in &self.versions {
            for e in &v.edits {
                let t = e.term();
                let at = format!("{} {} {t}", self.id, v.date);
                if !is_local_name(t) {
                    errors.push(format!("{at}: term must be a plain local name"));
                    continue;
                }
                match (e, state.get(t).copied()) {
                    (Edit::Add { kind, .. }, None) => {
                        if kinds.get(t).is_some_and(|k| k != kind) {
                            errors.push(format!("{at}: re-added with a different kind"));
                        }
                        kinds.insert(t, *kind);
                        state.insert(t.to_owned(), (*kind, false));
                    }
                    (Edit::Add { .. }, Some(_)) => errors.push(format!("{at}: added twice")),
                    (Edit::Remove { .. }, Some(_)) => {
                        state.remove(t);
                    }
                    (Edit::Deprecate { .. }, Some((k, false))) => {
                        state.insert(t.to_owned(), (k, true));
                    }
                    (Edit::Deprecate { .. }, Some((_, true))) => {
                        errors.push(format!("{at}: already deprecated"))
                    }
                    (Edit::Undeprecate { .. }, Some((k, true))) => {
                        state.insert(t.to_owned(), (k, false));
                    }
                    (Edit::Undeprecate { .. }, Some((_, false))) => {
                        errors.push(format!("{at}: not deprecated"))
                    }
                    (_, None) => errors.push(format!("{at}: term not present")),
                }
            }
            out.push(state.clone());
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(errors)
        }
    }

    /// The version sequence as in-memory vocabulary versions.
    pub fn to_versions(&self) -> Result<Vec<VocabVersion>> {
        let states = self.states().map_err(Error::InvalidCorpusSpec)?;
        Ok(self
            .versions
            .iter()
            .zip(states)
            .map(|(v, state)| {
                let mut out = VocabVersion::new(&self.id, &self.namespace, v.date);
                for (local, (kind, dep)) in state {
                    out.insert(format!("{}{local}", self.namespace), kind, dep);
                }
                out
            })
            .collect())
    }

    fn union_kinds(&self, states: &[State]) -> BTreeMap<String, TermKind> {
        states
            .iter()
            .flat_map(|s| s.iter().map(|(t, (k, _))| (t.clone(), *k)))
            .collect()
    }
}

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks the spec, reporting every violation at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.snapshots.windows(2).any(|w| w[0] >= w[1]) {
            errors.push("snapshot dates must be strictly increasing".to_owned());
        }
        for (name, r) in [
            ("malformed_rate", self.noise.malformed_rate),
            ("untracked_rate", self.noise.untracked_rate),
        ] {
            if !(0.0..1.0).contains(&r) {
                errors.push(format!("noise.{name} must be in [0, 1)"));
            }
        }
        let mut ids = BTreeSet::new();
        let mut unions: BTreeMap<&str, BTreeMap<String, TermKind>> = BTreeMap::new();
        for v in &self.vocabularies {
            if !is_local_name(&v.id) {
                errors.push(format!("vocabulary id {:?} must be a plain name", v.id));
            }
            if !ids.insert(v.id.as_str()) {
                errors.push(format!("vocabulary id {} repeated", v.id));
            }
            if !v.namespace.starts_with("http://") && !v.namespace.starts_with("https://") {
                errors.push(format!("{}: namespace must be an http(s) IRI", v.id));
            }
            if v.namespace.chars().any(|c| c.is_whitespace() || "<>\"{}|^`\\".contains(c)) {
                errors.push(format!("{}: namespace contains characters not allowed in IRIs", v.id));
            }
            if v.versions.is_empty() {
                errors.push(format!("{}: no versions", v.id));
            }
            if v.versions.windows(2).any(|w| w[0].date >= w[1].date) {
                errors.push(format!("{}: version dates must be strictly increasing", v.id));
            }
            if let Err(e) = v.states() {
                errors.extend(e);
            }
            let added = v.versions.iter().flat_map(|x| &x.edits).filter_map(|e| match e {
                Edit::Add { term, kind } => Some((term.clone(), *kind)),
                _ => None,
            });
            unions.insert(&v.id, added.collect());
        }
        for a in &self.vocabularies {
            for b in &self.vocabularies {
                if !std::ptr::eq(a, b) && b.namespace.starts_with(&a.namespace) {
                    errors.push(format!("namespaces of {} and {} overlap", a.id, b.id));
                }
            }
        }
        let snapshots: BTreeSet<_> = self.snapshots.iter().collect();
        for (i, u) in self.usages.iter().enumerate() {
            let at = format!("usage #{i}");
            match unions.get(u.vocab.as_str()) {
                None if !ids.contains(u.vocab.as_str()) => {
                    errors.push(format!("{at}: unknown vocabulary {}", u.vocab))
                }
                Some(terms) if !terms.contains_key(&u.term) => {
                    errors.push(format!("{at}: {} has no term {}", u.vocab, u.term))
                }
                _ => {}
            }
            if !snapshots.contains(&u.snapshot) {
                errors.push(format!("{at}: {} is not a snapshot date", u.snapshot));
            }
            if let Some(p) = &u.pld {
                if !is_pld_shape(p) {
                    errors.push(format!("{at}: {p:?} is not a lowercase domain name"));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCorpusSpec(errors))
        }
    }
}

/// Paths of a generated corpus.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub root: PathBuf,
    pub snapshot_manifest: PathBuf,
    pub vocab_manifest: PathBuf,
    pub config: PathBuf,
    pub truth_dir: PathBuf,
    pub snapshot_files: Vec<PathBuf>,
    pub truth: GroundTruth,
}

/// Writes the corpus, vocabulary files, manifests, a `kgvo.toml` and the
/// truth directory under `out`.
pub fn generate(spec: &CorpusSpec, out: &Path) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));

    let vocab_dir = out.join("vocabs");
    mkdir(&vocab_dir)?;
    let vocab_manifest = vocab_dir.join("manifest.csv");
    let mut vm = csv::Writer::from_path(&vocab_manifest)?;
    vm.write_record(["vocab_id", "namespace", "version_date", "path"])?;
    for v in &spec.vocabularies {
        let states = v.states().map_err(Error::InvalidCorpusSpec)?;
        mkdir(&vocab_dir.join(&v.id))?;
        for (ver, state) in v.versions.iter().zip(&states) {
            let rel = format!("{}/{}.ttl", v.id, ver.date);
            let path = vocab_dir.join(&rel);
            let text = vocabulary_turtle(&v.namespace, state, &mut rng);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            vm.write_record([v.id.as_str(), &v.namespace, &ver.date.to_string(), &rel])?;
        }
    }
    vm.flush().map_err(|e| Error::io(&vocab_manifest, e))?;

    let snap_dir = out.join("snapshots");
    mkdir(&snap_dir)?;
    let kinds = term_kinds(spec);
    let mut manifest = String::new();
    let mut snapshot_files = Vec::new();
    for date in &spec.snapshots {
        let name = format!("{date}.nq{}", if spec.gzip { ".gz" } else { "" });
        let path = snap_dir.join(&name);
        let planted: Vec<Plant> = spec
            .usages
            .iter()
            .filter(|u| u.snapshot == *date && u.count > 0)
            .map(|u| {
                let (iri, kind) = kinds[&(u.vocab.clone(), u.term.clone())].clone();
                Plant { iri, kind, pld: u.pld.clone(), count: u.count }
            })
            .collect();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let sink = BufWriter::with_capacity(1 << 16, file);
        let result = if spec.gzip {
            let mut gz = GzEncoder::new(sink, flate2::Compression::fast());
            write_snapshot(&mut gz, *date, &planted, &spec.noise, &mut rng)
                .and_then(|_| gz.finish().and_then(|mut w| w.flush()))
        } else {
            let mut w = sink;
            write_snapshot(&mut w, *date, &planted, &spec.noise, &mut rng).and_then(|_| w.flush())
        };
        result.map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("{date} {name}\n"));
        snapshot_files.push(path);
    }
    let snapshot_manifest = snap_dir.join("manifest.txt");
    fs::write(&snapshot_manifest, manifest).map_err(|e| Error::io(&snapshot_manifest, e))?;

    let config = out.join("kgvo.toml");
    let config_text = "corpus_manifest = \"snapshots/manifest.txt\"\n\
                       vocab_manifest = \"vocabs/manifest.csv\"\n\
                       output_dir = \"out\"\n\
                       attribution = \"context-first\"\n";
    fs::write(&config, config_text).map_err(|e| Error::io(&config, e))?;

    let truth = GroundTruth::compute(spec)?;
    let truth_dir = out.join("truth");
    truth.write(&truth_dir)?;
    Ok(GeneratedCorpus {
        root: out.to_path_buf(),
        snapshot_manifest,
        vocab_manifest,
        config,
        truth_dir,
        snapshot_files,
        truth,
    })
}

/// (vocab id, local name) -> (full IRI, kind) over all versions.
fn term_kinds(spec: &CorpusSpec) -> BTreeMap<(String, String), (String, TermKind)> {
    let mut out = BTreeMap::new();
    for v in &spec.vocabularies {
        if let Ok(states) = v.states() {
            for (t, k) in v.union_kinds(&states) {
                out.insert((v.id.clone(), t.clone()), (format!("{}{t}", v.namespace), k));
            }
        }
    }
    out
}

fn vocabulary_turtle(namespace: &str, state: &State, rng: &mut ChaCha8Rng) -> String {
    const OWL: &str = "http://www.w3.org/2002/07/owl#";
    const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    let mut s = String::new();
    s.push_str("@prefix owl: <http://www.w3.org/2002/07/owl#> .\n");
    s.push_str("@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n");
    s.push_str("@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .\n");
    s.push_str("@prefix vs: <http://www.w3.org/2003/06/sw-vocab-status/ns#> .\n\n");
    let onto = namespace.trim_end_matches(['#', '/']);
    s.push_str(&format!("<{onto}> a owl:Ontology ;\n    owl:versionInfo \"generated\" .\n\n"));
    // a foreign term that must not count as part of the vocabulary
    s.push_str("<http://xmlns.com/foaf/0.1/Agent> a owl:Class .\n\n");
    for (local, (kind, deprecated)) in state {
        let iri = format!("<{namespace}{local}>");
        let marker = rng.random_range(0..3);
        let ty = match (kind, deprecated, marker) {
            (TermKind::Class, true, 2) => "owl:DeprecatedClass".to_owned(),
            (TermKind::Property, true, 2) => "owl:DeprecatedProperty".to_owned(),
            (TermKind::Class, _, _) => ["owl:Class", "rdfs:Class"][rng.random_range(0..2)].to_owned(),
            (TermKind::Property, _, _) => [
                "owl:ObjectProperty",
                "owl:DatatypeProperty",
                "rdf:Property",
                "owl:AnnotationProperty",
            ][rng.random_range(0..4)]
            .to_owned(),
        };
        s.push_str(&format!("{iri} a {ty} ;\n    rdfs:label \"{local}\"@en"));
        if *deprecated {
            match marker {
                0 => s.push_str(" ;\n    owl:deprecated true"),
                1 => s.push_str(" ;\n    vs:term_status \"deprecated\""),
                _ => {}
            }
        }
        if *kind == TermKind::Class && rng.random_bool(0.3) {
            s.push_str(&format!(" ;\n    <{RDFS}subClassOf> <{OWL}Thing>"));
        }
        s.push_str(" .\n");
    }
    s
}

struct Plant {
    iri: String,
    kind: TermKind,
    pld: Option<String>,
    count: u64,
}

/// Streams one snapshot: a comment header, then planted, untracked and
/// malformed lines interleaved at random.
fn write_snapshot<W: Write>(
    w: &mut W,
    date: NaiveDate,
    planted: &[Plant],
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> std::io::Result<()> {
    let p_total: u64 = planted.iter().map(|p| p.count).sum();
    let u_total = share_count(p_total, noise.untracked_rate).max(noise.min_untracked);
    let m_total = share_count(p_total + u_total, noise.malformed_rate);
    writeln!(w, "# synthetic snapshot {date}")?;

    let (mut p_left, mut u_left, mut m_left) = (p_total, u_total, m_total);
    let mut cursor = 0usize;
    let mut used_of_cursor = 0u64;
    let mut serial = 0u64;
    while p_left + u_left + m_left > 0 {
        serial += 1;
        let pick = rng.random_range(0..p_left + u_left + m_left);
        if pick < p_left {
            while used_of_cursor == planted[cursor].count {
                cursor += 1;
                used_of_cursor = 0;
            }
            used_of_cursor += 1;
            p_left -= 1;
            planted_line(w, &planted[cursor], serial, rng)?;
        } else if pick < p_left + u_left {
            u_left -= 1;
            noise_line(w, serial, rng)?;
        } else {
            m_left -= 1;
            malformed_line(w, serial, rng)?;
        }
    }
    Ok(())
}

fn object(serial: u64, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..5) {
        0 => format!("\"value {serial}\""),
        1 => format!("\"label {serial}\"@en"),
        2 => format!("\"{}\"^^<http://www.w3.org/2001/XMLSchema#integer>", serial % 1000),
        3 => format!("\"line\\nbreak \\\"{serial}\\\" caf\\u00E9\""),
        _ => format!("<http://objects.noise.example/o/{serial}>"),
    }
}

fn planted_line<W: Write>(w: &mut W, p: &Plant, serial: u64, rng: &mut ChaCha8Rng) -> std::io::Result<()> {
    let (subject, graph) = match &p.pld {
        Some(pld) => {
            let host = ["www", "data", "sws", "dbpedia"][rng.random_range(0..4)];
            let graph = format!("<http://{host}.{pld}/graph/{}>", serial % 97);
            match rng.random_range(0..4) {
                // no graph label: the subject carries the publisher
                0 => (format!("<http://{pld}/id/{serial}>"), None),
                // foreign subject, publisher named by the graph
                1 => (format!("<http://elsewhere{}.noise.example/r/{serial}>", serial % 7), Some(graph)),
                _ => (format!("<http://{host}.{pld}/resource/{serial}>"), Some(graph)),
            }
        }
        None => {
            let graph = rng.random_bool(0.5).then(|| format!("_:g{}", serial % 13));
            (format!("_:b{serial}"), graph)
        }
    };
    let (predicate, obj) = match p.kind {
        TermKind::Class => (RDF_TYPE.to_owned(), format!("<{}>", p.iri)),
        TermKind::Property => (p.iri.clone(), object(serial, rng)),
    };
    match graph {
        Some(g) => writeln!(w, "{subject} <{predicate}> {obj} {g} ."),
        None => writeln!(w, "{subject} <{predicate}> {obj} ."),
    }
}

fn noise_line<W: Write>(w: &mut W, serial: u64, rng: &mut ChaCha8Rng) -> std::io::Result<()> {
    let site = serial % 31;
    let s = format!("<http://n{site}.noise.example/s/{serial}>");
    let g = format!("<http://n{site}.noise.example/g>");
    if rng.random_bool(0.3) {
        let class = rng.random_range(0..20);
        writeln!(w, "{s} <{RDF_TYPE}> <{NOISE_VOCAB}C{class}> {g} .")
    } else {
        let prop = rng.random_range(0..50);
        let o = object(serial, rng);
        writeln!(w, "{s} <{NOISE_VOCAB}p{prop}> {o} {g} .")
    }
}

fn malformed_line<W: Write>(w: &mut W, serial: u64, rng: &mut ChaCha8Rng) -> std::io::Result<()> {
    let s = format!("<http://bad.noise.example/s/{serial}>");
    let p = format!("<{NOISE_VOCAB}p1>");
    match rng.random_range(0..7) {
        0 => writeln!(w, "{s} {p} \"no terminator\" <http://bad.noise.example/g>"),
        1 => writeln!(w, "<http://bad noise.example/{serial}> {p} \"x\" ."),
        2 => writeln!(w, "{s} {p} \"unterminated literal ."),
        3 => writeln!(w, "{s} {p} \"bad \\q escape\" ."),
        4 => writeln!(w, "{s} <relative/{serial}> \"x\" ."),
        5 => writeln!(w, "garbage line {serial} without any structure"),
        _ => writeln!(w, "{s} {p} ."),
    }
}

/// Expected pipeline outputs, computed directly from a spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// vocab id -> rows `term,kind,from,to` in report order.
    pub changes: BTreeMap<String, Vec<[String; 4]>>,
    /// date -> term IRI -> PLD (or "") -> count.
    pub usage: BTreeMap<NaiveDate, BTreeMap<String, BTreeMap<String, u64>>>,
    pub parse_stats: BTreeMap<NaiveDate, [u64; 4]>,
    /// vocab id -> (eligible, reasons)
    pub selection: BTreeMap<String, (bool, Vec<String>)>,
    pub adoption: Vec<TruthAdoption>,
    /// `vocab_id,term,deprecation_date,snapshot,count`
    pub deprecated_usage: Vec<(String, String, NaiveDate, NaiveDate, u64)>,
    /// `vocab_id,rank,pld,count`
    pub top_plds: Vec<(String, usize, String, u64)>,
    /// `vocab_id,total_terms,unused,pct_unused`
    pub unused: Vec<(String, usize, usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthAdoption {
    pub vocab_id: String,
    pub term: String,
    pub publish_date: NaiveDate,
    pub first_use: Option<NaiveDate>,
    pub lag_days: Option<i64>,
    pub instances: u64,
    pub plds: usize,
}

impl GroundTruth {
    pub fn compute(spec: &CorpusSpec) -> Result<Self> {
        spec.validate()?;
        let mut t = GroundTruth::default();
        let kinds = term_kinds(spec);

        // usage: planted counts, summed per (date, term, pld)
        for d in &spec.snapshots {
            t.usage.insert(*d, BTreeMap::new());
        }
        for u in spec.usages.iter().filter(|u| u.count > 0) {
            let iri = kinds[&(u.vocab.clone(), u.term.clone())].0.clone();
            *t.usage
                .get_mut(&u.snapshot)
                .expect("validated")
                .entry(iri)
                .or_default()
                .entry(u.pld.clone().unwrap_or_default())
                .or_default() += u.count;
        }
        for d in &spec.snapshots {
            let p: u64 = spec.usages.iter().filter(|u| u.snapshot == *d).map(|u| u.count).sum();
            let un = share_count(p, spec.noise.untracked_rate).max(spec.noise.min_untracked);
            let m = share_count(p + un, spec.noise.malformed_rate);
            t.parse_stats.insert(*d, [1 + p + un + m, p + un, m, 1]);
        }
        let uses_of = |iri: &str| -> Vec<(NaiveDate, &str, u64)> {
            let mut v = Vec::new();
            for (d, m) in &t.usage {
                for (pld, n) in m.get(iri).into_iter().flatten() {
                    v.push((*d, pld.as_str(), *n));
                }
            }
            v
        };

        let first = spec.snapshots.first().copied();
        let last = spec.snapshots.last().copied();
        let mut adoption = Vec::new();
        let mut deprecated = Vec::new();
        let mut top = Vec::new();
        let mut unused = Vec::new();
        for v in &spec.vocabularies {
            let states = v.states().map_err(Error::InvalidCorpusSpec)?;
            let dates: Vec<NaiveDate> = v.versions.iter().map(|x| x.date).collect();
            let iri = |local: &str| format!("{}{local}", v.namespace);
            let union: BTreeSet<&String> = states.iter().flat_map(|s| s.keys()).collect();

            let mut reasons: Vec<String> = Vec::new();
            if dates.len() < 2 {
                reasons.push("fewer-than-two-versions".into());
            }
            let covered = dates
                .iter()
                .any(|d| first.is_some_and(|f| f <= *d) && last.is_some_and(|l| *d <= l));
            if !covered {
                reasons.push("versions-outside-corpus-window".into());
            }
            let used = union.iter().any(|l| !uses_of(&iri(l)).is_empty());
            if !used {
                reasons.push("no-direct-use".into());
            }
            let eligible = reasons.is_empty();
            t.selection.insert(v.id.clone(), (eligible, reasons));

            // change events straight from the state sequence
            if dates.len() >= 2 {
                let mut rows: Vec<(NaiveDate, u8, String, NaiveDate)> = Vec::new();
                for i in 1..states.len() {
                    let (a, b) = (&states[i - 1], &states[i]);
                    let (from, to) = (dates[i - 1], dates[i]);
                    for (term, (_, dep)) in b {
                        match a.get(term) {
                            None => {
                                rows.push((to, 0, iri(term), from));
                                if *dep {
                                    rows.push((to, 2, iri(term), from));
                                }
                            }
                            Some((_, was)) if *dep && !*was => rows.push((to, 2, iri(term), from)),
                            Some((_, was)) if !*dep && *was => rows.push((to, 3, iri(term), from)),
                            _ => {}
                        }
                    }
                    for term in a.keys().filter(|k| !b.contains_key(*k)) {
                        rows.push((to, 1, iri(term), from));
                    }
                }
                // recreation: scan each term's history
                for term in &union {
                    let mut lost_at: Option<NaiveDate> = None;
                    for i in 1..states.len() {
                        let before = states[i - 1].get(*term);
                        let now = states[i].get(*term);
                        let lost_now = match (before, now) {
                            (Some(_), None) => true,
                            (Some((_, false)) | None, Some((_, true))) => true,
                            _ => false,
                        };
                        if let (Some(since), Some((_, false))) = (lost_at, now) {
                            rows.push((dates[i], 4, iri(term), since));
                            lost_at = None;
                        }
                        if lost_now && lost_at.is_none() {
                            lost_at = Some(dates[i]);
                        }
                    }
                }
                rows.sort();
                const KINDS: [&str; 5] = ["added", "removed", "deprecated", "undeprecated", "recreated"];
                t.changes.insert(
                    v.id.clone(),
                    rows.into_iter()
                        .map(|(to, k, term, from)| [term, KINDS[k as usize].to_owned(), from.to_string(), to.to_string()])
                        .collect(),
                );
            }

            if !eligible {
                continue;
            }

            // adoption of terms introduced after the first version
            let mut introduced: BTreeMap<&String, NaiveDate> = BTreeMap::new();
            for i in 1..states.len() {
                for term in states[i].keys() {
                    if !states[i - 1].contains_key(term) {
                        introduced.entry(term).or_insert(dates[i]);
                    }
                }
            }
            let mut recs: Vec<TruthAdoption> = introduced
                .into_iter()
                .map(|(term, publish)| {
                    let uses = uses_of(&iri(term));
                    let first_use = uses.iter().map(|u| u.0).min();
                    let plds: BTreeSet<&str> = uses.iter().map(|u| u.1).filter(|p| !p.is_empty()).collect();
                    TruthAdoption {
                        vocab_id: v.id.clone(),
                        term: iri(term),
                        publish_date: publish,
                        first_use,
                        lag_days: first_use.map(|f| (f - publish).num_days()),
                        instances: uses.iter().map(|u| u.2).sum(),
                        plds: plds.len(),
                    }
                })
                .collect();
            recs.sort_by(|a, b| (a.publish_date, &a.term).cmp(&(b.publish_date, &b.term)));
            adoption.extend(recs);

            // continued use after each deprecation
            if let Some(rows) = t.changes.get(&v.id) {
                for [term, kind, _, to] in rows {
                    if kind != "deprecated" {
                        continue;
                    }
                    let since: NaiveDate = to.parse().expect("own format");
                    let mut per: BTreeMap<NaiveDate, u64> = BTreeMap::new();
                    for (d, _, n) in uses_of(term) {
                        if d >= since {
                            *per.entry(d).or_default() += n;
                        }
                    }
                    for (d, n) in per {
                        deprecated.push((v.id.clone(), term.clone(), since, d, n));
                    }
                }
            }

            // top PLDs over the vocabulary's terms
            let mut per_pld: BTreeMap<&str, u64> = BTreeMap::new();
            let iris: BTreeSet<String> = union.iter().map(|l| iri(l)).collect();
            for m in t.usage.values() {
                for (_, plds) in m.iter().filter(|(term, _)| iris.contains(*term)) {
                    for (pld, n) in plds.iter().filter(|(p, _)| !p.is_empty()) {
                        *per_pld.entry(pld).or_default() += n;
                    }
                }
            }
            let mut ranked: Vec<(&str, u64)> = per_pld.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            for (i, (p, n)) in ranked.into_iter().enumerate() {
                top.push((v.id.clone(), i + 1, p.to_owned(), n));
            }

            let n_unused = iris
                .iter()
                .filter(|i| t.usage.values().all(|m| !m.contains_key(*i)))
                .count();
            let total = iris.len();
            // half-up rounding via exact integers
            let pct = (200 * n_unused as u64 + total as u64) / (2 * total as u64);
            unused.push((v.id.clone(), total, n_unused, pct));
        }
        t.adoption = adoption;
        t.deprecated_usage = deprecated;
        t.top_plds = top;
        t.unused = unused;
        Ok(t)
    }

    /// Writes the expected files using the report layout: `changes/`,
    /// `usage/`, `parse_stats.csv`, `selection.csv` and `report/*.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(&dir.join("changes"))?;
        mkdir(&dir.join("usage"))?;
        mkdir(&dir.join("report"))?;
        for (id, rows) in &self.changes {
            let mut w = csv::Writer::from_path(dir.join("changes").join(format!("{id}.csv")))?;
            w.write_record(["vocab_id", "term", "kind", "from", "to"])?;
            for [term, kind, from, to] in rows {
                w.write_record([id, term, kind, from, to])?;
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }
        for (date, m) in &self.usage {
            let mut w = csv::Writer::from_path(dir.join("usage").join(format!("{date}.csv")))?;
            w.write_record(["date", "term", "pld", "count"])?;
            for (term, plds) in m {
                for (pld, n) in plds {
                    w.write_record([&date.to_string(), term, pld, &n.to_string()])?;
                }
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(dir.join("parse_stats.csv"))?;
        w.write_record(["date", "lines_total", "quads_emitted", "lines_skipped", "lines_ignored"])?;
        for (d, s) in &self.parse_stats {
            w.write_record([d.to_string(), s[0].to_string(), s[1].to_string(), s[2].to_string(), s[3].to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(dir.join("selection.csv"))?;
        w.write_record(["vocab_id", "eligible", "reasons"])?;
        for (id, (ok, reasons)) in &self.selection {
            w.write_record([id.as_str(), if *ok { "true" } else { "false" }, &reasons.join(";")])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let r = dir.join("report");
        let mut w = csv::Writer::from_path(r.join("adoption.csv"))?;
        w.write_record(["vocab_id", "term", "publish_date", "first_use", "lag_days", "instances", "plds"])?;
        for a in &self.adoption {
            w.write_record([
                a.vocab_id.clone(),
                a.term.clone(),
                a.publish_date.to_string(),
                a.first_use.map(|d| d.to_string()).unwrap_or_default(),
                a.lag_days.map(|d| d.to_string()).unwrap_or_default(),
                a.instances.to_string(),
                a.plds.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(r.join("deprecated_usage.csv"))?;
        w.write_record(["vocab_id", "term", "deprecation_date", "snapshot", "count"])?;
        for (id, term, dep, snap, n) in &self.deprecated_usage {
            w.write_record([id.clone(), term.clone(), dep.to_string(), snap.to_string(), n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(r.join("top_plds.csv"))?;
        w.write_record(["vocab_id", "rank", "pld", "count"])?;
        for (id, rank, pld, n) in &self.top_plds {
            w.write_record([id.clone(), rank.to_string(), pld.clone(), n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(r.join("unused.csv"))?;
        w.write_record(["vocab_id", "total_terms", "unused", "pct_unused"])?;
        for (id, total, n, pct) in &self.unused {
            w.write_record([id.clone(), total.to_string(), n.to_string(), pct.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let json = serde_json::to_string_pretty(self)?;
        let p = dir.join("ground_truth.json");
        fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}
