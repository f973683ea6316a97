//! Streaming N-Quads / N-Triples ingestion for snapshot dumps.
//!
//! Crawled dumps are dirty, so the parser never aborts on bad input: every
//! line is either a [`Quad`] or a [`SkipReason`]. Reading is line-at-a-time
//! with a reused buffer, so memory does not grow with the file.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::parse_date;
use crate::error::{Error, Result};

/// Longest physical line accepted; longer lines are skipped as oversized.
pub const MAX_LINE_BYTES: usize = 1 << 20;

const MAX_ERROR_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub lexical_form: String,
    pub datatype: Option<String>,
    pub language_tag: Option<String>,
}

impl Literal {
    pub fn plain(lexical_form: impl Into<String>) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: None,
            language_tag: None,
        }
    }

    pub fn typed(lexical_form: impl Into<String>, datatype: impl Into<String>) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: Some(datatype.into()),
            language_tag: None,
        }
    }

    pub fn lang(lexical_form: impl Into<String>, tag: impl Into<String>) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: None,
            language_tag: Some(tag.into()),
        }
    }
}

/// An RDF term. Blank node labels are opaque and scoped to one snapshot file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    pub fn is_iri(&self, iri: &str) -> bool {
        self.as_iri() == Some(iri)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quad {
    /// IRI or blank node.
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
    /// Graph label naming the document the statement was crawled from.
    pub context: Option<Term>,
    pub snapshot_date: NaiveDate,
}

/// A parsed statement before a snapshot date is attached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Statement {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
    pub context: Option<Term>,
}

impl Statement {
    pub fn dated(self, snapshot_date: NaiveDate) -> Quad {
        Quad {
            subject: self.subject,
            predicate: self.predicate,
            object: self.object,
            context: self.context,
            snapshot_date,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    Blank,
    Comment,
    MalformedIri,
    BadEscape,
    Truncated,
    Syntax,
    InvalidUtf8,
    Oversized,
}

impl SkipReason {
    /// Blank and comment lines carry no statement but are not errors.
    pub fn is_ignorable(self) -> bool {
        matches!(self, SkipReason::Blank | SkipReason::Comment)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::Blank => "blank",
            SkipReason::Comment => "comment",
            SkipReason::MalformedIri => "malformed-iri",
            SkipReason::BadEscape => "bad-escape",
            SkipReason::Truncated => "truncated",
            SkipReason::Syntax => "syntax",
            SkipReason::InvalidUtf8 => "invalid-utf8",
            SkipReason::Oversized => "oversized",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses one physical line (without its newline) as an N-Quads statement.
/// A missing graph label gives N-Triples compatibility.
pub fn parse_quad_line(line: &str) -> Result<Statement, SkipReason> {
    let mut cur = Cursor::new(line);
    cur.skip_ws();
    match cur.peek() {
        None => return Err(SkipReason::Blank),
        Some(b'#') => return Err(SkipReason::Comment),
        _ => {}
    }

    let subject = match cur.peek() {
        Some(b'<') => Term::Iri(cur.iri()?),
        Some(b'_') => Term::Blank(cur.blank()?),
        _ => return Err(SkipReason::Syntax),
    };
    cur.skip_ws();
    let predicate = match cur.peek() {
        Some(b'<') => cur.iri()?,
        None => return Err(SkipReason::Truncated),
        _ => return Err(SkipReason::Syntax),
    };
    cur.skip_ws();
    let object = match cur.peek() {
        Some(b'<') => Term::Iri(cur.iri()?),
        Some(b'_') => Term::Blank(cur.blank()?),
        Some(b'"') => Term::Literal(cur.literal()?),
        None => return Err(SkipReason::Truncated),
        _ => return Err(SkipReason::Syntax),
    };
    cur.skip_ws();
    let context = match cur.peek() {
        Some(b'<') => Some(Term::Iri(cur.iri()?)),
        Some(b'_') => Some(Term::Blank(cur.blank()?)),
        _ => None,
    };
    cur.skip_ws();
    match cur.bump() {
        Some(b'.') => {}
        None => return Err(SkipReason::Truncated),
        _ => return Err(SkipReason::Syntax),
    }
    cur.skip_ws();
    match cur.peek() {
        None | Some(b'#') => {}
        _ => return Err(SkipReason::Syntax),
    }
    Ok(Statement {
        subject,
        predicate,
        object,
        context,
    })
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    fn bytes(&self) -> &'a [u8] {
        self.text.as_bytes()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes().get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    fn hex(&mut self, digits: usize) -> Result<char, SkipReason> {
        let end = self.pos + digits;
        if end > self.text.len() {
            return Err(SkipReason::Truncated);
        }
        let raw = &self.bytes()[self.pos..end];
        if !raw.iter().all(u8::is_ascii_hexdigit) {
            return Err(SkipReason::BadEscape);
        }
        // ASCII hex digits, so the slice is on char boundaries
        let value = u32::from_str_radix(&self.text[self.pos..end], 16)
            .map_err(|_| SkipReason::BadEscape)?;
        self.pos = end;
        char::from_u32(value).ok_or(SkipReason::BadEscape)
    }

    fn iri(&mut self) -> Result<String, SkipReason> {
        debug_assert_eq!(self.peek(), Some(b'<'));
        self.pos += 1;
        let mut out = String::new();
        let mut run = self.pos;
        loop {
            let Some(b) = self.peek() else {
                return Err(SkipReason::Truncated);
            };
            match b {
                b'>' => {
                    out.push_str(&self.text[run..self.pos]);
                    self.pos += 1;
                    break;
                }
                b'\\' => {
                    out.push_str(&self.text[run..self.pos]);
                    self.pos += 1;
                    let c = match self.bump() {
                        Some(b'u') => self.hex(4)?,
                        Some(b'U') => self.hex(8)?,
                        None => return Err(SkipReason::Truncated),
                        _ => return Err(SkipReason::BadEscape),
                    };
                    if is_forbidden_in_iri(c) {
                        return Err(SkipReason::MalformedIri);
                    }
                    out.push(c);
                    run = self.pos;
                }
                _ if b < 0x80 && is_forbidden_in_iri(b as char) => {
                    return Err(SkipReason::MalformedIri);
                }
                _ => self.pos += 1,
            }
        }
        if !has_scheme(&out) {
            return Err(SkipReason::MalformedIri);
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String, SkipReason> {
        self.pos += 1;
        match self.bump() {
            Some(b':') => {}
            None => return Err(SkipReason::Truncated),
            _ => return Err(SkipReason::Syntax),
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            let ok = if i == 0 {
                c.is_alphanumeric() || c == '_'
            } else {
                c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\u{B7}')
            };
            if !ok {
                break;
            }
            end = i + c.len_utf8();
        }
        // a label may not end with '.', that dot terminates the statement
        while end > 0 && rest.as_bytes()[end - 1] == b'.' {
            end -= 1;
        }
        if end == 0 {
            return Err(SkipReason::Syntax);
        }
        self.pos = start + end;
        Ok(rest[..end].to_owned())
    }

    fn literal(&mut self) -> Result<Literal, SkipReason> {
        self.pos += 1;
        let mut lexical = String::new();
        let mut run = self.pos;
        loop {
            let Some(b) = self.peek() else {
                return Err(SkipReason::Truncated);
            };
            match b {
                b'"' => {
                    lexical.push_str(&self.text[run..self.pos]);
                    self.pos += 1;
                    break;
                }
                b'\\' => {
                    lexical.push_str(&self.text[run..self.pos]);
                    self.pos += 1;
                    let c = match self.bump() {
                        Some(b't') => '\t',
                        Some(b'b') => '\u{8}',
                        Some(b'n') => '\n',
                        Some(b'r') => '\r',
                        Some(b'f') => '\u{C}',
                        Some(b'"') => '"',
                        Some(b'\'') => '\'',
                        Some(b'\\') => '\\',
                        Some(b'u') => self.hex(4)?,
                        Some(b'U') => self.hex(8)?,
                        None => return Err(SkipReason::Truncated),
                        _ => return Err(SkipReason::BadEscape),
                    };
                    lexical.push(c);
                    run = self.pos;
                }
                _ => self.pos += 1,
            }
        }
        match self.peek() {
            Some(b'@') => {
                self.pos += 1;
                let tag = self.language_tag()?;
                Ok(Literal::lang(lexical, tag))
            }
            Some(b'^') => {
                self.pos += 1;
                match self.bump() {
                    Some(b'^') => {}
                    None => return Err(SkipReason::Truncated),
                    _ => return Err(SkipReason::Syntax),
                }
                match self.peek() {
                    Some(b'<') => Ok(Literal::typed(lexical, self.iri()?)),
                    None => Err(SkipReason::Truncated),
                    _ => Err(SkipReason::Syntax),
                }
            }
            _ => Ok(Literal::plain(lexical)),
        }
    }

    fn language_tag(&mut self) -> Result<String, SkipReason> {
        let start = self.pos;
        let mut subtag_len = 0;
        let mut first = true;
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_alphabetic() || (!first && b.is_ascii_digit()) => {
                    subtag_len += 1;
                    self.pos += 1;
                }
                Some(b'-') if subtag_len > 0 => {
                    first = false;
                    subtag_len = 0;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        if subtag_len == 0 {
            return Err(if self.peek().is_none() {
                SkipReason::Truncated
            } else {
                SkipReason::Syntax
            });
        }
        Ok(self.text[start..self.pos].to_owned())
    }
}

fn is_forbidden_in_iri(c: char) -> bool {
    matches!(c, '\0'..=' ' | '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
}

fn has_scheme(iri: &str) -> bool {
    let Some(colon) = iri.find(':') else {
        return false;
    };
    let scheme = &iri.as_bytes()[..colon];
    !scheme.is_empty()
        && scheme[0].is_ascii_alphabetic()
        && scheme
            .iter()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'+' | b'-' | b'.'))
}

fn write_iri(f: &mut fmt::Formatter<'_>, iri: &str) -> fmt::Result {
    write!(f, "<{iri}>")
}

fn write_lexical(f: &mut fmt::Formatter<'_>, lexical: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in lexical.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            _ => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write_iri(f, iri),
            Term::Blank(label) => write!(f, "_:{label}"),
            Term::Literal(lit) => {
                write_lexical(f, &lit.lexical_form)?;
                if let Some(tag) = &lit.language_tag {
                    write!(f, "@{tag}")
                } else if let Some(dt) = &lit.datatype {
                    f.write_str("^^")?;
                    write_iri(f, dt)
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Serializes as one N-Quads line without the trailing newline.
impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.subject)?;
        write_iri(f, &self.predicate)?;
        write!(f, " {}", self.object)?;
        if let Some(ctx) = &self.context {
            write!(f, " {ctx}")?;
        }
        f.write_str(" .")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub line: u64,
    pub reason: SkipReason,
}

/// Counters for one pass over a snapshot.
///
/// `lines_total = quads_emitted + lines_skipped + lines_ignored`, where
/// ignored lines are blanks and comments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub lines_total: u64,
    pub quads_emitted: u64,
    pub lines_skipped: u64,
    pub lines_ignored: u64,
    pub first_error_samples: Vec<ErrorSample>,
}

impl ParseStats {
    fn record_skip(&mut self, line: u64, reason: SkipReason) {
        if reason.is_ignorable() {
            self.lines_ignored += 1;
            return;
        }
        self.lines_skipped += 1;
        if self.first_error_samples.len() < MAX_ERROR_SAMPLES {
            self.first_error_samples.push(ErrorSample { line, reason });
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ParseStats serializes")
    }
}

#[derive(Debug, Error)]
#[error("read failed after {} lines: {source}", stats.lines_total)]
pub struct IngestError {
    #[source]
    pub source: io::Error,
    pub stats: ParseStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    None,
    Gzip,
}

impl Compression {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("gz") => Compression::Gzip,
            _ => Compression::None,
        }
    }
}

/// Single-pass iterator over the quads of one snapshot.
///
/// Yields `Err` at most once, on an I/O failure, carrying the stats
/// accumulated up to that point; iteration ends afterwards.
pub struct QuadStream<R> {
    reader: R,
    snapshot_date: NaiveDate,
    stats: ParseStats,
    buf: Vec<u8>,
    done: bool,
}

pub type BoxedQuadStream = QuadStream<Box<dyn BufRead + Send>>;

impl<R: BufRead> QuadStream<R> {
    pub fn new(reader: R, snapshot_date: NaiveDate) -> Self {
        QuadStream {
            reader,
            snapshot_date,
            stats: ParseStats::default(),
            buf: Vec::with_capacity(512),
            done: false,
        }
    }

    pub fn snapshot_date(&self) -> NaiveDate {
        self.snapshot_date
    }

    pub fn stats(&self) -> &ParseStats {
        &self.stats
    }

    pub fn into_stats(self) -> ParseStats {
        self.stats
    }

    /// Reads one physical line into `buf`. Returns `Ok(None)` at EOF and
    /// `Ok(Some(false))` when the line exceeded [`MAX_LINE_BYTES`].
    fn read_line(&mut self) -> io::Result<Option<bool>> {
        self.buf.clear();
        let mut oversized = false;
        let mut any = false;
        loop {
            let available = match self.reader.fill_buf() {
                Ok(b) => b,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            if available.is_empty() {
                return Ok(any.then_some(!oversized));
            }
            any = true;
            let (chunk, consumed, finished) = match available.iter().position(|&b| b == b'\n') {
                Some(i) => (&available[..i], i + 1, true),
                None => (available, available.len(), false),
            };
            if !oversized {
                if self.buf.len() + chunk.len() > MAX_LINE_BYTES {
                    oversized = true;
                    self.buf.clear();
                } else {
                    self.buf.extend_from_slice(chunk);
                }
            }
            self.reader.consume(consumed);
            if finished {
                return Ok(Some(!oversized));
            }
        }
    }
}

impl<R: BufRead> Iterator for QuadStream<R> {
    type Item = std::result::Result<Quad, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let within_limit = match self.read_line() {
                Ok(Some(ok)) => ok,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(source) => {
                    self.done = true;
                    return Some(Err(IngestError {
                        source,
                        stats: self.stats.clone(),
                    }));
                }
            };
            self.stats.lines_total += 1;
            let line_no = self.stats.lines_total;
            if !within_limit {
                self.stats.record_skip(line_no, SkipReason::Oversized);
                continue;
            }
            if self.buf.last() == Some(&b'\r') {
                self.buf.pop();
            }
            let parsed = match std::str::from_utf8(&self.buf) {
                Ok(line) => parse_quad_line(line),
                Err(_) => Err(SkipReason::InvalidUtf8),
            };
            match parsed {
                Ok(stmt) => {
                    self.stats.quads_emitted += 1;
                    return Some(Ok(stmt.dated(self.snapshot_date)));
                }
                Err(reason) => self.stats.record_skip(line_no, reason),
            }
        }
        None
    }
}

/// Wraps a byte source (optionally gzip-compressed) as a quad stream.
pub fn stream_snapshot<R>(
    source: R,
    compression: Compression,
    snapshot_date: NaiveDate,
) -> BoxedQuadStream
where
    R: Read + Send + 'static,
{
    let reader: Box<dyn BufRead + Send> = match compression {
        Compression::None => Box::new(BufReader::with_capacity(1 << 16, source)),
        Compression::Gzip => Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(BufReader::new(source)),
        )),
    };
    QuadStream::new(reader, snapshot_date)
}

/// Opens a snapshot file, inferring gzip from a `.gz` extension.
pub fn open_snapshot(path: &Path, snapshot_date: NaiveDate) -> Result<BoxedQuadStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(stream_snapshot(
        file,
        Compression::from_path(path),
        snapshot_date,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotEntry {
    pub date: NaiveDate,
    pub path: PathBuf,
}

/// Corpus manifest: one `<date-ISO8601> <path>` line per snapshot file.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotManifest {
    pub entries: Vec<SnapshotEntry>,
}

impl SnapshotManifest {
    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| Error::Manifest {
                origin: origin.to_owned(),
                line: idx + 1,
                message: message.to_owned(),
            };
            let (date, path) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad("expected `<date> <path>`"))?;
            let date = parse_date(date).ok_or_else(|| bad("unparseable date"))?;
            let path = Path::new(path.trim());
            entries.push(SnapshotEntry {
                date,
                path: base_dir.join(path),
            });
        }
        // stable, so shards of one date keep manifest order
        entries.sort_by_key(|e| e.date);
        Ok(SnapshotManifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<_> = self.entries.iter().map(|e| e.date).collect();
        dates.dedup();
        dates
    }
}
