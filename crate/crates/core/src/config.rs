//! Pipeline run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dates::DateWindow;
use crate::error::{Error, Result};
use crate::pld::SuffixRules;
use crate::usage::Attribution;

/// Environment variable naming a public suffix list file.
pub const PSL_ENV: &str = "KGVO_PSL";

/// TOML run configuration. Relative paths resolve against the file's
/// directory.
///
/// ```toml
/// corpus_manifest = "snapshots/manifest.txt"
/// vocab_manifest = "vocabs/manifest.csv"
/// output_dir = "out"
/// attribution = "context-first"
/// start = "2012-01-01"
///
/// [namespaces]
/// GN = "http://www.geonames.org/ontology#"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_manifest: Option<PathBuf>,
    pub vocab_manifest: Option<PathBuf>,
    pub psl: Option<PathBuf>,
    #[serde(default)]
    pub attribution: Attribution,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Namespaces for manifests that lack a namespace column.
    #[serde(default)]
    pub namespaces: BTreeMap<String, String>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Which inputs a command needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Diff,
    Index,
    Report,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.corpus_manifest = cfg.corpus_manifest.map(|p| base_dir.join(p));
        cfg.vocab_manifest = cfg.vocab_manifest.map(|p| base_dir.join(p));
        cfg.psl = cfg.psl.map(|p| base_dir.join(p));
        cfg.output_dir = base_dir.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn window(&self) -> DateWindow {
        DateWindow::new(self.start, self.end)
    }

    /// Checks that the inputs `stage` reads exist and the date range is ordered.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        let mut problems = Vec::new();
        if !self.window().is_well_ordered() {
            problems.push("start date is after end date".to_owned());
        }
        let mut need = |name: &str, p: &Option<PathBuf>| match p {
            None => problems.push(format!("{name} is not set")),
            Some(p) if !p.exists() => problems.push(format!("{name} {} does not exist", p.display())),
            Some(_) => {}
        };
        need("vocab_manifest", &self.vocab_manifest);
        if stage == Stage::Index {
            need("corpus_manifest", &self.corpus_manifest);
        }
        if let Some(p) = &self.psl {
            if !p.exists() {
                problems.push(format!("psl {} does not exist", p.display()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Suffix rules from `psl`, else `$KGVO_PSL`, else the bundled list.
    pub fn suffix_rules(&self) -> Result<SuffixRules> {
        let from_env = std::env::var_os(PSL_ENV).map(PathBuf::from);
        match self.psl.as_ref().or(from_env.as_ref()) {
            Some(p) => SuffixRules::load(p),
            None => Ok(SuffixRules::bundled()),
        }
    }

    pub fn usage_dir(&self) -> PathBuf {
        self.output_dir.join("usage")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }
}
