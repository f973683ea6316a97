//! Vocabulary term evolution and adoption analytics over timestamped RDF
//! snapshot corpora.

pub mod adoption;
pub mod archive;
pub mod config;
pub mod corpus;
pub mod dates;
pub mod diff;
pub mod error;
pub mod ns;
pub mod pld;
pub mod presets;
pub mod quad;
pub mod report;
pub mod usage;
pub mod vocab;

pub use dates::DateWindow;
pub use diff::{build_change_log, check_selection, diff_versions, ChangeEvent, ChangeKind, ChangeLog};
pub use error::{Error, Result};
pub use pld::{Pld, SuffixRules};
pub use quad::{open_snapshot, parse_quad_line, Literal, ParseStats, Quad, Term};
pub use usage::{index_snapshot, Attribution, SnapshotUsage, TrackedTerms, UsageKey};
pub use vocab::{extract_terms, TermKind, TermRecord, VocabVersion};
pub use config::RunConfig;

pub type VocabAdoptionStats = adoption::AdoptionStats<f64>;
pub type VocabAdoptionStatsF32 = adoption::AdoptionStats<f32>;
