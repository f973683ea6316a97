//! Version schedules for the thirteen studied vocabularies.
//!
//! Term names are synthetic except where a term is discussed by name. Each
//! schedule reproduces the published number of versions, the number of
//! counted changes and the size of the all-versions term union.

use chrono::NaiveDate;

use crate::corpus::{Edit, VersionSpec, VocabSpec};
use crate::vocab::TermKind;

fn date(s: &str) -> NaiveDate {
    s.parse().expect("preset date")
}

/// Incremental schedule builder with generated term names.
pub struct ScheduleBuilder {
    spec: VocabSpec,
    classes: usize,
    properties: usize,
    /// Present terms in insertion order, for "remove the oldest" edits.
    live: Vec<String>,
}

impl ScheduleBuilder {
    pub fn new(id: &str, namespace: &str) -> Self {
        ScheduleBuilder {
            spec: VocabSpec {
                id: id.to_owned(),
                namespace: namespace.to_owned(),
                versions: Vec::new(),
            },
            classes: 0,
            properties: 0,
            live: Vec::new(),
        }
    }

    pub fn version(mut self, d: &str) -> Self {
        self.spec.versions.push(VersionSpec {
            date: date(d),
            edits: Vec::new(),
        });
        self
    }

    fn push(&mut self, e: Edit) {
        self.spec.versions.last_mut().expect("version() first").edits.push(e);
    }

    pub fn named(mut self, term: &str, kind: TermKind) -> Self {
        self.push(Edit::add(term, kind));
        self.live.push(term.to_owned());
        self
    }

    pub fn classes(mut self, n: usize) -> Self {
        for _ in 0..n {
            self.classes += 1;
            let t = format!("Class{}", self.classes);
            self = self.named(&t, TermKind::Class);
        }
        self
    }

    pub fn properties(mut self, n: usize) -> Self {
        for _ in 0..n {
            self.properties += 1;
            let t = format!("property{}", self.properties);
            self = self.named(&t, TermKind::Property);
        }
        self
    }

    pub fn remove(mut self, term: &str) -> Self {
        self.push(Edit::Remove { term: term.to_owned() });
        self.live.retain(|t| t != term);
        self
    }

    /// Removes the `n` oldest present terms.
    pub fn remove_oldest(mut self, n: usize) -> Self {
        let victims: Vec<String> = self.live.iter().take(n).cloned().collect();
        for v in victims {
            self = self.remove(&v);
        }
        self
    }

    pub fn deprecate(mut self, term: &str) -> Self {
        self.push(Edit::Deprecate { term: term.to_owned() });
        self
    }

    pub fn undeprecate(mut self, term: &str) -> Self {
        self.push(Edit::Undeprecate { term: term.to_owned() });
        self
    }

    pub fn build(self) -> VocabSpec {
        self.spec
    }
}

/// GeoNames: seven versions; `name`, `alternateName` and `shortName` are
/// deprecated and later recreated, `Country` stays deprecated.
///
/// `shortName` is dated as published: deprecated in May 2010, before its
/// stated creation in September 2010. The schedule introduces it already
/// deprecated in the May 2010 version instead of reordering the dates.
pub fn gn() -> VocabSpec {
    let b = ScheduleBuilder::new("GN", "http://www.geonames.org/ontology#")
        .version("2006-10-01")
        .named("name", TermKind::Property)
        .named("alternateName", TermKind::Property)
        .named("Country", TermKind::Class)
        .named("Feature", TermKind::Class)
        .classes(2)
        .properties(10)
        .version("2007-03-01")
        .properties(1)
        .version("2010-05-01")
        .named("shortName", TermKind::Property)
        .deprecate("shortName")
        .properties(1)
        .version("2010-09-26")
        .deprecate("name")
        .deprecate("alternateName")
        .deprecate("Country")
        .classes(5)
        .properties(16)
        .version("2010-10-09")
        .undeprecate("name")
        .properties(1)
        .version("2012-02-15")
        .undeprecate("alternateName")
        .undeprecate("shortName")
        .properties(1)
        .version("2012-10-01")
        .properties(1);
    b.build()
}

/// Citation Typing Ontology: 94 classes and 36 properties, then one class
/// and 50 properties (18 of the originals deprecated), then 91 properties
/// with the 18 deprecated ones restored.
pub fn cito() -> VocabSpec {
    let mut b = ScheduleBuilder::new("CiTO", "http://purl.org/spar/cito/")
        .version("2010-03-01")
        .classes(94)
        .properties(36)
        .version("2014-05-01");
    for i in 1..=94 {
        b = b.remove(&format!("Class{i}"));
    }
    b = b.named("CitationAct", TermKind::Class);
    for i in 1..=18 {
        b = b.deprecate(&format!("property{i}"));
    }
    for i in 19..=36 {
        b = b.remove(&format!("property{i}"));
    }
    b = b.properties(32).version("2015-03-01");
    for i in 1..=18 {
        b = b.undeprecate(&format!("property{i}"));
    }
    for i in 37..=43 {
        b = b.remove(&format!("property{i}"));
    }
    b.properties(48).build()
}

/// Two versions: `base` initial terms, then `added` new ones and the
/// `removed` oldest ones dropped. About a quarter of the terms are classes.
fn two_versions(id: &str, ns: &str, dates: [&str; 2], base: usize, added: usize, removed: usize) -> VocabSpec {
    ScheduleBuilder::new(id, ns)
        .version(dates[0])
        .classes(base / 4)
        .properties(base - base / 4)
        .version(dates[1])
        .remove_oldest(removed)
        .classes(added / 4)
        .properties(added - added / 4)
        .build()
}

pub fn prov() -> VocabSpec {
    ScheduleBuilder::new("Prov", "http://www.w3.org/ns/prov#")
        .version("2011-12-13")
        .classes(12)
        .properties(38)
        .version("2012-05-03")
        .remove_oldest(10)
        .classes(10)
        .properties(30)
        .version("2012-07-24")
        .remove_oldest(15)
        .classes(5)
        .properties(15)
        .version("2012-12-11")
        .remove_oldest(20)
        .classes(5)
        .properties(15)
        .version("2013-04-30")
        .remove_oldest(30)
        .classes(3)
        .properties(10)
        .build()
}

pub fn voaf() -> VocabSpec {
    ScheduleBuilder::new("voaf", "http://purl.org/vocommons/voaf#")
        .version("2011-03-01")
        .classes(4)
        .properties(12)
        .version("2011-11-01")
        .properties(3)
        .version("2013-04-01")
        .named("occurrenceInVocabularies", TermKind::Property)
        .properties(2)
        .version("2013-05-01")
        .properties(2)
        .build()
}

/// All thirteen schedules, ordered by id as listed in publications.
pub fn lod13() -> Vec<VocabSpec> {
    vec![
        two_versions("ADMS", "http://www.w3.org/ns/adms#", ["2012-04-24", "2013-08-01"], 26, 5, 13),
        cito(),
        two_versions("Cube", "http://purl.org/linked-data/cube#", ["2012-04-05", "2014-01-16"], 31, 6, 0),
        two_versions("DCAT", "http://www.w3.org/ns/dcat#", ["2012-04-05", "2014-01-16"], 10, 13, 0),
        two_versions("emp", "http://purl.org/ctic/empleo/oferta#", ["2011-06-01", "2013-04-01"], 30, 1, 0),
        two_versions("geom", "http://data.ign.fr/def/geometrie#", ["2014-06-01", "2016-06-28"], 32, 2, 0),
        gn(),
        two_versions("mo", "http://purl.org/ontology/mo/", ["2010-11-28", "2013-07-22"], 162, 46, 0),
        two_versions("oa", "http://www.w3.org/ns/oa#", ["2013-02-08", "2016-06-01"], 42, 21, 10),
        two_versions("org", "http://www.w3.org/ns/org#", ["2010-06-01", "2014-01-16"], 36, 8, 0),
        prov(),
        voaf(),
        two_versions("xkos", "http://rdf-vocabulary.ddialliance.org/xkos#", ["2013-01-01", "2014-01-01"], 34, 1, 0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusSpec;

    #[test]
    fn presets_are_valid_specs() {
        let spec = CorpusSpec {
            seed: 1,
            snapshots: vec![],
            gzip: false,
            vocabularies: lod13(),
            usages: vec![],
            noise: Default::default(),
        };
        spec.validate().unwrap();
    }
}
