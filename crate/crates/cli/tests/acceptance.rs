//! Acceptance criteria. Runs as a plain binary so that each criterion's
//! verdict line is printed even when everything passes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus};
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use kgvo::adoption::{compute_adoption, unused_terms, vocab_stats};
use kgvo::corpus::{generate, CorpusSpec, GeneratedCorpus, NoiseSpec, PlantedUsage, VocabSpec};
use kgvo::diff::{diff_versions, ChangeKind};
use kgvo::presets::{cito, gn, ScheduleBuilder};
use kgvo::usage::UsageKey;
use kgvo::{build_change_log, Pld, SnapshotUsage, SuffixRules, TermKind, VocabAdoptionStats, VocabVersion};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KGVO: &str = env!("CARGO_BIN_EXE_kgvo");
const PSL: &str = include_str!("../../core/data/public_suffix_list.dat");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

struct Run {
    status: ExitStatus,
    stderr: String,
    elapsed: Duration,
}

fn kgvo(args: &[&str]) -> Run {
    let start = Instant::now();
    let out = Command::new(KGVO).args(args).output().expect("spawn kgvo");
    Run {
        status: out.status,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        elapsed: start.elapsed(),
    }
}

fn kgvo_ok(args: &[&str]) -> Result<Run, String> {
    let r = kgvo(args);
    ensure!(r.status.success(), "kgvo {} exited with {}: {}", args.join(" "), r.status, r.stderr);
    Ok(r)
}

/// Peak resident set of any waited-for child so far, in bytes.
fn children_peak_rss() -> u64 {
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, &mut usage) };
    // kilobytes on Linux
    usage.ru_maxrss as u64 * 1024
}

fn read(p: &Path) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

/// Header line followed by the remaining lines sorted.
fn canonical(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.lines().collect();
    if lines.len() > 1 {
        lines[1..].sort_unstable();
    }
    lines
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(rd) = fs::read_dir(&dir) else { continue };
        for e in rd {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn gen_cli(spec: &CorpusSpec, dir: &Path) -> Result<PathBuf, String> {
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    let out = dir.join("corpus");
    kgvo_ok(&["gen", "--spec", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    Ok(out)
}

fn cfg_arg(corpus: &Path) -> String {
    corpus.join("kgvo.toml").display().to_string()
}

// 1 ---------------------------------------------------------------------

fn random_version(rng: &mut ChaCha8Rng, date: NaiveDate) -> (VocabVersion, BTreeMap<String, bool>) {
    const NS: &str = "http://r.example.org/v#";
    let n = rng.random_range(0..=200);
    let mut v = VocabVersion::new("R", NS, date);
    let mut truth = BTreeMap::new();
    for _ in 0..n {
        let iri = format!("{NS}t{}", rng.random_range(0..300));
        let dep = rng.random_bool(0.1);
        let kind = if rng.random_bool(0.3) { TermKind::Class } else { TermKind::Property };
        v.insert(iri.clone(), kind, dep);
        truth.insert(iri, dep);
    }
    (v, truth)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (v1, a) = random_version(&mut rng, d("2015-01-01"));
        let (v2, b) = random_version(&mut rng, d("2016-01-01"));
        let got: BTreeSet<(ChangeKind, String)> = diff_versions(&v1, &v2)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|e| (e.kind, e.term_iri))
            .collect();
        let mut want = BTreeSet::new();
        for t in b.keys().filter(|t| !a.contains_key(*t)) {
            want.insert((ChangeKind::Added, t.clone()));
        }
        for t in a.keys().filter(|t| !b.contains_key(*t)) {
            want.insert((ChangeKind::Removed, t.clone()));
        }
        for (t, dep) in &b {
            let before = a.get(t).copied().unwrap_or(false);
            if *dep && !before {
                want.insert((ChangeKind::Deprecated, t.clone()));
            }
            if !*dep && a.get(t) == Some(&true) {
                want.insert((ChangeKind::Undeprecated, t.clone()));
            }
        }
        mismatches += usize::from(got != want);
    }
    let t = start.elapsed();
    ensure!(mismatches == 0, "{mismatches} of 1000 pairs differ from the set-difference oracle");
    ensure!(t < Duration::from_secs(5), "took {t:.2?}");
    Ok(format!("1000 pairs identical, {t:.2?}"))
}

// 2 ---------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let local = |iri: &str| iri.rsplit(['#', '/']).next().unwrap().to_owned();
    let gn = build_change_log(&gn().to_versions().unwrap()).unwrap();
    let names: BTreeSet<String> = gn.events_of(ChangeKind::Recreated).map(|e| local(&e.term_iri)).collect();
    let expected: BTreeSet<String> = ["alternateName", "name", "shortName"].map(String::from).into();
    ensure!(gn.count(ChangeKind::Recreated) == 3 && names == expected, "GN recreated {names:?}");
    let months: BTreeSet<String> =
        gn.events_of(ChangeKind::Recreated).map(|e| e.to_version.format("%Y-%m").to_string()).collect();
    ensure!(months == ["2010-10", "2012-02"].map(String::from).into(), "GN recreation months {months:?}");
    let cito = build_change_log(&cito().to_versions().unwrap()).unwrap();
    let n = cito.count(ChangeKind::Recreated);
    ensure!(n == 18, "CiTO recreated {n}");
    Ok("GN 3 (name, alternateName, shortName), CiTO 18".into())
}

// 3 ---------------------------------------------------------------------

fn two_version(id: &str, v2: &str, new: usize) -> VocabSpec {
    ScheduleBuilder::new(id, &format!("http://{}.example.org/ns#", id.to_lowercase()))
        .version("2014-06-01")
        .classes(1)
        .version(v2)
        .properties(new)
        .build()
}

fn planted(vocab: &str, term: &str, pld: Option<&str>, snapshot: &str, count: u64) -> PlantedUsage {
    PlantedUsage {
        vocab: vocab.into(),
        term: term.into(),
        pld: pld.map(Into::into),
        snapshot: d(snapshot),
        count,
    }
}

fn criterion_3(work: &Path) -> Outcome {
    let spec = CorpusSpec {
        seed: 3,
        snapshots: vec![d("2015-01-01"), d("2015-01-08"), d("2015-01-29")],
        gzip: false,
        vocabularies: vec![
            two_version("Tri", "2015-01-01", 3),
            two_version("One", "2015-01-01", 1),
            two_version("Pre", "2015-01-22", 1),
        ],
        usages: vec![
            planted("Tri", "property1", Some("a.org"), "2015-01-08", 5),
            planted("Tri", "property2", Some("b.org"), "2015-01-08", 1),
            planted("Tri", "property3", Some("a.org"), "2015-01-08", 2),
            planted("Tri", "property3", Some("a.org"), "2015-01-29", 2),
            planted("One", "property1", Some("c.org"), "2015-01-08", 1),
            planted("Pre", "property1", Some("d.org"), "2015-01-08", 1),
        ],
        noise: NoiseSpec { malformed_rate: 0.0, untracked_rate: 0.5, min_untracked: 10 },
    };
    let corpus = gen_cli(&spec, work)?;
    let cfg = cfg_arg(&corpus);
    kgvo_ok(&["index", "-c", &cfg])?;
    kgvo_ok(&["report", "-c", &cfg])?;
    let stats = read(&corpus.join("out/report/adoption_stats.csv"))?;
    let want = "vocab_id,new_terms,adopted,pct_used,instances,mu_days,sigma_days\n\
                One,1,1,100,1,7.00,\n\
                Pre,1,1,100,1,-14.00,\n\
                Tri,3,3,100,10,7.00,0.00\n";
    ensure!(stats == want, "adoption_stats.csv:\n{stats}");
    let adoption = read(&corpus.join("out/report/adoption.csv"))?;
    ensure!(adoption.contains(",2015-01-22,2015-01-08,-14,1,1\n"), "adoption.csv:\n{adoption}");

    // the same shapes straight from the library, in both float widths
    let ns = "http://x.example.org/ns#";
    let v1 = VocabVersion::new("X", ns, d("2015-01-01"));
    let mut v2 = v1.clone();
    v2.version_date = d("2015-02-01");
    for i in 0..3 {
        v2.insert(format!("{ns}t{i}"), TermKind::Class, false);
    }
    let log = build_change_log(&[v1, v2]).unwrap();
    let day = |n: u64| d("2015-02-01") + Days::new(n);
    let usage = |terms: &[usize], at: NaiveDate| {
        let counts = terms
            .iter()
            .map(|i| (UsageKey { term_iri: format!("{ns}t{i}"), pld: Some(Pld::from_resolved("e.org")) }, 1))
            .collect();
        SnapshotUsage::from_counts(at, counts)
    };
    let all = compute_adoption(&log, &[usage(&[0, 1, 2], day(7))]);
    let s: VocabAdoptionStats = vocab_stats("X", &all);
    ensure!(s.mu_days == Some(7.0) && s.sigma_days == Some(0.0), "{{7,7,7}} gave {s:?}");
    let s32: kgvo::VocabAdoptionStatsF32 = vocab_stats("X", &all);
    ensure!(s32.mu_days == Some(7.0) && s32.sigma_days == Some(0.0), "f32 {{7,7,7}} gave {s32:?}");
    let single = compute_adoption(&log, &[usage(&[0], day(7))]);
    let s: VocabAdoptionStats = vocab_stats("X", &single);
    ensure!(s.mu_days == Some(7.0) && s.sigma_days.is_none(), "{{7}} gave {s:?}");
    let early = compute_adoption(&log, &[usage(&[1], d("2015-01-18"))]);
    ensure!(early.iter().any(|r| r.lag_days == Some(-14)), "pre-publication lag missing");
    Ok("{7,7,7} -> 7.00/0.00, {7} -> 7.00/absent, pre-publication -> -14".into())
}

// 4 ---------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut seen = Vec::new();
    for (total, unused, pct) in [(31usize, 21usize, 68u32), (220, 158, 72), (34, 34, 100)] {
        let ns = "http://u.example.org/ns#";
        let mut universe = VocabVersion::new("U", ns, d("2016-01-01"));
        for i in 0..total {
            universe.insert(format!("{ns}t{i}"), TermKind::Property, false);
        }
        let counts = (unused..total)
            .map(|i| (UsageKey { term_iri: format!("{ns}t{i}"), pld: None }, 1 + i as u64))
            .collect();
        let tl = [SnapshotUsage::from_counts(d("2016-02-01"), counts)];
        let r = unused_terms(&universe, &tl).map_err(|e| e.to_string())?;
        ensure!(r.unused == unused && r.pct_unused == pct, "{total}/{unused}: {r:?}");
        seen.push(format!("{unused}/{total} -> {}%", r.pct_unused));
    }
    Ok(seen.join(", "))
}

// 5 ---------------------------------------------------------------------

fn e2e_spec(seed: u64) -> CorpusSpec {
    let snapshots: Vec<NaiveDate> = (0..10).map(|i| d("2013-01-06") + Days::new(7 * i)).collect();
    let vocabularies = vec![
        ScheduleBuilder::new("Alpha", "http://alpha.example.org/ns#")
            .version("2012-06-01")
            .classes(6)
            .properties(10)
            .version("2013-01-20")
            .deprecate("property1")
            .deprecate("Class2")
            .remove("property3")
            .properties(5)
            .version("2013-02-17")
            .undeprecate("property1")
            .classes(2)
            .build(),
        ScheduleBuilder::new("Beta", "http://beta.example.org/def/")
            .version("2012-11-11")
            .classes(4)
            .properties(4)
            .version("2013-01-27")
            .remove_oldest(2)
            .classes(3)
            .deprecate("property2")
            .build(),
        ScheduleBuilder::new("Gamma", "https://gamma.example.net/v#")
            .version("2012-01-01")
            .properties(12)
            .version("2012-12-24")
            .properties(4)
            .version("2013-01-13")
            .deprecate("property5")
            .properties(3)
            .version("2013-03-03")
            .classes(2)
            .build(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plds = [
        Some("example.org"),
        Some("data.gov.uk"),
        Some("foo.blogspot.com"),
        Some("univ.ac.jp"),
        Some("example.co.uk"),
        Some("dbpedia.org"),
        None,
    ];
    let mut candidates: Vec<(String, String)> = Vec::new();
    for v in &vocabularies {
        for e in v.versions.iter().flat_map(|x| &x.edits) {
            if let kgvo::corpus::Edit::Add { term, .. } = e {
                candidates.push((v.id.clone(), term.clone()));
            }
        }
    }
    let usages = (0..5000)
        .map(|_| {
            let (vocab, term) = candidates.choose(&mut rng).unwrap().clone();
            PlantedUsage {
                vocab,
                term,
                pld: plds.choose(&mut rng).unwrap().map(Into::into),
                snapshot: *snapshots.choose(&mut rng).unwrap(),
                count: 1,
            }
        })
        .collect();
    CorpusSpec {
        seed,
        snapshots,
        gzip: seed % 2 == 0,
        vocabularies,
        usages,
        noise: NoiseSpec { malformed_rate: 0.02, untracked_rate: 0.3, min_untracked: 0 },
    }
}

fn compare_with_truth(corpus: &Path) -> Result<usize, String> {
    let out = corpus.join("out");
    let truth = corpus.join("truth");
    let mut names: Vec<PathBuf> = files_under(&truth)
        .into_keys()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    names.sort();
    for rel in &names {
        let (got, want) = (read(&out.join(rel))?, read(&truth.join(rel))?);
        let (g, w) = (canonical(&got), canonical(&want));
        if let Some((a, b)) = g.iter().zip(&w).find(|(a, b)| a != b) {
            return Err(format!("{}: got {a:?}, truth {b:?}", rel.display()));
        }
        ensure!(g.len() == w.len(), "{}: {} lines, truth {}", rel.display(), g.len(), w.len());
    }
    Ok(names.len())
}

fn criterion_5(work: &Path) -> Outcome {
    let spec = e2e_spec(5);
    let planted: u64 = spec.usages.iter().map(|u| u.count).sum();
    ensure!(spec.usages.len() == 5000 && planted == 5000, "spec plants {planted}");
    let start = Instant::now();
    let corpus = gen_cli(&spec, work)?;
    let cfg = cfg_arg(&corpus);
    let diff = kgvo(&["diff", "-c", &cfg]);
    ensure!(diff.status.success(), "diff: {}", diff.stderr);
    kgvo_ok(&["index", "-c", &cfg])?;
    kgvo_ok(&["report", "-c", &cfg])?;
    let t = start.elapsed();
    let compared = compare_with_truth(&corpus)?;
    for must in ["changes/Alpha.csv", "usage/2013-03-10.csv", "report/adoption.csv", "report/deprecated_usage.csv", "report/top_plds.csv"] {
        ensure!(corpus.join("truth").join(must).exists(), "truth lacks {must}");
    }
    let counted: u64 = files_under(&corpus.join("out/usage"))
        .values()
        .flat_map(|b| String::from_utf8(b.clone()).unwrap().lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    ensure!(counted == 5000, "usage files count {counted} uses");
    ensure!(t < Duration::from_secs(30), "took {t:.2?}");
    Ok(format!("{compared} output files equal to ground truth, {t:.2?}"))
}

// 6 ---------------------------------------------------------------------

fn sample_hosts(n: usize, seed: u64) -> Vec<String> {
    let rules: Vec<&str> = PSL.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with("//")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(1..9)).map(|_| *b"abcdefghijklmnopqrstuvwxyz0123456789-".choose(rng).unwrap() as char).collect::<String>()
            .trim_matches('-')
            .to_owned()
            + "x"
    };
    (0..n)
        .map(|i| {
            let mut host = if i % 25 == 0 {
                format!("{}.unlisted{}", label(&mut rng), i)
            } else {
                let r = rules.choose(&mut rng).unwrap().trim_start_matches('!');
                r.split('.').map(|l| if l == "*" { label(&mut rng) } else { l.to_owned() }).collect::<Vec<_>>().join(".")
            };
            for _ in 0..rng.random_range(0..3) {
                host = format!("{}.{host}", label(&mut rng));
            }
            if i % 10 == 0 {
                host = host.to_uppercase();
            }
            host
        })
        .collect()
}

fn criterion_6() -> Outcome {
    use publicsuffix::{List, Psl};
    let reference: List = PSL.parse().map_err(|e| format!("{e:?}"))?;
    let ours = SuffixRules::bundled();
    let hosts = sample_hosts(1000, 6);
    let mut disagree = Vec::new();
    for h in &hosts {
        let lower = h.to_lowercase();
        let (unicode, _) = idna::domain_to_unicode(&lower);
        let want = reference.domain(unicode.as_bytes()).map(|dom| {
            std::str::from_utf8(dom.as_bytes())
                .unwrap()
                .split('.')
                .map(|l| idna::domain_to_ascii(l).unwrap())
                .collect::<Vec<_>>()
                .join(".")
        });
        let got = ours.extract_pld(&format!("http://{h}/resource")).map(|p| p.as_str().to_owned());
        if got != want {
            disagree.push(format!("{h}: {got:?} vs {want:?}"));
        }
    }
    ensure!(disagree.is_empty(), "{} disagreements, first {:?}", disagree.len(), disagree.first());
    for t in ["_:b12", "\"http://example.org/\"", "urn:uuid:6e8bc430-9c3a-11d9-9669-0800200c9a66", "urn:isbn:123"] {
        ensure!(ours.extract_pld(t).is_none(), "{t} resolved to a PLD");
    }
    Ok("1000/1000 hosts agree; blank nodes, literals and urn: give none".into())
}

// 7 ---------------------------------------------------------------------

fn criterion_7(work: &Path) -> Outcome {
    let terms: Vec<String> = (1..=10).map(|i| format!("property{i}")).collect();
    let spec = CorpusSpec {
        seed: 7,
        snapshots: vec![d("2017-04-02")],
        gzip: false,
        vocabularies: vec![ScheduleBuilder::new("Big", "http://big.example.org/ns#")
            .version("2016-01-01")
            .properties(5)
            .version("2017-01-01")
            .properties(5)
            .build()],
        usages: terms
            .iter()
            .enumerate()
            .map(|(i, t)| planted("Big", t, Some(["a.org", "b.co.uk", "c.com"][i % 3]), "2017-04-02", 10_000))
            .collect(),
        noise: NoiseSpec { malformed_rate: 0.0, untracked_rate: 0.0, min_untracked: 900_000 },
    };
    let g: GeneratedCorpus = generate(&spec, &work.join("corpus")).map_err(|e| e.to_string())?;
    let bytes = fs::metadata(&g.snapshot_files[0]).unwrap().len();
    let cfg = g.config.display().to_string();
    let before = children_peak_rss();
    let run = kgvo_ok(&["index", "-c", &cfg])?;
    let peak = children_peak_rss().max(before);
    let stats = read(&g.root.join("out/parse_stats.csv"))?;
    ensure!(stats.lines().nth(1) == Some("2017-04-02,1000001,1000000,0,1"), "parse_stats:\n{stats}");
    let usage = read(&g.root.join("out/usage/2017-04-02.csv"))?;
    let total: u64 = usage.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    ensure!(total == 100_000, "counted {total} planted uses");
    let mb = peak as f64 / (1024.0 * 1024.0);
    ensure!(peak < 256 * 1024 * 1024, "peak RSS {mb:.1} MB");
    ensure!(run.elapsed < Duration::from_secs(30), "took {:.2?}", run.elapsed);
    Ok(format!(
        "1,000,000 quads ({:.0} MB) in {:.2?}, peak RSS {mb:.1} MB",
        bytes as f64 / 1e6,
        run.elapsed
    ))
}

// 8 ---------------------------------------------------------------------

fn criterion_8(work: &Path) -> Outcome {
    let snapshots = [d("2018-01-07"), d("2018-02-04"), d("2018-03-04")];
    let spec = CorpusSpec {
        seed: 8,
        snapshots: snapshots.to_vec(),
        gzip: true,
        vocabularies: vec![two_version("Rob", "2018-01-20", 4)],
        usages: snapshots
            .iter()
            .flat_map(|s| (1..=4).map(move |i| planted("Rob", &format!("property{i}"), Some("r.org"), &s.to_string(), 1_250)))
            .collect(),
        noise: NoiseSpec { malformed_rate: 0.05, untracked_rate: 0.0, min_untracked: 90_000 },
    };
    let corpus = gen_cli(&spec, work)?;
    let cfg = cfg_arg(&corpus);
    kgvo_ok(&["index", "-c", &cfg])?;
    let stats = read(&corpus.join("out/parse_stats.csv"))?;
    // 95,000 well-formed quads per snapshot, so 5% of data lines is 5,000
    let mut skipped = 0;
    for line in stats.lines().skip(1) {
        let f: Vec<u64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        ensure!(f[1] == 95_000 && f[2] == 5_000, "snapshot row {line}");
        ensure!(f[0] == f[1] + f[2] + f[3], "row does not add up: {line}");
        skipped += f[2];
    }
    ensure!(stats == read(&corpus.join("truth/parse_stats.csv"))?, "parse stats differ from truth");
    Ok(format!("{skipped} planted malformed lines skipped over 3 snapshots, no aborts"))
}

// 9 ---------------------------------------------------------------------

fn criterion_9(work: &Path) -> Outcome {
    let corpus = gen_cli(&e2e_spec(9), work)?;
    let cfg = cfg_arg(&corpus);
    kgvo_ok(&["index", "-c", &cfg])?;
    let run = |threads: &str| -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
        let out = Command::new(KGVO)
            .args(["report", "-c", &cfg])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        ensure!(out.status.success(), "report failed: {}", String::from_utf8_lossy(&out.stderr));
        let mut files = files_under(&corpus.join("out/report"));
        files.insert("selection.csv".into(), fs::read(corpus.join("out/selection.csv")).unwrap());
        fs::remove_dir_all(corpus.join("out/report")).unwrap();
        Ok(files)
    };
    let a = run("1")?;
    let b = run("4")?;
    let c = run("4")?;
    ensure!(a.len() >= 10, "only {} report files", a.len());
    let differing: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k) || b.get(*k) != c.get(*k)).collect();
    ensure!(differing.is_empty() && a.len() == b.len(), "differing files {differing:?}");
    Ok(format!("{} files byte-identical across 3 runs", a.len()))
}

// 10 --------------------------------------------------------------------

fn criterion_10(work: &Path) -> Outcome {
    let snapshots: Vec<NaiveDate> = (1..=6).map(|m| NaiveDate::from_ymd_opt(2016, m, 1).unwrap()).collect();
    let mut vocabularies = Vec::new();
    let mut usages = Vec::new();
    let mut expected = BTreeMap::new();
    for i in 0..20u32 {
        let (single, outside, unused) = (i & 1 != 0, i & 2 != 0, i & 4 != 0);
        let id = format!("V{i:02}");
        let mut b = ScheduleBuilder::new(&id, &format!("http://v{i}.example.org/ns#"));
        let dates: &[&str] = match (single, outside) {
            (true, true) => &["2013-05-01"],
            (true, false) => &["2016-02-15"],
            (false, true) => &["2014-01-01", "2015-07-01"],
            (false, false) => &["2015-01-01", "2016-03-10"],
        };
        for date in dates {
            b = b.version(date).classes(2).properties(2);
        }
        vocabularies.push(b.build());
        if !unused {
            usages.push(planted(&id, "property1", Some("pub.example.org"), "2016-04-01", 3));
        }
        let mut reasons = Vec::new();
        if single {
            reasons.push("fewer-than-two-versions");
        }
        if outside {
            reasons.push("versions-outside-corpus-window");
        }
        if unused {
            reasons.push("no-direct-use");
        }
        expected.insert(id, reasons.join(";"));
    }
    let spec = CorpusSpec {
        seed: 10,
        snapshots,
        gzip: false,
        vocabularies,
        usages,
        noise: NoiseSpec { malformed_rate: 0.01, untracked_rate: 0.5, min_untracked: 50 },
    };
    let corpus = gen_cli(&spec, work)?;
    let cfg = cfg_arg(&corpus);
    kgvo_ok(&["index", "-c", &cfg])?;
    let diff = kgvo(&["diff", "-c", &cfg]);
    ensure!(diff.status.code() == Some(2), "diff exit status {}", diff.status);
    let report = kgvo(&["report", "-c", &cfg]);
    ensure!(report.status.code() == Some(2), "report exit status {}", report.status);

    let ineligible = read(&corpus.join("out/ineligible.csv"))?;
    let want_inel: String = std::iter::once("vocab_id,reasons\n".to_owned())
        .chain(expected.iter().filter(|(_, r)| !r.is_empty()).map(|(id, r)| format!("{id},{r}\n")))
        .collect();
    ensure!(ineligible == want_inel, "ineligible.csv:\n{ineligible}");
    let selection = read(&corpus.join("out/selection.csv"))?;
    let want_sel: String = std::iter::once("vocab_id,eligible,reasons\n".to_owned())
        .chain(expected.iter().map(|(id, r)| format!("{id},{},{r}\n", r.is_empty())))
        .collect();
    ensure!(selection == want_sel, "selection.csv:\n{selection}");
    let n_bad = expected.values().filter(|r| !r.is_empty()).count();
    Ok(format!("20 verdicts exact, {n_bad} ineligible with their violated criteria"))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and similar harness probes
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let root = tempfile::tempdir().expect("temp dir");
    let dir = |n: u32| {
        let p = root.path().join(format!("c{n}"));
        fs::create_dir_all(&p).unwrap();
        p
    };
    // the streaming bound runs first so the child peak RSS is its own
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (7, "streaming bound", Box::new(|| criterion_7(&dir(7)))),
        (1, "diff oracle equivalence", Box::new(criterion_1)),
        (2, "recreation detection", Box::new(criterion_2)),
        (3, "adoption statistics", Box::new(|| criterion_3(&dir(3)))),
        (4, "unused-percentage arithmetic", Box::new(criterion_4)),
        (5, "end-to-end oracle", Box::new(|| criterion_5(&dir(5)))),
        (6, "PLD conformance", Box::new(criterion_6)),
        (8, "robustness", Box::new(|| criterion_8(&dir(8)))),
        (9, "report determinism", Box::new(|| criterion_9(&dir(9)))),
        (10, "selection criteria", Box::new(|| criterion_10(&dir(10)))),
    ];
    let mut results = BTreeMap::new();
    for (n, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(|| f())).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        results.insert(n, (name, outcome));
    }
    let mut failed = 0;
    for (n, (name, outcome)) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
