//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `INFUSE_BLESS=1` to rewrite the golden report.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Parser;
use infuse::algorithms::{
    aggregate_subsentences, aggregate_summary, infuse_k, infuse_sentence, sentli, summac_zs,
    RetrievalConfig,
};
use infuse::analysis::{extract_fragments, extractiveness, Fragment};
use infuse::cli::{cmd_evaluate, cmd_score, Cli, Command, TraceRecord, TRACES_FILE};
use infuse::domain::{Document, FaithfulLabel, NliVerdict, Sentence};
use infuse::error::ScorerError;
use infuse::ingest::read_canonical;
use infuse::metaeval::{bootstrap_compare, roc_auc, BootstrapConfig, Significance};
use infuse::scorer::{CountingScorer, LexicalScorer, NliScorer, ScoreRequest, TableScorer};
use infuse::TOY_CORPUS;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "river", "bridge", "council", "storm", "market", "school", "engine", "harbor", "forest",
    "tower", "signal", "crowd",
];

/// A verdict with probabilities in tenths, so ties are common.
fn quantized(rng: &mut impl Rng) -> NliVerdict {
    let e = rng.random_range(0..=10u32);
    let n = rng.random_range(0..=10 - e);
    let c = 10 - e - n;
    NliVerdict::new(e as f64 / 10.0, n as f64 / 10.0, c as f64 / 10.0).unwrap()
}

fn random_document(rng: &mut impl Rng, m: usize) -> Vec<String> {
    (0..m)
        .map(|i| {
            let len = rng.random_range(1..5);
            let words: Vec<&str> = (0..len)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect();
            format!("S{i} {}.", words.join(" "))
        })
        .collect()
}

/// Reference retrieval: rank by forward (+ reverse) entailment, score every
/// ranked prefix, then apply the stopping rule to the full neutral sequence.
fn simulate(
    sentences: &[String],
    hyp: &str,
    table: &dyn Fn(&str, &str) -> NliVerdict,
    reverse: bool,
) -> (usize, f64) {
    let m = sentences.len();
    let key: Vec<f64> = sentences
        .iter()
        .map(|s| {
            table(s, hyp).entailment
                + if reverse {
                    table(hyp, s).entailment
                } else {
                    0.0
                }
        })
        .collect();
    let mut order: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..m).collect();
    while !remaining.is_empty() {
        let mut best = 0;
        for p in 1..remaining.len() {
            if key[remaining[p]] > key[remaining[best]] {
                best = p;
            }
        }
        order.push(remaining.remove(best));
    }
    let prefixes: Vec<NliVerdict> = (1..=m)
        .map(|i| {
            let premise: Vec<&str> = order[..i].iter().map(|&j| sentences[j].as_str()).collect();
            table(&premise.join(" "), hyp)
        })
        .collect();
    for i in 2..=m {
        if prefixes[i - 1].neutral >= prefixes[i - 2].neutral {
            return (i - 1, prefixes[i - 2].entailment);
        }
    }
    (m, prefixes[m - 1].entailment)
}

fn algorithm_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hyp = "The hypothesis under test.";
    for case in 0..1000 {
        let m = rng.random_range(1..=8);
        let reverse = rng.random_bool(0.5);
        let texts = random_document(&mut rng, m);
        let mut entries: HashMap<(String, String), NliVerdict> = HashMap::new();
        for s in &texts {
            entries.insert((s.clone(), hyp.into()), quantized(&mut rng));
            entries.insert((hyp.into(), s.clone()), quantized(&mut rng));
        }
        // Every ordered multi-sentence premise the simulator may request gets
        // an entry drawn on demand, then the table is frozen for the run.
        let cell = std::cell::RefCell::new((entries, ChaCha8Rng::seed_from_u64(case)));
        let lookup = |p: &str, h: &str| -> NliVerdict {
            let mut guard = cell.borrow_mut();
            let (entries, rng) = &mut *guard;
            if let Some(v) = entries.get(&(p.to_owned(), h.to_owned())) {
                return *v;
            }
            let v = quantized(rng);
            entries.insert((p.to_owned(), h.to_owned()), v);
            v
        };
        let (want_count, want_e) = simulate(&texts, hyp, &lookup, reverse);
        let mut table = TableScorer::new("oracle");
        for ((p, h), v) in cell.into_inner().0 {
            table.insert(p, h, v);
        }

        let doc = Document::from_texts(&texts).unwrap();
        let sentence = Sentence::new(0, hyp).unwrap();
        let config = RetrievalConfig {
            use_reverse: reverse,
            ..RetrievalConfig::default()
        };
        let counting = CountingScorer::new(&table);
        let (got_e, trace) =
            infuse_sentence(&doc, &sentence, &counting, &config).map_err(|e| e.to_string())?;
        if (trace.selected_count, got_e) != (want_count, want_e) {
            return Err(format!(
                "case {case}: got ({}, {got_e}), oracle ({want_count}, {want_e})",
                trace.selected_count
            ));
        }
        let calls = counting.stats().total_calls as usize;
        let directions = if reverse { 2 } else { 1 };
        if calls != directions * m + trace.steps() {
            return Err(format!(
                "case {case}: {calls} calls for M={m}, {} steps",
                trace.steps()
            ));
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("1000 cases in {:.2?}", start.elapsed()))
}

fn pair_count_auc(scores: &[f64], labels: &[FaithfulLabel]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if li.is_faithful() && !lj.is_faithful() {
                pairs += 1.0;
                wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    wins / pairs
}

fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<FaithfulLabel> {
    let mut labels: Vec<FaithfulLabel> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                FaithfulLabel::Faithful
            } else {
                FaithfulLabel::Unfaithful
            }
        })
        .collect();
    labels[0] = FaithfulLabel::Faithful;
    labels[1] = FaithfulLabel::Unfaithful;
    labels.shuffle(rng);
    labels
}

fn auc_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tie_free = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..=50);
        let labels = random_labels(&mut rng, n);
        let levels = if case % 2 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = pair_count_auc(&scores, &labels);
        if (got - want).abs() > 1e-12 {
            return Err(format!("case {case}: {got} vs {want}"));
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            tie_free += 1;
            let transformed: Vec<f64> = scores.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
            let t = roc_auc(&transformed, &labels).map_err(|e| e.to_string())?;
            if t != got {
                return Err(format!(
                    "case {case}: monotone transform moved AUC {got} -> {t}"
                ));
            }
        }
    }
    Ok(format!("1000 cases, {tie_free} tie-free"))
}

fn call_accounting() -> Result<String, String> {
    let examples = read_canonical(TOY_CORPUS).map_err(|e| e.to_string())?;
    let config = RetrievalConfig::default();
    let mut sentences = 0;
    let mut expected_total = 0u64;
    for ex in &examples {
        let m = ex.document.len() as u64;
        for s in ex.summary.sentences() {
            sentences += 1;
            let scorer = CountingScorer::new(LexicalScorer::new());
            let (_, trace) =
                infuse_sentence(&ex.document, s, &scorer, &config).map_err(|e| e.to_string())?;
            let calls = scorer.stats().total_calls;
            if calls != 2 * m + trace.steps() as u64 {
                return Err(format!(
                    "{} sentence {}: infuse made {calls} calls, M={m}",
                    ex.id,
                    s.index()
                ));
            }
            expected_total += calls;
            let scorer = CountingScorer::new(LexicalScorer::new());
            summac_zs(&ex.document, s, &scorer).map_err(|e| e.to_string())?;
            if scorer.stats().total_calls != m {
                return Err(format!(
                    "{} sentence {}: summac_zs made {} calls",
                    ex.id,
                    s.index(),
                    scorer.stats().total_calls
                ));
            }
        }
    }

    // The command-level counters report the same totals.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let summary = run_score(&dir.path().join("run"), 1, "infuse,summac_zs")?;
    let infuse_total = summary.manifest.stats["infuse"].total_calls;
    if infuse_total != expected_total {
        return Err(format!(
            "score command counted {infuse_total} infuse calls, expected {expected_total}"
        ));
    }
    let traces: Vec<TraceRecord> =
        std::fs::read_to_string(dir.path().join("run").join(TRACES_FILE))
            .map_err(|e| e.to_string())?
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
    let from_traces: u64 = traces
        .iter()
        .filter(|t| t.system_id == "infuse")
        .map(|t| {
            let m = examples
                .iter()
                .find(|e| e.id == t.example_id)
                .unwrap()
                .document
                .len();
            (2 * m + t.trace.steps()) as u64
        })
        .sum();
    if from_traces != expected_total {
        return Err(format!(
            "traces account for {from_traces} calls, expected {expected_total}"
        ));
    }
    let zs: u64 = examples
        .iter()
        .map(|e| (e.document.len() * e.summary.len()) as u64)
        .sum();
    if summary.manifest.stats["summac_zs"].total_calls != zs {
        return Err("score command summac_zs count differs from sum of M".into());
    }
    Ok(format!(
        "{sentences} sentences, {expected_total} infuse calls, {zs} summac_zs calls"
    ))
}

/// Deterministic scorer over arbitrary text: verdicts come from a seeded
/// hash of the pair, quantized to tenths.
struct HashScorer(u64);

impl NliScorer for HashScorer {
    fn id(&self) -> &str {
        "hash"
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        let mut h = DefaultHasher::new();
        (self.0, &req.premise, &req.hypothesis).hash(&mut h);
        Ok(quantized(&mut ChaCha8Rng::seed_from_u64(h.finish())))
    }
}

fn baseline_degeneracies() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000u64 {
        let m = rng.random_range(1..=10);
        let doc = Document::from_texts(random_document(&mut rng, m)).unwrap();
        let hyp = Sentence::new(0, format!("Claim {case}.")).unwrap();
        let scorer = HashScorer(case);
        let (_, idx) = infuse_k(&doc, &hyp, &scorer, 1, false).map_err(|e| e.to_string())?;
        let zs = summac_zs(&doc, &hyp, &scorer).map_err(|e| e.to_string())?;
        if idx != [zs.argmax] {
            return Err(format!(
                "case {case}: infuse_k picked {idx:?}, summac_zs argmax {}",
                zs.argmax
            ));
        }
        let k = rng.random_range(m..=m + 3);
        let ctx = sentli(&doc, &hyp, &scorer, k).map_err(|e| e.to_string())?;
        if ctx.context != (0..m).collect::<Vec<_>>() {
            return Err(format!(
                "case {case}: sentli k={k} M={m} used {:?}",
                ctx.context
            ));
        }
    }
    Ok("1000 cases".into())
}

fn aggregation_laws() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10_000 {
        let n = rng.random_range(1..=20);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let min = aggregate_subsentences(&xs).unwrap();
        let mean = aggregate_summary(&xs).unwrap();
        let x = xs[0];
        let same = vec![x; n];
        if aggregate_subsentences(&same).unwrap() != x || aggregate_summary(&same).unwrap() != x {
            return Err(format!("case {case}: not idempotent at {x}"));
        }
        if min > mean {
            return Err(format!("case {case}: min {min} > mean {mean}"));
        }
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut rng);
        if aggregate_subsentences(&shuffled).unwrap() != min
            || aggregate_summary(&shuffled).unwrap() != mean
        {
            return Err(format!("case {case}: order dependent"));
        }
        let mut raised = xs.clone();
        let i = rng.random_range(0..n);
        raised[i] += rng.random::<f64>() * if case % 3 == 0 { 1e-15 } else { 1.0 };
        if aggregate_subsentences(&raised).unwrap() < min
            || aggregate_summary(&raised).unwrap() < mean
        {
            return Err(format!("case {case}: not monotone"));
        }
    }
    Ok("10000 cases".into())
}

fn toy_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.jsonl")
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/toy_report.json")
}

fn parse(args: &[&str]) -> Command {
    Cli::try_parse_from(std::iter::once("infuse").chain(args.iter().copied()))
        .expect("valid arguments")
        .command
}

fn run_score(out: &Path, jobs: usize, systems: &str) -> Result<infuse::cli::ScoreSummary, String> {
    let toy = toy_path();
    let jobs = jobs.to_string();
    let args = [
        "score",
        "--dataset",
        toy.to_str().unwrap(),
        "--systems",
        systems,
        "--jobs",
        &jobs,
        "--out",
        out.to_str().unwrap(),
    ];
    match parse(&args) {
        Command::Score(a) => cmd_score(&a).map_err(|e| e.to_string()),
        _ => unreachable!(),
    }
}

fn report_for(jobs: usize, dir: &Path) -> Result<String, String> {
    let out = dir.join(format!("jobs{jobs}"));
    run_score(
        &out,
        jobs,
        "infuse,infuse_sub,infuse_k,fulldoc,summac_zs,sentli",
    )?;
    let scores = out.join("scores.jsonl");
    match parse(&["evaluate", "--scores", scores.to_str().unwrap()]) {
        Command::Evaluate(a) => cmd_evaluate(&a)
            .map(|r| r.to_json())
            .map_err(|e| e.to_string()),
        _ => unreachable!(),
    }
}

fn golden_report() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let first = report_for(1, dir.path())?;
    within(start, Duration::from_secs(5))?;
    let elapsed = start.elapsed();
    let second = report_for(1, dir.path())?;
    let parallel = report_for(4, dir.path())?;
    if first != second {
        return Err("two runs at jobs=1 differ".into());
    }
    if first != parallel {
        return Err("jobs=1 and jobs=4 reports differ".into());
    }
    let golden = golden_path();
    if std::env::var_os("INFUSE_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&golden, &first).map_err(|e| e.to_string())?;
        return Ok(format!("golden rewritten at {}", golden.display()));
    }
    let frozen =
        std::fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    if frozen != first {
        return Err("report differs from tests/golden/toy_report.json".into());
    }
    Ok(format!(
        "byte-identical at jobs=1 and jobs=4, single run {elapsed:.2?}"
    ))
}

/// Longest common run starting at each summary position by direct
/// comparison, earliest document start on ties, then a left-to-right jump.
fn brute_fragments(summary: &[u8], document: &[u8]) -> Vec<Fragment> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < summary.len() {
        let mut best = (0, 0);
        for j in 0..document.len() {
            let len = (0..)
                .take_while(|&k| {
                    i + k < summary.len()
                        && j + k < document.len()
                        && summary[i + k] == document[j + k]
                })
                .count();
            if len > best.0 {
                best = (len, j);
            }
        }
        if best.0 > 0 {
            out.push(Fragment {
                summary_start: i,
                document_start: best.1,
                len: best.0,
            });
            i += best.0;
        } else {
            i += 1;
        }
    }
    out
}

fn coverage_density_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let alphabet = rng.random_range(2..=6u8);
        let s: Vec<u8> = (0..rng.random_range(0..=30))
            .map(|_| rng.random_range(0..alphabet))
            .collect();
        let d: Vec<u8> = (0..rng.random_range(0..=30))
            .map(|_| rng.random_range(0..alphabet))
            .collect();
        let got = extract_fragments(&s, &d);
        let want = brute_fragments(&s, &d);
        if got != want {
            return Err(format!("case {case}: {got:?} vs {want:?}"));
        }
        let ext = extractiveness(&s, &d);
        if !s.is_empty() {
            let n = s.len() as f64;
            let cov = want.iter().map(|f| f.len).sum::<usize>() as f64 / n;
            let den = want.iter().map(|f| f.len * f.len).sum::<usize>() as f64 / n;
            if ext.coverage != cov || ext.density != den {
                return Err(format!("case {case}: coverage/density mismatch"));
            }
        }
    }
    Ok("1000 cases".into())
}

fn bootstrap_protocol() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels: Vec<FaithfulLabel> = (0..50)
        .map(|i| {
            if i % 2 == 0 {
                FaithfulLabel::Faithful
            } else {
                FaithfulLabel::Unfaithful
            }
        })
        .collect();
    let separable: Vec<f64> = labels
        .iter()
        .map(|l| {
            if l.is_faithful() {
                0.6 + 0.4 * rng.random::<f64>()
            } else {
                0.4 * rng.random::<f64>()
            }
        })
        .collect();
    let noise: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
    let config = BootstrapConfig::default();
    let err = |e: infuse::error::EvalError| e.to_string();

    let a = bootstrap_compare(&separable, &noise, &labels, &config).map_err(err)?;
    let b = bootstrap_compare(&separable, &noise, &labels, &config).map_err(err)?;
    if a != b {
        return Err("fixed-seed comparison is not reproducible".into());
    }
    let p = a
        .significance
        .p_value()
        .ok_or("separable pair was not tested")?;
    if p >= 0.05 || p.is_nan() {
        return Err(format!("separable pair p = {p}"));
    }
    let same = bootstrap_compare(&noise, &noise, &labels, &config).map_err(err)?;
    if same.significance != Significance::ExactlyEqual {
        return Err(format!("identical systems gave {:?}", same.significance));
    }
    Ok(format!(
        "p = {p:.3e}, mean AUC difference {:.4}",
        a.mean_difference
    ))
}

type Check = fn() -> Result<String, String>;

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    if elapsed > limit {
        return Err(format!("took {elapsed:.2?}, limit {limit:?}"));
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("retrieval oracle equivalence", algorithm_oracle),
        ("roc-auc oracle", auc_oracle),
        ("call accounting", call_accounting),
        ("baseline degeneracies", baseline_degeneracies),
        ("aggregation laws", aggregation_laws),
        ("end-to-end golden report", golden_report),
        ("coverage/density oracle", coverage_density_oracle),
        ("bootstrap protocol", bootstrap_protocol),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
