//! Corpus diagnostics: sentence fusion, extractive coverage and density, and
//! probes for lexical-overlap and premise-length bias of a scorer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    assemble_premise, build_column, infuse_sentence, rank_sentences, RetrievalConfig,
};
use crate::domain::{BenchmarkExample, Document, FaithfulLabel, Sentence, Summary};
use crate::error::AlgoError;
use crate::scorer::{NliScorer, ScoreRequest};
use crate::text::word_tokens;

/// Document sentences greedily selected to cover one summary sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionRecord {
    pub summary_sentence: usize,
    /// Sorted, unique, non-empty.
    pub fused_indices: Vec<usize>,
    /// `max - min + 1` over the fused indices.
    pub window: usize,
    /// Summary tokens covered by the selection.
    pub covered_tokens: usize,
    /// Set when no document sentence shares a token with the summary sentence.
    pub zero_coverage: bool,
}

fn counts(tokens: Vec<String>) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

fn covered(target: &HashMap<String, usize>, pool: &HashMap<String, usize>) -> usize {
    target
        .iter()
        .map(|(t, &n)| n.min(pool.get(t).copied().unwrap_or(0)))
        .sum()
}

/// Repeatedly add the document sentence that covers the most additional
/// summary tokens (multiset overlap), until no sentence adds anything.
/// Ties go to the smaller index.
pub fn greedy_fusion(doc: &Document, summary_sentence: &Sentence) -> FusionRecord {
    let target = counts(word_tokens(summary_sentence.text()));
    let candidates: Vec<HashMap<String, usize>> = doc
        .sentences()
        .iter()
        .map(|s| counts(word_tokens(s.text())))
        .collect();

    let mut pool: HashMap<String, usize> = HashMap::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut current = 0;
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, cand) in candidates.iter().enumerate() {
            if selected.contains(&i) {
                continue;
            }
            let mut merged = pool.clone();
            for (t, &n) in cand {
                *merged.entry(t.clone()).or_insert(0) += n;
            }
            let gain = covered(&target, &merged) - current;
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else { break };
        for (t, &n) in &candidates[i] {
            *pool.entry(t.clone()).or_insert(0) += n;
        }
        selected.push(i);
        current += gain;
    }

    let zero_coverage = selected.is_empty();
    if zero_coverage {
        // Nothing overlaps: fall back to the best single sentence, i.e. index 0.
        let best = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, covered(&target, c)))
            .fold((0, 0), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
        selected.push(best.0);
    }
    selected.sort_unstable();
    let window = selected[selected.len() - 1] - selected[0] + 1;
    FusionRecord {
        summary_sentence: summary_sentence.index(),
        fused_indices: selected,
        window,
        covered_tokens: current,
        zero_coverage,
    }
}

/// Counts of summary sentences by number of fused document sentences
/// (rows: 1, 2, 3+) and fusion window (columns: ≤5, 6–14, ≥15).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionTable {
    pub counts: [[usize; 3]; 3],
}

impl FusionTable {
    pub const ROWS: [&'static str; 3] = ["1", "2", ">=3"];
    pub const COLUMNS: [&'static str; 3] = ["<=5", "6-14", ">=15"];

    pub fn add(&mut self, record: &FusionRecord) {
        let row = (record.fused_indices.len() - 1).min(2);
        let col = match record.window {
            0..=5 => 0,
            6..=14 => 1,
            _ => 2,
        };
        self.counts[row][col] += 1;
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a FusionRecord>) -> Self {
        let mut t = Self::default();
        for r in records {
            t.add(r);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("fused,{}\n", Self::COLUMNS.join(","));
        for (name, row) in Self::ROWS.iter().zip(&self.counts) {
            out.push_str(&format!("{name},{},{},{}\n", row[0], row[1], row[2]));
        }
        out
    }
}

/// A run of summary tokens copied from the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub summary_start: usize,
    pub document_start: usize,
    pub len: usize,
}

/// Greedy extractive fragments: scanning the summary left to right, take the
/// longest document match starting at the current position (earliest
/// document position on ties) and jump past it.
pub fn extract_fragments<T: PartialEq>(summary: &[T], document: &[T]) -> Vec<Fragment> {
    let (n, m) = (summary.len(), document.len());
    // best[i] = (length, document start) of the longest match beginning at summary[i].
    let mut best = vec![(0usize, 0usize); n];
    let mut next_row = vec![0usize; m + 1];
    let mut row = vec![0usize; m + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            row[j] = if summary[i] == document[j] {
                next_row[j + 1] + 1
            } else {
                0
            };
            if row[j] >= best[i].0 && row[j] > 0 {
                best[i] = (row[j], j);
            }
        }
        std::mem::swap(&mut row, &mut next_row);
    }
    let mut fragments = Vec::new();
    let mut i = 0;
    while i < n {
        let (len, start) = best[i];
        if len > 0 {
            fragments.push(Fragment {
                summary_start: i,
                document_start: start,
                len,
            });
        }
        i += len.max(1);
    }
    fragments
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extractiveness {
    /// Share of summary tokens inside a copied fragment, in `[0, 1]`.
    pub coverage: f64,
    /// Mean squared fragment length per summary token.
    pub density: f64,
    pub summary_tokens: usize,
}

pub fn coverage_density(doc: &Document, summary: &Summary) -> Extractiveness {
    let doc_tokens: Vec<String> = doc
        .sentences()
        .iter()
        .flat_map(|s| word_tokens(s.text()))
        .collect();
    let sum_tokens: Vec<String> = summary
        .sentences()
        .flat_map(|s| word_tokens(s.text()))
        .collect();
    extractiveness(&sum_tokens, &doc_tokens)
}

pub fn extractiveness<T: PartialEq>(summary: &[T], document: &[T]) -> Extractiveness {
    let n = summary.len();
    if n == 0 {
        return Extractiveness {
            coverage: 0.0,
            density: 0.0,
            summary_tokens: 0,
        };
    }
    let fragments = extract_fragments(summary, document);
    let total: usize = fragments.iter().map(|f| f.len).sum();
    let squares: usize = fragments.iter().map(|f| f.len * f.len).sum();
    Extractiveness {
        coverage: total as f64 / n as f64,
        density: squares as f64 / n as f64,
        summary_tokens: n,
    }
}

/// Clipped bigram overlap divided by the hypothesis bigram count. Zero when
/// the hypothesis has fewer than two tokens.
pub fn rouge2_recall(premise: &str, hypothesis: &str) -> f64 {
    let bigrams = |text: &str| -> HashMap<(String, String), usize> {
        let toks = word_tokens(text);
        let mut m = HashMap::new();
        for w in toks.windows(2) {
            *m.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
        }
        m
    };
    let hyp = bigrams(hypothesis);
    let total: usize = hyp.values().sum();
    if total == 0 {
        return 0.0;
    }
    let prem = bigrams(premise);
    let overlap: usize = hyp
        .iter()
        .map(|(b, &n)| n.min(prem.get(b).copied().unwrap_or(0)))
        .sum();
    overlap as f64 / total as f64
}

/// Mean entailment of unfaithful summary sentences for one premise size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub mean_entailment: f64,
    pub sentences: usize,
}

/// For each `k`, score every sentence labelled unfaithful against its top-`k`
/// ranked document sentences and average the entailment. Examples without
/// sentence labels are skipped; an empty result means nothing qualified.
pub fn premise_size_sweep<S: NliScorer + ?Sized>(
    examples: &[BenchmarkExample],
    scorer: &S,
    ks: &[usize],
    use_reverse: bool,
) -> Result<Vec<SweepPoint>, AlgoError> {
    if ks.contains(&0) {
        return Err(AlgoError::ZeroK);
    }
    let mut per_k: Vec<Vec<f64>> = vec![Vec::new(); ks.len()];
    for ex in examples {
        let Some(labels) = ex.sentence_labels() else {
            continue;
        };
        for (unit, label) in ex.summary.units().iter().zip(labels) {
            if *label != FaithfulLabel::Unfaithful {
                continue;
            }
            let hyp = unit.sentence();
            let column = build_column(&ex.document, hyp, scorer, use_reverse)?;
            let ranked = rank_sentences(&column.reweighted);
            for (slot, &k) in ks.iter().enumerate() {
                let premise = assemble_premise(&ex.document, &ranked[..k.min(ranked.len())]);
                let v = scorer.score(&ScoreRequest::new(premise, hyp.text())?)?;
                per_k[slot].push(v.entailment);
            }
        }
    }
    if per_k.first().is_none_or(Vec::is_empty) {
        return Ok(Vec::new());
    }
    Ok(ks
        .iter()
        .zip(per_k)
        .map(|(&k, scores)| SweepPoint {
            k,
            mean_entailment: crate::algorithms::aggregate::mean(&scores).expect("non-empty"),
            sentences: scores.len(),
        })
        .collect())
}

/// Lexical overlap of each summary sentence with its retrieved premise,
/// paired with the entailment it received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapPoint {
    pub rouge2_recall: f64,
    pub entailment: f64,
    pub premise_sentences: usize,
}

pub fn overlap_probe<S: NliScorer + ?Sized>(
    doc: &Document,
    summary: &Summary,
    scorer: &S,
    config: &RetrievalConfig,
) -> Result<Vec<OverlapPoint>, AlgoError> {
    summary
        .sentences()
        .map(|s| {
            let (entailment, trace) = infuse_sentence(doc, s, scorer, config)?;
            let premise = assemble_premise(doc, trace.selected_indices());
            Ok(OverlapPoint {
                rouge2_recall: rouge2_recall(&premise, s.text()),
                entailment,
                premise_sentences: trace.selected_count,
            })
        })
        .collect()
}

/// Per-dataset size and extractiveness statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dataset: String,
    pub examples: usize,
    pub doc_sentences: f64,
    pub doc_tokens: f64,
    pub summary_sentences: f64,
    pub summary_tokens: f64,
    pub coverage: f64,
    pub density: f64,
}

impl CorpusStats {
    pub const CSV_HEADER: &'static str =
        "dataset,examples,doc_sentences,doc_tokens,summary_sentences,summary_tokens,coverage,density";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.4},{:.4}",
            self.dataset,
            self.examples,
            self.doc_sentences,
            self.doc_tokens,
            self.summary_sentences,
            self.summary_tokens,
            self.coverage,
            self.density
        )
    }
}

/// One [`CorpusStats`] row per dataset tag, sorted by tag.
pub fn corpus_stats(examples: &[BenchmarkExample]) -> Vec<CorpusStats> {
    let mut by_dataset: std::collections::BTreeMap<&str, Vec<&BenchmarkExample>> =
        Default::default();
    for ex in examples {
        by_dataset.entry(ex.dataset.as_str()).or_default().push(ex);
    }
    by_dataset
        .into_iter()
        .map(|(dataset, exs)| {
            let n = exs.len() as f64;
            let avg =
                |f: &dyn Fn(&BenchmarkExample) -> f64| exs.iter().map(|e| f(e)).sum::<f64>() / n;
            let ext: Vec<Extractiveness> = exs
                .iter()
                .map(|e| coverage_density(&e.document, &e.summary))
                .collect();
            CorpusStats {
                dataset: dataset.to_owned(),
                examples: exs.len(),
                doc_sentences: avg(&|e| e.document.len() as f64),
                doc_tokens: avg(&|e| e.document.token_count() as f64),
                summary_sentences: avg(&|e| e.summary.len() as f64),
                summary_tokens: avg(&|e| e.summary.token_count() as f64),
                coverage: ext.iter().map(|x| x.coverage).sum::<f64>() / n,
                density: ext.iter().map(|x| x.density).sum::<f64>() / n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::LexicalScorer;
    use proptest::prelude::*;

    fn doc(texts: &[&str]) -> Document {
        Document::from_texts(texts.iter().copied()).unwrap()
    }

    fn sent(text: &str) -> Sentence {
        Sentence::new(0, text).unwrap()
    }

    #[test]
    fn verbatim_copy_fuses_one_sentence() {
        let d = doc(&["a b", "c d", "e f", "the quick brown fox", "g h"]);
        let r = greedy_fusion(&d, &sent("The quick brown fox"));
        assert_eq!(
            (r.fused_indices, r.window, r.zero_coverage),
            (vec![3], 1, false)
        );
    }

    #[test]
    fn halves_of_distant_sentences() {
        let d = doc(&[
            "alpha beta gamma delta",
            "x1 y1",
            "x2 y2",
            "x3 y3",
            "x4 y4",
            "x5 y5",
            "x6 y6",
            "omega psi chi phi",
        ]);
        // First pick: sentence 0 and 7 both add 2; 0 wins the tie. Then 7 adds 2.
        let r = greedy_fusion(&d, &sent("alpha beta omega psi"));
        assert_eq!((r.fused_indices.clone(), r.window), (vec![0, 7], 8));
        assert_eq!(r.covered_tokens, 4);
    }

    #[test]
    fn identical_sentences_pick_the_first() {
        let d = doc(&["same words here", "same words here", "same words here"]);
        let r = greedy_fusion(&d, &sent("same words"));
        assert_eq!(r.fused_indices, vec![0]);
    }

    #[test]
    fn zero_overlap_is_flagged() {
        let d = doc(&["a b", "c d"]);
        let r = greedy_fusion(&d, &sent("zzz"));
        assert_eq!(
            (r.fused_indices, r.window, r.zero_coverage),
            (vec![0], 1, true)
        );
    }

    #[test]
    fn fusion_buckets() {
        let rec = |idx: Vec<usize>| {
            let window = idx[idx.len() - 1] - idx[0] + 1;
            FusionRecord {
                summary_sentence: 0,
                fused_indices: idx,
                window,
                covered_tokens: 1,
                zero_coverage: false,
            }
        };
        let t = FusionTable::from_records(&[
            rec(vec![2]),
            rec(vec![0, 7]),
            rec(vec![0, 3, 20]),
            rec(vec![1, 5]),
        ]);
        assert_eq!(t.counts, [[1, 0, 0], [1, 1, 0], [0, 0, 1]]);
        assert!(t.to_csv().starts_with("fused,<=5,6-14,>=15\n1,1,0,0\n"));
    }

    #[test]
    fn coverage_density_examples() {
        let d = doc(&["the cat sat on the mat today"]);
        let verbatim = Summary::from_texts(["cat sat on the"]).unwrap();
        let e = coverage_density(&d, &verbatim);
        assert_eq!((e.coverage, e.density), (1.0, 4.0));

        let none = Summary::from_texts(["dogs bark loudly"]).unwrap();
        let e = coverage_density(&d, &none);
        assert_eq!((e.coverage, e.density), (0.0, 0.0));

        // Fragments "the cat sat on" (4) and "mat today" (2) among 10 tokens.
        let mixed = Summary::from_texts(["the cat sat on x y mat today z w"]).unwrap();
        let e = coverage_density(&d, &mixed);
        assert_eq!((e.coverage, e.density), (0.6, 2.0));
    }

    #[test]
    fn longest_match_is_not_skipped() {
        // Scanning the document for the first match of "a" and jumping past it
        // would find only "a a" here; the longest match is "a a b".
        let frags = extract_fragments(&["a", "a", "b"], &["a", "a", "a", "b"]);
        assert_eq!(
            frags,
            vec![Fragment {
                summary_start: 0,
                document_start: 1,
                len: 3
            }]
        );
    }

    #[test]
    fn rouge2_examples() {
        assert_eq!(rouge2_recall("a b c d", "a b c d"), 1.0);
        assert_eq!(rouge2_recall("a b c d", "e f g"), 0.0);
        assert!((rouge2_recall("a b c d", "a b x d") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge2_recall("a b", "a"), 0.0);
        assert_eq!(rouge2_recall("a b", "a b a b"), 1.0 / 3.0);
    }

    fn labelled(
        id: &str,
        docs: &[&str],
        summary: &[&str],
        labels: Vec<FaithfulLabel>,
    ) -> BenchmarkExample {
        let label = crate::domain::summary_label_from_sentences(&labels).unwrap();
        BenchmarkExample::new(
            id,
            "toy",
            doc(docs),
            Summary::from_texts(summary.iter().copied()).unwrap(),
            label,
        )
        .with_sentence_annotations(labels, None)
        .unwrap()
    }

    #[test]
    fn sweep_single_sentence_and_saturation() {
        use FaithfulLabel::{Faithful as F, Unfaithful as U};
        let ex = labelled(
            "a",
            &["red apples grow", "in the orchard", "near rivers"],
            &["red apples grow in caves", "ok"],
            vec![U, F],
        );
        let ks: Vec<usize> = (1..=6).collect();
        let sweep =
            premise_size_sweep(std::slice::from_ref(&ex), &LexicalScorer, &ks, true).unwrap();
        assert_eq!(sweep.len(), 6);
        assert!(sweep.iter().all(|p| p.sentences == 1));
        // M = 3: every k >= 3 uses the whole document.
        assert_eq!(sweep[2].mean_entailment, sweep[5].mean_entailment);
        assert_eq!(sweep[3].mean_entailment, sweep[4].mean_entailment);

        let none = labelled("b", &["x"], &["x"], vec![F]);
        assert!(premise_size_sweep(&[none], &LexicalScorer, &ks, true)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sweep_is_non_decreasing_when_premises_only_gain_tokens() {
        use FaithfulLabel::Unfaithful as U;
        // Each document sentence holds a distinct hypothesis token and no
        // negation, so longer premises can only raise lexical overlap.
        let corpus = vec![
            labelled(
                "a",
                &["w1 filler", "w2 filler", "w3 filler", "w4 filler"],
                &["w1 w2 w3 w4 fake"],
                vec![U],
            ),
            labelled(
                "b",
                &["v1 pad", "v2 pad", "v3 pad"],
                &["v1 v2 v3 made up"],
                vec![U],
            ),
        ];
        let sweep = premise_size_sweep(&corpus, &LexicalScorer, &[1, 2, 3, 4, 5], true).unwrap();
        assert!(sweep
            .windows(2)
            .all(|w| w[1].mean_entailment >= w[0].mean_entailment));
        assert!(sweep[3].mean_entailment > sweep[0].mean_entailment);
    }

    #[test]
    fn overlap_probe_pairs_rouge_with_entailment() {
        let d = doc(&["the cat sat on the mat", "dogs bark"]);
        let s = Summary::from_texts(["the cat sat on the mat"]).unwrap();
        let pts = overlap_probe(&d, &s, &LexicalScorer, &RetrievalConfig::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].rouge2_recall, 1.0);
        assert_eq!(pts[0].entailment, 0.9);
    }

    /// Independent oracle: at each summary position scan every document
    /// position and extend a match as far as it goes.
    fn brute_force_fragments(s: &[u8], d: &[u8]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < s.len() {
            let mut best = 0;
            for j in 0..d.len() {
                let mut l = 0;
                while i + l < s.len() && j + l < d.len() && s[i + l] == d[j + l] {
                    l += 1;
                }
                best = best.max(l);
            }
            if best > 0 {
                out.push(best);
            }
            i += best.max(1);
        }
        out
    }

    proptest! {
        #[test]
        fn fragments_match_brute_force(
            s in prop::collection::vec(0u8..4, 0..30),
            d in prop::collection::vec(0u8..4, 0..30),
        ) {
            let got: Vec<usize> = extract_fragments(&s, &d).iter().map(|f| f.len).collect();
            prop_assert_eq!(got, brute_force_fragments(&s, &d));
            let e = extractiveness(&s, &d);
            prop_assert!((0.0..=1.0).contains(&e.coverage));
            prop_assert!(e.density >= 0.0 && e.density <= e.coverage * s.len() as f64);
        }

        #[test]
        fn fusion_indices_sorted_unique(words in prop::collection::vec("[a-e]{1,2}", 1..8)) {
            let texts: Vec<String> = words.chunks(2).map(|c| c.join(" ")).collect();
            let d = Document::from_texts(&texts).unwrap();
            let r = greedy_fusion(&d, &sent(&words.join(" ")));
            prop_assert!(!r.fused_indices.is_empty());
            prop_assert!(r.fused_indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.fused_indices.len() <= d.len().min(words.len()));
        }
    }
}
