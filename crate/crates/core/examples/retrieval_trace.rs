//! Step through incremental premise retrieval for one fused summary sentence.
//!
//! cargo run --example retrieval_trace

use infuse::algorithms::{infuse_sentence, summac_zs, RetrievalConfig};
use infuse::ingest::read_canonical;
use infuse::scorer::{CountingScorer, LexicalScorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let ex = examples
        .iter()
        .find(|e| e.id == "t05")
        .expect("bundled example");
    let hyp = ex.summary.sentences().next().expect("non-empty summary");
    let scorer = CountingScorer::new(LexicalScorer::new());

    let (score, trace) = infuse_sentence(&ex.document, hyp, &scorer, &RetrievalConfig::default())?;
    println!("hypothesis: {hyp}");
    for (step, (u, e)) in trace
        .neutral_sequence
        .iter()
        .zip(&trace.entailment_sequence)
        .enumerate()
    {
        let added = &ex.document.sentences()[trace.ranked_indices[step]];
        println!(
            "step {}: +[{}] {added}\n        neutral {u:.3}  entailment {e:.3}",
            step + 1,
            added.index()
        );
    }
    println!(
        "stop: {:?} after {} sentences; score {score:.3}; {} scorer calls",
        trace.stop_reason,
        trace.selected_count,
        scorer.stats().total_calls
    );

    let zs = summac_zs(&ex.document, hyp, &scorer)?;
    println!(
        "best single sentence (index {}) scores {:.3}",
        zs.argmax, zs.score
    );
    Ok(())
}
