//! Split fused summary sentences into simpler parts and score each part.
//!
//! cargo run --example sub_sentence

use infuse::algorithms::{infuse_sentence, Aggregator, RetrievalConfig};
use infuse::ingest::read_canonical;
use infuse::scorer::LexicalScorer;
use infuse::splitting::{infuse_sub, split_summary, TableSplitter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let splitter = TableSplitter::from_jsonl("toy-splits", infuse::TOY_SPLITS)?;
    let scorer = LexicalScorer::new();
    let config = RetrievalConfig::default();

    for ex in examples
        .iter()
        .filter(|e| ["t02", "t05", "t11"].contains(&e.id.as_str()))
    {
        let (split, results) = split_summary(&ex.summary, &splitter);
        for (unit, result) in split.units().iter().zip(&results) {
            let (whole, _) = infuse_sentence(&ex.document, unit.sentence(), &scorer, &config)?;
            let (sub, traces) = infuse_sub(&ex.document, unit, &scorer, &config, Aggregator::Min)?;
            println!("{} ({}) {}", ex.id, ex.label.as_str(), unit.sentence());
            for (part, t) in unit.sub_sentences().iter().zip(&traces) {
                println!(
                    "    part: {part}  -> {:.3} with {} sentence(s)",
                    t.final_entailment, t.selected_count
                );
            }
            println!(
                "    whole {whole:.3}  min over parts {sub:.3}  split: {}",
                result.is_split()
            );
        }
    }
    Ok(())
}
