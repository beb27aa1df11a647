//! Score the bundled corpus with every system and print ROC-AUC per system.
//!
//! cargo run --example score_corpus

use infuse::algorithms::RetrievalConfig;
use infuse::cli::{score_example, System};
use infuse::ingest::read_canonical;
use infuse::metaeval::roc_auc;
use infuse::scorer::{CachedScorer, LexicalScorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let labels: Vec<_> = examples.iter().map(|e| e.label).collect();
    let config = RetrievalConfig::default();

    println!("{:<12} {:>8} {:>8}", "system", "ROC-AUC", "calls");
    for system in System::ALL {
        let scorer = CachedScorer::in_memory(LexicalScorer::new());
        let mut scores = Vec::new();
        for ex in &examples {
            let (record, _) = score_example(system, ex, None, &scorer, &config)?;
            scores.push(record.score);
        }
        let auc = roc_auc(&scores, &labels)?;
        println!(
            "{:<12} {:>8.3} {:>8}",
            system,
            auc,
            scorer.stats().total_calls
        );
    }
    Ok(())
}
