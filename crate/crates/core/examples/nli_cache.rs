//! Persist NLI verdicts to disk and reuse them across runs and systems.
//!
//! cargo run --example nli_cache

use std::sync::Arc;

use infuse::algorithms::{infuse_sentence, summac_zs, RetrievalConfig};
use infuse::ingest::read_canonical;
use infuse::scorer::{CacheStore, CachedScorer, LexicalScorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join(format!("infuse-example-{}.tsv", std::process::id()));
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let config = RetrievalConfig::default();

    for run in 1..=2 {
        let store = Arc::new(CacheStore::open(&path));
        let loaded = store.len();
        let infuse = CachedScorer::new(LexicalScorer::new(), Arc::clone(&store));
        let zero_shot = CachedScorer::new(LexicalScorer::new(), Arc::clone(&store));
        for ex in &examples {
            for s in ex.summary.sentences() {
                infuse_sentence(&ex.document, s, &infuse, &config)?;
                summac_zs(&ex.document, s, &zero_shot)?;
            }
        }
        let (a, b) = (infuse.stats(), zero_shot.stats());
        println!(
            "run {run}: {loaded} entries loaded; infuse {} calls / {} hits; summac_zs {} calls / {} hits",
            a.total_calls, a.cache_hits, b.total_calls, b.cache_hits
        );
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
