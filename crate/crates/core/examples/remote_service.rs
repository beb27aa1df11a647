//! Talk to a running model server. Set INFUSE_SERVICE_URL first, e.g.
//!
//! INFUSE_SERVICE_URL=http://127.0.0.1:8080 cargo run --example remote_service

use infuse::algorithms::{infuse_sentence, RetrievalConfig};
use infuse::domain::{Document, Sentence};
use infuse::scorer::{CachedScorer, RemoteConfig, RemoteScorer, DEFAULT_SERVICE_URL_ENV};
use infuse::splitting::{split_sentence, RemoteSplitter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Ok(url) = std::env::var(DEFAULT_SERVICE_URL_ENV) else {
        eprintln!("{DEFAULT_SERVICE_URL_ENV} is not set; nothing to do");
        return Ok(());
    };
    let health = RemoteScorer::health(RemoteConfig::new(&url))?;
    println!(
        "nli model {:?}, split model {:?}",
        health.nli_model, health.split_model
    );

    let scorer = CachedScorer::in_memory(RemoteScorer::connect(RemoteConfig::new(&url))?);
    let doc = Document::from_texts([
        "The spacecraft received a third transmission on Tuesday.",
        "Engineers said the signal was weak but readable.",
    ])?;
    let hyp = Sentence::new(0, "The spacecraft got a weak third transmission.")?;
    let (score, trace) = infuse_sentence(&doc, &hyp, &scorer, &RetrievalConfig::default())?;
    println!(
        "score {score:.3} with premise {:?}",
        trace.selected_indices()
    );

    if health.split_model.is_some() {
        let splitter = RemoteSplitter::connect(RemoteConfig::new(&url))?;
        let split = split_sentence(&hyp, &splitter);
        for part in &split.parts {
            println!("part: {part}");
        }
    }
    Ok(())
}
