//! Extractiveness, sentence fusion and corpus statistics for the bundled corpus.
//!
//! cargo run --example corpus_analysis

use infuse::analysis::{corpus_stats, coverage_density, greedy_fusion, CorpusStats, FusionTable};
use infuse::ingest::read_canonical;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let mut table = FusionTable::default();
    for ex in &examples {
        let ext = coverage_density(&ex.document, &ex.summary);
        println!(
            "{} coverage {:.3} density {:.3}",
            ex.id, ext.coverage, ext.density
        );
        for s in ex.summary.sentences() {
            let fusion = greedy_fusion(&ex.document, s);
            if fusion.fused_indices.len() > 1 {
                println!(
                    "    fused {:?} (window {}): {s}",
                    fusion.fused_indices, fusion.window
                );
            }
            if !fusion.zero_coverage {
                table.add(&fusion);
            }
        }
    }
    println!("\n{}", table.to_csv());
    println!("{}", CorpusStats::CSV_HEADER);
    for row in corpus_stats(&examples) {
        println!("{}", row.csv_row());
    }
    Ok(())
}
