//! Compare whole-document, single-sentence and fixed-size context scoring on
//! one example.
//!
//! cargo run --example baselines

use infuse::algorithms::{
    fulldoc, infuse_k, sentli, summac_zs, DEFAULT_TOKEN_BUDGET, SENTLI_DEFAULT_K,
};
use infuse::ingest::read_canonical;
use infuse::scorer::LexicalScorer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = read_canonical(infuse::TOY_CORPUS)?;
    let scorer = LexicalScorer::new();
    for id in ["t02", "t10"] {
        let ex = examples
            .iter()
            .find(|e| e.id == id)
            .expect("bundled example");
        println!("{} ({})", ex.id, ex.label.as_str());
        let full = fulldoc(&ex.document, &ex.summary, &scorer, DEFAULT_TOKEN_BUDGET)?;
        println!(
            "  fulldoc    {:.3} over {} chunk(s)",
            full.summary_score, full.chunk_count
        );
        for s in ex.summary.sentences() {
            let zs = summac_zs(&ex.document, s, &scorer)?;
            let ctx = sentli(&ex.document, s, &scorer, SENTLI_DEFAULT_K)?;
            let (k2, idx) = infuse_k(&ex.document, s, &scorer, 2, true)?;
            println!("  [{}] {s}", s.index());
            println!("      summac_zs {:.3} (sentence {})", zs.score, zs.argmax);
            println!(
                "      sentli    {:.3} (context {:?})",
                ctx.score, ctx.context
            );
            println!("      infuse_k  {:.3} (k=2, premise {:?})", k2, idx);
        }
    }
    Ok(())
}
