//! Segment raw text and convert AggreFact-style CSV and DiverSumm-style JSONL
//! to canonical JSONL.
//!
//! cargo run --example ingest_convert

use infuse::ingest::{
    convert_aggrefact_csv, convert_diversumm, segment, write_canonical, DiverSummOptions,
};

const AGGREFACT: &str = "\
dataset,origin,id,doc,summary,model_name,label,cut
XSumFaith,xsum,a1,\"Dr. Lee opened the clinic. It serves 300 families.\",Dr. Lee opened the clinic.,m1,1,test
XSumFaith,xsum,a2,\"Dr. Lee opened the clinic. It serves 300 families.\",Dr. Kim opened the clinic.,m1,0,test
";

const DIVERSUMM: &str = r#"{"id":"d1","dataset":"arxiv","documents":[["We train a model.","It beats the baseline."]],"summary":["We train a model.","It beats every baseline."],"sentence_votes":[[1,1,1],[0,0,1]],"error_types":[[],["PredE"]],"summary_label":1}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for s in
        segment("Mr. Smith went to Washington. He arrived at 9 a.m. on Monday! Was it late? No.")
    {
        println!("sentence: {s}");
    }

    let conv = convert_aggrefact_csv(AGGREFACT.as_bytes())?;
    print!("{}", write_canonical(&conv.examples));

    let conv = convert_diversumm(DIVERSUMM, DiverSummOptions::default())?;
    println!("label mismatches: {:?}", conv.mismatched);
    print!("{}", write_canonical(&conv.examples));
    let excluded = convert_diversumm(
        DIVERSUMM,
        DiverSummOptions {
            exclude_mismatched: true,
        },
    )?;
    println!("kept with exclusion: {}", excluded.examples.len());
    Ok(())
}
