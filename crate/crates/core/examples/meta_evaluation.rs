//! ROC-AUC, paired bootstrap significance and error-type histograms on
//! synthetic metric scores.
//!
//! cargo run --example meta_evaluation

use std::collections::BTreeSet;

use infuse::domain::{ErrorType, FaithfulLabel};
use infuse::metaeval::{
    bootstrap_compare, error_type_histogram, roc_auc, BootstrapConfig, SentenceRecord,
    SentenceStatus,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 50;
    let labels: Vec<FaithfulLabel> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                FaithfulLabel::Faithful
            } else {
                FaithfulLabel::Unfaithful
            }
        })
        .collect();
    // System a separates the classes; system b is noisy.
    let a: Vec<f64> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                0.6 + 0.008 * i as f64
            } else {
                0.2 + 0.008 * i as f64
            }
        })
        .collect();
    let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 50) as f64 / 50.0).collect();

    println!(
        "AUC a {:.3}, b {:.3}",
        roc_auc(&a, &labels)?,
        roc_auc(&b, &labels)?
    );
    let cmp = bootstrap_compare(&a, &b, &labels, &BootstrapConfig::default())?;
    println!(
        "mean AUC difference {:+.3}, {:?}",
        cmp.mean_difference, cmp.significance
    );
    let same = bootstrap_compare(&a, &a, &labels, &BootstrapConfig::default())?;
    println!("a vs a: {:?}", same.significance);

    let records: Vec<SentenceRecord> = (0..n)
        .map(|i| SentenceRecord {
            score: a[i].min(1.0),
            status: if i % 2 == 0 {
                SentenceStatus::Faithful
            } else {
                let t = ErrorType::ALL[i % ErrorType::ALL.len()];
                SentenceStatus::Unfaithful(BTreeSet::from([t]))
            },
        })
        .collect();
    print!("{}", error_type_histogram(&records, 5)?.to_csv());
    Ok(())
}
