//! Trains a GIN on pcode_sem node features and prints the per-epoch log and test confusion.
//!
//! `cargo run --release --example gnn_train -- 20`

use obfugraph::cfg::Obfuscation;
use obfugraph::dataset::*;
use obfugraph::eval::{evaluate, Mode, Task};
use obfugraph::features::{default_taxonomy, FeatureScheme};
use obfugraph::model::{train_model, Algorithm, TrainSpec};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let config = GeneratorConfig {
        seed: 11,
        n_functions: 120,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &Obfuscation::OBFUSCATED)?;
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 11, DEFAULT_BINS)?;

    let mut spec = TrainSpec::new(Algorithm::Gin, FeatureScheme::PcodeSem, Task::Binary);
    spec.gnn.epochs = epochs;
    let outcome = train_model(
        &spec,
        &manifest.select(&corpus, SplitSet::Train),
        &manifest.select(&corpus, SplitSet::Validation),
        default_taxonomy().clone(),
        11,
    )?;
    if let Some(log) = &outcome.log {
        log.write_csv(std::io::stdout())?;
    }
    let report = evaluate(
        &outcome.model,
        &manifest.select(&corpus, SplitSet::Test),
        Task::Binary,
        Mode::All,
        "synthetic",
    )?;
    println!("test balanced accuracy {:.3}", report.balanced_accuracy);
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        println!("{name:>14} {row:?}");
    }
    Ok(())
}
