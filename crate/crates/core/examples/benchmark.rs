//! Runs a small benchmark grid, including an unimplemented architecture, and writes the table.
//!
//! `cargo run --release --example benchmark -- out_dir`

use obfugraph::cfg::Obfuscation;
use obfugraph::dataset::*;
use obfugraph::eval::{run_benchmark, BenchmarkSpec, Task};
use obfugraph::features::{default_taxonomy, FeatureScheme};
use obfugraph::model::{Algorithm, TrainSpec};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let config = GeneratorConfig {
        seed: 5,
        n_functions: 100,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &Obfuscation::OBFUSCATED)?;
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 5, DEFAULT_BINS)?;

    let mut cells = Vec::new();
    for task in [Task::Binary, Task::Multiclass] {
        cells.push(TrainSpec::new(Algorithm::GradientBoosting, FeatureScheme::Tfidf128, task));
        cells.push(TrainSpec::new(Algorithm::RandomForest, FeatureScheme::Graph23, task));
        let mut gin = TrainSpec::new(Algorithm::Gin, FeatureScheme::AsmSem, task);
        gin.gnn.epochs = 5;
        cells.push(gin);
        cells.push(TrainSpec::new(Algorithm::Gat, FeatureScheme::PcodeSem, task));
    }
    for c in &mut cells {
        c.trees.n_trees = 30;
    }
    let spec = BenchmarkSpec {
        dataset: "synthetic".into(),
        exclude_degenerate: true,
        cells,
    };
    let table = run_benchmark(&corpus, &manifest, &spec, default_taxonomy(), 5);
    table.write_csv(std::io::stdout())?;
    if let Some(dir) = std::env::args().nth(1) {
        table.write(&dir)?;
    }
    Ok(())
}
