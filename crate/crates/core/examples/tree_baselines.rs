//! Random forest and gradient boosting on graph23 and TF-IDF features, binary and multi-class.

use obfugraph::cfg::Obfuscation;
use obfugraph::dataset::*;
use obfugraph::eval::{evaluate, Mode, Task};
use obfugraph::features::{default_taxonomy, FeatureScheme};
use obfugraph::model::{train_model, Algorithm, TrainSpec};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let config = GeneratorConfig {
        seed: 3,
        n_functions: 150,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &Obfuscation::OBFUSCATED)?;
    let manifest = split_per_function(&corpus, DEFAULT_RATIOS, 3, DEFAULT_BINS)?;
    let (train, val, test) = (
        manifest.select(&corpus, SplitSet::Train),
        manifest.select(&corpus, SplitSet::Validation),
        manifest.select(&corpus, SplitSet::Test),
    );

    for task in [Task::Binary, Task::Multiclass] {
        for algorithm in [Algorithm::RandomForest, Algorithm::GradientBoosting] {
            for features in [FeatureScheme::Graph23, FeatureScheme::Tfidf128] {
                let mut spec = TrainSpec::new(algorithm, features, task);
                spec.trees.n_trees = 50;
                let model = train_model(&spec, &train, &val, default_taxonomy().clone(), 3)?.model;
                let report = evaluate(&model, &test, task, Mode::ObfuscatedOnly, "synthetic")?;
                println!("{task:<10} {:<3} {:<9} {:.3}", algorithm.name(), features.name(), report.balanced_accuracy);
            }
        }
    }
    Ok(())
}
