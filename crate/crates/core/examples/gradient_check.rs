//! Finite-difference check of the tape gradients for each architecture on random graphs.

use ndarray::Array2;
use obfugraph::features::FeatureScheme;
use obfugraph::gnn::{model_gradient_check, Architecture, GnnConfig, GnnModel, GraphBatch, GraphInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> obfugraph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for architecture in [Architecture::Gcn, Architecture::Sage, Architecture::Gin] {
        let config = GnnConfig {
            architecture,
            n_layers: 2,
            hidden: 8,
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let n = rng.random_range(4..=10);
            let graph = GraphInput {
                features: Array2::from_shape_simple_fn((n, 5), || rng.random_range(0.0..4.0)),
                edges: (1..n).map(|v| (rng.random_range(0..v), v)).collect(),
            };
            let model = GnnModel::init(&config, FeatureScheme::Mclass27, 5, 3, i)?;
            let report = model_gradient_check(&model, &GraphBatch::new(&[&graph])?, &[i as usize % 3])?;
            worst = worst.max(report.max_relative_error);
        }
        println!("{:<5} max relative error {worst:.2e}", architecture.name());
    }
    Ok(())
}
