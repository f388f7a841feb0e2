//! Computes every feature scheme for one synthetic function and its flattened variant.

use obfugraph::cfg::{FunctionSample, Obfuscation};
use obfugraph::features::graph::GRAPH23_NAMES;
use obfugraph::features::{default_taxonomy, graph_level_features, FeatureScheme, Featurizer};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let config = GeneratorConfig {
        seed: 4,
        n_functions: 30,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &[Obfuscation::Flatten])?;
    let refs: Vec<&FunctionSample> = corpus.iter().collect();
    let (base, flat) = (&corpus[0], &corpus[1]);

    let a = graph_level_features(&base.cfg).values;
    let b = graph_level_features(&flat.cfg).values;
    println!("{:<28} {:>8} {:>8}", "graph23", "base", "flatten");
    for (name, (x, y)) in GRAPH23_NAMES.iter().zip(a.iter().zip(&b)) {
        println!("{name:<28} {x:>8.2} {y:>8.2}");
    }

    for scheme in FeatureScheme::ALL {
        let featurizer = Featurizer::fit(scheme, &refs, default_taxonomy().clone())?;
        let shape = if !scheme.is_graph_level() {
            let m = featurizer.node_matrix(&base.cfg)?;
            format!("{} x {}", m.values.nrows(), m.values.ncols())
        } else {
            format!("{}", featurizer.graph_vector(&base.cfg)?.values.len())
        };
        println!("{:<10} dim {:>4}  shape {shape}", scheme.name(), featurizer.dim());
    }
    Ok(())
}
