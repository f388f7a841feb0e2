//! Splits a synthetic corpus both ways, audits it, then plants a leak and audits again.

use obfugraph::cfg::Obfuscation;
use obfugraph::dataset::*;
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let config = GeneratorConfig {
        seed: 2,
        n_functions: 200,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &Obfuscation::OBFUSCATED)?;
    let p = &config.projects;

    let per_function = split_per_function(&corpus, DEFAULT_RATIOS, 2, DEFAULT_BINS)?;
    let per_binary = split_per_binary(&corpus, &p[..3], &p[3..], DEFAULT_VAL_RATIO, 2, DEFAULT_BINS)?;
    for (name, m) in [("per_function", &per_function), ("per_binary", &per_binary)] {
        let sizes: Vec<String> = SplitSet::ALL.iter().map(|&s| format!("{s} {}", m.len_of(s))).collect();
        println!("{name}: {}; violations {}", sizes.join(", "), audit_leakage(m, &corpus).len());
        for stats in class_ratio_report(m, &corpus).sets {
            println!("  {:<10} unobfuscated fraction {:.3}", stats.set.name(), stats.unobfuscated_fraction);
        }
    }

    let mut leaky = per_function.clone();
    let victim = &corpus[5];
    let moved = match leaky.set_of(&victim.function_id) {
        Some(SplitSet::Test) => SplitSet::Train,
        _ => SplitSet::Test,
    };
    leaky.assignment.insert(victim.function_id.clone(), moved);
    for v in audit_leakage(&leaky, &corpus) {
        println!("planted: {v}");
    }
    Ok(())
}
