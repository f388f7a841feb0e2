//! Generates a small labelled corpus and summarizes it per label.
//!
//! `cargo run --example synth_corpus -- 50 out.jsonl`

use std::collections::BTreeMap;

use obfugraph::cfg::{write_corpus, Obfuscation};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

fn main() -> obfugraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_functions = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let config = GeneratorConfig {
        seed: 1,
        n_functions,
        ..Default::default()
    };
    let corpus = gen_corpus(&config, &Obfuscation::OBFUSCATED)?;

    let mut stats: BTreeMap<usize, (&str, usize, usize, usize)> = BTreeMap::new();
    for f in &corpus {
        let e = stats.entry(f.label().index()).or_insert((f.label().name(), 0, 0, 0));
        e.1 += 1;
        e.2 += f.cfg.blocks.len();
        e.3 += f.degenerate as usize;
    }
    println!("{:<18} {:>7} {:>11} {:>10}", "label", "samples", "mean blocks", "degenerate");
    for (name, n, blocks, degenerate) in stats.values() {
        println!("{name:<18} {n:>7} {:>11.1} {degenerate:>10}", *blocks as f64 / *n as f64);
    }
    if let Some(path) = args.next() {
        write_corpus(std::fs::File::create(&path)?, &corpus)?;
        println!("wrote {path}");
    }
    Ok(())
}
