//! Synthetic corpus generation: base CFGs from a small grammar plus label-faithful
//! imitations of the obfuscating passes.

mod base;
mod config;
mod transforms;

pub use base::{base_symbol, gen_base_function, operand_count, ProjectStyle};
pub use config::{default_mnemonic_profile, CountDistribution, GeneratorConfig, TransformConfig};
pub use transforms::{
    apply_copy, apply_copy_with, apply_encode_arithmetic, apply_encode_literals, apply_flatten, apply_merge,
    apply_mix1, apply_mix1_with, apply_mix2, apply_mix2_with, apply_opaque_predicates, apply_split,
    apply_split_with, apply_substitution, apply_variant, apply_virtualize, substitution_pattern, ENCODABLE,
    MBA_OPS, MOV_CLASS,
};

use rand::RngCore;

use crate::cfg::{FunctionSample, Obfuscation};
use crate::error::{Error, Result};

/// Seed of the transform producing variant `label` of base function `index`.
pub fn variant_seed(seed: u64, index: usize, label: Obfuscation) -> u64 {
    base::rng_for(seed, index as u64, label.index() as u64 + 1).next_u64()
}

/// Index of the donor merged into base function `index`: another function of the same
/// project when one exists.
pub fn donor_index(index: usize, n_functions: usize, n_projects: usize) -> Option<usize> {
    if index + n_projects < n_functions {
        Some(index + n_projects)
    } else if index >= n_projects {
        Some(index - n_projects)
    } else if n_functions > 1 {
        Some((index + 1) % n_functions)
    } else {
        None
    }
}

/// Every base function followed by one variant per label of `variant_set`.
pub fn gen_corpus(config: &GeneratorConfig, variant_set: &[Obfuscation]) -> Result<Vec<FunctionSample>> {
    config.check()?;
    if let Some(l) = variant_set.iter().find(|l| !l.is_obfuscated()) {
        return Err(Error::Config(format!("variant set may only contain obfuscation labels, got {}", l.name())));
    }
    let mut labels = variant_set.to_vec();
    labels.sort_by_key(|l| l.index());
    labels.dedup();
    let styles: Vec<ProjectStyle> = (0..config.projects.len()).map(|p| ProjectStyle::new(config, p)).collect();
    let n = config.n_functions;
    let bases: Vec<FunctionSample> = (0..n)
        .map(|i| base::base_with_style(config, i, &styles[i % styles.len()]))
        .collect();
    let mut corpus = Vec::with_capacity(n * (labels.len() + 1));
    for (i, f) in bases.iter().enumerate() {
        corpus.push(f.clone());
        let donor = donor_index(i, n, config.projects.len()).map(|j| &bases[j]);
        for &label in &labels {
            let seed = variant_seed(config.seed, i, label);
            corpus.push(apply_variant(label, f, donor, seed, &config.transforms));
        }
    }
    Ok(corpus)
}
