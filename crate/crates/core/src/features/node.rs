//! Per-basic-block feature matrices for message-passing models.

use ndarray::Array2;

use crate::cfg::{CfgIndex, ControlFlowGraph, Vocabulary};
use crate::error::{Error, Result};
use crate::features::taxonomy::{MnemonicClassTaxonomy, N_CLASSES};
use crate::features::FeatureScheme;
use crate::pcode;

/// Width of the structural slice shared by `pcode_sem` and `asm_sem`.
pub const STRUCTURAL_DIM: usize = 11;

pub const STRUCTURAL_NAMES: [&str; STRUCTURAL_DIM] = [
    "n_instructions",
    "in_degree",
    "out_degree",
    "is_entry",
    "is_exit",
    "n_call_like",
    "n_ret_like",
    "n_cond_branch",
    "n_uncond_branch",
    "n_arithmetic",
    "n_load_store",
];

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureMatrix {
    pub scheme: FeatureScheme,
    /// Block id of each row.
    pub node_order: Vec<String>,
    pub values: Array2<f64>,
}

impl NodeFeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }
}

/// Inputs some schemes need besides the CFG itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureContext<'a> {
    pub taxonomy: Option<&'a MnemonicClassTaxonomy>,
    pub pcode_vocabulary: Option<&'a Vocabulary>,
    pub assembly_vocabulary: Option<&'a Vocabulary>,
}

fn require<'a, T>(value: Option<&'a T>, scheme: FeatureScheme, what: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::MissingContext {
        scheme: scheme.name().to_string(),
        what: what.to_string(),
    })
}

pub fn node_feature_dim(scheme: FeatureScheme, ctx: &FeatureContext<'_>) -> Result<usize> {
    Ok(match scheme {
        FeatureScheme::Identity => 1,
        FeatureScheme::Mclass27 => N_CLASSES,
        FeatureScheme::PcodeSem => STRUCTURAL_DIM + require(ctx.pcode_vocabulary, scheme, "a Pcode vocabulary")?.len(),
        FeatureScheme::AsmSem => {
            STRUCTURAL_DIM + require(ctx.assembly_vocabulary, scheme, "an assembly vocabulary")?.len()
        }
        other => return Err(Error::UnknownScheme(format!("{} is not a node scheme", other.name()))),
    })
}

fn structural_slice(
    cfg: &ControlFlowGraph,
    index: &CfgIndex,
    taxonomy: &MnemonicClassTaxonomy,
    out: &mut Array2<f64>,
) {
    for (i, block) in cfg.blocks.iter().enumerate() {
        let mut row = [0.0; STRUCTURAL_DIM];
        row[0] = block.instructions.len() as f64;
        row[1] = index.pred[i].len() as f64;
        row[2] = index.succ[i].len() as f64;
        row[3] = (i == index.entry) as u8 as f64;
        row[4] = index.succ[i].is_empty() as u8 as f64;
        for insn in &block.instructions {
            let r = taxonomy.roles(&insn.mnemonic);
            row[5] += r.call_like as u8 as f64;
            row[6] += r.ret_like as u8 as f64;
            row[7] += r.cond_branch as u8 as f64;
            row[8] += r.uncond_branch as u8 as f64;
            row[9] += r.arithmetic as u8 as f64;
            row[10] += r.load_store as u8 as f64;
        }
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
}

/// Builds the `(n_blocks × d)` matrix of a node scheme. Row `i` describes `cfg.blocks[i]`.
pub fn node_features(
    cfg: &ControlFlowGraph,
    scheme: FeatureScheme,
    ctx: &FeatureContext<'_>,
) -> Result<NodeFeatureMatrix> {
    let n = cfg.blocks.len();
    let dim = node_feature_dim(scheme, ctx)?;
    let mut values = Array2::zeros((n, dim));
    match scheme {
        FeatureScheme::Identity => values.fill(1.0),
        FeatureScheme::Mclass27 => {
            let taxonomy = require(ctx.taxonomy, scheme, "a mnemonic class taxonomy")?;
            for (i, block) in cfg.blocks.iter().enumerate() {
                for insn in &block.instructions {
                    values[[i, taxonomy.class_of(&insn.mnemonic)]] += 1.0;
                }
            }
        }
        FeatureScheme::PcodeSem | FeatureScheme::AsmSem => {
            let taxonomy = require(ctx.taxonomy, scheme, "a mnemonic class taxonomy")?;
            let index = CfgIndex::new(cfg);
            structural_slice(cfg, &index, taxonomy, &mut values);
            for (i, block) in cfg.blocks.iter().enumerate() {
                for insn in &block.instructions {
                    if scheme == FeatureScheme::PcodeSem {
                        let vocab = ctx.pcode_vocabulary.unwrap();
                        for op in pcode::lift(insn) {
                            if let Some(j) = vocab.get(&op) {
                                values[[i, STRUCTURAL_DIM + j]] += 1.0;
                            }
                        }
                    } else if let Some(j) = ctx.assembly_vocabulary.unwrap().get(&insn.mnemonic) {
                        values[[i, STRUCTURAL_DIM + j]] += 1.0;
                    }
                }
            }
        }
        _ => unreachable!("rejected by node_feature_dim"),
    }
    Ok(NodeFeatureMatrix {
        scheme,
        node_order: cfg.blocks.iter().map(|b| b.id.clone()).collect(),
        values,
    })
}
