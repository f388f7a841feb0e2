//! Base (unobfuscated) functions from a structured-control-flow grammar.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{CountDistribution, GeneratorConfig};
use crate::cfg::{BasicBlock, ControlFlowGraph, FunctionSample, Instruction, ObfuscationLabel, OptLevel};

pub(crate) const CONDITIONAL_JUMPS: [&str; 8] = ["je", "jne", "jl", "jg", "jle", "jge", "ja", "jb"];

/// Operand count of a synthetic instruction.
pub fn operand_count(mnemonic: &str) -> usize {
    match mnemonic {
        "ret" | "nop" | "cdqe" | "cqo" | "leave" => 0,
        "push" | "pop" | "call" | "jmp" | "inc" | "dec" | "neg" | "not" | "idiv" | "div" | "mul" => 1,
        m if m.starts_with('j') || m.starts_with("set") => 1,
        _ => 2,
    }
}

pub(crate) fn insn(mnemonic: &str) -> Instruction {
    Instruction::new(mnemonic, operand_count(mnemonic))
}

/// Random generator for sample `index`, stage `tag`.
pub(crate) fn rng_for(seed: u64, index: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << 8) | (tag & 0xff));
    rng
}

const STYLE_SALT: u64 = 0x5717_1e00_d21f_7000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Production {
    Sequence,
    IfThen,
    IfThenElse,
    Loop,
}

const PRODUCTIONS: [(Production, f64); 4] = [
    (Production::Sequence, 0.40),
    (Production::IfThen, 0.25),
    (Production::IfThenElse, 0.15),
    (Production::Loop, 0.20),
];

/// Per-project coding style: perturbed mnemonic weights and grammar preferences.
#[derive(Debug, Clone)]
pub struct ProjectStyle {
    mnemonics: Vec<String>,
    mnemonic_dist: WeightedIndex<f64>,
    production_weights: [f64; 4],
}

impl ProjectStyle {
    pub fn new(config: &GeneratorConfig, project_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ STYLE_SALT);
        rng.set_stream(project_index as u64);
        let sigma = config.project_drift;
        let mut drift = |w: f64| {
            let z: f64 = rng.sample(StandardNormal);
            w * (sigma * z).exp()
        };
        let (mnemonics, weights): (Vec<String>, Vec<f64>) = config
            .mnemonic_profile
            .iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|(m, &w)| (m.clone(), drift(w)))
            .unzip();
        let production_weights = PRODUCTIONS.map(|(_, w)| drift(w));
        ProjectStyle {
            mnemonics,
            mnemonic_dist: WeightedIndex::new(weights).expect("validated profile"),
            production_weights,
        }
    }

    pub fn mnemonic(&self, rng: &mut ChaCha8Rng) -> &str {
        &self.mnemonics[self.mnemonic_dist.sample(rng)]
    }
}

pub(crate) fn sample_count(dist: &CountDistribution, rng: &mut ChaCha8Rng) -> usize {
    let index = WeightedIndex::new(dist.pmf()).expect("validated distribution");
    dist.min + index.sample(rng)
}

struct Grammar<'a> {
    rng: &'a mut ChaCha8Rng,
    n_blocks: usize,
    edges: Vec<(usize, usize)>,
    weights: [f64; 4],
}

impl Grammar<'_> {
    fn block(&mut self) -> usize {
        self.n_blocks += 1;
        self.n_blocks - 1
    }

    /// Builds a region of exactly `m` blocks; returns its entry and its exit, whose single
    /// continuation edge is added by the caller.
    fn region(&mut self, m: usize) -> (usize, usize) {
        if m == 1 {
            let b = self.block();
            return (b, b);
        }
        let allowed = |p: Production| match p {
            Production::Sequence | Production::Loop => m >= 2,
            Production::IfThen => m >= 3,
            Production::IfThenElse => m >= 4,
        };
        let weights: Vec<f64> = PRODUCTIONS
            .iter()
            .zip(self.weights)
            .map(|((p, _), w)| if allowed(*p) { w } else { 0.0 })
            .collect();
        let choice = WeightedIndex::new(&weights).expect("sequence is always allowed").sample(self.rng);
        match PRODUCTIONS[choice].0 {
            Production::Sequence => {
                let a = self.rng.random_range(1..m);
                let (e1, x1) = self.region(a);
                let (e2, x2) = self.region(m - a);
                self.edges.push((x1, e2));
                (e1, x2)
            }
            Production::IfThen => {
                let head = self.block();
                let (te, tx) = self.region(m - 2);
                let join = self.block();
                self.edges.extend([(head, te), (head, join), (tx, join)]);
                (head, join)
            }
            Production::IfThenElse => {
                let head = self.block();
                let t = self.rng.random_range(1..=m - 3);
                let (te, tx) = self.region(t);
                let (ee, ex) = self.region(m - 2 - t);
                let join = self.block();
                self.edges.extend([(head, te), (head, ee), (tx, join), (ex, join)]);
                (head, join)
            }
            Production::Loop => {
                let (be, bx) = self.region(m - 1);
                let latch = self.block();
                self.edges.extend([(bx, latch), (latch, be)]);
                (be, latch)
            }
        }
    }
}

/// Fills blocks with body instructions from the style plus a terminator matching the block's
/// out-degree.
pub(crate) fn build_cfg(
    n: usize,
    edges: &[(usize, usize)],
    style: &ProjectStyle,
    insn_counts: &CountDistribution,
    rng: &mut ChaCha8Rng,
) -> ControlFlowGraph {
    let mut out_degree = vec![0; n];
    for &(u, _) in edges {
        out_degree[u] += 1;
    }
    let blocks = (0..n)
        .map(|b| {
            let body = sample_count(insn_counts, rng);
            let mut instructions: Vec<Instruction> = (0..body).map(|_| insn(style.mnemonic(rng))).collect();
            match out_degree[b] {
                0 => instructions.push(insn("ret")),
                1 => {
                    if rng.random_bool(0.4) {
                        instructions.push(insn("jmp"));
                    }
                }
                _ => {
                    instructions.push(insn(if rng.random_bool(0.7) { "cmp" } else { "test" }));
                    instructions.push(insn(CONDITIONAL_JUMPS[rng.random_range(0..CONDITIONAL_JUMPS.len())]));
                }
            }
            BasicBlock {
                id: format!("B{b}"),
                instructions,
            }
        })
        .collect();
    ControlFlowGraph {
        blocks,
        edges: edges.iter().map(|&(u, v)| (format!("B{u}"), format!("B{v}"))).collect(),
        entry: "B0".into(),
    }
}

/// Symbol of base function `index`.
pub fn base_symbol(index: usize) -> String {
    format!("f{index:05}")
}

pub(crate) fn base_with_style(config: &GeneratorConfig, index: usize, style: &ProjectStyle) -> FunctionSample {
    let mut rng = rng_for(config.seed, index as u64, 0);
    let n = sample_count(&config.blocks, &mut rng);
    let mut grammar = Grammar {
        rng: &mut rng,
        n_blocks: 0,
        edges: Vec::new(),
        weights: style.production_weights,
    };
    if n > 1 {
        let (_, exit) = grammar.region(n - 1);
        let ret = grammar.block();
        grammar.edges.push((exit, ret));
    } else {
        grammar.block();
    }
    let edges = std::mem::take(&mut grammar.edges);
    debug_assert_eq!(grammar.n_blocks, n);
    let cfg = build_cfg(n, &edges, style, &config.instructions, &mut rng);
    let project = config.projects[index % config.projects.len()].clone();
    let symbol = base_symbol(index);
    FunctionSample {
        function_id: format!("{project}/{project}/{symbol}"),
        symbol,
        binary: project.clone(),
        project,
        opt_level: OptLevel::O0,
        obfuscation: ObfuscationLabel::NONE,
        cfg,
        degenerate: false,
    }
}

/// Base function `index`: a deterministic function of `(config.seed, index)`.
pub fn gen_base_function(config: &GeneratorConfig, index: usize) -> FunctionSample {
    let style = ProjectStyle::new(config, index % config.projects.len());
    base_with_style(config, index, &style)
}
