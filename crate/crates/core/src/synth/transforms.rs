//! Synthetic obfuscating transforms.
//!
//! They imitate the structural and statistical signatures of the real passes (dispatcher
//! hubs, dead branches, inflated arithmetic, cloned blocks) without preserving program
//! semantics. Each transform is a deterministic function of its input and seed. When a
//! transform cannot apply, its input passes through relabelled and flagged `degenerate`.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::base::{insn, CONDITIONAL_JUMPS};
use super::config::TransformConfig;
use crate::cfg::{BasicBlock, ControlFlowGraph, FunctionSample, Instruction, Obfuscation, ObfuscationLabel};

/// Mnemonics rewritten by arithmetic encoding.
pub const ENCODABLE: [&str; 16] = [
    "add", "sub", "xor", "or", "and", "imul", "mul", "shl", "shr", "sar", "neg", "not", "inc", "dec", "adc", "sbb",
];
/// Mnemonics an encoded arithmetic site expands into.
pub const MBA_OPS: [&str; 7] = ["add", "sub", "xor", "or", "and", "shl", "imul"];
/// Instructions carrying literals that literal encoding obscures.
pub const MOV_CLASS: [&str; 5] = ["mov", "movabs", "movzx", "movsx", "movsxd"];
const LITERAL_OPS: [&str; 5] = ["mov", "lea", "add", "sub", "xor"];
const PREDICATE_OPS: [&str; 4] = ["add", "imul", "sub", "neg"];
const JUNK_OPS: [&str; 6] = ["add", "sub", "imul", "inc", "dec", "adc"];

fn pick<'a>(ops: &[&'a str], rng: &mut ChaCha8Rng) -> &'a str {
    ops.choose(rng).expect("non-empty")
}

fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

fn used_ids(cfg: &ControlFlowGraph) -> HashSet<String> {
    cfg.blocks.iter().map(|b| b.id.clone()).collect()
}

fn fresh(used: &mut HashSet<String>, prefix: &str) -> String {
    let mut k = 0;
    loop {
        let id = format!("{prefix}{k}");
        if used.insert(id.clone()) {
            return id;
        }
        k += 1;
    }
}

fn position(cfg: &ControlFlowGraph, id: &str) -> usize {
    cfg.blocks.iter().position(|b| b.id == id).expect("known block")
}

/// Redirects every edge into `target` (and the entry, if it is `target`) to `to`.
fn redirect_incoming(cfg: &mut ControlFlowGraph, target: &str, to: &str) {
    for e in &mut cfg.edges {
        if e.1 == target {
            e.1 = to.to_string();
        }
    }
    if cfg.entry == target {
        cfg.entry = to.to_string();
    }
}

/// `count` arithmetic-heavy instructions followed by a compare and a conditional jump.
fn predicate_block(id: String, count: usize, rng: &mut ChaCha8Rng) -> BasicBlock {
    let mut instructions: Vec<Instruction> = (0..count).map(|_| insn(pick(&PREDICATE_OPS, rng))).collect();
    instructions.push(insn("cmp"));
    instructions.push(insn(pick(&CONDITIONAL_JUMPS, rng)));
    BasicBlock { id, instructions }
}

fn site_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n)
}

fn chosen_sites(cfg: &ControlFlowGraph, rate: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = cfg.blocks.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut chosen: Vec<usize> = idx[..site_count(rate, n)].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| cfg.blocks[i].id.clone()).collect()
}

// ---------------------------------------------------------------------------
// CFG-level transforms; `None` means not applicable.

pub(crate) fn flatten_cfg(cfg: &ControlFlowGraph, rng: &mut ChaCha8Rng) -> Option<ControlFlowGraph> {
    if cfg.blocks.len() < 2 {
        return None;
    }
    let mut used = used_ids(cfg);
    let dispatcher = fresh(&mut used, "DISPATCH");
    let mut blocks = vec![BasicBlock {
        id: dispatcher.clone(),
        instructions: vec![insn("mov"), insn("cmp"), insn(pick(&CONDITIONAL_JUMPS, rng)), insn("jmp")],
    }];
    let mut edges = Vec::with_capacity(2 * cfg.blocks.len());
    for b in &cfg.blocks {
        let mut block = b.clone();
        block.instructions.push(insn("mov"));
        block.instructions.push(insn("jmp"));
        edges.push((dispatcher.clone(), b.id.clone()));
        edges.push((b.id.clone(), dispatcher.clone()));
        blocks.push(block);
    }
    Some(ControlFlowGraph {
        blocks,
        edges,
        entry: dispatcher,
    })
}

pub(crate) fn opaque_cfg(cfg: &ControlFlowGraph, rate: f64, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    assert!(rate > 0.0 && rate <= 1.0, "opaque predicate rate must lie in (0, 1]");
    let mut out = cfg.clone();
    let mut used = used_ids(cfg);
    for site in chosen_sites(cfg, rate, rng) {
        let p = fresh(&mut used, "OPAQUE");
        let j = fresh(&mut used, "JUNK");
        redirect_incoming(&mut out, &site, &p);
        let count = rng.random_range(4..=8);
        out.blocks.push(predicate_block(p.clone(), count, rng));
        let junk_len = rng.random_range(3..=6);
        let mut junk: Vec<Instruction> = (0..junk_len).map(|_| insn(pick(&JUNK_OPS, rng))).collect();
        junk.push(insn("jmp"));
        out.blocks.push(BasicBlock {
            id: j.clone(),
            instructions: junk,
        });
        out.edges.push((p.clone(), site.clone()));
        out.edges.push((p, j.clone()));
        out.edges.push((j, site));
    }
    out
}

/// Rewrites instructions in place; if none matched, inserts `fallback` at the start of the entry block.
fn rewrite_instructions<F>(cfg: &ControlFlowGraph, mut expand: F, fallback: Vec<Instruction>) -> ControlFlowGraph
where
    F: FnMut(&Instruction) -> Option<Vec<Instruction>>,
{
    let mut out = cfg.clone();
    let mut sites = 0;
    for block in &mut out.blocks {
        let mut rewritten = Vec::with_capacity(block.instructions.len());
        for i in &block.instructions {
            match expand(i) {
                Some(replacement) => {
                    sites += 1;
                    rewritten.extend(replacement);
                }
                None => rewritten.push(i.clone()),
            }
        }
        block.instructions = rewritten;
    }
    if sites == 0 {
        log::debug!("no rewritable instruction; injecting one site into the entry block");
        let e = position(&out, &out.entry.clone());
        out.blocks[e].instructions.splice(0..0, fallback);
    }
    out
}

pub(crate) fn encode_arithmetic_cfg(cfg: &ControlFlowGraph, depth: usize, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    assert!(depth >= 1, "encoding depth must be at least 1");
    let expansion = |rng: &mut ChaCha8Rng| (0..3 * depth).map(|_| insn(pick(&MBA_OPS, rng))).collect::<Vec<_>>();
    let fallback = expansion(rng);
    rewrite_instructions(
        cfg,
        |i| ENCODABLE.contains(&i.mnemonic.as_str()).then(|| expansion(rng)),
        fallback,
    )
}

pub(crate) fn encode_literals_cfg(cfg: &ControlFlowGraph, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    let extra = |rng: &mut ChaCha8Rng| [insn(pick(&LITERAL_OPS, rng)), insn(pick(&LITERAL_OPS, rng))];
    let mut fallback = vec![insn("mov")];
    fallback.extend(extra(rng));
    rewrite_instructions(
        cfg,
        |i| {
            MOV_CLASS.contains(&i.mnemonic.as_str()).then(|| {
                let mut v = vec![i.clone()];
                v.extend(extra(rng));
                v
            })
        },
        fallback,
    )
}

/// Fixed rewrite patterns of instruction substitution.
pub fn substitution_pattern(mnemonic: &str) -> Option<&'static [&'static str]> {
    Some(match mnemonic {
        "add" => &["neg", "sub"],
        "sub" => &["neg", "add"],
        "xor" => &["not", "and", "not", "and", "or"],
        "and" => &["not", "xor", "and"],
        "or" => &["and", "xor", "or"],
        _ => return None,
    })
}

pub(crate) fn substitution_cfg(cfg: &ControlFlowGraph) -> ControlFlowGraph {
    let expand = |p: &[&str]| p.iter().map(|m| insn(m)).collect::<Vec<_>>();
    rewrite_instructions(
        cfg,
        |i| substitution_pattern(&i.mnemonic).map(expand),
        expand(substitution_pattern("add").unwrap()),
    )
}

pub(crate) fn split_cfg(cfg: &ControlFlowGraph, probability: f64, rng: &mut ChaCha8Rng) -> Option<ControlFlowGraph> {
    let eligible: Vec<usize> = (0..cfg.blocks.len())
        .filter(|&i| cfg.blocks[i].instructions.len() >= 2)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let mut selected: Vec<usize> = eligible.iter().copied().filter(|_| rng.random_bool(probability)).collect();
    if selected.is_empty() {
        selected.push(*eligible.choose(rng).unwrap());
    }
    let mut used = used_ids(cfg);
    let mut blocks = Vec::with_capacity(cfg.blocks.len() + selected.len());
    let mut edges = cfg.edges.clone();
    for (i, block) in cfg.blocks.iter().enumerate() {
        if !selected.contains(&i) {
            blocks.push(block.clone());
            continue;
        }
        let tail_id = fresh(&mut used, "SPLIT");
        let cut = block.instructions.len() / 2;
        for e in &mut edges {
            if e.0 == block.id {
                e.0 = tail_id.clone();
            }
        }
        edges.push((block.id.clone(), tail_id.clone()));
        blocks.push(BasicBlock {
            id: block.id.clone(),
            instructions: block.instructions[..cut].to_vec(),
        });
        blocks.push(BasicBlock {
            id: tail_id,
            instructions: block.instructions[cut..].to_vec(),
        });
    }
    Some(ControlFlowGraph {
        blocks,
        edges,
        entry: cfg.entry.clone(),
    })
}

pub(crate) fn merge_cfg(cfg: &ControlFlowGraph, donor: &ControlFlowGraph, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    let mut used = used_ids(cfg);
    let renamed: std::collections::HashMap<&str, String> = donor
        .blocks
        .iter()
        .map(|b| (b.id.as_str(), fresh(&mut used, &format!("M_{}_", b.id))))
        .collect();
    let selector = fresh(&mut used, "SELECT");
    let join = fresh(&mut used, "JOIN");
    let mut blocks = vec![BasicBlock {
        id: selector.clone(),
        instructions: vec![insn("mov"), insn("cmp"), insn(pick(&CONDITIONAL_JUMPS, rng))],
    }];
    blocks.extend(cfg.blocks.iter().cloned());
    blocks.extend(donor.blocks.iter().map(|b| BasicBlock {
        id: renamed[b.id.as_str()].clone(),
        instructions: b.instructions.clone(),
    }));
    let mut edges = vec![
        (selector.clone(), cfg.entry.clone()),
        (selector.clone(), renamed[donor.entry.as_str()].clone()),
    ];
    edges.extend(cfg.edges.iter().cloned());
    edges.extend(
        donor
            .edges
            .iter()
            .map(|(u, v)| (renamed[u.as_str()].clone(), renamed[v.as_str()].clone())),
    );
    let has_successor: HashSet<&str> = edges.iter().map(|e| e.0.as_str()).collect();
    let exits: Vec<String> = blocks
        .iter()
        .filter(|b| !has_successor.contains(b.id.as_str()))
        .map(|b| b.id.clone())
        .collect();
    edges.extend(exits.into_iter().map(|x| (x, join.clone())));
    blocks.push(BasicBlock {
        id: join,
        instructions: vec![insn("mov"), insn("ret")],
    });
    ControlFlowGraph {
        blocks,
        edges,
        entry: selector,
    }
}

pub(crate) fn copy_cfg(cfg: &ControlFlowGraph, rate: f64, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    assert!(rate > 0.0 && rate <= 1.0, "copy rate must lie in (0, 1]");
    let mut out = cfg.clone();
    let mut used = used_ids(cfg);
    for site in chosen_sites(cfg, rate, rng) {
        let p = fresh(&mut used, "CHOOSE");
        let clone = fresh(&mut used, &format!("{site}_copy"));
        redirect_incoming(&mut out, &site, &p);
        let count = rng.random_range(2..=4);
        out.blocks.push(predicate_block(p.clone(), count, rng));
        let instructions = out.blocks[position(&out, &site)].instructions.clone();
        out.blocks.push(BasicBlock {
            id: clone.clone(),
            instructions,
        });
        let outgoing: Vec<String> = out.edges.iter().filter(|e| e.0 == site).map(|e| e.1.clone()).collect();
        out.edges.extend(outgoing.into_iter().map(|v| (clone.clone(), v)));
        out.edges.push((p.clone(), site.clone()));
        out.edges.push((p, clone));
    }
    out
}

pub(crate) fn virtualize_cfg(cfg: &ControlFlowGraph, rng: &mut ChaCha8Rng) -> ControlFlowGraph {
    let mut used = used_ids(cfg);
    let entry = fresh(&mut used, "VM_ENTRY");
    let dispatch = fresh(&mut used, "VM_DISPATCH");
    let exit = fresh(&mut used, "VM_EXIT");
    let mut blocks = vec![
        BasicBlock {
            id: entry.clone(),
            instructions: ["push", "push", "mov", "lea", "mov"].iter().map(|m| insn(m)).collect(),
        },
        BasicBlock {
            id: dispatch.clone(),
            instructions: vec![
                insn("movzx"),
                insn("mov"),
                insn("cmp"),
                insn(pick(&CONDITIONAL_JUMPS, rng)),
                insn("jmp"),
            ],
        },
    ];
    let mut edges = vec![(entry.clone(), dispatch.clone())];
    for b in &cfg.blocks {
        let mut handler = b.clone();
        handler.instructions.push(insn("add"));
        handler.instructions.push(insn("jmp"));
        blocks.push(handler);
        edges.push((dispatch.clone(), b.id.clone()));
        edges.push((b.id.clone(), dispatch.clone()));
    }
    edges.push((dispatch, exit.clone()));
    blocks.push(BasicBlock {
        id: exit,
        instructions: vec![insn("pop"), insn("pop"), insn("ret")],
    });
    ControlFlowGraph { blocks, edges, entry }
}

// ---------------------------------------------------------------------------
// Sample-level transforms

fn relabel(f: &FunctionSample, label: Obfuscation, cfg: Option<ControlFlowGraph>) -> FunctionSample {
    let base_id = f.function_id.split('@').next().unwrap_or(&f.function_id);
    FunctionSample {
        function_id: format!("{base_id}@{}", label.name()),
        symbol: f.symbol.clone(),
        project: f.project.clone(),
        binary: f.binary.clone(),
        opt_level: f.opt_level,
        obfuscation: ObfuscationLabel::synthetic(label),
        degenerate: cfg.is_none(),
        cfg: cfg.unwrap_or_else(|| f.cfg.clone()),
    }
}

pub fn apply_flatten(f: &FunctionSample, seed: u64) -> FunctionSample {
    relabel(f, Obfuscation::Flatten, flatten_cfg(&f.cfg, &mut stage_rng(seed, 0)))
}

pub fn apply_opaque_predicates(f: &FunctionSample, seed: u64, rate: f64) -> FunctionSample {
    relabel(f, Obfuscation::OpaquePredicates, Some(opaque_cfg(&f.cfg, rate, &mut stage_rng(seed, 0))))
}

pub fn apply_encode_arithmetic(f: &FunctionSample, seed: u64, depth: usize) -> FunctionSample {
    relabel(
        f,
        Obfuscation::EncodeArithmetic,
        Some(encode_arithmetic_cfg(&f.cfg, depth, &mut stage_rng(seed, 0))),
    )
}

pub fn apply_encode_literals(f: &FunctionSample, seed: u64) -> FunctionSample {
    relabel(f, Obfuscation::EncodeLiterals, Some(encode_literals_cfg(&f.cfg, &mut stage_rng(seed, 0))))
}

pub fn apply_substitution(f: &FunctionSample, _seed: u64) -> FunctionSample {
    relabel(f, Obfuscation::Substitution, Some(substitution_cfg(&f.cfg)))
}

pub fn apply_split(f: &FunctionSample, seed: u64) -> FunctionSample {
    apply_split_with(f, seed, TransformConfig::default().split_probability)
}

pub fn apply_split_with(f: &FunctionSample, seed: u64, probability: f64) -> FunctionSample {
    relabel(f, Obfuscation::Split, split_cfg(&f.cfg, probability, &mut stage_rng(seed, 0)))
}

/// Merges `f` with `donor`; without a donor the input passes through as degenerate.
pub fn apply_merge(f: &FunctionSample, donor: Option<&FunctionSample>, seed: u64) -> FunctionSample {
    let cfg = donor.map(|d| merge_cfg(&f.cfg, &d.cfg, &mut stage_rng(seed, 0)));
    relabel(f, Obfuscation::Merge, cfg)
}

pub fn apply_copy(f: &FunctionSample, seed: u64) -> FunctionSample {
    apply_copy_with(f, seed, TransformConfig::default().copy_rate)
}

pub fn apply_copy_with(f: &FunctionSample, seed: u64, rate: f64) -> FunctionSample {
    relabel(f, Obfuscation::Copy, Some(copy_cfg(&f.cfg, rate, &mut stage_rng(seed, 0))))
}

pub fn apply_virtualize(f: &FunctionSample, seed: u64) -> FunctionSample {
    relabel(f, Obfuscation::Virtualize, Some(virtualize_cfg(&f.cfg, &mut stage_rng(seed, 0))))
}

/// Opaque predicates, then arithmetic encoding, then flattening.
fn mix1_cfg(cfg: &ControlFlowGraph, seed: u64, t: &TransformConfig) -> ControlFlowGraph {
    let with_predicates = opaque_cfg(cfg, t.opaque_rate, &mut stage_rng(seed, 1));
    let encoded = encode_arithmetic_cfg(&with_predicates, t.encode_depth, &mut stage_rng(seed, 2));
    flatten_cfg(&encoded, &mut stage_rng(seed, 3)).expect("opaque predicates add blocks")
}

pub fn apply_mix1(f: &FunctionSample, seed: u64) -> FunctionSample {
    apply_mix1_with(f, seed, &TransformConfig::default())
}

pub fn apply_mix1_with(f: &FunctionSample, seed: u64, t: &TransformConfig) -> FunctionSample {
    relabel(f, Obfuscation::Mix1, Some(mix1_cfg(&f.cfg, seed, t)))
}

pub fn apply_mix2(f: &FunctionSample, seed: u64) -> FunctionSample {
    apply_mix2_with(f, seed, &TransformConfig::default())
}

/// Split first, then the Mix1 chain. Degenerate when nothing could be split.
pub fn apply_mix2_with(f: &FunctionSample, seed: u64, t: &TransformConfig) -> FunctionSample {
    let split = split_cfg(&f.cfg, t.split_probability, &mut stage_rng(seed, 4));
    let degenerate = split.is_none();
    let mut out = relabel(
        f,
        Obfuscation::Mix2,
        Some(mix1_cfg(split.as_ref().unwrap_or(&f.cfg), seed, t)),
    );
    out.degenerate = degenerate;
    out
}

/// Applies the transform named by `label`. `donor` is only used by [`Obfuscation::Merge`].
pub fn apply_variant(
    label: Obfuscation,
    f: &FunctionSample,
    donor: Option<&FunctionSample>,
    seed: u64,
    t: &TransformConfig,
) -> FunctionSample {
    match label {
        Obfuscation::None => f.clone(),
        Obfuscation::EncodeArithmetic => apply_encode_arithmetic(f, seed, t.encode_depth),
        Obfuscation::EncodeLiterals => apply_encode_literals(f, seed),
        Obfuscation::Virtualize => apply_virtualize(f, seed),
        Obfuscation::OpaquePredicates => apply_opaque_predicates(f, seed, t.opaque_rate),
        Obfuscation::Flatten => apply_flatten(f, seed),
        Obfuscation::Split => apply_split_with(f, seed, t.split_probability),
        Obfuscation::Merge => apply_merge(f, donor, seed),
        Obfuscation::Copy => apply_copy_with(f, seed, t.copy_rate),
        Obfuscation::Mix1 => apply_mix1_with(f, seed, t),
        Obfuscation::Mix2 => apply_mix2_with(f, seed, t),
        Obfuscation::Substitution => apply_substitution(f, seed),
    }
}
