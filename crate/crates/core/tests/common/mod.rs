#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use obfugraph::cfg::{ControlFlowGraph, FunctionSample, Obfuscation};
use obfugraph::features::{default_taxonomy, STRUCTURAL_DIM};
use obfugraph::synth::{gen_corpus, GeneratorConfig};

pub fn corpus(seed: u64, n_functions: usize) -> Vec<FunctionSample> {
    let config = GeneratorConfig {
        seed,
        n_functions,
        ..Default::default()
    };
    gen_corpus(&config, &Obfuscation::OBFUSCATED).unwrap()
}

/// Every `stride`-th sample, for a mix of labels.
pub fn spread(corpus: &[FunctionSample], count: usize) -> Vec<&FunctionSample> {
    let stride = (corpus.len() / count).max(1);
    corpus.iter().step_by(stride).take(count).collect()
}

/// Edges as index pairs, in edge-list order.
pub fn index_edges(cfg: &ControlFlowGraph) -> Vec<(usize, usize)> {
    let pos: HashMap<&str, usize> = cfg.blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    cfg.edges.iter().map(|(a, b)| (pos[a.as_str()], pos[b.as_str()])).collect()
}

pub fn entry_index(cfg: &ControlFlowGraph) -> usize {
    cfg.blocks.iter().position(|b| b.id == cfg.entry).unwrap()
}

/// Weakly connected components by repeated label relaxation.
pub fn naive_components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            let m = label[a].min(label[b]);
            if label[a] != m || label[b] != m {
                label[a] = m;
                label[b] = m;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    label.iter().collect::<HashSet<_>>().len()
}

pub fn naive_cyclomatic(cfg: &ControlFlowGraph) -> i64 {
    let n = cfg.blocks.len();
    let edges = index_edges(cfg);
    edges.len() as i64 - n as i64 + 2 * naive_components(n, &edges) as i64
}

/// `reach[i][j]`: a path of length ≥ 0 leads from `i` to `j`.
pub fn reachability(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

pub fn naive_longest_condensed_path(n: usize, edges: &[(usize, usize)]) -> usize {
    let reach = reachability(n, edges);
    let comp: Vec<usize> = (0..n).map(|i| (0..n).find(|&j| reach[i][j] && reach[j][i]).unwrap()).collect();
    let dag: HashSet<(usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (comp[a], comp[b]))
        .filter(|(a, b)| a != b)
        .collect();
    fn longest(c: usize, dag: &HashSet<(usize, usize)>, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&v) = memo.get(&c) {
            return v;
        }
        let succ: Vec<usize> = dag.iter().filter(|(a, _)| *a == c).map(|(_, b)| *b).collect();
        let v = succ.into_iter().map(|d| 1 + longest(d, dag, memo)).max().unwrap_or(0);
        memo.insert(c, v);
        v
    }
    let mut memo = HashMap::new();
    let comps: HashSet<usize> = comp.iter().copied().collect();
    comps.into_iter().map(|c| longest(c, &dag, &mut memo)).max().unwrap_or(0)
}

/// Gray-target edges of a recursive depth-first search from `entry`, successors in edge order.
pub fn naive_back_edges(n: usize, edges: &[(usize, usize)], entry: usize) -> usize {
    fn visit(v: usize, succ: &[Vec<usize>], color: &mut [u8], back: &mut usize) {
        color[v] = 1;
        for &w in &succ[v] {
            match color[w] {
                0 => visit(w, succ, color, back),
                1 => *back += 1,
                _ => {}
            }
        }
        color[v] = 2;
    }
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
    }
    let mut color = vec![0u8; n];
    let mut back = 0;
    visit(entry, &succ, &mut color, &mut back);
    back
}

pub fn mnemonic_counts(f: &FunctionSample) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for i in f.cfg.blocks.iter().flat_map(|b| &b.instructions) {
        *m.entry(i.mnemonic.clone()).or_insert(0) += 1;
    }
    m
}

/// All 23 graph-level features recounted from scratch.
pub fn naive_graph23(f: &FunctionSample) -> Vec<f64> {
    let tax = default_taxonomy();
    let cfg = &f.cfg;
    let n = cfg.blocks.len();
    let edges = index_edges(cfg);
    let e = edges.len();
    let mut outd = vec![0usize; n];
    let mut ind = vec![0usize; n];
    for &(a, b) in &edges {
        outd[a] += 1;
        ind[b] += 1;
    }
    let lens: Vec<usize> = cfg.blocks.iter().map(|b| b.instructions.len()).collect();
    let total: usize = lens.iter().sum();
    let mut cats = [0usize; 7];
    for (m, c) in mnemonic_counts(f) {
        cats[tax.broad_category(&m).index()] += c;
    }
    let mut v = vec![
        n as f64,
        e as f64,
        naive_cyclomatic(cfg) as f64,
        if n > 1 { e as f64 / (n * (n - 1)) as f64 } else { 0.0 },
        e as f64 / n as f64,
        *outd.iter().max().unwrap() as f64,
        e as f64 / n as f64,
        *ind.iter().max().unwrap() as f64,
        naive_components(n, &edges) as f64,
        outd.iter().filter(|&&d| d == 0).count() as f64,
        outd.iter().filter(|&&d| d > 1).count() as f64,
        naive_longest_condensed_path(n, &edges) as f64,
        naive_back_edges(n, &edges, entry_index(cfg)) as f64,
        total as f64,
        total as f64 / n as f64,
        *lens.iter().max().unwrap() as f64,
    ];
    v.extend(cats.iter().map(|&c| c as f64));
    v
}

/// Structural prefix of the semantic node schemes, per block.
pub fn naive_structural(f: &FunctionSample) -> Vec<[f64; STRUCTURAL_DIM]> {
    let tax = default_taxonomy();
    let edges = index_edges(&f.cfg);
    let entry = entry_index(&f.cfg);
    f.cfg
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let out = edges.iter().filter(|e| e.0 == i).count();
            let mut row = [0.0; STRUCTURAL_DIM];
            row[0] = b.instructions.len() as f64;
            row[1] = edges.iter().filter(|e| e.1 == i).count() as f64;
            row[2] = out as f64;
            row[3] = if i == entry { 1.0 } else { 0.0 };
            row[4] = if out == 0 { 1.0 } else { 0.0 };
            for insn in &b.instructions {
                let r = tax.roles(&insn.mnemonic);
                for (k, flag) in [r.call_like, r.ret_like, r.cond_branch, r.uncond_branch, r.arithmetic, r.load_store]
                    .into_iter()
                    .enumerate()
                {
                    if flag {
                        row[5 + k] += 1.0;
                    }
                }
            }
            row
        })
        .collect()
}
