//! Graph-level CFG statistics.

use crate::cfg::{CfgIndex, ControlFlowGraph};
use crate::features::taxonomy::{BroadCategory, MnemonicClassTaxonomy};

pub const GRAPH23_DIM: usize = 23;

/// Component names of the graph-level vector, in order.
pub const GRAPH23_NAMES: [&str; GRAPH23_DIM] = [
    "n_nodes",
    "n_edges",
    "cyclomatic_complexity",
    "density",
    "mean_out_degree",
    "max_out_degree",
    "mean_in_degree",
    "max_in_degree",
    "n_connected_components",
    "n_leaf_nodes",
    "n_branch_nodes",
    "longest_condensed_path",
    "n_back_edges",
    "total_instructions",
    "mean_instructions_per_block",
    "max_instructions_per_block",
    "n_data_movement",
    "n_arithmetic",
    "n_logic",
    "n_shift_rotate",
    "n_control_transfer",
    "n_compare_test",
    "n_other",
];

/// Number of weakly connected components.
pub fn weak_components(index: &CfgIndex) -> usize {
    let n = index.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in index.succ[v].iter().chain(&index.pred[v]) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// E − N + 2P with P the number of weakly connected components.
pub fn cyclomatic_complexity(cfg: &ControlFlowGraph) -> usize {
    cyclomatic_from_index(&CfgIndex::new(cfg))
}

pub(crate) fn cyclomatic_from_index(index: &CfgIndex) -> usize {
    let e = index.edge_count() as i64;
    let n = index.len() as i64;
    let p = weak_components(index) as i64;
    (e - n + 2 * p) as usize
}

/// Strongly connected components (Tarjan), returned in reverse topological order.
pub fn strongly_connected_components(index: &CfgIndex) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = index.len();
    let mut order = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    // (node, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if order[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next == 0 {
                order[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = index.succ[v].get(*next) {
                *next += 1;
                if order[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == order[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(comp);
            }
        }
    }
    components
}

/// Edge count of the longest path in the DAG obtained by collapsing each SCC to one node.
pub fn longest_condensed_path(index: &CfgIndex) -> usize {
    let sccs = strongly_connected_components(index);
    let mut comp_of = vec![0; index.len()];
    for (c, members) in sccs.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    // Reverse topological order: successors of component c have smaller indices.
    let mut longest = vec![0usize; sccs.len()];
    for (c, members) in sccs.iter().enumerate() {
        for &v in members {
            for &w in &index.succ[v] {
                let d = comp_of[w];
                if d != c {
                    longest[c] = longest[c].max(longest[d] + 1);
                }
            }
        }
    }
    longest.into_iter().max().unwrap_or(0)
}

/// Edges closing a cycle in a depth-first search from the entry block.
pub fn back_edge_count(index: &CfgIndex) -> usize {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        White,
        Gray,
        Black,
    }
    let mut state = vec![State::White; index.len()];
    let mut back = 0;
    let mut call = vec![(index.entry, 0usize)];
    state[index.entry] = State::Gray;
    while let Some(&mut (v, ref mut next)) = call.last_mut() {
        if let Some(&w) = index.succ[v].get(*next) {
            *next += 1;
            match state[w] {
                State::White => {
                    state[w] = State::Gray;
                    call.push((w, 0));
                }
                State::Gray => back += 1,
                State::Black => {}
            }
        } else {
            state[v] = State::Black;
            call.pop();
        }
    }
    back
}

/// The 23-component graph-level vector.
pub fn graph_level_values(cfg: &ControlFlowGraph, taxonomy: &MnemonicClassTaxonomy) -> Vec<f64> {
    let index = CfgIndex::new(cfg);
    let n = index.len();
    let e = index.edge_count();
    let out_deg: Vec<usize> = index.succ.iter().map(Vec::len).collect();
    let in_deg: Vec<usize> = index.pred.iter().map(Vec::len).collect();
    let insn_counts: Vec<usize> = cfg.blocks.iter().map(|b| b.instructions.len()).collect();
    let total_insns: usize = insn_counts.iter().sum();
    let mut categories = [0usize; BroadCategory::COUNT];
    for insn in cfg.blocks.iter().flat_map(|b| &b.instructions) {
        categories[taxonomy.broad_category(&insn.mnemonic).index()] += 1;
    }
    let density = if n > 1 {
        e as f64 / (n * (n - 1)) as f64
    } else {
        0.0
    };
    let mut values = vec![
        n as f64,
        e as f64,
        cyclomatic_from_index(&index) as f64,
        density,
        e as f64 / n as f64,
        out_deg.iter().copied().max().unwrap_or(0) as f64,
        e as f64 / n as f64,
        in_deg.iter().copied().max().unwrap_or(0) as f64,
        weak_components(&index) as f64,
        out_deg.iter().filter(|&&d| d == 0).count() as f64,
        out_deg.iter().filter(|&&d| d >= 2).count() as f64,
        longest_condensed_path(&index) as f64,
        back_edge_count(&index) as f64,
        total_insns as f64,
        total_insns as f64 / n as f64,
        insn_counts.iter().copied().max().unwrap_or(0) as f64,
    ];
    values.extend(categories.iter().map(|&c| c as f64));
    debug_assert_eq!(values.len(), GRAPH23_DIM);
    values
}
