//! Flow-path enumeration and path-selection derived variables.
//!
//! Every demanded `(p, t)` pair gets the full list of simple `s_p → t` paths.
//! A [`PathSelection`] picks one path per pair; from it the edge usage `z`,
//! routing indicators `f`, local mixing coefficients `β` and global mixing
//! vectors `x` all follow.

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::mixing::{propagate_mixing, terminal_purity, MixingSolution, ProblemVariant};
use crate::model::{Cost, DemandPair, Demands, EdgeId, FlowId, FlowSet, NetworkInstance, NodeId};

/// Default cap on the number of paths per `(p, t)` pair.
pub const DEFAULT_PATH_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("more than {cap} paths from node {source_node} to node {terminal}")]
    PathExplosion { source_node: NodeId, terminal: NodeId, cap: usize },
    #[error("paths of flows {first} and {second} to terminal {terminal} share an edge")]
    DisjointnessViolated { terminal: NodeId, first: FlowId, second: FlowId },
    #[error("selection does not match the demanded pairs")]
    SelectionMismatch,
    #[error("path index {index} out of range for flow {flow} to terminal {terminal} ({count} paths)")]
    IndexOutOfRange { flow: FlowId, terminal: NodeId, index: usize, count: usize },
}

/// A simple directed path, stored as its edge and node sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub edges: Vec<EdgeId>,
    pub nodes: Vec<NodeId>,
    mask: FixedBitSet,
}

impl Path {
    fn new(instance: &NetworkInstance, start: NodeId, edges: Vec<EdgeId>) -> Self {
        let mut nodes = vec![start];
        nodes.extend(edges.iter().map(|&e| instance.edge(e).head));
        let mut mask = FixedBitSet::with_capacity(instance.edges().len());
        for &e in &edges {
            mask.insert(e);
        }
        Path { edges, nodes, mask }
    }

    pub fn contains_edge(&self, edge: EdgeId) -> bool {
        self.mask.contains(edge)
    }

    pub fn shares_edge(&self, other: &Path) -> bool {
        !self.mask.is_disjoint(&other.mask)
    }

    pub fn edge_mask(&self) -> &FixedBitSet {
        &self.mask
    }

    pub fn cost(&self, instance: &NetworkInstance) -> Cost {
        self.edges.iter().map(|&e| instance.edge(e).cost).sum()
    }

    /// Node sequence joined with dashes, e.g. `1-3-8`.
    pub fn label(&self) -> String {
        self.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// All simple directed paths from `source` to `terminal`, in lexicographic
/// order of their node sequences.
pub fn enumerate_paths(
    instance: &NetworkInstance,
    source: NodeId,
    terminal: NodeId,
    cap: usize,
) -> Result<Vec<Path>, PathError> {
    // Nodes that can reach the terminal; everything else is a dead end.
    let span = instance
        .nodes()
        .iter()
        .copied()
        .chain(instance.edges().iter().flat_map(|e| [e.tail, e.head]))
        .max()
        .map_or(0, |m| m + 1)
        .max(source + 1)
        .max(terminal + 1);
    let mut reaches = vec![false; span];
    reaches[terminal] = true;
    let mut stack = vec![terminal];
    while let Some(n) = stack.pop() {
        for &e in instance.in_edges(n) {
            let tail = instance.edge(e).tail;
            if !reaches[tail] {
                reaches[tail] = true;
                stack.push(tail);
            }
        }
    }

    let mut paths = Vec::new();
    if source == terminal || !reaches[source] {
        return Ok(paths);
    }
    let mut on_path = vec![false; span];
    let mut current: Vec<EdgeId> = Vec::new();
    // Explicit DFS stack of (node, next out-edge position).
    let mut frames: Vec<(NodeId, usize)> = vec![(source, 0)];
    on_path[source] = true;
    while let Some(&mut (node, ref mut pos)) = frames.last_mut() {
        let outs = instance.out_edges(node);
        if *pos >= outs.len() {
            frames.pop();
            on_path[node] = false;
            current.pop();
            continue;
        }
        let e = outs[*pos];
        *pos += 1;
        let head = instance.edge(e).head;
        if !reaches[head] || on_path[head] {
            continue;
        }
        current.push(e);
        if head == terminal {
            if paths.len() == cap {
                return Err(PathError::PathExplosion { source_node: source, terminal, cap });
            }
            paths.push(Path::new(instance, source, current.clone()));
            current.pop();
        } else {
            on_path[head] = true;
            frames.push((head, 0));
        }
    }
    Ok(paths)
}

/// Enumerated paths for every pair in a demand scope.
#[derive(Debug, Clone)]
pub struct PathTable {
    scope: Demands,
    /// `paths[t][p-1]`, empty for pairs outside the scope.
    paths: Vec<Vec<Vec<Path>>>,
}

impl PathTable {
    /// Enumerates paths for every pair demanded in `scope`. Expansion searches
    /// pass the multicast scope so one table serves every expansion.
    pub fn build(instance: &NetworkInstance, scope: &Demands, cap: usize) -> Result<Self, PathError> {
        let mut paths = Vec::with_capacity(scope.terminal_count());
        for (t, term) in instance.terminals().iter().enumerate() {
            let mut row = vec![Vec::new(); instance.flow_count()];
            for flow in scope.of(t).iter() {
                row[flow - 1] = enumerate_paths(instance, instance.source(flow), term.node, cap)?;
            }
            paths.push(row);
        }
        Ok(PathTable { scope: scope.clone(), paths })
    }

    pub fn scope(&self) -> &Demands {
        &self.scope
    }

    pub fn paths(&self, flow: FlowId, terminal: usize) -> &[Path] {
        assert!(
            self.scope.of(terminal).contains(flow),
            "pair (flow {flow}, terminal #{terminal}) outside the table scope"
        );
        &self.paths[terminal][flow - 1]
    }

    pub fn count(&self, flow: FlowId, terminal: usize) -> usize {
        self.paths(flow, terminal).len()
    }
}

/// One path index (0-based) per demanded pair, ordered like
/// [`Demands::pairs`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathSelection {
    pub pairs: Vec<DemandPair>,
    pub choice: Vec<usize>,
}

impl PathSelection {
    pub fn new(pairs: Vec<DemandPair>, choice: Vec<usize>) -> Self {
        assert_eq!(pairs.len(), choice.len());
        PathSelection { pairs, choice }
    }

    pub fn path<'t>(&self, table: &'t PathTable, k: usize) -> &'t Path {
        let pair = self.pairs[k];
        &table.paths(pair.flow, pair.terminal)[self.choice[k]]
    }
}

/// Tuples of path indices, one per flow, whose paths are pairwise
/// edge-disjoint. Lexicographic order.
pub fn disjoint_combinations(paths_per_flow: &[&[Path]]) -> Vec<Vec<usize>> {
    fn extend(
        paths_per_flow: &[&[Path]],
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let depth = chosen.len();
        if depth == paths_per_flow.len() {
            out.push(chosen.clone());
            return;
        }
        for (idx, candidate) in paths_per_flow[depth].iter().enumerate() {
            let clash = chosen
                .iter()
                .enumerate()
                .any(|(d, &c)| paths_per_flow[d][c].shares_edge(candidate));
            if !clash {
                chosen.push(idx);
                extend(paths_per_flow, chosen, out);
                chosen.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(paths_per_flow, &mut Vec::new(), &mut out);
    out
}

fn check_selection(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    selection: &PathSelection,
) -> Result<(), PathError> {
    if selection.pairs != demands.pairs() {
        return Err(PathError::SelectionMismatch);
    }
    for (k, pair) in selection.pairs.iter().enumerate() {
        let count = table.count(pair.flow, pair.terminal);
        if selection.choice[k] >= count {
            return Err(PathError::IndexOutOfRange {
                flow: pair.flow,
                terminal: instance.terminals()[pair.terminal].node,
                index: selection.choice[k] + 1,
                count,
            });
        }
    }
    Ok(())
}

/// `(first, second)` flows of the first pair of selected paths to the same
/// terminal that share an edge.
fn first_overlap(table: &PathTable, selection: &PathSelection) -> Option<(usize, FlowId, FlowId)> {
    for a in 0..selection.pairs.len() {
        for b in a + 1..selection.pairs.len() {
            let (pa, pb) = (selection.pairs[a], selection.pairs[b]);
            if pa.terminal == pb.terminal
                && selection.path(table, a).shares_edge(selection.path(table, b))
            {
                return Some((pa.terminal, pa.flow, pb.flow));
            }
        }
    }
    None
}

/// Per-terminal flag: the selected paths to that terminal are pairwise
/// edge-disjoint.
pub fn disjoint_by_terminal(table: &PathTable, selection: &PathSelection, terminals: usize) -> Vec<bool> {
    let mut ok = vec![true; terminals];
    for a in 0..selection.pairs.len() {
        for b in a + 1..selection.pairs.len() {
            let t = selection.pairs[a].terminal;
            if ok[t]
                && t == selection.pairs[b].terminal
                && selection.path(table, a).shares_edge(selection.path(table, b))
            {
                ok[t] = false;
            }
        }
    }
    ok
}

/// Derives `(z, f, β, x)` from a selection without checking disjointness.
/// Under `beta_all_one` every local coefficient is one.
pub fn derive_unchecked(
    instance: &NetworkInstance,
    table: &PathTable,
    selection: &PathSelection,
    variant: ProblemVariant,
) -> MixingSolution {
    let edge_count = instance.edges().len();
    let mut f = vec![vec![FlowSet::EMPTY; edge_count]; instance.terminals().len()];
    let mut z = vec![false; edge_count];
    let mut beta = vec![variant.beta_all_one; instance.pairs().len()];
    for (k, pair) in selection.pairs.iter().enumerate() {
        let path = selection.path(table, k);
        for &e in &path.edges {
            f[pair.terminal][e] = f[pair.terminal][e].with(pair.flow);
            z[e] = true;
        }
        for w in path.edges.windows(2) {
            let pid = instance
                .pair_id(w[0], w[1])
                .expect("consecutive path edges are adjacent");
            beta[pid] = true;
        }
    }
    let x = propagate_mixing(instance, &beta);
    MixingSolution { z, f, x, beta }
}

/// Derives the mixing solution of a selection; fails if two selected paths to
/// the same terminal share an edge.
pub fn derive_from_selection(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    selection: &PathSelection,
) -> Result<MixingSolution, PathError> {
    derive_from_selection_with(instance, demands, table, selection, ProblemVariant::default())
}

pub fn derive_from_selection_with(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    selection: &PathSelection,
    variant: ProblemVariant,
) -> Result<MixingSolution, PathError> {
    check_selection(instance, demands, table, selection)?;
    if let Some((t, first, second)) = first_overlap(table, selection) {
        return Err(PathError::DisjointnessViolated {
            terminal: instance.terminals()[t].node,
            first,
            second,
        });
    }
    Ok(derive_unchecked(instance, table, selection, variant))
}

/// Whether a derived solution passes terminal purity on its used edges and,
/// under `routing`, carries at most one flow per used edge.
pub fn mixing_acceptable(
    instance: &NetworkInstance,
    demands: &Demands,
    solution: &MixingSolution,
    variant: ProblemVariant,
) -> bool {
    terminal_purity(instance, demands, &solution.x, &solution.z)
        && (!variant.routing || solution.x.iter().zip(&solution.z).all(|(x, &z)| !z || x.len() <= 1))
}

/// Clause of one demanded pair: the selected paths to its terminal are
/// edge-disjoint and no used terminal in-edge carries an extraneous flow
/// under the globally derived mixing vectors.
pub fn path_clause(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    selection: &PathSelection,
    pair: DemandPair,
) -> bool {
    let derived = derive_unchecked(instance, table, selection, ProblemVariant::default());
    let disjoint = disjoint_by_terminal(table, selection, instance.terminals().len());
    disjoint[pair.terminal] && terminal_purity(instance, demands, &derived.x, &derived.z)
}
