//! Network model: a directed acyclic graph with per-edge usage cost, flow
//! sources, and terminals with demand sets.
//!
//! A [`NetworkInstance`] is immutable once built. Construction never fails so
//! that malformed inputs can be inspected; [`NetworkInstance::validate`]
//! reports every violated structural assumption.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;
/// Flow identifiers are 1-based, matching the instance document format.
pub type FlowId = usize;
/// Index of an adjacent edge pair `((k,i),(i,j))`.
pub type PairId = usize;
/// Usage cost increment of an edge, `U_ij(1) - U_ij(0)`.
pub type Cost = Ratio<u64>;

/// Maximum number of flows; flow sets are packed into a `u64`.
pub const MAX_FLOWS: usize = 64;

/// A set of flow ids packed into one machine word (bit `p-1` is flow `p`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowSet(u64);

impl FlowSet {
    pub const EMPTY: FlowSet = FlowSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FlowSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The unit vector `e_p`.
    pub fn unit(flow: FlowId) -> Self {
        debug_assert!((1..=MAX_FLOWS).contains(&flow));
        FlowSet(1u64 << (flow - 1))
    }

    /// All flows `1..=count`.
    pub fn all(count: usize) -> Self {
        if count >= 64 {
            FlowSet(u64::MAX)
        } else {
            FlowSet((1u64 << count) - 1)
        }
    }

    pub fn contains(self, flow: FlowId) -> bool {
        (1..=MAX_FLOWS).contains(&flow) && self.0 & (1u64 << (flow - 1)) != 0
    }

    pub fn with(self, flow: FlowId) -> Self {
        FlowSet(self.0 | FlowSet::unit(flow).0)
    }

    pub fn union(self, other: FlowSet) -> Self {
        FlowSet(self.0 | other.0)
    }

    pub fn intersection(self, other: FlowSet) -> Self {
        FlowSet(self.0 & other.0)
    }

    pub fn difference(self, other: FlowSet) -> Self {
        FlowSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: FlowSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Flow ids in ascending order.
    pub fn iter(self) -> impl Iterator<Item = FlowId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let low = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(low + 1)
        })
    }
}

impl FromIterator<FlowId> for FlowSet {
    fn from_iter<I: IntoIterator<Item = FlowId>>(iter: I) -> Self {
        iter.into_iter().fold(FlowSet::EMPTY, FlowSet::with)
    }
}

impl fmt::Display for FlowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: Cost,
}

impl Edge {
    pub fn new(tail: NodeId, head: NodeId, cost: Cost) -> Self {
        Edge { tail, head, cost }
    }

    pub fn unit(tail: NodeId, head: NodeId) -> Self {
        Edge::new(tail, head, Cost::from_integer(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminal {
    pub node: NodeId,
    pub demands: FlowSet,
}

impl Terminal {
    pub fn new(node: NodeId, demands: impl IntoIterator<Item = FlowId>) -> Self {
        Terminal {
            node,
            demands: demands.into_iter().collect(),
        }
    }
}

/// A demanded `(flow, terminal)` pair. `terminal` indexes the instance's
/// terminal list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DemandPair {
    pub flow: FlowId,
    pub terminal: usize,
}

/// Per-terminal demand sets, aligned with the instance's terminal list.
///
/// Either the instance's own demands or an expansion `P_t ⊆ P̄_t ⊆ P`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Demands {
    sets: Vec<FlowSet>,
}

impl Demands {
    pub fn new(sets: Vec<FlowSet>) -> Self {
        Demands { sets }
    }

    pub fn sets(&self) -> &[FlowSet] {
        &self.sets
    }

    pub fn of(&self, terminal: usize) -> FlowSet {
        self.sets[terminal]
    }

    pub fn terminal_count(&self) -> usize {
        self.sets.len()
    }

    /// Demanded pairs ordered by terminal index, then ascending flow id.
    pub fn pairs(&self) -> Vec<DemandPair> {
        self.sets
            .iter()
            .enumerate()
            .flat_map(|(terminal, set)| set.iter().map(move |flow| DemandPair { flow, terminal }))
            .collect()
    }

    /// True when every terminal's set contains the corresponding base set
    /// and lies within `all`.
    pub fn is_expansion_of(&self, base: &Demands, all: FlowSet) -> bool {
        self.sets.len() == base.sets.len()
            && self
                .sets
                .iter()
                .zip(&base.sets)
                .all(|(&exp, &orig)| orig.is_subset(exp) && exp.is_subset(all))
    }

    /// Total number of flows added relative to `base`.
    pub fn added_over(&self, base: &Demands) -> usize {
        self.sets
            .iter()
            .zip(&base.sets)
            .map(|(exp, orig)| exp.difference(*orig).len())
            .sum()
    }

    /// Every terminal demands every flow in `all`.
    pub fn multicast(terminals: usize, all: FlowSet) -> Self {
        Demands {
            sets: vec![all; terminals],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("graph is cyclic")]
    CyclicGraph,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// One violated structural assumption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CyclicGraph,
    UnknownNode { node: NodeId, context: String },
    ParallelEdge { tail: NodeId, head: NodeId },
    NegativeCost { tail: NodeId, head: NodeId },
    SourceHasIncomingEdge { flow: FlowId, node: NodeId },
    SharedSource { node: NodeId, flows: Vec<FlowId> },
    TerminalHasOutgoingEdge { node: NodeId },
    DuplicateTerminal { node: NodeId },
    UnknownFlow { terminal: NodeId, flow: FlowId },
    FlowNotDemanded { flow: FlowId },
    TooManyFlows { count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CyclicGraph => write!(f, "graph is cyclic"),
            Violation::UnknownNode { node, context } => {
                write!(f, "unknown node {node} referenced by {context}")
            }
            Violation::ParallelEdge { tail, head } => write!(
                f,
                "parallel edge ({tail},{head}): model a multigraph or an edge capacity above one \
                 by inserting an extra node on each parallel edge"
            ),
            Violation::NegativeCost { tail, head } => {
                write!(f, "edge ({tail},{head}) has negative usage cost")
            }
            Violation::SourceHasIncomingEdge { flow, node } => {
                write!(f, "source has incoming edge: flow {flow} at node {node}")
            }
            Violation::SharedSource { node, flows } => {
                write!(f, "node {node} is the source of several flows {flows:?}")
            }
            Violation::TerminalHasOutgoingEdge { node } => {
                write!(f, "terminal has outgoing edge: node {node}")
            }
            Violation::DuplicateTerminal { node } => write!(f, "terminal {node} listed twice"),
            Violation::UnknownFlow { terminal, flow } => {
                write!(f, "terminal {terminal} demands unknown flow {flow}")
            }
            Violation::FlowNotDemanded { flow } => {
                write!(f, "flow {flow} is not demanded by any terminal")
            }
            Violation::TooManyFlows { count } => {
                write!(f, "{count} flows exceed the supported maximum of {MAX_FLOWS}")
            }
        }
    }
}

/// Result of [`NetworkInstance::validate`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NetworkInstance {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    sources: Vec<NodeId>,
    terminals: Vec<Terminal>,

    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    edge_lookup: HashMap<(NodeId, NodeId), EdgeId>,
    pairs: Vec<(EdgeId, EdgeId)>,
    pair_lookup: HashMap<(EdgeId, EdgeId), PairId>,
    pairs_into: Vec<Vec<(PairId, EdgeId)>>,
    source_flow: Vec<Option<FlowId>>,
    edge_order: Vec<EdgeId>,
}

impl PartialEq for NetworkInstance {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.sources == other.sources
            && self.terminals == other.terminals
    }
}

impl NetworkInstance {
    /// Builds an instance without validating it. `sources[p-1]` is the source
    /// node of flow `p`.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: Vec<Edge>,
        sources: Vec<NodeId>,
        terminals: Vec<Terminal>,
    ) -> Self {
        let nodes: Vec<NodeId> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let span = nodes
            .iter()
            .copied()
            .chain(edges.iter().flat_map(|e| [e.tail, e.head]))
            .chain(sources.iter().copied())
            .chain(terminals.iter().map(|t| t.node))
            .max()
            .map_or(0, |m| m + 1);

        let mut in_edges = vec![Vec::new(); span];
        let mut out_edges = vec![Vec::new(); span];
        let mut edge_lookup = HashMap::new();
        for (id, e) in edges.iter().enumerate() {
            in_edges[e.head].push(id);
            out_edges[e.tail].push(id);
            edge_lookup.entry((e.tail, e.head)).or_insert(id);
        }
        for list in &mut in_edges {
            list.sort_by_key(|&id| (edges[id].tail, id));
        }
        for list in &mut out_edges {
            list.sort_by_key(|&id| (edges[id].head, id));
        }

        let mut pairs = Vec::new();
        let mut pair_lookup = HashMap::new();
        let mut pairs_into = vec![Vec::new(); edges.len()];
        for (in_id, e) in edges.iter().enumerate() {
            for &out_id in &out_edges[e.head] {
                let pid = pairs.len();
                pairs.push((in_id, out_id));
                pair_lookup.insert((in_id, out_id), pid);
                pairs_into[out_id].push((pid, in_id));
            }
        }
        for list in &mut pairs_into {
            list.sort_by_key(|&(_, in_id)| (edges[in_id].tail, in_id));
        }

        let mut source_flow = vec![None; span];
        for (idx, &s) in sources.iter().enumerate() {
            source_flow[s].get_or_insert(idx + 1);
        }

        let mut instance = NetworkInstance {
            nodes,
            edges,
            sources,
            terminals,
            in_edges,
            out_edges,
            edge_lookup,
            pairs,
            pair_lookup,
            pairs_into,
            source_flow,
            edge_order: Vec::new(),
        };
        if let Ok(order) = instance.topological_order() {
            let mut rank = vec![0usize; span];
            for (r, &n) in order.iter().enumerate() {
                rank[n] = r;
            }
            let mut edge_order: Vec<EdgeId> = (0..instance.edges.len()).collect();
            edge_order.sort_by_key(|&id| (rank[instance.edges[id].tail], id));
            instance.edge_order = edge_order;
        }
        instance
    }

    /// Same network with a different terminal list (used by demand
    /// realizations).
    pub fn with_terminals(&self, terminals: Vec<Terminal>) -> Self {
        NetworkInstance::new(
            self.nodes.clone(),
            self.edges.clone(),
            self.sources.clone(),
            terminals,
        )
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn edge_id(&self, tail: NodeId, head: NodeId) -> Option<EdgeId> {
        self.edge_lookup.get(&(tail, head)).copied()
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn source(&self, flow: FlowId) -> NodeId {
        self.sources[flow - 1]
    }

    pub fn flow_count(&self) -> usize {
        self.sources.len()
    }

    pub fn all_flows(&self) -> FlowSet {
        FlowSet::all(self.sources.len())
    }

    /// The flow whose source is `node`, if any.
    pub fn source_flow(&self, node: NodeId) -> Option<FlowId> {
        self.source_flow.get(node).copied().flatten()
    }

    pub fn is_source(&self, node: NodeId) -> bool {
        self.source_flow(node).is_some()
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn terminal_index(&self, node: NodeId) -> Option<usize> {
        self.terminals.iter().position(|t| t.node == node)
    }

    /// The instance's own demand sets.
    pub fn demands(&self) -> Demands {
        Demands::new(self.terminals.iter().map(|t| t.demands).collect())
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        self.in_edges.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        self.out_edges.get(node).map_or(&[], Vec::as_slice)
    }

    /// Adjacent edge pairs `((k,i),(i,j))`, the index domain of β and α.
    pub fn pairs(&self) -> &[(EdgeId, EdgeId)] {
        &self.pairs
    }

    pub fn pair_id(&self, in_edge: EdgeId, out_edge: EdgeId) -> Option<PairId> {
        self.pair_lookup.get(&(in_edge, out_edge)).copied()
    }

    /// Pairs ending in `out_edge`, as `(pair id, in-edge)`.
    pub fn pairs_into(&self, out_edge: EdgeId) -> &[(PairId, EdgeId)] {
        &self.pairs_into[out_edge]
    }

    /// Edge ids ordered so that every edge comes after all edges into its
    /// tail. Empty for cyclic graphs.
    pub fn edge_order(&self) -> &[EdgeId] {
        &self.edge_order
    }

    fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// In- and out-neighbor sets `(I_i, O_i)` of `node`.
    pub fn neighbors(&self, node: NodeId) -> Result<(BTreeSet<NodeId>, BTreeSet<NodeId>), ModelError> {
        if !self.contains_node(node) {
            return Err(ModelError::UnknownNode(node));
        }
        let ins = self.in_edges(node).iter().map(|&e| self.edges[e].tail).collect();
        let outs = self.out_edges(node).iter().map(|&e| self.edges[e].head).collect();
        Ok((ins, outs))
    }

    /// Kahn's algorithm with ties broken by ascending node id.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, ModelError> {
        let span = self.in_edges.len();
        let mut indegree = vec![0usize; span];
        let mut present = vec![false; span];
        for &n in &self.nodes {
            present[n] = true;
        }
        for e in &self.edges {
            present[e.tail] = true;
            present[e.head] = true;
            indegree[e.head] += 1;
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            (0..span).filter(|&n| present[n] && indegree[n] == 0).map(Reverse).collect();
        let total = present.iter().filter(|&&p| p).count();
        let mut order = Vec::with_capacity(total);
        while let Some(Reverse(n)) = ready.pop() {
            order.push(n);
            for &e in self.out_edges(n) {
                let h = self.edges[e].head;
                indegree[h] -= 1;
                if indegree[h] == 0 {
                    ready.push(Reverse(h));
                }
            }
        }
        if order.len() == total {
            Ok(order)
        } else {
            Err(ModelError::CyclicGraph)
        }
    }

    /// Lists every violated structural assumption; empty means valid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();

        for (id, e) in self.edges.iter().enumerate() {
            for node in [e.tail, e.head] {
                if !self.contains_node(node) {
                    report.push(Violation::UnknownNode {
                        node,
                        context: format!("edge #{id} ({},{})", e.tail, e.head),
                    });
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut reported = BTreeSet::new();
        for e in &self.edges {
            if !seen.insert((e.tail, e.head)) && reported.insert((e.tail, e.head)) {
                report.push(Violation::ParallelEdge { tail: e.tail, head: e.head });
            }
        }
        if self.topological_order().is_err() {
            report.push(Violation::CyclicGraph);
        }

        if self.sources.len() > MAX_FLOWS {
            report.push(Violation::TooManyFlows { count: self.sources.len() });
        }
        for (idx, &s) in self.sources.iter().enumerate() {
            let flow = idx + 1;
            if !self.contains_node(s) {
                report.push(Violation::UnknownNode {
                    node: s,
                    context: format!("source of flow {flow}"),
                });
            } else if !self.in_edges(s).is_empty() {
                report.push(Violation::SourceHasIncomingEdge { flow, node: s });
            }
        }
        let mut by_node: std::collections::BTreeMap<NodeId, Vec<FlowId>> = Default::default();
        for (idx, &s) in self.sources.iter().enumerate() {
            by_node.entry(s).or_default().push(idx + 1);
        }
        for (node, flows) in by_node {
            if flows.len() > 1 {
                report.push(Violation::SharedSource { node, flows });
            }
        }

        let all = self.all_flows();
        let mut terminal_nodes = BTreeSet::new();
        let mut demanded = FlowSet::EMPTY;
        for t in &self.terminals {
            if !terminal_nodes.insert(t.node) {
                report.push(Violation::DuplicateTerminal { node: t.node });
            }
            if !self.contains_node(t.node) {
                report.push(Violation::UnknownNode {
                    node: t.node,
                    context: "terminal list".to_string(),
                });
            } else if !self.out_edges(t.node).is_empty() {
                report.push(Violation::TerminalHasOutgoingEdge { node: t.node });
            }
            for flow in t.demands.difference(all).iter() {
                report.push(Violation::UnknownFlow { terminal: t.node, flow });
            }
            demanded = demanded.union(t.demands);
        }
        for flow in all.difference(demanded).iter() {
            report.push(Violation::FlowNotDemanded { flow });
        }
        report
    }
}
