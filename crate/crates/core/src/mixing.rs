//! Mixing-vector algebra over binary local mixing coefficients.
//!
//! Global mixing vectors are derived from local coefficients `β` by OR
//! propagation in topological order. [`verify_solution`] checks a complete
//! `(z, f, x, β)` tuple against the full constraint set of the mixing cost
//! minimization problem.

use std::fmt;

use crate::model::{Cost, Demands, EdgeId, FlowId, FlowSet, NetworkInstance, NodeId, PairId};

/// Binary global mixing vector of one edge.
pub type MixVector = FlowSet;

/// A candidate solution `(z, f, x, β)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixingSolution {
    /// Edge usage, one entry per edge.
    pub z: Vec<bool>,
    /// `f[t][e]` holds the flows `p ∈ P_t` whose path to terminal `t` uses
    /// edge `e`.
    pub f: Vec<Vec<FlowSet>>,
    /// Global mixing vector per edge.
    pub x: Vec<MixVector>,
    /// Local mixing coefficient per adjacent edge pair.
    pub beta: Vec<bool>,
}

impl MixingSolution {
    pub fn used_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.z.iter().enumerate().filter(|(_, &used)| used).map(|(e, _)| e)
    }

    /// Follows the `f` bits of `(flow, terminal)` from the flow's source.
    /// Returns `None` when they do not form a single path to the terminal.
    pub fn flow_path(
        &self,
        instance: &NetworkInstance,
        flow: FlowId,
        terminal: usize,
    ) -> Option<Vec<EdgeId>> {
        let target = instance.terminals()[terminal].node;
        let mut node = instance.source(flow);
        let mut path = Vec::new();
        while node != target {
            let mut next = instance
                .out_edges(node)
                .iter()
                .copied()
                .filter(|&e| self.f[terminal][e].contains(flow));
            let e = next.next()?;
            if next.next().is_some() || path.len() > instance.edges().len() {
                return None;
            }
            path.push(e);
            node = instance.edge(e).head;
        }
        Some(path)
    }

    pub fn cost(&self, instance: &NetworkInstance) -> Cost {
        solution_cost(instance, &self.z)
    }
}

/// Extra restrictions that turn the mixing problem into one of its baselines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProblemVariant {
    /// At most one flow per edge (`Σ_p x_ij,p ≤ 1`): minimum-cost routing.
    pub routing: bool,
    /// All local mixing coefficients fixed to one: the two-step mixing
    /// baseline's flow-rate stage.
    pub beta_all_one: bool,
}

/// Computes global mixing vectors from local coefficients: source edges get
/// `e_p`, every other edge the OR of its β-selected incoming vectors.
pub fn propagate_mixing(instance: &NetworkInstance, beta: &[bool]) -> Vec<MixVector> {
    let mut x = vec![MixVector::EMPTY; instance.edges().len()];
    for &e in instance.edge_order() {
        let tail = instance.edge(e).tail;
        x[e] = match instance.source_flow(tail) {
            Some(p) => MixVector::unit(p),
            None => instance
                .pairs_into(e)
                .iter()
                .filter(|&&(pair, _)| beta[pair])
                .fold(MixVector::EMPTY, |acc, &(_, k)| acc.union(x[k])),
        };
    }
    x
}

/// True iff no terminal in-edge carries a flow the terminal does not demand.
pub fn check_mixing_feasible(instance: &NetworkInstance, demands: &Demands, x: &[MixVector]) -> bool {
    instance.terminals().iter().enumerate().all(|(t, term)| {
        let extraneous = instance.all_flows().difference(demands.of(t));
        instance
            .in_edges(term.node)
            .iter()
            .all(|&e| x[e].intersection(extraneous).is_empty())
    })
}

/// Terminal purity restricted to used edges: no terminal in-edge with
/// `z = 1` carries a flow its terminal does not demand. An unused edge
/// transmits nothing, so its mixing vector is irrelevant to the terminal.
pub fn terminal_purity(instance: &NetworkInstance, demands: &Demands, x: &[MixVector], z: &[bool]) -> bool {
    instance.terminals().iter().enumerate().all(|(t, term)| {
        let extraneous = instance.all_flows().difference(demands.of(t));
        instance
            .in_edges(term.node)
            .iter()
            .all(|&e| !z[e] || x[e].intersection(extraneous).is_empty())
    })
}

/// Sum of usage costs over edges with `z = 1`.
pub fn solution_cost(instance: &NetworkInstance, z: &[bool]) -> Cost {
    instance
        .edges()
        .iter()
        .zip(z)
        .filter(|(_, &used)| used)
        .map(|(e, _)| e.cost)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolutionViolation {
    Shape { what: &'static str, expected: usize, found: usize },
    CapacityExceeded { edge: (NodeId, NodeId), terminal: NodeId },
    UndemandedFlow { edge: (NodeId, NodeId), terminal: NodeId, flow: FlowId },
    Conservation { node: NodeId, flow: FlowId, terminal: NodeId, net: i64, expected: i64 },
    FlowWithoutMixing { edge: (NodeId, NodeId), terminal: NodeId, flow: FlowId },
    SourceVector { edge: (NodeId, NodeId), expected: MixVector, found: MixVector },
    MixingInconsistent { edge: (NodeId, NodeId), expected: MixVector, found: MixVector },
    ExtraneousFlow { edge: (NodeId, NodeId), terminal: NodeId, flow: FlowId },
    RoutingMixes { edge: (NodeId, NodeId) },
    BetaNotOne { pair: PairId },
    BetaFromUnusedEdge { from: (NodeId, NodeId), to: (NodeId, NodeId) },
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SolutionViolation::*;
        match self {
            Shape { what, expected, found } => {
                write!(f, "{what} has {found} entries, expected {expected}")
            }
            CapacityExceeded { edge, terminal } => write!(
                f,
                "capacity violated on edge {edge:?} for terminal {terminal}: sum of f exceeds z"
            ),
            UndemandedFlow { edge, terminal, flow } => write!(
                f,
                "edge {edge:?} routes flow {flow} to terminal {terminal}, which does not demand it"
            ),
            Conservation { node, flow, terminal, net, expected } => write!(
                f,
                "conservation violated at node {node} for flow {flow} to terminal {terminal}: \
                 net outflow {net}, expected {expected}"
            ),
            FlowWithoutMixing { edge, terminal, flow } => write!(
                f,
                "f <= x violated on edge {edge:?}: flow {flow} to terminal {terminal} is routed \
                 but not mixed"
            ),
            SourceVector { edge, expected, found } => {
                write!(f, "source edge {edge:?} carries {found}, expected {expected}")
            }
            MixingInconsistent { edge, expected, found } => write!(
                f,
                "mixing vector of edge {edge:?} is {found} but its beta-selected inputs give {expected}"
            ),
            ExtraneousFlow { edge, terminal, flow } => write!(
                f,
                "terminal {terminal} receives extraneous flow {flow} on edge {edge:?}"
            ),
            RoutingMixes { edge } => write!(f, "edge {edge:?} mixes several flows under routing"),
            BetaNotOne { pair } => write!(f, "beta of pair #{pair} is zero under beta-all-one"),
            BetaFromUnusedEdge { from, to } => {
                write!(f, "edge {to:?} mixes the symbol of unused edge {from:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolutionReport {
    pub violations: Vec<SolutionViolation>,
}

impl SolutionReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for SolutionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every constraint of the mixing problem. Empty report iff feasible.
pub fn verify_solution(
    instance: &NetworkInstance,
    demands: &Demands,
    solution: &MixingSolution,
) -> SolutionReport {
    verify_solution_with(instance, demands, solution, ProblemVariant::default())
}

pub fn verify_solution_with(
    instance: &NetworkInstance,
    demands: &Demands,
    solution: &MixingSolution,
    variant: ProblemVariant,
) -> SolutionReport {
    use SolutionViolation::*;
    let mut out = Vec::new();
    let edges = instance.edges();
    let terminals = instance.terminals();
    let shape = [
        ("z", edges.len(), solution.z.len()),
        ("x", edges.len(), solution.x.len()),
        ("beta", instance.pairs().len(), solution.beta.len()),
        ("f", terminals.len(), solution.f.len()),
        ("demands", terminals.len(), demands.terminal_count()),
    ];
    for (what, expected, found) in shape {
        if expected != found {
            out.push(Shape { what, expected, found });
        }
    }
    for row in &solution.f {
        if row.len() != edges.len() {
            out.push(Shape { what: "f row", expected: edges.len(), found: row.len() });
        }
    }
    if !out.is_empty() {
        return SolutionReport { violations: out };
    }
    let ends = |e: EdgeId| (edges[e].tail, edges[e].head);

    for (t, term) in terminals.iter().enumerate() {
        let wanted = demands.of(t);
        for e in 0..edges.len() {
            let bits = solution.f[t][e];
            for flow in bits.difference(wanted).iter() {
                out.push(UndemandedFlow { edge: ends(e), terminal: term.node, flow });
            }
            let routed = bits.intersection(wanted);
            if routed.len() > usize::from(solution.z[e]) {
                out.push(CapacityExceeded { edge: ends(e), terminal: term.node });
            }
            for flow in routed.iter() {
                if !solution.x[e].contains(flow) {
                    out.push(FlowWithoutMixing { edge: ends(e), terminal: term.node, flow });
                }
            }
        }
        for flow in wanted.iter() {
            let source = instance.source(flow);
            for &node in instance.nodes() {
                let count = |list: &[EdgeId]| {
                    list.iter().filter(|&&e| solution.f[t][e].contains(flow)).count() as i64
                };
                let net = count(instance.out_edges(node)) - count(instance.in_edges(node));
                let expected = if node == source {
                    1
                } else if node == term.node {
                    -1
                } else {
                    0
                };
                if net != expected {
                    out.push(Conservation { node, flow, terminal: term.node, net, expected });
                }
            }
        }
    }

    for (e, edge) in edges.iter().enumerate() {
        let found = solution.x[e];
        match instance.source_flow(edge.tail) {
            Some(p) => {
                if found != MixVector::unit(p) {
                    out.push(SourceVector { edge: ends(e), expected: MixVector::unit(p), found });
                }
            }
            None => {
                let expected = instance
                    .pairs_into(e)
                    .iter()
                    .filter(|&&(pair, _)| solution.beta[pair])
                    .fold(MixVector::EMPTY, |acc, &(_, k)| acc.union(solution.x[k]));
                if found != expected {
                    out.push(MixingInconsistent { edge: ends(e), expected, found });
                }
            }
        }
        if variant.routing && solution.z[e] && found.len() > 1 {
            out.push(RoutingMixes { edge: ends(e) });
        }
    }
    if variant.beta_all_one {
        for (pair, &b) in solution.beta.iter().enumerate() {
            if !b {
                out.push(BetaNotOne { pair });
            }
        }
    } else {
        // An unused edge transmits nothing, so it cannot feed a mixture.
        for (pair, &(k, j)) in instance.pairs().iter().enumerate() {
            if solution.beta[pair] && !solution.z[k] {
                out.push(BetaFromUnusedEdge { from: ends(k), to: ends(j) });
            }
        }
    }

    for (t, term) in terminals.iter().enumerate() {
        let extraneous = instance.all_flows().difference(demands.of(t));
        for &e in instance.in_edges(term.node).iter().filter(|&&e| solution.z[e]) {
            for flow in solution.x[e].intersection(extraneous).iter() {
                out.push(ExtraneousFlow { edge: ends(e), terminal: term.node, flow });
            }
        }
    }
    SolutionReport { violations: out }
}
