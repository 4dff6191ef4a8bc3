//! Edge-based CSP: each edge picks a local `(f_ij, x_ij)` pair from its
//! admissible domain; flow conservation at nodes and existence of local
//! mixing coefficients are the clauses.

use std::collections::HashMap;

use thiserror::Error;

use crate::centralized::{SolveOutcome, SolveStatus};
use crate::cfl::{cfl_init, cfl_run_observed, restart_loop, CflError, CflParams, ClauseSystem, TraceRecord};
use crate::mixing::{propagate_mixing, MixVector, MixingSolution};
use crate::model::{Demands, EdgeId, FlowSet, NetworkInstance, NodeId};
use crate::path_csp::RestartOutcome;

/// Default cap on a single edge's domain size.
pub const DEFAULT_DOMAIN_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdgeCspError {
    #[error("domain of edge ({tail},{head}) has {size} values, above the cap of {cap}")]
    DomainExplosion { tail: NodeId, head: NodeId, size: usize, cap: usize },
    #[error(transparent)]
    Cfl(#[from] CflError),
}

/// One admissible `(f_ij, x_ij)`: `f[t]` is empty or a single flow of `P_t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalValue {
    pub f: Vec<FlowSet>,
    pub x: MixVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeDomain {
    pub edge: EdgeId,
    pub values: Vec<LocalValue>,
}

/// Enumerates the admissible values of `edge`, ordered by `x` bit pattern,
/// then lexicographically by the per-terminal routing choice (none before
/// the demanded flows in ascending order).
pub fn enumerate_domain(
    instance: &NetworkInstance,
    demands: &Demands,
    edge: EdgeId,
    cap: usize,
) -> Result<EdgeDomain, EdgeCspError> {
    let e = instance.edge(edge);
    let choices: Vec<Vec<FlowSet>> = (0..demands.terminal_count())
        .map(|t| {
            std::iter::once(FlowSet::EMPTY)
                .chain(demands.of(t).iter().map(FlowSet::unit))
                .collect()
        })
        .collect();
    // x is forced on source edges. On terminal edges an impure x is only
    // admissible while the edge routes nothing.
    let allowed = instance.source_flow(e.tail).map_or(instance.all_flows(), MixVector::unit);
    let forced = instance.source_flow(e.tail).is_some();
    let extraneous = instance
        .terminal_index(e.head)
        .map_or(FlowSet::EMPTY, |t| instance.all_flows().difference(demands.of(t)));
    let explosion = |size| EdgeCspError::DomainExplosion { tail: e.tail, head: e.head, size, cap };

    let mut values = Vec::new();
    let mut sub = if forced { allowed.bits() } else { 0 };
    loop {
        let x = MixVector::from_bits(sub);
        let mut digits = vec![0usize; choices.len()];
        'tuples: loop {
            let f: Vec<FlowSet> = digits.iter().zip(&choices).map(|(&d, c)| c[d]).collect();
            let pure = x.intersection(extraneous).is_empty() || f.iter().all(|s| s.is_empty());
            if pure && f.iter().all(|s| s.is_subset(x)) {
                values.push(LocalValue { f, x });
                if values.len() > cap {
                    return Err(explosion(values.len()));
                }
            }
            for i in (0..digits.len()).rev() {
                digits[i] += 1;
                if digits[i] < choices[i].len() {
                    continue 'tuples;
                }
                digits[i] = 0;
            }
            break;
        }
        if forced || sub == allowed.bits() {
            break;
        }
        // Next subset of `allowed` in ascending order.
        sub = sub.wrapping_sub(allowed.bits()) & allowed.bits();
    }
    Ok(EdgeDomain { edge, values })
}

/// Flow conservation at `node` for every demanded `(p, t)`: net outflow is
/// +1 at the source of `p`, -1 at `t`, 0 elsewhere. `f(e, t)` gives the
/// flows of terminal `t` routed on edge `e`.
pub fn phi_f(
    instance: &NetworkInstance,
    demands: &Demands,
    node: NodeId,
    f: impl Fn(EdgeId, usize) -> FlowSet,
) -> bool {
    for (t, term) in instance.terminals().iter().enumerate() {
        for p in demands.of(t).iter() {
            let count = |list: &[EdgeId]| list.iter().filter(|&&e| f(e, t).contains(p)).count() as i64;
            let net = count(instance.out_edges(node)) - count(instance.in_edges(node));
            let expected = if node == instance.source(p) {
                1
            } else if node == term.node {
                -1
            } else {
                0
            };
            if net != expected {
                return false;
            }
        }
    }
    true
}

/// Whether some choice of local mixing coefficients ORs `incoming` into
/// exactly `x`. Taking every incoming vector contained in `x` is optimal, so
/// the greedy test is exact.
pub fn phi_x(x: MixVector, incoming: impl IntoIterator<Item = MixVector>) -> bool {
    incoming
        .into_iter()
        .filter(|v| v.is_subset(x))
        .fold(MixVector::EMPTY, MixVector::union)
        == x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClauseId {
    /// Conservation at a node.
    Flow(NodeId),
    /// Mixing consistency of an edge.
    Mix(EdgeId),
}

/// Clauses edge `edge = (i, j)` participates in: conservation at `i` and
/// `j`, its own mixing clause unless `i` is a source, and the mixing
/// clauses of `j`'s out-edges.
pub fn clause_partition(instance: &NetworkInstance, edge: EdgeId) -> Vec<ClauseId> {
    let e = instance.edge(edge);
    let mut ids = vec![ClauseId::Flow(e.tail), ClauseId::Flow(e.head)];
    if !instance.is_source(e.tail) {
        ids.push(ClauseId::Mix(edge));
    }
    ids.extend(instance.out_edges(e.head).iter().map(|&k| ClauseId::Mix(k)));
    ids.sort();
    ids.dedup();
    ids
}

pub struct EdgeCsp<'a> {
    instance: &'a NetworkInstance,
    demands: Demands,
    domains: Vec<EdgeDomain>,
    clauses: Vec<ClauseId>,
    participation: Vec<Vec<usize>>,
}

impl EdgeCsp<'_> {
    pub fn domains(&self) -> &[EdgeDomain] {
        &self.domains
    }

    pub fn clauses(&self) -> &[ClauseId] {
        &self.clauses
    }

    fn value(&self, assignment: &[usize], e: EdgeId) -> &LocalValue {
        &self.domains[e].values[assignment[e]]
    }

    fn holds(&self, clause: ClauseId, assignment: &[usize]) -> bool {
        match clause {
            ClauseId::Flow(node) => {
                phi_f(self.instance, &self.demands, node, |e, t| self.value(assignment, e).f[t])
            }
            // Only in-edges that route something transmit a symbol.
            ClauseId::Mix(e) => phi_x(
                self.value(assignment, e).x,
                self.instance
                    .pairs_into(e)
                    .iter()
                    .map(|&(_, k)| self.value(assignment, k))
                    .filter(|v| v.f.iter().any(|s| !s.is_empty()))
                    .map(|v| v.x),
            ),
        }
    }

    /// Builds the mixing solution of a satisfying assignment, recovering `β`
    /// by support inclusion.
    pub fn assemble(&self, assignment: &[usize]) -> MixingSolution {
        let inst = self.instance;
        let edges = inst.edges().len();
        let x: Vec<MixVector> = (0..edges).map(|e| self.value(assignment, e).x).collect();
        let f: Vec<Vec<FlowSet>> = (0..self.demands.terminal_count())
            .map(|t| (0..edges).map(|e| self.value(assignment, e).f[t]).collect())
            .collect();
        let z: Vec<bool> = (0..edges).map(|e| f.iter().any(|row| !row[e].is_empty())).collect();
        let beta: Vec<bool> = inst.pairs().iter().map(|&(k, j)| z[k] && x[k].is_subset(x[j])).collect();
        assert_eq!(propagate_mixing(inst, &beta), x, "recovered β must reproduce x");
        MixingSolution { z, f, x, beta }
    }
}

impl ClauseSystem for EdgeCsp<'_> {
    fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    fn evaluate(&self, assignment: &[usize], out: &mut [bool]) {
        for (k, &clause) in self.clauses.iter().enumerate() {
            out[k] = self.holds(clause, assignment);
        }
    }

    fn participation(&self, m: usize) -> &[usize] {
        &self.participation[m]
    }
}

pub fn build_edge_csp<'a>(
    instance: &'a NetworkInstance,
    demands: &Demands,
    cap: usize,
) -> Result<EdgeCsp<'a>, EdgeCspError> {
    let domains = (0..instance.edges().len())
        .map(|e| enumerate_domain(instance, demands, e, cap))
        .collect::<Result<Vec<_>, _>>()?;
    let mut clauses: Vec<ClauseId> = instance.nodes().iter().map(|&n| ClauseId::Flow(n)).collect();
    clauses.extend(
        (0..instance.edges().len())
            .filter(|&e| !instance.is_source(instance.edge(e).tail))
            .map(ClauseId::Mix),
    );
    let index: HashMap<ClauseId, usize> = clauses.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let participation = (0..instance.edges().len())
        .map(|e| clause_partition(instance, e).iter().filter_map(|c| index.get(c).copied()).collect())
        .collect();
    Ok(EdgeCsp { instance, demands: demands.clone(), domains, clauses, participation })
}

/// Per-edge choice in one round, and whether it equals the final solution's
/// value for that edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTraceRecord {
    pub iteration: usize,
    pub edge: (NodeId, NodeId),
    pub value: usize,
    pub matches_final: bool,
}

#[derive(Debug, Clone)]
pub struct EdgeCflRun {
    pub assignment: Option<Vec<usize>>,
    pub solution: Option<MixingSolution>,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    /// Filled only by [`solve_edge_cfl_traced`].
    pub edge_trace: Vec<EdgeTraceRecord>,
}

fn run(csp: &EdgeCsp, params: &CflParams, traced: bool) -> Result<EdgeCflRun, EdgeCspError> {
    let sizes: Vec<usize> = csp.domains.iter().map(|d| d.values.len()).collect();
    let mut state = cfl_init(&sizes, params)?;
    let mut history: Vec<(usize, Vec<usize>)> = Vec::new();
    let result = cfl_run_observed(&mut state, csp, params.max_iterations, |iteration, a| {
        if traced {
            history.push((iteration, a.to_vec()));
        }
    });
    let solution = result.assignment.as_deref().map(|a| csp.assemble(a));
    let mut edge_trace = Vec::new();
    for (iteration, a) in &history {
        for (e, &value) in a.iter().enumerate() {
            let edge = csp.instance.edge(e);
            edge_trace.push(EdgeTraceRecord {
                iteration: *iteration,
                edge: (edge.tail, edge.head),
                value,
                matches_final: result.assignment.as_ref().is_some_and(|f| f[e] == value),
            });
        }
    }
    Ok(EdgeCflRun {
        assignment: result.assignment,
        solution,
        iterations: result.iterations,
        trace: result.trace,
        edge_trace,
    })
}

/// One CFL run on the edge CSP.
pub fn solve_edge_cfl(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
) -> Result<EdgeCflRun, EdgeCspError> {
    let csp = build_edge_csp(instance, demands, DEFAULT_DOMAIN_CAP)?;
    run(&csp, params, false)
}

/// [`solve_edge_cfl`] that also records every edge's choice per round.
pub fn solve_edge_cfl_traced(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
) -> Result<EdgeCflRun, EdgeCspError> {
    let csp = build_edge_csp(instance, demands, DEFAULT_DOMAIN_CAP)?;
    run(&csp, params, true)
}

/// Repeated edge CFL runs keeping the cheapest feasible solution.
pub fn edge_restart_loop(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
    restarts: usize,
) -> Result<RestartOutcome, EdgeCspError> {
    let csp = build_edge_csp(instance, demands, DEFAULT_DOMAIN_CAP)?;
    params.validate()?;
    let (best, records) = restart_loop(params.seed, restarts, |seed| {
        let run = run(&csp, &CflParams { seed, ..*params }, false).expect("parameters already validated");
        let cost = run.solution.as_ref().map(|s| s.cost(instance));
        (cost, run.iterations, run.solution)
    });
    let best = match best.flatten() {
        Some(solution) => SolveOutcome {
            status: SolveStatus::Feasible,
            cost: Some(solution.cost(instance)),
            solution: Some(solution),
            selection: None,
            demands: demands.clone(),
            expansion: None,
        },
        None => SolveOutcome::infeasible(demands.clone(), SolveStatus::BudgetExhausted),
    };
    Ok(RestartOutcome { best, records })
}
