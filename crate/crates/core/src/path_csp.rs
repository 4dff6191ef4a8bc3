//! Path-based CSP: one variable per demanded `(p, t)` pair choosing a flow
//! path, solved by CFL, plus the cost-improving restart loop.
//!
//! Each pair owns one clause: the paths to its terminal are edge-disjoint and
//! the globally derived mixing vectors are pure on every used terminal
//! in-edge. Every
//! variable participates in every clause.

use thiserror::Error;

use crate::centralized::{SolveOutcome, SolveStatus};
use crate::cfl::{cfl_init, cfl_run_observed, restart_loop, CflError, CflParams, ClauseSystem, RestartRecord, TraceRecord};
use crate::mixing::{terminal_purity, MixingSolution, ProblemVariant};
use crate::model::{DemandPair, Demands, FlowId, NetworkInstance, NodeId};
use crate::paths::{derive_unchecked, disjoint_by_terminal, PathError, PathSelection, PathTable, DEFAULT_PATH_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathCspError {
    #[error("no path from the source of flow {flow} to terminal {terminal}")]
    NoPath { flow: FlowId, terminal: NodeId },
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Cfl(#[from] CflError),
}

pub struct PathCsp<'a> {
    instance: &'a NetworkInstance,
    demands: Demands,
    table: PathTable,
    pairs: Vec<DemandPair>,
    domains: Vec<usize>,
    all_clauses: Vec<usize>,
}

impl<'a> PathCsp<'a> {
    pub fn pairs(&self) -> &[DemandPair] {
        &self.pairs
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn table(&self) -> &PathTable {
        &self.table
    }

    pub fn selection(&self, assignment: &[usize]) -> PathSelection {
        PathSelection::new(self.pairs.clone(), assignment.to_vec())
    }

    pub fn derive(&self, assignment: &[usize]) -> MixingSolution {
        derive_unchecked(self.instance, &self.table, &self.selection(assignment), ProblemVariant::default())
    }
}

impl ClauseSystem for PathCsp<'_> {
    fn clause_count(&self) -> usize {
        self.pairs.len()
    }

    fn evaluate(&self, assignment: &[usize], out: &mut [bool]) {
        let selection = self.selection(assignment);
        let derived = derive_unchecked(self.instance, &self.table, &selection, ProblemVariant::default());
        let pure = terminal_purity(self.instance, &self.demands, &derived.x, &derived.z);
        let disjoint = disjoint_by_terminal(&self.table, &selection, self.demands.terminal_count());
        for (k, pair) in self.pairs.iter().enumerate() {
            out[k] = pure && disjoint[pair.terminal];
        }
    }

    fn participation(&self, _m: usize) -> &[usize] {
        &self.all_clauses
    }
}

pub fn build_path_csp<'a>(
    instance: &'a NetworkInstance,
    demands: &Demands,
    cap: usize,
) -> Result<PathCsp<'a>, PathCspError> {
    let table = PathTable::build(instance, demands, cap)?;
    let pairs = demands.pairs();
    let domains: Vec<usize> = pairs.iter().map(|p| table.count(p.flow, p.terminal)).collect();
    if let Some(k) = domains.iter().position(|&d| d == 0) {
        return Err(PathCspError::NoPath {
            flow: pairs[k].flow,
            terminal: instance.terminals()[pairs[k].terminal].node,
        });
    }
    Ok(PathCsp {
        instance,
        demands: demands.clone(),
        table,
        all_clauses: (0..pairs.len()).collect(),
        pairs,
        domains,
    })
}

/// Per-variable path choice in one iteration (1-based path index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathTraceRecord {
    pub iteration: usize,
    pub flow: FlowId,
    pub terminal: NodeId,
    pub path: usize,
}

#[derive(Debug, Clone)]
pub struct PathCflRun {
    pub selection: Option<PathSelection>,
    pub solution: Option<MixingSolution>,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    /// Filled only by [`solve_path_cfl_traced`].
    pub path_trace: Vec<PathTraceRecord>,
}

fn run(csp: &PathCsp, params: &CflParams, traced: bool) -> Result<PathCflRun, PathCspError> {
    let mut state = cfl_init(&csp.domains, params)?;
    let mut path_trace = Vec::new();
    let terminals = csp.instance.terminals();
    let result = cfl_run_observed(&mut state, csp, params.max_iterations, |iteration, assignment| {
        if traced {
            for (pair, &n) in csp.pairs.iter().zip(assignment) {
                path_trace.push(PathTraceRecord {
                    iteration,
                    flow: pair.flow,
                    terminal: terminals[pair.terminal].node,
                    path: n + 1,
                });
            }
        }
    });
    let selection = result.assignment.as_deref().map(|a| csp.selection(a));
    let solution = result.assignment.as_deref().map(|a| csp.derive(a));
    Ok(PathCflRun { selection, solution, iterations: result.iterations, trace: result.trace, path_trace })
}

/// One CFL run on the path CSP.
pub fn solve_path_cfl(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
) -> Result<PathCflRun, PathCspError> {
    let csp = build_path_csp(instance, demands, DEFAULT_PATH_CAP)?;
    run(&csp, params, false)
}

/// [`solve_path_cfl`] that also records every variable's choice per round.
pub fn solve_path_cfl_traced(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
) -> Result<PathCflRun, PathCspError> {
    let csp = build_path_csp(instance, demands, DEFAULT_PATH_CAP)?;
    run(&csp, params, true)
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub best: SolveOutcome,
    pub records: Vec<RestartRecord>,
}

/// Repeated CFL runs with seeds derived from `params.seed`, keeping the
/// cheapest feasible selection.
pub fn path_restart_loop(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
    restarts: usize,
) -> Result<RestartOutcome, PathCspError> {
    let csp = build_path_csp(instance, demands, DEFAULT_PATH_CAP)?;
    params.validate()?;
    let (best, records) = restart_loop(params.seed, restarts, |seed| {
        let run = run(&csp, &CflParams { seed, ..*params }, false).expect("parameters already validated");
        let cost = run.solution.as_ref().map(|s| s.cost(instance));
        (cost, run.iterations, (run.selection, run.solution))
    });
    let best = match best {
        Some((selection, Some(solution))) => SolveOutcome {
            status: SolveStatus::Feasible,
            cost: Some(solution.cost(instance)),
            solution: Some(solution),
            selection,
            demands: demands.clone(),
            expansion: None,
        },
        _ => SolveOutcome::infeasible(demands.clone(), SolveStatus::BudgetExhausted),
    };
    Ok(RestartOutcome { best, records })
}
