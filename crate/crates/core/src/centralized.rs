//! Exact minimum-cost mixing: branch-and-bound over per-terminal edge-disjoint
//! path combinations, the demand-expansion wrapper, and an exhaustive oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixing::{propagate_mixing, verify_solution_with, MixingSolution, ProblemVariant};
use crate::model::{Cost, Demands, EdgeId, FlowSet, NetworkInstance};
use crate::paths::{
    derive_unchecked, disjoint_combinations, mixing_acceptable, Path, PathError, PathSelection,
    PathTable, DEFAULT_PATH_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven minimum.
    Optimal,
    /// Feasible, not proven minimal (CFL runs).
    Feasible,
    /// Proven infeasible.
    Infeasible,
    /// No solution found within the iteration budget; not a proof.
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub cost: Option<Cost>,
    pub solution: Option<MixingSolution>,
    pub selection: Option<PathSelection>,
    /// Demand sets the solution satisfies (the expansion when one was used).
    pub demands: Demands,
    /// Chosen expansion, for expansion searches.
    pub expansion: Option<Demands>,
}

impl SolveOutcome {
    pub fn infeasible(demands: Demands, status: SolveStatus) -> Self {
        SolveOutcome { status, cost: None, solution: None, selection: None, demands, expansion: None }
    }

    pub fn is_feasible(&self) -> bool {
        self.solution.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub variant: ProblemVariant,
    pub path_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { variant: ProblemVariant::default(), path_cap: DEFAULT_PATH_CAP }
    }
}

/// One edge-disjoint combination of paths to a single terminal.
struct Combination {
    choice: Vec<usize>,
    edges: Vec<EdgeId>,
    cost: Cost,
}

fn terminal_combinations(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    t: usize,
) -> Vec<Combination> {
    let lists: Vec<&[Path]> = demands.of(t).iter().map(|p| table.paths(p, t)).collect();
    let mut combos: Vec<Combination> = disjoint_combinations(&lists)
        .into_iter()
        .map(|choice| {
            let edges: Vec<EdgeId> = choice
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| lists[i][c].edges.iter().copied())
                .collect();
            let cost = edges.iter().map(|&e| instance.edge(e).cost).sum();
            Combination { choice, edges, cost }
        })
        .collect();
    combos.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.choice.cmp(&b.choice)));
    combos
}

struct Search<'a> {
    instance: &'a NetworkInstance,
    demands: &'a Demands,
    table: &'a PathTable,
    variant: ProblemVariant,
    combos: Vec<Vec<Combination>>,
    usage: Vec<u32>,
    picked: Vec<usize>,
    best: Option<(Cost, Vec<usize>, MixingSolution)>,
}

impl Search<'_> {
    fn tuple(&self) -> Vec<usize> {
        self.picked
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| self.combos[t][c].choice.iter().copied())
            .collect()
    }

    fn dfs(&mut self, t: usize, cost: Cost) {
        if let Some((best, _, _)) = &self.best {
            if cost > *best {
                return;
            }
        }
        if t == self.combos.len() {
            let tuple = self.tuple();
            if let Some((best, best_tuple, _)) = &self.best {
                if cost == *best && tuple >= *best_tuple {
                    return;
                }
            }
            let selection = PathSelection::new(self.demands.pairs(), tuple.clone());
            let solution = derive_unchecked(self.instance, self.table, &selection, self.variant);
            if mixing_acceptable(self.instance, self.demands, &solution, self.variant) {
                self.best = Some((cost, tuple, solution));
            }
            return;
        }
        for c in 0..self.combos[t].len() {
            let mut added = Cost::from_integer(0);
            for &e in &self.combos[t][c].edges {
                if self.usage[e] == 0 {
                    added += self.instance.edge(e).cost;
                }
                self.usage[e] += 1;
            }
            self.picked.push(c);
            self.dfs(t + 1, cost + added);
            self.picked.pop();
            for &e in &self.combos[t][c].edges {
                self.usage[e] -= 1;
            }
        }
    }
}

/// Minimum-cost solution for `demands` using an existing path table whose
/// scope covers them. Ties go to the lexicographically smallest selection.
pub fn solve_with_table(
    instance: &NetworkInstance,
    demands: &Demands,
    table: &PathTable,
    variant: ProblemVariant,
) -> SolveOutcome {
    let combos: Vec<Vec<Combination>> = (0..demands.terminal_count())
        .map(|t| terminal_combinations(instance, demands, table, t))
        .collect();
    if combos.iter().any(Vec::is_empty) {
        return SolveOutcome::infeasible(demands.clone(), SolveStatus::Infeasible);
    }
    let mut search = Search {
        instance,
        demands,
        table,
        variant,
        combos,
        usage: vec![0; instance.edges().len()],
        picked: Vec::new(),
        best: None,
    };
    search.dfs(0, Cost::from_integer(0));
    match search.best {
        Some((cost, tuple, solution)) => SolveOutcome {
            status: SolveStatus::Optimal,
            cost: Some(cost),
            solution: Some(solution),
            selection: Some(PathSelection::new(demands.pairs(), tuple)),
            demands: demands.clone(),
            expansion: None,
        },
        None => SolveOutcome::infeasible(demands.clone(), SolveStatus::Infeasible),
    }
}

/// Exact minimum-cost mixing for fixed demand sets.
pub fn solve_centralized(
    instance: &NetworkInstance,
    demands: &Demands,
    options: &SolveOptions,
) -> Result<SolveOutcome, PathError> {
    let table = PathTable::build(instance, demands, options.path_cap)?;
    Ok(solve_with_table(instance, demands, &table, options.variant))
}

/// Every expansion `P_t ⊆ P̄_t ⊆ P`, ordered by total added demand, then
/// lexicographically by the per-terminal sets' bit patterns.
pub fn expansions(base: &Demands, all: FlowSet) -> Vec<Demands> {
    let mut out = vec![Vec::new()];
    for &set in base.sets() {
        let free: Vec<_> = all.difference(set).iter().collect();
        let mut next = Vec::new();
        for prefix in &out {
            for mask in 0u64..(1 << free.len()) {
                let mut s = set;
                for (i, &p) in free.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        s = s.with(p);
                    }
                }
                let mut row: Vec<FlowSet> = prefix.clone();
                row.push(s);
                next.push(row);
            }
        }
        out = next;
    }
    let mut out: Vec<Demands> = out.into_iter().map(Demands::new).collect();
    out.sort_by_key(|d| {
        (d.added_over(base), d.sets().iter().map(|s| s.bits()).collect::<Vec<_>>())
    });
    out
}

/// Minimum over all demand expansions. The first expansion in
/// [`expansions`] order wins ties.
pub fn solve_with_expansion(
    instance: &NetworkInstance,
    demands: &Demands,
    options: &SolveOptions,
) -> Result<SolveOutcome, PathError> {
    let all = instance.all_flows();
    let scope = Demands::multicast(demands.terminal_count(), all);
    let table = PathTable::build(instance, &scope, options.path_cap)?;
    let mut best: Option<SolveOutcome> = None;
    for expansion in expansions(demands, all) {
        let outcome = solve_with_table(instance, &expansion, &table, options.variant);
        let better = match (&outcome.cost, best.as_ref().and_then(|b| b.cost)) {
            (Some(c), Some(b)) => *c < b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(match best {
        Some(mut outcome) => {
            outcome.expansion = Some(outcome.demands.clone());
            outcome
        }
        None => SolveOutcome::infeasible(demands.clone(), SolveStatus::Infeasible),
    })
}

/// Search space of [`brute_force_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Every path-selection tuple, checked with the full constraint verifier.
    PathSelections,
    /// Every binary `β`, then every routing `f` compatible with the
    /// propagated `x`.
    RawAssignments,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for the oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

pub const DEFAULT_ORACLE_EDGE_BOUND: usize = 20;
const MAX_TUPLES: u128 = 2_000_000;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub outcome: SolveOutcome,
    /// Cost of every feasible point visited.
    pub feasible_costs: BTreeSet<Cost>,
}

/// Odometer over mixed-radix digits; returns false after the last tuple.
fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

fn tuple_count(radix: &[usize]) -> u128 {
    radix.iter().map(|&r| r as u128).product()
}

/// Exhaustive reference solver for small instances.
pub fn brute_force_oracle(
    instance: &NetworkInstance,
    demands: &Demands,
    mode: OracleMode,
    variant: ProblemVariant,
    edge_bound: usize,
) -> Result<OracleOutcome, OracleError> {
    if instance.edges().len() > edge_bound {
        return Err(OracleError::TooLarge(format!(
            "{} edges exceed the bound of {edge_bound}",
            instance.edges().len()
        )));
    }
    let table = PathTable::build(instance, demands, DEFAULT_PATH_CAP)?;
    let pairs = demands.pairs();
    let radix: Vec<usize> = pairs.iter().map(|p| table.count(p.flow, p.terminal)).collect();
    let mut best: Option<(Cost, MixingSolution, PathSelection)> = None;
    let mut feasible_costs = BTreeSet::new();
    let mut consider = |solution: MixingSolution, selection: PathSelection| {
        let cost = solution.cost(instance);
        feasible_costs.insert(cost);
        if best.as_ref().map_or(true, |(b, _, _)| cost < *b) {
            best = Some((cost, solution, selection));
        }
    };

    match mode {
        OracleMode::PathSelections => {
            if tuple_count(&radix) > MAX_TUPLES {
                return Err(OracleError::TooLarge("too many path selections".into()));
            }
            if radix.iter().all(|&r| r > 0) {
                let mut digits = vec![0; radix.len()];
                loop {
                    let selection = PathSelection::new(pairs.clone(), digits.clone());
                    let solution = derive_unchecked(instance, &table, &selection, variant);
                    if verify_solution_with(instance, demands, &solution, variant).is_empty() {
                        consider(solution, selection);
                    }
                    if !advance(&mut digits, &radix) {
                        break;
                    }
                }
            }
        }
        OracleMode::RawAssignments => {
            let pair_count = instance.pairs().len();
            if pair_count > 20 {
                return Err(OracleError::TooLarge(format!("{pair_count} adjacent edge pairs")));
            }
            let betas: Vec<u64> = if variant.beta_all_one {
                vec![(1u64 << pair_count) - 1]
            } else {
                (0..1u64 << pair_count).collect()
            };
            for bits in betas {
                let beta: Vec<bool> = (0..pair_count).map(|i| bits >> i & 1 == 1).collect();
                let x = propagate_mixing(instance, &beta);
                let probe = MixingSolution { z: Vec::new(), f: Vec::new(), x, beta };
                // Paths whose every edge may carry the flow under this x.
                let allowed: Vec<Vec<usize>> = pairs
                    .iter()
                    .map(|p| {
                        table
                            .paths(p.flow, p.terminal)
                            .iter()
                            .enumerate()
                            .filter(|(_, path)| path.edges.iter().all(|&e| probe.x[e].contains(p.flow)))
                            .map(|(i, _)| i)
                            .collect()
                    })
                    .collect();
                let sub_radix: Vec<usize> = allowed.iter().map(Vec::len).collect();
                if sub_radix.iter().any(|&r| r == 0) {
                    continue;
                }
                if tuple_count(&sub_radix) > MAX_TUPLES {
                    return Err(OracleError::TooLarge("too many routings".into()));
                }
                let mut digits = vec![0; sub_radix.len()];
                loop {
                    let choice: Vec<usize> = digits.iter().zip(&allowed).map(|(&d, a)| a[d]).collect();
                    let selection = PathSelection::new(pairs.clone(), choice);
                    let routed = derive_unchecked(instance, &table, &selection, variant);
                    let solution = MixingSolution {
                        z: routed.z,
                        f: routed.f,
                        x: probe.x.clone(),
                        beta: probe.beta.clone(),
                    };
                    if verify_solution_with(instance, demands, &solution, variant).is_empty() {
                        consider(solution, selection);
                    }
                    if !advance(&mut digits, &sub_radix) {
                        break;
                    }
                }
            }
        }
    }

    let outcome = match best {
        Some((cost, solution, selection)) => SolveOutcome {
            status: SolveStatus::Optimal,
            cost: Some(cost),
            solution: Some(solution),
            selection: Some(selection),
            demands: demands.clone(),
            expansion: None,
        },
        None => SolveOutcome::infeasible(demands.clone(), SolveStatus::Infeasible),
    };
    Ok(OracleOutcome { outcome, feasible_costs })
}
