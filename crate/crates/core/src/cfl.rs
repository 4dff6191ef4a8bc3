//! Communication-free learning (CFL) over a finite-domain clause system.
//!
//! Each variable keeps a probability vector over its domain. Every iteration
//! all variables draw simultaneously; a variable whose participating clauses
//! all hold collapses onto its draw, otherwise its distribution is pulled
//! toward uniform with extra weight on the draw.
//!
//! Variable `m` draws from its own `ChaCha8Rng` stream (`seed`, stream `m`),
//! so the draws do not depend on evaluation order or on tracing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Cost;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflParams {
    pub a: f64,
    pub b: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for CflParams {
    fn default() -> Self {
        CflParams { a: 1.0, b: 0.01, max_iterations: 10_000, seed: 0 }
    }
}

impl CflParams {
    pub fn validate(&self) -> Result<(), CflError> {
        for (name, value) in [("a", self.a), ("b", self.b)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(CflError::BadParameter { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CflError {
    #[error("variable {variable} has an empty domain")]
    EmptyDomain { variable: usize },
    #[error("parameter {name} = {value} outside (0, 1]")]
    BadParameter { name: &'static str, value: f64 },
}

/// A set of clauses over variables with finite domains.
pub trait ClauseSystem {
    fn clause_count(&self) -> usize;

    /// Evaluates every clause under `assignment` into `out`.
    fn evaluate(&self, assignment: &[usize], out: &mut [bool]);

    /// Clauses variable `m` participates in.
    fn participation(&self, m: usize) -> &[usize];
}

#[derive(Debug, Clone)]
pub struct CflState {
    pub dists: Vec<Vec<f64>>,
    /// Current assignment, `None` before the first draw.
    pub assignment: Option<Vec<usize>>,
    pub iteration: usize,
    a: f64,
    b: f64,
    rngs: Vec<ChaCha8Rng>,
}

/// Uniform distributions over the given domain sizes.
pub fn cfl_init(domains: &[usize], params: &CflParams) -> Result<CflState, CflError> {
    params.validate()?;
    if let Some(variable) = domains.iter().position(|&d| d == 0) {
        return Err(CflError::EmptyDomain { variable });
    }
    let rngs = (0..domains.len())
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(m as u64);
            rng
        })
        .collect();
    Ok(CflState {
        dists: domains.iter().map(|&d| vec![1.0 / d as f64; d]).collect(),
        assignment: None,
        iteration: 0,
        a: params.a,
        b: params.b,
        rngs,
    })
}

/// Applies one CFL update to `dist` in place. Satisfied: point mass on
/// `chosen`. Unsatisfied: `q ← (1-b)q + w` with `w = a/D` for `chosen` and
/// `b/D` otherwise, `D = |Λ| - 1 + a/b`.
pub fn update_rule(dist: &mut [f64], satisfied: bool, chosen: usize, a: f64, b: f64) {
    if satisfied {
        dist.iter_mut().for_each(|q| *q = 0.0);
        dist[chosen] = 1.0;
        return;
    }
    let denom = (dist.len() - 1) as f64 + a / b;
    for (i, q) in dist.iter_mut().enumerate() {
        let pull = if i == chosen { a } else { b };
        *q = (1.0 - b) * *q + pull / denom;
    }
    // Guards against rounding drift across long runs.
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|q| *q /= total);
}

fn draw(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &q) in dist.iter().enumerate() {
        if q > 0.0 {
            acc += q;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub assignment: Vec<usize>,
    pub flags: Vec<bool>,
    pub all_satisfied: bool,
}

/// One synchronous round: draw, evaluate, update.
pub fn cfl_step(state: &mut CflState, system: &dyn ClauseSystem) -> StepResult {
    let assignment: Vec<usize> = state
        .dists
        .iter()
        .zip(state.rngs.iter_mut())
        .map(|(dist, rng)| draw(dist, rng))
        .collect();
    let mut clauses = vec![false; system.clause_count()];
    system.evaluate(&assignment, &mut clauses);
    let flags: Vec<bool> = (0..assignment.len())
        .map(|m| system.participation(m).iter().all(|&k| clauses[k]))
        .collect();
    for (m, dist) in state.dists.iter_mut().enumerate() {
        update_rule(dist, flags[m], assignment[m], state.a, state.b);
    }
    state.iteration += 1;
    state.assignment = Some(assignment.clone());
    StepResult { assignment, flags, all_satisfied: clauses.iter().all(|&c| c) }
}

/// Per-iteration engine trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub satisfied_count: usize,
    pub all_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CflRun {
    /// First assignment satisfying every clause, if any.
    pub assignment: Option<Vec<usize>>,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
}

/// Iterates until every clause holds or `max_iterations` rounds have run.
pub fn cfl_run(state: &mut CflState, system: &dyn ClauseSystem, max_iterations: usize) -> CflRun {
    cfl_run_observed(state, system, max_iterations, |_, _| {})
}

/// Like [`cfl_run`], calling `observe(iteration, assignment)` after each
/// round.
pub fn cfl_run_observed(
    state: &mut CflState,
    system: &dyn ClauseSystem,
    max_iterations: usize,
    mut observe: impl FnMut(usize, &[usize]),
) -> CflRun {
    let mut trace = Vec::new();
    for _ in 0..max_iterations {
        let step = cfl_step(state, system);
        observe(state.iteration, &step.assignment);
        trace.push(TraceRecord {
            iteration: state.iteration,
            satisfied_count: step.flags.iter().filter(|&&f| f).count(),
            all_satisfied: step.all_satisfied,
        });
        if step.all_satisfied {
            return CflRun { assignment: Some(step.assignment), iterations: state.iteration, trace };
        }
    }
    CflRun { assignment: None, iterations: state.iteration, trace }
}

/// One row of a restart loop's history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestartRecord {
    pub restart: usize,
    pub feasible: bool,
    pub cost: Option<Cost>,
    pub running_min: Option<Cost>,
    pub iterations: usize,
}

/// Seeds for `restarts` independent runs, drawn from a generator seeded with
/// `seed`.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).map(|_| rng.gen()).collect()
}

/// Runs `attempt` once per derived seed, keeping the cheapest result. Each
/// attempt returns its cost (if feasible), iteration count and payload.
pub fn restart_loop<T>(
    seed: u64,
    restarts: usize,
    mut attempt: impl FnMut(u64) -> (Option<Cost>, usize, T),
) -> (Option<T>, Vec<RestartRecord>) {
    let mut best: Option<(Cost, T)> = None;
    let mut records = Vec::with_capacity(restarts);
    for (restart, run_seed) in restart_seeds(seed, restarts).into_iter().enumerate() {
        let (cost, iterations, payload) = attempt(run_seed);
        if let Some(c) = cost {
            if best.as_ref().map_or(true, |(b, _)| c < *b) {
                best = Some((c, payload));
            }
        }
        records.push(RestartRecord {
            restart: restart + 1,
            feasible: cost.is_some(),
            cost,
            running_min: best.as_ref().map(|(c, _)| *c),
            iterations,
        });
    }
    (best.map(|(_, p)| p), records)
}
