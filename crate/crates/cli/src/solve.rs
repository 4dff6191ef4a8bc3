use std::path::Path;

use netmix::centralized::{
    brute_force_oracle, expansions, OracleMode, SolveOutcome, SolveStatus, DEFAULT_ORACLE_EDGE_BOUND,
};
use netmix::cfl::{restart_loop, CflParams, RestartRecord, TraceRecord};
use netmix::edge_csp::{solve_edge_cfl, solve_edge_cfl_traced};
use netmix::io::{write_solution, SolutionDocument};
use netmix::path_csp::{solve_path_cfl, solve_path_cfl_traced};
use netmix::paths::PathSelection;
use netmix::rlnc::{sample_code, CodeDocument};
use netmix::{solve_centralized, solve_with_expansion, Cost, Demands, MixingSolution, NetworkInstance};
use netmix::{ProblemVariant, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{load_instance, write_text, Algorithm, SolveArgs};

pub fn fmt_cost(cost: Option<Cost>) -> String {
    match cost {
        Some(c) if c.is_integer() => c.to_integer().to_string(),
        Some(c) => format!("{}/{}", c.numer(), c.denom()),
        None => String::new(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, String> {
    csv::Writer::from_path(path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), String> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| format!("cannot write {}: {e}", path.display());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// One CFL run as kept by the restart loop.
#[derive(Clone)]
struct CflPayload {
    solution: Option<MixingSolution>,
    selection: Option<PathSelection>,
    trace: Vec<TraceRecord>,
    variables: Vec<Vec<String>>,
}

fn cfl_attempt(
    instance: &NetworkInstance,
    demands: &Demands,
    params: &CflParams,
    algorithm: Algorithm,
    traced: bool,
) -> Result<(usize, CflPayload), String> {
    if algorithm == Algorithm::PathCfl {
        let run = if traced { solve_path_cfl_traced(instance, demands, params) } else { solve_path_cfl(instance, demands, params) }
            .map_err(|e| e.to_string())?;
        let variables = run
            .path_trace
            .iter()
            .map(|r| vec![r.iteration.to_string(), r.flow.to_string(), r.terminal.to_string(), r.path.to_string()])
            .collect();
        Ok((run.iterations, CflPayload { solution: run.solution, selection: run.selection, trace: run.trace, variables }))
    } else {
        let run = if traced { solve_edge_cfl_traced(instance, demands, params) } else { solve_edge_cfl(instance, demands, params) }
            .map_err(|e| e.to_string())?;
        let variables = run
            .edge_trace
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    r.edge.0.to_string(),
                    r.edge.1.to_string(),
                    (r.value + 1).to_string(),
                    r.matches_final.to_string(),
                ]
            })
            .collect();
        Ok((run.iterations, CflPayload { solution: run.solution, selection: None, trace: run.trace, variables }))
    }
}

fn oracle(instance: &NetworkInstance, variant: ProblemVariant, expand: bool) -> Result<SolveOutcome, String> {
    let base = instance.demands();
    let candidates = if expand { expansions(&base, instance.all_flows()) } else { vec![base.clone()] };
    let mut best: Option<SolveOutcome> = None;
    for demands in candidates {
        let out = brute_force_oracle(instance, &demands, OracleMode::PathSelections, variant, DEFAULT_ORACLE_EDGE_BOUND)
            .map_err(|e| e.to_string())?
            .outcome;
        if out.cost.is_some() && best.as_ref().and_then(|b| b.cost).map_or(true, |b| out.cost.unwrap() < b) {
            best = Some(out);
        }
    }
    Ok(match best {
        Some(mut out) => {
            if expand {
                out.expansion = Some(out.demands.clone());
            }
            out
        }
        None => SolveOutcome::infeasible(base, SolveStatus::Infeasible),
    })
}

/// Runs `solve`; `Ok(true)` when a feasible solution was found.
pub fn run(args: &SolveArgs) -> Result<bool, String> {
    let instance = load_instance(&args.instance)?;
    let variant = ProblemVariant { routing: args.routing, beta_all_one: args.beta_all_one };
    let cfl = matches!(args.algorithm, Algorithm::PathCfl | Algorithm::EdgeCfl);
    if cfl && (args.routing || args.beta_all_one) {
        return Err("--routing and --beta-all-one apply to the centralized and oracle solvers only".into());
    }
    if args.restarts == 0 {
        return Err("--restarts must be at least 1".into());
    }
    let params = CflParams { a: args.a, b: args.b, max_iterations: args.max_iterations, seed: args.seed };
    params.validate().map_err(|e| e.to_string())?;

    let mut records: Vec<RestartRecord> = Vec::new();
    let mut kept: Option<CflPayload> = None;
    let options = SolveOptions { variant, ..SolveOptions::default() };
    let outcome = match args.algorithm {
        Algorithm::Centralized if args.expand => solve_with_expansion(&instance, &instance.demands(), &options),
        Algorithm::Centralized => solve_centralized(&instance, &instance.demands(), &options),
        Algorithm::Oracle => return finish(args, &instance, oracle(&instance, variant, args.expand)?, &[], None),
        Algorithm::PathCfl | Algorithm::EdgeCfl => {
            let demands = if args.expand {
                Demands::multicast(instance.terminals().len(), instance.all_flows())
            } else {
                instance.demands()
            };
            let traced = args.variable_trace.is_some();
            let mut last: Option<CflPayload> = None;
            let mut failure = None;
            let (best, recs) = restart_loop(args.seed, args.restarts, |seed| {
                match cfl_attempt(&instance, &demands, &CflParams { seed, ..params }, args.algorithm, traced) {
                    Ok((iterations, payload)) => {
                        let cost = payload.solution.as_ref().map(|s| s.cost(&instance));
                        last = Some(payload.clone());
                        (cost, iterations, payload)
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        (None, 0, CflPayload { solution: None, selection: None, trace: Vec::new(), variables: Vec::new() })
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            records = recs;
            kept = best.or(last);
            let payload = kept.as_ref().expect("at least one restart ran");
            let outcome = match &payload.solution {
                Some(solution) => SolveOutcome {
                    status: SolveStatus::Feasible,
                    cost: Some(solution.cost(&instance)),
                    solution: Some(solution.clone()),
                    selection: payload.selection.clone(),
                    demands: demands.clone(),
                    expansion: args.expand.then(|| demands.clone()),
                },
                None => SolveOutcome::infeasible(demands, SolveStatus::BudgetExhausted),
            };
            Ok(outcome)
        }
    }
    .map_err(|e| e.to_string())?;
    finish(args, &instance, outcome, &records, kept.as_ref())
}

fn finish(
    args: &SolveArgs,
    instance: &NetworkInstance,
    outcome: SolveOutcome,
    records: &[RestartRecord],
    kept: Option<&CflPayload>,
) -> Result<bool, String> {
    let doc = SolutionDocument::from_outcome(instance, &outcome, args.algorithm.name());
    write_text(args.output.as_ref(), &write_solution(&doc))?;

    if let Some(path) = &args.trace {
        let rows: Vec<Vec<String>> = kept
            .map(|k| k.trace.as_slice())
            .unwrap_or_default()
            .iter()
            .map(|r| vec![r.iteration.to_string(), r.satisfied_count.to_string(), r.all_satisfied.to_string()])
            .collect();
        write_rows(path, &["iteration", "satisfied_count", "all_satisfied"], &rows)?;
    }
    if let Some(path) = &args.variable_trace {
        let header: &[&str] = if args.algorithm == Algorithm::EdgeCfl {
            &["iteration", "tail", "head", "value", "matches_final"]
        } else {
            &["iteration", "flow", "terminal", "path"]
        };
        write_rows(path, header, kept.map(|k| k.variables.as_slice()).unwrap_or_default())?;
    }
    if let Some(path) = &args.restart_trace {
        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| vec![r.restart.to_string(), r.feasible.to_string(), fmt_cost(r.cost), fmt_cost(r.running_min)])
            .collect();
        write_rows(path, &["restart_index", "feasible", "cost", "running_min"], &rows)?;
    }
    if let (Some(q), Some(solution)) = (args.rlnc_q, &outcome.solution) {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let code = sample_code(instance, &outcome.demands, solution, q, &mut rng, args.rlnc_tries)
            .map_err(|e| e.to_string())?;
        let text = serde_json::to_string_pretty(&CodeDocument::new(instance, &code)).expect("code documents serialize");
        write_text(args.code.as_ref(), &text)?;
    }
    Ok(outcome.is_feasible())
}
