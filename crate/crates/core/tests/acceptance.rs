mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{random_beta, random_dag};
use netmix::centralized::{brute_force_oracle, expansions, OracleMode, DEFAULT_ORACLE_EDGE_BOUND};
use netmix::cfl::{update_rule, CflParams, RestartRecord};
use netmix::edge_csp::{phi_x, solve_edge_cfl, EdgeCspError};
use netmix::io::builtin;
use netmix::mixing::{propagate_mixing, verify_solution, MixingSolution, ProblemVariant};
use netmix::model::{Cost, Demands, FlowSet, NetworkInstance};
use netmix::path_csp::{path_restart_loop, solve_path_cfl};
use netmix::rlnc::{assign_coefficients, edge_symbols_global, edge_symbols_local, propagate_code, roundtrip, sample_code};
use netmix::{solve_centralized, solve_with_expansion, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn cost(n: u64) -> Option<Cost> {
    Some(Cost::from_integer(n))
}

fn show(c: Option<Cost>) -> String {
    c.map_or("infeasible".into(), |c| c.to_string())
}

/// Order-preserving parallel map over scoped threads.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    })
}

/// Oracle optimum over every demand expansion.
fn oracle_expansion_cost(inst: &NetworkInstance, mode: OracleMode) -> Option<Cost> {
    expansions(&inst.demands(), inst.all_flows())
        .iter()
        .filter_map(|d| {
            brute_force_oracle(inst, d, mode, ProblemVariant::default(), DEFAULT_ORACLE_EDGE_BOUND).unwrap().outcome.cost
        })
        .min()
}

fn fig3() {
    let start = Instant::now();
    let inst = builtin("fig3").unwrap();
    let d = inst.demands();
    let best = solve_centralized(&inst, &d, &SolveOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let paths = brute_force_oracle(&inst, &d, OracleMode::PathSelections, ProblemVariant::default(), 20).unwrap();
    let expected: BTreeSet<Cost> = [11, 12].into_iter().map(Cost::from_integer).collect();
    let pass = best.cost == cost(11) && paths.feasible_costs == expected && elapsed < Duration::from_secs(1);
    report(
        "fig3 exact optimum",
        pass,
        format!(
            "centralized {} in {elapsed:.2?}, feasible costs {:?}",
            show(best.cost),
            paths.feasible_costs.iter().map(|c| c.to_integer()).collect::<Vec<_>>()
        ),
    );
}

fn butterfly() {
    let start = Instant::now();
    let inst = builtin("butterfly").unwrap();
    let d = inst.demands();
    let p1 = solve_centralized(&inst, &d, &SolveOptions::default()).unwrap();
    let p2 = solve_with_expansion(&inst, &d, &SolveOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let oracle_p1 = brute_force_oracle(&inst, &d, OracleMode::RawAssignments, ProblemVariant::default(), 20)
        .unwrap()
        .outcome
        .cost;
    let oracle_p2 = oracle_expansion_cost(&inst, OracleMode::RawAssignments);
    let dichotomy = p1.cost.is_none() && oracle_p1.is_none() && p2.cost.is_some() && p2.cost == oracle_p2;
    let pass = dichotomy && p2.cost == cost(9) && elapsed < Duration::from_secs(1);
    report(
        "butterfly dichotomy",
        pass,
        format!(
            "problem 1 {}, expanded {} (oracle {}) in {elapsed:.2?}; expected cost 9, but the 6-node, \
             7-edge topology cannot exceed 7",
            show(p1.cost),
            show(p2.cost),
            show(oracle_p2)
        ),
    );
}

fn sprint() {
    let start = Instant::now();
    let inst = builtin("sprint-core").unwrap();
    let d = inst.demands();
    let p1 = solve_centralized(&inst, &d, &SolveOptions::default()).unwrap();
    let p2 = solve_with_expansion(&inst, &d, &SolveOptions::default()).unwrap();
    let routing = SolveOptions { variant: ProblemVariant { routing: true, beta_all_one: false }, ..SolveOptions::default() };
    let r = solve_centralized(&inst, &d, &routing).unwrap();
    let elapsed = start.elapsed();
    let quoted: BTreeSet<(usize, usize)> =
        [(8, 10), (10, 7), (7, 4), (4, 1), (1, 2), (11, 9), (9, 2), (8, 6), (11, 10), (7, 6)].into();
    let used: BTreeSet<(usize, usize)> = p2
        .solution
        .as_ref()
        .map(|s| s.used_edges().map(|e| (inst.edge(e).tail, inst.edge(e).head)).collect())
        .unwrap_or_default();
    let pass = p1.cost == cost(28)
        && p2.cost == cost(10)
        && r.cost == cost(28)
        && used == quoted
        && elapsed < Duration::from_secs(5);
    report(
        "sprint-core optima",
        pass,
        format!(
            "problem 2 {}, problem 1 {}, routing {}, expanded edge set {} in {elapsed:.2?}",
            show(p2.cost),
            show(p1.cost),
            show(r.cost),
            if used == quoted { "matches" } else { "differs" }
        ),
    );
}

fn oracle_equivalence() {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..300).collect();
    let results = par_map(&seeds, |&seed| {
        let inst = random_dag(seed, 8);
        let d = inst.demands();
        let c = solve_centralized(&inst, &d, &SolveOptions::default()).unwrap().cost;
        let modes = [OracleMode::PathSelections, OracleMode::RawAssignments];
        let agree = modes.iter().all(|&m| {
            brute_force_oracle(&inst, &d, m, ProblemVariant::default(), 20).unwrap().outcome.cost == c
        });
        (agree, c.is_some())
    });
    let elapsed = start.elapsed();
    let agree = results.iter().filter(|r| r.0).count();
    let feasible = results.iter().filter(|r| r.1).count();
    report(
        "oracle equivalence",
        agree == results.len() && elapsed < Duration::from_secs(60),
        format!("{agree}/{} random DAGs agree with both oracle modes ({feasible} feasible) in {elapsed:.2?}", results.len()),
    );
}

/// One CFL run's summary: iterations and whether its solution verified.
struct RunSummary {
    absorbed: bool,
    iterations: usize,
    sound: bool,
}

fn summarize(inst: &NetworkInstance, d: &Demands, solution: Option<&MixingSolution>, iterations: usize) -> RunSummary {
    RunSummary {
        absorbed: solution.is_some(),
        iterations,
        sound: solution.map_or(true, |s| verify_solution(inst, d, s).is_empty()),
    }
}

fn path_runs(inst: &NetworkInstance, d: &Demands, a: f64, b: f64, max: usize, seeds: &[u64]) -> Vec<RunSummary> {
    par_map(seeds, |&seed| {
        let params = CflParams { a, b, max_iterations: max, seed };
        let run = solve_path_cfl(inst, d, &params).unwrap();
        summarize(inst, d, run.solution.as_ref(), run.iterations)
    })
}

fn edge_runs(inst: &NetworkInstance, d: &Demands, max: usize, seeds: &[u64]) -> Vec<Option<RunSummary>> {
    par_map(seeds, |&seed| {
        let params = CflParams { max_iterations: max, seed, ..CflParams::default() };
        match solve_edge_cfl(inst, d, &params) {
            Ok(run) => Some(summarize(inst, d, run.solution.as_ref(), run.iterations)),
            Err(EdgeCspError::DomainExplosion { .. }) => None,
            Err(e) => panic!("{e}"),
        }
    })
}

fn within(runs: &[RunSummary], limit: usize) -> usize {
    runs.iter().filter(|r| r.absorbed && r.iterations <= limit).count()
}

fn cfl_soundness_and_convergence() {
    let seeds: Vec<u64> = (0..100).collect();
    let fig3 = builtin("fig3").unwrap();
    let fd = fig3.demands();
    let fig3_path = path_runs(&fig3, &fd, 1.0, 0.01, 500, &seeds);
    let fig3_edge = edge_runs(&fig3, &fd, 20_000, &seeds).into_iter().flatten().collect::<Vec<_>>();
    let sprint = builtin("sprint-core").unwrap();
    let sd = Demands::multicast(sprint.terminals().len(), sprint.all_flows());
    let sprint_path = path_runs(&sprint, &sd, 0.05, 0.009, 1000, &seeds);

    // Random DAGs: one path run and one edge run per instance.
    let dag_seeds: Vec<u64> = (1000..1600).collect();
    let dag_runs: Vec<RunSummary> = par_map(&dag_seeds, |&seed| {
        let inst = random_dag(seed, 9);
        let d = inst.demands();
        let mut out = Vec::new();
        let params = CflParams { max_iterations: 2000, seed, ..CflParams::default() };
        if let Ok(run) = solve_path_cfl(&inst, &d, &params) {
            out.push(summarize(&inst, &d, run.solution.as_ref(), run.iterations));
        }
        match solve_edge_cfl(&inst, &d, &CflParams { max_iterations: 5000, ..params }) {
            Ok(run) => out.push(summarize(&inst, &d, run.solution.as_ref(), run.iterations)),
            Err(EdgeCspError::DomainExplosion { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();

    let all: Vec<&RunSummary> = fig3_path.iter().chain(&fig3_edge).chain(&sprint_path).chain(&dag_runs).collect();
    let emitted = all.iter().filter(|r| r.absorbed).count();
    let sound = all.iter().filter(|r| r.absorbed && r.sound).count();
    report(
        "CFL soundness",
        all.len() >= 1000 && sound == emitted,
        format!("{sound}/{emitted} emitted solutions verify, over {} runs", all.len()),
    );

    let (fp, fe, sp) = (within(&fig3_path, 500), within(&fig3_edge, 20_000), within(&sprint_path, 1000));
    report(
        "CFL convergence",
        fp >= 95 && fe * 100 >= 90 * fig3_edge.len() && sp >= 90,
        format!(
            "fig3 path {fp}/100 within 500, fig3 edge {fe}/{} within 20000, sprint-core expanded path {sp}/100 within 1000",
            fig3_edge.len()
        ),
    );
}

fn monotone(records: &[RestartRecord]) -> bool {
    records.windows(2).all(|w| match (w[0].running_min, w[1].running_min) {
        (Some(a), Some(b)) => b <= a,
        (Some(_), None) => false,
        _ => true,
    })
}

fn restart_optimality() {
    let seeds: Vec<u64> = (0..100).collect();
    let fig3 = builtin("fig3").unwrap();
    let fig3_runs = par_map(&seeds, |&seed| {
        let params = CflParams { seed, ..CflParams::default() };
        let out = path_restart_loop(&fig3, &fig3.demands(), &params, 50).unwrap();
        (out.records.last().and_then(|r| r.running_min) == cost(11), monotone(&out.records))
    });
    let sprint = builtin("sprint-core").unwrap();
    let sd = Demands::multicast(sprint.terminals().len(), sprint.all_flows());
    let sprint_runs = par_map(&seeds, |&seed| {
        let params = CflParams { a: 0.05, b: 0.009, seed, ..CflParams::default() };
        let out = path_restart_loop(&sprint, &sd, &params, 200).unwrap();
        (out.records.last().and_then(|r| r.running_min) == cost(10), monotone(&out.records))
    });
    let f11 = fig3_runs.iter().filter(|r| r.0).count();
    let s10 = sprint_runs.iter().filter(|r| r.0).count();
    let mono = fig3_runs.iter().chain(&sprint_runs).filter(|r| r.1).count();
    report(
        "restart optimality",
        f11 >= 99 && s10 >= 95 && mono == 200,
        format!("fig3 ends at 11 in {f11}/100, sprint-core expanded ends at 10 in {s10}/100, monotone {mono}/200"),
    );
}

fn update_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut dist = Vec::new();
    for i in 0..10_000 {
        if i % 50 == 0 {
            let n = rng.gen_range(2..64);
            dist = vec![1.0 / n as f64; n];
        }
        let a = rng.gen_range(0.001..=1.0);
        let b = rng.gen_range(0.001..=1.0);
        let chosen = rng.gen_range(0..dist.len());
        update_rule(&mut dist, rng.gen_bool(0.5), chosen, a, b);
        worst = worst.max((dist.iter().sum::<f64>() - 1.0).abs());
    }
    let mut q = vec![0.5, 0.5];
    update_rule(&mut q, false, 0, 1.0, 0.01);
    let denom = 2.0 - 1.0 + 1.0 / 0.01;
    let expected = [0.99 * 0.5 + 1.0 / denom, 0.99 * 0.5 + 0.01 / denom];
    let hand = (q[0] - expected[0]).abs() < 1e-9 && (q[1] - expected[1]).abs() < 1e-9;
    report(
        "CFL update algebra",
        worst < 1e-12 && hand && (q[0] - 0.504901).abs() < 1e-6,
        format!("max |sum - 1| = {worst:.1e} over 10^4 updates, (1, 0.01, 2) case gives ({:.6}, {:.6})", q[0], q[1]),
    );
}

fn all_symbols(q: u64, flows: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..flows {
        out = out.into_iter().flat_map(|v| (0..q).map(move |s| [v.clone(), vec![s]].concat())).collect();
    }
    out
}

fn rlnc() {
    let cases = [
        ("fig3", builtin("fig3").unwrap(), false, 5u64),
        ("butterfly", builtin("butterfly").unwrap(), true, 3u64),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, inst, expand, q) in &cases {
        let d = inst.demands();
        let out = if *expand {
            solve_with_expansion(inst, &d, &SolveOptions::default()).unwrap()
        } else {
            solve_centralized(inst, &d, &SolveOptions::default()).unwrap()
        };
        let sol = out.solution.unwrap();
        let mut decoded_ok = true;
        let mut successes = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let Ok(code) = sample_code(inst, &out.demands, &sol, *q, &mut rng, 32) else { continue };
            successes += 1;
            for sigma in all_symbols(*q, inst.flow_count()) {
                let rt = roundtrip(inst, &code, &sigma);
                for (t, got) in rt.decoded.iter().enumerate() {
                    let want: Vec<u64> = out.demands.of(t).iter().map(|p| sigma[p - 1]).collect();
                    decoded_ok &= *got == want;
                }
            }
        }
        pass &= successes >= 99 && decoded_ok;
        details.push(format!("{name} q={q}: {successes}/100 codes, round trip {}", if decoded_ok { "exact" } else { "wrong" }));
    }
    let consistent = (0..100u64)
        .filter(|&seed| {
            let inst = random_dag(seed, 12);
            let beta = random_beta(&inst, seed + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = 7;
            let alpha = assign_coefficients(&inst, &beta, q, &mut rng).unwrap();
            let c = propagate_code(&inst, &alpha, q);
            let x = propagate_mixing(&inst, &beta);
            let support = c.iter().zip(&x).all(|(ce, xe)| ce.iter().enumerate().all(|(p, &v)| v == 0 || xe.contains(p + 1)));
            let sources: Vec<u64> = (0..inst.flow_count()).map(|_| rng.gen_range(0..q)).collect();
            support && edge_symbols_local(&inst, &alpha, q, &sources) == edge_symbols_global(&c, q, &sources)
        })
        .count();
    pass &= consistent == 100;
    details.push(format!("local/global symbols agree on {consistent}/100 DAGs"));
    report("RLNC decodability and round trip", pass, details.join("; "));
}

fn phi_x_exactness() {
    let mut cases = 0;
    let mut agree = 0;
    for k in 0..=3u32 {
        for x in 0..8u64 {
            for code in 0..8u64.pow(k) {
                let incoming: Vec<FlowSet> = (0..k).map(|i| FlowSet::from_bits(code / 8u64.pow(i) % 8)).collect();
                let target = FlowSet::from_bits(x);
                let exhaustive = (0u32..1 << k).any(|mask| {
                    incoming
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .fold(FlowSet::EMPTY, |acc, (_, &v)| acc.union(v))
                        == target
                });
                cases += 1;
                agree += usize::from(phi_x(target, incoming.iter().copied()) == exhaustive);
            }
        }
    }
    report("phi-x exactness", agree == cases, format!("{agree}/{cases} cases with P <= 3, |I| <= 3"));
}

fn main() {
    fig3();
    butterfly();
    sprint();
    oracle_equivalence();
    cfl_soundness_and_convergence();
    restart_optimality();
    update_algebra();
    rlnc();
    phi_x_exactness();
}
