use netmix::io::{random_demands, DemandGenConfig};
use netmix::{solve_centralized, solve_with_expansion, Cost, NetworkInstance, ProblemVariant, SolveOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::solve::fmt_cost;
use crate::{load_instance, write_text, Baseline, ExperimentArgs};

#[derive(Serialize)]
struct Mean {
    algorithm: &'static str,
    mean_cost: Option<f64>,
}

#[derive(Serialize)]
struct Statistics<'a> {
    instance: &'a str,
    terminals: usize,
    terminal_pool: Vec<usize>,
    q: f64,
    seed: u64,
    realizations: usize,
    /// Realizations feasible for every compared algorithm.
    counted: usize,
    infeasible: usize,
    means: Vec<Mean>,
}

fn baseline_cost(instance: &NetworkInstance, baseline: Baseline) -> Result<Option<Cost>, String> {
    let variant = match baseline {
        Baseline::Routing => ProblemVariant { routing: true, beta_all_one: false },
        Baseline::TwoStep => ProblemVariant { routing: false, beta_all_one: true },
        _ => ProblemVariant::default(),
    };
    let options = SolveOptions { variant, ..SolveOptions::default() };
    let demands = instance.demands();
    let outcome = if baseline == Baseline::Expansion {
        solve_with_expansion(instance, &demands, &options)
    } else {
        solve_centralized(instance, &demands, &options)
    };
    outcome.map(|o| o.cost).map_err(|e| e.to_string())
}

/// Sinks that are not sources.
fn default_pool(instance: &NetworkInstance) -> Vec<usize> {
    instance
        .nodes()
        .iter()
        .copied()
        .filter(|&n| !instance.is_source(n) && instance.out_edges(n).is_empty())
        .collect()
}

pub fn run(args: &ExperimentArgs) -> Result<(), String> {
    let instance = load_instance(&args.instance)?;
    if args.algorithms.is_empty() {
        return Err("no algorithms selected".into());
    }
    let pool = if args.pool.is_empty() { default_pool(&instance) } else { args.pool.clone() };
    let config = DemandGenConfig {
        terminals: args.terminals,
        terminal_pool: pool.clone(),
        q: args.q,
        realizations: args.realizations,
        seed: args.seed,
    };
    if args.realizations == 0 {
        return Err("realization count must be at least 1".into());
    }
    let realizations = random_demands(&instance, &config).map_err(|e| e.to_string())?;
    let costs: Vec<Vec<Option<Cost>>> = realizations
        .par_iter()
        .map(|r| {
            let inst = r.apply(&instance);
            args.algorithms.iter().map(|&b| baseline_cost(&inst, b)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let counted: Vec<&Vec<Option<Cost>>> = costs.iter().filter(|row| row.iter().all(Option::is_some)).collect();
    let means = args
        .algorithms
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let total: Cost = counted.iter().map(|row| row[k].expect("counted rows are feasible")).sum();
            let mean = (!counted.is_empty())
                .then(|| *total.numer() as f64 / *total.denom() as f64 / counted.len() as f64);
            Mean { algorithm: b.name(), mean_cost: mean }
        })
        .collect();
    let stats = Statistics {
        instance: &args.instance,
        terminals: args.terminals,
        terminal_pool: pool,
        q: args.q,
        seed: args.seed,
        realizations: realizations.len(),
        counted: counted.len(),
        infeasible: realizations.len() - counted.len(),
        means,
    };
    write_text(args.output.as_ref(), &serde_json::to_string_pretty(&stats).expect("statistics serialize"))?;

    if let Some(path) = &args.csv {
        let err = |e: csv::Error| format!("cannot write {}: {e}", path.display());
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec!["realization".to_string(), "demands".to_string()];
        header.extend(args.algorithms.iter().map(|b| b.name().to_string()));
        w.write_record(&header).map_err(err)?;
        for (i, (r, row)) in realizations.iter().zip(&costs).enumerate() {
            let demands = r
                .terminals
                .iter()
                .map(|t| {
                    let flows: Vec<String> = t.demands.iter().map(|p| p.to_string()).collect();
                    format!("{}:{}", t.node, flows.join("+"))
                })
                .collect::<Vec<_>>()
                .join(" ");
            let mut record = vec![(i + 1).to_string(), demands];
            record.extend(row.iter().map(|&c| fmt_cost(c)));
            w.write_record(&record).map_err(err)?;
        }
        w.flush().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}
