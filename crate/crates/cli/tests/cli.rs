use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn netmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmix")).args(args).env_remove("NETMIX_SEED").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn fig3_centralized_costs_eleven() {
    let out = netmix(&["solve", "--instance", "fig3", "--algorithm", "centralized"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["cost"], 11);
    assert_eq!(doc["status"], "optimal");
    assert_eq!(doc["edges"].as_array().unwrap().len(), 11);
}

#[test]
fn butterfly_needs_expansion() {
    let out = netmix(&["solve", "--instance", "butterfly"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["feasible"], false);
    assert_eq!(doc["status"], "infeasible");

    for algorithm in ["centralized", "oracle"] {
        let out = netmix(&["solve", "--instance", "butterfly", "--algorithm", algorithm, "--expand"]);
        assert_eq!(out.status.code(), Some(0));
        let doc = json(&out);
        assert_eq!(doc["cost"], 7, "{algorithm}");
        let coding = doc["mixing"].as_array().unwrap().iter().find(|m| m["edge"] == serde_json::json!([3, 4])).unwrap();
        assert_eq!(coding["x"], serde_json::json!([1, 1]));
    }
}

#[test]
fn oracle_agrees_with_centralized() {
    for (instance, extra) in [("fig3", None), ("butterfly", None), ("fig3", Some("--routing")), ("butterfly", Some("--expand"))] {
        let run = |algorithm: &str| {
            let mut args = vec!["solve", "--instance", instance, "--algorithm", algorithm];
            args.extend(extra);
            let out = netmix(&args);
            (out.status.code(), json(&out)["cost"].clone())
        };
        assert_eq!(run("centralized"), run("oracle"), "{instance} {extra:?}");
    }
}

#[test]
fn sprint_core_variants() {
    let cost = |extra: &[&str]| {
        let mut args = vec!["solve", "--instance", "sprint-core"];
        args.extend(extra);
        json(&netmix(&args))["cost"].clone()
    };
    assert_eq!(cost(&[]), 28);
    assert_eq!(cost(&["--expand"]), 10);
    assert_eq!(cost(&["--routing"]), 28);
}

#[test]
fn path_cfl_traces() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = netmix(&[
        "solve", "--instance", "fig3", "--algorithm", "path-cfl", "--restarts", "50", "--seed", "3",
        "--output", &p("sol.json"), "--trace", &p("trace.csv"), "--restart-trace", &p("restarts.csv"),
        "--variable-trace", &p("vars.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(p("sol.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "feasible");

    let restarts = csv_rows(Path::new(&p("restarts.csv")));
    assert_eq!(restarts.len(), 50);
    let mins: Vec<u64> = restarts.iter().filter(|r| !r[3].is_empty()).map(|r| r[3].parse().unwrap()).collect();
    assert!(mins.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*mins.last().unwrap(), 11);
    assert_eq!(doc["cost"], 11);

    let trace = csv_rows(Path::new(&p("trace.csv")));
    assert_eq!(trace.last().unwrap()[2], "true");
    assert!(trace[..trace.len() - 1].iter().all(|r| r[2] == "false"));
    let vars = csv_rows(Path::new(&p("vars.csv")));
    assert_eq!(vars.len(), 5 * trace.len());
}

#[test]
fn exhausted_run_is_not_a_proof() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = netmix(&[
        "solve", "--instance", "butterfly", "--algorithm", "path-cfl", "--max-iterations", "40",
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["feasible"], false);
    assert_eq!(doc["status"], "budget_exhausted");
    let rows = csv_rows(&trace);
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r[2] == "false"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let files: Vec<String> = ["sol", "trace", "restarts", "vars", "code"]
            .iter()
            .map(|f| dir.path().join(format!("{tag}-{f}")).to_str().unwrap().to_string())
            .collect();
        let out = netmix(&[
            "solve", "--instance", "fig3", "--algorithm", "edge-cfl", "--restarts", "2", "--max-iterations", "3000",
            "--seed", "9", "--output", &files[0], "--trace", &files[1], "--restart-trace", &files[2],
            "--variable-trace", &files[3], "--rlnc-q", "5", "--code", &files[4],
        ]);
        assert!(out.status.code().unwrap() < 2, "{}", String::from_utf8_lossy(&out.stderr));
        files.iter().map(|f| std::fs::read(f).unwrap_or_default()).collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_netmix"));
        cmd.args(["solve", "--instance", "fig3", "--algorithm", "path-cfl", "--restarts", "3"]);
        cmd.env_remove("NETMIX_SEED");
        if let Some(s) = env {
            cmd.env("NETMIX_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("17"), None), run(None, Some("17")));
}

#[test]
fn rlnc_code_document() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.json");
    let out = netmix(&["solve", "--instance", "fig3", "--rlnc-q", "5", "--code", code.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&code).unwrap()).unwrap();
    assert_eq!(doc["q"], 5);
    assert_eq!(doc["edges"].as_array().unwrap().len(), 13);

    let small = netmix(&["solve", "--instance", "fig3", "--rlnc-q", "3", "--code", code.to_str().unwrap()]);
    assert_eq!(small.status.code(), Some(2));
}

#[test]
fn bad_input_exits_two() {
    for args in [
        vec!["solve", "--instance", "no-such-file.json"],
        vec!["solve", "--instance", "fig3", "--algorithm", "path-cfl", "--a", "0"],
        vec!["solve", "--instance", "fig3", "--algorithm", "path-cfl", "--routing"],
        vec!["solve", "--instance", "fig3", "--restarts", "0"],
        vec!["solve", "--instance", "fig3", "--algorithm", "magic"],
        vec!["experiment", "--instance", "fig3", "--terminals", "9"],
        vec!["experiment", "--instance", "sprint-core", "--pool", "2,4"],
        vec!["experiment", "--instance", "sprint-core", "--realizations", "0"],
    ] {
        let out = netmix(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn instance_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.json");
    std::fs::write(&path, netmix::io::serialize_instance(&netmix::io::builtin("fig3").unwrap())).unwrap();
    let out = netmix(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(json(&out)["cost"], 11);

    std::fs::write(&path, "{ \"nodes\": [1, 2], ").unwrap();
    assert_eq!(netmix(&["solve", "--instance", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn experiment_multicast_demands_make_expansion_moot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("costs.csv");
    let out = netmix(&[
        "experiment", "--instance", "sprint-core", "--q", "2", "--realizations", "5", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stats = json(&out);
    assert_eq!(stats["counted"], 5);
    let means = stats["means"].as_array().unwrap();
    assert_eq!(means[0]["algorithm"], "expansion");
    assert_eq!(means[0]["mean_cost"], means[1]["mean_cost"]);
    assert_eq!(csv_rows(&csv).len(), 5);
}

#[test]
fn single_realization_mean_is_its_cost() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("costs.csv");
    let out = netmix(&[
        "experiment", "--instance", "sprint-core", "--terminals", "1", "--q", "1", "--realizations", "1",
        "--seed", "4", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stats = json(&out);
    let rows = csv_rows(&csv);
    for (k, mean) in stats["means"].as_array().unwrap().iter().enumerate() {
        let cost: f64 = rows[0][2 + k].parse().unwrap();
        assert_eq!(mean["mean_cost"].as_f64().unwrap(), cost);
    }
}
