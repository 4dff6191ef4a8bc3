//! JSON instance and solution documents, builtin topologies, and random
//! demand realizations.
//!
//! Random demands use `ChaCha8Rng` (rand_chacha 0.3) seeded through
//! `SeedableRng::seed_from_u64`; the generator is part of the
//! reproducibility contract and is not changed.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::centralized::{SolveOutcome, SolveStatus};
use crate::model::{
    Cost, Demands, Edge, FlowId, FlowSet, NetworkInstance, NodeId, Terminal, ValidationReport,
    Violation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IoError {
    #[error("syntax error at {location}: {message}")]
    Syntax { location: String, message: String },
    #[error("instance failed validation:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error("unknown topology '{0}' (expected fig3, butterfly or sprint-core)")]
    UnknownTopology(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

fn syntax(location: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Syntax { location: location.into(), message: message.into() }
}

/// Integer costs serialize as JSON numbers, fractional ones as `"n/d"`.
pub fn cost_to_json(cost: Cost) -> Value {
    if cost.is_integer() {
        Value::from(cost.to_integer())
    } else {
        Value::from(format!("{}/{}", cost.numer(), cost.denom()))
    }
}

/// Parses a JSON cost. `Ok(None)` marks a negative cost.
fn cost_from_json(value: &Value) -> Result<Option<Cost>, String> {
    match value {
        Value::Number(n) => parse_decimal(&n.to_string()),
        Value::String(s) => match s.split_once('/') {
            Some((n, d)) => {
                let negative = n.trim().starts_with('-');
                let n: u64 = n.trim().trim_start_matches('-').parse().map_err(|_| format!("bad cost '{s}'"))?;
                let d: u64 = d.trim().parse().map_err(|_| format!("bad cost '{s}'"))?;
                if d == 0 {
                    return Err(format!("zero denominator in cost '{s}'"));
                }
                Ok((!negative || n == 0).then(|| Cost::new(n, d)))
            }
            None => parse_decimal(s.trim()),
        },
        _ => Err("cost must be a number or an \"n/d\" string".into()),
    }
}

/// Exact rational value of a decimal literal such as `2`, `0.25` or `1e-3`.
fn parse_decimal(text: &str) -> Result<Option<Cost>, String> {
    let bad = || format!("bad cost '{text}'");
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let scale = exponent - frac_part.len() as i32;
    let numer: u64 = digits.parse().map_err(|_| bad())?;
    let pow = |k: i32| 10u64.checked_pow(k as u32).ok_or_else(bad);
    let value = if scale >= 0 {
        Cost::from_integer(numer.checked_mul(pow(scale)?).ok_or_else(bad)?)
    } else {
        Cost::new(numer, pow(-scale)?)
    };
    Ok((!negative || value.is_zero()).then_some(value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EdgeDoc {
    from: NodeId,
    to: NodeId,
    cost: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TerminalDoc {
    node: NodeId,
    demands: Vec<FlowId>,
}

/// Flow → source node map, written with keys in ascending flow order.
#[derive(Debug, Clone, PartialEq)]
struct SourceMap(Vec<(String, NodeId)>);

impl Serialize for SourceMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SourceMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, NodeId>::deserialize(deserializer)
            .map_err(|e| D::Error::custom(format!("sources: {e}")))?;
        Ok(SourceMap(raw.into_iter().collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    nodes: Vec<NodeId>,
    edges: Vec<EdgeDoc>,
    sources: SourceMap,
    terminals: Vec<TerminalDoc>,
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<NetworkInstance, IoError> {
    let doc: InstanceDocument = serde_json::from_str(text).map_err(|e| {
        syntax(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;

    let mut flows = Vec::with_capacity(doc.sources.0.len());
    for (key, node) in &doc.sources.0 {
        let flow: FlowId = key
            .parse()
            .ok()
            .filter(|&f| f >= 1)
            .ok_or_else(|| syntax(format!("sources.\"{key}\""), "flow ids must be positive integers"))?;
        flows.push((flow, *node));
    }
    flows.sort_unstable();
    for (idx, &(flow, _)) in flows.iter().enumerate() {
        if flow != idx + 1 {
            return Err(syntax(
                "sources",
                format!("flow ids must be 1..{}, found {flow}", flows.len()),
            ));
        }
    }
    let sources: Vec<NodeId> = flows.into_iter().map(|(_, n)| n).collect();

    let mut negative = Vec::new();
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (idx, e) in doc.edges.iter().enumerate() {
        let cost = cost_from_json(&e.cost).map_err(|m| syntax(format!("edges[{idx}].cost"), m))?;
        if cost.is_none() {
            negative.push(Violation::NegativeCost { tail: e.from, head: e.to });
        }
        edges.push(Edge::new(e.from, e.to, cost.unwrap_or_else(Cost::zero)));
    }

    let mut terminals = Vec::with_capacity(doc.terminals.len());
    for (idx, t) in doc.terminals.iter().enumerate() {
        for (j, &flow) in t.demands.iter().enumerate() {
            if flow == 0 || flow > sources.len() {
                return Err(syntax(
                    format!("terminals[{idx}].demands[{j}]"),
                    format!("unknown source flow id {flow}"),
                ));
            }
        }
        terminals.push(Terminal::new(t.node, t.demands.iter().copied()));
    }

    let instance = NetworkInstance::new(doc.nodes, edges, sources, terminals);
    let mut report = instance.validate();
    report.violations.extend(negative);
    if report.is_empty() {
        Ok(instance)
    } else {
        Err(IoError::ValidationFailed(report))
    }
}

/// Pretty-printed instance document with a stable field order.
pub fn serialize_instance(instance: &NetworkInstance) -> String {
    let doc = InstanceDocument {
        nodes: instance.nodes().to_vec(),
        edges: instance
            .edges()
            .iter()
            .map(|e| EdgeDoc { from: e.tail, to: e.head, cost: cost_to_json(e.cost) })
            .collect(),
        sources: SourceMap(
            instance
                .sources()
                .iter()
                .enumerate()
                .map(|(idx, &n)| ((idx + 1).to_string(), n))
                .collect(),
        ),
        terminals: instance
            .terminals()
            .iter()
            .map(|t| TerminalDoc { node: t.node, demands: t.demands.iter().collect() })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("instance documents always serialize")
}

/// Names accepted by [`builtin`].
pub const BUILTINS: [&str; 3] = ["fig3", "butterfly", "sprint-core"];

/// The benchmark topologies: `fig3` (11 nodes, unit costs), the two-unicast
/// `butterfly`, and `sprint-core`.
pub fn builtin(name: &str) -> Result<NetworkInstance, IoError> {
    let unit = |pairs: &[(NodeId, NodeId)]| pairs.iter().map(|&(a, b)| Edge::unit(a, b)).collect::<Vec<_>>();
    let instance = match name {
        "fig3" => NetworkInstance::new(
            1..=11,
            unit(&[
                (1, 3),
                (2, 5),
                (3, 4),
                (3, 8),
                (3, 9),
                (4, 6),
                (5, 4),
                (5, 7),
                (6, 7),
                (6, 10),
                (9, 10),
                (9, 11),
                (11, 8),
            ]),
            vec![1, 2],
            vec![Terminal::new(8, [1]), Terminal::new(7, [1, 2]), Terminal::new(10, [1, 2])],
        ),
        // s1 = 1, s2 = 2, coding edge (3,4), t1 = 5, t2 = 6.
        "butterfly" => NetworkInstance::new(
            1..=6,
            unit(&[(1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (1, 5), (2, 6)]),
            vec![1, 2],
            vec![Terminal::new(5, [2]), Terminal::new(6, [1])],
        ),
        "sprint-core" => {
            let cost = |a, b| match (a, b) {
                (10, 5) | (10, 6) => 20,
                (9, 4) => 10,
                _ => 1,
            };
            let pairs = [
                (8, 10),
                (10, 7),
                (7, 4),
                (4, 1),
                (1, 2),
                (10, 5),
                (5, 1),
                (7, 9),
                (9, 2),
                (11, 9),
                (11, 10),
                (7, 6),
                (10, 6),
                (8, 6),
                (9, 4),
            ];
            NetworkInstance::new(
                [1, 2, 4, 5, 6, 7, 8, 9, 10, 11],
                pairs
                    .iter()
                    .map(|&(a, b)| Edge::new(a, b, Cost::from_integer(cost(a, b))))
                    .collect(),
                vec![8, 11],
                vec![Terminal::new(2, [1, 2]), Terminal::new(6, [2])],
            )
        }
        other => return Err(IoError::UnknownTopology(other.to_string())),
    };
    Ok(instance)
}

/// Random two-source demand generation.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGenConfig {
    /// Terminals per realization.
    pub terminals: usize,
    /// Candidate terminal nodes.
    pub terminal_pool: Vec<NodeId>,
    /// Expected number of demanded flows per terminal, in `[1, 2]`.
    pub q: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl DemandGenConfig {
    /// Checks the configuration against `instance`.
    pub fn validate(&self, instance: &NetworkInstance) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::BadConfig(m));
        if instance.flow_count() != 2 {
            return bad(format!("random demands need exactly 2 flows, instance has {}", instance.flow_count()));
        }
        if !(1.0..=2.0).contains(&self.q) {
            return bad(format!("q must lie in [1, 2], got {}", self.q));
        }
        if self.terminals == 0 {
            return bad("terminal count must be at least 1".into());
        }
        let mut pool = self.terminal_pool.clone();
        pool.sort_unstable();
        pool.dedup();
        if pool.len() != self.terminal_pool.len() {
            return bad("terminal pool has duplicates".into());
        }
        if pool.len() < self.terminals {
            return bad(format!(
                "terminal pool has {} nodes, need at least {}",
                pool.len(),
                self.terminals
            ));
        }
        for &node in &pool {
            if !instance.nodes().contains(&node) {
                return bad(format!("terminal pool node {node} is not in the network"));
            }
            if instance.is_source(node) {
                return bad(format!("terminal pool node {node} is a source"));
            }
            if !instance.out_edges(node).is_empty() {
                return bad(format!("terminal pool node {node} has outgoing edges"));
            }
        }
        Ok(())
    }
}

/// One sampled terminal list with demand sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandRealization {
    pub terminals: Vec<Terminal>,
}

impl DemandRealization {
    pub fn apply(&self, instance: &NetworkInstance) -> NetworkInstance {
        instance.with_terminals(self.terminals.clone())
    }
}

/// Samples demand realizations: each picks `T` distinct terminals uniformly
/// from the pool; each terminal demands one source uniformly and the other
/// with probability `q - 1`. Terminals are listed by ascending node id.
pub fn random_demands(
    instance: &NetworkInstance,
    config: &DemandGenConfig,
) -> Result<Vec<DemandRealization>, IoError> {
    config.validate(instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let extra = config.q - 1.0;
    let mut out = Vec::with_capacity(config.realizations);
    for _ in 0..config.realizations {
        let mut nodes: Vec<NodeId> = sample(&mut rng, config.terminal_pool.len(), config.terminals)
            .into_iter()
            .map(|i| config.terminal_pool[i])
            .collect();
        nodes.sort_unstable();
        let terminals = nodes
            .into_iter()
            .map(|node| {
                let first: FlowId = rng.gen_range(1..=2);
                let mut set = FlowSet::unit(first);
                if rng.gen_bool(extra) {
                    set = set.with(3 - first);
                }
                Terminal { node, demands: set }
            })
            .collect();
        out.push(DemandRealization { terminals });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionEntry {
    pub terminal: NodeId,
    pub demands: Vec<FlowId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub flow: FlowId,
    pub terminal: NodeId,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingEntry {
    pub edge: (NodeId, NodeId),
    /// One bit per flow, flow 1 first.
    pub x: Vec<u8>,
}

/// Solution document: cost, used edges, per-pair flow paths, mixing vectors
/// of the used edges, and the `(k, i, j)` triples with `β_kij = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub feasible: bool,
    pub status: SolveStatus,
    pub algorithm: String,
    pub cost: Option<Value>,
    pub expansion: Option<Vec<ExpansionEntry>>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub paths: Vec<PathEntry>,
    pub mixing: Vec<MixingEntry>,
    pub beta: Vec<(NodeId, NodeId, NodeId)>,
}

fn expansion_entries(instance: &NetworkInstance, demands: &Demands) -> Vec<ExpansionEntry> {
    instance
        .terminals()
        .iter()
        .enumerate()
        .map(|(t, term)| ExpansionEntry { terminal: term.node, demands: demands.of(t).iter().collect() })
        .collect()
}

impl SolutionDocument {
    pub fn from_outcome(instance: &NetworkInstance, outcome: &SolveOutcome, algorithm: &str) -> Self {
        let mut doc = SolutionDocument {
            feasible: false,
            status: outcome.status,
            algorithm: algorithm.to_string(),
            cost: None,
            expansion: None,
            edges: Vec::new(),
            paths: Vec::new(),
            mixing: Vec::new(),
            beta: Vec::new(),
        };
        let Some(solution) = &outcome.solution else {
            return doc;
        };
        doc.feasible = true;
        doc.cost = Some(cost_to_json(solution.cost(instance)));
        doc.expansion = outcome.expansion.as_ref().map(|d| expansion_entries(instance, d));
        let ends = |e: usize| (instance.edge(e).tail, instance.edge(e).head);
        doc.edges = solution.used_edges().map(ends).collect();
        for pair in outcome.demands.pairs() {
            if let Some(path) = solution.flow_path(instance, pair.flow, pair.terminal) {
                let mut nodes = vec![instance.source(pair.flow)];
                nodes.extend(path.iter().map(|&e| instance.edge(e).head));
                doc.paths.push(PathEntry {
                    flow: pair.flow,
                    terminal: instance.terminals()[pair.terminal].node,
                    nodes,
                });
            }
        }
        doc.mixing = solution
            .used_edges()
            .map(|e| MixingEntry {
                edge: ends(e),
                x: (1..=instance.flow_count())
                    .map(|p| u8::from(solution.x[e].contains(p)))
                    .collect(),
            })
            .collect();
        doc.beta = instance
            .pairs()
            .iter()
            .zip(&solution.beta)
            .filter(|(_, &b)| b)
            .map(|(&(k, j), _)| (instance.edge(k).tail, instance.edge(k).head, instance.edge(j).head))
            .collect();
        doc
    }

    /// Numeric cost, if the document has one.
    pub fn cost_value(&self) -> Option<f64> {
        let cost = cost_from_json(self.cost.as_ref()?).ok()??;
        cost.to_f64()
    }
}

/// Pretty JSON text of a solution document.
pub fn write_solution(doc: &SolutionDocument) -> String {
    serde_json::to_string_pretty(doc).expect("solution documents always serialize")
}
