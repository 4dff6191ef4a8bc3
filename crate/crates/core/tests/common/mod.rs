#![allow(dead_code)]

use netmix::model::{Cost, Edge, FlowSet, NetworkInstance, Terminal};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid instance: up to 3 flows, up to 3 terminals, up to 3 relay
/// nodes and at most `max_edges` edges with costs in 1..=3. Sources come
/// first, then relays, then terminals, so node order is topological.
pub fn random_dag(seed: u64, max_edges: usize) -> NetworkInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flows = rng.gen_range(1..=3usize);
    let relays = rng.gen_range(0..=3usize);
    let terms = rng.gen_range(1..=3usize);
    let sources: Vec<usize> = (1..=flows).collect();
    let relay_nodes: Vec<usize> = (flows + 1..=flows + relays).collect();
    let term_nodes: Vec<usize> = (flows + relays + 1..=flows + relays + terms).collect();

    let mut candidates = Vec::new();
    for &s in &sources {
        for &n in relay_nodes.iter().chain(&term_nodes) {
            candidates.push((s, n));
        }
    }
    for (i, &a) in relay_nodes.iter().enumerate() {
        for &b in relay_nodes[i + 1..].iter().chain(&term_nodes) {
            candidates.push((a, b));
        }
    }
    candidates.shuffle(&mut rng);
    let keep = rng.gen_range(1..=max_edges.min(candidates.len()));
    let mut chosen: Vec<(usize, usize)> = candidates[..keep].to_vec();
    chosen.sort_unstable();
    let edges = chosen
        .into_iter()
        .map(|(a, b)| Edge::new(a, b, Cost::from_integer(rng.gen_range(1..=3))))
        .collect();

    let mut sets: Vec<FlowSet> = (0..terms)
        .map(|_| FlowSet::unit(rng.gen_range(1..=flows)))
        .collect();
    for set in sets.iter_mut() {
        for p in 1..=flows {
            if rng.gen_bool(0.3) {
                *set = set.with(p);
            }
        }
    }
    for p in 1..=flows {
        if !sets.iter().any(|s| s.contains(p)) {
            let t = rng.gen_range(0..terms);
            sets[t] = sets[t].with(p);
        }
    }
    let terminals = term_nodes
        .iter()
        .zip(sets)
        .map(|(&node, set)| Terminal { node, demands: set })
        .collect();
    let nodes: Vec<usize> = (1..=flows + relays + terms).collect();
    let inst = NetworkInstance::new(nodes, edges, sources, terminals);
    assert!(inst.validate().is_empty(), "generator produced an invalid instance: {}", inst.validate());
    inst
}

/// Random binary β, one bit per adjacent edge pair.
pub fn random_beta(instance: &NetworkInstance, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instance.pairs().iter().map(|_| rng.gen_bool(0.5)).collect()
}
