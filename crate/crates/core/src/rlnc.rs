//! Scalar linear network codes over prime fields built on top of a mixing
//! solution: random local coefficients gated by `β`, global coding vectors,
//! per-terminal decoding matrices and an encode/decode round trip.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixing::MixingSolution;
use crate::model::{Demands, EdgeId, FlowSet, NetworkInstance, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlncError {
    #[error("field size {q} is not prime")]
    NotPrime { q: u64 },
    #[error("field size {q} must exceed the number of terminals ({terminals})")]
    FieldTooSmall { q: u64, terminals: usize },
    #[error("no decodable code after {tries} tries")]
    NoDecodableCode { tries: usize },
    #[error("terminal {terminal} has no in-edge carrying flow {flow}")]
    MissingRoute { terminal: NodeId, flow: usize },
}

pub fn is_prime(q: u64) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// Smallest prime strictly above `n`.
pub fn smallest_prime_above(n: u64) -> u64 {
    (n + 1..).find(|&q| is_prime(q)).expect("primes are unbounded")
}

fn check_field(instance: &NetworkInstance, q: u64) -> Result<(), RlncError> {
    if !is_prime(q) {
        return Err(RlncError::NotPrime { q });
    }
    let terminals = instance.terminals().len();
    if q <= terminals as u64 {
        return Err(RlncError::FieldTooSmall { q, terminals });
    }
    Ok(())
}

fn mul(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn inv(a: u64, q: u64) -> u64 {
    let (mut base, mut exp, mut acc) = (a % q, q - 2, 1);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base, q);
        }
        base = mul(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Reduces `rows | rhs` in place; returns the rank of `rows`.
fn eliminate(rows: &mut [Vec<u64>], rhs: &mut [u64], q: u64) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        rhs.swap(rank, pivot);
        let scale = inv(rows[rank][col], q);
        for v in rows[rank].iter_mut() {
            *v = mul(*v, scale, q);
        }
        rhs[rank] = mul(rhs[rank], scale, q);
        for r in 0..rows.len() {
            let factor = rows[r][col];
            if r != rank && factor != 0 {
                for c in 0..cols {
                    let sub = mul(factor, rows[rank][c], q);
                    rows[r][c] = (rows[r][c] + q - sub) % q;
                }
                rhs[r] = (rhs[r] + q - mul(factor, rhs[rank], q)) % q;
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of a matrix over GF(q).
pub fn rank_mod(matrix: &[Vec<u64>], q: u64) -> usize {
    let mut rows = matrix.to_vec();
    let mut rhs = vec![0; rows.len()];
    eliminate(&mut rows, &mut rhs, q)
}

/// Solves the square system `A s = y` over GF(q); `None` when singular.
pub fn solve_mod(a: &[Vec<u64>], y: &[u64], q: u64) -> Option<Vec<u64>> {
    let mut rows = a.to_vec();
    let mut rhs = y.to_vec();
    (eliminate(&mut rows, &mut rhs, q) == a.len()).then_some(rhs)
}

/// Local coefficients: uniform over GF(q) where `β = 1`, zero elsewhere.
pub fn assign_coefficients(
    instance: &NetworkInstance,
    beta: &[bool],
    q: u64,
    rng: &mut impl Rng,
) -> Result<Vec<u64>, RlncError> {
    check_field(instance, q)?;
    Ok(beta.iter().map(|&b| if b { rng.gen_range(0..q) } else { 0 }).collect())
}

/// Coefficient one on every pair consecutive along some routed flow path,
/// zero elsewhere.
pub fn identity_coefficients(instance: &NetworkInstance, solution: &MixingSolution) -> Vec<u64> {
    instance
        .pairs()
        .iter()
        .map(|&(k, j)| {
            let shared = solution.f.iter().any(|row| !row[k].intersection(row[j]).is_empty());
            u64::from(shared)
        })
        .collect()
}

/// Global coding vectors: `e_p` on source edges, `Σ α_kij c_ki` elsewhere.
pub fn propagate_code(instance: &NetworkInstance, alpha: &[u64], q: u64) -> Vec<Vec<u64>> {
    let flows = instance.flow_count();
    let mut c = vec![vec![0; flows]; instance.edges().len()];
    for &e in instance.edge_order() {
        let tail = instance.edge(e).tail;
        if let Some(p) = instance.source_flow(tail) {
            c[e][p - 1] = 1;
            continue;
        }
        let mut acc = vec![0; flows];
        for &(pair, k) in instance.pairs_into(e) {
            if alpha[pair] != 0 {
                for (a, &v) in acc.iter_mut().zip(&c[k]) {
                    *a = (*a + mul(alpha[pair], v, q)) % q;
                }
            }
        }
        c[e] = acc;
    }
    c
}

/// Last edge of each demanded flow's path into each terminal, ordered by
/// ascending flow id.
pub fn terminal_rows(
    instance: &NetworkInstance,
    demands: &Demands,
    f: &[Vec<FlowSet>],
) -> Result<Vec<Vec<EdgeId>>, RlncError> {
    instance
        .terminals()
        .iter()
        .enumerate()
        .map(|(t, term)| {
            demands
                .of(t)
                .iter()
                .map(|p| {
                    instance
                        .in_edges(term.node)
                        .iter()
                        .copied()
                        .find(|&e| f[t][e].contains(p))
                        .ok_or(RlncError::MissingRoute { terminal: term.node, flow: p })
                })
                .collect()
        })
        .collect()
}

/// `A_t` per terminal: one row per demanded flow's last edge, columns the
/// demanded flows in ascending order.
pub fn terminal_matrices(
    instance: &NetworkInstance,
    demands: &Demands,
    f: &[Vec<FlowSet>],
    c: &[Vec<u64>],
) -> Result<Vec<Vec<Vec<u64>>>, RlncError> {
    let rows = terminal_rows(instance, demands, f)?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(t, edges)| {
            edges
                .iter()
                .map(|&e| demands.of(t).iter().map(|p| c[e][p - 1]).collect())
                .collect()
        })
        .collect())
}

/// Every `A_t` is nonsingular and no used terminal in-edge has a nonzero
/// coefficient on a flow its terminal does not demand.
pub fn verify_decodable(
    instance: &NetworkInstance,
    demands: &Demands,
    c: &[Vec<u64>],
    f: &[Vec<FlowSet>],
    q: u64,
) -> bool {
    let Ok(matrices) = terminal_matrices(instance, demands, f, c) else {
        return false;
    };
    let full_rank = matrices.iter().all(|a| rank_mod(a, q) == a.len());
    let clean = instance.terminals().iter().enumerate().all(|(t, term)| {
        let extraneous = instance.all_flows().difference(demands.of(t));
        instance
            .in_edges(term.node)
            .iter()
            .filter(|&&e| !f[t][e].is_empty())
            .all(|&e| extraneous.iter().all(|p| c[e][p - 1] == 0))
    });
    full_rank && clean
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    pub q: u64,
    /// Local coefficient per adjacent edge pair.
    pub alpha: Vec<u64>,
    /// Global coding vector per edge.
    pub c: Vec<Vec<u64>>,
    /// Decoding matrix per terminal.
    pub matrices: Vec<Vec<Vec<u64>>>,
    /// Row edges of each decoding matrix.
    pub rows: Vec<Vec<EdgeId>>,
    pub demands: Demands,
    /// Tries used by [`sample_code`].
    pub tries: usize,
}

/// Assembles a code from given coefficients, checking decodability.
pub fn build_code(
    instance: &NetworkInstance,
    demands: &Demands,
    solution: &MixingSolution,
    alpha: Vec<u64>,
    q: u64,
) -> Result<Option<LinearCode>, RlncError> {
    check_field(instance, q)?;
    let c = propagate_code(instance, &alpha, q);
    if !verify_decodable(instance, demands, &c, &solution.f, q) {
        return Ok(None);
    }
    let rows = terminal_rows(instance, demands, &solution.f)?;
    let matrices = terminal_matrices(instance, demands, &solution.f, &c)?;
    Ok(Some(LinearCode { q, alpha, c, matrices, rows, demands: demands.clone(), tries: 1 }))
}

pub const DEFAULT_MAX_TRIES: usize = 32;

/// Draws random codes until one decodes, at most `max_tries` times.
pub fn sample_code(
    instance: &NetworkInstance,
    demands: &Demands,
    solution: &MixingSolution,
    q: u64,
    rng: &mut impl Rng,
    max_tries: usize,
) -> Result<LinearCode, RlncError> {
    for attempt in 1..=max_tries {
        let alpha = assign_coefficients(instance, &solution.beta, q, rng)?;
        if let Some(mut code) = build_code(instance, demands, solution, alpha, q)? {
            code.tries = attempt;
            return Ok(code);
        }
    }
    check_field(instance, q)?;
    Err(RlncError::NoDecodableCode { tries: max_tries })
}

/// Edge symbols by the local recursion `σ_ij = Σ α_kij σ_ki`.
pub fn edge_symbols_local(instance: &NetworkInstance, alpha: &[u64], q: u64, sources: &[u64]) -> Vec<u64> {
    let mut sym = vec![0; instance.edges().len()];
    for &e in instance.edge_order() {
        sym[e] = match instance.source_flow(instance.edge(e).tail) {
            Some(p) => sources[p - 1] % q,
            None => instance
                .pairs_into(e)
                .iter()
                .fold(0, |acc, &(pair, k)| (acc + mul(alpha[pair], sym[k], q)) % q),
        };
    }
    sym
}

/// Edge symbols as `c_ij · σ`.
pub fn edge_symbols_global(c: &[Vec<u64>], q: u64, sources: &[u64]) -> Vec<u64> {
    c.iter()
        .map(|row| row.iter().zip(sources).fold(0, |acc, (&a, &s)| (acc + mul(a, s, q)) % q))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrip {
    pub edge_symbols: Vec<u64>,
    /// Decoded symbols per terminal, demanded flows in ascending order.
    pub decoded: Vec<Vec<u64>>,
}

/// Sends `sources` (one symbol per flow) through the code and decodes at
/// every terminal.
pub fn roundtrip(instance: &NetworkInstance, code: &LinearCode, sources: &[u64]) -> RoundTrip {
    let edge_symbols = edge_symbols_local(instance, &code.alpha, code.q, sources);
    debug_assert_eq!(edge_symbols, edge_symbols_global(&code.c, code.q, sources));
    let decoded = code
        .matrices
        .iter()
        .zip(&code.rows)
        .map(|(a, rows)| {
            let received: Vec<u64> = rows.iter().map(|&e| edge_symbols[e]).collect();
            solve_mod(a, &received, code.q).expect("decodable code has nonsingular matrices")
        })
        .collect();
    RoundTrip { edge_symbols, decoded }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeVectorEntry {
    pub edge: (NodeId, NodeId),
    pub c: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    /// `(k, i, j)`: from edge `(k, i)` into edge `(i, j)`.
    pub pair: (NodeId, NodeId, NodeId),
    pub alpha: u64,
}

/// Code export: enough to replay the round trip externally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDocument {
    pub q: u64,
    pub edges: Vec<EdgeVectorEntry>,
    pub coefficients: Vec<CoefficientEntry>,
}

impl CodeDocument {
    pub fn new(instance: &NetworkInstance, code: &LinearCode) -> Self {
        let ends = |e: EdgeId| (instance.edge(e).tail, instance.edge(e).head);
        CodeDocument {
            q: code.q,
            edges: code.c.iter().enumerate().map(|(e, c)| EdgeVectorEntry { edge: ends(e), c: c.clone() }).collect(),
            coefficients: instance
                .pairs()
                .iter()
                .zip(&code.alpha)
                .map(|(&(k, j), &alpha)| CoefficientEntry {
                    pair: (instance.edge(k).tail, instance.edge(k).head, instance.edge(j).head),
                    alpha,
                })
                .collect(),
        }
    }
}
