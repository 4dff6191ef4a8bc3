//! Minimum-cost linear network mixing for general connections on directed
//! acyclic networks.
//!
//! * [`model`]: networks, flows, terminals and demand sets.
//! * [`mixing`]: mixing-vector propagation and solution verification.
//! * [`paths`]: flow-path enumeration and path-derived solutions.
//! * [`centralized`]: exact solver, demand expansion and brute-force oracle.
//! * [`cfl`]: the communication-free learning engine.
//! * [`path_csp`] and [`edge_csp`]: distributed CSP formulations on top of it.
//! * [`rlnc`]: random linear network codes over prime fields.
//! * [`io`]: JSON documents, builtin topologies and random demands.

pub mod centralized;
pub mod cfl;
pub mod edge_csp;
pub mod io;
pub mod mixing;
pub mod model;
pub mod path_csp;
pub mod paths;
pub mod rlnc;

pub use centralized::{solve_centralized, solve_with_expansion, SolveOptions, SolveOutcome, SolveStatus};
pub use mixing::{MixingSolution, ProblemVariant};
pub use model::{Cost, Demands, Edge, FlowSet, NetworkInstance, Terminal};
