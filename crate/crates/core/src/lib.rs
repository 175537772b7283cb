//! Modular verification of eventually-stable control-plane properties.
//!
//! A network is described by its topology, initial routes, per-edge transfer
//! policies and a BGP-style merge. Users attach three per-node predicates:
//! an invariant `I`, a convergence interface `Q` and a property `Y`. The
//! [`verify`] module discharges local verification conditions with an
//! external SMT solver, synthesizes the maximal converges-before graph
//! (CB-graph) and checks that it connects every node. The [`tolerance`]
//! module measures how many CB-edge failures each node survives, and [`chc`]
//! solves the inverse problem: given a CB-graph, find `I` and `Q`.
//!
//! The [`sim`] module executes the asynchronous semantics directly and is
//! used as an oracle for the verifier.

pub mod bench;
pub mod chc;
pub mod model;
pub mod sim;
pub mod smt;
pub mod tolerance;
pub mod vc;
pub mod verify;

pub use model::{
    Community, Document, EdgeId, Interfaces, Network, NodeId, NodePredicate, Predicate, Route,
    RouteAttrs, Transfer,
};
