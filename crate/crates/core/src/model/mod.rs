//! Routes, networks, the predicate and transfer language, and their JSON form.

mod expr;
mod iface;
mod json;
mod network;
mod route;

pub use expr::{Action, Clause, CmpOp, Predicate, Transfer, Verdict};
pub use iface::{validate_interfaces, Interfaces, NodePredicate, SmtPredicate};
pub use json::{
    node_predicate_to_json, predicate_to_json, prefix_to_json, route_from_json, route_to_json,
    validate_network, Document, DocumentError,
};
pub use network::{EdgeId, MergeKind, Network, NetworkBuilder, UnknownEdge, ValidationError};
pub use route::{merge, Community, NoRouteAccess, NodeId, ParseCommunityError, Route, RouteAttrs};
