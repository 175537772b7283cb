use std::collections::{BTreeSet, VecDeque};

use serde_json::{json, Value};

use crate::model::{Network, NodeId, ValidationError};

/// A converges-before graph: roots plus directed CB-edges, all drawn from
/// the network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CbGraph {
    pub roots: BTreeSet<NodeId>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

impl CbGraph {
    pub fn new(
        roots: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Self {
        CbGraph {
            roots: roots.into_iter().collect(),
            edges: edges.into_iter().collect(),
        }
    }

    pub fn without_edge(&self, e: (NodeId, NodeId)) -> Self {
        let mut g = self.clone();
        g.edges.remove(&e);
        g
    }

    /// Nodes reachable from some root along CB-edges.
    pub fn reachable(&self, n: usize) -> BTreeSet<NodeId> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adj[u.index()].push(v);
        }
        let mut seen = vec![false; n];
        let mut queue: VecDeque<NodeId> = VecDeque::new();
        for &r in &self.roots {
            if !seen[r.index()] {
                seen[r.index()] = true;
                queue.push_back(r);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u.index()] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..n as u32)
            .map(NodeId)
            .filter(|v| seen[v.index()])
            .collect()
    }

    pub fn to_json(&self, net: &Network) -> Value {
        json!({
            "roots": self.roots.iter().map(|&r| net.name(r)).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|&(u, v)| json!([net.name(u), net.name(v)])).collect::<Vec<_>>(),
        })
    }

    /// Reads `{"roots": [...], "edges": [["u", "v"], ...]}`. Every edge must
    /// be an edge of `net`.
    pub fn from_json(net: &Network, v: &Value) -> Result<Self, Vec<ValidationError>> {
        let mut errors = Vec::new();
        let mut g = CbGraph::default();
        let node = |name: &Value, errors: &mut Vec<ValidationError>| {
            let id = name.as_str().and_then(|s| net.node(s));
            if id.is_none() {
                errors.push(ValidationError::UnknownNode(
                    name.to_string().trim_matches('"').to_string(),
                ));
            }
            id
        };
        match v.get("roots").and_then(Value::as_array) {
            Some(rs) => {
                for r in rs {
                    if let Some(id) = node(r, &mut errors) {
                        g.roots.insert(id);
                    }
                }
            }
            None => errors.push(ValidationError::Malformed {
                locus: "cbgraph.roots".into(),
                message: "missing or not an array".into(),
            }),
        }
        match v.get("edges").and_then(Value::as_array) {
            Some(es) => {
                for e in es {
                    let Some([a, b]) = e.as_array().map(Vec::as_slice) else {
                        errors.push(ValidationError::Malformed {
                            locus: "cbgraph.edges".into(),
                            message: format!("edge {e} is not a pair"),
                        });
                        continue;
                    };
                    if let (Some(u), Some(w)) = (node(a, &mut errors), node(b, &mut errors)) {
                        if net.edge(u, w).is_none() {
                            errors.push(ValidationError::Malformed {
                                locus: "cbgraph.edges".into(),
                                message: format!(
                                    "({},{}) is not a network edge",
                                    net.name(u),
                                    net.name(w)
                                ),
                            });
                        } else {
                            g.edges.insert((u, w));
                        }
                    }
                }
            }
            None => errors.push(ValidationError::Malformed {
                locus: "cbgraph.edges".into(),
                message: "missing or not an array".into(),
            }),
        }
        if errors.is_empty() {
            Ok(g)
        } else {
            Err(errors)
        }
    }
}

/// Multi-source BFS from all roots. Returns whether every node is reached
/// and the set of nodes that are not.
pub fn is_connected(g: &CbGraph, net: &Network) -> (bool, BTreeSet<NodeId>) {
    let reached = g.reachable(net.node_count());
    let unreachable: BTreeSet<NodeId> = net.nodes().filter(|v| !reached.contains(v)).collect();
    (unreachable.is_empty(), unreachable)
}
