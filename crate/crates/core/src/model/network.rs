use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use super::expr::{Action, Predicate, Transfer};
use super::route::{merge, Community, NodeId, Route};

/// Index of an edge in [`Network::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How routes are compared at a node. Only BGP-style selection exists today.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MergeKind {
    #[default]
    BgpLpThenLen,
}

/// A problem found while checking a network document. Each variant names
/// the node or edge it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge ({0},{1}) declared twice")]
    DuplicateEdge(String, String),
    #[error("node `{0}` has no initial route")]
    MissingInit(String),
    #[error("edge ({0},{1}) has no transfer")]
    MissingTransfer(String, String),
    #[error("transfer given for `{0}`, which is not a declared edge")]
    TransferWithoutEdge(String),
    #[error("interface {kind} missing for node `{node}`")]
    MissingInterface { kind: &'static str, node: String },
    #[error("community {tag} used at {locus} is not in the declared universe")]
    UndeclaredCommunity { locus: String, tag: Community },
    #[error("{locus}: {message}")]
    Malformed { locus: String, message: String },
}

/// A network instance: a simple directed graph, initial routes, one
/// transfer per edge and the merge.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    incoming: Vec<Vec<EdgeId>>,
    init: Vec<Route>,
    transfer: Vec<Transfer>,
    communities: Vec<Community>,
    merge_kind: MergeKind,
}

impl Network {
    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn name(&self, n: NodeId) -> &str {
        &self.nodes[n.index()]
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (EdgeId, NodeId, NodeId)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| (EdgeId(i as u32), u, v))
    }

    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e.index()]
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.edge_index.get(&(u, v)).copied()
    }

    pub fn incoming(&self, v: NodeId) -> &[EdgeId] {
        &self.incoming[v.index()]
    }

    pub fn init(&self, v: NodeId) -> &Route {
        &self.init[v.index()]
    }

    pub fn transfer(&self, e: EdgeId) -> &Transfer {
        &self.transfer[e.index()]
    }

    /// Declared community universe, sorted. Bit `i` of the SMT community
    /// mask stands for `communities()[i]`.
    pub fn communities(&self) -> &[Community] {
        &self.communities
    }

    pub fn merge_kind(&self) -> MergeKind {
        self.merge_kind
    }

    pub fn edge_label(&self, e: EdgeId) -> String {
        let (u, v) = self.endpoints(e);
        format!("{}->{}", self.name(u), self.name(v))
    }

    pub fn merge(&self, a: &Route, b: &Route) -> Route {
        match self.merge_kind {
            MergeKind::BgpLpThenLen => merge(a, b),
        }
    }

    pub fn apply_transfer(&self, e: EdgeId, r: &Route) -> Route {
        let (u, _) = self.endpoints(e);
        self.transfer(e).apply(u, r)
    }

    /// Like [`Network::apply_transfer`] but addressed by endpoints.
    pub fn apply_transfer_on(&self, u: NodeId, v: NodeId, r: &Route) -> Result<Route, UnknownEdge> {
        let e = self.edge(u, v).ok_or(UnknownEdge(u, v))?;
        Ok(self.apply_transfer(e, r))
    }

    /// Replaces the transfer of edge `e`; used to build policy mutants.
    pub fn with_transfer(&self, e: EdgeId, t: Transfer) -> Result<Network, Vec<ValidationError>> {
        let mut b = NetworkBuilder::from_network(self);
        b.transfer[e.index()] = Some(t);
        b.build()
    }

    /// Replaces the initial route of `v`.
    pub fn with_init(&self, v: NodeId, r: Route) -> Result<Network, Vec<ValidationError>> {
        let mut b = NetworkBuilder::from_network(self);
        b.init[v.index()] = Some(r);
        b.build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("edge ({0:?},{1:?}) is not in the network")]
pub struct UnknownEdge(pub NodeId, pub NodeId);

/// Incremental construction of a [`Network`]. Nodes are fixed up front so
/// routes and predicates can refer to them by [`NodeId`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    nodes: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    init: Vec<Option<Route>>,
    transfer: Vec<Option<Transfer>>,
    communities: Option<BTreeSet<Community>>,
    extra_communities: BTreeSet<Community>,
    errors: Vec<ValidationError>,
}

impl NetworkBuilder {
    pub fn new<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Self {
        let mut b = NetworkBuilder {
            nodes: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
            edge_index: HashMap::new(),
            init: Vec::new(),
            transfer: Vec::new(),
            communities: None,
            extra_communities: BTreeSet::new(),
            errors: Vec::new(),
        };
        for n in nodes {
            let n = n.into();
            if b.index.contains_key(&n) {
                b.errors.push(ValidationError::DuplicateNode(n));
                continue;
            }
            b.index.insert(n.clone(), NodeId(b.nodes.len() as u32));
            b.nodes.push(n);
            b.init.push(None);
        }
        b
    }

    fn from_network(net: &Network) -> Self {
        NetworkBuilder {
            nodes: net.nodes.clone(),
            index: net.index.clone(),
            edges: net.edges.clone(),
            edge_index: net.edge_index.clone(),
            init: net.init.iter().cloned().map(Some).collect(),
            transfer: net.transfer.iter().cloned().map(Some).collect(),
            communities: None,
            extra_communities: net.communities.iter().copied().collect(),
            errors: Vec::new(),
        }
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node_names_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    /// Looks up a node, recording `UnknownNode` if it is missing.
    pub fn resolve(&mut self, name: &str) -> Option<NodeId> {
        let id = self.node(name);
        if id.is_none() {
            self.errors
                .push(ValidationError::UnknownNode(name.to_string()));
        }
        id
    }

    pub fn add_edge(&mut self, u: &str, v: &str) -> Option<EdgeId> {
        let (u_id, v_id) = (self.resolve(u), self.resolve(v));
        let (u_id, v_id) = (u_id?, v_id?);
        if u_id == v_id {
            self.errors.push(ValidationError::SelfLoop(u.to_string()));
            return None;
        }
        if self.edge_index.contains_key(&(u_id, v_id)) {
            self.errors
                .push(ValidationError::DuplicateEdge(u.to_string(), v.to_string()));
            return None;
        }
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push((u_id, v_id));
        self.edge_index.insert((u_id, v_id), id);
        self.transfer.push(None);
        Some(id)
    }

    /// Adds `u->v` and `v->u` with the same transfer.
    pub fn add_link(&mut self, u: &str, v: &str, t: Transfer) {
        self.add_edge_with(u, v, t.clone());
        self.add_edge_with(v, u, t);
    }

    pub fn add_edge_with(&mut self, u: &str, v: &str, t: Transfer) {
        if let Some(e) = self.add_edge(u, v) {
            self.transfer[e.index()] = Some(t);
        }
    }

    pub fn edge(&self, u: &str, v: &str) -> Option<EdgeId> {
        self.edge_index
            .get(&(self.node(u)?, self.node(v)?))
            .copied()
    }

    pub fn set_transfer(&mut self, u: &str, v: &str, t: Transfer) {
        match self.edge(u, v) {
            Some(e) => self.transfer[e.index()] = Some(t),
            None => self
                .errors
                .push(ValidationError::TransferWithoutEdge(format!("{u}->{v}"))),
        }
    }

    pub fn set_init(&mut self, v: &str, r: Route) {
        if let Some(id) = self.resolve(v) {
            self.init[id.index()] = Some(r);
        }
    }

    /// Every node without an explicit initial route starts with `NoRoute`.
    pub fn default_init_no_route(&mut self) {
        for slot in &mut self.init {
            slot.get_or_insert(Route::NoRoute);
        }
    }

    /// Declares the community universe explicitly. Without a declaration the
    /// universe is every tag mentioned by init routes and transfers.
    pub fn declare_communities(&mut self, tags: impl IntoIterator<Item = Community>) {
        self.communities = Some(tags.into_iter().collect());
    }

    /// Adds tags to an inferred universe (ignored once a universe is declared).
    pub fn include_communities(&mut self, tags: impl IntoIterator<Item = Community>) {
        self.extra_communities.extend(tags);
    }

    pub fn push_error(&mut self, e: ValidationError) {
        self.errors.push(e);
    }

    pub fn build(self) -> Result<Network, Vec<ValidationError>> {
        let mut errors = self.errors;
        let name = |n: NodeId| self.nodes[n.index()].clone();

        let mut init = Vec::with_capacity(self.nodes.len());
        for (i, r) in self.init.into_iter().enumerate() {
            match r {
                Some(r) => init.push(r),
                None => {
                    errors.push(ValidationError::MissingInit(self.nodes[i].clone()));
                    init.push(Route::NoRoute);
                }
            }
        }
        let mut transfer = Vec::with_capacity(self.edges.len());
        for (i, t) in self.transfer.into_iter().enumerate() {
            match t {
                Some(t) => transfer.push(t),
                None => {
                    let (u, v) = self.edges[i];
                    errors.push(ValidationError::MissingTransfer(name(u), name(v)));
                    transfer.push(Transfer::deny_all());
                }
            }
        }

        let mut used = Vec::new();
        for (v, r) in init.iter().enumerate() {
            if let Some(a) = r.attrs() {
                used.extend(
                    a.comms
                        .iter()
                        .map(|&t| (format!("init({})", self.nodes[v]), t)),
                );
            }
        }
        for (e, t) in transfer.iter().enumerate() {
            let (u, v) = self.edges[e];
            let locus = format!("transfer {}->{}", name(u), name(v));
            for c in &t.clauses {
                used.extend(
                    predicate_comms(&c.guard)
                        .into_iter()
                        .map(|t| (locus.clone(), t)),
                );
                for a in &c.actions {
                    if let Action::AddComm(t) | Action::RemoveComm(t) = a {
                        used.push((locus.clone(), *t));
                    }
                }
            }
        }
        let communities: BTreeSet<Community> = match self.communities {
            Some(declared) => {
                for (locus, tag) in used {
                    if !declared.contains(&tag) {
                        errors.push(ValidationError::UndeclaredCommunity { locus, tag });
                    }
                }
                declared
            }
            None => used
                .into_iter()
                .map(|(_, t)| t)
                .chain(self.extra_communities)
                .collect(),
        };

        if !errors.is_empty() {
            return Err(errors);
        }
        let mut incoming = vec![Vec::new(); self.nodes.len()];
        for (i, &(_, v)) in self.edges.iter().enumerate() {
            incoming[v.index()].push(EdgeId(i as u32));
        }
        Ok(Network {
            nodes: self.nodes,
            index: self.index,
            edges: self.edges,
            edge_index: self.edge_index,
            incoming,
            init,
            transfer,
            communities: communities.into_iter().collect(),
            merge_kind: MergeKind::BgpLpThenLen,
        })
    }
}

pub(crate) fn predicate_comms(p: &Predicate) -> Vec<Community> {
    let mut out = Vec::new();
    p.visit(&mut |q| {
        if let Predicate::HasComm(t) = q {
            out.push(*t);
        }
    });
    out
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "network with {} nodes and {} edges",
            self.node_count(),
            self.edge_count()
        )
    }
}
