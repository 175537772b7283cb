//! The five families of local verification conditions.
//!
//! | kind   | locus | formula |
//! |--------|-------|---------|
//! | Init   | v     | `init(v) ∈ I(v)` |
//! | Inv    | (u,v) | `s_u ∈ I(u) ∧ s_v ∈ I(v) ⇒ s_v ⊕ f(s_u) ∈ I(v)` |
//! | Prop   | v     | `s_v ∈ Q(v) ⇒ s_v ∈ Y(v)` |
//! | CBroot | v     | `init(v) ∈ Q(v) ∧ ⋀_(u,v) (s_u ∈ I(u) ∧ s_v ∈ Q(v) ⇒ s_v ⊕ f(s_u) ∈ Q(v))` |
//! | CBedge | (u,v) | `s_u ∈ Q(u) ∧ s_v ∈ I(v) ⇒ s_v ⊕ f(s_u) ∈ Q(v)` |
//!
//! Route variables are universally quantified; the solver checks validity
//! by refuting the negation. Both variables are also required to be well
//! formed (non-negative integer fields).

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::{EdgeId, Interfaces, Network, NodeId, NodePredicate, Route};
use crate::smt::{Encoder, Formula, Sexp};

pub const SU: &str = "s_u";
pub const SV: &str = "s_v";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VcKind {
    Init,
    Inv,
    Prop,
    #[serde(rename = "CBroot")]
    CbRoot,
    #[serde(rename = "CBedge")]
    CbEdge,
}

impl VcKind {
    /// Init, Inv and Prop must all hold for the verifier to succeed.
    pub fn is_essential(self) -> bool {
        matches!(self, VcKind::Init | VcKind::Inv | VcKind::Prop)
    }

    pub fn name(self) -> &'static str {
        match self {
            VcKind::Init => "Init",
            VcKind::Inv => "Inv",
            VcKind::Prop => "Prop",
            VcKind::CbRoot => "CBroot",
            VcKind::CbEdge => "CBedge",
        }
    }
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locus {
    Node(NodeId),
    Edge(EdgeId),
}

impl Locus {
    pub fn render(self, net: &Network) -> String {
        match self {
            Locus::Node(v) => net.name(v).to_string(),
            Locus::Edge(e) => net.edge_label(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vc {
    pub kind: VcKind,
    pub locus: Locus,
    pub formula: Formula,
}

impl Vc {
    pub fn label(&self, net: &Network) -> String {
        format!("{}({})", self.kind, self.locus.render(net))
    }
}

/// Builds VCs for one network and interface set.
#[derive(Debug, Clone, Copy)]
pub struct VcGen<'a> {
    enc: Encoder<'a>,
    ifs: &'a Interfaces,
}

fn var(name: &str) -> Sexp {
    Sexp::atom(name)
}

fn implies(lhs: Vec<Sexp>, rhs: Sexp) -> Sexp {
    Sexp::app("=>", [Sexp::app("and", lhs), rhs])
}

impl<'a> VcGen<'a> {
    pub fn new(enc: Encoder<'a>, ifs: &'a Interfaces) -> Self {
        VcGen { enc, ifs }
    }

    pub fn encoder(&self) -> &Encoder<'a> {
        &self.enc
    }

    fn net(&self) -> &'a Network {
        self.enc.network()
    }

    fn pred(&self, p: &NodePredicate, x: &Sexp) -> Sexp {
        self.enc.node_predicate(p, x)
    }

    /// `s_v ⊕ f_e(s_u)`
    pub fn step(&self, e: EdgeId) -> Sexp {
        self.enc.merge(var(SV), self.enc.transfer(e, var(SU)))
    }

    fn two_vars() -> Vec<String> {
        vec![SU.to_string(), SV.to_string()]
    }

    pub fn init(&self, v: NodeId) -> Vc {
        let init = self.enc.route(self.net().init(v));
        Vc {
            kind: VcKind::Init,
            locus: Locus::Node(v),
            formula: Formula {
                vars: Vec::new(),
                term: self.pred(&self.ifs.i[v.index()], &init),
            },
        }
    }

    pub fn inv(&self, e: EdgeId) -> Vc {
        let (u, v) = self.net().endpoints(e);
        let (su, sv) = (var(SU), var(SV));
        let term = implies(
            vec![
                self.enc.well_formed(&su),
                self.enc.well_formed(&sv),
                self.pred(&self.ifs.i[u.index()], &su),
                self.pred(&self.ifs.i[v.index()], &sv),
            ],
            self.pred(&self.ifs.i[v.index()], &self.step(e)),
        );
        Vc {
            kind: VcKind::Inv,
            locus: Locus::Edge(e),
            formula: Formula {
                vars: Self::two_vars(),
                term,
            },
        }
    }

    pub fn prop(&self, v: NodeId) -> Vc {
        let sv = var(SV);
        let term = implies(
            vec![
                self.enc.well_formed(&sv),
                self.pred(&self.ifs.q[v.index()], &sv),
            ],
            self.pred(&self.ifs.y[v.index()], &sv),
        );
        Vc {
            kind: VcKind::Prop,
            locus: Locus::Node(v),
            formula: Formula {
                vars: vec![SV.to_string()],
                term,
            },
        }
    }

    /// One conjunct of CBroot for an incoming edge.
    fn cbroot_edge(&self, e: EdgeId) -> Sexp {
        let (u, v) = self.net().endpoints(e);
        let (su, sv) = (var(SU), var(SV));
        implies(
            vec![
                self.enc.well_formed(&su),
                self.enc.well_formed(&sv),
                self.pred(&self.ifs.i[u.index()], &su),
                self.pred(&self.ifs.q[v.index()], &sv),
            ],
            self.pred(&self.ifs.q[v.index()], &self.step(e)),
        )
    }

    /// CBroot as a single conjunction. The quantifier distributes over the
    /// conjuncts, so all of them share `s_u` and `s_v`.
    pub fn cbroot(&self, v: NodeId) -> Vc {
        let init = self.enc.route(self.net().init(v));
        let mut conj = vec![self.pred(&self.ifs.q[v.index()], &init)];
        conj.extend(self.net().incoming(v).iter().map(|&e| self.cbroot_edge(e)));
        let vars = if self.net().incoming(v).is_empty() {
            Vec::new()
        } else {
            Self::two_vars()
        };
        Vc {
            kind: VcKind::CbRoot,
            locus: Locus::Node(v),
            formula: Formula {
                vars,
                term: Sexp::app("and", conj),
            },
        }
    }

    pub fn cbedge(&self, e: EdgeId) -> Vc {
        let (u, v) = self.net().endpoints(e);
        let (su, sv) = (var(SU), var(SV));
        let term = implies(
            vec![
                self.enc.well_formed(&su),
                self.enc.well_formed(&sv),
                self.pred(&self.ifs.q[u.index()], &su),
                self.pred(&self.ifs.i[v.index()], &sv),
            ],
            self.pred(&self.ifs.q[v.index()], &self.step(e)),
        );
        Vc {
            kind: VcKind::CbEdge,
            locus: Locus::Edge(e),
            formula: Formula {
                vars: Self::two_vars(),
                term,
            },
        }
    }

    /// Init, Prop per node and Inv per edge, in node then edge order.
    pub fn essential(&self) -> Vec<Vc> {
        let net = self.net();
        let mut out: Vec<Vc> = net
            .nodes()
            .flat_map(|v| [self.init(v), self.prop(v)])
            .collect();
        out.extend(net.edges().map(|(e, _, _)| self.inv(e)));
        out
    }

    /// CBroot per node and CBedge per edge.
    pub fn cb(&self) -> Vec<Vc> {
        let net = self.net();
        let mut out: Vec<Vc> = net.nodes().map(|v| self.cbroot(v)).collect();
        out.extend(net.edges().map(|(e, _, _)| self.cbedge(e)));
        out
    }
}

/// Concrete evaluation of a VC body under a model. `None` when some
/// predicate involved is a raw SMT term.
pub fn replay(
    net: &Network,
    ifs: &Interfaces,
    vc: &Vc,
    model: &BTreeMap<String, Route>,
) -> Option<bool> {
    let su = model.get(SU).cloned().unwrap_or(Route::NoRoute);
    let sv = model.get(SV).cloned().unwrap_or(Route::NoRoute);
    let step = |e: EdgeId| net.merge(&sv, &net.apply_transfer(e, &su));
    let imp = |lhs: &[Option<bool>], rhs: Option<bool>| -> Option<bool> {
        let mut all = true;
        for l in lhs {
            all &= (*l)?;
        }
        Some(!all || rhs?)
    };
    match (vc.kind, vc.locus) {
        (VcKind::Init, Locus::Node(v)) => ifs.i[v.index()].eval(net.init(v)),
        (VcKind::Prop, Locus::Node(v)) => {
            imp(&[ifs.q[v.index()].eval(&sv)], ifs.y[v.index()].eval(&sv))
        }
        (VcKind::Inv, Locus::Edge(e)) => {
            let (u, v) = net.endpoints(e);
            imp(
                &[ifs.i[u.index()].eval(&su), ifs.i[v.index()].eval(&sv)],
                ifs.i[v.index()].eval(&step(e)),
            )
        }
        (VcKind::CbEdge, Locus::Edge(e)) => {
            let (u, v) = net.endpoints(e);
            imp(
                &[ifs.q[u.index()].eval(&su), ifs.i[v.index()].eval(&sv)],
                ifs.q[v.index()].eval(&step(e)),
            )
        }
        (VcKind::CbRoot, Locus::Node(v)) => {
            let mut ok = ifs.q[v.index()].eval(net.init(v))?;
            for &e in net.incoming(v) {
                let (u, _) = net.endpoints(e);
                ok &= imp(
                    &[ifs.i[u.index()].eval(&su), ifs.q[v.index()].eval(&sv)],
                    ifs.q[v.index()].eval(&step(e)),
                )?;
            }
            Some(ok)
        }
        _ => None,
    }
}
