use super::expr::Predicate;
use super::network::{predicate_comms, Network, ValidationError};
use super::route::Route;
use crate::smt::sexp::Sexp;

/// A predicate given directly as an SMT-LIB term over one route-sorted
/// parameter. Solved CHC interpretations come back in this form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtPredicate {
    pub param: String,
    pub body: Sexp,
}

/// A per-node predicate: either an expression of the predicate language or
/// a raw SMT term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodePredicate {
    Expr(Predicate),
    Smt(SmtPredicate),
}

impl NodePredicate {
    /// Concrete evaluation. Raw SMT terms cannot be evaluated without a
    /// solver and yield `None`.
    pub fn eval(&self, r: &Route) -> Option<bool> {
        match self {
            NodePredicate::Expr(p) => Some(p.eval(r)),
            NodePredicate::Smt(_) => None,
        }
    }

    pub fn as_expr(&self) -> Option<&Predicate> {
        match self {
            NodePredicate::Expr(p) => Some(p),
            NodePredicate::Smt(_) => None,
        }
    }
}

impl From<Predicate> for NodePredicate {
    fn from(p: Predicate) -> Self {
        NodePredicate::Expr(p)
    }
}

/// The three per-node predicate maps, indexed by [`NodeId`](super::NodeId).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interfaces {
    pub i: Vec<NodePredicate>,
    pub q: Vec<NodePredicate>,
    pub y: Vec<NodePredicate>,
}

impl Interfaces {
    /// Builds interfaces from a function of the node.
    pub fn from_fn(
        net: &Network,
        mut f: impl FnMut(super::NodeId) -> (Predicate, Predicate, Predicate),
    ) -> Self {
        let mut out = Interfaces {
            i: Vec::new(),
            q: Vec::new(),
            y: Vec::new(),
        };
        for v in net.nodes() {
            let (i, q, y) = f(v);
            out.i.push(i.into());
            out.q.push(q.into());
            out.y.push(y.into());
        }
        out
    }

    /// The same predicate everywhere.
    pub fn uniform(net: &Network, i: Predicate, q: Predicate, y: Predicate) -> Self {
        Self::from_fn(net, |_| (i.clone(), q.clone(), y.clone()))
    }
}

/// Checks that interfaces fit the network: one predicate per node in each
/// map, node literals declared, community literals in the universe.
pub fn validate_interfaces(net: &Network, ifs: &Interfaces) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    for (kind, preds) in [("I", &ifs.i), ("Q", &ifs.q), ("Y", &ifs.y)] {
        for v in preds.len()..net.node_count() {
            errors.push(ValidationError::MissingInterface {
                kind,
                node: net.name(super::NodeId(v as u32)).to_string(),
            });
        }
        for (v, p) in preds.iter().enumerate() {
            let locus = match net.node_names().get(v) {
                Some(n) => format!("{kind}({n})"),
                None => {
                    errors.push(ValidationError::Malformed {
                        locus: format!("{kind}[{v}]"),
                        message: "more predicates than nodes".into(),
                    });
                    continue;
                }
            };
            let NodePredicate::Expr(p) = p else { continue };
            p.visit(&mut |q| {
                if let Predicate::Visited(n) = q {
                    if n.index() >= net.node_count() {
                        errors.push(ValidationError::UnknownNode(format!("#{}", n.0)));
                    }
                }
            });
            for tag in predicate_comms(p) {
                if net.communities().binary_search(&tag).is_err() {
                    errors.push(ValidationError::UndeclaredCommunity {
                        locus: locus.clone(),
                        tag,
                    });
                }
            }
        }
    }
    errors
}
