//! The predicate and transfer expression language.

use std::fmt;

use super::route::{Community, NodeId, Route, RouteAttrs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    pub fn apply(self, lhs: u64, rhs: u64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        CmpOp::ALL.into_iter().find(|op| op.symbol() == s)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A predicate over a single route.
///
/// Every atom except [`Predicate::IsNoRoute`] is false on `NoRoute`, so
/// predicates are total and guarded forms like `not isNoRoute and lp = 300`
/// keep their usual meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    True,
    False,
    IsNoRoute,
    Lp(CmpOp, u64),
    PathLen(CmpOp, u64),
    PrefixEq(u32),
    HasComm(Community),
    Visited(NodeId),
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Implies(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn not(p: Predicate) -> Self {
        Predicate::Not(Box::new(p))
    }

    pub fn implies(a: Predicate, b: Predicate) -> Self {
        Predicate::Implies(Box::new(a), Box::new(b))
    }

    /// `not isNoRoute`
    pub fn has_route() -> Self {
        Predicate::not(Predicate::IsNoRoute)
    }

    pub fn eval(&self, r: &Route) -> bool {
        let attrs = r.attrs();
        let atom = |f: &dyn Fn(&RouteAttrs) -> bool| attrs.is_some_and(f);
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::IsNoRoute => r.is_none(),
            Predicate::Lp(op, c) => atom(&|a| op.apply(a.lp, *c)),
            Predicate::PathLen(op, c) => atom(&|a| op.apply(a.path_len, *c)),
            Predicate::PrefixEq(p) => atom(&|a| a.prefix == *p),
            Predicate::HasComm(t) => atom(&|a| a.comms.contains(t)),
            Predicate::Visited(n) => atom(&|a| a.visited.contains(n)),
            Predicate::Not(p) => !p.eval(r),
            Predicate::And(ps) => ps.iter().all(|p| p.eval(r)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(r)),
            Predicate::Implies(a, b) => !a.eval(r) || b.eval(r),
        }
    }

    /// Calls `f` on every atom and connective in pre-order.
    pub fn visit(&self, f: &mut impl FnMut(&Predicate)) {
        f(self);
        match self {
            Predicate::Not(p) => p.visit(f),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.visit(f)),
            Predicate::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    SetLp(u64),
    AddComm(Community),
    RemoveComm(Community),
    SetPrefix(u32),
}

impl Action {
    pub fn apply(&self, a: &mut RouteAttrs) {
        match self {
            Action::SetLp(lp) => a.lp = *lp,
            Action::AddComm(t) => {
                a.comms.insert(*t);
            }
            Action::RemoveComm(t) => {
                a.comms.remove(t);
            }
            Action::SetPrefix(p) => a.prefix = *p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Permit,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub guard: Predicate,
    pub actions: Vec<Action>,
    pub verdict: Verdict,
}

impl Clause {
    pub fn permit(actions: Vec<Action>) -> Self {
        Clause {
            guard: Predicate::True,
            actions,
            verdict: Verdict::Permit,
        }
    }

    pub fn deny_if(guard: Predicate) -> Self {
        Clause {
            guard,
            actions: Vec::new(),
            verdict: Verdict::Deny,
        }
    }
}

/// A first-match route map with an implicit trailing deny.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Transfer {
    pub clauses: Vec<Clause>,
}

impl Transfer {
    pub fn permit_all() -> Self {
        Transfer {
            clauses: vec![Clause::permit(Vec::new())],
        }
    }

    pub fn deny_all() -> Self {
        Transfer::default()
    }

    pub fn new(clauses: Vec<Clause>) -> Self {
        Transfer { clauses }
    }

    /// Applies the route map for a route sent by `sender`. On permit the
    /// path grows by one hop through `sender`.
    pub fn apply(&self, sender: NodeId, r: &Route) -> Route {
        let Route::Valid(attrs) = r else {
            return Route::NoRoute;
        };
        let Some(clause) = self.clauses.iter().find(|c| c.guard.eval(r)) else {
            return Route::NoRoute;
        };
        match clause.verdict {
            Verdict::Deny => Route::NoRoute,
            Verdict::Permit => {
                let mut out = attrs.clone();
                for a in &clause.actions {
                    a.apply(&mut out);
                }
                out.path_len += 1;
                out.visited.insert(sender);
                Route::Valid(out)
            }
        }
    }
}
