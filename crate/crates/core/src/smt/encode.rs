//! SMT-LIB encoding of routes, merge, transfers and predicates.
//!
//! Routes become a datatype with a `NoRoute` constructor and a `Some`
//! record. Sets are fixed-width bitvectors: bit `i` of `visited` is node `i`
//! and bit `j` of `comms` is the `j`-th tag of the sorted community universe.

use std::collections::BTreeSet;

use thiserror::Error;

use super::sexp::Sexp;
use crate::model::{
    Action, CmpOp, Community, EdgeId, Network, NodeId, NodePredicate, Predicate, Route, RouteAttrs,
    Verdict,
};

/// Encoding profile. `Simple` keeps only the low bit of the prefix and at
/// most two communities, which keeps HORN problems small.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Profile {
    #[default]
    Full,
    Simple,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Profile::Full),
            "simple" => Ok(Profile::Simple),
            _ => Err(format!(
                "unknown profile `{s}`, expected `full` or `simple`"
            )),
        }
    }
}

pub const SIMPLE_MAX_COMMUNITIES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{what} universe of size {size} exceeds the limit {limit} of the selected profile")]
    UniverseOverflow {
        what: &'static str,
        size: usize,
        limit: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("cannot read a route from `{0}`")]
    NotARoute(String),
    #[error("bad {field} value `{value}`")]
    BadField { field: &'static str, value: String },
}

/// Builds terms for one network. Cheap to construct and immutable.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    net: &'a Network,
    profile: Profile,
}

/// Sort name of the route datatype.
pub const ROUTE_SORT: &str = "Route";

fn a(s: &str) -> Sexp {
    Sexp::atom(s)
}

fn app<const N: usize>(head: &str, args: [Sexp; N]) -> Sexp {
    Sexp::app(head, args)
}

fn int(n: u64) -> Sexp {
    Sexp::atom(n.to_string())
}

/// A bitvector literal of `width` bits with `bits` set (bit 0 is the least
/// significant).
fn bv_lit(width: usize, bits: impl IntoIterator<Item = usize>) -> Sexp {
    let set: BTreeSet<usize> = bits.into_iter().collect();
    let s: String = (0..width)
        .rev()
        .map(|i| if set.contains(&i) { '1' } else { '0' })
        .collect();
    Sexp::atom(format!("#b{s}"))
}

fn tester(ctor: &str, x: &Sexp) -> Sexp {
    Sexp::list([Sexp::list([a("_"), a("is"), a(ctor)]), x.clone()])
}

fn is_some(x: &Sexp) -> Sexp {
    tester("Some", x)
}

fn is_none(x: &Sexp) -> Sexp {
    tester("NoRoute", x)
}

fn extract_bit(i: usize, x: Sexp) -> Sexp {
    Sexp::list([
        Sexp::list([a("_"), a("extract"), int(i as u64), int(i as u64)]),
        x,
    ])
}

fn and(items: Vec<Sexp>) -> Sexp {
    match items.len() {
        0 => a("true"),
        1 => items.into_iter().next().expect("len 1"),
        _ => Sexp::app("and", items),
    }
}

fn or(items: Vec<Sexp>) -> Sexp {
    match items.len() {
        0 => a("false"),
        1 => items.into_iter().next().expect("len 1"),
        _ => Sexp::app("or", items),
    }
}

fn cmp(op: CmpOp, lhs: Sexp, rhs: Sexp) -> Sexp {
    match op {
        CmpOp::Ne => app("not", [app("=", [lhs, rhs])]),
        op => app(op.symbol(), [lhs, rhs]),
    }
}

impl<'a> Encoder<'a> {
    pub fn new(net: &'a Network, profile: Profile) -> Result<Self, EncodeError> {
        if profile == Profile::Simple && net.communities().len() > SIMPLE_MAX_COMMUNITIES {
            return Err(EncodeError::UniverseOverflow {
                what: "community",
                size: net.communities().len(),
                limit: SIMPLE_MAX_COMMUNITIES,
            });
        }
        Ok(Encoder { net, profile })
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn prefix_width(&self) -> usize {
        match self.profile {
            Profile::Full => 32,
            Profile::Simple => 1,
        }
    }

    pub fn visited_width(&self) -> usize {
        self.net.node_count().max(1)
    }

    pub fn comms_width(&self) -> usize {
        self.net.communities().len().max(1)
    }

    fn prefix_lit(&self, p: u32) -> Sexp {
        match self.profile {
            Profile::Full => a(&format!("#x{p:08x}")),
            Profile::Simple => bv_lit(1, (p & 1 == 1).then_some(0)),
        }
    }

    fn comm_bit(&self, t: &Community) -> Option<usize> {
        self.net.communities().binary_search(t).ok()
    }

    /// The `declare-datatypes` command for the route sort.
    pub fn sort_declaration(&self) -> String {
        format!(
            "(declare-datatypes (({ROUTE_SORT} 0)) (((NoRoute) (Some (prefix (_ BitVec {})) (lp Int) (len Int) (visited (_ BitVec {})) (comms (_ BitVec {}))))))",
            self.prefix_width(),
            self.visited_width(),
            self.comms_width()
        )
    }

    /// Sorts of the flattened route: presence flag then the five fields.
    pub fn field_sorts(&self) -> [String; 6] {
        let bv = |w: usize| format!("(_ BitVec {w})");
        [
            "Bool".to_string(),
            bv(self.prefix_width()),
            "Int".to_string(),
            "Int".to_string(),
            bv(self.visited_width()),
            bv(self.comms_width()),
        ]
    }

    /// Flattens a route term. Fields of `NoRoute` read as zero so that each
    /// route has exactly one flattened form.
    pub fn fields(&self, x: &Sexp) -> [Sexp; 6] {
        let [_, prefix, lp, len, visited, comms] = self.no_route_fields();
        let field = |name: &str, zero: Sexp| app("ite", [is_some(x), app(name, [x.clone()]), zero]);
        [
            is_some(x),
            field("prefix", prefix),
            field("lp", lp),
            field("len", len),
            field("visited", visited),
            field("comms", comms),
        ]
    }

    /// The flattened form of `NoRoute`.
    pub fn no_route_fields(&self) -> [Sexp; 6] {
        [
            a("false"),
            bv_lit(self.prefix_width(), []),
            int(0),
            int(0),
            bv_lit(self.visited_width(), []),
            bv_lit(self.comms_width(), []),
        ]
    }

    /// Rebuilds a route term from a presence flag and five field terms.
    pub fn from_fields(&self, f: &[Sexp; 6]) -> Sexp {
        app(
            "ite",
            [
                f[0].clone(),
                Sexp::app("Some", f[1..].iter().cloned()),
                a("NoRoute"),
            ],
        )
    }

    /// A ground term for a concrete route.
    pub fn route(&self, r: &Route) -> Sexp {
        match r {
            Route::NoRoute => a("NoRoute"),
            Route::Valid(attrs) => Sexp::app(
                "Some",
                [
                    self.prefix_lit(attrs.prefix),
                    int(attrs.lp),
                    int(attrs.path_len),
                    bv_lit(
                        self.visited_width(),
                        attrs.visited.iter().map(|n| n.index()),
                    ),
                    bv_lit(
                        self.comms_width(),
                        attrs.comms.iter().filter_map(|t| self.comm_bit(t)),
                    ),
                ],
            ),
        }
    }

    /// `x` is `NoRoute` or has non-negative integer fields.
    pub fn well_formed(&self, x: &Sexp) -> Sexp {
        app(
            "or",
            [
                is_none(x),
                app(
                    "and",
                    [
                        app(">=", [app("lp", [x.clone()]), int(0)]),
                        app(">=", [app("len", [x.clone()]), int(0)]),
                    ],
                ),
            ],
        )
    }

    /// `a` is preferred to or equal to `b`; both must be `Some`.
    fn prefers(x: &Sexp, y: &Sexp) -> Sexp {
        let f = |name: &str, t: &Sexp| app(name, [t.clone()]);
        let lex = |lt: Sexp, eq: Sexp, rest: Sexp| app("or", [lt, app("and", [eq, rest])]);
        let prefix = app("bvule", [f("prefix", x), f("prefix", y)]);
        let comms = lex(
            app("bvult", [f("comms", x), f("comms", y)]),
            app("=", [f("comms", x), f("comms", y)]),
            prefix,
        );
        let visited = lex(
            app("bvult", [f("visited", x), f("visited", y)]),
            app("=", [f("visited", x), f("visited", y)]),
            comms,
        );
        let len = lex(
            app("<", [f("len", x), f("len", y)]),
            app("=", [f("len", x), f("len", y)]),
            visited,
        );
        lex(
            app(">", [f("lp", x), f("lp", y)]),
            app("=", [f("lp", x), f("lp", y)]),
            len,
        )
    }

    /// The merge of two route terms.
    pub fn merge(&self, x: Sexp, y: Sexp) -> Sexp {
        let (ma, mb) = (a("m!a"), a("m!b"));
        let body = app(
            "ite",
            [
                is_none(&ma),
                mb.clone(),
                app(
                    "ite",
                    [
                        is_none(&mb),
                        ma.clone(),
                        app("ite", [Self::prefers(&ma, &mb), ma.clone(), mb.clone()]),
                    ],
                ),
            ],
        );
        app(
            "let",
            [Sexp::list([Sexp::list([ma, x]), Sexp::list([mb, y])]), body],
        )
    }

    /// The transfer of edge `e` applied to route term `x`.
    pub fn transfer(&self, e: EdgeId, x: Sexp) -> Sexp {
        let (sender, _) = self.net.endpoints(e);
        let s = a("t!s");
        let mut chain = a("NoRoute");
        for clause in self.net.transfer(e).clauses.iter().rev() {
            let result = match clause.verdict {
                Verdict::Deny => a("NoRoute"),
                Verdict::Permit => self.permit(&s, sender, &clause.actions),
            };
            chain = app("ite", [self.predicate(&clause.guard, &s), result, chain]);
        }
        let body = app("ite", [is_none(&s), a("NoRoute"), chain]);
        app("let", [Sexp::list([Sexp::list([s, x])]), body])
    }

    fn permit(&self, s: &Sexp, sender: NodeId, actions: &[Action]) -> Sexp {
        let mut prefix = app("prefix", [s.clone()]);
        let mut lp = app("lp", [s.clone()]);
        let mut comms = app("comms", [s.clone()]);
        let w = self.comms_width();
        for act in actions {
            match act {
                Action::SetLp(n) => lp = int(*n),
                Action::SetPrefix(p) => prefix = self.prefix_lit(*p),
                Action::AddComm(t) => {
                    if let Some(i) = self.comm_bit(t) {
                        comms = app("bvor", [comms, bv_lit(w, [i])]);
                    }
                }
                Action::RemoveComm(t) => {
                    if let Some(i) = self.comm_bit(t) {
                        comms = app("bvand", [comms, bv_lit(w, (0..w).filter(|&j| j != i))]);
                    }
                }
            }
        }
        Sexp::app(
            "Some",
            [
                prefix,
                lp,
                app("+", [app("len", [s.clone()]), int(1)]),
                app(
                    "bvor",
                    [
                        app("visited", [s.clone()]),
                        bv_lit(self.visited_width(), [sender.index()]),
                    ],
                ),
                comms,
            ],
        )
    }

    /// The truth value of `p` on route term `x`.
    pub fn predicate(&self, p: &Predicate, x: &Sexp) -> Sexp {
        let guarded = |atom: Sexp| app("and", [is_some(x), atom]);
        match p {
            Predicate::True => a("true"),
            Predicate::False => a("false"),
            Predicate::IsNoRoute => is_none(x),
            Predicate::Lp(op, n) => guarded(cmp(*op, app("lp", [x.clone()]), int(*n))),
            Predicate::PathLen(op, n) => guarded(cmp(*op, app("len", [x.clone()]), int(*n))),
            Predicate::PrefixEq(v) => {
                guarded(app("=", [app("prefix", [x.clone()]), self.prefix_lit(*v)]))
            }
            Predicate::HasComm(t) => match self.comm_bit(t) {
                Some(i) => guarded(app(
                    "=",
                    [extract_bit(i, app("comms", [x.clone()])), a("#b1")],
                )),
                None => a("false"),
            },
            Predicate::Visited(n) => guarded(app(
                "=",
                [
                    extract_bit(n.index(), app("visited", [x.clone()])),
                    a("#b1"),
                ],
            )),
            Predicate::Not(q) => app("not", [self.predicate(q, x)]),
            Predicate::And(qs) => and(qs.iter().map(|q| self.predicate(q, x)).collect()),
            Predicate::Or(qs) => or(qs.iter().map(|q| self.predicate(q, x)).collect()),
            Predicate::Implies(l, r) => app("=>", [self.predicate(l, x), self.predicate(r, x)]),
        }
    }

    pub fn node_predicate(&self, p: &NodePredicate, x: &Sexp) -> Sexp {
        match p {
            NodePredicate::Expr(p) => self.predicate(p, x),
            NodePredicate::Smt(s) => app(
                "let",
                [
                    Sexp::list([Sexp::list([a(&s.param), x.clone()])]),
                    s.body.clone(),
                ],
            ),
        }
    }

    /// Reads a route back from a solver value.
    pub fn decode(&self, v: &Sexp) -> Result<Route, DecodeError> {
        let not_route = || DecodeError::NotARoute(v.to_string());
        match v {
            Sexp::Atom(s) if s == "NoRoute" => Ok(Route::NoRoute),
            Sexp::List(items) => match items.as_slice() {
                // `(as NoRoute Route)`
                [Sexp::Atom(h), inner, _] if h == "as" => self.decode(inner),
                [Sexp::Atom(h), prefix, lp, len, visited, comms] if h == "Some" => {
                    let prefix = parse_bv(prefix).ok_or_else(|| bad("prefix", prefix))?;
                    let visited = parse_bv(visited).ok_or_else(|| bad("visited", visited))?;
                    let comms_bits = parse_bv(comms).ok_or_else(|| bad("comms", comms))?;
                    let mut attrs = RouteAttrs {
                        prefix: u32::try_from(prefix)
                            .map_err(|_| bad("prefix", &Sexp::atom(prefix.to_string())))?,
                        lp: parse_int(lp).ok_or_else(|| bad("lp", lp))?,
                        path_len: parse_int(len).ok_or_else(|| bad("len", len))?,
                        ..RouteAttrs::originate(0)
                    };
                    for i in 0..self.net.node_count() {
                        if visited >> i & 1 == 1 {
                            attrs.visited.insert(NodeId(i as u32));
                        }
                    }
                    for (i, t) in self.net.communities().iter().enumerate() {
                        if comms_bits >> i & 1 == 1 {
                            attrs.comms.insert(*t);
                        }
                    }
                    Ok(Route::Valid(attrs))
                }
                _ => Err(not_route()),
            },
            _ => Err(not_route()),
        }
    }
}

fn bad(field: &'static str, v: &Sexp) -> DecodeError {
    DecodeError::BadField {
        field,
        value: v.to_string(),
    }
}

/// Parses `#b..`, `#x..` or `(_ bvN w)`. Values wider than 128 bits are
/// rejected.
pub fn parse_bv(v: &Sexp) -> Option<u128> {
    match v {
        Sexp::Atom(s) => {
            if let Some(b) = s.strip_prefix("#b") {
                u128::from_str_radix(b, 2).ok()
            } else if let Some(h) = s.strip_prefix("#x") {
                u128::from_str_radix(h, 16).ok()
            } else {
                None
            }
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(bv), _] if u == "_" => bv.strip_prefix("bv")?.parse().ok(),
            _ => None,
        },
    }
}

fn parse_int(v: &Sexp) -> Option<u64> {
    v.as_atom()?.parse().ok()
}
