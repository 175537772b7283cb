//! Rewrites route-datatype terms into terms over six scalar components:
//! presence flag, prefix, local preference, path length, visited set and
//! communities. Horn engines cope poorly with datatypes, so clause systems
//! are flattened before they are handed over.

use std::collections::BTreeMap;

use super::sexp::Sexp;

/// Accessor names in component order, after the presence flag.
const ACCESSORS: [&str; 5] = ["prefix", "lp", "len", "visited", "comms"];

pub type Components = [Sexp; 6];

/// Flattening context: route-sorted variables in scope and a counter for
/// fresh names.
pub struct Flattener {
    zeros: Components,
    fresh: usize,
}

type Env = BTreeMap<String, Components>;

fn is_tester<'s>(head: &'s Sexp) -> Option<&'s str> {
    match head.as_list() {
        Some([Sexp::Atom(u), Sexp::Atom(is), Sexp::Atom(ctor)]) if u == "_" && is == "is" => {
            Some(ctor)
        }
        _ => None,
    }
}

impl Flattener {
    /// `zeros` gives the component values used for `NoRoute`; its flag
    /// entry is ignored.
    pub fn new(zeros: Components) -> Self {
        Flattener { zeros, fresh: 0 }
    }

    fn no_route(&self) -> Components {
        let mut c = self.zeros.clone();
        c[0] = Sexp::atom("false");
        c
    }

    fn is_route(t: &Sexp, env: &Env) -> bool {
        match t {
            Sexp::Atom(a) => a == "NoRoute" || env.contains_key(a),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(h), ..] if h == "Some" => true,
                [Sexp::Atom(h), _, a, _] if h == "ite" => Self::is_route(a, env),
                [Sexp::Atom(h), binds, body] if h == "let" => {
                    let mut inner = env.clone();
                    for b in binds.as_list().unwrap_or_default() {
                        if let Some([Sexp::Atom(v), t]) = b.as_list() {
                            if Self::is_route(t, env) {
                                inner.insert(v.clone(), std::array::from_fn(|_| Sexp::atom("_")));
                            } else {
                                inner.remove(v);
                            }
                        }
                    }
                    Self::is_route(body, &inner)
                }
                [Sexp::Atom(h), Sexp::Atom(ctor), Sexp::Atom(sort)] if h == "as" => {
                    ctor == "NoRoute" && sort == "Route"
                }
                _ => false,
            },
        }
    }

    /// Flattens a scalar-sorted term in which the route variables in `env`
    /// are free.
    pub fn scalar(&mut self, t: &Sexp, env: &BTreeMap<String, Components>) -> Sexp {
        let Sexp::List(items) = t else {
            return t.clone();
        };
        match items.as_slice() {
            [head, x] if is_tester(head).is_some() && Self::is_route(x, env) => {
                let flag = self.route(x, env)[0].clone();
                match is_tester(head) {
                    Some("Some") => flag,
                    _ => Sexp::app("not", [flag]),
                }
            }
            [Sexp::Atom(acc), x] if ACCESSORS.contains(&acc.as_str()) && Self::is_route(x, env) => {
                let i = ACCESSORS.iter().position(|a| a == acc).expect("accessor") + 1;
                self.route(x, env)[i].clone()
            }
            [Sexp::Atom(h), binds, body] if h == "let" => {
                let (new_binds, inner) = self.bindings(binds, env);
                let body = self.scalar(body, &inner);
                if new_binds.is_empty() {
                    body
                } else {
                    Sexp::app("let", [Sexp::list(new_binds), body])
                }
            }
            [Sexp::Atom(h), binders, body] if h == "forall" || h == "exists" => {
                let mut inner = env.clone();
                for b in binders.as_list().unwrap_or_default() {
                    if let Some([Sexp::Atom(v), _]) = b.as_list() {
                        inner.remove(v);
                    }
                }
                Sexp::app(h, [binders.clone(), self.scalar(body, &inner)])
            }
            _ => Sexp::list(items.iter().map(|i| self.scalar(i, env))),
        }
    }

    /// Processes a parallel `let` binding list: route-sorted bindings become
    /// six fresh scalar bindings each, the rest are flattened in place.
    fn bindings(&mut self, binds: &Sexp, env: &Env) -> (Vec<Sexp>, Env) {
        let mut out = Vec::new();
        let mut inner = env.clone();
        for b in binds.as_list().unwrap_or_default() {
            let Some([Sexp::Atom(v), t]) = b.as_list() else {
                out.push(b.clone());
                continue;
            };
            if Self::is_route(t, env) {
                let comps = self.route(t, env);
                self.fresh += 1;
                let names: Vec<Sexp> = (0..6)
                    .map(|i| Sexp::atom(format!("{v}!{}!{i}", self.fresh)))
                    .collect();
                for (n, c) in names.iter().zip(comps) {
                    out.push(Sexp::list([n.clone(), c]));
                }
                inner.insert(v.clone(), names.try_into().expect("six names"));
            } else {
                out.push(Sexp::list([Sexp::atom(v.as_str()), self.scalar(t, env)]));
                inner.remove(v);
            }
        }
        (out, inner)
    }

    /// Flattens a route-sorted term into its components.
    pub fn route(&mut self, t: &Sexp, env: &Env) -> Components {
        match t {
            Sexp::Atom(a) if a == "NoRoute" => self.no_route(),
            Sexp::Atom(a) => env
                .get(a)
                .cloned()
                .unwrap_or_else(|| panic!("unbound route variable {a}")),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(h), fields @ ..] if h == "Some" && fields.len() == 5 => {
                    let mut c: Vec<Sexp> = vec![Sexp::atom("true")];
                    c.extend(fields.iter().map(|f| self.scalar(f, env)));
                    c.try_into().expect("six components")
                }
                [Sexp::Atom(h), c, a, b] if h == "ite" => {
                    let c = self.scalar(c, env);
                    let (a, b) = (self.route(a, env), self.route(b, env));
                    let mut out = a;
                    for (o, y) in out.iter_mut().zip(b) {
                        if *o != y {
                            *o = Sexp::app("ite", [c.clone(), o.clone(), y]);
                        }
                    }
                    out
                }
                [Sexp::Atom(h), binds, body] if h == "let" => {
                    let (new_binds, inner) = self.bindings(binds, env);
                    let comps = self.route(body, &inner);
                    if new_binds.is_empty() {
                        comps
                    } else {
                        comps.map(|c| Sexp::app("let", [Sexp::list(new_binds.clone()), c]))
                    }
                }
                [Sexp::Atom(h), _, _] if h == "as" => self.no_route(),
                _ => panic!("not a route term: {t}"),
            },
        }
    }
}
