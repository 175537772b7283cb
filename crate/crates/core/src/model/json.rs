//! JSON form of networks, interfaces and routes.
//!
//! A document is one object:
//!
//! ```json
//! {"nodes": ["A", "B"], "edges": [["A", "B"]], "communities": ["1:0"],
//!  "init": {"A": {"prefix": "0x0a000000", "lp": 100, "pathLen": 0}, "B": null},
//!  "transfer": {"A->B": [{"guard": ["true"], "actions": [["setLp", 100]], "verdict": "permit"}]},
//!  "I": {"A": ["true"], "B": ["true"]}, "Q": {...}, "Y": {...}}
//! ```
//!
//! `null` is the no-route value. `communities` is optional; when absent the
//! universe is every tag mentioned anywhere in the document.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::expr::{Action, Clause, CmpOp, Predicate, Transfer, Verdict};
use super::iface::{validate_interfaces, Interfaces, NodePredicate, SmtPredicate};
use super::network::{predicate_comms, Network, NetworkBuilder, ValidationError};
use super::route::{Community, NodeId, Route, RouteAttrs};
use crate::smt::sexp;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}", render(.0))]
    Invalid(Vec<ValidationError>),
}

fn render(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A network together with whichever interface maps the file provides.
#[derive(Debug, Clone)]
pub struct Document {
    pub network: Network,
    pub i: Option<Vec<NodePredicate>>,
    pub q: Option<Vec<NodePredicate>>,
    pub y: Option<Vec<NodePredicate>>,
}

impl Document {
    pub fn new(network: Network, ifs: Option<Interfaces>) -> Self {
        match ifs {
            Some(ifs) => Document {
                network,
                i: Some(ifs.i),
                q: Some(ifs.q),
                y: Some(ifs.y),
            },
            None => Document {
                network,
                i: None,
                q: None,
                y: None,
            },
        }
    }

    pub fn parse(src: &str) -> Result<Self, DocumentError> {
        let v: Value = serde_json::from_str(src)?;
        Self::from_value(&v).map_err(DocumentError::Invalid)
    }

    pub fn from_value(v: &Value) -> Result<Self, Vec<ValidationError>> {
        parse_document(v)
    }

    /// All three maps, or one `MissingInterface` error per absent map.
    pub fn interfaces(&self) -> Result<Interfaces, Vec<ValidationError>> {
        let missing = |kind: &'static str| ValidationError::MissingInterface {
            kind,
            node: "*".to_string(),
        };
        match (&self.i, &self.q, &self.y) {
            (Some(i), Some(q), Some(y)) => Ok(Interfaces {
                i: i.clone(),
                q: q.clone(),
                y: y.clone(),
            }),
            _ => Err([("I", &self.i), ("Q", &self.q), ("Y", &self.y)]
                .into_iter()
                .filter(|(_, m)| m.is_none())
                .map(|(k, _)| missing(k))
                .collect()),
        }
    }

    pub fn to_value(&self) -> Value {
        let net = &self.network;
        let mut doc = Map::new();
        doc.insert("nodes".into(), json!(net.node_names()));
        doc.insert(
            "edges".into(),
            Value::Array(
                net.edges()
                    .map(|(_, u, v)| json!([net.name(u), net.name(v)]))
                    .collect(),
            ),
        );
        doc.insert(
            "communities".into(),
            Value::Array(
                net.communities()
                    .iter()
                    .map(|c| json!(c.to_string()))
                    .collect(),
            ),
        );
        let init: Map<String, Value> = net
            .nodes()
            .map(|v| (net.name(v).to_string(), route_to_json(net, net.init(v))))
            .collect();
        doc.insert("init".into(), Value::Object(init));
        let transfer: Map<String, Value> = net
            .edges()
            .map(|(e, _, _)| (net.edge_label(e), transfer_to_json(net, net.transfer(e))))
            .collect();
        doc.insert("transfer".into(), Value::Object(transfer));
        for (key, map) in [("I", &self.i), ("Q", &self.q), ("Y", &self.y)] {
            if let Some(preds) = map {
                let m: Map<String, Value> = preds
                    .iter()
                    .enumerate()
                    .map(|(v, p)| {
                        (
                            net.name(NodeId(v as u32)).to_string(),
                            node_predicate_to_json(net, p),
                        )
                    })
                    .collect();
                doc.insert(key.into(), Value::Object(m));
            }
        }
        Value::Object(doc)
    }
}

/// Parses and checks a document, returning every problem found. An empty
/// list means the document is well formed.
pub fn validate_network(doc: &Value) -> Vec<ValidationError> {
    match parse_document(doc) {
        Ok(_) => Vec::new(),
        Err(errors) => errors,
    }
}

fn malformed(locus: impl Into<String>, message: impl Into<String>) -> ValidationError {
    ValidationError::Malformed {
        locus: locus.into(),
        message: message.into(),
    }
}

struct Ctx<'a> {
    builder: &'a NetworkBuilder,
    errors: Vec<ValidationError>,
}

impl Ctx<'_> {
    fn node(&mut self, name: &str) -> Option<NodeId> {
        let id = self.builder.node(name);
        if id.is_none() {
            self.errors
                .push(ValidationError::UnknownNode(name.to_string()));
        }
        id
    }
}

fn parse_document(v: &Value) -> Result<Document, Vec<ValidationError>> {
    let Some(obj) = v.as_object() else {
        return Err(vec![malformed("document", "expected a JSON object")]);
    };
    let mut errors = Vec::new();

    let mut names = Vec::new();
    match obj.get("nodes").and_then(Value::as_array) {
        Some(ns) => {
            for n in ns {
                match n.as_str() {
                    Some(s) => names.push(s.to_string()),
                    None => {
                        errors.push(malformed("nodes", format!("node name {n} is not a string")))
                    }
                }
            }
        }
        None => errors.push(malformed("nodes", "missing or not an array")),
    }
    let mut builder = NetworkBuilder::new(names);

    match obj.get("edges").and_then(Value::as_array) {
        Some(es) => {
            for e in es {
                match e.as_array().map(Vec::as_slice) {
                    Some([Value::String(u), Value::String(v)]) => {
                        builder.add_edge(u, v);
                    }
                    _ => errors.push(malformed(
                        "edges",
                        format!("edge {e} is not a pair of names"),
                    )),
                }
            }
        }
        None => errors.push(malformed("edges", "missing or not an array")),
    }

    let declared = match obj.get("communities") {
        None => None,
        Some(Value::Array(tags)) => {
            let mut set = BTreeSet::new();
            for t in tags {
                match t.as_str().map(str::parse::<Community>) {
                    Some(Ok(c)) => {
                        set.insert(c);
                    }
                    _ => errors.push(malformed("communities", format!("bad tag {t}"))),
                }
            }
            Some(set)
        }
        Some(_) => {
            errors.push(malformed("communities", "not an array"));
            None
        }
    };

    let mut ctx = Ctx {
        builder: &builder,
        errors: Vec::new(),
    };

    let mut inits = Vec::new();
    match obj.get("init").and_then(Value::as_object) {
        Some(m) => {
            for (node, r) in m {
                if let Some(r) = parse_route(&mut ctx, &format!("init({node})"), r) {
                    inits.push((node.clone(), r));
                }
            }
        }
        None => ctx
            .errors
            .push(malformed("init", "missing or not an object")),
    }

    let mut transfers = Vec::new();
    match obj.get("transfer").and_then(Value::as_object) {
        Some(m) => {
            for (key, clauses) in m {
                let locus = format!("transfer {key}");
                let Some((u, v)) = key.split_once("->") else {
                    ctx.errors
                        .push(malformed(&locus, "key must have the form `u->v`"));
                    continue;
                };
                if let Some(t) = parse_transfer(&mut ctx, &locus, clauses) {
                    transfers.push((u.trim().to_string(), v.trim().to_string(), t));
                }
            }
        }
        None => ctx
            .errors
            .push(malformed("transfer", "missing or not an object")),
    }

    let node_count = builder.node_names_len();
    let mut maps: [Option<Vec<NodePredicate>>; 3] = [None, None, None];
    for (slot, kind) in maps.iter_mut().zip(["I", "Q", "Y"]) {
        let Some(m) = obj.get(kind) else { continue };
        let Some(m) = m.as_object() else {
            ctx.errors.push(malformed(kind, "not an object"));
            continue;
        };
        let mut preds: Vec<Option<NodePredicate>> = vec![None; node_count];
        for (node, p) in m {
            let locus = format!("{kind}({node})");
            let id = ctx.node(node);
            if let (Some(id), Some(p)) = (id, parse_node_predicate(&mut ctx, &locus, p)) {
                preds[id.index()] = Some(p);
            }
        }
        let mut full = Vec::with_capacity(node_count);
        for (v, p) in preds.into_iter().enumerate() {
            match p {
                Some(p) => full.push(p),
                None => ctx.errors.push(ValidationError::MissingInterface {
                    kind,
                    node: builder.node_name(v).to_string(),
                }),
            }
        }
        *slot = Some(full);
    }
    errors.append(&mut ctx.errors);

    for (node, r) in inits {
        builder.set_init(&node, r);
    }
    for (u, v, t) in transfers {
        if builder.node(&u).is_none()
            || builder.node(&v).is_none()
            || builder.edge(&u, &v).is_none()
        {
            builder.push_error(ValidationError::TransferWithoutEdge(format!("{u}->{v}")));
        } else {
            builder.set_transfer(&u, &v, t);
        }
    }
    match declared {
        Some(set) => builder.declare_communities(set),
        None => {
            // tags referenced only by interfaces still need a bit in the mask
            let mut extra = BTreeSet::new();
            for p in maps.iter().flatten().flatten() {
                if let NodePredicate::Expr(p) = p {
                    extra.extend(predicate_comms(p));
                }
            }
            builder.include_communities(extra);
        }
    }

    let net = match builder.build() {
        Ok(net) => Some(net),
        Err(mut e) => {
            errors.append(&mut e);
            None
        }
    };
    if let (Some(net), true) = (&net, errors.is_empty()) {
        if let [Some(i), Some(q), Some(y)] = &maps {
            let ifs = Interfaces {
                i: i.clone(),
                q: q.clone(),
                y: y.clone(),
            };
            errors.extend(validate_interfaces(net, &ifs));
        }
    }
    match (net, errors.is_empty()) {
        (Some(network), true) => {
            let [i, q, y] = maps;
            Ok(Document { network, i, q, y })
        }
        _ => Err(errors),
    }
}

fn parse_u64(
    locus: &str,
    field: &str,
    v: &Value,
    errors: &mut Vec<ValidationError>,
) -> Option<u64> {
    let out = v.as_u64();
    if out.is_none() {
        errors.push(malformed(
            locus,
            format!("`{field}` must be a non-negative integer, got {v}"),
        ));
    }
    out
}

pub(crate) fn parse_prefix(v: &Value) -> Option<u32> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => {
            let s = s.trim();
            match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => parse_dotted(s).or_else(|| s.parse().ok()),
            }
        }
        _ => None,
    }
}

fn parse_dotted(s: &str) -> Option<u32> {
    let parts: Vec<u8> = s
        .split('.')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .ok()?;
    let [a, b, c, d] = parts.as_slice() else {
        return None;
    };
    Some(u32::from_be_bytes([*a, *b, *c, *d]))
}

fn parse_tag(locus: &str, v: &Value, errors: &mut Vec<ValidationError>) -> Option<Community> {
    match v.as_str().map(str::parse::<Community>) {
        Some(Ok(c)) => Some(c),
        _ => {
            errors.push(malformed(locus, format!("bad community tag {v}")));
            None
        }
    }
}

fn parse_route(ctx: &mut Ctx<'_>, locus: &str, v: &Value) -> Option<Route> {
    if v.is_null() {
        return Some(Route::NoRoute);
    }
    let Some(m) = v.as_object() else {
        ctx.errors
            .push(malformed(locus, "route must be an object or null"));
        return None;
    };
    let mut attrs = RouteAttrs::originate(0);
    let mut ok = true;
    match m.get("prefix").map(parse_prefix) {
        Some(Some(p)) => attrs.prefix = p,
        Some(None) => {
            ctx.errors.push(malformed(locus, "bad prefix"));
            ok = false;
        }
        None => {}
    }
    if let Some(lp) = m.get("lp") {
        match parse_u64(locus, "lp", lp, &mut ctx.errors) {
            Some(lp) => attrs.lp = lp,
            None => ok = false,
        }
    }
    if let Some(len) = m.get("pathLen") {
        match parse_u64(locus, "pathLen", len, &mut ctx.errors) {
            Some(len) => attrs.path_len = len,
            None => ok = false,
        }
    }
    for n in m
        .get("visited")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        match n.as_str().and_then(|s| ctx.node(s)) {
            Some(id) => {
                attrs.visited.insert(id);
            }
            None => ok = false,
        }
    }
    for t in m
        .get("comms")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        match parse_tag(locus, t, &mut ctx.errors) {
            Some(c) => {
                attrs.comms.insert(c);
            }
            None => ok = false,
        }
    }
    for key in m.keys() {
        if !matches!(
            key.as_str(),
            "prefix" | "lp" | "pathLen" | "visited" | "comms"
        ) {
            ctx.errors
                .push(malformed(locus, format!("unknown route field `{key}`")));
            ok = false;
        }
    }
    ok.then_some(Route::Valid(attrs))
}

fn parse_transfer(ctx: &mut Ctx<'_>, locus: &str, v: &Value) -> Option<Transfer> {
    let Some(list) = v.as_array() else {
        ctx.errors
            .push(malformed(locus, "transfer must be an array of clauses"));
        return None;
    };
    let mut clauses = Vec::new();
    for (i, c) in list.iter().enumerate() {
        let locus = format!("{locus} clause {i}");
        let Some(m) = c.as_object() else {
            ctx.errors
                .push(malformed(&locus, "clause must be an object"));
            return None;
        };
        let guard = match m.get("guard") {
            None => Predicate::True,
            Some(g) => parse_predicate(ctx, &locus, g)?,
        };
        let mut actions = Vec::new();
        for a in m
            .get("actions")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            actions.push(parse_action(ctx, &locus, a)?);
        }
        let verdict = match m.get("verdict").and_then(Value::as_str) {
            Some("permit") => Verdict::Permit,
            Some("deny") => Verdict::Deny,
            _ => {
                ctx.errors
                    .push(malformed(&locus, "verdict must be \"permit\" or \"deny\""));
                return None;
            }
        };
        clauses.push(Clause {
            guard,
            actions,
            verdict,
        });
    }
    Some(Transfer::new(clauses))
}

fn parse_action(ctx: &mut Ctx<'_>, locus: &str, v: &Value) -> Option<Action> {
    let items = v.as_array().map(Vec::as_slice).unwrap_or_default();
    let action = match items {
        [Value::String(op), arg] => match op.as_str() {
            "setLp" => arg.as_u64().map(Action::SetLp),
            "addComm" => parse_tag(locus, arg, &mut ctx.errors).map(Action::AddComm),
            "removeComm" => parse_tag(locus, arg, &mut ctx.errors).map(Action::RemoveComm),
            "setPrefix" => parse_prefix(arg).map(Action::SetPrefix),
            _ => None,
        },
        _ => None,
    };
    if action.is_none() {
        ctx.errors.push(malformed(locus, format!("bad action {v}")));
    }
    action
}

fn parse_node_predicate(ctx: &mut Ctx<'_>, locus: &str, v: &Value) -> Option<NodePredicate> {
    if let Some([Value::String(head), Value::String(param), Value::String(body)]) =
        v.as_array().map(Vec::as_slice)
    {
        if head == "smt" {
            return match sexp::parse_one(body) {
                Ok(body) => Some(NodePredicate::Smt(SmtPredicate {
                    param: param.clone(),
                    body,
                })),
                Err(e) => {
                    ctx.errors
                        .push(malformed(locus, format!("bad SMT term: {e}")));
                    None
                }
            };
        }
    }
    parse_predicate(ctx, locus, v).map(NodePredicate::Expr)
}

fn parse_predicate(ctx: &mut Ctx<'_>, locus: &str, v: &Value) -> Option<Predicate> {
    let bad = |ctx: &mut Ctx<'_>| {
        ctx.errors
            .push(malformed(locus, format!("bad predicate {v}")));
        None
    };
    let Some(items) = v.as_array() else {
        return bad(ctx);
    };
    let Some((Value::String(head), args)) = items.split_first() else {
        return bad(ctx);
    };
    let many = |ctx: &mut Ctx<'_>, args: &[Value]| -> Option<Vec<Predicate>> {
        args.iter()
            .map(|a| parse_predicate(ctx, locus, a))
            .collect()
    };
    let cmp = |args: &[Value]| match args {
        [Value::String(op), n] => Some((CmpOp::from_symbol(op)?, n.as_u64()?)),
        _ => None,
    };
    let p = match (head.as_str(), args) {
        ("true", []) => Predicate::True,
        ("false", []) => Predicate::False,
        ("isNoRoute", []) => Predicate::IsNoRoute,
        ("hasRoute", []) => Predicate::has_route(),
        ("lp", args) => match cmp(args) {
            Some((op, n)) => Predicate::Lp(op, n),
            None => return bad(ctx),
        },
        ("len" | "pathLen", args) => match cmp(args) {
            Some((op, n)) => Predicate::PathLen(op, n),
            None => return bad(ctx),
        },
        ("prefix", [p]) => match parse_prefix(p) {
            Some(p) => Predicate::PrefixEq(p),
            None => return bad(ctx),
        },
        ("comm", [t]) => Predicate::HasComm(parse_tag(locus, t, &mut ctx.errors)?),
        ("visited", [Value::String(n)]) => Predicate::Visited(ctx.node(n)?),
        ("not", [p]) => Predicate::not(parse_predicate(ctx, locus, p)?),
        ("implies", [a, b]) => {
            let a = parse_predicate(ctx, locus, a)?;
            Predicate::implies(a, parse_predicate(ctx, locus, b)?)
        }
        ("and", args) => Predicate::And(many(ctx, args)?),
        ("or", args) => Predicate::Or(many(ctx, args)?),
        _ => return bad(ctx),
    };
    Some(p)
}

pub fn prefix_to_json(p: u32) -> Value {
    json!(format!("0x{p:08x}"))
}

pub fn route_to_json(net: &Network, r: &Route) -> Value {
    match r {
        Route::NoRoute => Value::Null,
        Route::Valid(a) => json!({
            "prefix": prefix_to_json(a.prefix),
            "lp": a.lp,
            "pathLen": a.path_len,
            "visited": a.visited.iter().map(|&n| net.name(n)).collect::<Vec<_>>(),
            "comms": a.comms.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        }),
    }
}

/// Parses a route against an existing network.
pub fn route_from_json(net: &Network, v: &Value) -> Result<Route, Vec<ValidationError>> {
    let builder = NetworkBuilder::new(net.node_names().iter().cloned());
    let mut ctx = Ctx {
        builder: &builder,
        errors: Vec::new(),
    };
    let r = parse_route(&mut ctx, "route", v);
    match r {
        Some(r) if ctx.errors.is_empty() => Ok(r),
        _ => Err(ctx.errors),
    }
}

pub fn predicate_to_json(net: &Network, p: &Predicate) -> Value {
    let all = |ps: &[Predicate]| {
        ps.iter()
            .map(|p| predicate_to_json(net, p))
            .collect::<Vec<_>>()
    };
    match p {
        Predicate::True => json!(["true"]),
        Predicate::False => json!(["false"]),
        Predicate::IsNoRoute => json!(["isNoRoute"]),
        Predicate::Lp(op, n) => json!(["lp", op.symbol(), n]),
        Predicate::PathLen(op, n) => json!(["len", op.symbol(), n]),
        Predicate::PrefixEq(x) => json!(["prefix", prefix_to_json(*x)]),
        Predicate::HasComm(t) => json!(["comm", t.to_string()]),
        Predicate::Visited(n) => json!(["visited", net.name(*n)]),
        Predicate::Not(p) => json!(["not", predicate_to_json(net, p)]),
        Predicate::Implies(a, b) => json!([
            "implies",
            predicate_to_json(net, a),
            predicate_to_json(net, b)
        ]),
        Predicate::And(ps) => {
            let mut v = vec![json!("and")];
            v.extend(all(ps));
            Value::Array(v)
        }
        Predicate::Or(ps) => {
            let mut v = vec![json!("or")];
            v.extend(all(ps));
            Value::Array(v)
        }
    }
}

pub fn node_predicate_to_json(net: &Network, p: &NodePredicate) -> Value {
    match p {
        NodePredicate::Expr(p) => predicate_to_json(net, p),
        NodePredicate::Smt(s) => json!(["smt", s.param, s.body.to_string()]),
    }
}

fn transfer_to_json(net: &Network, t: &Transfer) -> Value {
    Value::Array(
        t.clauses
            .iter()
            .map(|c| {
                let actions: Vec<Value> = c
                    .actions
                    .iter()
                    .map(|a| match a {
                        Action::SetLp(n) => json!(["setLp", n]),
                        Action::AddComm(t) => json!(["addComm", t.to_string()]),
                        Action::RemoveComm(t) => json!(["removeComm", t.to_string()]),
                        Action::SetPrefix(p) => json!(["setPrefix", prefix_to_json(*p)]),
                    })
                    .collect();
                json!({
                    "guard": predicate_to_json(net, &c.guard),
                    "actions": actions,
                    "verdict": match c.verdict { Verdict::Permit => "permit", Verdict::Deny => "deny" },
                })
            })
            .collect(),
    )
}
