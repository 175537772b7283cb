use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Index of a node in [`Network::nodes`](super::Network::nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A BGP community tag `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Community {
    pub asn: u16,
    pub value: u16,
}

impl Community {
    pub const fn new(asn: u16, value: u16) -> Self {
        Community { asn, value }
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.asn, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid community tag `{0}`, expected `a:b` with 16-bit parts")]
pub struct ParseCommunityError(pub String);

impl FromStr for Community {
    type Err = ParseCommunityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseCommunityError(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(err)?;
        Ok(Community {
            asn: a.trim().parse().map_err(|_| err())?,
            value: b.trim().parse().map_err(|_| err())?,
        })
    }
}

/// Compares two ordered sets as the unsigned bitvectors they encode, where
/// the i-th smallest element of the universe is bit i.
///
/// This is the order the SMT encoding uses (`bvult` on the membership mask),
/// so concrete and symbolic merge tiebreaks agree.
fn cmp_as_bitvector<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Ordering {
    a.iter().rev().cmp(b.iter().rev())
}

/// Field values of a valid route.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RouteAttrs {
    pub prefix: u32,
    pub lp: u64,
    pub path_len: u64,
    /// Nodes the route traversed; a membership abstraction of the AS path.
    pub visited: BTreeSet<NodeId>,
    pub comms: BTreeSet<Community>,
}

impl RouteAttrs {
    pub const DEFAULT_LP: u64 = 100;

    /// A freshly originated route for `prefix`: default local preference,
    /// empty path, no communities.
    pub fn originate(prefix: u32) -> Self {
        RouteAttrs {
            prefix,
            lp: Self::DEFAULT_LP,
            path_len: 0,
            visited: BTreeSet::new(),
            comms: BTreeSet::new(),
        }
    }

    /// The tiebreak used when local preference and path length are equal.
    fn cmp_tiebreak(&self, other: &Self) -> Ordering {
        cmp_as_bitvector(&self.visited, &other.visited)
            .then_with(|| cmp_as_bitvector(&self.comms, &other.comms))
            .then_with(|| self.prefix.cmp(&other.prefix))
    }

    /// Total preference order: `Less` means `self` is preferred.
    pub fn cmp_preference(&self, other: &Self) -> Ordering {
        (Reverse(self.lp), self.path_len)
            .cmp(&(Reverse(other.lp), other.path_len))
            .then_with(|| self.cmp_tiebreak(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("field `{0}` accessed on NoRoute")]
pub struct NoRouteAccess(pub &'static str);

/// A route for the single destination prefix of a network instance, or the
/// distinguished "no route" value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Route {
    NoRoute,
    Valid(RouteAttrs),
}

impl Route {
    pub fn is_none(&self) -> bool {
        matches!(self, Route::NoRoute)
    }

    pub fn attrs(&self) -> Option<&RouteAttrs> {
        match self {
            Route::NoRoute => None,
            Route::Valid(a) => Some(a),
        }
    }

    fn field<T>(
        &self,
        name: &'static str,
        get: impl Fn(&RouteAttrs) -> T,
    ) -> Result<T, NoRouteAccess> {
        self.attrs().map(get).ok_or(NoRouteAccess(name))
    }

    pub fn prefix(&self) -> Result<u32, NoRouteAccess> {
        self.field("prefix", |a| a.prefix)
    }

    pub fn lp(&self) -> Result<u64, NoRouteAccess> {
        self.field("lp", |a| a.lp)
    }

    pub fn path_len(&self) -> Result<u64, NoRouteAccess> {
        self.field("pathLen", |a| a.path_len)
    }

    pub fn visited(&self) -> Result<&BTreeSet<NodeId>, NoRouteAccess> {
        self.attrs()
            .map(|a| &a.visited)
            .ok_or(NoRouteAccess("visited"))
    }

    pub fn comms(&self) -> Result<&BTreeSet<Community>, NoRouteAccess> {
        self.attrs().map(|a| &a.comms).ok_or(NoRouteAccess("comms"))
    }
}

impl From<RouteAttrs> for Route {
    fn from(a: RouteAttrs) -> Self {
        Route::Valid(a)
    }
}

/// BGP route selection: higher local preference, then shorter path, then a
/// canonical tiebreak on `(visited, comms, prefix)`. `NoRoute` is the
/// identity. The result is always one of the two arguments.
pub fn merge(a: &Route, b: &Route) -> Route {
    match (a, b) {
        (Route::NoRoute, _) => b.clone(),
        (_, Route::NoRoute) => a.clone(),
        (Route::Valid(x), Route::Valid(y)) => {
            if x.cmp_preference(y) != Ordering::Greater {
                a.clone()
            } else {
                b.clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(lp: u64, len: u64) -> Route {
        Route::Valid(RouteAttrs {
            lp,
            path_len: len,
            ..RouteAttrs::originate(1)
        })
    }

    #[test]
    fn higher_lp_wins() {
        let a = r(300, 2);
        let b = r(100, 1);
        assert_eq!(merge(&a, &b), a);
        assert_eq!(merge(&b, &a), a);
    }

    #[test]
    fn shorter_path_wins_on_lp_tie() {
        assert_eq!(merge(&r(100, 1), &r(100, 2)), r(100, 1));
    }

    #[test]
    fn no_route_is_identity() {
        let s = r(100, 3);
        assert_eq!(merge(&Route::NoRoute, &s), s);
        assert_eq!(merge(&s, &Route::NoRoute), s);
        assert_eq!(merge(&Route::NoRoute, &Route::NoRoute), Route::NoRoute);
    }

    #[test]
    fn accessors_on_no_route_fail() {
        assert_eq!(Route::NoRoute.lp(), Err(NoRouteAccess("lp")));
        assert!(Route::NoRoute.visited().is_err());
        assert_eq!(r(7, 0).lp(), Ok(7));
    }

    #[test]
    fn bitvector_order_matches_mask_value() {
        let set = |xs: &[u32]| xs.iter().map(|&x| NodeId(x)).collect::<BTreeSet<_>>();
        let mask = |xs: &[u32]| xs.iter().map(|&x| 1u64 << x).sum::<u64>();
        let cases: [&[u32]; 6] = [&[], &[0], &[1], &[0, 1], &[2], &[0, 3]];
        for a in cases {
            for b in cases {
                assert_eq!(
                    cmp_as_bitvector(&set(a), &set(b)),
                    mask(a).cmp(&mask(b)),
                    "{a:?} {b:?}"
                );
            }
        }
    }

    #[test]
    fn community_parse() {
        assert_eq!("1:0".parse::<Community>().unwrap(), Community::new(1, 0));
        assert_eq!(Community::new(100, 2).to_string(), "100:2");
        assert!("1".parse::<Community>().is_err());
        assert!("70000:1".parse::<Community>().is_err());
    }
}
