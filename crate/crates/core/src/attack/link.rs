use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::topo::{Endpoint, Link, NodeId, PortId, Topology};

/// Directed fabricated link `Ax -> yB`: discovery sent out of `(a, x)` must
/// reach the controller as if it entered `(b, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeceptiveLink {
    pub a: NodeId,
    pub x: PortId,
    pub y: PortId,
    pub b: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected `A:x->y:B`, got `{0}`")]
pub struct ParseLinkError(String);

impl DeceptiveLink {
    pub fn new(a: impl Into<NodeId>, x: u32, y: u32, b: impl Into<NodeId>) -> Self {
        DeceptiveLink { a: a.into(), x: PortId::new(x), y: PortId::new(y), b: b.into() }
    }

    /// Forward direction of an undirected link, from its first endpoint.
    pub fn from_link(link: &Link) -> Self {
        let (s, t) = (link.first(), link.second());
        DeceptiveLink { a: s.node.clone(), x: s.port, y: t.port, b: t.node.clone() }
    }

    pub fn source(&self) -> Endpoint {
        Endpoint { node: self.a.clone(), port: self.x }
    }

    pub fn sink(&self) -> Endpoint {
        Endpoint { node: self.b.clone(), port: self.y }
    }

    pub fn reverse(&self) -> Self {
        DeceptiveLink { a: self.b.clone(), x: self.y, y: self.x, b: self.a.clone() }
    }

    pub fn undirected(&self) -> Link {
        Link::new(self.source(), self.sink())
    }

    /// Ports exist, the nodes differ and the pair is not already wired.
    pub fn validate(&self, t: &Topology) -> Result<(), String> {
        for ep in [self.source(), self.sink()] {
            if t.mac(&ep).is_none() {
                return Err(format!("no port {ep}"));
            }
        }
        if self.a == self.b {
            return Err(format!("{self} connects a switch to itself"));
        }
        if t.peer(&self.source()) == Some(&self.sink()) {
            return Err(format!("{self} is a real link"));
        }
        Ok(())
    }
}

impl fmt::Display for DeceptiveLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}:{}", self.a, self.x, self.y, self.b)
    }
}

impl FromStr for DeceptiveLink {
    type Err = ParseLinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseLinkError(s.to_string());
        let (left, right) = s.split_once("->").ok_or_else(bad)?;
        let (a, x) = left.trim().rsplit_once(':').ok_or_else(bad)?;
        let (y, b) = right.trim().split_once(':').ok_or_else(bad)?;
        let x: u32 = x.parse().map_err(|_| bad())?;
        let y: u32 = y.parse().map_err(|_| bad())?;
        if a.is_empty() || b.is_empty() || x == 0 || y == 0 {
            return Err(bad());
        }
        Ok(DeceptiveLink::new(a, x, y, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;

    #[test]
    fn parse_and_display_round_trip() {
        let l: DeceptiveLink = "A:2->1:B".parse().unwrap();
        assert_eq!(l, DeceptiveLink::new("A", 2, 1, "B"));
        assert_eq!(l.to_string(), "A:2->1:B");
        assert_eq!(l.reverse().to_string(), "B:1->2:A");
    }

    #[test]
    fn malformed_specs_fail() {
        for s in ["A2->1B", "A:0->1:B", ":2->1:B", "A:2-1:B", "A:x->1:B"] {
            assert!(s.parse::<DeceptiveLink>().is_err(), "{s}");
        }
    }

    #[test]
    fn real_link_is_invalid() {
        let t = fixtures::segment();
        assert!(DeceptiveLink::new("A", 2, 1, "C").validate(&t).is_err());
        assert!(DeceptiveLink::new("A", 2, 1, "B").validate(&t).is_ok());
        assert!(DeceptiveLink::new("A", 9, 1, "B").validate(&t).is_err());
    }
}
