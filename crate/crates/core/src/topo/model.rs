use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::{Endpoint, HostId, MacAddr, NodeId, PortId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("port numbers start at 1 (node `{0}`)")]
    InvalidPort(NodeId),
    #[error("duplicate port {0}")]
    DuplicatePort(Endpoint),
    #[error("unknown port {0}")]
    UnknownPort(Endpoint),
    #[error("port {0} is already used by a link or host")]
    PortInUse(Endpoint),
    #[error("link {0} connects a node to itself")]
    SelfLoop(Link),
    #[error("nodes `{0}` and `{1}` are already linked")]
    DuplicateLink(NodeId, NodeId),
    #[error("no link {0}")]
    UnknownLink(Link),
    #[error("MAC address {0} is not unique")]
    DuplicateMac(MacAddr),
    #[error("duplicate host `{0}`")]
    DuplicateHost(HostId),
    #[error("unknown host `{0}`")]
    UnknownHost(HostId),
    #[error("node sets differ")]
    NodeSetMismatch,
    #[error("node ordering is not a permutation of the topology's nodes")]
    NotPermutation,
    #[error("matrix is not symmetric at ({0}, {1})")]
    AsymmetricMatrix(NodeId, NodeId),
}

/// Undirected port-labeled link, stored with its smaller endpoint first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    a: Endpoint,
    b: Endpoint,
}

impl Link {
    pub fn new(x: Endpoint, y: Endpoint) -> Self {
        if x <= y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    /// Shorthand for `Link::new(Endpoint::new(n1, p1), Endpoint::new(n2, p2))`.
    pub fn between(n1: impl Into<NodeId>, p1: u32, n2: impl Into<NodeId>, p2: u32) -> Self {
        Link::new(Endpoint::new(n1, p1), Endpoint::new(n2, p2))
    }

    pub fn first(&self) -> &Endpoint {
        &self.a
    }

    pub fn second(&self) -> &Endpoint {
        &self.b
    }

    pub fn endpoints(&self) -> [&Endpoint; 2] {
        [&self.a, &self.b]
    }

    pub fn touches(&self, node: &NodeId) -> bool {
        &self.a.node == node || &self.b.node == node
    }

    /// The endpoint opposite `ep`, if `ep` is one of this link's endpoints.
    pub fn opposite(&self, ep: &Endpoint) -> Option<&Endpoint> {
        if &self.a == ep {
            Some(&self.b)
        } else if &self.b == ep {
            Some(&self.a)
        } else {
            None
        }
    }

    /// Endpoint of this link on `node`.
    pub fn end_at(&self, node: &NodeId) -> Option<&Endpoint> {
        if &self.a.node == node {
            Some(&self.a)
        } else if &self.b.node == node {
            Some(&self.b)
        } else {
            None
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}-{}{}", self.a.node, self.a.port, self.b.port, self.b.node)
    }
}

impl Serialize for Link {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ((&self.a.node, self.a.port), (&self.b.node, self.b.port)).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Link {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ((n1, p1), (n2, p2)): ((NodeId, PortId), (NodeId, PortId)) = Deserialize::deserialize(deserializer)?;
        Ok(Link::new(Endpoint { node: n1, port: p1 }, Endpoint { node: n2, port: p2 }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Host {
    pub id: HostId,
    pub attach: Endpoint,
    pub mac: MacAddr,
}

/// Per-node link counts, sorted descending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeSequence(Vec<usize>);

impl DegreeSequence {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Switch-level network graph.
///
/// Links form a simple graph: at most one link per node pair, no self links.
/// Every `(node, port)` carries at most one link or one host.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    nodes: BTreeMap<NodeId, BTreeMap<PortId, MacAddr>>,
    links: BTreeSet<Link>,
    hosts: BTreeMap<HostId, Host>,
    peers: BTreeMap<Endpoint, Endpoint>,
    host_at: BTreeMap<Endpoint, HostId>,
    macs: BTreeSet<MacAddr>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<NodeId>) -> Result<(), TopologyError> {
        let id = id.into();
        if self.nodes.contains_key(&id) {
            return Err(TopologyError::DuplicateNode(id));
        }
        self.nodes.insert(id, BTreeMap::new());
        Ok(())
    }

    pub fn add_port(&mut self, node: &NodeId, port: PortId, mac: MacAddr) -> Result<(), TopologyError> {
        if !port.is_valid() {
            return Err(TopologyError::InvalidPort(node.clone()));
        }
        if self.macs.contains(&mac) {
            return Err(TopologyError::DuplicateMac(mac));
        }
        let ports = self.nodes.get_mut(node).ok_or_else(|| TopologyError::UnknownNode(node.clone()))?;
        if ports.contains_key(&port) {
            return Err(TopologyError::DuplicatePort(Endpoint { node: node.clone(), port }));
        }
        ports.insert(port, mac);
        self.macs.insert(mac);
        Ok(())
    }

    fn check_free(&self, ep: &Endpoint) -> Result<(), TopologyError> {
        let ports = self.nodes.get(&ep.node).ok_or_else(|| TopologyError::UnknownNode(ep.node.clone()))?;
        if !ports.contains_key(&ep.port) {
            return Err(TopologyError::UnknownPort(ep.clone()));
        }
        if self.peers.contains_key(ep) || self.host_at.contains_key(ep) {
            return Err(TopologyError::PortInUse(ep.clone()));
        }
        Ok(())
    }

    pub fn add_link(&mut self, link: Link) -> Result<(), TopologyError> {
        if link.a.node == link.b.node {
            return Err(TopologyError::SelfLoop(link));
        }
        self.check_free(&link.a)?;
        self.check_free(&link.b)?;
        if self.link_between(&link.a.node, &link.b.node).is_some() {
            return Err(TopologyError::DuplicateLink(link.a.node.clone(), link.b.node.clone()));
        }
        self.peers.insert(link.a.clone(), link.b.clone());
        self.peers.insert(link.b.clone(), link.a.clone());
        self.links.insert(link);
        Ok(())
    }

    pub fn remove_link(&mut self, link: &Link) -> Result<(), TopologyError> {
        if !self.links.remove(link) {
            return Err(TopologyError::UnknownLink(link.clone()));
        }
        self.peers.remove(&link.a);
        self.peers.remove(&link.b);
        Ok(())
    }

    pub fn add_host(&mut self, id: impl Into<HostId>, attach: Endpoint, mac: MacAddr) -> Result<(), TopologyError> {
        let id = id.into();
        if self.hosts.contains_key(&id) {
            return Err(TopologyError::DuplicateHost(id));
        }
        if self.macs.contains(&mac) {
            return Err(TopologyError::DuplicateMac(mac));
        }
        self.check_free(&attach)?;
        self.macs.insert(mac);
        self.host_at.insert(attach.clone(), id.clone());
        self.hosts.insert(id.clone(), Host { id, attach, mac });
        Ok(())
    }

    /// Same nodes, ports and hosts with the link set replaced.
    pub fn with_links<'a>(&self, links: impl IntoIterator<Item = &'a Link>) -> Result<Topology, TopologyError> {
        let mut t = self.without_links();
        for link in links {
            t.add_link(link.clone())?;
        }
        Ok(t)
    }

    /// Same nodes, ports and hosts with no links.
    pub fn without_links(&self) -> Topology {
        Topology {
            nodes: self.nodes.clone(),
            links: BTreeSet::new(),
            hosts: self.hosts.clone(),
            peers: BTreeMap::new(),
            host_at: self.host_at.clone(),
            macs: self.macs.clone(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.nodes.keys()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, node: &NodeId) -> bool {
        self.nodes.contains_key(node)
    }

    pub fn ports(&self, node: &NodeId) -> Option<&BTreeMap<PortId, MacAddr>> {
        self.nodes.get(node)
    }

    pub fn mac(&self, ep: &Endpoint) -> Option<MacAddr> {
        self.nodes.get(&ep.node)?.get(&ep.port).copied()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> + '_ {
        self.links.iter()
    }

    pub fn link_set(&self) -> &BTreeSet<Link> {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn has_link(&self, link: &Link) -> bool {
        self.links.contains(link)
    }

    /// Endpoint wired opposite `ep`, if any.
    pub fn peer(&self, ep: &Endpoint) -> Option<&Endpoint> {
        self.peers.get(ep)
    }

    pub fn link_between(&self, u: &NodeId, v: &NodeId) -> Option<Link> {
        self.neighbors(u)
            .into_iter()
            .find(|(_, far)| &far.node == v)
            .map(|(port, far)| Link::new(Endpoint { node: u.clone(), port }, far))
    }

    /// Port on `u` facing `v`.
    pub fn port_facing(&self, u: &NodeId, v: &NodeId) -> Option<PortId> {
        self.neighbors(u).into_iter().find(|(_, far)| &far.node == v).map(|(port, _)| port)
    }

    /// `(local port, far endpoint)` for every link on `node`, by local port.
    pub fn neighbors(&self, node: &NodeId) -> Vec<(PortId, Endpoint)> {
        let start = Endpoint { node: node.clone(), port: PortId::new(0) };
        self.peers
            .range(start..)
            .take_while(|(ep, _)| &ep.node == node)
            .map(|(ep, far)| (ep.port, far.clone()))
            .collect()
    }

    pub fn degree(&self, node: &NodeId) -> usize {
        self.neighbors(node).len()
    }

    pub fn degree_sequence(&self) -> DegreeSequence {
        let mut degrees: Vec<usize> = self.nodes.keys().map(|n| self.degree(n)).collect();
        degrees.sort_unstable_by(|a, b| b.cmp(a));
        DegreeSequence(degrees)
    }

    /// Endpoints carrying a link.
    pub fn linked_endpoints(&self) -> BTreeSet<Endpoint> {
        self.peers.keys().cloned().collect()
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> + '_ {
        self.hosts.values()
    }

    pub fn host(&self, id: &HostId) -> Option<&Host> {
        self.hosts.get(id)
    }

    pub fn host_count(&self) -> usize {
        self.hosts.len()
    }

    pub fn host_at(&self, ep: &Endpoint) -> Option<&Host> {
        self.host_at.get(ep).and_then(|id| self.hosts.get(id))
    }

    pub fn host_by_mac(&self, mac: &MacAddr) -> Option<&Host> {
        self.hosts.values().find(|h| &h.mac == mac)
    }

    /// Number of independent cycles: `m - n + components`.
    pub fn cycle_rank(&self) -> usize {
        let components = super::path::component_count(self);
        self.link_count() + components - self.node_count()
    }

    pub(crate) fn same_nodes(&self, other: &Topology) -> bool {
        self.nodes.len() == other.nodes.len() && self.nodes.keys().eq(other.nodes.keys())
    }
}
