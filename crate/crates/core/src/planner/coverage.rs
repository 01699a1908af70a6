use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::attack::{relay_route, Distances, PathChoice};
use crate::controller::FlowRequest;
use crate::dataplane::FlowId;
use crate::topo::{Endpoint, Graph, HostId, NodeId, PortId, Topology, UNREACHABLE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error("deceptive topology has a different switch set")]
    NodeSetMismatch,
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("unknown target switch {0}")]
    UnknownTarget(NodeId),
    #[error("port {0} is linked only in the deceptive topology")]
    NoRealPeer(Endpoint),
}

/// Flows whose real traversal includes the target switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub target: NodeId,
    pub covered: Vec<FlowId>,
    /// Flows with no route on the deceptive topology, or whose fabricated
    /// hops cannot be relayed over the real one.
    pub unroutable: Vec<FlowId>,
}

impl CoverageReport {
    pub fn count(&self) -> usize {
        self.covered.len()
    }
}

/// Real-topology data shared by coverage evaluations of many deceptive
/// topologies over one flow set.
///
/// A fabricated hop `u -> v` is expanded into the switches its relay
/// crosses, so a flow counts when the target sits on the deceptive path
/// itself or anywhere inside a relay. With single-switch relays this is
/// the real-neighbor test: the hop leaves `u` towards a real neighbor of
/// the target and enters `v` from another.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    real: Topology,
    dist: Distances<'static>,
    peers: Vec<BTreeMap<PortId, (usize, PortId)>>,
    flows: Vec<(FlowId, usize, usize)>,
    relays: HashMap<(usize, PortId, usize, PortId), Option<Vec<usize>>>,
}

impl CoverageModel {
    pub fn new(real: &Topology, flows: &[FlowRequest]) -> Result<Self, CoverageError> {
        let g = Graph::new(real);
        let mut peers = vec![BTreeMap::new(); g.len()];
        for (i, list) in peers.iter_mut().enumerate() {
            for a in g.adjacent(i) {
                list.insert(a.local_port, (a.node, a.far_port));
            }
        }
        let attach = |h: &HostId| -> Result<usize, CoverageError> {
            let host = real.host(h).ok_or_else(|| CoverageError::UnknownHost(h.clone()))?;
            Ok(g.index_of(&host.attach.node).expect("host switch"))
        };
        let flows = flows
            .iter()
            .map(|f| Ok((f.id.clone(), attach(&f.src)?, attach(&f.dst)?)))
            .collect::<Result<Vec<_>, CoverageError>>()?;
        Ok(CoverageModel { real: real.clone(), dist: Distances::owned(g), peers, flows, relays: HashMap::new() })
    }

    pub fn real(&self) -> &Topology {
        &self.real
    }

    pub fn graph(&self) -> &Graph {
        self.dist.graph()
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn index_of(&self, node: &NodeId) -> Option<usize> {
        self.graph().index_of(node)
    }

    /// Real switches each flow crosses when routed on `deceptive`, in
    /// order; `None` for unroutable flows.
    pub fn traversals(&mut self, deceptive: &Topology) -> Result<Vec<Option<Vec<usize>>>, CoverageError> {
        if !self.real.same_nodes(deceptive) {
            return Err(CoverageError::NodeSetMismatch);
        }
        let view = Graph::new(deceptive);
        let mut rows: HashMap<usize, Vec<u32>> = HashMap::new();
        let mut out = Vec::with_capacity(self.flows.len());
        for i in 0..self.flows.len() {
            let (_, src, dst) = self.flows[i];
            let row = rows.entry(dst).or_insert_with(|| view.distances_to(dst));
            if row[src] == UNREACHABLE {
                out.push(None);
                continue;
            }
            let path = view.route_with(src, row).expect("reachable");
            out.push(self.expand(&view, &path)?);
        }
        Ok(out)
    }

    fn expand(&mut self, view: &Graph, path: &[usize]) -> Result<Option<Vec<usize>>, CoverageError> {
        let mut nodes = vec![path[0]];
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            let x = view.port_towards(u, v).expect("adjacent");
            let y = view.port_towards(v, u).expect("adjacent");
            if self.peers[u].get(&x) != Some(&(v, y)) {
                match self.relay(u, x, v, y)? {
                    Some(relay) => nodes.extend_from_slice(relay),
                    None => return Ok(None),
                }
            }
            nodes.push(v);
        }
        Ok(Some(nodes))
    }

    /// Switches between leaving `(a, x)` and entering `(b, y)`.
    fn relay(&mut self, a: usize, x: PortId, b: usize, y: PortId) -> Result<Option<&[usize]>, CoverageError> {
        let key = (a, x, b, y);
        if !self.relays.contains_key(&key) {
            let no_peer =
                |n: usize, p: PortId, g: &Graph| CoverageError::NoRealPeer(Endpoint { node: g.id(n).clone(), port: p });
            let (s, _) = *self.peers[a].get(&x).ok_or_else(|| no_peer(a, x, self.dist.graph()))?;
            let (t, _) = *self.peers[b].get(&y).ok_or_else(|| no_peer(b, y, self.dist.graph()))?;
            let nodes = relay_route(&mut self.dist, s, t, b, PathChoice::Auto).map(|(mut p, loopback)| {
                if loopback {
                    p.push(t);
                } else {
                    p.pop();
                }
                p
            });
            self.relays.insert(key, nodes);
        }
        Ok(self.relays[&key].as_deref())
    }

    /// Number of flows crossing `target`.
    pub fn count(&mut self, deceptive: &Topology, target: usize) -> Result<usize, CoverageError> {
        let t = self.traversals(deceptive)?;
        Ok(t.iter().flatten().filter(|p| p.contains(&target)).count())
    }

    pub fn report(&mut self, deceptive: &Topology, target: &NodeId) -> Result<CoverageReport, CoverageError> {
        let ti = self.index_of(target).ok_or_else(|| CoverageError::UnknownTarget(target.clone()))?;
        let traversals = self.traversals(deceptive)?;
        let mut report = CoverageReport { target: target.clone(), covered: Vec::new(), unroutable: Vec::new() };
        for ((id, _, _), t) in self.flows.iter().zip(traversals) {
            match t {
                Some(p) if p.contains(&ti) => report.covered.push(id.clone()),
                Some(_) => {}
                None => report.unroutable.push(id.clone()),
            }
        }
        Ok(report)
    }
}

/// Flows routed on `deceptive` that physically cross `target` in `real`.
pub fn flow_coverage(
    real: &Topology,
    deceptive: &Topology,
    flows: &[FlowRequest],
    target: &NodeId,
) -> Result<CoverageReport, CoverageError> {
    CoverageModel::new(real, flows)?.report(deceptive, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::route_flow;
    use crate::topo::fixtures;

    fn flows() -> Vec<FlowRequest> {
        vec![FlowRequest::new("f1", "H1", "H2"), FlowRequest::new("f2", "H1", "H3")]
    }

    #[test]
    fn motivating_f1_is_seen_by_c() {
        let real = fixtures::motivating_example();
        let target = fixtures::motivating_target();
        let r = flow_coverage(&real, &target, &flows(), &"C".into()).unwrap();
        // f2 is routed A-C-D on the deceptive view.
        assert_eq!(r.covered, vec![FlowId::new("f1"), FlowId::new("f2")]);
        assert!(r.unroutable.is_empty());
        let r = flow_coverage(&real, &target, &flows(), &"D".into()).unwrap();
        assert_eq!(r.covered, vec![FlowId::new("f2")]);
    }

    #[test]
    fn real_view_counts_shortest_paths() {
        let real = fixtures::fattree();
        let fs = crate::planner::random_flows(&real, 3, 60).unwrap();
        for node in ["0", "6", "12", "25"] {
            let target = NodeId::from(node);
            let expected = fs.iter().filter(|f| route_flow(&real, f).unwrap().path.contains(&target)).count();
            assert_eq!(flow_coverage(&real, &real, &fs, &target).unwrap().count(), expected);
        }
    }

    #[test]
    fn absent_target_counts_nothing() {
        let real = fixtures::motivating_example();
        let mut model = CoverageModel::new(&real, &flows()).unwrap();
        let b = model.index_of(&"B".into()).unwrap();
        assert_eq!(model.count(&real, b).unwrap(), 0);
    }

    #[test]
    fn foreign_nodes_are_rejected() {
        let real = fixtures::motivating_example();
        let other = fixtures::fattree();
        assert_eq!(flow_coverage(&real, &other, &flows(), &"A".into()), Err(CoverageError::NodeSetMismatch));
        assert_eq!(flow_coverage(&real, &real, &flows(), &"Z".into()), Err(CoverageError::UnknownTarget("Z".into())));
    }
}
