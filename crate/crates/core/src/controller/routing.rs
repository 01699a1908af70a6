use serde::{Deserialize, Serialize};

use crate::dataplane::{priority, FlowAction, FlowEntry, FlowId, FlowMatch, Owner};
use crate::topo::{Graph, HostId, NodeId, Topology};

/// A host-to-host flow the controller routes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowRequest {
    pub id: FlowId,
    pub src: HostId,
    pub dst: HostId,
}

impl FlowRequest {
    pub fn new(id: impl Into<String>, src: impl Into<HostId>, dst: impl Into<HostId>) -> Self {
        FlowRequest { id: FlowId::new(id), src: src.into(), dst: dst.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("no route from {0} to {1}")]
    NoRoute(NodeId, NodeId),
}

/// Switch path of a flow together with the per-hop entries realizing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Route {
    pub flow: FlowId,
    pub path: Vec<NodeId>,
    pub entries: Vec<(NodeId, FlowEntry)>,
}

/// Shortest path on `view` with one `{ether_dst, in_port} -> Output` entry
/// per switch on it.
pub fn route_flow(view: &Topology, f: &FlowRequest) -> Result<Route, RouteError> {
    route_flow_on(view, &Graph::new(view), f)
}

/// [`route_flow`] with a prebuilt graph of `view`.
pub fn route_flow_on(view: &Topology, g: &Graph, f: &FlowRequest) -> Result<Route, RouteError> {
    let src = view.host(&f.src).ok_or_else(|| RouteError::UnknownHost(f.src.clone()))?;
    let dst = view.host(&f.dst).ok_or_else(|| RouteError::UnknownHost(f.dst.clone()))?;
    let no_route = || RouteError::NoRoute(src.attach.node.clone(), dst.attach.node.clone());
    let s = g.index_of(&src.attach.node).ok_or_else(no_route)?;
    let d = g.index_of(&dst.attach.node).ok_or_else(no_route)?;
    let idx = g.route(s, d).ok_or_else(no_route)?;
    let mut entries = Vec::with_capacity(idx.len());
    for (i, &u) in idx.iter().enumerate() {
        let in_port = if i == 0 { src.attach.port } else { g.port_towards(u, idx[i - 1]).expect("adjacent") };
        let out = match idx.get(i + 1) {
            Some(&v) => g.port_towards(u, v).expect("adjacent"),
            None => dst.attach.port,
        };
        let entry = FlowEntry::new(
            priority::ROUTE,
            FlowMatch::any().ether_dst(dst.mac).in_port(in_port),
            vec![FlowAction::Output(out)],
            Owner::Controller,
        );
        entries.push((g.id(u).clone(), entry));
    }
    Ok(Route { flow: f.id.clone(), path: idx.iter().map(|&i| g.id(i).clone()).collect(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{fixtures, PortId};

    fn path(r: &Route) -> Vec<&str> {
        r.path.iter().map(|n| n.as_str()).collect()
    }

    #[test]
    fn real_view_routes_through_d() {
        let t = fixtures::motivating_example();
        let r = route_flow(&t, &FlowRequest::new("f1", "H1", "H2")).unwrap();
        assert_eq!(path(&r), ["A", "D", "E"]);
        let (sw, first) = &r.entries[0];
        assert_eq!(sw.as_str(), "A");
        assert_eq!(first.matcher.in_port, Some(PortId::new(3)));
        assert_eq!(first.actions, vec![FlowAction::Output(PortId::new(1))]);
        assert_eq!(r.entries[2].1.actions, vec![FlowAction::Output(PortId::new(3))]);
    }

    #[test]
    fn poisoned_view_skips_c() {
        let t = fixtures::motivating_target();
        let r = route_flow(&t, &FlowRequest::new("f1", "H1", "H2")).unwrap();
        assert_eq!(path(&r), ["A", "B", "E"]);
        assert!(r.entries.iter().all(|(sw, _)| sw.as_str() != "C"));
    }

    #[test]
    fn same_switch_flow_is_single_hop() {
        let mut t = fixtures::segment();
        t.add_host("X", crate::topo::Endpoint::new("A", 1), crate::topo::MacAddr::from_index(1, 90)).unwrap();
        t.add_host("Y", crate::topo::Endpoint::new("A", 3), crate::topo::MacAddr::from_index(1, 91)).unwrap();
        let r = route_flow(&t, &FlowRequest::new("f", "X", "Y")).unwrap();
        assert_eq!(path(&r), ["A"]);
        assert_eq!(r.entries[0].1.actions, vec![FlowAction::Output(PortId::new(3))]);
    }

    #[test]
    fn disconnected_view_has_no_route() {
        let t = fixtures::motivating_example().without_links();
        assert!(matches!(route_flow(&t, &FlowRequest::new("f1", "H1", "H2")), Err(RouteError::NoRoute(..))));
    }
}
