//! Benign controller: discovery, view construction and forwarding.

mod routing;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataplane::{
    priority, FlowAction, FlowEntry, FlowId, FlowMatch, FlowMod, Injection, NetError, Network, Owner, Packet, PacketIn,
    PacketInHandler, PacketOut, Payload, Reply, ETH_TYPE_LLDP,
};
use crate::topo::{Endpoint, Graph, Link, MacAddr, NodeId, Topology};

pub use routing::{route_flow, route_flow_on, FlowRequest, Route, RouteError};
pub use store::{rebuild_view, Anomaly, ControllerView, LinkStore, Stamped};

/// Source address shared by every discovery packet in fingerprint mode.
pub const FINGERPRINT_MAC: MacAddr = MacAddr::from_index(3, 0);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardingMode {
    /// Routes for declared flows are installed after every view rebuild.
    #[default]
    Proactive,
    /// Entries are installed only in answer to packet-ins.
    Reactive,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// All discovery packets carry [`FINGERPRINT_MAC`] as source.
    #[serde(default)]
    pub fingerprint: bool,
    /// Install a max-priority discovery entry on every switch.
    #[serde(default)]
    pub pin_lldp: bool,
    #[serde(default)]
    pub forwarding: ForwardingMode,
}

/// One line of the discovery trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Round { round: u64, packet_outs: usize, packet_ins: usize, links: usize },
    LinkAdded { round: u64, from: Endpoint, to: Endpoint },
    LinkEvicted { round: u64, from: Endpoint, to: Endpoint },
    Conflict { round: u64, from: Endpoint, first: Endpoint, second: Endpoint },
    ViewChanged { round: u64, links: usize, anomalies: usize },
    Flood { journey: u64, switch: NodeId, flow: Option<FlowId>, unexpected: bool },
}

/// A data packet-in that contradicted the view path of its flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Unexpected {
    pub journey: u64,
    pub switch: NodeId,
    pub flow: Option<FlowId>,
}

/// What [`Controller::sync_routes`] changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyncReport {
    pub installed: usize,
    pub removed: usize,
    pub unrouted: Vec<FlowId>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    skeleton: Topology,
    config: ControllerConfig,
    store: LinkStore,
    view: ControllerView,
    round: u64,
    flows: Vec<FlowRequest>,
    routes: BTreeMap<FlowId, Route>,
    unexpected: Vec<Unexpected>,
    flooded: BTreeSet<(u64, NodeId)>,
    trace: Vec<TraceEvent>,
}

impl Controller {
    /// Controller that knows the switches, ports and host locations of
    /// `fabric` but none of its links.
    pub fn new(fabric: &Topology, config: ControllerConfig) -> Self {
        let skeleton = fabric.without_links();
        let view = ControllerView { topology: skeleton.clone(), anomalies: Vec::new() };
        Controller {
            skeleton,
            config,
            store: LinkStore::new(),
            view,
            round: 0,
            flows: Vec::new(),
            routes: BTreeMap::new(),
            unexpected: Vec::new(),
            flooded: BTreeSet::new(),
            trace: Vec::new(),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn store(&self) -> &LinkStore {
        &self.store
    }

    pub fn view(&self) -> &ControllerView {
        &self.view
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn flows(&self) -> &[FlowRequest] {
        &self.flows
    }

    /// Routes installed by the last proactive sync, keyed by flow.
    pub fn routes(&self) -> &BTreeMap<FlowId, Route> {
        &self.routes
    }

    pub fn unexpected(&self) -> &[Unexpected] {
        &self.unexpected
    }

    pub fn unexpected_count(&self) -> usize {
        self.unexpected.len()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Trace as one JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn declare_flows(&mut self, flows: impl IntoIterator<Item = FlowRequest>) {
        self.flows.extend(flows);
    }

    /// Entries the controller installs when it connects to a switch.
    pub fn base_entries(&self) -> Vec<FlowEntry> {
        if !self.config.pin_lldp {
            return Vec::new();
        }
        vec![FlowEntry::new(
            priority::LLDP_PINNED,
            FlowMatch::any().ether_type(ETH_TYPE_LLDP),
            vec![FlowAction::ToController],
            Owner::Controller,
        )]
    }

    pub fn connect(&self, net: &mut Network) -> Result<(), NetError> {
        let ids: Vec<NodeId> = self.skeleton.nodes().cloned().collect();
        for id in &ids {
            for e in self.base_entries() {
                net.install(id, e)?;
            }
        }
        Ok(())
    }

    /// Source address of the discovery packet sent out of `ep`.
    pub fn discovery_src(&self, ep: &Endpoint) -> MacAddr {
        if self.config.fingerprint {
            FINGERPRINT_MAC
        } else {
            self.skeleton.mac(ep).expect("known port")
        }
    }

    /// One packet-out per switch port, switches then ports in order.
    pub fn discovery_injections(&self) -> Vec<Injection> {
        let mut out = Vec::new();
        for node in self.skeleton.nodes() {
            for &port in self.skeleton.ports(node).into_iter().flat_map(|p| p.keys()) {
                let ep = Endpoint { node: node.clone(), port };
                let packet = Packet::discovery(node.clone(), port, self.discovery_src(&ep));
                out.push(Injection::PacketOut(PacketOut::Port { switch: node.clone(), port, packet }));
            }
        }
        out
    }

    /// Sends discovery out of every port and records what comes back.
    /// Links not confirmed in this round are evicted.
    pub fn run_discovery_round(&mut self, net: &mut Network) -> Result<&LinkStore, NetError> {
        self.round += 1;
        let before = self.store.snapshot();
        let injections = self.discovery_injections();
        let packet_outs = injections.len();
        let log = net.run(injections, self)?;
        self.store.evict_before(self.round);
        let after = self.store.snapshot();
        let round = self.round;
        for (from, to) in &after {
            if before.get(from) != Some(to) {
                self.trace.push(TraceEvent::LinkAdded { round, from: from.clone(), to: to.clone() });
            }
        }
        for (from, to) in &before {
            if after.get(from) != Some(to) {
                self.trace.push(TraceEvent::LinkEvicted { round, from: from.clone(), to: to.clone() });
            }
        }
        self.trace.push(TraceEvent::Round { round, packet_outs, packet_ins: log.packet_ins.len(), links: after.len() });
        Ok(&self.store)
    }

    /// Rebuilds the view from the store. Returns whether the link set changed.
    pub fn rebuild_view(&mut self) -> bool {
        let view = rebuild_view(&self.skeleton, &self.store);
        let changed = view.topology.link_set() != self.view.topology.link_set();
        if changed {
            self.trace.push(TraceEvent::ViewChanged {
                round: self.round,
                links: view.topology.link_count(),
                anomalies: view.anomalies.len(),
            });
        }
        self.view = view;
        changed
    }

    /// Route entries the declared flows need on the current view.
    pub fn desired_routes(&self) -> (BTreeMap<FlowId, Route>, Vec<FlowId>) {
        let g = Graph::new(&self.view.topology);
        let mut routes = BTreeMap::new();
        let mut unrouted = Vec::new();
        for f in &self.flows {
            match route_flow_on(&self.view.topology, &g, f) {
                Ok(r) => {
                    routes.insert(f.id.clone(), r);
                }
                Err(_) => unrouted.push(f.id.clone()),
            }
        }
        (routes, unrouted)
    }

    /// Reconciles controller route entries with the view. Proactive mode
    /// installs every declared flow's route; reactive mode flushes its
    /// entries so they are relearned on the new view.
    pub fn sync_routes(&mut self, net: &mut Network, view_changed: bool) -> Result<SyncReport, NetError> {
        let mut report = SyncReport::default();
        let mut desired: BTreeMap<NodeId, Vec<FlowEntry>> = BTreeMap::new();
        match self.config.forwarding {
            ForwardingMode::Reactive => {
                if !view_changed {
                    return Ok(report);
                }
                self.routes.clear();
            }
            ForwardingMode::Proactive => {
                let (routes, unrouted) = self.desired_routes();
                for r in routes.values() {
                    for (sw, e) in &r.entries {
                        desired.entry(sw.clone()).or_default().push(e.clone());
                    }
                }
                report.unrouted = unrouted;
                self.routes = routes;
            }
        }
        let ids: Vec<NodeId> = self.skeleton.nodes().cloned().collect();
        for id in &ids {
            let want = desired.remove(id).unwrap_or_default();
            let switch = net.switch_mut(id).ok_or_else(|| NetError::UnknownSwitch(id.clone()))?;
            report.removed += switch.remove_where(|e| {
                e.owner_tag == Owner::Controller
                    && e.priority == priority::ROUTE
                    && !want.iter().any(|w| w.same_rule(e))
            });
            for w in want {
                if !switch.table().iter().any(|e| e.same_rule(&w)) {
                    switch.install_entry(w);
                    report.installed += 1;
                }
            }
        }
        Ok(report)
    }

    /// Discovery round, view rebuild and route reconciliation.
    pub fn refresh(&mut self, net: &mut Network) -> Result<bool, NetError> {
        self.run_discovery_round(net)?;
        let changed = self.rebuild_view();
        self.sync_routes(net, changed)?;
        Ok(changed)
    }

    /// View path of the traffic `src_mac -> dst_mac`, starting at `from`
    /// when the source is unknown.
    fn view_path(&self, src: Option<&NodeId>, from: &NodeId, dst: &NodeId) -> Option<(Graph, Vec<usize>)> {
        let g = Graph::new(&self.view.topology);
        let s = g.index_of(src.unwrap_or(from))?;
        let d = g.index_of(dst)?;
        let p = g.route(s, d)?;
        Some((g, p))
    }

    /// Forward along the view path or flood.
    pub fn reactive_forward(&mut self, journey: u64, pi: &PacketIn) -> Reply {
        let pkt = &pi.packet;
        let flow = match &pkt.payload {
            Payload::Data { flow_id } => Some(flow_id.clone()),
            Payload::Discovery { .. } => None,
        };
        let dst = self.skeleton.host_by_mac(&pkt.ether_dst).cloned();
        let src = self.skeleton.host_by_mac(&pkt.ether_src).cloned();
        let mut contradicts = false;
        if let Some(dst) = &dst {
            let routed = self.view_path(src.as_ref().map(|h| &h.attach.node), &pi.switch, &dst.attach.node);
            if let Some((g, path)) = routed {
                let here = g.index_of(&pi.switch).and_then(|i| path.iter().position(|&u| u == i));
                if let Some(k) = here {
                    let out = match path.get(k + 1) {
                        Some(&v) => g.port_towards(path[k], v).expect("adjacent"),
                        None => dst.attach.port,
                    };
                    let entry = FlowEntry::new(
                        priority::ROUTE,
                        FlowMatch::any().ether_dst(dst.mac).in_port(pi.in_port),
                        vec![FlowAction::Output(out)],
                        Owner::Controller,
                    );
                    return Reply {
                        flow_mods: vec![FlowMod::Add { switch: pi.switch.clone(), entry }],
                        packet_outs: vec![PacketOut::Port {
                            switch: pi.switch.clone(),
                            port: out,
                            packet: pkt.clone(),
                        }],
                    };
                }
                contradicts = src.is_some();
            }
        }
        if !self.flooded.insert((journey, pi.switch.clone())) {
            return Reply::default();
        }
        if contradicts {
            self.unexpected.push(Unexpected { journey, switch: pi.switch.clone(), flow: flow.clone() });
        }
        self.trace.push(TraceEvent::Flood { journey, switch: pi.switch.clone(), flow, unexpected: contradicts });
        Reply {
            flow_mods: Vec::new(),
            packet_outs: vec![PacketOut::Flood { switch: pi.switch.clone(), in_port: pi.in_port, packet: pkt.clone() }],
        }
    }

    /// Links of the current view.
    pub fn view_links(&self) -> BTreeSet<Link> {
        self.view.topology.link_set().clone()
    }
}

impl PacketInHandler for Controller {
    fn packet_in(&mut self, journey: u64, pi: &PacketIn) -> Reply {
        match &pi.packet.payload {
            Payload::Discovery { origin_node, origin_port } => {
                let from = Endpoint { node: origin_node.clone(), port: *origin_port };
                let to = Endpoint { node: pi.switch.clone(), port: pi.in_port };
                if let Some(first) = self.store.confirm(from.clone(), to.clone(), self.round) {
                    self.trace.push(TraceEvent::Conflict { round: self.round, from, first, second: to });
                }
                Reply::default()
            }
            Payload::Data { .. } => self.reactive_forward(journey, pi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::{FlowId, Silent};
    use crate::topo::{fixtures, PortId};

    fn discover(t: &Topology, config: ControllerConfig) -> (Controller, Network) {
        let mut net = Network::new(t.clone());
        let mut c = Controller::new(t, config);
        c.connect(&mut net).unwrap();
        c.refresh(&mut net).unwrap();
        (c, net)
    }

    #[test]
    fn clean_two_switch_store() {
        let t = fixtures::explicit(&[("A", 2), ("B", 1)], &[("A", 2, "B", 1)], &[]);
        let (c, _) = discover(&t, ControllerConfig::default());
        let got: Vec<(String, String)> = c.store().directed().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(got, vec![("A:2".into(), "B:1".into()), ("B:1".into(), "A:2".into())]);
    }

    #[test]
    fn zero_links_empty_store() {
        let t = fixtures::explicit(&[("A", 2), ("B", 1)], &[], &[]);
        let (c, _) = discover(&t, ControllerConfig::default());
        assert!(c.store().is_empty());
    }

    #[test]
    fn view_matches_real_topology() {
        for t in [fixtures::motivating_example(), fixtures::fattree(), fixtures::chinanet()] {
            let (c, _) = discover(&t, ControllerConfig::default());
            assert_eq!(c.view().topology.link_set(), t.link_set());
        }
    }

    #[test]
    fn fingerprint_and_pinned_entry_do_not_change_clean_view() {
        let t = fixtures::motivating_example();
        let config = ControllerConfig { fingerprint: true, pin_lldp: true, ..Default::default() };
        let (c, _) = discover(&t, config);
        assert_eq!(c.view().topology.link_set(), t.link_set());
    }

    #[test]
    fn rounds_are_idempotent() {
        let t = fixtures::fattree();
        let (mut c, mut net) = discover(&t, ControllerConfig::default());
        let first = c.store().snapshot();
        c.refresh(&mut net).unwrap();
        assert_eq!(c.store().snapshot(), first);
    }

    #[test]
    fn removed_link_is_evicted_next_round() {
        let t = fixtures::motivating_example();
        let (mut c, _) = discover(&t, ControllerConfig::default());
        let mut cut = t.clone();
        cut.remove_link(&Link::between("A", 1, "D", 1)).unwrap();
        let mut net = Network::new(cut.clone());
        c.refresh(&mut net).unwrap();
        assert_eq!(c.view().topology.link_set(), cut.link_set());
        assert!(c.trace().iter().any(|e| matches!(e, TraceEvent::LinkEvicted { .. })));
    }

    #[test]
    fn proactive_routes_deliver() {
        let t = fixtures::motivating_example();
        let mut net = Network::new(t.clone());
        let mut c = Controller::new(&t, ControllerConfig::default());
        c.declare_flows([FlowRequest::new("f1", "H1", "H2")]);
        c.refresh(&mut net).unwrap();
        let h1 = t.host(&"H1".into()).unwrap().mac;
        let h2 = t.host(&"H2".into()).unwrap().mac;
        let pkt = Packet::data(FlowId::from("f1"), h1, h2);
        let log = net.run(vec![Injection::FromHost { host: "H1".into(), packet: pkt }], &mut c).unwrap();
        assert_eq!(log.deliveries.len(), 1);
        assert!(log.packet_ins.is_empty());
        assert_eq!(c.unexpected_count(), 0);
    }

    #[test]
    fn resync_is_stable() {
        let t = fixtures::motivating_example();
        let mut net = Network::new(t.clone());
        let mut c = Controller::new(&t, ControllerConfig::default());
        c.declare_flows([FlowRequest::new("f1", "H1", "H2")]);
        c.refresh(&mut net).unwrap();
        let r = c.sync_routes(&mut net, false).unwrap();
        assert_eq!((r.installed, r.removed), (0, 0));
    }

    #[test]
    fn reactive_mode_learns_hop_by_hop() {
        let t = fixtures::motivating_example();
        let config = ControllerConfig { forwarding: ForwardingMode::Reactive, ..Default::default() };
        let (mut c, mut net) = discover(&t, config);
        let h1 = t.host(&"H1".into()).unwrap().mac;
        let h2 = t.host(&"H2".into()).unwrap().mac;
        let pkt = Packet::data(FlowId::from("f1"), h1, h2);
        let inj = || Injection::FromHost { host: "H1".into(), packet: pkt.clone() };
        let log = net.run(vec![inj()], &mut c).unwrap();
        assert_eq!(log.deliveries.len(), 1);
        assert_eq!(log.packet_ins.len(), 3);
        let log = net.run(vec![inj()], &mut c).unwrap();
        assert_eq!((log.deliveries.len(), log.packet_ins.len()), (1, 0));
        assert_eq!(c.unexpected_count(), 0);
    }

    #[test]
    fn unknown_destination_floods_without_counting() {
        let t = fixtures::motivating_example();
        let (mut c, mut net) = discover(&t, ControllerConfig::default());
        let h1 = t.host(&"H1".into()).unwrap().mac;
        let pkt = Packet::data(FlowId::from("x"), h1, MacAddr::from_index(1, 999));
        net.run(vec![Injection::FromHost { host: "H1".into(), packet: pkt }], &mut c).unwrap();
        assert_eq!(c.unexpected_count(), 0);
        assert!(c.trace().iter().any(|e| matches!(e, TraceEvent::Flood { unexpected: false, .. })));
    }

    #[test]
    fn off_path_packet_in_floods_and_counts() {
        let t = fixtures::motivating_example();
        let (mut c, _) = discover(&t, ControllerConfig::default());
        let h1 = t.host(&"H1".into()).unwrap().mac;
        let h2 = t.host(&"H2".into()).unwrap().mac;
        let pi = PacketIn {
            switch: "C".into(),
            in_port: PortId::new(1),
            packet: Packet::data(FlowId::from("f1"), h1, h2),
            via: Owner::Controller,
            table_miss: true,
        };
        let reply = c.packet_in(7, &pi);
        assert!(matches!(reply.packet_outs[..], [PacketOut::Flood { .. }]));
        assert_eq!(c.unexpected_count(), 1);
        assert_eq!(c.packet_in(7, &pi), Reply::default());
        assert_eq!(c.unexpected_count(), 1);
    }

    #[test]
    fn silent_handler_run_records_nothing() {
        let t = fixtures::segment();
        let mut net = Network::new(t.clone());
        let c = Controller::new(&t, ControllerConfig::default());
        let log = net.run(c.discovery_injections(), &mut Silent).unwrap();
        assert_eq!(log.packet_ins.len(), 4);
    }

    #[test]
    fn trace_lines_are_json() {
        let t = fixtures::segment();
        let (c, _) = discover(&t, ControllerConfig::default());
        for line in c.trace_jsonl().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("event").is_some());
        }
    }
}
