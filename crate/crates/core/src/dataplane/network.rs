use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::flow::{FlowEntry, FlowMatch};
use super::packet::Packet;
use super::switch::{Emission, Fault, PacketIn, Switch};
use crate::topo::{Endpoint, HostId, NodeId, PortId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("unknown switch {0}")]
    UnknownSwitch(NodeId),
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("switch {0} has no port {1}")]
    UnknownPort(NodeId, PortId),
}

/// Where a transmission ends up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arrival {
    Switch(Endpoint),
    Host(HostId),
    Dropped,
}

/// Follows the real wiring from `from`.
pub fn transmit(fabric: &Topology, from: &Endpoint) -> Arrival {
    if let Some(peer) = fabric.peer(from) {
        return Arrival::Switch(peer.clone());
    }
    match fabric.host_at(from) {
        Some(h) => Arrival::Host(h.id.clone()),
        None => Arrival::Dropped,
    }
}

/// Table modification sent to a switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMod {
    Add {
        switch: NodeId,
        entry: FlowEntry,
    },
    Delete {
        switch: NodeId,
        priority: u16,
        #[serde(rename = "match")]
        matcher: FlowMatch,
    },
}

impl FlowMod {
    pub fn switch(&self) -> &NodeId {
        match self {
            FlowMod::Add { switch, .. } | FlowMod::Delete { switch, .. } => switch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PacketOut {
    /// Emit on one port, bypassing the table.
    Port { switch: NodeId, port: PortId, packet: Packet },
    /// Emit on every port except `in_port`.
    Flood { switch: NodeId, in_port: PortId, packet: Packet },
}

/// Controller answer to a packet-in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reply {
    pub flow_mods: Vec<FlowMod>,
    pub packet_outs: Vec<PacketOut>,
}

pub trait PacketInHandler {
    /// `journey` identifies the injection the packet descends from.
    fn packet_in(&mut self, journey: u64, pi: &PacketIn) -> Reply;
}

/// Handler that ignores every packet-in.
pub struct Silent;

impl PacketInHandler for Silent {
    fn packet_in(&mut self, _journey: u64, _pi: &PacketIn) -> Reply {
        Reply::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Injection {
    PacketOut(PacketOut),
    /// A host sends a packet into its attachment port.
    FromHost {
        host: HostId,
        packet: Packet,
    },
}

/// Data packet that reached the host owning its destination address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub journey: u64,
    pub host: HostId,
    pub packet: Packet,
    /// Switches the packet passed through, in order.
    pub trail: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLog {
    pub journeys: Vec<u64>,
    pub deliveries: Vec<Delivery>,
    pub packet_ins: Vec<(u64, PacketIn)>,
    pub faults: Vec<Fault>,
    pub transmissions: usize,
}

struct Work {
    journey: u64,
    at: Endpoint,
    packet: Packet,
    trail: Vec<NodeId>,
}

/// Switches wired by the real topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    fabric: Topology,
    switches: BTreeMap<NodeId, Switch>,
    next_journey: u64,
    hop_limit: usize,
}

impl Network {
    pub fn new(fabric: Topology) -> Self {
        let switches = fabric
            .nodes()
            .map(|n| (n.clone(), Switch::new(n.clone(), fabric.ports(n).cloned().unwrap_or_default())))
            .collect();
        let hop_limit = 4 * fabric.node_count() + 16;
        Network { fabric, switches, next_journey: 0, hop_limit }
    }

    pub fn fabric(&self) -> &Topology {
        &self.fabric
    }

    pub fn switch(&self, id: &NodeId) -> Option<&Switch> {
        self.switches.get(id)
    }

    pub fn switch_mut(&mut self, id: &NodeId) -> Option<&mut Switch> {
        self.switches.get_mut(id)
    }

    pub fn switches(&self) -> impl Iterator<Item = &Switch> + '_ {
        self.switches.values()
    }

    pub fn install(&mut self, switch: &NodeId, entry: FlowEntry) -> Result<(), NetError> {
        self.switches.get_mut(switch).ok_or_else(|| NetError::UnknownSwitch(switch.clone()))?.install_entry(entry);
        Ok(())
    }

    pub fn apply_flow_mod(&mut self, m: &FlowMod) -> Result<(), NetError> {
        match m {
            FlowMod::Add { switch, entry } => self.install(switch, entry.clone()),
            FlowMod::Delete { switch, priority, matcher } => {
                let s = self.switches.get_mut(switch).ok_or_else(|| NetError::UnknownSwitch(switch.clone()))?;
                s.remove_entry(*priority, matcher);
                Ok(())
            }
        }
    }

    /// Every switch table keyed by switch.
    pub fn tables(&self) -> BTreeMap<NodeId, Vec<FlowEntry>> {
        self.switches.iter().map(|(id, s)| (id.clone(), s.table().to_vec())).collect()
    }

    pub fn reset_counters(&mut self) {
        for s in self.switches.values_mut() {
            s.reset_counters();
        }
    }

    /// Processes the injections to quiescence, FIFO across all copies.
    /// Each injection starts a new journey.
    pub fn run(&mut self, injections: Vec<Injection>, handler: &mut dyn PacketInHandler) -> Result<RunLog, NetError> {
        let mut log = RunLog::default();
        let mut queue = VecDeque::new();
        for inj in injections {
            let journey = self.next_journey;
            self.next_journey += 1;
            log.journeys.push(journey);
            match inj {
                Injection::PacketOut(out) => self.emit_packet_out(journey, out, Vec::new(), &mut queue, &mut log)?,
                Injection::FromHost { host, packet } => {
                    let h = self.fabric.host(&host).ok_or_else(|| NetError::UnknownHost(host.clone()))?;
                    queue.push_back(Work { journey, at: h.attach.clone(), packet, trail: Vec::new() });
                }
            }
        }
        while let Some(work) = queue.pop_front() {
            self.step(work, handler, &mut queue, &mut log)?;
        }
        Ok(log)
    }

    fn step(
        &mut self,
        work: Work,
        handler: &mut dyn PacketInHandler,
        queue: &mut VecDeque<Work>,
        log: &mut RunLog,
    ) -> Result<(), NetError> {
        let Work { journey, at, packet, mut trail } = work;
        if trail.len() >= self.hop_limit {
            log.faults.push(Fault::HopLimit { switch: at.node });
            return Ok(());
        }
        trail.push(at.node.clone());
        let switch = self.switches.get_mut(&at.node).ok_or_else(|| NetError::UnknownSwitch(at.node.clone()))?;
        let emissions = match switch.process(&packet, at.port) {
            Ok(e) => e,
            Err(fault) => {
                log.faults.push(fault);
                return Ok(());
            }
        };
        for emission in emissions {
            match emission {
                Emission::Transmit { port, packet } => {
                    self.forward(journey, Endpoint { node: at.node.clone(), port }, packet, trail.clone(), queue, log)
                }
                Emission::PacketIn(pi) => {
                    let reply = handler.packet_in(journey, &pi);
                    log.packet_ins.push((journey, pi));
                    for m in &reply.flow_mods {
                        self.apply_flow_mod(m)?;
                    }
                    for out in reply.packet_outs {
                        self.emit_packet_out(journey, out, trail.clone(), queue, log)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn emit_packet_out(
        &mut self,
        journey: u64,
        out: PacketOut,
        mut trail: Vec<NodeId>,
        queue: &mut VecDeque<Work>,
        log: &mut RunLog,
    ) -> Result<(), NetError> {
        let (switch, ports, packet) = match out {
            PacketOut::Port { switch, port, packet } => (switch, vec![port], packet),
            PacketOut::Flood { switch, in_port, packet } => {
                let s = self.switches.get(&switch).ok_or_else(|| NetError::UnknownSwitch(switch.clone()))?;
                let ports = s.ports().keys().copied().filter(|&p| p != in_port).collect();
                (switch, ports, packet)
            }
        };
        if !self.switches.contains_key(&switch) {
            return Err(NetError::UnknownSwitch(switch));
        }
        if trail.last() != Some(&switch) {
            trail.push(switch.clone());
        }
        for port in ports {
            self.forward(journey, Endpoint { node: switch.clone(), port }, packet.clone(), trail.clone(), queue, log);
        }
        Ok(())
    }

    fn forward(
        &self,
        journey: u64,
        from: Endpoint,
        packet: Packet,
        trail: Vec<NodeId>,
        queue: &mut VecDeque<Work>,
        log: &mut RunLog,
    ) {
        log.transmissions += 1;
        match transmit(&self.fabric, &from) {
            Arrival::Switch(at) => queue.push_back(Work { journey, at, packet, trail }),
            Arrival::Host(host) => {
                let owns = self.fabric.host(&host).is_some_and(|h| h.mac == packet.ether_dst);
                if owns && !packet.is_discovery() {
                    log.deliveries.push(Delivery { journey, host, packet, trail });
                }
            }
            Arrival::Dropped => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::flow::{priority, FlowAction, Owner};
    use crate::dataplane::packet::FlowId;
    use crate::topo::fixtures;

    fn lldp_out(net: &Network, node: &str, port: u32) -> Injection {
        let ep = Endpoint::new(node, port);
        let mac = net.fabric().mac(&ep).unwrap();
        Injection::PacketOut(PacketOut::Port {
            switch: ep.node.clone(),
            port: ep.port,
            packet: Packet::discovery(ep.node.clone(), ep.port, mac),
        })
    }

    #[test]
    fn transmit_follows_real_link() {
        let t = fixtures::segment();
        assert_eq!(transmit(&t, &Endpoint::new("A", 2)), Arrival::Switch(Endpoint::new("C", 1)));
        assert_eq!(transmit(&t, &Endpoint::new("A", 3)), Arrival::Dropped);
    }

    #[test]
    fn lldp_reaches_controller_at_first_hop() {
        let mut net = Network::new(fixtures::segment());
        let inj = lldp_out(&net, "A", 2);
        let log = net.run(vec![inj], &mut Silent).unwrap();
        assert_eq!(log.packet_ins.len(), 1);
        let pi = &log.packet_ins[0].1;
        assert_eq!((pi.switch.as_str(), pi.in_port.get(), pi.table_miss), ("C", 1, true));
    }

    #[test]
    fn poison_entry_relays_lldp() {
        let mut net = Network::new(fixtures::segment());
        let a2 = net.fabric().mac(&Endpoint::new("A", 2)).unwrap();
        let e2 = FlowEntry::new(
            priority::POISON,
            FlowMatch::any().ether_src(a2),
            vec![FlowAction::Output(PortId::new(2))],
            Owner::Attacker,
        );
        net.install(&"C".into(), e2).unwrap();
        let inj = lldp_out(&net, "A", 2);
        let log = net.run(vec![inj], &mut Silent).unwrap();
        let pi = &log.packet_ins[0].1;
        assert_eq!((pi.switch.as_str(), pi.in_port.get()), ("B", 1));
    }

    #[test]
    fn data_delivery_records_trail() {
        let t = fixtures::motivating_example();
        let mut net = Network::new(t.clone());
        let h2 = t.host(&"H2".into()).unwrap().mac;
        let h1 = t.host(&"H1".into()).unwrap().mac;
        let route = |port: u32, in_port: u32| {
            FlowEntry::new(
                priority::ROUTE,
                FlowMatch::any().ether_dst(h2).in_port(PortId::new(in_port)),
                vec![FlowAction::Output(PortId::new(port))],
                Owner::Controller,
            )
        };
        net.install(&"A".into(), route(1, 3)).unwrap();
        net.install(&"D".into(), route(2, 1)).unwrap();
        net.install(&"E".into(), route(3, 2)).unwrap();
        let pkt = Packet::data(FlowId::from("f1"), h1, h2);
        let log = net.run(vec![Injection::FromHost { host: "H1".into(), packet: pkt }], &mut Silent).unwrap();
        assert_eq!(log.deliveries.len(), 1);
        let trail: Vec<&str> = log.deliveries[0].trail.iter().map(|n| n.as_str()).collect();
        assert_eq!(trail, ["A", "D", "E"]);
    }

    #[test]
    fn forwarding_loop_hits_hop_limit() {
        let t = fixtures::four_cycle();
        let mut net = Network::new(t);
        for n in ["A", "B", "C", "D"] {
            let entry = FlowEntry::new(
                priority::ROUTE,
                FlowMatch::any().in_port(PortId::new(2)),
                vec![FlowAction::Output(PortId::new(1))],
                Owner::Controller,
            );
            net.install(&n.into(), entry).unwrap();
            let entry = FlowEntry::new(
                priority::ROUTE,
                FlowMatch::any().in_port(PortId::new(1)),
                vec![FlowAction::Output(PortId::new(2))],
                Owner::Controller,
            );
            net.install(&n.into(), entry).unwrap();
        }
        let inj = lldp_out(&net, "A", 1);
        let log = net.run(vec![inj], &mut Silent).unwrap();
        assert!(matches!(log.faults[..], [Fault::HopLimit { .. }]));
    }

    #[test]
    fn journeys_are_distinct() {
        let mut net = Network::new(fixtures::segment());
        let a = lldp_out(&net, "A", 2);
        let b = lldp_out(&net, "B", 1);
        let log = net.run(vec![a, b], &mut Silent).unwrap();
        assert_eq!(log.journeys, vec![0, 1]);
        let log = net.run(vec![lldp_out(&net, "C", 1)], &mut Silent).unwrap();
        assert_eq!(log.journeys, vec![2]);
    }
}
