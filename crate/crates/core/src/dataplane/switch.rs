use std::collections::BTreeMap;

use serde::Serialize;

use super::flow::{FlowAction, FlowEntry, FlowMatch, Owner};
use super::packet::Packet;
use crate::topo::{MacAddr, NodeId, PortId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum Fault {
    #[error("pop_vlan on an untagged packet at {switch} port {in_port}")]
    PopEmptyVlan { switch: NodeId, in_port: PortId },
    #[error("packet exceeded the hop limit at {switch}")]
    HopLimit { switch: NodeId },
}

/// Packet handed to the controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PacketIn {
    pub switch: NodeId,
    pub in_port: PortId,
    pub packet: Packet,
    /// Owner of the entry whose action sent the packet up.
    pub via: Owner,
    /// True when that entry was the table-miss entry.
    pub table_miss: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    Transmit { port: PortId, packet: Packet },
    PacketIn(PacketIn),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Switch {
    id: NodeId,
    ports: BTreeMap<PortId, MacAddr>,
    table: Vec<FlowEntry>,
}

impl Switch {
    /// New switch holding only the table-miss entry.
    pub fn new(id: NodeId, ports: BTreeMap<PortId, MacAddr>) -> Self {
        Switch { id, ports, table: vec![FlowEntry::table_miss()] }
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn ports(&self) -> &BTreeMap<PortId, MacAddr> {
        &self.ports
    }

    /// Entries in installation order.
    pub fn table(&self) -> &[FlowEntry] {
        &self.table
    }

    /// Adds `entry`; an entry with the same priority and match is replaced
    /// in place. The installed entry starts with a zero hit count.
    pub fn install_entry(&mut self, mut entry: FlowEntry) {
        entry.hit_count = 0;
        match self.table.iter_mut().find(|e| e.priority == entry.priority && e.matcher == entry.matcher) {
            Some(slot) => *slot = entry,
            None => self.table.push(entry),
        }
    }

    pub fn remove_entry(&mut self, priority: u16, matcher: &FlowMatch) -> Option<FlowEntry> {
        let idx = self.table.iter().position(|e| e.priority == priority && &e.matcher == matcher)?;
        Some(self.table.remove(idx))
    }

    pub fn remove_where(&mut self, mut pred: impl FnMut(&FlowEntry) -> bool) -> usize {
        let before = self.table.len();
        self.table.retain(|e| !pred(e));
        before - self.table.len()
    }

    pub fn reset_counters(&mut self) {
        for e in &mut self.table {
            e.hit_count = 0;
        }
    }

    fn lookup(&self, p: &Packet, in_port: PortId) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.table.iter().enumerate() {
            if e.matcher.matches(p, in_port) && best.is_none_or(|b| e.priority > self.table[b].priority) {
                best = Some(i);
            }
        }
        best
    }

    /// Highest-priority matching entry (earliest installed among equals).
    /// Counts the hit.
    pub fn match_packet(&mut self, p: &Packet, in_port: PortId) -> Option<&FlowEntry> {
        let idx = self.lookup(p, in_port)?;
        self.table[idx].hit_count += 1;
        Some(&self.table[idx])
    }

    pub fn apply_actions(&self, p: &Packet, in_port: PortId, actions: &[FlowAction]) -> Result<Vec<Emission>, Fault> {
        self.apply_with(p, in_port, actions, Owner::Controller, false)
    }

    fn apply_with(
        &self,
        p: &Packet,
        in_port: PortId,
        actions: &[FlowAction],
        via: Owner,
        table_miss: bool,
    ) -> Result<Vec<Emission>, Fault> {
        let mut pkt = p.clone();
        let mut out = Vec::new();
        for action in actions {
            match *action {
                FlowAction::Output(port) => out.push(Emission::Transmit { port, packet: pkt.clone() }),
                FlowAction::OutputInPort => out.push(Emission::Transmit { port: in_port, packet: pkt.clone() }),
                FlowAction::Flood => {
                    for &port in self.ports.keys().filter(|&&q| q != in_port) {
                        out.push(Emission::Transmit { port, packet: pkt.clone() });
                    }
                }
                FlowAction::ToController => out.push(Emission::PacketIn(PacketIn {
                    switch: self.id.clone(),
                    in_port,
                    packet: pkt.clone(),
                    via,
                    table_miss,
                })),
                FlowAction::PushVlan(id) => pkt.vlan_stack.insert(0, id),
                FlowAction::PopVlan => {
                    if pkt.vlan_stack.is_empty() {
                        return Err(Fault::PopEmptyVlan { switch: self.id.clone(), in_port });
                    }
                    pkt.vlan_stack.remove(0);
                }
            }
        }
        Ok(out)
    }

    /// Table lookup followed by the matched entry's actions. A packet that
    /// matches nothing (table-miss removed) is dropped.
    pub fn process(&mut self, p: &Packet, in_port: PortId) -> Result<Vec<Emission>, Fault> {
        let Some(entry) = self.match_packet(p, in_port) else {
            return Ok(Vec::new());
        };
        let (actions, owner, miss) = (entry.actions.clone(), entry.owner_tag, entry.is_table_miss());
        self.apply_with(p, in_port, &actions, owner, miss)
    }
}
