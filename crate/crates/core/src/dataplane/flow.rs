use std::fmt;

use serde::{Deserialize, Serialize};

use super::packet::{Packet, VlanId};
use crate::topo::{MacAddr, PortId};

/// Priority bands shared by the controller, the attacker and the patcher.
pub mod priority {
    pub const TABLE_MISS: u16 = 0;
    /// Entries matching on the discovery source address: just above table-miss.
    pub const POISON: u16 = 1;
    /// Proactive or reactive routing entries.
    pub const ROUTE: u16 = 100;
    /// Gap patches share the routing band.
    pub const PATCH: u16 = ROUTE;
    /// VLAN-tunnel entries. They only see tagged packets, which nothing but
    /// tunnels produce, so they sit above routing to keep tunnels sealed.
    pub const TUNNEL: u16 = 200;
    /// Max-priority discovery entry some controllers pre-install.
    pub const LLDP_PINNED: u16 = u16::MAX;
}

/// Match fields; `None` is a wildcard.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ether_src: Option<MacAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ether_dst: Option<MacAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ether_type: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_port: Option<PortId>,
    /// Compared against the outermost tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlan_id: Option<VlanId>,
}

impl FlowMatch {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn ether_src(mut self, mac: MacAddr) -> Self {
        self.ether_src = Some(mac);
        self
    }

    pub fn ether_dst(mut self, mac: MacAddr) -> Self {
        self.ether_dst = Some(mac);
        self
    }

    pub fn ether_type(mut self, t: u16) -> Self {
        self.ether_type = Some(t);
        self
    }

    pub fn in_port(mut self, port: PortId) -> Self {
        self.in_port = Some(port);
        self
    }

    pub fn vlan(mut self, id: VlanId) -> Self {
        self.vlan_id = Some(id);
        self
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn matches(&self, p: &Packet, in_port: PortId) -> bool {
        self.ether_src.is_none_or(|m| m == p.ether_src)
            && self.ether_dst.is_none_or(|m| m == p.ether_dst)
            && self.ether_type.is_none_or(|t| t == p.ether_type)
            && self.in_port.is_none_or(|q| q == in_port)
            && self.vlan_id.is_none_or(|v| p.outer_vlan() == Some(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowAction {
    Output(PortId),
    OutputInPort,
    ToController,
    Flood,
    PushVlan(VlanId),
    PopVlan,
}

impl fmt::Display for FlowAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowAction::Output(p) => write!(f, "output:{p}"),
            FlowAction::OutputInPort => f.write_str("output:in_port"),
            FlowAction::ToController => f.write_str("to_controller"),
            FlowAction::Flood => f.write_str("flood"),
            FlowAction::PushVlan(v) => write!(f, "push_vlan:{v}"),
            FlowAction::PopVlan => f.write_str("pop_vlan"),
        }
    }
}

/// Who asked for an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Controller,
    Attacker,
    Patcher,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub priority: u16,
    #[serde(rename = "match")]
    pub matcher: FlowMatch,
    pub actions: Vec<FlowAction>,
    #[serde(default)]
    pub hit_count: u64,
    pub owner_tag: Owner,
}

impl FlowEntry {
    pub fn new(priority: u16, matcher: FlowMatch, actions: Vec<FlowAction>, owner_tag: Owner) -> Self {
        FlowEntry { priority, matcher, actions, hit_count: 0, owner_tag }
    }

    pub fn table_miss() -> Self {
        FlowEntry::new(priority::TABLE_MISS, FlowMatch::any(), vec![FlowAction::ToController], Owner::Controller)
    }

    pub fn is_table_miss(&self) -> bool {
        self.priority == priority::TABLE_MISS && self.matcher.is_empty() && self.actions == [FlowAction::ToController]
    }

    /// Same priority, match and actions; ignores counters and owner.
    pub fn same_rule(&self, other: &FlowEntry) -> bool {
        self.priority == other.priority && self.matcher == other.matcher && self.actions == other.actions
    }

    pub fn output_port(&self) -> Option<PortId> {
        self.actions.iter().find_map(|a| match a {
            FlowAction::Output(p) => Some(*p),
            _ => None,
        })
    }
}
