use std::fmt;

use serde::{Deserialize, Serialize};

use crate::topo::{MacAddr, NodeId, PortId};

pub const ETH_TYPE_LLDP: u16 = 0x88cc;
pub const ETH_TYPE_IPV4: u16 = 0x0800;
/// Nearest-bridge multicast address carried by discovery packets.
pub const LLDP_MULTICAST: MacAddr = MacAddr([0x01, 0x80, 0xc2, 0x00, 0x00, 0x0e]);

pub type VlanId = u16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(String);

impl FlowId {
    pub fn new(id: impl Into<String>) -> Self {
        FlowId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FlowId {
    fn from(s: &str) -> Self {
        FlowId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// Origin of a discovery packet; nothing about the path it took.
    Discovery {
        origin_node: NodeId,
        origin_port: PortId,
    },
    Data {
        flow_id: FlowId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub ether_src: MacAddr,
    pub ether_dst: MacAddr,
    pub ether_type: u16,
    /// Outermost tag first.
    pub vlan_stack: Vec<VlanId>,
    pub payload: Payload,
}

impl Packet {
    pub fn discovery(origin_node: NodeId, origin_port: PortId, ether_src: MacAddr) -> Self {
        Packet {
            ether_src,
            ether_dst: LLDP_MULTICAST,
            ether_type: ETH_TYPE_LLDP,
            vlan_stack: Vec::new(),
            payload: Payload::Discovery { origin_node, origin_port },
        }
    }

    pub fn data(flow_id: FlowId, ether_src: MacAddr, ether_dst: MacAddr) -> Self {
        Packet {
            ether_src,
            ether_dst,
            ether_type: ETH_TYPE_IPV4,
            vlan_stack: Vec::new(),
            payload: Payload::Data { flow_id },
        }
    }

    pub fn outer_vlan(&self) -> Option<VlanId> {
        self.vlan_stack.first().copied()
    }

    pub fn is_discovery(&self) -> bool {
        matches!(self.payload, Payload::Discovery { .. })
    }
}
