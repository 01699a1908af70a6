//! OpenFlow-style switches, packets and the network engine.

mod flow;
mod network;
mod packet;
mod switch;

pub use flow::{priority, FlowAction, FlowEntry, FlowMatch, Owner};
pub use network::{
    transmit, Arrival, Delivery, FlowMod, Injection, NetError, Network, PacketInHandler, PacketOut, Reply, RunLog,
    Silent,
};
pub use packet::{FlowId, Packet, Payload, VlanId, ETH_TYPE_IPV4, ETH_TYPE_LLDP, LLDP_MULTICAST};
pub use switch::{Emission, Fault, PacketIn, Switch};
