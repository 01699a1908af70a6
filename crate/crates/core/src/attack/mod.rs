//! Poisonous entries that make discovery report fabricated links.

mod campaign;
mod link;
mod plan;

pub use campaign::{
    apply_topology_poison, check_target, lowering_mods, plan_links, plan_topology_poison, InjectionPath, PlanSet,
};
pub use link::{DeceptiveLink, ParseLinkError};
pub use plan::{
    check_collisions, compute_poison, compute_poison_with, discovery_src, plan_on, poison_reverse, relay_route,
    Distances, EntryKind, PathChoice, PlanEntry, PoisonMode, PoisonPlan, VlanAllocator,
};

use crate::cluster::ClusterError;
use crate::dataplane::FlowMatch;
use crate::topo::{Endpoint, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("invalid deceptive link: {0}")]
    InvalidLink(String),
    #[error("port {0} has no real peer")]
    NoRealPeer(Endpoint),
    #[error("no relay path from {0} to {1}")]
    NoPath(NodeId, NodeId),
    #[error("{0} cannot be relayed without passing its sink first")]
    InvalidChoice(DeceptiveLink),
    #[error("VLAN ids exhausted")]
    VlanExhausted,
    #[error("entries collide on {switch} at priority {priority}: {matcher:?}")]
    Collision { switch: NodeId, priority: u16, matcher: FlowMatch },
    #[error("target has a different switch set")]
    NodeSetMismatch,
    #[error("target has a different degree sequence")]
    DegreeMismatch,
    #[error("port {0} is linked in only one of the real and target topologies")]
    EndpointMismatch(Endpoint),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}
