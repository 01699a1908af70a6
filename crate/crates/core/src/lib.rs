//! Deterministic simulator of OpenFlow link discovery together with a
//! topology-poisoning pipeline: deceptive-topology planning, poisonous flow
//! entries that make the controller discover fabricated links, and gap
//! patching that keeps traffic flowing over the real network.

pub mod attack;
pub mod cluster;
pub mod controller;
pub mod dataplane;
pub mod gappatch;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod topo;
