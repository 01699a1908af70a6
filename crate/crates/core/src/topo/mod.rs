//! Switch graph model, port-based adjacency matrices, degree-preserving
//! rewiring and edge-overlap similarity.

mod dot;
pub mod fixtures;
mod ids;
mod json;
mod matrix;
mod model;
mod path;
pub mod random;
mod rewire;
mod similarity;

pub use dot::{to_dot, DotStyle};
pub use ids::{Endpoint, HostId, MacAddr, NodeId, ParseMacError, PortId};
pub use json::{HostDoc, LoadError, NodeDoc, PortDoc, TopologyDoc};
pub use matrix::{pa_matrix, pa_matrix_natural, PortAdjacencyMatrix};
pub use model::{DegreeSequence, Host, Link, Topology, TopologyError};
pub use path::{is_connected, shortest_path, Adjacent, Graph, PathError, UNREACHABLE};
pub use rewire::{
    apply_steps_unchecked, node_reallocation, node_reallocation_oriented, pairing_links, plan_reallocation,
    reallocation_steps, rewire, two_switch, Pairing, Reallocation, RewireError, TwoSwitchStep,
};
pub use similarity::{eo_similarity, Similarity};
