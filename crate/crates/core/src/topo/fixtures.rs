//! Reference topologies used by tests, scenarios and the CLI.
//!
//! Hand-drawn examples use letters; the two planner fixtures use numeric ids.

use std::collections::BTreeMap;

use super::ids::{Endpoint, HostId, MacAddr, NodeId, PortId};
use super::model::{Link, Topology};

/// Builds a topology from explicitly numbered ports.
/// `nodes` lists `(id, port count)`; `hosts` lists `(host, node, port)`.
pub fn explicit(nodes: &[(&str, u32)], links: &[(&str, u32, &str, u32)], hosts: &[(&str, &str, u32)]) -> Topology {
    let mut t = Topology::new();
    let mut mac = 0u32;
    for (id, ports) in nodes {
        let node = NodeId::from(*id);
        t.add_node(node.clone()).expect("fixture node");
        for p in 1..=*ports {
            mac += 1;
            t.add_port(&node, PortId::new(p), MacAddr::from_index(0, mac)).expect("fixture port");
        }
    }
    for (a, x, b, y) in links {
        t.add_link(Link::between(*a, *x, *b, *y)).expect("fixture link");
    }
    for (i, (h, n, p)) in hosts.iter().enumerate() {
        t.add_host(HostId::from(*h), Endpoint::new(*n, *p), MacAddr::from_index(1, i as u32 + 1))
            .expect("fixture host");
    }
    t
}

/// Builds a topology from a node-pair list, numbering each node's ports by
/// ascending neighbor id. Nodes in `host_nodes` get one extra host port.
pub fn numbered(node_count: usize, pairs: &[(usize, usize)], host_nodes: &[usize]) -> Topology {
    let mut nbrs: BTreeMap<NodeId, Vec<NodeId>> = (0..node_count).map(|i| (NodeId::from(i), Vec::new())).collect();
    for &(u, v) in pairs {
        nbrs.get_mut(&NodeId::from(u)).expect("node in range").push(NodeId::from(v));
        nbrs.get_mut(&NodeId::from(v)).expect("node in range").push(NodeId::from(u));
    }
    let mut t = Topology::new();
    let mut mac = 0u32;
    let mut port_of: BTreeMap<(NodeId, NodeId), PortId> = BTreeMap::new();
    for (node, list) in &mut nbrs {
        list.sort();
        t.add_node(node.clone()).expect("fixture node");
        let extra = usize::from(host_nodes.iter().any(|&h| NodeId::from(h) == *node));
        for p in 1..=(list.len() + extra) {
            mac += 1;
            t.add_port(node, PortId::new(p as u32), MacAddr::from_index(0, mac)).expect("fixture port");
        }
        for (i, far) in list.iter().enumerate() {
            port_of.insert((node.clone(), far.clone()), PortId::new(i as u32 + 1));
        }
    }
    for &(u, v) in pairs {
        let (u, v) = (NodeId::from(u), NodeId::from(v));
        let a = Endpoint { node: u.clone(), port: port_of[&(u.clone(), v.clone())] };
        let b = Endpoint { node: v.clone(), port: port_of[&(v, u)] };
        t.add_link(Link::new(a, b)).expect("fixture link");
    }
    for (i, &h) in host_nodes.iter().enumerate() {
        let node = NodeId::from(h);
        let port = PortId::new(nbrs[&node].len() as u32 + 1);
        t.add_host(HostId::new(format!("h{i}")), Endpoint { node, port }, MacAddr::from_index(1, i as u32 + 1))
            .expect("fixture host");
    }
    t
}

/// `A2-1C2-1B`.
pub fn segment() -> Topology {
    explicit(&[("A", 3), ("B", 3), ("C", 3)], &[("A", 2, "C", 1), ("C", 2, "B", 1)], &[])
}

/// `A1-1B, B2-1C, C2-1D, D2-2A`.
pub fn four_cycle() -> Topology {
    explicit(
        &[("A", 2), ("B", 2), ("C", 2), ("D", 2)],
        &[("A", 1, "B", 1), ("B", 2, "C", 1), ("C", 2, "D", 1), ("D", 2, "A", 2)],
        &[],
    )
}

const MOTIVATING_NODES: [(&str, u32); 5] = [("A", 3), ("B", 2), ("C", 3), ("D", 2), ("E", 3)];
const MOTIVATING_HOSTS: [(&str, &str, u32); 3] = [("H1", "A", 3), ("H2", "E", 3), ("H3", "C", 3)];

/// Five-switch ring `A2-1C2-1B2-1E2-2D1-1A` with hosts H1@A3, H2@E3, H3@C3.
pub fn motivating_example() -> Topology {
    explicit(
        &MOTIVATING_NODES,
        &[("A", 1, "D", 1), ("A", 2, "C", 1), ("C", 2, "B", 1), ("B", 2, "E", 1), ("D", 2, "E", 2)],
        &MOTIVATING_HOSTS,
    )
}

/// The deceptive view for [`motivating_example`]: A2-1B, A1-2C, C1-1D
/// replace A2-1C, C2-1B, A1-1D.
pub fn motivating_target() -> Topology {
    explicit(
        &MOTIVATING_NODES,
        &[("A", 2, "B", 1), ("A", 1, "C", 2), ("C", 1, "D", 1), ("B", 2, "E", 1), ("D", 2, "E", 2)],
        &MOTIVATING_HOSTS,
    )
}

/// Relay selection example where C and D are adjacent, so a deceptive
/// `A1->2B` can be relayed C, D, B without reflection.
pub fn path_selection() -> Topology {
    explicit(
        &[("A", 3), ("B", 3), ("C", 3), ("D", 3)],
        &[("A", 1, "C", 1), ("C", 2, "B", 1), ("B", 2, "D", 2), ("C", 3, "D", 3)],
        &[],
    )
}

/// Variant of [`path_selection`] without the C-D link: reaching `(B, 2)`
/// from C needs the reflect-at-D relay.
pub fn path_selection_loopback() -> Topology {
    explicit(
        &[("A", 3), ("B", 3), ("C", 3), ("D", 3)],
        &[("A", 1, "C", 1), ("C", 2, "B", 1), ("B", 2, "D", 2), ("D", 1, "A", 2)],
        &[],
    )
}

/// k=4 fat tree with its 16 end hosts modeled as leaf switches:
/// cores 0-3, aggregation 4-11, edge 12-19, leaves 20-35 (36 nodes, 48 links).
/// Each leaf carries one host `h0`..`h15`.
pub fn fattree() -> Topology {
    let mut pairs = Vec::new();
    for pod in 0..4 {
        let (agg0, agg1) = (4 + 2 * pod, 5 + 2 * pod);
        let (edge0, edge1) = (12 + 2 * pod, 13 + 2 * pod);
        pairs.extend([(0, agg0), (1, agg0), (2, agg1), (3, agg1)]);
        pairs.extend([(agg0, edge0), (agg0, edge1), (agg1, edge0), (agg1, edge1)]);
    }
    for edge in 12..20 {
        let first_leaf = 20 + 2 * (edge - 12);
        pairs.extend([(edge, first_leaf), (edge, first_leaf + 1)]);
    }
    let leaves: Vec<usize> = (20..36).collect();
    numbered(36, &pairs, &leaves)
}

/// Backbone in the shape of a national carrier network: four meshed hubs
/// (8, 39, 2, 17), dual-homed regional nodes, stubs and short chains.
/// 42 nodes, 66 links, node 8 has degree 20. Every node carries one host.
pub fn chinanet() -> Topology {
    let mut pairs = vec![(8, 39), (8, 2), (8, 17), (39, 2), (39, 17), (2, 17)];
    for n in [0, 1, 3, 4, 5, 6, 7, 9] {
        pairs.extend([(n, 8), (n, 39)]);
    }
    for n in [10, 11, 12] {
        pairs.extend([(n, 8), (n, 2)]);
    }
    for n in [13, 14] {
        pairs.extend([(n, 8), (n, 17)]);
    }
    for n in [15, 16, 18, 19] {
        pairs.push((n, 8));
    }
    for n in [20, 21] {
        pairs.extend([(n, 39), (n, 2)]);
    }
    pairs.extend([(22, 39), (22, 17)]);
    for n in [23, 24] {
        pairs.push((n, 2));
    }
    for n in [26, 27, 28] {
        pairs.push((n, 17));
    }
    pairs.extend([
        (15, 25),
        (16, 29),
        (18, 30),
        (19, 31),
        (23, 32),
        (24, 33),
        (26, 34),
        (27, 35),
        (28, 36),
        (29, 37),
        (30, 38),
        (31, 40),
        (32, 41),
    ]);
    pairs.extend([(0, 1), (3, 4), (10, 20), (13, 22), (34, 35), (37, 38)]);
    let all: Vec<usize> = (0..42).collect();
    numbered(42, &pairs, &all)
}

/// Looks up a bundled fixture by name.
pub fn by_name(name: &str) -> Option<Topology> {
    Some(match name {
        "segment" => segment(),
        "four-cycle" => four_cycle(),
        "motivating" => motivating_example(),
        "motivating-target" => motivating_target(),
        "path-selection" => path_selection(),
        "path-selection-loopback" => path_selection_loopback(),
        "fattree" => fattree(),
        "chinanet" => chinanet(),
        _ => return None,
    })
}

pub const FIXTURE_NAMES: [&str; 8] = [
    "segment",
    "four-cycle",
    "motivating",
    "motivating-target",
    "path-selection",
    "path-selection-loopback",
    "fattree",
    "chinanet",
];
