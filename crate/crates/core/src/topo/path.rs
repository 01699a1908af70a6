use std::collections::{BTreeMap, VecDeque};

use super::ids::{NodeId, PortId};
use super::model::Topology;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no path from `{0}` to `{1}`")]
    NoPath(NodeId, NodeId),
}

pub const UNREACHABLE: u32 = u32::MAX;

/// Index-based adjacency view of a topology.
///
/// Node indices follow the topology's node order, so "smallest index" is
/// "smallest `NodeId`". Neighbor lists are sorted by neighbor index.
#[derive(Debug, Clone)]
pub struct Graph {
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    adj: Vec<Vec<Adjacent>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacent {
    pub node: usize,
    pub local_port: PortId,
    pub far_port: PortId,
}

impl Graph {
    pub fn new(t: &Topology) -> Self {
        let ids: Vec<NodeId> = t.nodes().cloned().collect();
        let index: BTreeMap<NodeId, usize> = ids.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for link in t.links() {
            let [x, y] = link.endpoints();
            let (i, j) = (index[&x.node], index[&y.node]);
            adj[i].push(Adjacent { node: j, local_port: x.port, far_port: y.port });
            adj[j].push(Adjacent { node: i, local_port: y.port, far_port: x.port });
        }
        for list in &mut adj {
            list.sort_by_key(|a| a.node);
        }
        Graph { ids, index, adj }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &NodeId {
        &self.ids[i]
    }

    pub fn index_of(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn adjacent(&self, i: usize) -> &[Adjacent] {
        &self.adj[i]
    }

    /// Port on `i` facing `j`.
    pub fn port_towards(&self, i: usize, j: usize) -> Option<PortId> {
        self.adj[i].iter().find(|a| a.node == j).map(|a| a.local_port)
    }

    /// Hop distances from every node to `root`.
    pub fn distances_to(&self, root: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.len()];
        let mut queue = VecDeque::new();
        dist[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for a in &self.adj[u] {
                if dist[a.node] == UNREACHABLE {
                    dist[a.node] = dist[u] + 1;
                    queue.push_back(a.node);
                }
            }
        }
        dist
    }

    /// Next hop from `from` along the canonical shortest path whose
    /// distances-to-destination are `dist`.
    pub fn next_hop(&self, from: usize, dist: &[u32]) -> Option<usize> {
        let d = dist[from];
        if d == 0 || d == UNREACHABLE {
            return None;
        }
        self.adj[from].iter().find(|a| dist[a.node] == d - 1).map(|a| a.node)
    }

    /// Canonical shortest path: minimal hop count, and among those the one
    /// that always steps to the smallest neighbor still on a shortest path.
    pub fn route_with(&self, src: usize, dist: &[u32]) -> Option<Vec<usize>> {
        if dist[src] == UNREACHABLE {
            return None;
        }
        let mut path = Vec::with_capacity(dist[src] as usize + 1);
        let mut cur = src;
        path.push(cur);
        while let Some(next) = self.next_hop(cur, dist) {
            path.push(next);
            cur = next;
        }
        Some(path)
    }

    pub fn route(&self, src: usize, dst: usize) -> Option<Vec<usize>> {
        self.route_with(src, &self.distances_to(dst))
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for a in &self.adj[u] {
                    if !seen[a.node] {
                        seen[a.node] = true;
                        stack.push(a.node);
                    }
                }
            }
        }
        count
    }
}

/// True iff the switch graph has a single connected component.
/// The empty graph and the single-node graph are connected.
pub fn is_connected(t: &Topology) -> bool {
    component_count(t) <= 1
}

pub(crate) fn component_count(t: &Topology) -> usize {
    Graph::new(t).component_count()
}

/// Minimal-hop path from `src` to `dst`, ties broken towards the smallest
/// next `NodeId`.
pub fn shortest_path(t: &Topology, src: &NodeId, dst: &NodeId) -> Result<Vec<NodeId>, PathError> {
    let g = Graph::new(t);
    let s = g.index_of(src).ok_or_else(|| PathError::UnknownNode(src.clone()))?;
    let d = g.index_of(dst).ok_or_else(|| PathError::UnknownNode(dst.clone()))?;
    let path = g.route(s, d).ok_or_else(|| PathError::NoPath(src.clone(), dst.clone()))?;
    Ok(path.into_iter().map(|i| g.id(i).clone()).collect())
}
