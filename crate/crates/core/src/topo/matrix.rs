use std::collections::BTreeSet;

use serde::Serialize;

use super::ids::{Endpoint, NodeId, PortId};
use super::model::{Link, Topology, TopologyError};

/// Port-based adjacency matrix: `A[i][j]` is the port on node `i` facing
/// node `j`, or 0 when they are not linked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortAdjacencyMatrix {
    order: Vec<NodeId>,
    cells: Vec<u32>,
}

impl PortAdjacencyMatrix {
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn size(&self) -> usize {
        self.order.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.cells[i * self.order.len() + j]
    }

    /// Cell lookup by node identifiers.
    pub fn at(&self, u: &NodeId, v: &NodeId) -> Option<u32> {
        let i = self.order.iter().position(|n| n == u)?;
        let j = self.order.iter().position(|n| n == v)?;
        Some(self.get(i, j))
    }

    pub fn nonzero_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.cells.chunks(self.order.len().max(1))
    }

    /// Rebuilds the topology using `template` for nodes, ports, MACs and hosts.
    pub fn to_topology(&self, template: &Topology) -> Result<Topology, TopologyError> {
        let wanted: BTreeSet<&NodeId> = self.order.iter().collect();
        if wanted.len() != template.node_count() || !template.nodes().all(|n| wanted.contains(n)) {
            return Err(TopologyError::NodeSetMismatch);
        }
        let n = self.order.len();
        let mut links = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (pij, pji) = (self.get(i, j), self.get(j, i));
                match (pij, pji) {
                    (0, 0) => {}
                    (0, _) | (_, 0) => {
                        return Err(TopologyError::AsymmetricMatrix(self.order[i].clone(), self.order[j].clone()))
                    }
                    _ => links.push(Link::new(
                        Endpoint { node: self.order[i].clone(), port: PortId::new(pij) },
                        Endpoint { node: self.order[j].clone(), port: PortId::new(pji) },
                    )),
                }
            }
        }
        template.with_links(&links)
    }
}

pub fn pa_matrix(t: &Topology, ordering: &[NodeId]) -> Result<PortAdjacencyMatrix, TopologyError> {
    let distinct: BTreeSet<&NodeId> = ordering.iter().collect();
    if distinct.len() != ordering.len()
        || ordering.len() != t.node_count()
        || !ordering.iter().all(|n| t.contains_node(n))
    {
        return Err(TopologyError::NotPermutation);
    }
    let n = ordering.len();
    let position = |node: &NodeId| ordering.iter().position(|o| o == node).expect("checked permutation");
    let mut cells = vec![0u32; n * n];
    for link in t.links() {
        let [x, y] = link.endpoints();
        let (i, j) = (position(&x.node), position(&y.node));
        cells[i * n + j] = x.port.get();
        cells[j * n + i] = y.port.get();
    }
    Ok(PortAdjacencyMatrix { order: ordering.to_vec(), cells })
}

/// Matrix using the topology's own node order.
pub fn pa_matrix_natural(t: &Topology) -> PortAdjacencyMatrix {
    let order: Vec<NodeId> = t.nodes().cloned().collect();
    pa_matrix(t, &order).expect("natural order is a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;

    #[test]
    fn segment_cells() {
        let t = fixtures::segment();
        let order: Vec<NodeId> = ["A", "B", "C"].iter().map(|s| NodeId::from(*s)).collect();
        let m = pa_matrix(&t, &order).unwrap();
        let (a, b, c) = (NodeId::from("A"), NodeId::from("B"), NodeId::from("C"));
        assert_eq!(m.at(&a, &c), Some(2));
        assert_eq!(m.at(&c, &a), Some(1));
        assert_eq!(m.at(&c, &b), Some(2));
        assert_eq!(m.at(&b, &c), Some(1));
        assert_eq!(m.at(&a, &b), Some(0));
    }

    #[test]
    fn no_links_zero_matrix() {
        let t = fixtures::segment().without_links();
        assert_eq!(pa_matrix_natural(&t).nonzero_count(), 0);
    }

    #[test]
    fn fattree_nonzeros() {
        assert_eq!(pa_matrix_natural(&fixtures::fattree()).nonzero_count(), 96);
    }

    #[test]
    fn ordering_must_be_permutation() {
        let t = fixtures::segment();
        let short: Vec<NodeId> = vec!["A".into(), "B".into()];
        assert_eq!(pa_matrix(&t, &short), Err(TopologyError::NotPermutation));
        let dup: Vec<NodeId> = vec!["A".into(), "A".into(), "B".into()];
        assert_eq!(pa_matrix(&t, &dup), Err(TopologyError::NotPermutation));
    }

    #[test]
    fn round_trip_with_custom_order() {
        let t = fixtures::chinanet();
        let mut order: Vec<NodeId> = t.nodes().cloned().collect();
        order.reverse();
        let m = pa_matrix(&t, &order).unwrap();
        assert_eq!(m.to_topology(&t).unwrap(), t);
    }
}
