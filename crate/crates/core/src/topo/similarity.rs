use std::fmt;

use serde::Serialize;

use super::model::{Topology, TopologyError};

/// Edge-overlap ratio `shared / total`, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Similarity {
    pub shared: usize,
    pub total: usize,
}

impl Similarity {
    /// An empty reference edge set counts as fully similar.
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.shared as f64 / self.total as f64
        }
    }

    pub fn at_least(&self, threshold: f64) -> bool {
        self.ratio() >= threshold
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.shared, self.total)
    }
}

/// `|E ∩ E'| / |E|` with edges compared including both ports.
pub fn eo_similarity(g: &Topology, g2: &Topology) -> Result<Similarity, TopologyError> {
    if !g.same_nodes(g2) {
        return Err(TopologyError::NodeSetMismatch);
    }
    let shared = g.link_set().intersection(g2.link_set()).count();
    Ok(Similarity { shared, total: g.link_count() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{fixtures, two_switch, Link, Pairing};

    #[test]
    fn identical_is_one() {
        let t = fixtures::fattree();
        let s = eo_similarity(&t, &t).unwrap();
        assert_eq!(s, Similarity { shared: 48, total: 48 });
        assert_eq!(s.ratio(), 1.0);
    }

    #[test]
    fn one_two_switch_costs_two_links() {
        let t = fixtures::four_cycle();
        let t2 = two_switch(&t, &Link::between("A", 1, "B", 1), &Link::between("C", 2, "D", 1), Pairing::AcBd).unwrap();
        assert_eq!(eo_similarity(&t, &t2).unwrap(), Similarity { shared: 2, total: 4 });
    }

    #[test]
    fn port_change_counts_as_different_edge() {
        let t = fixtures::segment();
        let mut moved = t.clone();
        moved.remove_link(&Link::between("A", 2, "C", 1)).unwrap();
        moved.add_link(Link::between("A", 3, "C", 1)).unwrap();
        assert_eq!(eo_similarity(&t, &moved).unwrap().shared, 1);
    }

    #[test]
    fn node_sets_must_match() {
        assert_eq!(eo_similarity(&fixtures::segment(), &fixtures::four_cycle()), Err(TopologyError::NodeSetMismatch));
    }
}
