//! Degree-preserving rewiring actions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ids::{Endpoint, NodeId};
use super::model::{Link, Topology, TopologyError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewireError {
    #[error("both selected links are the same link")]
    SameLink,
    #[error("link {0} does not exist")]
    MissingLink(Link),
    #[error("new links must reuse exactly the freed endpoints")]
    PortReuse,
    #[error("link would connect {0} to itself")]
    SamePortLoop(Endpoint),
    #[error("link would connect node `{0}` to itself")]
    SelfLoop(NodeId),
    #[error("nodes `{0}` and `{1}` would be linked twice")]
    DuplicateLink(NodeId, NodeId),
    #[error("rewiring recreates the removed links")]
    NoChange,
    #[error("node `{0}` has degree {1}, reallocation needs degree 2")]
    NotDegreeTwo(NodeId, usize),
    #[error("target link {0} touches the reallocated node")]
    TargetTouchesNode(Link),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How the four endpoints freed by removing `e1 = (a, b)` and `e2 = (c, d)`
/// are re-paired. `AbCd` restores the original links and is always rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    AbCd,
    AcBd,
    AdBc,
}

/// One 2-switch expressed as the links it removes and adds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoSwitchStep {
    pub removed: [Link; 2],
    pub added: [Link; 2],
}

pub fn pairing_links(e1: &Link, e2: &Link, pairing: Pairing) -> [Link; 2] {
    let (a, b) = (e1.first().clone(), e1.second().clone());
    let (c, d) = (e2.first().clone(), e2.second().clone());
    match pairing {
        Pairing::AbCd => [Link::new(a, b), Link::new(c, d)],
        Pairing::AcBd => [Link::new(a, c), Link::new(b, d)],
        Pairing::AdBc => [Link::new(a, d), Link::new(b, c)],
    }
}

/// Removes `e1` and `e2` and reconnects their endpoints per `pairing`.
pub fn two_switch(t: &Topology, e1: &Link, e2: &Link, pairing: Pairing) -> Result<Topology, RewireError> {
    rewire(t, &[e1.clone(), e2.clone()], &pairing_links(e1, e2, pairing))
}

/// Replaces `removed` with `added`, which must reuse exactly the freed
/// endpoints. Rejects self links, duplicate links and no-op rewirings.
pub fn rewire(t: &Topology, removed: &[Link], added: &[Link]) -> Result<Topology, RewireError> {
    let removed_set: BTreeSet<&Link> = removed.iter().collect();
    if removed_set.len() != removed.len() {
        return Err(RewireError::SameLink);
    }
    for link in removed {
        if !t.has_link(link) {
            return Err(RewireError::MissingLink(link.clone()));
        }
    }
    for link in added {
        let [x, y] = link.endpoints();
        if x == y {
            return Err(RewireError::SamePortLoop(x.clone()));
        }
    }
    let freed: BTreeSet<&Endpoint> = removed.iter().flat_map(|l| l.endpoints()).collect();
    let mut reused: Vec<&Endpoint> = added.iter().flat_map(|l| l.endpoints()).collect();
    reused.sort();
    reused.dedup();
    if reused.len() != 2 * added.len() || reused.len() != freed.len() || !reused.iter().all(|e| freed.contains(e)) {
        return Err(RewireError::PortReuse);
    }
    for link in added {
        let [x, y] = link.endpoints();
        if x.node == y.node {
            return Err(RewireError::SelfLoop(x.node.clone()));
        }
    }
    let added_set: BTreeSet<&Link> = added.iter().collect();
    if added_set == removed_set {
        return Err(RewireError::NoChange);
    }
    let mut out = t.clone();
    for link in removed {
        out.remove_link(link)?;
    }
    for link in added {
        match out.add_link(link.clone()) {
            Ok(()) => {}
            Err(TopologyError::DuplicateLink(u, v)) => return Err(RewireError::DuplicateLink(u, v)),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// A degree-2 splice: the links removed and added by moving `node` into `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reallocation {
    pub node: NodeId,
    pub removed: [Link; 3],
    pub added: [Link; 3],
}

/// Computes the splice of `c` into `target`. By default `c`'s lower port
/// faces the target's first endpoint; `flipped` swaps that.
pub fn plan_reallocation(t: &Topology, c: &NodeId, target: &Link, flipped: bool) -> Result<Reallocation, RewireError> {
    if !t.contains_node(c) {
        return Err(RewireError::UnknownNode(c.clone()));
    }
    if target.touches(c) {
        return Err(RewireError::TargetTouchesNode(target.clone()));
    }
    if !t.has_link(target) {
        return Err(RewireError::MissingLink(target.clone()));
    }
    let around = t.neighbors(c);
    if around.len() != 2 {
        return Err(RewireError::NotDegreeTwo(c.clone(), around.len()));
    }
    let c1 = Endpoint { node: c.clone(), port: around[0].0 };
    let c2 = Endpoint { node: c.clone(), port: around[1].0 };
    let (a, b) = (around[0].1.clone(), around[1].1.clone());
    let (u, v) = if flipped {
        (target.second().clone(), target.first().clone())
    } else {
        (target.first().clone(), target.second().clone())
    };
    Ok(Reallocation {
        node: c.clone(),
        removed: [Link::new(a.clone(), c1.clone()), Link::new(c2.clone(), b.clone()), target.clone()],
        added: [Link::new(a, b), Link::new(c1, u), Link::new(c2, v)],
    })
}

/// Splices degree-2 node `c` into `target`; `c`'s former neighbors are joined.
pub fn node_reallocation(t: &Topology, c: &NodeId, target: &Link) -> Result<Topology, RewireError> {
    node_reallocation_oriented(t, c, target, false)
}

pub fn node_reallocation_oriented(
    t: &Topology,
    c: &NodeId,
    target: &Link,
    flipped: bool,
) -> Result<Topology, RewireError> {
    let r = plan_reallocation(t, c, target, flipped)?;
    rewire(t, &r.removed, &r.added)
}

/// Expresses a reallocation as consecutive 2-switches. Intermediate link
/// sets need not be valid topologies; only the composition is meaningful.
pub fn reallocation_steps(r: &Reallocation) -> Vec<TwoSwitchStep> {
    let [a_c1, c2_b, target] = &r.removed;
    let [a_b, c1_u, c2_v] = &r.added;
    let a = a_c1.opposite(a_c1.end_at(&r.node).expect("touches node")).expect("endpoint").clone();
    let v = c2_v.opposite(c2_v.end_at(&r.node).expect("touches node")).expect("endpoint").clone();
    let a_v = Link::new(a, v);
    vec![
        TwoSwitchStep { removed: [a_c1.clone(), target.clone()], added: [a_v.clone(), c1_u.clone()] },
        TwoSwitchStep { removed: [a_v, c2_b.clone()], added: [a_b.clone(), c2_v.clone()] },
    ]
}

/// Applies steps to a bare link set without validation.
pub fn apply_steps_unchecked(links: &BTreeSet<Link>, steps: &[TwoSwitchStep]) -> BTreeSet<Link> {
    let mut out = links.clone();
    for step in steps {
        for l in &step.removed {
            out.remove(l);
        }
        for l in &step.added {
            out.insert(l.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{fixtures, pa_matrix};

    #[test]
    fn four_cycle_switch_keeps_degrees() {
        let t = fixtures::four_cycle();
        let e1 = Link::between("A", 1, "B", 1);
        let e2 = Link::between("C", 2, "D", 1);
        let out = rewire(&t, &[e1, e2], &[Link::between("A", 1, "C", 2), Link::between("B", 1, "D", 1)]).unwrap();
        assert_eq!(out.degree_sequence(), t.degree_sequence());
        assert_eq!(out.degree_sequence().as_slice(), &[2, 2, 2, 2]);
        assert_eq!(out.link_count(), 4);
    }

    #[test]
    fn recreating_original_is_rejected() {
        let t = fixtures::four_cycle();
        let e1 = Link::between("A", 1, "B", 1);
        let e2 = Link::between("C", 2, "D", 1);
        assert_eq!(two_switch(&t, &e1, &e2, Pairing::AbCd), Err(RewireError::NoChange));
    }

    #[test]
    fn rejections_carry_reasons() {
        let t = fixtures::four_cycle();
        let ab = Link::between("A", 1, "B", 1);
        let bc = Link::between("B", 2, "C", 1);
        // Adjacent links: pairing B with B is a self loop.
        assert_eq!(two_switch(&t, &ab, &bc, Pairing::AdBc), Err(RewireError::SelfLoop("B".into())));
        // A1 used twice while B2 is left dangling.
        assert_eq!(
            rewire(&t, &[ab.clone(), bc.clone()], &[Link::between("A", 1, "B", 1), Link::between("A", 1, "C", 1)]),
            Err(RewireError::PortReuse)
        );
        assert_eq!(two_switch(&t, &ab, &ab, Pairing::AcBd), Err(RewireError::SameLink));
        let cd = Link::between("C", 2, "D", 1);
        let da = Link::between("D", 2, "A", 2);
        // Re-pairing two opposite links of a 4-cycle can land on an existing link.
        let err = two_switch(&t, &bc, &da, Pairing::AcBd).unwrap_err();
        assert!(matches!(err, RewireError::DuplicateLink(..)), "{err:?}");
        let same_port = rewire(
            &t,
            &[ab.clone(), cd.clone()],
            &[Link::new(Endpoint::new("A", 1), Endpoint::new("A", 1)), Link::between("B", 1, "C", 2)],
        );
        assert_eq!(same_port, Err(RewireError::SamePortLoop(Endpoint::new("A", 1))));
    }

    #[test]
    fn reallocation_moves_c_between_a_and_d() {
        let t = fixtures::motivating_example();
        let out = node_reallocation(&t, &"C".into(), &Link::between("A", 1, "D", 1)).unwrap();
        let expected: BTreeSet<Link> = [
            Link::between("A", 2, "B", 1),
            Link::between("A", 1, "C", 1),
            Link::between("C", 2, "D", 1),
            Link::between("B", 2, "E", 1),
            Link::between("D", 2, "E", 2),
        ]
        .into_iter()
        .collect();
        assert_eq!(out.link_set(), &expected);
        let order: Vec<NodeId> = out.nodes().cloned().collect();
        let before = pa_matrix(&t, &order).unwrap();
        let after = pa_matrix(&out, &order).unwrap();
        let cell = |m: &crate::topo::PortAdjacencyMatrix, u: &str, v: &str| m.at(&u.into(), &v.into()).unwrap();
        assert_eq!((cell(&before, "A", "C"), cell(&after, "A", "C")), (2, 1));
        assert_eq!((cell(&before, "C", "B"), cell(&after, "C", "B")), (2, 0));
        assert_eq!((cell(&before, "A", "D"), cell(&after, "A", "D")), (1, 0));
        assert_eq!((cell(&before, "A", "B"), cell(&after, "A", "B")), (0, 2));
        assert_eq!((cell(&before, "C", "D"), cell(&after, "C", "D")), (0, 2));
    }

    #[test]
    fn reallocating_back_restores() {
        let t = fixtures::motivating_example();
        let out = node_reallocation(&t, &"C".into(), &Link::between("A", 1, "D", 1)).unwrap();
        let back = node_reallocation(&out, &"C".into(), &Link::between("A", 2, "B", 1)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn reallocation_equals_composed_two_switches() {
        let t = fixtures::motivating_example();
        let target = Link::between("A", 1, "D", 1);
        for flipped in [false, true] {
            let r = plan_reallocation(&t, &"C".into(), &target, flipped).unwrap();
            let steps = reallocation_steps(&r);
            let composed = apply_steps_unchecked(t.link_set(), &steps);
            let direct = node_reallocation_oriented(&t, &"C".into(), &target, flipped).unwrap();
            assert_eq!(&composed, direct.link_set());
        }
    }

    #[test]
    fn reallocation_rejects_touching_target_and_wrong_degree() {
        let t = fixtures::motivating_example();
        assert!(matches!(
            node_reallocation(&t, &"C".into(), &Link::between("A", 2, "C", 1)),
            Err(RewireError::TargetTouchesNode(_))
        ));
        let tree = fixtures::fattree();
        let core = tree.link_set().iter().find(|l| !l.touches(&"0".into())).unwrap().clone();
        assert_eq!(node_reallocation(&tree, &"0".into(), &core), Err(RewireError::NotDegreeTwo("0".into(), 4)));
    }
}
