use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::link::DeceptiveLink;
use super::plan::{check_collisions, plan_on, Distances, PathChoice, PoisonMode, PoisonPlan, VlanAllocator};
use super::AttackError;
use crate::cluster::{Cluster, ClusterError};
use crate::dataplane::{priority, FlowEntry, FlowMod, Network, Owner, ETH_TYPE_LLDP};
use crate::topo::{Graph, NodeId, Topology};

/// Every directed plan realizing one target topology.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlanSet {
    pub mode: PoisonMode,
    pub plans: Vec<PoisonPlan>,
}

impl PlanSet {
    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.plans.iter().map(|p| p.entries.len()).sum()
    }

    /// Entries grouped per switch, in plan order, without duplicates.
    pub fn entries_by_switch(&self) -> BTreeMap<NodeId, Vec<FlowEntry>> {
        let mut out: BTreeMap<NodeId, Vec<FlowEntry>> = BTreeMap::new();
        for p in &self.plans {
            for e in &p.entries {
                let list = out.entry(e.switch.clone()).or_default();
                if !list.contains(&e.entry) {
                    list.push(e.entry.clone());
                }
            }
        }
        out
    }

    pub fn flow_mods(&self) -> BTreeMap<NodeId, Vec<FlowMod>> {
        self.entries_by_switch()
            .into_iter()
            .map(|(sw, es)| {
                let mods = es.into_iter().map(|entry| FlowMod::Add { switch: sw.clone(), entry }).collect();
                (sw, mods)
            })
            .collect()
    }

    pub fn plan_for(&self, link: &DeceptiveLink) -> Option<&PoisonPlan> {
        self.plans.iter().find(|p| &p.link == link)
    }
}

/// Checks that `target` can be realized over `real` by fabrication alone.
/// The node sets and degree sequences must agree and every port used by a
/// link in one must be used by a link in the other.
pub fn check_target(real: &Topology, target: &Topology) -> Result<(), AttackError> {
    if !real.nodes().eq(target.nodes()) {
        return Err(AttackError::NodeSetMismatch);
    }
    if real.degree_sequence() != target.degree_sequence() {
        return Err(AttackError::DegreeMismatch);
    }
    let (r, t) = (real.linked_endpoints(), target.linked_endpoints());
    if let Some(ep) = r.symmetric_difference(&t).next() {
        return Err(AttackError::EndpointMismatch(ep.clone()));
    }
    Ok(())
}

/// Both directions of every target link missing from `real`, links in
/// order and the forward direction first. Tunnel ids are assigned in the
/// same order.
pub fn plan_topology_poison(real: &Topology, target: &Topology, mode: PoisonMode) -> Result<PlanSet, AttackError> {
    check_target(real, target)?;
    let fabricated: Vec<DeceptiveLink> = target
        .links()
        .filter(|l| !real.has_link(l))
        .flat_map(|l| {
            let fwd = DeceptiveLink::from_link(l);
            let rev = fwd.reverse();
            [fwd, rev]
        })
        .collect();
    plan_links(real, &fabricated, mode)
}

/// Plans for the given directed links, sharing one tunnel id space.
pub fn plan_links(real: &Topology, links: &[DeceptiveLink], mode: PoisonMode) -> Result<PlanSet, AttackError> {
    let g = Graph::new(real);
    let mut d = Distances::new(&g);
    let mut vlans = VlanAllocator::new();
    let mut plans = Vec::with_capacity(links.len());
    for link in links {
        plans.push(plan_on(real, &mut d, link, &mut vlans, mode, PathChoice::Auto)?);
    }
    check_collisions(plans.iter().flat_map(|p| p.entries.iter().map(|e| (&e.switch, &e.entry))))?;
    Ok(PlanSet { mode, plans })
}

/// Reinstalls discovery entries that outrank the poisonous ones at the
/// bottom of the table.
pub fn lowering_mods(net: &Network) -> BTreeMap<NodeId, Vec<FlowMod>> {
    let mut out = BTreeMap::new();
    for s in net.switches() {
        let mut mods = Vec::new();
        for e in s.table() {
            if e.matcher.ether_type == Some(ETH_TYPE_LLDP)
                && e.priority >= priority::POISON
                && e.owner_tag != Owner::Attacker
            {
                mods.push(FlowMod::Delete { switch: s.id().clone(), priority: e.priority, matcher: e.matcher.clone() });
                let mut low = e.clone();
                low.priority = priority::TABLE_MISS;
                mods.push(FlowMod::Add { switch: s.id().clone(), entry: low });
            }
        }
        if !mods.is_empty() {
            out.insert(s.id().clone(), mods);
        }
    }
    out
}

/// Channel the attacker uses to reach the switches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionPath {
    /// Replicated datastore write; installed by the leader on the next tick.
    Datastore { author: String },
    /// Immediate install by a member connected to the switches.
    Direct { author: String },
}

impl InjectionPath {
    pub fn author(&self) -> &str {
        match self {
            InjectionPath::Datastore { author } | InjectionPath::Direct { author } => author,
        }
    }

    /// Sends `mods` per switch, in switch order.
    pub fn send(
        &self,
        cluster: &mut Cluster,
        net: &mut Network,
        mods: &BTreeMap<NodeId, Vec<FlowMod>>,
    ) -> Result<(), ClusterError> {
        for (sw, ms) in mods {
            match self {
                InjectionPath::Datastore { author } => {
                    cluster.datastore_write_mods(author, sw, ms.clone())?;
                }
                InjectionPath::Direct { author } => cluster.direct_install(author, net, ms)?,
            }
        }
        Ok(())
    }
}

/// Plans `target` against `real` and sends the entries, after lowering any
/// outranking discovery entries when `lower_pinned` is set.
pub fn apply_topology_poison(
    cluster: &mut Cluster,
    net: &mut Network,
    real: &Topology,
    target: &Topology,
    mode: PoisonMode,
    path: &InjectionPath,
    lower_pinned: bool,
) -> Result<PlanSet, AttackError> {
    let set = plan_topology_poison(real, target, mode)?;
    if lower_pinned {
        path.send(cluster, net, &lowering_mods(net))?;
    }
    path.send(cluster, net, &set.flow_mods())?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{fixtures, Link};

    #[test]
    fn identical_target_needs_nothing() {
        let t = fixtures::motivating_example();
        assert!(plan_topology_poison(&t, &t, PoisonMode::Vanilla).unwrap().is_empty());
    }

    #[test]
    fn motivating_target_has_three_pairs() {
        let set =
            plan_topology_poison(&fixtures::motivating_example(), &fixtures::motivating_target(), PoisonMode::Vanilla)
                .unwrap();
        let links: Vec<String> = set.plans.iter().map(|p| p.link.to_string()).collect();
        assert_eq!(links, ["A:1->2:C", "C:2->1:A", "A:2->1:B", "B:1->2:A", "C:1->1:D", "D:1->1:C"]);
        let vids: Vec<Option<u16>> = set.plans.iter().map(|p| p.vlan_id).collect();
        assert_eq!(vids, [Some(1), Some(2), None, None, None, None]);
        assert_eq!(set.entry_count(), 10);
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let real = fixtures::motivating_example();
        let mut target = real.clone();
        target.remove_link(&Link::between("A", 1, "D", 1)).unwrap();
        assert_eq!(plan_topology_poison(&real, &target, PoisonMode::Vanilla), Err(AttackError::DegreeMismatch));
    }

    #[test]
    fn port_rebinding_is_required() {
        let real =
            fixtures::explicit(&[("A", 2), ("B", 2), ("C", 2), ("D", 2)], &[("A", 1, "B", 1), ("C", 1, "D", 1)], &[]);
        let target = real.with_links(&[Link::between("A", 2, "C", 2), Link::between("B", 1, "D", 1)]).unwrap();
        assert!(matches!(
            plan_topology_poison(&real, &target, PoisonMode::Vanilla),
            Err(AttackError::EndpointMismatch(_))
        ));
    }

    #[test]
    fn pinned_entries_are_lowered() {
        let t = fixtures::segment();
        let mut net = Network::new(t.clone());
        let c = crate::controller::Controller::new(
            &t,
            crate::controller::ControllerConfig { pin_lldp: true, ..Default::default() },
        );
        c.connect(&mut net).unwrap();
        let mods = lowering_mods(&net);
        assert_eq!(mods.len(), 3);
        for (sw, ms) in &mods {
            for m in ms {
                net.apply_flow_mod(m).unwrap();
            }
            assert!(net.switch(sw).unwrap().table().iter().all(|e| e.priority == priority::TABLE_MISS));
        }
        assert!(lowering_mods(&net).is_empty());
    }
}
