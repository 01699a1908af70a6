use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::link::DeceptiveLink;
use super::AttackError;
use crate::controller::FINGERPRINT_MAC;
use crate::dataplane::{priority, FlowAction, FlowEntry, FlowMatch, Owner, VlanId};
use crate::topo::{Endpoint, Graph, MacAddr, NodeId, Topology, UNREACHABLE};

/// How discovery packets are told apart by the poisonous entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoisonMode {
    /// Every discovery packet carries its origin port's address.
    #[default]
    Vanilla,
    /// Discovery packets share one source address; entries key on the
    /// ingress port and every relay is tunneled.
    VlanInportSrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Hop,
    VStart,
    VBody,
    VEnd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    /// Shorter of the two relay shapes, ties to the direct one.
    #[default]
    Auto,
    ForceNoLoop,
    ForceLoopback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanEntry {
    pub switch: NodeId,
    pub kind: EntryKind,
    pub entry: FlowEntry,
}

/// Entries making the controller discover one directed fabricated link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoisonPlan {
    pub link: DeceptiveLink,
    pub mode: PoisonMode,
    /// Relay switches from the real peer of the source port onward.
    pub path: Vec<NodeId>,
    pub loopback: bool,
    pub vlan_id: Option<VlanId>,
    /// Real peer of the source port; where the relay starts.
    pub sub_src: Endpoint,
    /// Real peer of the sink port.
    pub sub_dst: Endpoint,
    pub entries: Vec<PlanEntry>,
}

impl PoisonPlan {
    /// Switches a packet crosses between leaving the source port and
    /// entering the sink port, in order.
    pub fn relay_nodes(&self) -> Vec<NodeId> {
        let mut out = self.path.clone();
        if self.loopback {
            out.push(self.sub_dst.node.clone());
        } else {
            out.pop();
        }
        out
    }

    /// Actions of the entry that first picks the packet up at `sub_src`.
    pub fn relay_actions(&self) -> &[FlowAction] {
        &self.entries[0].entry.actions
    }

    pub fn switches(&self) -> BTreeSet<NodeId> {
        self.entries.iter().map(|e| e.switch.clone()).collect()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }
}

/// Hands out tunnel ids from 1 upward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlanAllocator {
    next: VlanId,
}

impl Default for VlanAllocator {
    fn default() -> Self {
        VlanAllocator { next: 1 }
    }
}

impl VlanAllocator {
    pub const MAX: VlanId = 4094;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self) -> Result<VlanId, AttackError> {
        if self.next > Self::MAX {
            return Err(AttackError::VlanExhausted);
        }
        self.next += 1;
        Ok(self.next - 1)
    }

    pub fn peek(&self) -> VlanId {
        self.next
    }
}

/// Lazily computed BFS distance rows over a graph.
#[derive(Debug, Clone)]
pub struct Distances<'g> {
    g: Cow<'g, Graph>,
    rows: Vec<Option<Vec<u32>>>,
}

impl<'g> Distances<'g> {
    pub fn new(g: &'g Graph) -> Self {
        Distances { g: Cow::Borrowed(g), rows: vec![None; g.len()] }
    }

    /// Every row filled in advance.
    pub fn all(g: &'g Graph) -> Self {
        Distances { g: Cow::Borrowed(g), rows: (0..g.len()).map(|r| Some(g.distances_to(r))).collect() }
    }

    /// Owns its graph; every row filled in advance.
    pub fn owned(g: Graph) -> Distances<'static> {
        let rows = (0..g.len()).map(|r| Some(g.distances_to(r))).collect();
        Distances { g: Cow::Owned(g), rows }
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }

    /// Distance of every node to `root`.
    pub fn to(&mut self, root: usize) -> &[u32] {
        let Distances { g, rows } = self;
        rows[root].get_or_insert_with(|| g.distances_to(root))
    }

    pub fn between(&mut self, from: usize, to: usize) -> u32 {
        self.to(to)[from]
    }

    pub fn route(&mut self, from: usize, to: usize) -> Option<Vec<usize>> {
        self.to(to);
        let row = self.rows[to].as_deref().expect("filled");
        self.g.route_with(from, row)
    }
}

/// Relay path from `s` (real peer of the source port) to the sink side.
/// No-loop paths run to `t` (real peer of the sink) and end at `b`;
/// loopback paths end at `b` and bounce off `t`.
pub fn relay_route(d: &mut Distances, s: usize, t: usize, b: usize, choice: PathChoice) -> Option<(Vec<usize>, bool)> {
    let st = d.between(s, t);
    let sb = d.between(s, b);
    let loopback = match choice {
        PathChoice::Auto => st > sb,
        PathChoice::ForceNoLoop => false,
        PathChoice::ForceLoopback => true,
    };
    if loopback {
        if sb == UNREACHABLE {
            return None;
        }
        Some((d.route(s, b)?, true))
    } else {
        if st == UNREACHABLE {
            return None;
        }
        let mut p = d.route(s, t)?;
        p.push(b);
        Some((p, false))
    }
}

/// Source address the controller stamps on discovery leaving `ep`.
pub fn discovery_src(t: &Topology, mode: PoisonMode, ep: &Endpoint) -> Option<MacAddr> {
    match mode {
        PoisonMode::Vanilla => t.mac(ep),
        PoisonMode::VlanInportSrc => Some(FINGERPRINT_MAC),
    }
}

/// Plan for `link` against the real topology `t`.
pub fn compute_poison(
    t: &Topology,
    link: &DeceptiveLink,
    vlans: &mut VlanAllocator,
    mode: PoisonMode,
) -> Result<PoisonPlan, AttackError> {
    compute_poison_with(t, link, vlans, mode, PathChoice::Auto)
}

pub fn compute_poison_with(
    t: &Topology,
    link: &DeceptiveLink,
    vlans: &mut VlanAllocator,
    mode: PoisonMode,
    choice: PathChoice,
) -> Result<PoisonPlan, AttackError> {
    let g = Graph::new(t);
    let mut d = Distances::new(&g);
    plan_on(t, &mut d, link, vlans, mode, choice)
}

/// Plan for the opposite direction of `plan`'s link.
pub fn poison_reverse(t: &Topology, plan: &PoisonPlan, vlans: &mut VlanAllocator) -> Result<PoisonPlan, AttackError> {
    compute_poison(t, &plan.link.reverse(), vlans, plan.mode)
}

/// [`compute_poison_with`] reusing distance rows across calls.
pub fn plan_on(
    t: &Topology,
    d: &mut Distances,
    link: &DeceptiveLink,
    vlans: &mut VlanAllocator,
    mode: PoisonMode,
    choice: PathChoice,
) -> Result<PoisonPlan, AttackError> {
    link.validate(t).map_err(AttackError::InvalidLink)?;
    let source = link.source();
    let sink = link.sink();
    let sub_src = t.peer(&source).cloned().ok_or_else(|| AttackError::NoRealPeer(source.clone()))?;
    let sub_dst = t.peer(&sink).cloned().ok_or_else(|| AttackError::NoRealPeer(sink.clone()))?;
    let idx = |n: &NodeId| d.graph().index_of(n).expect("node of t");
    let (s, tt, a, b) = (idx(&sub_src.node), idx(&sub_dst.node), idx(&link.a), idx(&link.b));
    if choice == PathChoice::ForceNoLoop && s == b {
        return Err(AttackError::InvalidChoice(link.clone()));
    }
    let (path, loopback) =
        relay_route(d, s, tt, b, choice).ok_or_else(|| AttackError::NoPath(sub_src.node.clone(), link.b.clone()))?;
    let g = d.graph();

    let src_mac = discovery_src(t, mode, &source).expect("validated port");
    let start_match = match mode {
        PoisonMode::Vanilla => FlowMatch::any().ether_src(src_mac),
        PoisonMode::VlanInportSrc => FlowMatch::any().ether_src(src_mac).in_port(sub_src.port),
    };
    let n = path.len();
    let single_hop = mode == PoisonMode::Vanilla && !loopback && n == 2;
    let vid = if single_hop { None } else { Some(vlans.allocate()?) };
    let v = vid.unwrap_or_default();
    let out = |i: usize| -> FlowAction {
        if i == 0 && path[1] == a {
            FlowAction::OutputInPort
        } else {
            FlowAction::Output(g.port_towards(path[i], path[i + 1]).expect("adjacent on path"))
        }
    };
    let poison = |m: FlowMatch, acts: Vec<FlowAction>| FlowEntry::new(priority::POISON, m, acts, Owner::Attacker);
    let tunnel = |m: FlowMatch, acts: Vec<FlowAction>| FlowEntry::new(priority::TUNNEL, m, acts, Owner::Attacker);
    let on_vid = || FlowMatch::any().vlan(v);

    let mut entries = Vec::new();
    let mut push = |i: usize, kind: EntryKind, entry: FlowEntry| {
        entries.push(PlanEntry { switch: g.id(i).clone(), kind, entry });
    };
    for (i, &here) in path.iter().enumerate().take(n.saturating_sub(1)) {
        if i == 0 && single_hop {
            push(here, EntryKind::Hop, poison(start_match.clone(), vec![out(0)]));
        } else if i == 0 {
            push(here, EntryKind::VStart, poison(start_match.clone(), vec![FlowAction::PushVlan(v), out(0)]));
        } else if i == n - 2 && !loopback && mode == PoisonMode::Vanilla {
            push(here, EntryKind::VEnd, tunnel(on_vid(), vec![FlowAction::PopVlan, out(i)]));
        } else {
            push(here, EntryKind::VBody, tunnel(on_vid(), vec![out(i)]));
        }
    }
    if loopback {
        if n > 1 {
            push(b, EntryKind::VBody, tunnel(on_vid(), vec![FlowAction::Output(link.y)]));
        } else {
            let m = start_match.clone().in_port(sub_src.port);
            push(b, EntryKind::VStart, poison(m, vec![FlowAction::PushVlan(v), FlowAction::Output(link.y)]));
        }
        match mode {
            PoisonMode::Vanilla => {
                push(tt, EntryKind::VEnd, tunnel(on_vid(), vec![FlowAction::PopVlan, FlowAction::OutputInPort]));
            }
            PoisonMode::VlanInportSrc => {
                push(tt, EntryKind::VBody, tunnel(on_vid(), vec![FlowAction::OutputInPort]));
                let m = on_vid().in_port(link.y);
                let e = FlowEntry::new(
                    priority::TUNNEL + 1,
                    m,
                    vec![FlowAction::PopVlan, FlowAction::ToController],
                    Owner::Attacker,
                );
                push(b, EntryKind::VEnd, e);
            }
        }
    } else if mode == PoisonMode::VlanInportSrc {
        push(b, EntryKind::VEnd, tunnel(on_vid(), vec![FlowAction::PopVlan, FlowAction::ToController]));
    }
    check_collisions(entries.iter().map(|e| (&e.switch, &e.entry)))?;
    Ok(PoisonPlan {
        link: link.clone(),
        mode,
        path: path.iter().map(|&i| g.id(i).clone()).collect(),
        loopback,
        vlan_id: vid,
        sub_src,
        sub_dst,
        entries,
    })
}

/// Rejects two entries on one switch with the same priority and match but
/// different actions.
pub fn check_collisions<'a>(entries: impl IntoIterator<Item = (&'a NodeId, &'a FlowEntry)>) -> Result<(), AttackError> {
    let mut seen: BTreeMap<(&NodeId, u16, &FlowMatch), &[FlowAction]> = BTreeMap::new();
    for (sw, e) in entries {
        if let Some(prev) = seen.insert((sw, e.priority, &e.matcher), &e.actions) {
            if prev != e.actions.as_slice() {
                return Err(AttackError::Collision {
                    switch: sw.clone(),
                    priority: e.priority,
                    matcher: e.matcher.clone(),
                });
            }
        }
    }
    Ok(())
}
