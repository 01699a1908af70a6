//! Patching entries that carry data across the relays of fabricated links.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::{InjectionPath, PlanSet};
use crate::cluster::{Cluster, ClusterError};
use crate::controller::Route;
use crate::dataplane::{priority, FlowAction, FlowEntry, FlowId, FlowMatch, FlowMod, Network, Owner, VlanId};
use crate::topo::{Endpoint, NodeId, PortId};

/// Where data leaving a fabricated-link endpoint physically lands and how
/// the relay picks it up there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relay {
    pub switch: NodeId,
    pub in_port: PortId,
    pub vlan: Option<VlanId>,
    pub actions: Vec<FlowAction>,
}

/// Relays keyed by the egress endpoint of each directed fabricated link.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GapMaps {
    pub relays: BTreeMap<Endpoint, Relay>,
}

impl GapMaps {
    pub fn from_plans(set: &PlanSet) -> Self {
        let relays = set
            .plans
            .iter()
            .map(|p| {
                let relay = Relay {
                    switch: p.sub_src.node.clone(),
                    in_port: p.sub_src.port,
                    vlan: p.vlan_id,
                    actions: p.relay_actions().to_vec(),
                };
                (p.link.source(), relay)
            })
            .collect();
        GapMaps { relays }
    }

    pub fn vlan_by_endpoint(&self) -> BTreeMap<Endpoint, VlanId> {
        self.relays.iter().filter_map(|(ep, r)| r.vlan.map(|v| (ep.clone(), v))).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchEntry {
    pub switch: NodeId,
    pub entry: FlowEntry,
    /// Fabricated-link endpoint the patched route leaves through.
    pub via: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GapError {
    #[error("patch on {switch} conflicts with a route entry for {matcher:?}")]
    Conflict { switch: NodeId, matcher: FlowMatch },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Patch for one route entry, if it forwards into a fabricated link.
pub fn patch_for(maps: &GapMaps, switch: &NodeId, route: &FlowEntry) -> Option<PatchEntry> {
    let port = route.output_port()?;
    let dst = route.matcher.ether_dst?;
    let via = Endpoint { node: switch.clone(), port };
    let relay = maps.relays.get(&via)?;
    let entry = FlowEntry::new(
        priority::PATCH,
        FlowMatch::any().ether_dst(dst).in_port(relay.in_port),
        relay.actions.clone(),
        Owner::Patcher,
    );
    Some(PatchEntry { switch: relay.switch.clone(), entry, via })
}

/// Patches for observed route entries; one per distinct gap.
pub fn reactive_patch<'a>(
    maps: &GapMaps,
    observed: impl IntoIterator<Item = (&'a NodeId, &'a FlowEntry)>,
) -> Vec<PatchEntry> {
    let mut out: Vec<PatchEntry> = Vec::new();
    for (sw, e) in observed {
        if e.owner_tag != Owner::Controller || e.priority != priority::ROUTE {
            continue;
        }
        if let Some(p) = patch_for(maps, sw, e) {
            if !out.iter().any(|q| q.switch == p.switch && q.entry.same_rule(&p.entry)) {
                out.push(p);
            }
        }
    }
    out
}

/// Patches for routes predicted on the target topology.
pub fn proactive_patch(maps: &GapMaps, predicted: &[Route]) -> Vec<PatchEntry> {
    reactive_patch(maps, predicted.iter().flat_map(|r| r.entries.iter().map(|(sw, e)| (sw, e))))
}

/// Rejects patches that share a switch and match with a route entry (or
/// another patch) but act differently.
pub fn check_patches<'a>(
    routes: impl IntoIterator<Item = (&'a NodeId, &'a FlowEntry)>,
    patches: &[PatchEntry],
) -> Result<(), GapError> {
    let mut keyed: BTreeMap<(&NodeId, &FlowMatch), &[FlowAction]> = BTreeMap::new();
    for (sw, e) in routes {
        keyed.insert((sw, &e.matcher), &e.actions);
    }
    for p in patches {
        match keyed.insert((&p.switch, &p.entry.matcher), &p.entry.actions) {
            Some(prev) if prev != p.entry.actions.as_slice() => {
                return Err(GapError::Conflict { switch: p.switch.clone(), matcher: p.entry.matcher.clone() })
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn patch_mods(patches: &[PatchEntry]) -> BTreeMap<NodeId, Vec<FlowMod>> {
    let mut out: BTreeMap<NodeId, Vec<FlowMod>> = BTreeMap::new();
    for p in patches {
        out.entry(p.switch.clone())
            .or_default()
            .push(FlowMod::Add { switch: p.switch.clone(), entry: p.entry.clone() });
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchMode {
    /// Patches go out with the poison plans, from predicted routes.
    #[default]
    Proactive,
    /// Patches follow route entries observed on the switches.
    Reactive,
}

/// Watches installed routes after each tick and patches new gaps.
#[derive(Debug, Clone)]
pub struct Patcher {
    maps: GapMaps,
    path: InjectionPath,
    sent: Vec<PatchEntry>,
}

impl Patcher {
    pub fn new(maps: GapMaps, path: InjectionPath) -> Self {
        Patcher { maps, path, sent: Vec::new() }
    }

    pub fn maps(&self) -> &GapMaps {
        &self.maps
    }

    pub fn sent(&self) -> &[PatchEntry] {
        &self.sent
    }

    /// Records patches already sent some other way.
    pub fn mark_sent(&mut self, patches: &[PatchEntry]) {
        for p in patches {
            if !self.already_sent(p) {
                self.sent.push(p.clone());
            }
        }
    }

    fn already_sent(&self, p: &PatchEntry) -> bool {
        self.sent.iter().any(|q| q.switch == p.switch && q.entry.same_rule(&p.entry))
    }

    /// Patches gaps of the controller routes currently installed; returns
    /// the patches sent in this call.
    pub fn monitor(&mut self, cluster: &mut Cluster, net: &mut Network) -> Result<Vec<PatchEntry>, GapError> {
        let tables = net.tables();
        let observed = tables.iter().flat_map(|(sw, es)| es.iter().map(move |e| (sw, e)));
        let fresh: Vec<PatchEntry> =
            reactive_patch(&self.maps, observed).into_iter().filter(|p| !self.already_sent(p)).collect();
        if fresh.is_empty() {
            return Ok(fresh);
        }
        let routes = tables
            .iter()
            .flat_map(|(sw, es)| es.iter().filter(|e| e.owner_tag == Owner::Controller).map(move |e| (sw, e)));
        check_patches(routes, &fresh)?;
        self.path.send(cluster, net, &patch_mods(&fresh))?;
        self.mark_sent(&fresh);
        Ok(fresh)
    }
}

/// Patches grouped by the flows whose routes they serve.
pub fn patches_by_flow(maps: &GapMaps, routes: &[Route]) -> BTreeMap<FlowId, Vec<PatchEntry>> {
    routes.iter().map(|r| (r.flow.clone(), proactive_patch(maps, std::slice::from_ref(r)))).collect()
}
