use std::collections::BTreeMap;

use serde::Serialize;

use crate::topo::{Endpoint, Link, Topology};

/// Directed links reported by discovery, each stamped with the round that
/// last confirmed it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkStore {
    links: BTreeMap<Endpoint, Stamped>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamped {
    pub to: Endpoint,
    pub round: u64,
}

impl LinkStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `from -> to`. Returns the receiver previously recorded for
    /// `from` in this same round when it differs.
    pub fn confirm(&mut self, from: Endpoint, to: Endpoint, round: u64) -> Option<Endpoint> {
        let prev = self.links.insert(from, Stamped { to: to.clone(), round });
        prev.filter(|p| p.round == round && p.to != to).map(|p| p.to)
    }

    /// Drops links not confirmed in `round`; returns them.
    pub fn evict_before(&mut self, round: u64) -> Vec<(Endpoint, Endpoint)> {
        let stale: Vec<Endpoint> = self.links.iter().filter(|(_, s)| s.round < round).map(|(k, _)| k.clone()).collect();
        stale
            .into_iter()
            .map(|k| {
                let s = self.links.remove(&k).expect("present");
                (k, s.to)
            })
            .collect()
    }

    pub fn get(&self, from: &Endpoint) -> Option<&Endpoint> {
        self.links.get(from).map(|s| &s.to)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Directed links in origin order.
    pub fn directed(&self) -> impl Iterator<Item = (&Endpoint, &Endpoint)> + '_ {
        self.links.iter().map(|(k, s)| (k, &s.to))
    }

    /// Directed links without stamps, for comparing rounds.
    pub fn snapshot(&self) -> BTreeMap<Endpoint, Endpoint> {
        self.links.iter().map(|(k, s)| (k.clone(), s.to.clone())).collect()
    }
}

/// A confirmed pair the view could not accept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Anomaly {
    pub from: Endpoint,
    pub to: Endpoint,
    pub reason: String,
}

/// Topology as the controller believes it to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerView {
    pub topology: Topology,
    pub anomalies: Vec<Anomaly>,
}

impl ControllerView {
    pub fn links(&self) -> impl Iterator<Item = &Link> + '_ {
        self.topology.links()
    }
}

/// Builds the view over `skeleton` (switches, ports and hosts) from the
/// directed links confirmed in both directions.
pub fn rebuild_view(skeleton: &Topology, store: &LinkStore) -> ControllerView {
    let mut topology = skeleton.without_links();
    let mut anomalies = Vec::new();
    for (from, to) in store.directed() {
        if from > to || store.get(to) != Some(from) {
            continue;
        }
        match topology.add_link(Link::new(from.clone(), to.clone())) {
            Ok(()) => {}
            Err(e) => anomalies.push(Anomaly { from: from.clone(), to: to.clone(), reason: e.to_string() }),
        }
    }
    ControllerView { topology, anomalies }
}
