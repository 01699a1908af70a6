//! Controller cluster with a replicated datastore of intended flow tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::controller::Controller;
use crate::dataplane::{FlowEntry, FlowMod, NetError, Network};
use crate::topo::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerRole {
    Leader,
    Equal,
    Follower,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replication {
    /// Only the leader talks to switches.
    #[default]
    Passive,
    /// Equal-role members may also program switches directly.
    Active,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub id: String,
    pub role: ControllerRole,
}

impl MemberSpec {
    pub fn new(id: impl Into<String>, role: ControllerRole) -> Self {
        MemberSpec { id: id.into(), role }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("a cluster needs exactly one leader, found {0}")]
    LeaderCount(usize),
    #[error("duplicate member {0}")]
    DuplicateMember(String),
    #[error("unknown member {0}")]
    UnknownMember(String),
    #[error("unknown switch {0}")]
    UnknownSwitch(NodeId),
    #[error("member {0} has no switch connection")]
    NotConnected(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WriteRecord {
    pub seq: u64,
    pub author: String,
    pub switch: NodeId,
    pub mods: Vec<FlowMod>,
    /// Member that programmed the switch, once it has.
    pub installed_by: Option<String>,
}

/// Intended per-switch tables plus the write log that produced them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Datastore {
    pub tables: BTreeMap<NodeId, Vec<FlowEntry>>,
    pub log: Vec<WriteRecord>,
}

impl Datastore {
    fn apply(&mut self, rec: &WriteRecord) {
        let table = self.tables.entry(rec.switch.clone()).or_default();
        for m in &rec.mods {
            match m {
                FlowMod::Add { entry, .. } => {
                    match table.iter_mut().find(|e| e.priority == entry.priority && e.matcher == entry.matcher) {
                        Some(slot) => *slot = entry.clone(),
                        None => table.push(entry.clone()),
                    }
                }
                FlowMod::Delete { priority, matcher, .. } => {
                    table.retain(|e| !(e.priority == *priority && &e.matcher == matcher))
                }
            }
        }
        self.log.push(rec.clone());
    }

    /// Canonical serialized form.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("datastore serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Member {
    pub id: String,
    pub role: ControllerRole,
    pub datastore: Datastore,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TickEvents {
    pub propagated: usize,
    pub installed: usize,
    pub view_changed: bool,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    members: Vec<Member>,
    leader: usize,
    replication: Replication,
    controller: Controller,
    pending: Vec<WriteRecord>,
    next_seq: u64,
}

impl Cluster {
    /// `controller` is the application run by the leader.
    pub fn new(specs: &[MemberSpec], replication: Replication, controller: Controller) -> Result<Self, ClusterError> {
        let leaders: Vec<usize> =
            specs.iter().enumerate().filter(|(_, s)| s.role == ControllerRole::Leader).map(|(i, _)| i).collect();
        if leaders.len() != 1 {
            return Err(ClusterError::LeaderCount(leaders.len()));
        }
        let mut members: Vec<Member> = Vec::new();
        for s in specs {
            if members.iter().any(|m| m.id == s.id) {
                return Err(ClusterError::DuplicateMember(s.id.clone()));
            }
            members.push(Member { id: s.id.clone(), role: s.role, datastore: Datastore::default() });
        }
        Ok(Cluster { members, leader: leaders[0], replication, controller, pending: Vec::new(), next_seq: 0 })
    }

    /// Single leader named `c1`.
    pub fn single(controller: Controller) -> Self {
        Self::new(&[MemberSpec::new("c1", ControllerRole::Leader)], Replication::Passive, controller).expect("valid")
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, id: &str) -> Option<&Member> {
        self.members.iter().find(|m| m.id == id)
    }

    pub fn leader(&self) -> &Member {
        &self.members[self.leader]
    }

    pub fn replication(&self) -> Replication {
        self.replication
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut Controller {
        &mut self.controller
    }

    pub fn pending(&self) -> &[WriteRecord] {
        &self.pending
    }

    fn index(&self, id: &str) -> Result<usize, ClusterError> {
        self.members.iter().position(|m| m.id == id).ok_or_else(|| ClusterError::UnknownMember(id.to_string()))
    }

    fn check_switch(&self, switch: &NodeId) -> Result<(), ClusterError> {
        if self.controller.view().topology.contains_node(switch) {
            Ok(())
        } else {
            Err(ClusterError::UnknownSwitch(switch.clone()))
        }
    }

    /// Adds `entries` to the intended table of `switch`.
    pub fn datastore_write(
        &mut self,
        author: &str,
        switch: &NodeId,
        entries: Vec<FlowEntry>,
    ) -> Result<Option<u64>, ClusterError> {
        let mods = entries.into_iter().map(|entry| FlowMod::Add { switch: switch.clone(), entry }).collect();
        self.datastore_write_mods(author, switch, mods)
    }

    /// Records `mods` in the author's datastore; they reach the others and
    /// the switch on the next tick. Returns the write's sequence number.
    pub fn datastore_write_mods(
        &mut self,
        author: &str,
        switch: &NodeId,
        mods: Vec<FlowMod>,
    ) -> Result<Option<u64>, ClusterError> {
        let i = self.index(author)?;
        self.check_switch(switch)?;
        if mods.is_empty() {
            return Ok(None);
        }
        if let Some(m) = mods.iter().find(|m| m.switch() != switch) {
            return Err(ClusterError::UnknownSwitch(m.switch().clone()));
        }
        let rec = WriteRecord {
            seq: self.next_seq,
            author: author.to_string(),
            switch: switch.clone(),
            mods,
            installed_by: None,
        };
        self.next_seq += 1;
        self.members[i].datastore.apply(&rec);
        self.pending.push(rec);
        Ok(Some(self.next_seq - 1))
    }

    /// Programs a switch without touching any datastore.
    pub fn direct_install(&mut self, author: &str, net: &mut Network, mods: &[FlowMod]) -> Result<(), ClusterError> {
        let i = self.index(author)?;
        let allowed = match self.members[i].role {
            ControllerRole::Leader => true,
            ControllerRole::Equal => self.replication == Replication::Active,
            ControllerRole::Follower => false,
        };
        if !allowed {
            return Err(ClusterError::NotConnected(author.to_string()));
        }
        for m in mods {
            self.check_switch(m.switch())?;
        }
        for m in mods {
            net.apply_flow_mod(m)?;
        }
        Ok(())
    }

    /// Propagates pending writes, lets the leader install them, then runs a
    /// discovery round, view rebuild and route sync on the leader.
    pub fn tick(&mut self, net: &mut Network) -> Result<TickEvents, ClusterError> {
        let mut events = TickEvents::default();
        let leader_id = self.members[self.leader].id.clone();
        for rec in std::mem::take(&mut self.pending) {
            for m in &mut self.members {
                if m.id != rec.author {
                    m.datastore.apply(&rec);
                }
                if let Some(logged) = m.datastore.log.iter_mut().find(|r| r.seq == rec.seq) {
                    logged.installed_by = Some(leader_id.clone());
                }
            }
            for m in &rec.mods {
                net.apply_flow_mod(m)?;
                events.installed += 1;
            }
            events.propagated += 1;
        }
        for m in &mut self.members {
            m.datastore.log.sort_by_key(|r| r.seq);
        }
        events.view_changed = self.controller.refresh(net)?;
        Ok(events)
    }

    /// True when every member's datastore serializes identically.
    pub fn datastores_identical(&self) -> bool {
        let first = self.members[0].datastore.to_bytes();
        self.members[1..].iter().all(|m| m.datastore.to_bytes() == first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerConfig;
    use crate::dataplane::{priority, FlowAction, FlowMatch, Owner};
    use crate::topo::{fixtures, Endpoint, PortId};

    fn three(replication: Replication) -> (Cluster, Network) {
        let t = fixtures::segment();
        let specs = [
            MemberSpec::new("c1", ControllerRole::Leader),
            MemberSpec::new("c2", ControllerRole::Equal),
            MemberSpec::new("c3", ControllerRole::Follower),
        ];
        let c = Cluster::new(&specs, replication, Controller::new(&t, ControllerConfig::default())).unwrap();
        (c, Network::new(t))
    }

    fn poison(t: &Network, src: (&str, u32), out: u32) -> FlowEntry {
        let mac = t.fabric().mac(&Endpoint::new(src.0, src.1)).unwrap();
        FlowEntry::new(
            priority::POISON,
            FlowMatch::any().ether_src(mac),
            vec![FlowAction::Output(PortId::new(out))],
            Owner::Attacker,
        )
    }

    #[test]
    fn leader_count_is_checked() {
        let t = fixtures::segment();
        let specs = [MemberSpec::new("a", ControllerRole::Follower)];
        let err = Cluster::new(&specs, Replication::Passive, Controller::new(&t, ControllerConfig::default()));
        assert_eq!(err.unwrap_err(), ClusterError::LeaderCount(0));
    }

    #[test]
    fn follower_write_installs_on_tick() {
        let (mut c, mut net) = three(Replication::Passive);
        c.tick(&mut net).unwrap();
        let e = poison(&net, ("A", 2), 2);
        c.datastore_write("c3", &"C".into(), vec![e.clone()]).unwrap();
        assert!(!c.datastores_identical());
        assert!(!net.switch(&"C".into()).unwrap().table().iter().any(|x| x.same_rule(&e)));
        let ev = c.tick(&mut net).unwrap();
        assert_eq!((ev.propagated, ev.installed), (1, 1));
        assert!(net.switch(&"C".into()).unwrap().table().iter().any(|x| x.same_rule(&e)));
        assert!(c.datastores_identical());
        assert_eq!(c.leader().datastore.log[0].installed_by.as_deref(), Some("c1"));
    }

    #[test]
    fn empty_write_is_noop() {
        let (mut c, _) = three(Replication::Passive);
        assert_eq!(c.datastore_write("c3", &"C".into(), vec![]).unwrap(), None);
        assert!(c.pending().is_empty());
    }

    #[test]
    fn unknown_switch_rejected() {
        let (mut c, net) = three(Replication::Passive);
        let e = poison(&net, ("A", 2), 2);
        assert_eq!(c.datastore_write("c3", &"Z".into(), vec![e]), Err(ClusterError::UnknownSwitch("Z".into())));
    }

    #[test]
    fn follower_cannot_install_directly() {
        let (mut c, mut net) = three(Replication::Active);
        let m = FlowMod::Add { switch: "C".into(), entry: poison(&net, ("A", 2), 2) };
        assert_eq!(c.direct_install("c3", &mut net, &[m]), Err(ClusterError::NotConnected("c3".into())));
    }

    #[test]
    fn equal_direct_install_matches_datastore_path() {
        let (mut a, mut net_a) = three(Replication::Active);
        let (mut b, mut net_b) = three(Replication::Active);
        let e = poison(&net_a, ("A", 2), 2);
        a.direct_install("c2", &mut net_a, &[FlowMod::Add { switch: "C".into(), entry: e.clone() }]).unwrap();
        assert!(a.leader().datastore.log.is_empty());
        b.datastore_write("c3", &"C".into(), vec![e]).unwrap();
        a.tick(&mut net_a).unwrap();
        b.tick(&mut net_b).unwrap();
        assert_eq!(net_a.tables(), net_b.tables());
    }

    #[test]
    fn tick_without_writes_keeps_view() {
        let (mut c, mut net) = three(Replication::Passive);
        c.tick(&mut net).unwrap();
        let view = c.controller().view_links();
        let ev = c.tick(&mut net).unwrap();
        assert!(!ev.view_changed);
        assert_eq!(c.controller().view_links(), view);
    }
}
