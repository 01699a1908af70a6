//! A network, its controller cluster and an attacker driving them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attack::{lowering_mods, plan_topology_poison, AttackError, InjectionPath, PlanSet, PoisonMode};
use crate::cluster::{Cluster, ClusterError, ControllerRole, MemberSpec, Replication, TickEvents};
use crate::controller::{route_flow_on, Controller, ControllerConfig, FlowRequest, Route};
use crate::dataplane::{FlowEntry, FlowId, FlowMod, Injection, NetError, Network, Packet};
use crate::gappatch::{check_patches, patch_mods, proactive_patch, GapError, GapMaps, PatchEntry, PatchMode, Patcher};
use crate::topo::{Graph, Link, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default = "default_members")]
    pub members: Vec<MemberSpec>,
    #[serde(default)]
    pub replication: Replication,
    /// How the attacker reaches the switches.
    #[serde(default = "default_injection")]
    pub injection: InjectionPath,
}

fn default_members() -> Vec<MemberSpec> {
    vec![
        MemberSpec::new("c1", ControllerRole::Leader),
        MemberSpec::new("c2", ControllerRole::Follower),
        MemberSpec::new("c3", ControllerRole::Follower),
    ]
}

fn default_injection() -> InjectionPath {
    InjectionPath::Datastore { author: "c3".into() }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            controller: ControllerConfig::default(),
            members: default_members(),
            replication: Replication::default(),
            injection: default_injection(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error("no poison installed yet")]
    NotPoisoned,
    #[error("{0}")]
    Invalid(String),
}

/// Outcome of sending one packet of a flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowOutcome {
    pub flow: FlowId,
    pub delivered: bool,
    /// Switches that handled the packet, in first-seen order.
    pub seen_by: Vec<NodeId>,
    /// Unexpected packet-ins this packet caused.
    pub unexpected: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    real: Topology,
    net: Network,
    cluster: Cluster,
    injection: InjectionPath,
    plans: Option<PlanSet>,
    target: Option<Topology>,
    patcher: Option<Patcher>,
    patches: Vec<PatchEntry>,
    observed: BTreeMap<FlowId, BTreeSet<NodeId>>,
}

impl Simulation {
    pub fn new(real: Topology, config: SimConfig) -> Result<Self, SimError> {
        let mut net = Network::new(real.clone());
        let controller = Controller::new(&real, config.controller.clone());
        controller.connect(&mut net)?;
        let cluster = Cluster::new(&config.members, config.replication, controller)?;
        if cluster.member(config.injection.author()).is_none() {
            return Err(SimError::Invalid(format!("unknown attacker member {}", config.injection.author())));
        }
        Ok(Simulation {
            real,
            net,
            cluster,
            injection: config.injection,
            plans: None,
            target: None,
            patcher: None,
            patches: Vec::new(),
            observed: BTreeMap::new(),
        })
    }

    pub fn real(&self) -> &Topology {
        &self.real
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn cluster_mut(&mut self) -> &mut Cluster {
        &mut self.cluster
    }

    pub fn controller(&self) -> &Controller {
        self.cluster.controller()
    }

    pub fn plans(&self) -> Option<&PlanSet> {
        self.plans.as_ref()
    }

    pub fn target(&self) -> Option<&Topology> {
        self.target.as_ref()
    }

    /// Patches sent so far, in order.
    pub fn patches(&self) -> &[PatchEntry] {
        &self.patches
    }

    pub fn poison_mode(&self) -> PoisonMode {
        if self.controller().config().fingerprint {
            PoisonMode::VlanInportSrc
        } else {
            PoisonMode::Vanilla
        }
    }

    pub fn view_links(&self) -> BTreeSet<Link> {
        self.controller().view_links()
    }

    pub fn declare_flows(&mut self, flows: impl IntoIterator<Item = FlowRequest>) {
        self.cluster.controller_mut().declare_flows(flows);
    }

    /// One cluster tick, then the reactive patcher if one is running.
    pub fn tick(&mut self) -> Result<TickEvents, SimError> {
        let events = self.cluster.tick(&mut self.net)?;
        if let Some(p) = &mut self.patcher {
            let sent = p.monitor(&mut self.cluster, &mut self.net)?;
            self.patches.extend(sent);
        }
        Ok(events)
    }

    pub fn run_ticks(&mut self, n: usize) -> Result<(), SimError> {
        for _ in 0..n {
            self.tick()?;
        }
        Ok(())
    }

    /// Routes the declared flows would take on `view`.
    pub fn predicted_routes(&self, view: &Topology) -> Vec<Route> {
        let g = Graph::new(view);
        self.controller().flows().iter().filter_map(|f| route_flow_on(view, &g, f).ok()).collect()
    }

    /// Plans `target` and sends the entries through the attacker's channel.
    /// Proactive patches for the declared flows travel in the same writes;
    /// reactive patching starts a monitor run after every tick.
    pub fn poison(
        &mut self,
        target: &Topology,
        patch: Option<PatchMode>,
        lower_pinned: bool,
    ) -> Result<&PlanSet, SimError> {
        let set = plan_topology_poison(&self.real, target, self.poison_mode())?;
        let maps = GapMaps::from_plans(&set);
        let mut mods: BTreeMap<NodeId, Vec<FlowMod>> = set.flow_mods();
        if lower_pinned {
            let lowering = lowering_mods(&self.net);
            self.injection.send(&mut self.cluster, &mut self.net, &lowering)?;
        }
        let view = self.real.with_links(target.links()).map_err(|e| SimError::Invalid(e.to_string()))?;
        match patch {
            Some(PatchMode::Proactive) => {
                let routes = self.predicted_routes(&view);
                let patches = proactive_patch(&maps, &routes);
                check_patches(routes.iter().flat_map(|r| r.entries.iter().map(|(s, e)| (s, e))), &patches)?;
                for (sw, ms) in patch_mods(&patches) {
                    mods.entry(sw).or_default().extend(ms);
                }
                let mut patcher = Patcher::new(maps, self.injection.clone());
                patcher.mark_sent(&patches);
                self.patches.extend(patches);
                self.patcher = Some(patcher);
            }
            Some(PatchMode::Reactive) => self.patcher = Some(Patcher::new(maps, self.injection.clone())),
            None => {}
        }
        self.injection.send(&mut self.cluster, &mut self.net, &mods)?;
        self.target = Some(view);
        self.plans = Some(set);
        Ok(self.plans.as_ref().expect("just set"))
    }

    /// Starts patching after poisoning without patches.
    pub fn start_patching(&mut self, mode: PatchMode) -> Result<Vec<PatchEntry>, SimError> {
        let set = self.plans.as_ref().ok_or(SimError::NotPoisoned)?;
        let maps = GapMaps::from_plans(set);
        let mut patcher = Patcher::new(maps.clone(), self.injection.clone());
        let sent = match mode {
            PatchMode::Proactive => {
                let view = self.target.clone().ok_or(SimError::NotPoisoned)?;
                let routes = self.predicted_routes(&view);
                let patches = proactive_patch(&maps, &routes);
                check_patches(routes.iter().flat_map(|r| r.entries.iter().map(|(s, e)| (s, e))), &patches)?;
                self.injection.send(&mut self.cluster, &mut self.net, &patch_mods(&patches))?;
                patcher.mark_sent(&patches);
                patches
            }
            PatchMode::Reactive => patcher.monitor(&mut self.cluster, &mut self.net)?,
        };
        self.patches.extend(sent.iter().cloned());
        self.patcher = Some(patcher);
        Ok(sent)
    }

    fn packet_for(&self, f: &FlowRequest) -> Result<Packet, SimError> {
        let src = self.real.host(&f.src).ok_or_else(|| SimError::Invalid(format!("unknown host {}", f.src)))?;
        let dst = self.real.host(&f.dst).ok_or_else(|| SimError::Invalid(format!("unknown host {}", f.dst)))?;
        Ok(Packet::data(f.id.clone(), src.mac, dst.mac))
    }

    /// Sends one packet per flow, each as its own run.
    pub fn inject_flows(&mut self, flows: &[FlowRequest]) -> Result<Vec<FlowOutcome>, SimError> {
        let mut out = Vec::with_capacity(flows.len());
        for f in flows {
            let packet = self.packet_for(f)?;
            let before = self.controller().unexpected_count();
            let log = self
                .net
                .run(vec![Injection::FromHost { host: f.src.clone(), packet }], self.cluster.controller_mut())?;
            let dst = &f.dst;
            let delivered = log.deliveries.iter().any(|d| &d.host == dst);
            let mut seen_by: Vec<NodeId> = Vec::new();
            for d in &log.deliveries {
                for n in &d.trail {
                    if !seen_by.contains(n) {
                        seen_by.push(n.clone());
                    }
                }
            }
            for (_, pi) in &log.packet_ins {
                if !seen_by.contains(&pi.switch) {
                    seen_by.push(pi.switch.clone());
                }
            }
            self.observed.entry(f.id.clone()).or_default().extend(seen_by.iter().cloned());
            let unexpected = self.controller().unexpected_count() - before;
            out.push(FlowOutcome { flow: f.id.clone(), delivered, seen_by, unexpected });
        }
        Ok(out)
    }

    /// Every switch that has handled a packet of each flow.
    pub fn observed(&self) -> &BTreeMap<FlowId, BTreeSet<NodeId>> {
        &self.observed
    }

    pub fn tables(&self) -> BTreeMap<NodeId, Vec<FlowEntry>> {
        self.net.tables()
    }
}
