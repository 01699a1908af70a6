//! Scenario files: a topology, a cluster, flows and an ordered list of
//! phases whose assertions form a verdict.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{DeceptiveLink, InjectionPath, PlanSet};
use crate::cluster::{MemberSpec, Replication};
use crate::controller::{ControllerConfig, FlowRequest, ForwardingMode};
use crate::dataplane::{FlowEntry, FlowId};
use crate::gappatch::{PatchEntry, PatchMode};
use crate::planner::{
    oracle_coverage, random_flows, search, ActionFamily, Env, GoalKind, PlannerError, PlannerGoal, SearchConfig,
    SearchReport,
};
use crate::sim::{FlowOutcome, SimConfig, SimError, Simulation};
use crate::topo::{eo_similarity, fixtures, DotStyle, Link, NodeId, Similarity, Topology};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("phase {index} ({phase}): {source}")]
    Phase { index: usize, phase: &'static str, source: Box<ScenarioError> },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Controller cluster layout and the attacker's foothold in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub members: Vec<MemberSpec>,
    #[serde(default)]
    pub replication: Replication,
    pub injection: InjectionPath,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        let c = SimConfig::default();
        ClusterSpec { members: c.members, replication: c.replication, injection: c.injection }
    }
}

/// Either `count` random host pairs or an explicit list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub count: usize,
    /// Defaults to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub list: Vec<FlowRequest>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    TwoSwitch,
    NodeRealloc,
    #[default]
    Auto,
}

impl FamilyChoice {
    pub fn resolve(self, t: &Topology) -> ActionFamily {
        match self {
            FamilyChoice::TwoSwitch => ActionFamily::TwoSwitch,
            FamilyChoice::NodeRealloc => ActionFamily::NodeReallocation,
            FamilyChoice::Auto => ActionFamily::auto(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalChoice {
    Eavesdrop,
    Evade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanPhase {
    pub goal: GoalChoice,
    pub target: NodeId,
    /// Absolute flow-count threshold.
    #[serde(default)]
    pub coverage: Option<usize>,
    /// Flows to move past the real topology's coverage, in the goal's
    /// direction.
    #[serde(default)]
    pub coverage_delta: Option<usize>,
    pub similarity: f64,
    #[serde(default)]
    pub actions: FamilyChoice,
    pub budget: usize,
    #[serde(default)]
    pub episode_len: Option<usize>,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case", deny_unknown_fields)]
pub enum Phase {
    /// Cluster ticks, each running one discovery round.
    Discover {
        #[serde(default = "one")]
        rounds: usize,
    },
    /// Poisons a target topology (a fixture, a file or `planned`) or the
    /// topology obtained by adding the given links.
    Poison {
        #[serde(default)]
        target: Option<String>,
        #[serde(default)]
        links: Vec<String>,
        #[serde(default)]
        patch: Option<PatchMode>,
        #[serde(default)]
        lower_pinned: bool,
    },
    Patch {
        mode: PatchMode,
    },
    /// One packet per flow; all scenario flows unless listed.
    InjectFlows {
        #[serde(default)]
        flows: Vec<FlowId>,
    },
    Plan(PlanPhase),
    Assert {
        check: Check,
    },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Discover { .. } => "discover",
            Phase::Poison { .. } => "poison",
            Phase::Patch { .. } => "patch",
            Phase::InjectFlows { .. } => "inject_flows",
            Phase::Plan(_) => "plan",
            Phase::Assert { .. } => "assert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Controller view equals the poisoned target.
    ViewEqualsTarget,
    ViewEqualsReal,
    ViewEquals {
        topology: String,
    },
    AllDelivered,
    Delivered {
        flow: FlowId,
    },
    /// The switch handled packets of the flow.
    Observed {
        flow: FlowId,
        switch: NodeId,
    },
    NotObserved {
        flow: FlowId,
        switch: NodeId,
    },
    UnexpectedAtMost {
        count: usize,
    },
    UnexpectedAtLeast {
        count: usize,
    },
    PatchCount {
        count: usize,
    },
    DatastoresIdentical,
    PlannerSuccess,
    PlannerSimilarityAtLeast {
        value: f64,
    },
    /// Simulated coverage of the planned topology equals the predicted one
    /// and meets the goal.
    PlannerCoverageVerified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Fixture name, or a topology file relative to the scenario file.
    pub topology: String,
    #[serde(default)]
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub fingerprint_mode: bool,
    #[serde(default)]
    pub pin_lldp: bool,
    #[serde(default)]
    pub forwarding: ForwardingMode,
    #[serde(default)]
    pub flows: FlowSpec,
    #[serde(default)]
    pub phases: Vec<Phase>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        self
    }

    /// Phases may only use artifacts produced by earlier phases.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |i: usize, msg: &str| Err(ScenarioError::Invalid(format!("phase {i}: {msg}")));
        if self.flows.count > 0 && !self.flows.list.is_empty() {
            return Err(ScenarioError::Invalid("flows: give either count or list".into()));
        }
        let ids: BTreeSet<&FlowId> = self.flows.list.iter().map(|f| &f.id).collect();
        if ids.len() != self.flows.list.len() {
            return Err(ScenarioError::Invalid("flows: duplicate flow id".into()));
        }
        let (mut planned, mut poisoned) = (false, false);
        for (i, p) in self.phases.iter().enumerate() {
            match p {
                Phase::Poison { target, links, .. } => {
                    if target.is_some() == !links.is_empty() {
                        return invalid(i, "poison needs exactly one of target or links");
                    }
                    if target.as_deref() == Some("planned") && !planned {
                        return invalid(i, "no earlier plan phase");
                    }
                    poisoned = true;
                }
                Phase::Patch { .. } if !poisoned => return invalid(i, "patch before any poison phase"),
                Phase::Plan(plan) => {
                    if plan.coverage.is_some() == plan.coverage_delta.is_some() {
                        return invalid(i, "plan needs exactly one of coverage or coverage_delta");
                    }
                    planned = true;
                }
                Phase::Assert { check } => match check {
                    Check::ViewEqualsTarget | Check::PatchCount { .. } if !poisoned => {
                        return invalid(i, "assertion needs an earlier poison phase")
                    }
                    Check::PlannerSuccess | Check::PlannerSimilarityAtLeast { .. } | Check::PlannerCoverageVerified
                        if !planned =>
                    {
                        return invalid(i, "assertion needs an earlier plan phase")
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    pub phase: usize,
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub discovery_rounds: u64,
    pub unexpected_packets: usize,
    /// Poisonous and patch entries sent by the attacker.
    pub entries_installed: usize,
    pub patches: usize,
    /// Edge overlap of the final view with the real topology.
    pub view_similarity: Similarity,
    pub flows_delivered: usize,
    pub flows_injected: usize,
    pub planner_steps: Option<usize>,
    pub planner_baseline: Option<usize>,
    pub planner_coverage: Option<usize>,
    pub planner_similarity: Option<Similarity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub assertions: Vec<AssertionResult>,
    pub metrics: Metrics,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub real: Topology,
    /// View when the first poison phase started, or the final view.
    pub view_before: Topology,
    pub view_after: Topology,
    pub tables: BTreeMap<NodeId, Vec<FlowEntry>>,
    pub plans: Option<PlanSet>,
    pub patches: Vec<PatchEntry>,
    pub plan: Option<SearchReport>,
}

impl Outcome {
    /// DOT of a view with fabricated links, hidden real links and patched
    /// switches highlighted.
    pub fn view_dot(&self, view: &Topology, name: &str) -> String {
        let style = DotStyle {
            fabricated: view.links().filter(|l| !self.real.has_link(l)).cloned().collect(),
            hidden: self.real.links().filter(|l| !view.has_link(l)).cloned().collect(),
            gaps: self.patches.iter().map(|p| p.switch.clone()).collect(),
        };
        crate::topo::to_dot(view, name, &style)
    }
}

/// Resolves a fixture name or a topology file.
pub fn load_topology(name: &str, base: &Path) -> Result<Topology, ScenarioError> {
    if let Some(t) = fixtures::by_name(name) {
        return Ok(t);
    }
    let path = base.join(name);
    let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
    Topology::from_json(&text).map_err(|e| ScenarioError::Invalid(format!("{}: {e}", path.display())))
}

/// `real` with each listed link replacing whatever used its endpoints.
pub fn target_from_links(real: &Topology, links: &[DeceptiveLink]) -> Result<Topology, ScenarioError> {
    let added: Vec<Link> = links.iter().map(|l| l.undirected()).collect();
    let used: BTreeSet<_> = added.iter().flat_map(|l| l.endpoints().map(|e| e.clone())).collect();
    let kept: Vec<Link> = real.links().filter(|l| l.endpoints().iter().all(|e| !used.contains(*e))).cloned().collect();
    real.with_links(kept.iter().chain(&added)).map_err(|e| ScenarioError::Invalid(e.to_string()))
}

struct Runner<'a> {
    scenario: &'a Scenario,
    base: &'a Path,
    real: Topology,
    flows: Vec<FlowRequest>,
    sim: Simulation,
    outcomes: BTreeMap<FlowId, FlowOutcome>,
    view_before: Option<Topology>,
    plan: Option<SearchReport>,
    assertions: Vec<AssertionResult>,
}

/// Runs every phase in order. `base` resolves relative topology paths.
pub fn run(scenario: &Scenario, base: &Path) -> Result<Outcome, ScenarioError> {
    scenario.validate()?;
    let real = load_topology(&scenario.topology, base)?;
    let flows = if scenario.flows.list.is_empty() {
        random_flows(&real, scenario.flows.seed.unwrap_or(scenario.seed), scenario.flows.count)?
    } else {
        scenario.flows.list.clone()
    };
    let config = SimConfig {
        controller: ControllerConfig {
            fingerprint: scenario.fingerprint_mode,
            pin_lldp: scenario.pin_lldp,
            forwarding: scenario.forwarding,
        },
        members: scenario.cluster.members.clone(),
        replication: scenario.cluster.replication,
        injection: scenario.cluster.injection.clone(),
    };
    let mut sim = Simulation::new(real.clone(), config)?;
    sim.declare_flows(flows.iter().cloned());
    let mut r = Runner {
        scenario,
        base,
        real,
        flows,
        sim,
        outcomes: BTreeMap::new(),
        view_before: None,
        plan: None,
        assertions: Vec::new(),
    };
    for (index, phase) in scenario.phases.iter().enumerate() {
        r.phase(index, phase).map_err(|e| ScenarioError::Phase { index, phase: phase.name(), source: Box::new(e) })?;
    }
    Ok(r.finish())
}

impl Runner<'_> {
    fn view(&self) -> Topology {
        self.sim.controller().view().topology.clone()
    }

    fn phase(&mut self, index: usize, phase: &Phase) -> Result<(), ScenarioError> {
        match phase {
            Phase::Discover { rounds } => self.sim.run_ticks(*rounds)?,
            Phase::Poison { target, links, patch, lower_pinned } => {
                if self.view_before.is_none() {
                    self.view_before = Some(self.view());
                }
                let t = match target.as_deref() {
                    Some("planned") => self.planned()?.clone(),
                    Some(name) => load_topology(name, self.base)?,
                    None => {
                        let parsed = links
                            .iter()
                            .map(|l| l.parse::<DeceptiveLink>().map_err(|e| ScenarioError::Invalid(e.to_string())))
                            .collect::<Result<Vec<_>, _>>()?;
                        target_from_links(&self.real, &parsed)?
                    }
                };
                self.sim.poison(&t, *patch, *lower_pinned)?;
            }
            Phase::Patch { mode } => {
                self.sim.start_patching(*mode)?;
            }
            Phase::InjectFlows { flows } => {
                let chosen: Vec<FlowRequest> = if flows.is_empty() {
                    self.flows.clone()
                } else {
                    flows
                        .iter()
                        .map(|id| {
                            self.flows
                                .iter()
                                .find(|f| &f.id == id)
                                .cloned()
                                .ok_or_else(|| ScenarioError::Invalid(format!("unknown flow {id}")))
                        })
                        .collect::<Result<_, _>>()?
                };
                for o in self.sim.inject_flows(&chosen)? {
                    self.outcomes.insert(o.flow.clone(), o);
                }
            }
            Phase::Plan(p) => self.plan = Some(self.run_plan(p)?),
            Phase::Assert { check } => {
                let (passed, detail) = self.check(check)?;
                self.assertions.push(AssertionResult { phase: index, check: check.clone(), passed, detail });
            }
        }
        Ok(())
    }

    fn planned(&self) -> Result<&Topology, ScenarioError> {
        let plan = self.plan.as_ref().expect("validated");
        plan.accepted.as_ref().ok_or_else(|| ScenarioError::Invalid("planner found no topology".into()))
    }

    fn run_plan(&self, p: &PlanPhase) -> Result<SearchReport, ScenarioError> {
        let kind = match p.goal {
            GoalChoice::Eavesdrop => GoalKind::Eavesdrop(p.target.clone()),
            GoalChoice::Evade => GoalKind::Evade(p.target.clone()),
        };
        let mode = self.sim.poison_mode();
        let probe = PlannerGoal { kind: kind.clone(), coverage_threshold: 0, similarity: p.similarity };
        let baseline = Env::new(&self.real, probe, self.flows.clone(), mode)?.baseline();
        let threshold = match (p.coverage, p.coverage_delta, p.goal) {
            (Some(c), _, _) => c,
            (None, Some(d), GoalChoice::Eavesdrop) => baseline + d,
            (None, Some(d), GoalChoice::Evade) => baseline.saturating_sub(d),
            (None, None, _) => unreachable!("validated"),
        };
        let goal = PlannerGoal { kind, coverage_threshold: threshold, similarity: p.similarity };
        let mut cfg = SearchConfig::new(p.budget, self.scenario.seed, p.actions.resolve(&self.real));
        cfg.episode_len = p.episode_len;
        cfg.workers = p.workers;
        cfg.mode = mode;
        Ok(search(&self.real, &goal, &self.flows, &cfg)?)
    }

    fn check(&self, check: &Check) -> Result<(bool, String), ScenarioError> {
        let view = self.view();
        let links = |t: &Topology| t.link_set().clone();
        Ok(match check {
            Check::ViewEqualsTarget => {
                let target = self.sim.target().expect("validated");
                (view.link_set() == target.link_set(), format!("{} view links", view.link_count()))
            }
            Check::ViewEqualsReal => (links(&view) == links(&self.real), format!("{} view links", view.link_count())),
            Check::ViewEquals { topology } => {
                let t = load_topology(topology, self.base)?;
                (links(&view) == links(&t), format!("{} view links", view.link_count()))
            }
            Check::AllDelivered => {
                let missing: Vec<String> =
                    self.flows.iter().filter(|f| !self.delivered(&f.id)).map(|f| f.id.to_string()).collect();
                let detail = if missing.is_empty() {
                    format!("{} delivered", self.flows.len())
                } else {
                    format!("undelivered: {}", missing.join(", "))
                };
                (missing.is_empty(), detail)
            }
            Check::Delivered { flow } => (self.delivered(flow), String::new()),
            Check::Observed { flow, switch } => {
                let seen = self.sim.observed().get(flow).is_some_and(|s| s.contains(switch));
                (seen, String::new())
            }
            Check::NotObserved { flow, switch } => {
                let seen = self.sim.observed().get(flow).is_some_and(|s| s.contains(switch));
                (!seen, String::new())
            }
            Check::UnexpectedAtMost { count } => {
                let n = self.sim.controller().unexpected_count();
                (n <= *count, format!("{n} unexpected"))
            }
            Check::UnexpectedAtLeast { count } => {
                let n = self.sim.controller().unexpected_count();
                (n >= *count, format!("{n} unexpected"))
            }
            Check::PatchCount { count } => {
                let n = self.sim.patches().len();
                (n == *count, format!("{n} patches"))
            }
            Check::DatastoresIdentical => (self.sim.cluster().datastores_identical(), String::new()),
            Check::PlannerSuccess => {
                let p = self.plan.as_ref().expect("validated");
                (p.success, format!("{} steps", p.steps))
            }
            Check::PlannerSimilarityAtLeast { value } => {
                let p = self.plan.as_ref().expect("validated");
                match p.accepted_similarity {
                    Some(s) => (s.at_least(*value), format!("similarity {s}")),
                    None => (false, "no accepted topology".into()),
                }
            }
            Check::PlannerCoverageVerified => {
                let p = self.plan.as_ref().expect("validated");
                match (&p.accepted, p.accepted_coverage) {
                    (Some(t), Some(predicted)) => {
                        let measured = oracle_coverage(&self.real, t, &self.flows, p.goal.target())
                            .map_err(|e| ScenarioError::Invalid(e.to_string()))?
                            .count();
                        let ok = measured == predicted && p.goal.coverage_met(measured);
                        (ok, format!("predicted {predicted}, simulated {measured}"))
                    }
                    _ => (false, "no accepted topology".into()),
                }
            }
        })
    }

    fn delivered(&self, flow: &FlowId) -> bool {
        self.outcomes.get(flow).is_some_and(|o| o.delivered)
    }

    fn finish(self) -> Outcome {
        let view_after = self.view();
        let plans = self.sim.plans().cloned();
        let patches = self.sim.patches().to_vec();
        let metrics = Metrics {
            discovery_rounds: self.sim.controller().round(),
            unexpected_packets: self.sim.controller().unexpected_count(),
            entries_installed: plans.as_ref().map_or(0, |p| p.entry_count()) + patches.len(),
            patches: patches.len(),
            view_similarity: eo_similarity(&self.real, &view_after).expect("same switches"),
            flows_delivered: self.outcomes.values().filter(|o| o.delivered).count(),
            flows_injected: self.outcomes.len(),
            planner_steps: self.plan.as_ref().map(|p| p.steps),
            planner_baseline: self.plan.as_ref().map(|p| p.baseline),
            planner_coverage: self.plan.as_ref().and_then(|p| p.accepted_coverage),
            planner_similarity: self.plan.as_ref().and_then(|p| p.accepted_similarity),
        };
        let verdict = Verdict {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            passed: self.assertions.iter().all(|a| a.passed),
            assertions: self.assertions,
            metrics,
        };
        Outcome {
            verdict,
            view_before: self.view_before.unwrap_or_else(|| view_after.clone()),
            view_after,
            real: self.real,
            tables: self.sim.tables(),
            plans,
            patches,
            plan: self.plan,
        }
    }
}
