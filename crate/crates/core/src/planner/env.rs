use std::fmt;

use serde::{Deserialize, Serialize};

use super::coverage::{CoverageError, CoverageModel};
use super::PlannerError;
use crate::attack::{plan_topology_poison, PoisonMode};
use crate::controller::{route_flow_on, FlowRequest};
use crate::gappatch::{check_patches, proactive_patch, GapMaps};
use crate::topo::{
    eo_similarity, is_connected, node_reallocation_oriented, pa_matrix_natural, two_switch, Graph, Link, NodeId,
    Pairing, PortAdjacencyMatrix, RewireError, Similarity, Topology,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "node")]
pub enum GoalKind {
    /// Pull flows through a switch the attacker controls.
    Eavesdrop(NodeId),
    /// Push flows away from a monitoring switch.
    Evade(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerGoal {
    pub kind: GoalKind,
    /// At least this many flows for eavesdropping, at most for evasion.
    pub coverage_threshold: usize,
    /// Minimum edge-overlap similarity with the real topology.
    pub similarity: f64,
}

impl PlannerGoal {
    pub fn target(&self) -> &NodeId {
        match &self.kind {
            GoalKind::Eavesdrop(n) | GoalKind::Evade(n) => n,
        }
    }

    pub fn coverage_met(&self, coverage: usize) -> bool {
        match self.kind {
            GoalKind::Eavesdrop(_) => coverage >= self.coverage_threshold,
            GoalKind::Evade(_) => coverage <= self.coverage_threshold,
        }
    }

    /// How far `coverage` moved from `baseline` in the goal's direction.
    pub fn gain(&self, baseline: usize, coverage: usize) -> i64 {
        let (b, c) = (baseline as i64, coverage as i64);
        match self.kind {
            GoalKind::Eavesdrop(_) => c - b,
            GoalKind::Evade(_) => b - c,
        }
    }

    pub fn validate(&self, real: &Topology) -> Result<(), PlannerError> {
        if !real.contains_node(self.target()) {
            return Err(PlannerError::UnknownTarget(self.target().clone()));
        }
        if !(0.0..=1.0).contains(&self.similarity) {
            return Err(PlannerError::InvalidSimilarity(self.similarity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionFamily {
    TwoSwitch,
    #[serde(rename = "node-realloc")]
    NodeReallocation,
}

impl ActionFamily {
    /// Tree-like topologies (few independent cycles) favour 2-switches.
    pub fn auto(t: &Topology) -> Self {
        if t.cycle_rank() * 4 < t.node_count() {
            ActionFamily::TwoSwitch
        } else {
            ActionFamily::NodeReallocation
        }
    }

    /// Variants per link pair.
    pub fn variants(self) -> u8 {
        match self {
            ActionFamily::TwoSwitch => 2,
            ActionFamily::NodeReallocation => 4,
        }
    }
}

impl fmt::Display for ActionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionFamily::TwoSwitch => "two-switch",
            ActionFamily::NodeReallocation => "node-realloc",
        })
    }
}

/// Size of the action space over `m` links.
pub fn action_space(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Link pair `(i, j)`, `i < j`, numbered `k` in row order.
pub fn pair_at(k: usize, m: usize) -> (usize, usize) {
    let mut i = 0;
    let mut rest = k;
    while rest >= m - 1 - i {
        rest -= m - 1 - i;
        i += 1;
    }
    (i, i + 1 + rest)
}

/// A rewiring of two links of the current state, picked by their
/// positions in the sorted link list.
///
/// For 2-switches, variant 0 joins the first endpoints and the second
/// endpoints of the two links, variant 1 crosses them. For reallocations,
/// bit 0 picks which end of the first link is the relocated switch and
/// bit 1 flips its orientation inside the second link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub family: ActionFamily,
    pub first: usize,
    pub second: usize,
    pub variant: u8,
}

impl ActionSpec {
    pub fn from_index(family: ActionFamily, k: usize, variant: u8, m: usize) -> Self {
        let (first, second) = pair_at(k, m);
        ActionSpec { family, first, second, variant }
    }

    pub fn index(&self, m: usize) -> usize {
        let (i, j) = (self.first.min(self.second), self.first.max(self.second));
        i * m - i * (i + 1) / 2 + (j - i - 1)
    }
}

/// Why an action left the state unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum Rejection {
    #[error("link index out of range")]
    OutOfRange,
    #[error("{0}")]
    Rewire(String),
    #[error("degree sequence changed")]
    DegreeChanged,
    #[error("topology would be disconnected")]
    Disconnected,
    #[error("not realizable: {0}")]
    Unrealizable(String),
}

impl From<RewireError> for Rejection {
    fn from(e: RewireError) -> Self {
        Rejection::Rewire(e.to_string())
    }
}

/// Current deceptive topology of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    topology: Topology,
    links: Vec<Link>,
    coverage: usize,
    similarity: Similarity,
    actions_taken: usize,
}

impl EnvState {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Links in sorted order; actions index into this list.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn coverage(&self) -> usize {
        self.coverage
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn actions_taken(&self) -> usize {
        self.actions_taken
    }

    pub fn pa_matrix(&self) -> PortAdjacencyMatrix {
        pa_matrix_natural(&self.topology)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub reward: i32,
    pub done: bool,
    pub rejection: Option<Rejection>,
    pub coverage: usize,
    pub similarity: Similarity,
}

impl StepOutcome {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

/// The rewiring environment: real topology, goal and flow set.
#[derive(Debug, Clone)]
pub struct Env {
    real: Topology,
    goal: PlannerGoal,
    flows: Vec<FlowRequest>,
    mode: PoisonMode,
    model: CoverageModel,
    target: usize,
    baseline: usize,
}

impl Env {
    pub fn new(
        real: &Topology,
        goal: PlannerGoal,
        flows: Vec<FlowRequest>,
        mode: PoisonMode,
    ) -> Result<Self, PlannerError> {
        goal.validate(real)?;
        let mut model = CoverageModel::new(real, &flows)?;
        let target = model.index_of(goal.target()).expect("validated target");
        let baseline = model.count(real, target)?;
        Ok(Env { real: real.clone(), goal, flows, mode, model, target, baseline })
    }

    pub fn real(&self) -> &Topology {
        &self.real
    }

    pub fn goal(&self) -> &PlannerGoal {
        &self.goal
    }

    pub fn flows(&self) -> &[FlowRequest] {
        &self.flows
    }

    /// Coverage of the real topology.
    pub fn baseline(&self) -> usize {
        self.baseline
    }

    pub fn reset(&self) -> EnvState {
        EnvState {
            topology: self.real.clone(),
            links: self.real.links().cloned().collect(),
            coverage: self.baseline,
            similarity: Similarity { shared: self.real.link_count(), total: self.real.link_count() },
            actions_taken: 0,
        }
    }

    pub fn coverage_of(&mut self, t: &Topology) -> Result<usize, CoverageError> {
        self.model.count(t, self.target)
    }

    /// The topology `a` would produce from `state`, with degree and
    /// connectivity checked.
    pub fn apply(&self, state: &EnvState, a: &ActionSpec) -> Result<Topology, Rejection> {
        let links = &state.links;
        let (e1, e2) = match (links.get(a.first), links.get(a.second)) {
            (Some(e1), Some(e2)) => (e1, e2),
            _ => return Err(Rejection::OutOfRange),
        };
        let next = match a.family {
            ActionFamily::TwoSwitch => {
                let pairing = if a.variant.is_multiple_of(2) { Pairing::AcBd } else { Pairing::AdBc };
                two_switch(&state.topology, e1, e2, pairing)?
            }
            ActionFamily::NodeReallocation => {
                let c = if a.variant & 1 == 0 { &e1.first().node } else { &e1.second().node };
                node_reallocation_oriented(&state.topology, c, e2, a.variant & 2 != 0)?
            }
        };
        if next.degree_sequence() != self.real.degree_sequence() {
            return Err(Rejection::DegreeChanged);
        }
        if !is_connected(&next) {
            return Err(Rejection::Disconnected);
        }
        Ok(next)
    }

    /// Whether the attack can realize `t` and patch every flow's gaps
    /// without clashing with the routes the controller would install.
    pub fn realizable(&self, t: &Topology) -> Result<(), Rejection> {
        realizable(&self.real, t, &self.flows, self.mode)
    }

    /// Applies `a`; rejected actions leave `state` untouched.
    pub fn step(&mut self, state: &mut EnvState, a: &ActionSpec) -> StepOutcome {
        state.actions_taken += 1;
        let next = self.apply(state, a).and_then(|t| self.realizable(&t).map(|_| t));
        let next = match next {
            Ok(t) => t,
            Err(r) => {
                return StepOutcome {
                    reward: -1,
                    done: false,
                    rejection: Some(r),
                    coverage: state.coverage,
                    similarity: state.similarity,
                }
            }
        };
        let coverage = match self.coverage_of(&next) {
            Ok(c) => c,
            Err(e) => {
                return StepOutcome {
                    reward: -1,
                    done: false,
                    rejection: Some(Rejection::Unrealizable(e.to_string())),
                    coverage: state.coverage,
                    similarity: state.similarity,
                }
            }
        };
        let similarity = eo_similarity(&self.real, &next).expect("same switches");
        state.links = next.links().cloned().collect();
        state.topology = next;
        state.coverage = coverage;
        state.similarity = similarity;
        let success = self.goal.coverage_met(coverage) && similarity.at_least(self.goal.similarity);
        StepOutcome { reward: if success { 1 } else { -1 }, done: success, rejection: None, coverage, similarity }
    }
}

/// Realizability of a deceptive topology for a flow set: it must be
/// plannable and its gap patches must not clash with the routes.
pub fn realizable(real: &Topology, t: &Topology, flows: &[FlowRequest], mode: PoisonMode) -> Result<(), Rejection> {
    let set = plan_topology_poison(real, t, mode).map_err(|e| Rejection::Unrealizable(e.to_string()))?;
    if set.is_empty() {
        return Ok(());
    }
    let g = Graph::new(t);
    let routes: Vec<_> = flows.iter().filter_map(|f| route_flow_on(t, &g, f).ok()).collect();
    let patches = proactive_patch(&GapMaps::from_plans(&set), &routes);
    check_patches(routes.iter().flat_map(|r| r.entries.iter().map(|(s, e)| (s, e))), &patches)
        .map_err(|e| Rejection::Unrealizable(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::random_flows;
    use crate::topo::fixtures;

    fn fattree_env() -> Env {
        let real = fixtures::fattree();
        let flows = random_flows(&real, 11, 40).unwrap();
        let goal = PlannerGoal { kind: GoalKind::Eavesdrop("6".into()), coverage_threshold: 40, similarity: 0.9 };
        Env::new(&real, goal, flows, PoisonMode::Vanilla).unwrap()
    }

    #[test]
    fn pair_numbering_round_trips() {
        let m = 7;
        for k in 0..action_space(m) {
            let a = ActionSpec::from_index(ActionFamily::TwoSwitch, k, 0, m);
            assert!(a.first < a.second && a.second < m);
            assert_eq!(a.index(m), k);
        }
        assert_eq!(action_space(48), 1128);
    }

    #[test]
    fn rejected_action_keeps_state() {
        let mut env = fattree_env();
        let mut s = env.reset();
        let before = s.clone();
        let a = ActionSpec { family: ActionFamily::TwoSwitch, first: 0, second: 0, variant: 0 };
        let out = env.step(&mut s, &a);
        assert_eq!(out.reward, -1);
        assert!(!out.accepted());
        assert_eq!(s.topology(), before.topology());
        assert_eq!(s.actions_taken(), 1);
    }

    #[test]
    fn disconnecting_switch_is_rejected() {
        // Swapping the two leaves of one edge switch with the two links of
        // another pod can strand them; find such a pair by search.
        let env = fattree_env();
        let s = env.reset();
        let m = s.links().len();
        let found = (0..action_space(m)).flat_map(|k| (0..2).map(move |v| (k, v))).find(|&(k, v)| {
            let a = ActionSpec::from_index(ActionFamily::TwoSwitch, k, v, m);
            env.apply(&s, &a) == Err(Rejection::Disconnected)
        });
        assert!(found.is_some());
    }

    #[test]
    fn returning_to_start_restores_start_coverage() {
        let mut env = fattree_env();
        let mut s = env.reset();
        let m = s.links().len();
        let a = (0..action_space(m))
            .map(|k| ActionSpec::from_index(ActionFamily::TwoSwitch, k, 0, m))
            .find(|a| env.apply(&s, a).is_ok() && env.realizable(&env.apply(&s, a).unwrap()).is_ok())
            .unwrap();
        let (e1, e2) = (s.links()[a.first].clone(), s.links()[a.second].clone());
        assert!(env.step(&mut s, &a).accepted());
        let added = crate::topo::pairing_links(&e1, &e2, Pairing::AcBd);
        let i = s.links().iter().position(|l| l == &added[0]).unwrap();
        let j = s.links().iter().position(|l| l == &added[1]).unwrap();
        // Re-pairing the new links the other way recreates both originals.
        let back = (0..2)
            .map(|v| ActionSpec { family: ActionFamily::TwoSwitch, first: i.min(j), second: i.max(j), variant: v })
            .find(|b| env.apply(&s, b).map(|t| &t == env.real()).unwrap_or(false))
            .unwrap();
        let out = env.step(&mut s, &back);
        assert!(out.accepted());
        assert_eq!(s.topology(), env.real());
        assert_eq!(out.coverage, env.baseline());
        assert_eq!(out.similarity, Similarity { shared: 48, total: 48 });
    }

    #[test]
    fn goal_met_gives_reward_and_done() {
        let real = fixtures::fattree();
        let flows = random_flows(&real, 11, 40).unwrap();
        let base =
            Env::new(&real, fattree_env().goal().clone(), flows.clone(), PoisonMode::Vanilla).unwrap().baseline();
        let goal = PlannerGoal { kind: GoalKind::Eavesdrop("6".into()), coverage_threshold: base, similarity: 0.9 };
        let mut env = Env::new(&real, goal, flows, PoisonMode::Vanilla).unwrap();
        let mut s = env.reset();
        let m = s.links().len();
        // Any accepted action keeping coverage at the baseline succeeds.
        let mut done = false;
        for k in 0..action_space(m) {
            let a = ActionSpec::from_index(ActionFamily::TwoSwitch, k, 0, m);
            let mut probe = s.clone();
            let out = env.step(&mut probe, &a);
            if out.accepted() && out.coverage >= base {
                assert_eq!((out.reward, out.done), (1, true));
                s = probe;
                done = true;
                break;
            }
        }
        assert!(done);
        assert_eq!(s.actions_taken(), 1);
    }

    #[test]
    fn reallocation_variants_pick_node_and_orientation() {
        let real = fixtures::motivating_example();
        let flows = vec![FlowRequest::new("f1", "H1", "H2")];
        let goal = PlannerGoal { kind: GoalKind::Evade("D".into()), coverage_threshold: 0, similarity: 0.0 };
        let env = Env::new(&real, goal, flows, PoisonMode::Vanilla).unwrap();
        let s = env.reset();
        let ac = s.links().iter().position(|l| l == &Link::between("A", 2, "C", 1)).unwrap();
        let ad = s.links().iter().position(|l| l == &Link::between("A", 1, "D", 1)).unwrap();
        // C is the second end of A2-1C.
        let a = ActionSpec { family: ActionFamily::NodeReallocation, first: ac, second: ad, variant: 1 };
        let t = env.apply(&s, &a).unwrap();
        assert_eq!(t, node_reallocation_oriented(&real, &"C".into(), &Link::between("A", 1, "D", 1), false).unwrap());
        let flipped = ActionSpec { variant: 3, ..a };
        assert_ne!(env.apply(&s, &flipped).unwrap(), t);
    }

    #[test]
    fn auto_family_follows_cycle_rank() {
        assert_eq!(ActionFamily::auto(&fixtures::segment()), ActionFamily::TwoSwitch);
        assert_eq!(ActionFamily::auto(&fixtures::chinanet()), ActionFamily::NodeReallocation);
    }
}
