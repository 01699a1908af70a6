#![allow(dead_code)]

use ofdp_sim::attack::PoisonMode;
use ofdp_sim::controller::FlowRequest;
use ofdp_sim::planner::{action_space, random_flows, ActionFamily, ActionSpec, Env, GoalKind, PlannerGoal};
use ofdp_sim::topo::{random::random_connected, NodeId, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A real topology, a deceptive one reached by accepted planner actions,
/// a flow set and a target switch.
pub struct Instance {
    pub real: Topology,
    pub deceptive: Topology,
    pub flows: Vec<FlowRequest>,
    pub target: NodeId,
    pub actions: usize,
}

pub fn instance(seed: u64, max_nodes: usize, max_flows: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(6..=max_nodes);
    let extra = rng.gen_range(2..=n / 2 + 2);
    let real = random_connected(&mut rng, n, extra);
    let flows = random_flows(&real, rng.gen(), max_flows.min(n * (n - 1))).expect("enough hosts");
    let target = NodeId::from(rng.gen_range(0..n));
    let goal =
        PlannerGoal { kind: GoalKind::Eavesdrop(target.clone()), coverage_threshold: usize::MAX, similarity: 0.0 };
    let mut env = Env::new(&real, goal, flows.clone(), PoisonMode::Vanilla).expect("valid env");
    let mut state = env.reset();
    let wanted = rng.gen_range(1..=3);
    let mut accepted = 0;
    let m = real.link_count();
    for _ in 0..200 {
        if accepted == wanted {
            break;
        }
        let family = if rng.gen_bool(0.5) { ActionFamily::TwoSwitch } else { ActionFamily::NodeReallocation };
        let a =
            ActionSpec::from_index(family, rng.gen_range(0..action_space(m)), rng.gen_range(0..family.variants()), m);
        if env.step(&mut state, &a).accepted() {
            accepted += 1;
        }
    }
    Instance { real, deceptive: state.topology().clone(), flows, target, actions: accepted }
}
