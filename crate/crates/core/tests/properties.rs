mod common;

use ofdp_sim::attack::{
    compute_poison_with, plan_topology_poison, DeceptiveLink, PathChoice, PoisonMode, VlanAllocator,
};
use ofdp_sim::controller::{Controller, ControllerConfig};
use ofdp_sim::dataplane::Network;
use ofdp_sim::gappatch::PatchMode;
use ofdp_sim::planner::{
    action_space, flow_coverage, oracle_coverage, random_flows, ActionFamily, ActionSpec, Env, GoalKind, PlannerGoal,
};
use ofdp_sim::sim::{SimConfig, Simulation};
use ofdp_sim::topo::random::{random_connected, random_two_switch};
use ofdp_sim::topo::{eo_similarity, is_connected, Topology};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn topology(seed: u64, n: usize, extra: usize) -> Topology {
    random_connected(&mut ChaCha8Rng::seed_from_u64(seed), n, extra)
}

fn switched(seed: u64, real: &Topology, steps: usize) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut t = real.clone();
    for _ in 0..steps {
        if let Some(next) = random_two_switch(&mut rng, &t) {
            t = next;
        }
    }
    t
}

fn mode() -> impl Strategy<Value = PoisonMode> {
    prop_oneof![Just(PoisonMode::Vanilla), Just(PoisonMode::VlanInportSrc)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discovery_reports_the_real_links(seed in any::<u64>(), n in 2usize..30, extra in 0usize..30) {
        let real = topology(seed, n, extra);
        let mut net = Network::new(real.clone());
        let mut c = Controller::new(&real, ControllerConfig::default());
        c.connect(&mut net).unwrap();
        c.run_discovery_round(&mut net).unwrap();
        c.rebuild_view();
        prop_assert_eq!(c.view().topology.link_set(), real.link_set());
    }

    #[test]
    fn realizable_targets_become_the_view(seed in any::<u64>(), n in 4usize..14, steps in 1usize..4, fp in any::<bool>()) {
        let real = topology(seed, n, n / 2 + 1);
        let target = switched(seed, &real, steps);
        let mode = if fp { PoisonMode::VlanInportSrc } else { PoisonMode::Vanilla };
        prop_assume!(plan_topology_poison(&real, &target, mode).is_ok());
        let mut config = SimConfig::default();
        config.controller.fingerprint = fp;
        let mut sim = Simulation::new(real, config).unwrap();
        sim.tick().unwrap();
        sim.poison(&target, None, false).unwrap();
        sim.tick().unwrap();
        prop_assert_eq!(&sim.view_links(), target.link_set());
        sim.run_ticks(3).unwrap();
        prop_assert_eq!(&sim.view_links(), target.link_set());
    }

    #[test]
    fn auto_path_is_never_longer(seed in any::<u64>(), n in 4usize..16, mode in mode()) {
        let real = topology(seed, n, n / 2 + 1);
        let target = switched(seed, &real, 2);
        for link in target.links().filter(|l| !real.has_link(l)) {
            for dir in [DeceptiveLink::from_link(link), DeceptiveLink::from_link(link).reverse()] {
                let count = |choice| {
                    compute_poison_with(&real, &dir, &mut VlanAllocator::new(), mode, choice).map(|p| p.entries.len()).ok()
                };
                let forced = [count(PathChoice::ForceLoopback), count(PathChoice::ForceNoLoop)];
                let best = forced.iter().flatten().min().copied();
                prop_assert_eq!(count(PathChoice::Auto), best);
            }
        }
    }

    #[test]
    fn proactive_patching_delivers_everything(seed in any::<u64>(), n in 4usize..12, steps in 1usize..3, fp in any::<bool>()) {
        let real = topology(seed, n, n / 2 + 1);
        let target = switched(seed, &real, steps);
        let flows = random_flows(&real, seed, 12.min(n * (n - 1))).unwrap();
        let mode = if fp { PoisonMode::VlanInportSrc } else { PoisonMode::Vanilla };
        prop_assume!(plan_topology_poison(&real, &target, mode).is_ok());
        let mut config = SimConfig::default();
        config.controller.fingerprint = fp;
        let mut sim = Simulation::new(real, config).unwrap();
        sim.declare_flows(flows.iter().cloned());
        sim.tick().unwrap();
        // Targets whose patches conflict are rejected, not realized.
        prop_assume!(sim.poison(&target, Some(PatchMode::Proactive), false).is_ok());
        sim.tick().unwrap();
        let out = sim.inject_flows(&flows).unwrap();
        prop_assert!(out.iter().all(|o| o.delivered && o.unexpected == 0));
    }

    #[test]
    fn env_steps_keep_degrees_and_connectivity(seed in any::<u64>(), n in 5usize..20, picks in prop::collection::vec((any::<bool>(), any::<usize>(), 0u8..4), 1..30)) {
        let real = topology(seed, n, n / 2 + 2);
        let flows = random_flows(&real, seed, 10).unwrap();
        let goal = PlannerGoal { kind: GoalKind::Eavesdrop("0".into()), coverage_threshold: usize::MAX, similarity: 0.0 };
        let mut env = Env::new(&real, goal, flows, PoisonMode::Vanilla).unwrap();
        let mut state = env.reset();
        let m = real.link_count();
        prop_assume!(action_space(m) > 0);
        for (two, k, v) in picks {
            let family = if two { ActionFamily::TwoSwitch } else { ActionFamily::NodeReallocation };
            let a = ActionSpec::from_index(family, k % action_space(m), v % family.variants(), m);
            let before = state.clone();
            let out = env.step(&mut state, &a);
            if out.accepted() {
                prop_assert_eq!(state.topology().degree_sequence(), real.degree_sequence());
                prop_assert!(is_connected(state.topology()));
                prop_assert_eq!(out.similarity, eo_similarity(&real, state.topology()).unwrap());
            } else {
                prop_assert_eq!(state.topology(), before.topology());
                prop_assert_eq!(out.reward, -1);
            }
        }
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(seed in any::<u64>(), n in 3usize..25, steps in 0usize..6) {
        let g = topology(seed, n, n);
        let g2 = switched(seed, &g, steps);
        let ab = eo_similarity(&g, &g2).unwrap();
        let ba = eo_similarity(&g2, &g).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab.shared <= ab.total);
        prop_assert_eq!(ab.total, g.link_count());
        prop_assert_eq!(ab.shared, g.links().filter(|l| g2.has_link(l)).count());
        let same = eo_similarity(&g, &g).unwrap();
        prop_assert_eq!(same.shared, same.total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predicted_coverage_matches_simulation(seed in any::<u64>()) {
        let i = common::instance(seed, 14, 12);
        let predicted = flow_coverage(&i.real, &i.deceptive, &i.flows, &i.target).unwrap();
        let simulated = oracle_coverage(&i.real, &i.deceptive, &i.flows, &i.target).unwrap();
        prop_assert_eq!(predicted.covered, simulated.covered);
    }
}
