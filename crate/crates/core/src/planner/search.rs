use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use super::env::{action_space, ActionFamily, ActionSpec, Env, EnvState, PlannerGoal};
use super::PlannerError;
use crate::attack::PoisonMode;
use crate::controller::FlowRequest;
use crate::topo::{Similarity, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of environment steps.
    pub budget: usize,
    pub seed: u64,
    pub family: ActionFamily,
    /// Actions per episode; defaults to `round(links * (1 - s))`.
    #[serde(default)]
    pub episode_len: Option<usize>,
    /// Episodes run concurrently per policy update.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Share of uniform exploration mixed into the policy.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    /// Weight of coverage progress in the learning signal.
    #[serde(default = "default_shaping")]
    pub shaping: f64,
    #[serde(default)]
    pub mode: PoisonMode,
}

fn one() -> usize {
    1
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_temperature() -> f64 {
    1.0
}

fn default_exploration() -> f64 {
    0.2
}

fn default_shaping() -> f64 {
    1.0
}

impl SearchConfig {
    pub fn new(budget: usize, seed: u64, family: ActionFamily) -> Self {
        SearchConfig {
            budget,
            seed,
            family,
            episode_len: None,
            workers: 1,
            learning_rate: default_learning_rate(),
            temperature: default_temperature(),
            exploration: default_exploration(),
            shaping: default_shaping(),
            mode: PoisonMode::default(),
        }
    }
}

/// Actions per episode for `links` links at similarity `s`.
pub fn episode_len(links: usize, s: f64) -> usize {
    ((links as f64 * (1.0 - s)).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub episode: usize,
    pub reward: i32,
    pub coverage: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub success: bool,
    pub goal: PlannerGoal,
    pub family: ActionFamily,
    pub episode_len: usize,
    pub steps: usize,
    pub episodes: usize,
    pub baseline: usize,
    /// Goal-directed best coverage over visited states within the
    /// similarity bound, and that state's similarity.
    pub best_coverage: usize,
    pub best_similarity: Similarity,
    /// Accepted topology when the goal was met.
    #[serde(serialize_with = "topology_doc")]
    pub accepted: Option<Topology>,
    pub accepted_coverage: Option<usize>,
    pub accepted_similarity: Option<Similarity>,
    /// Actions of the successful episode, in order.
    pub actions: Vec<ActionSpec>,
    pub episode_returns: Vec<i32>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

fn topology_doc<S: Serializer>(t: &Option<Topology>, s: S) -> Result<S::Ok, S::Error> {
    t.as_ref().map(|t| t.to_doc()).serialize(s)
}

impl SearchReport {
    /// Mean episode return over consecutive windows of `window` episodes.
    pub fn return_means(&self, window: usize) -> Vec<f64> {
        self.episode_returns.chunks(window.max(1)).map(|c| c.iter().sum::<i32>() as f64 / c.len() as f64).collect()
    }
}

/// Softmax preferences over link pairs with uniform exploration mixed in.
#[derive(Debug, Clone)]
struct Learner {
    prefs: Vec<f64>,
    baseline: f64,
    updates: usize,
    cfg: SearchConfig,
}

impl Learner {
    fn new(size: usize, cfg: &SearchConfig) -> Self {
        Learner { prefs: vec![0.0; size], baseline: 0.0, updates: 0, cfg: cfg.clone() }
    }

    fn policy(&self) -> WeightedIndex<f64> {
        let tau = self.cfg.temperature.max(1e-6);
        let top = self.prefs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = self.prefs.iter().map(|h| ((h - top) / tau).exp()).collect();
        let sum: f64 = exp.iter().sum();
        let eps = self.cfg.exploration.clamp(0.0, 1.0);
        let uniform = 1.0 / self.prefs.len() as f64;
        WeightedIndex::new(exp.iter().map(|w| (1.0 - eps) * w / sum + eps * uniform)).expect("positive weights")
    }

    fn update(&mut self, actions: &[usize], signal: f64) {
        if self.updates == 0 {
            self.baseline = signal;
        }
        let advantage = signal - self.baseline;
        for &k in actions {
            self.prefs[k] += self.cfg.learning_rate * advantage;
        }
        self.updates += 1;
        self.baseline += (signal - self.baseline) / self.updates.min(100) as f64;
    }
}

#[derive(Debug, Clone)]
struct Episode {
    actions: Vec<ActionSpec>,
    indices: Vec<usize>,
    rows: Vec<(i32, usize, Similarity)>,
    best: Option<(usize, Similarity)>,
    success: Option<EnvState>,
}

fn run_episode(env: &mut Env, policy: &WeightedIndex<f64>, cfg: &SearchConfig, episode: usize, len: usize) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(episode as u64);
    let mut state = env.reset();
    let m = state.links().len();
    let mut out = Episode { actions: Vec::new(), indices: Vec::new(), rows: Vec::new(), best: None, success: None };
    for _ in 0..len {
        let k = policy.sample(&mut rng);
        let variant = rng.gen_range(0..cfg.family.variants());
        let a = ActionSpec::from_index(cfg.family, k, variant, m);
        let step = env.step(&mut state, &a);
        out.actions.push(a);
        out.indices.push(k);
        out.rows.push((step.reward, step.coverage, step.similarity));
        if step.accepted() && step.similarity.at_least(env.goal().similarity) {
            let gain = env.goal().gain(env.baseline(), step.coverage);
            if out.best.is_none_or(|(c, _)| gain > env.goal().gain(env.baseline(), c)) {
                out.best = Some((step.coverage, step.similarity));
            }
        }
        if step.done {
            out.success = Some(state);
            break;
        }
    }
    out
}

/// Episodic search for a deceptive topology meeting `goal`.
///
/// Each episode starts from the real topology and takes up to
/// `episode_len` actions sampled from the policy. Preferences of the
/// sampled link pairs move with the episode's return plus its coverage
/// progress, measured against a running baseline. With one worker the
/// report is a function of the inputs and the seed.
pub fn search(
    real: &Topology,
    goal: &PlannerGoal,
    flows: &[FlowRequest],
    cfg: &SearchConfig,
) -> Result<SearchReport, PlannerError> {
    if cfg.budget == 0 {
        return Err(PlannerError::ZeroBudget);
    }
    let env = Env::new(real, goal.clone(), flows.to_vec(), cfg.mode)?;
    let m = real.link_count();
    let space = action_space(m);
    if space == 0 {
        return Err(PlannerError::EmptyActionSpace);
    }
    let len = cfg.episode_len.unwrap_or_else(|| episode_len(m, goal.similarity)).max(1);
    let workers = cfg.workers.max(1);
    let mut envs = vec![env; workers];
    let baseline = envs[0].baseline();
    let mut learner = Learner::new(space, cfg);
    let mut report = SearchReport {
        success: false,
        goal: goal.clone(),
        family: cfg.family,
        episode_len: len,
        steps: 0,
        episodes: 0,
        baseline,
        best_coverage: baseline,
        best_similarity: Similarity { shared: m, total: m },
        accepted: None,
        accepted_coverage: None,
        accepted_similarity: None,
        actions: Vec::new(),
        episode_returns: Vec::new(),
        trace: Vec::new(),
    };
    while report.steps < cfg.budget && !report.success {
        let policy = learner.policy();
        let mut lens = Vec::new();
        let mut left = cfg.budget - report.steps;
        while lens.len() < workers && left > 0 {
            lens.push(len.min(left));
            left -= len.min(left);
        }
        let first = report.episodes;
        let batch: Vec<Episode> = if lens.len() == 1 {
            vec![run_episode(&mut envs[0], &policy, cfg, first, lens[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = envs
                    .iter_mut()
                    .zip(&lens)
                    .enumerate()
                    .map(|(i, (env, &n))| {
                        let policy = &policy;
                        scope.spawn(move || run_episode(env, policy, cfg, first + i, n))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("episode worker")).collect()
            })
        };
        for ep in batch {
            let episode = report.episodes;
            report.episodes += 1;
            for &(reward, coverage, similarity) in &ep.rows {
                report.steps += 1;
                report.trace.push(TraceRow {
                    step: report.steps,
                    episode,
                    reward,
                    coverage,
                    similarity: similarity.ratio(),
                });
            }
            let ret: i32 = ep.rows.iter().map(|r| r.0).sum();
            report.episode_returns.push(ret);
            if let Some((c, s)) = ep.best {
                if goal.gain(baseline, c) > goal.gain(baseline, report.best_coverage) {
                    report.best_coverage = c;
                    report.best_similarity = s;
                }
            }
            let progress = ep.best.map_or(0, |(c, _)| goal.gain(baseline, c).max(0)) as f64;
            learner.update(&ep.indices, ret as f64 + cfg.shaping * progress);
            if let Some(state) = ep.success {
                report.success = true;
                report.accepted_coverage = Some(state.coverage());
                report.accepted_similarity = Some(state.similarity());
                report.accepted = Some(state.topology().clone());
                report.actions = ep.actions;
                break;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{random_flows, GoalKind};
    use crate::topo::fixtures;

    fn small() -> (Topology, Vec<FlowRequest>, PlannerGoal) {
        let real = fixtures::fattree();
        let flows = random_flows(&real, 5, 30).unwrap();
        let env = Env::new(
            &real,
            PlannerGoal { kind: GoalKind::Eavesdrop("6".into()), coverage_threshold: 0, similarity: 0.9 },
            flows.clone(),
            PoisonMode::Vanilla,
        )
        .unwrap();
        let goal = PlannerGoal {
            kind: GoalKind::Eavesdrop("6".into()),
            coverage_threshold: env.baseline() + 1,
            similarity: 0.9,
        };
        (real, flows, goal)
    }

    #[test]
    fn episode_length_uses_links() {
        assert_eq!(episode_len(48, 0.9), 5);
        assert_eq!(episode_len(66, 0.8), 13);
        assert_eq!(episode_len(10, 1.0), 1);
    }

    #[test]
    fn same_seed_same_report() {
        let (real, flows, goal) = small();
        let cfg = SearchConfig::new(300, 9, ActionFamily::TwoSwitch);
        let a = search(&real, &goal, &flows, &cfg).unwrap();
        let b = search(&real, &goal, &flows, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn success_is_verified() {
        let (real, flows, goal) = small();
        let r = search(&real, &goal, &flows, &SearchConfig::new(20_000, 1, ActionFamily::TwoSwitch)).unwrap();
        assert!(r.success, "{r:?}");
        let t = r.accepted.as_ref().unwrap();
        assert!(goal.coverage_met(r.accepted_coverage.unwrap()));
        let cov = crate::planner::flow_coverage(&real, t, &flows, goal.target()).unwrap().count();
        assert_eq!(Some(cov), r.accepted_coverage);
        assert!(crate::topo::eo_similarity(&real, t).unwrap().at_least(0.9));
        assert_eq!(r.trace.len(), r.steps);
        assert_eq!(r.trace.last().unwrap().reward, 1);
    }

    #[test]
    fn exhausted_budget_accepts_nothing() {
        let (real, flows, mut goal) = small();
        goal.coverage_threshold = flows.len() + 1;
        let r = search(&real, &goal, &flows, &SearchConfig::new(50, 2, ActionFamily::TwoSwitch)).unwrap();
        assert!(!r.success);
        assert!(r.accepted.is_none());
        assert_eq!(r.steps, 50);
        assert!(r.episode_returns.iter().all(|&g| g < 0));
    }

    #[test]
    fn parallel_workers_finish() {
        let (real, flows, goal) = small();
        let mut cfg = SearchConfig::new(20_000, 1, ActionFamily::TwoSwitch);
        cfg.workers = 3;
        let r = search(&real, &goal, &flows, &cfg).unwrap();
        assert!(r.success);
    }
}
