//! Episode-based deep reinforcement learning for flow classification.
//!
//! Each episode draws a fresh batch of training flows into an environment;
//! the agent classifies them one step at a time under epsilon-greedy
//! exploration, earning a 1/0 reward per correct/incorrect prediction and
//! storing every interaction in a bounded FIFO memory. Experience replays
//! then train the active network against targets built from a delayed
//! target-network copy, with the taken action's output replaced by the
//! observed reward — no future-reward term, since a flow's class does not
//! depend on later predictions. Training stops once the per-episode mean
//! replay loss stabilizes.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{train_batch, AdamState, Mlp, OutputActivation};
use crate::preprocess::{EncodedDataset, Scenario};
use crate::util::{argmax_tie_low, derive_seed, rng_from_seed, sample_without_replacement};

pub const HIDDEN_LAYER_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub exploration_rate: f64,
    pub exploration_decay: f64,
    pub exploration_floor: f64,
    pub replays_per_episode: usize,
    pub replay_epochs: usize,
    /// Consecutive previous episodes the latest loss must stay close to.
    pub min_stable_episodes: usize,
    pub stability_range: f64,
    /// Minibatch size as a fraction of the training set.
    pub minibatch_fraction: f64,
    /// Memory capacity as a fraction of the training set (1.5x minibatch).
    pub memory_fraction: f64,
    /// Target network refresh cadence, in episodes.
    pub sync_every_episodes: usize,
    pub max_episodes: usize,
    /// SGD slice of the minibatch per gradient step within an epoch.
    pub sgd_batch_size: usize,
    pub learning_rate: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            exploration_rate: 0.2,
            exploration_decay: 0.01,
            exploration_floor: 0.05,
            replays_per_episode: 2,
            replay_epochs: 20,
            min_stable_episodes: 3,
            stability_range: 0.05,
            minibatch_fraction: 0.025,
            memory_fraction: 0.0375,
            sync_every_episodes: 1,
            max_episodes: 1000,
            sgd_batch_size: 32,
            learning_rate: 0.001,
        }
    }
}

impl AgentConfig {
    pub fn memory_capacity(&self, n_train: usize) -> usize {
        ((self.memory_fraction * n_train as f64).ceil() as usize).max(1)
    }

    pub fn minibatch_size(&self, n_train: usize) -> usize {
        ((self.minibatch_fraction * n_train as f64).ceil() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.exploration_floor <= self.exploration_rate && self.exploration_rate <= 1.0) {
            return Err(Error::config("exploration rate outside [floor, 1]"));
        }
        for (name, v) in [
            ("minibatch_fraction", self.minibatch_fraction),
            ("memory_fraction", self.memory_fraction),
        ] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::config(format!("{name} {v} outside (0, 1)")));
            }
        }
        if self.replays_per_episode == 0 || self.replay_epochs == 0 || self.max_episodes == 0 {
            return Err(Error::config("episode loop constants must be positive"));
        }
        Ok(())
    }
}

/// One interaction: the observed flow, the predicted class, and whether the
/// prediction was correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Bounded FIFO store of experiences; eviction is strictly oldest-first.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buf: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn remember(&mut self, experience: Experience) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(experience);
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.buf[i]
    }

    /// Uniform sample without replacement.
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Vec<&Experience> {
        sample_without_replacement(rng, self.buf.len(), k)
            .into_iter()
            .map(|i| &self.buf[i])
            .collect()
    }
}

/// Replays one episode's worth of training flows to the agent.
pub struct Environment<'a> {
    dataset: &'a EncodedDataset,
    targets: &'a [usize],
    episode_rows: Vec<usize>,
    cursor: usize,
}

impl<'a> Environment<'a> {
    pub fn new(dataset: &'a EncodedDataset, targets: &'a [usize]) -> Self {
        Environment {
            dataset,
            targets,
            episode_rows: Vec::new(),
            cursor: 0,
        }
    }

    /// Start an episode on a fresh uniform draw of `step_budget` flows.
    pub fn refill(&mut self, step_budget: usize, rng: &mut impl Rng) {
        let n = self.dataset.n_rows();
        self.episode_rows = sample_without_replacement(rng, n, step_budget.min(n));
        self.cursor = 0;
    }

    pub fn done(&self) -> bool {
        self.cursor >= self.episode_rows.len()
    }

    pub fn current_state(&self) -> Result<&'a [f64]> {
        if self.done() {
            return Err(Error::input("episode is already over"));
        }
        Ok(self.dataset.features.row(self.episode_rows[self.cursor]))
    }

    /// Reward 1 iff the action names the current flow's class; advances to
    /// the next flow.
    pub fn step(&mut self, action: usize) -> Result<(f64, bool)> {
        if self.done() {
            return Err(Error::input("step after episode end"));
        }
        let truth = self.targets[self.episode_rows[self.cursor]];
        self.cursor += 1;
        Ok(((action == truth) as usize as f64, self.done()))
    }
}

/// Epsilon-greedy action choice over the network's outputs.
pub fn select_action(
    net: &Mlp,
    state: &[f64],
    epsilon: f64,
    n_actions: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..n_actions));
    }
    let out = net.predict(state)?;
    Ok(greedy_action(&out))
}

/// Network argmax; the binary head thresholds its single output at 0.5.
pub fn greedy_action(output: &[f64]) -> usize {
    if output.len() == 1 {
        (output[0] > 0.5) as usize
    } else {
        argmax_tie_low(output)
    }
}

/// Training target for one replayed experience: the target network's output
/// with the taken action's entry replaced by the reward. Multi-class targets
/// renormalize to a distribution; when a zeroed action held all the mass the
/// leftover spreads uniformly over the other classes.
pub fn replay_target(target_net_output: &[f64], action: usize, reward: f64) -> Vec<f64> {
    if target_net_output.len() == 1 {
        // binary head: action 1's target is the reward, action 0's its complement
        let t = if action == 1 { reward } else { 1.0 - reward };
        return vec![t];
    }
    let mut t = target_net_output.to_vec();
    t[action] = reward;
    let sum: f64 = t.iter().sum();
    if sum > 0.0 {
        t.iter_mut().for_each(|v| *v /= sum);
    } else {
        let share = 1.0 / (t.len() - 1) as f64;
        for (i, v) in t.iter_mut().enumerate() {
            *v = if i == action { 0.0 } else { share };
        }
    }
    t
}

/// Stable iff the latest entry sits within `range` of each of the previous
/// `window` entries.
pub fn is_stable(loss_history: &[f64], window: usize, range: f64) -> bool {
    if loss_history.len() < window + 1 {
        return false;
    }
    let latest = *loss_history.last().unwrap();
    loss_history[loss_history.len() - 1 - window..loss_history.len() - 1]
        .iter()
        .all(|&prev| (latest - prev).abs() <= range)
}

/// Active/target network pair with its replay memory and exploration state.
pub struct Agent {
    pub active: Mlp,
    pub target: Mlp,
    pub memory: ReplayMemory,
    pub epsilon: f64,
    pub loss_history: Vec<f64>,
    config: AgentConfig,
    adam: AdamState,
}

impl Agent {
    pub fn new(nf: usize, n_actions: usize, config: AgentConfig, n_train: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let (out_dim, activation) = if n_actions == 2 {
            (1, OutputActivation::Sigmoid)
        } else {
            (n_actions, OutputActivation::Softmax)
        };
        let active = Mlp::new(
            &[nf, HIDDEN_LAYER_SIZE, HIDDEN_LAYER_SIZE, out_dim],
            activation,
            derive_seed(seed, 0),
        )?;
        let target = active.clone();
        let adam = AdamState::new(&active, config.learning_rate);
        Ok(Agent {
            active,
            target,
            memory: ReplayMemory::new(config.memory_capacity(n_train)),
            epsilon: config.exploration_rate,
            loss_history: Vec::new(),
            config,
            adam,
        })
    }

    /// Copy active-network parameters into the target network.
    pub fn sync_target(&mut self) {
        self.target = self.active.clone();
    }

    fn decay_epsilon(&mut self) {
        self.epsilon =
            (self.epsilon - self.config.exploration_decay).max(self.config.exploration_floor);
    }

    /// One experience replay: sample a minibatch, build reward-substituted
    /// targets from the frozen target network, train for `replay_epochs`
    /// passes, then decay epsilon. Returns the mean loss across all gradient
    /// steps, or `None` when the memory cannot fill a minibatch yet.
    pub fn experience_replay(&mut self, minibatch_size: usize, rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
        if self.memory.len() < minibatch_size {
            return Ok(None);
        }
        let batch = self.memory.sample(minibatch_size, rng);
        let states: Vec<Vec<f64>> = batch.iter().map(|e| e.state.clone()).collect();
        let mut targets = Vec::with_capacity(batch.len());
        for e in &batch {
            let out = self.target.predict(&e.state)?;
            targets.push(replay_target(&out, e.action, e.reward));
        }
        let mut order: Vec<usize> = (0..states.len()).collect();
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for _ in 0..self.config.replay_epochs {
            use rand::seq::SliceRandom;
            order.shuffle(rng);
            for chunk in order.chunks(self.config.sgd_batch_size.max(1)) {
                let xs: Vec<&[f64]> = chunk.iter().map(|&i| states[i].as_slice()).collect();
                let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
                loss_sum += train_batch(&mut self.active, &mut self.adam, &xs, &ts)?;
                steps += 1;
            }
        }
        self.decay_epsilon();
        Ok(Some(loss_sum / steps as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub episode: usize,
    pub epsilon: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct DrlOutcome {
    pub network: Mlp,
    pub episodes: Vec<EpisodeStat>,
    /// False when the loop hit `max_episodes` without stabilizing.
    pub converged: bool,
}

/// Run the episode loop until the replay loss stabilizes and return the
/// active network.
pub fn train_agent(
    train: &EncodedDataset,
    scenario: Scenario,
    config: &AgentConfig,
    seed: u64,
) -> Result<DrlOutcome> {
    if train.n_rows() == 0 {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    let targets = train.targets(scenario);
    let n_actions = train.n_classes(scenario);
    let n = train.n_rows();
    let mut agent = Agent::new(train.nf(), n_actions, *config, n, seed)?;
    let minibatch = config.minibatch_size(n);
    let step_budget = agent.memory.capacity();
    let mut env = Environment::new(train, &targets);
    let mut rng = rng_from_seed(derive_seed(seed, 1));

    let mut episodes = Vec::new();
    let mut converged = false;
    let mut best: Option<(f64, Mlp)> = None;
    for episode in 0..config.max_episodes {
        env.refill(step_budget, &mut rng);
        while !env.done() {
            let state = env.current_state()?;
            let action = select_action(&agent.active, state, agent.epsilon, n_actions, &mut rng)?;
            let (reward, _) = env.step(action)?;
            agent.memory.remember(Experience {
                state: state.to_vec(),
                action,
                reward,
            });
        }
        let mut losses = Vec::new();
        for _ in 0..config.replays_per_episode {
            if let Some(loss) = agent.experience_replay(minibatch, &mut rng)? {
                losses.push(loss);
            }
        }
        if episode % config.sync_every_episodes == config.sync_every_episodes - 1 {
            agent.sync_target();
        }
        if losses.is_empty() {
            continue; // memory still underfull; no replay happened
        }
        let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        agent.loss_history.push(mean_loss);
        episodes.push(EpisodeStat {
            episode,
            epsilon: agent.epsilon,
            mean_loss,
        });
        if best.as_ref().is_none_or(|(l, _)| mean_loss < *l) {
            best = Some((mean_loss, agent.active.clone()));
        }
        if is_stable(
            &agent.loss_history,
            config.min_stable_episodes,
            config.stability_range,
        ) {
            converged = true;
            break;
        }
    }
    let network = if converged {
        agent.active
    } else {
        // non-convergence: fall back to the best-loss snapshot
        best.map(|(_, net)| net).unwrap_or(agent.active)
    };
    Ok(DrlOutcome {
        network,
        episodes,
        converged,
    })
}

/// Classify rows with a trained network.
pub fn drl_predict(net: &Mlp, features: &crate::data::Matrix) -> Result<Vec<usize>> {
    (0..features.n_rows())
        .map(|i| Ok(greedy_action(&net.predict(features.row(i))?)))
        .collect()
}

/// Episode log as CSV (episode, epsilon, mean_replay_loss).
pub fn write_episode_log<W: std::io::Write>(stats: &[EpisodeStat], mut w: W) -> Result<()> {
    writeln!(w, "episode,epsilon,mean_replay_loss")?;
    for s in stats {
        writeln!(w, "{},{},{}", s.episode, s.epsilon, s.mean_loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::cross_entropy_loss;
    use crate::synth::separable_dataset;
    use approx::assert_abs_diff_eq;

    #[test]
    fn env_rewards_and_budget() {
        let ds = separable_dataset(10, 4, 1);
        let targets = ds.targets(Scenario::Binary);
        let mut env = Environment::new(&ds, &targets);
        env.refill(1, &mut rng_from_seed(2));
        let truth = targets[env.episode_rows[0]];
        let (reward, done) = env.step(truth).unwrap();
        assert_eq!(reward, 1.0);
        assert!(done); // budget of one step
        assert!(env.step(0).is_err());

        env.refill(2, &mut rng_from_seed(3));
        let wrong = 1 - targets[env.episode_rows[0]];
        let (reward, done) = env.step(wrong).unwrap();
        assert_eq!(reward, 0.0);
        assert!(!done);
    }

    #[test]
    fn memory_fifo_semantics() {
        let mut memory = ReplayMemory::new(600);
        let exp = |i: usize| Experience {
            state: vec![i as f64],
            action: 0,
            reward: 1.0,
        };
        for i in 0..600 {
            memory.remember(exp(i));
            assert_eq!(memory.len(), i + 1);
        }
        memory.remember(exp(600));
        assert_eq!(memory.len(), 600);
        assert_eq!(memory.get(0).state, vec![1.0]); // oldest evicted

        // table-driven sizing: 16,000 rows -> minibatch 400, memory 600
        let config = AgentConfig::default();
        assert_eq!(config.memory_capacity(16_000), 600);
        assert_eq!(config.minibatch_size(16_000), 400);
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let net = Mlp::new(&[3, 20, 20, 4], OutputActivation::Softmax, 5).unwrap();
        let state = [0.3, 0.6, 0.1];
        let expected = argmax_tie_low(&net.predict(&state).unwrap());
        let mut rng = rng_from_seed(7);
        for _ in 0..50 {
            assert_eq!(
                select_action(&net, &state, 0.0, 4, &mut rng).unwrap(),
                expected
            );
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = Mlp::new(&[2, 20, 20, 3], OutputActivation::Softmax, 5).unwrap();
        let mut rng = rng_from_seed(11);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[select_action(&net, &[0.1, 0.2], 1.0, 3, &mut rng).unwrap()] += 1;
        }
        // 3 sigma around 10000/3 with p = 1/3
        let sigma = (10_000.0_f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - 10_000.0 / 3.0).abs() < 3.0 * sigma,
                "counts {counts:?}"
            );
        }
    }

    #[test]
    fn exploration_fraction_matches_epsilon() {
        // count how often the action differs from greedy under eps = 0.2
        let net = Mlp::new(&[2, 20, 20, 1], OutputActivation::Sigmoid, 5).unwrap();
        let state = [0.9, 0.9];
        let mut rng = rng_from_seed(13);
        let mut random_draws = 0usize;
        let n = 10_000;
        for _ in 0..n {
            // replicate the decision structure: first draw decides the branch
            if rng.gen::<f64>() < 0.2 {
                random_draws += 1;
                let _ = rng.gen_range(0..2usize);
            } else {
                let _ = net.predict(&state).unwrap();
            }
        }
        let fraction = random_draws as f64 / n as f64;
        assert!((fraction - 0.2).abs() <= 0.02, "fraction {fraction}");
    }

    #[test]
    fn replay_targets_use_reward_only() {
        // binary head
        assert_eq!(replay_target(&[0.8], 1, 1.0), vec![1.0]);
        assert_eq!(replay_target(&[0.8], 1, 0.0), vec![0.0]);
        assert_eq!(replay_target(&[0.8], 0, 1.0), vec![0.0]);
        assert_eq!(replay_target(&[0.8], 0, 0.0), vec![1.0]);

        // multi-class: action entry becomes the reward, rest renormalized
        let t = replay_target(&[0.5, 0.3, 0.2], 0, 1.0);
        assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[0], 1.0 / 1.5, epsilon = 1e-12);
        let t = replay_target(&[0.5, 0.3, 0.2], 0, 0.0);
        assert_eq!(t[0], 0.0);
        assert_abs_diff_eq!(t[1], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(t[2], 0.4, epsilon = 1e-12);
        // all mass on the zeroed action: uniform over the others
        let t = replay_target(&[1.0, 0.0, 0.0], 0, 0.0);
        assert_eq!(t, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn sync_copies_and_then_diverges() {
        let ds = separable_dataset(100, 4, 3);
        // nominal n_train of 1000 gives a 38-slot memory
        let mut agent = Agent::new(4, 2, AgentConfig::default(), 1000, 9).unwrap();
        // before any sync the target equals the initial active snapshot
        assert_eq!(agent.active, agent.target);
        let probe = ds.features.row(0);
        // train a bit so active moves
        let mut rng = rng_from_seed(1);
        for i in 0..20 {
            agent.memory.remember(Experience {
                state: ds.features.row(i).to_vec(),
                action: ds.binary_targets[i] as usize,
                reward: 1.0,
            });
        }
        agent.experience_replay(8, &mut rng).unwrap().unwrap();
        assert_ne!(agent.active, agent.target);
        agent.sync_target();
        assert_eq!(
            agent.active.predict(probe).unwrap(),
            agent.target.predict(probe).unwrap()
        );
        // mutating active after sync leaves target behind
        agent.experience_replay(8, &mut rng).unwrap().unwrap();
        assert_ne!(agent.active, agent.target);
    }

    #[test]
    fn epsilon_decay_sequence() {
        let ds = separable_dataset(400, 4, 5);
        let mut agent = Agent::new(4, 2, AgentConfig::default(), 400, 7).unwrap();
        for i in 0..agent.memory.capacity() {
            agent.memory.remember(Experience {
                state: ds.features.row(i % 400).to_vec(),
                action: 0,
                reward: 1.0,
            });
        }
        let mut rng = rng_from_seed(3);
        let mut seen = vec![agent.epsilon];
        for _ in 0..20 {
            agent.experience_replay(5, &mut rng).unwrap().unwrap();
            seen.push(agent.epsilon);
        }
        let expected: Vec<f64> = (0..=20)
            .map(|k| (0.2f64 - 0.01 * k as f64).max(0.05))
            .collect();
        for (a, b) in seen.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(*seen.last().unwrap(), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn replay_loss_mostly_non_increasing_on_frozen_minibatch() {
        let ds = separable_dataset(800, 6, 11);
        let config = AgentConfig::default();
        let mut agent = Agent::new(6, 2, config, 800, 13).unwrap();
        for i in 0..agent.memory.capacity() {
            agent.memory.remember(Experience {
                state: ds.features.row(i).to_vec(),
                action: ds.binary_targets[i] as usize,
                reward: 1.0,
            });
        }
        // raw epoch losses on one frozen minibatch
        let mut rng = rng_from_seed(17);
        let batch = agent.memory.sample(config.minibatch_size(800), &mut rng);
        let states: Vec<Vec<f64>> = batch.iter().map(|e| e.state.clone()).collect();
        let targets: Vec<Vec<f64>> = batch
            .iter()
            .map(|e| replay_target(&agent.target.predict(&e.state).unwrap(), e.action, e.reward))
            .collect();
        let mut epoch_losses = Vec::new();
        let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
        for _ in 0..20 {
            // measure over the whole minibatch, then take one epoch of steps
            let loss: f64 = refs
                .iter()
                .zip(&targets)
                .map(|(x, t)| cross_entropy_loss(&agent.active.predict(x).unwrap(), t))
                .sum::<f64>()
                / refs.len() as f64;
            epoch_losses.push(loss);
            for chunk in refs.chunks(32).zip(targets.chunks(32)) {
                train_batch(&mut agent.active, &mut agent.adam, chunk.0, chunk.1).unwrap();
            }
        }
        let non_increasing = epoch_losses.windows(2).filter(|w| w[1] <= w[0] + 1e-9).count();
        assert!(non_increasing >= 18, "only {non_increasing}/19 non-increasing: {epoch_losses:?}");
    }

    #[test]
    fn stability_window_rules() {
        assert!(is_stable(&[0.52, 0.50, 0.49, 0.51], 3, 0.05));
        assert!(!is_stable(&[0.60, 0.50, 0.49, 0.51], 3, 0.05));
        assert!(!is_stable(&[0.50, 0.49, 0.51], 3, 0.05)); // too short
    }

    #[test]
    fn underfull_memory_skips_replay() {
        let mut agent = Agent::new(4, 2, AgentConfig::default(), 10_000, 1).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(agent.experience_replay(250, &mut rng).unwrap(), None);
    }

    #[test]
    fn training_learns_separable_flows_and_is_deterministic() {
        let ds = separable_dataset(2_000, 6, 19);
        let config = AgentConfig::default();
        let out_a = train_agent(&ds, Scenario::Binary, &config, 23).unwrap();
        let out_b = train_agent(&ds, Scenario::Binary, &config, 23).unwrap();
        assert_eq!(out_a.network, out_b.network);
        assert!(out_a.converged);
        // memory bound honored and epsilon never left [floor, start]
        for s in &out_a.episodes {
            assert!(s.epsilon >= 0.05 - 1e-12 && s.epsilon <= 0.2 + 1e-12);
        }
        let pred = drl_predict(&out_a.network, &ds.features).unwrap();
        let correct = pred
            .iter()
            .zip(&ds.binary_targets)
            .filter(|(&p, &t)| p == t as usize)
            .count();
        assert!(correct as f64 / 2_000.0 >= 0.95, "train accuracy {correct}/2000");
    }
}
