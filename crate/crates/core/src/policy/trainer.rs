//! Actor-critic training loop with best-graph tracking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{actor_surrogate, sample_adjacency, EncoderConfig, Policy};
use crate::data::{sample_batch_with, Dataset};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, CausalGraph};
use crate::numeric::{sigmoid, AdamConfig, AdamState, Matrix, Tape};
use crate::scoring::{hill_climb, reward, BicScorer, RewardBreakdown, RewardConfig};

/// Added to the reward standard deviation before dividing.
const STANDARDIZE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub iterations: usize,
    /// Graphs sampled per iteration (B).
    pub graphs_per_iteration: usize,
    /// Data rows fed to the encoder per iteration (s).
    pub batch_size: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub reward: RewardConfig,
    pub encoder: EncoderConfig,
    pub decoder_hidden: usize,
    pub critic_hidden: usize,
    /// Distinct highest-reward DAGs kept for score refinement; 0 returns the
    /// best sampled DAG unchanged.
    pub refine_candidates: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            graphs_per_iteration: 32,
            batch_size: 64,
            actor_learning_rate: 1e-3,
            critic_learning_rate: 1e-3,
            reward: RewardConfig::default(),
            encoder: EncoderConfig::default(),
            decoder_hidden: 64,
            critic_hidden: 64,
            refine_candidates: 256,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.graphs_per_iteration == 0 || self.batch_size == 0 {
            return Err(Error::Validation("iterations, graphs per iteration and batch size must be ≥ 1".into()));
        }
        if !(self.actor_learning_rate > 0.0 && self.critic_learning_rate > 0.0) {
            return Err(Error::Validation("learning rates must be positive".into()));
        }
        self.reward.validate()?;
        self.encoder.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub mean_reward: f64,
    /// Best acyclic reward so far; `None` until a DAG has been sampled.
    pub best_reward: Option<f64>,
    pub cyclic_fraction: f64,
    pub mean_h: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainState {
    pub iterations_done: usize,
    pub best_reward: Option<f64>,
    /// Always acyclic.
    pub best_graph: Option<AdjacencyMatrix>,
    /// Highest-reward cyclic sample, kept for the repair path.
    pub best_cyclic: Option<(f64, AdjacencyMatrix)>,
    /// Set when the returned graph came from repairing a cyclic sample.
    pub repaired: bool,
    /// Set when hill climbing changed the returned graph.
    pub refined: bool,
    pub logs: Vec<IterationLog>,
}

pub struct Trainer {
    cfg: TrainerConfig,
    policy: Policy,
    actor_opt: AdamState,
    critic_opt: AdamState,
    reward_cfg: RewardConfig,
    batch_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    last_logits: Option<Matrix>,
    /// Distinct sampled DAGs by descending reward.
    elites: Vec<(f64, AdjacencyMatrix)>,
    state: TrainState,
}

impl Trainer {
    pub fn new(cfg: &TrainerConfig, ds: &Dataset, scorer: &BicScorer) -> Result<Self> {
        cfg.validate()?;
        let d = ds.n_vars();
        if d < 2 {
            return Err(Error::Validation(format!("need at least 2 variables, got {d}")));
        }
        if scorer.d() != d {
            return Err(Error::usage(format!("scorer has {} variables, data has {d}", scorer.d())));
        }
        if cfg.batch_size > ds.n_samples() {
            return Err(Error::Validation(format!(
                "batch size {} exceeds the {} available rows",
                cfg.batch_size,
                ds.n_samples()
            )));
        }
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(k);
            r
        };
        let mut init_rng = stream(0);
        let policy = Policy::new(&cfg.encoder, cfg.decoder_hidden, cfg.critic_hidden, cfg.batch_size, &mut init_rng)?;
        let actor_opt = AdamState::new(AdamConfig::with_learning_rate(cfg.actor_learning_rate), policy.actor_params.values());
        let critic_opt = AdamState::new(AdamConfig::with_learning_rate(cfg.critic_learning_rate), policy.critic_params.values());
        let reward_cfg = cfg.reward.resolved(scorer);
        Ok(Self {
            cfg: cfg.clone(),
            policy,
            actor_opt,
            critic_opt,
            reward_cfg,
            batch_rng: stream(1),
            sample_rng: stream(2),
            last_logits: None,
            elites: Vec::new(),
            state: TrainState::default(),
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    /// Current (annealed) penalty weights.
    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward_cfg
    }

    /// Edge probabilities from the most recent step.
    pub fn edge_probabilities(&self) -> Option<Matrix> {
        self.last_logits.as_ref().map(|g| g.map(sigmoid))
    }

    /// One actor-critic update.
    pub fn step(&mut self, ds: &Dataset, scorer: &BicScorer) -> Result<&IterationLog> {
        let batch = sample_batch_with(ds, self.cfg.batch_size, &mut self.batch_rng)?;
        let mut tape = Tape::new();
        let (enc, logits) = self.policy.forward(&mut tape, &batch)?;
        let logit_values = tape.value(logits).clone();

        let n = self.cfg.graphs_per_iteration;
        let mut graphs = Vec::with_capacity(n);
        let mut parts: Vec<RewardBreakdown> = Vec::with_capacity(n);
        for _ in 0..n {
            let (a, _) = sample_adjacency(&logit_values, &mut self.sample_rng)?;
            parts.push(reward(scorer, &self.reward_cfg, &a)?);
            graphs.push(a);
        }
        for (a, r) in graphs.iter().zip(&parts) {
            if r.is_dag {
                if self.state.best_reward.map_or(true, |b| r.reward > b) {
                    self.state.best_reward = Some(r.reward);
                    self.state.best_graph = Some(a.clone());
                }
                self.offer_elite(r.reward, a);
            } else if self.state.best_cyclic.as_ref().map_or(true, |(b, _)| r.reward > *b) {
                self.state.best_cyclic = Some((r.reward, a.clone()));
            }
        }

        let rewards: Vec<f64> = parts.iter().map(|r| r.reward).collect();
        let mean = rewards.iter().sum::<f64>() / n as f64;
        let std = (rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64).sqrt();
        let scaled: Vec<f64> = rewards.iter().map(|r| (r - mean) / (std + STANDARDIZE_EPS)).collect();

        let detached = tape.constant(tape.value(enc).clone());
        let baseline = self.policy.critic.forward(&self.policy.critic_params, &mut tape, detached)?;
        let b = tape.value(baseline).sum();
        let advantages: Vec<f64> = scaled.iter().map(|r| r - b).collect();
        let actor_loss = actor_surrogate(&mut tape, logits, &graphs, &advantages)?;

        let target_mean = scaled.iter().sum::<f64>() / n as f64;
        let target_var = scaled.iter().map(|r| (r - target_mean) * (r - target_mean)).sum::<f64>() / n as f64;
        let target = tape.constant(Matrix::scalar(target_mean));
        let diff = tape.sub(baseline, target)?;
        let sq = tape.square(diff);
        let spread = tape.constant(Matrix::scalar(target_var));
        let critic_loss = tape.add(sq, spread)?;
        let total = tape.add(actor_loss, critic_loss)?;

        let total_value = tape.value(total).sum();
        if !total_value.is_finite() {
            return Err(Error::Diverged(diagnostics(
                self.state.iterations_done + 1,
                &logit_values,
                &parts,
                tape.value(actor_loss).sum(),
                tape.value(critic_loss).sum(),
            )));
        }
        let grads = tape.backward(total)?;
        let actor_grads = self.policy.actor_params.gradients(&grads)?;
        let critic_grads = self.policy.critic_params.gradients(&grads)?;
        self.actor_opt.update(self.policy.actor_params.values_mut(), &actor_grads)?;
        self.critic_opt.update(self.policy.critic_params.values_mut(), &critic_grads)?;
        if !(self.policy.actor_params.all_finite() && self.policy.critic_params.all_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite weights after iteration {}",
                self.state.iterations_done + 1
            )));
        }

        self.state.iterations_done += 1;
        let iteration = self.state.iterations_done;
        let log = IterationLog {
            iteration,
            mean_reward: mean,
            best_reward: self.state.best_reward,
            cyclic_fraction: parts.iter().filter(|r| !r.is_dag).count() as f64 / n as f64,
            mean_h: parts.iter().map(|r| r.h).sum::<f64>() / n as f64,
            lambda1: self.reward_cfg.lambda1,
            lambda2: self.reward_cfg.lambda2,
            critic_loss: tape.value(critic_loss).sum(),
        };
        self.reward_cfg.anneal(iteration);
        self.last_logits = Some(logit_values);
        self.state.logs.push(log);
        Ok(self.state.logs.last().expect("just pushed"))
    }

    fn offer_elite(&mut self, reward: f64, a: &AdjacencyMatrix) {
        let k = self.cfg.refine_candidates;
        if k == 0 || self.elites.iter().any(|(_, e)| e == a) {
            return;
        }
        if self.elites.len() == k && self.elites.last().map_or(false, |(w, _)| reward <= *w) {
            return;
        }
        let pos = self.elites.iter().position(|(r, _)| reward > *r).unwrap_or(self.elites.len());
        self.elites.insert(pos, (reward, a.clone()));
        self.elites.truncate(k);
    }

    /// Best acyclic graph found, repairing the best cyclic sample if no DAG
    /// was ever drawn. With refinement enabled, each kept candidate is hill
    /// climbed and the lowest-BIC result wins (earlier candidates on ties).
    pub fn finish(mut self, ds: &Dataset, scorer: &BicScorer) -> Result<(CausalGraph, TrainState)> {
        let searched = match (&self.state.best_graph, &self.state.best_cyclic) {
            (Some(a), _) => a.clone(),
            (None, Some((_, cyclic))) => {
                let probs = self
                    .edge_probabilities()
                    .unwrap_or_else(|| Matrix::filled(cyclic.d(), cyclic.d(), 0.5));
                self.state.repaired = true;
                repair(cyclic, &probs)
            }
            (None, None) => return Err(Error::usage("no iterations were run")),
        };
        let mut adjacency = searched.clone();
        if self.cfg.refine_candidates > 0 {
            let mut starts: Vec<AdjacencyMatrix> = self.elites.iter().map(|(_, a)| a.clone()).collect();
            if starts.is_empty() {
                starts.push(searched.clone());
            }
            let mut best: Option<(f64, AdjacencyMatrix)> = None;
            for start in &starts {
                let (a, score) = hill_climb(scorer, start)?;
                if best.as_ref().map_or(true, |(b, _)| score < *b) {
                    best = Some((score, a));
                }
            }
            if let Some((_, a)) = best {
                adjacency = a;
            }
            self.state.refined = adjacency != searched;
        }
        let graph = CausalGraph::new(adjacency, ds.variables().clone())?;
        Ok((graph, self.state))
    }
}

/// Deletes the lowest-probability edge (smallest `(from, to)` on ties) until
/// the graph is acyclic.
pub(crate) fn repair(a: &AdjacencyMatrix, probs: &Matrix) -> AdjacencyMatrix {
    let mut out = a.clone();
    while !out.is_dag() {
        let weakest = out
            .edges()
            .min_by(|&(i, j), &(k, l)| probs.get(i, j).total_cmp(&probs.get(k, l)))
            .expect("a cyclic graph has edges");
        out.remove(weakest.0, weakest.1);
    }
    out
}

fn diagnostics(iteration: usize, logits: &Matrix, parts: &[RewardBreakdown], actor: f64, critic: f64) -> String {
    let rows: Vec<String> = (0..logits.rows()).map(|i| format!("{:?}", logits.row(i))).collect();
    let rewards: Vec<String> = parts
        .iter()
        .map(|r| format!("(bic {}, indicator {}, h {})", r.bic, r.indicator_term, r.h_term))
        .collect();
    format!(
        "non-finite loss at iteration {iteration} (actor {actor}, critic {critic}); logits [{}]; rewards [{}]",
        rows.join(", "),
        rewards.join(", ")
    )
}

/// Runs `cfg.iterations` steps and returns the best graph with the run state.
pub fn train(cfg: &TrainerConfig, ds: &Dataset, scorer: &BicScorer) -> Result<(CausalGraph, TrainState)> {
    let mut trainer = Trainer::new(cfg, ds, scorer)?;
    for _ in 0..cfg.iterations {
        trainer.step(ds, scorer)?;
    }
    trainer.finish(ds, scorer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::VariableTable;
    use crate::scoring::RegressionKind;

    fn tiny_config(iterations: usize, seed: u64) -> TrainerConfig {
        TrainerConfig {
            iterations,
            graphs_per_iteration: 8,
            batch_size: 16,
            encoder: EncoderConfig {
                layers: 1,
                heads: 2,
                d_model: 8,
                d_ff: 16,
                positional_encoding: false,
            },
            decoder_hidden: 8,
            critic_hidden: 8,
            seed,
            ..TrainerConfig::default()
        }
    }

    fn noise(d: usize, m: usize) -> Dataset {
        let cols = (0..d)
            .map(|j| (0..m).map(|i| ((i * 7919 + j * 104729) as f64 * 0.618).sin()).collect())
            .collect();
        Dataset::from_columns(cols, VariableTable::numbered(d)).unwrap()
    }

    #[test]
    fn validation() {
        assert!(TrainerConfig { iterations: 0, ..tiny_config(1, 0) }.validate().is_err());
        assert!(TrainerConfig { actor_learning_rate: 0.0, ..tiny_config(1, 0) }.validate().is_err());
        let ds = noise(3, 10);
        let scorer = BicScorer::new(&ds, RegressionKind::Linear).unwrap();
        assert!(matches!(Trainer::new(&tiny_config(1, 0), &ds, &scorer), Err(Error::Validation(_))));
    }

    #[test]
    fn best_reward_monotone_and_dag() {
        let ds = noise(3, 60);
        let scorer = BicScorer::new(&ds, RegressionKind::Linear).unwrap();
        let (g, state) = train(&tiny_config(20, 1), &ds, &scorer).unwrap();
        assert!(g.adjacency.is_dag());
        assert_eq!(state.logs.len(), 20);
        let best: Vec<f64> = state.logs.iter().filter_map(|l| l.best_reward).collect();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn deterministic() {
        let ds = noise(3, 60);
        let scorer = BicScorer::new(&ds, RegressionKind::Linear).unwrap();
        let (a, sa) = train(&tiny_config(10, 5), &ds, &scorer).unwrap();
        let (b, sb) = train(&tiny_config(10, 5), &ds, &scorer).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.logs, sb.logs);
    }

    #[test]
    fn repair_removes_weakest_edges() {
        let a = AdjacencyMatrix::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let probs = Matrix::from_rows(&[vec![0.0, 0.9, 0.0], vec![0.0, 0.0, 0.8], vec![0.3, 0.0, 0.0]]).unwrap();
        let r = repair(&a, &probs);
        assert_eq!(r, AdjacencyMatrix::from_edges(3, [(0, 1), (1, 2)]).unwrap());
    }
}
