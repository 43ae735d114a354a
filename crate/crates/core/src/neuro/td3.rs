//! Twin-critic actor-critic training (TD3) per objective, and the
//! policy-gradient mutation operator that uses the trained critics.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Adam, Batch, Mlp, MlpSpec, ReplayBuffer};
use crate::error::{check_len, Error, Result};

/// Actor-critic hyperparameters. `Default` is the desk-scale preset; see
/// [`Td3Config::full_scale`] for the large-budget setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub buffer_size: usize,
    pub batch_size: usize,
    pub critic_hidden: Vec<usize>,
    pub critic_lr: f64,
    pub actor_lr: f64,
    /// Learning rate of the policy-gradient mutation.
    pub policy_lr: f64,
    pub critic_steps: usize,
    pub pg_steps: usize,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub discount: f64,
    pub tau: f64,
    pub policy_delay: usize,
}

impl Td3Config {
    pub fn full_scale() -> Self {
        Self {
            buffer_size: 1_000_000,
            batch_size: 256,
            critic_hidden: vec![256, 256],
            critic_lr: 3e-4,
            actor_lr: 3e-4,
            policy_lr: 1e-3,
            critic_steps: 300,
            pg_steps: 100,
            policy_noise: 0.2,
            noise_clip: 0.2,
            discount: 0.99,
            tau: 0.005,
            policy_delay: 2,
        }
    }

    pub fn desk() -> Self {
        Self {
            buffer_size: 100_000,
            batch_size: 64,
            critic_hidden: vec![32, 32],
            critic_steps: 30,
            pg_steps: 10,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("td3.{m}")));
        if self.buffer_size == 0 {
            return bad("buffer_size must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.policy_delay == 0 {
            return bad("policy_delay must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if self.critic_hidden.is_empty() || self.critic_hidden.contains(&0) {
            return bad("critic_hidden needs at least one positive layer size");
        }
        Ok(())
    }
}

impl Default for Td3Config {
    fn default() -> Self {
        Self::desk()
    }
}

/// Which scalar reward a critic learns from the stored reward vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSelector {
    Objective(usize),
    /// Sum of all components (single-objective baselines).
    Sum,
}

impl RewardSelector {
    fn select(self, rewards: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        match self {
            RewardSelector::Objective(j) if j < rewards.ncols() => Ok(rewards.column(j).to_owned()),
            RewardSelector::Objective(j) => Err(Error::Dimension {
                expected: rewards.ncols(),
                got: j + 1,
            }),
            RewardSelector::Sum => Ok(rewards.sum_axis(Axis(1))),
        }
    }
}

/// Actor, twin critics, their targets and optimiser state for one reward.
#[derive(Debug, Clone)]
pub struct ObjectiveTrainState {
    pub reward: RewardSelector,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    /// Critic updates performed so far.
    pub steps: u64,
    rng: ChaCha8Rng,
}

impl ObjectiveTrainState {
    pub fn new(policy: &MlpSpec, critic_hidden: &[usize], reward: RewardSelector, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let critic_spec = MlpSpec::critic(policy.input_dim() + policy.output_dim(), critic_hidden)?;
        let actor = Mlp::random(policy.clone(), &mut rng);
        let critic1 = Mlp::random(critic_spec.clone(), &mut rng);
        let critic2 = Mlp::random(critic_spec, &mut rng);
        Ok(Self {
            reward,
            actor_opt: Adam::new(actor.params().len()),
            critic1_opt: Adam::new(critic1.params().len()),
            critic2_opt: Adam::new(critic2.params().len()),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            steps: 0,
            rng,
        })
    }

    /// TD3 bootstrap targets `r + discount * (1 - done) * min(Q1', Q2')` with
    /// smoothed target actions.
    pub fn td_targets(&mut self, batch: &Batch, hp: &Td3Config) -> Result<Array1<f64>> {
        let rewards = self.reward.select(batch.rewards.view())?;
        let mut next_actions = self.actor_target.forward_batch(batch.next_states.view())?;
        next_actions.mapv_inplace(|a| {
            let eps: f64 = self.rng.sample::<f64, _>(StandardNormal) * hp.policy_noise;
            (a + eps.clamp(-hp.noise_clip, hp.noise_clip)).clamp(-1.0, 1.0)
        });
        let sa = concatenate![Axis(1), batch.next_states, next_actions];
        let q1 = self.critic1_target.forward_batch(sa.view())?;
        let q2 = self.critic2_target.forward_batch(sa.view())?;
        let mut y = rewards;
        for (i, yi) in y.iter_mut().enumerate() {
            let q = q1[[i, 0]].min(q2[[i, 0]]);
            *yi += hp.discount * (1.0 - batch.dones[i]) * q;
        }
        Ok(y)
    }

    /// One gradient step of both critics toward the TD targets. Returns the
    /// summed mean-squared errors before the step.
    pub fn critic_update(&mut self, batch: &Batch, hp: &Td3Config) -> Result<f64> {
        let y = self.td_targets(batch, hp)?;
        let sa = concatenate![Axis(1), batch.states, batch.actions];
        let (l1, g1) = critic_loss_grad(&self.critic1, sa.view(), y.view())?;
        let (l2, g2) = critic_loss_grad(&self.critic2, sa.view(), y.view())?;
        self.critic1_opt.step(self.critic1.params_mut(), &g1, hp.critic_lr);
        self.critic2_opt.step(self.critic2.params_mut(), &g2, hp.critic_lr);
        self.steps += 1;
        Ok(l1 + l2)
    }

    /// Ascends the first critic's mean value of the actor's actions, then
    /// soft-updates every target network.
    pub fn actor_update(&mut self, batch: &Batch, hp: &Td3Config) -> Result<f64> {
        let (objective, grad) = actor_objective_grad(&self.actor, &self.critic1, batch.states.view())?;
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.actor_opt.step(self.actor.params_mut(), &descent, hp.actor_lr);
        soft_update(&mut self.actor_target, &self.actor, hp.tau)?;
        soft_update(&mut self.critic1_target, &self.critic1, hp.tau)?;
        soft_update(&mut self.critic2_target, &self.critic2, hp.tau)?;
        Ok(objective)
    }

    /// `hp.critic_steps` critic updates with an actor update every
    /// `hp.policy_delay` of them. Returns the last critic loss.
    pub fn train(&mut self, buffer: &ReplayBuffer, hp: &Td3Config) -> Result<f64> {
        let mut loss = 0.0;
        for _ in 0..hp.critic_steps {
            let batch = buffer.sample(hp.batch_size, &mut self.rng)?;
            loss = self.critic_update(&batch, hp)?;
            if self.steps % hp.policy_delay as u64 == 0 {
                self.actor_update(&batch, hp)?;
            }
        }
        Ok(loss)
    }
}

/// Mean squared error of `critic(inputs)` against `targets` and its gradient.
pub fn critic_loss_grad(critic: &Mlp, inputs: ArrayView2<'_, f64>, targets: ArrayView1<'_, f64>) -> Result<(f64, Vec<f64>)> {
    check_len(inputs.nrows(), targets.len())?;
    let n = targets.len() as f64;
    let cache = critic.forward_cached(inputs)?;
    let diff = &cache.output().column(0) - &targets;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let grad_out = diff.mapv(|d| 2.0 * d / n).insert_axis(Axis(1));
    let (grad, _) = critic.backward(&cache, grad_out.view())?;
    Ok((loss, grad))
}

/// Mean of `critic(s, actor(s))` over the rows of `states` and its gradient
/// with respect to the actor parameters. The critic is read-only.
pub fn actor_objective_grad(actor: &Mlp, critic: &Mlp, states: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
    let n = states.nrows();
    let s_dim = states.ncols();
    let actor_cache = actor.forward_cached(states)?;
    let sa = concatenate![Axis(1), states, actor_cache.output().view()];
    let critic_cache = critic.forward_cached(sa.view())?;
    let objective = critic_cache.output().sum() / n as f64;
    let grad_q = Array2::from_elem((n, 1), 1.0 / n as f64);
    let (_, grad_sa) = critic.backward(&critic_cache, grad_q.view())?;
    let grad_actions = grad_sa.slice(s![.., s_dim..]);
    let (grad, _) = actor.backward(&actor_cache, grad_actions)?;
    Ok((objective, grad))
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.spec() != online.spec() {
        return Err(Error::Dimension {
            expected: target.params().len(),
            got: online.params().len(),
        });
    }
    for (t, o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

/// Gradient-ascent mutation of a policy genotype on a trained critic.
///
/// Runs `steps` Adam steps (fresh moments) on fresh minibatches of states and
/// returns the mutated genotype. `steps == 0` or `lr == 0` is the identity.
pub fn pg_mutate<R: Rng + ?Sized>(
    genotype: &[f64],
    policy: &MlpSpec,
    state: &ObjectiveTrainState,
    buffer: &ReplayBuffer,
    steps: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut net = Mlp::from_genotype(policy.clone(), genotype)?;
    if steps == 0 || lr == 0.0 {
        return Ok(net.flatten());
    }
    if buffer.len() < batch_size {
        return Err(Error::InsufficientData {
            needed: batch_size,
            available: buffer.len(),
        });
    }
    let mut opt = Adam::new(genotype.len());
    for _ in 0..steps {
        let batch = buffer.sample(batch_size, rng)?;
        let (_, grad) = actor_objective_grad(&net, &state.critic1, batch.states.view())?;
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        opt.step(net.params_mut(), &descent, lr);
    }
    Ok(net.flatten())
}

/// Trains every objective's networks independently (in parallel). Returns the
/// final critic loss of each.
pub fn train_networks(states: &mut [ObjectiveTrainState], buffer: &ReplayBuffer, hp: &Td3Config) -> Result<Vec<f64>> {
    if buffer.is_empty() {
        return Err(Error::InsufficientData {
            needed: hp.batch_size,
            available: 0,
        });
    }
    states.par_iter_mut().map(|s| s.train(buffer, hp)).collect()
}
