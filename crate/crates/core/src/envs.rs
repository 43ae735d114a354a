//! Evaluation tasks.
//!
//! `PointWalker` is a deterministic one-dimensional walker driven by two
//! actuators: the objectives are energy (negated action norm) and forward
//! velocity, and the descriptor is the fraction of steps each actuator pushes
//! forward. `BiSphere` is a closed-form two-objective function with a known
//! Pareto set, used where an analytic answer helps.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::neuro::{Mlp, MlpSpec, Transition};

pub const TIME_STEP: f64 = 0.1;
const PHASE_PERIOD: f64 = 20.0;
const OBSERVATION_DIM: usize = 3;
const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WalkerState {
    pub x: f64,
    pub v: f64,
    pub phase: u64,
}

impl WalkerState {
    /// What the policy sees: velocity and a clock signal.
    pub fn observation(&self) -> [f64; 3] {
        let angle = 2.0 * PI * self.phase as f64 / PHASE_PERIOD;
        [self.v, angle.sin(), angle.cos()]
    }
}

/// One step of the walker dynamics. Returns the next state and the reward
/// vector `(energy, velocity)`.
pub fn pointwalker_step(state: WalkerState, action: [f64; 2], energy_weight: f64) -> (WalkerState, [f64; 2]) {
    let a = action.map(|v| v.clamp(-1.0, 1.0));
    let v = 0.9 * state.v + 0.1 * (a[0] + a[1]) / 2.0;
    let x = state.x + v * TIME_STEP;
    let next = WalkerState {
        x,
        v,
        phase: state.phase + 1,
    };
    let energy = -energy_weight * (a[0] * a[0] + a[1] * a[1]).sqrt();
    let velocity = (x - state.x) / TIME_STEP;
    (next, [energy, velocity])
}

/// Fraction of steps in which each actuator is strictly positive.
pub fn pointwalker_descriptor(actions: &[[f64; 2]]) -> [f64; 2] {
    if actions.is_empty() {
        return [0.0, 0.0];
    }
    let t = actions.len() as f64;
    let mut desc = [0.0; 2];
    for a in actions {
        for (d, v) in desc.iter_mut().zip(a) {
            if *v > 0.0 {
                *d += 1.0;
            }
        }
    }
    desc.map(|c| c / t)
}

/// Squashes each gene to `[0, 1]` and scores distance to 0.25 and to 0.75.
/// Returns `(scores, descriptor)`.
pub fn bisphere_evaluate(genotype: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if genotype.len() < 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: genotype.len(),
        });
    }
    let z: Vec<f64> = genotype.iter().map(|g| (g.tanh() + 1.0) / 2.0).collect();
    let f1 = -z.iter().map(|v| (v - 0.25).powi(2)).sum::<f64>();
    let f2 = -z.iter().map(|v| (v - 0.75).powi(2)).sum::<f64>();
    Ok((vec![f1, f2], vec![z[0], z[1]]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub scores: Vec<f64>,
    pub descriptor: Vec<f64>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    PointWalker,
    BiSphere,
}

/// Environment section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: TaskKind,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
    #[serde(default = "default_energy_weight")]
    pub energy_weight: f64,
    #[serde(default = "default_policy_hidden")]
    pub policy_hidden: Vec<usize>,
    /// Gene count for `bisphere`.
    #[serde(default = "default_genes")]
    pub genes: usize,
    /// Hypervolume reference point; task default when absent.
    #[serde(default)]
    pub reference_point: Option<Vec<f64>>,
}

fn default_episode_length() -> usize {
    60
}
fn default_energy_weight() -> f64 {
    1.0
}
fn default_policy_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_genes() -> usize {
    4
}

impl EnvConfig {
    pub fn pointwalker() -> Self {
        Self {
            kind: TaskKind::PointWalker,
            episode_length: default_episode_length(),
            energy_weight: default_energy_weight(),
            policy_hidden: default_policy_hidden(),
            genes: default_genes(),
            reference_point: None,
        }
    }

    pub fn bisphere(genes: usize) -> Self {
        Self {
            kind: TaskKind::BiSphere,
            genes,
            ..Self::pointwalker()
        }
    }
}

/// PointWalker reference point: per-objective minima observed over 10,000
/// random genotypes with the default settings (see `examples/reference_point.rs`),
/// rounded outward to one decimal. Other episode lengths or energy weights
/// should set `reference_point` explicitly.
pub const POINTWALKER_REFERENCE: [f64; 2] = [-36.1, -20.7];
/// BiSphere scores are bounded below by `-genes`.
pub fn bisphere_reference(genes: usize) -> [f64; 2] {
    [-(genes as f64), -(genes as f64)]
}

#[derive(Debug, Clone)]
pub struct PointWalker {
    episode_length: usize,
    energy_weight: f64,
    policy: MlpSpec,
}

impl PointWalker {
    pub fn new(episode_length: usize, energy_weight: f64, policy_hidden: &[usize]) -> Result<Self> {
        if episode_length == 0 {
            return Err(Error::Config("env.episode_length must be at least 1".into()));
        }
        if !(energy_weight.is_finite() && energy_weight >= 0.0) {
            return Err(Error::Config("env.energy_weight must be finite and non-negative".into()));
        }
        Ok(Self {
            episode_length,
            energy_weight,
            policy: MlpSpec::policy(OBSERVATION_DIM, policy_hidden, ACTION_DIM)?,
        })
    }

    pub fn policy_spec(&self) -> &MlpSpec {
        &self.policy
    }

    pub fn episode_length(&self) -> usize {
        self.episode_length
    }

    /// Runs one deterministic episode from rest.
    pub fn rollout(&self, genotype: &[f64]) -> Result<EpisodeResult> {
        let net = Mlp::from_genotype(self.policy.clone(), genotype)?;
        let mut state = WalkerState::default();
        let mut scores = [0.0; 2];
        let mut actions = Vec::with_capacity(self.episode_length);
        let mut transitions = Vec::with_capacity(self.episode_length);
        for t in 0..self.episode_length {
            let obs = state.observation();
            let out = net.forward(&obs)?;
            let action = [out[0].clamp(-1.0, 1.0), out[1].clamp(-1.0, 1.0)];
            let (next, reward) = pointwalker_step(state, action, self.energy_weight);
            scores[0] += reward[0];
            scores[1] += reward[1];
            actions.push(action);
            transitions.push(Transition {
                state: obs.to_vec(),
                action: action.to_vec(),
                reward: reward.to_vec(),
                next_state: next.observation().to_vec(),
                done: t + 1 == self.episode_length,
            });
            state = next;
        }
        Ok(EpisodeResult {
            scores: scores.to_vec(),
            descriptor: pointwalker_descriptor(&actions).to_vec(),
            transitions,
        })
    }
}

/// A configured evaluation task.
#[derive(Debug, Clone)]
pub enum Task {
    PointWalker(PointWalker),
    BiSphere { genes: usize },
}

impl Task {
    pub fn from_config(cfg: &EnvConfig) -> Result<Self> {
        match cfg.kind {
            TaskKind::PointWalker => Ok(Task::PointWalker(PointWalker::new(
                cfg.episode_length,
                cfg.energy_weight,
                &cfg.policy_hidden,
            )?)),
            TaskKind::BiSphere if cfg.genes >= 2 => Ok(Task::BiSphere { genes: cfg.genes }),
            TaskKind::BiSphere => Err(Error::Config("env.genes must be at least 2".into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::PointWalker(_) => "pointwalker",
            Task::BiSphere { .. } => "bisphere",
        }
    }

    pub fn is_mdp(&self) -> bool {
        matches!(self, Task::PointWalker(_))
    }

    pub fn num_objectives(&self) -> usize {
        2
    }

    pub fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 2]
    }

    pub fn default_reference(&self) -> Vec<f64> {
        match self {
            Task::PointWalker(_) => POINTWALKER_REFERENCE.to_vec(),
            Task::BiSphere { genes } => bisphere_reference(*genes).to_vec(),
        }
    }

    pub fn policy_spec(&self) -> Option<&MlpSpec> {
        match self {
            Task::PointWalker(w) => Some(w.policy_spec()),
            Task::BiSphere { .. } => None,
        }
    }

    pub fn genotype_len(&self) -> usize {
        match self {
            Task::PointWalker(w) => w.policy_spec().param_count(),
            Task::BiSphere { genes } => *genes,
        }
    }

    /// Policies use the standard network initialisation; BiSphere genes are
    /// drawn so that the squashed values are uniform on `[0, 1]`.
    pub fn random_genotype<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Task::PointWalker(w) => Mlp::random(w.policy_spec().clone(), rng).flatten(),
            Task::BiSphere { genes } => (0..*genes)
                .map(|_| {
                    let u: f64 = rng.random();
                    (2.0 * u - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh()
                })
                .collect(),
        }
    }

    pub fn evaluate(&self, genotype: &[f64]) -> Result<EpisodeResult> {
        match self {
            Task::PointWalker(w) => w.rollout(genotype),
            Task::BiSphere { genes } => {
                check_len(*genes, genotype.len())?;
                let (scores, descriptor) = bisphere_evaluate(genotype)?;
                Ok(EpisodeResult {
                    scores,
                    descriptor,
                    transitions: Vec::new(),
                })
            }
        }
    }
}
