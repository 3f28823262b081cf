//! Actor-critic learner with a softmax actor and a per-action SARSA critic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cartpole::{self, Action, CartState, PhysicsParams};
use crate::encoding::{self, ObservationVector, OBSERVATION_WIDTH};
use crate::error::{Error, Result};
use crate::mlp::NetworkParams;
use crate::rehearsal::{NetRole, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyperparams {
    /// Critic learning rate.
    pub alpha: f64,
    /// Actor learning rate.
    pub beta: f64,
    pub gamma: f64,
    /// Softmax temperature.
    pub tau: f64,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.06,
            gamma: 0.99,
            tau: 1.0,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("agent.alpha", self.alpha),
            ("agent.beta", self.beta),
            ("agent.tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(
                "agent.gamma",
                format!("must lie in (0, 1], got {}", self.gamma),
            ));
        }
        if self.beta >= self.alpha {
            return Err(Error::config(
                "agent.beta",
                format!("must be below alpha ({}), got {}", self.alpha, self.beta),
            ));
        }
        Ok(())
    }
}

/// One SARSA step `(s, a, R, s', a')`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: ObservationVector,
    pub action: Action,
    pub reward: f64,
    pub next_obs: ObservationVector,
    pub next_action: Action,
    pub terminal: bool,
}

/// Softmax over `outputs / tau`, shifted by the maximum for stability.
pub fn action_probabilities(outputs: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::config("agent.tau", "must be positive"));
    }
    if outputs.is_empty() || outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("actor output"));
    }
    let max = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = outputs.iter().map(|o| ((o - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub steps: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: NetworkParams,
    pub critic: NetworkParams,
    pub hyper: AgentHyperparams,
    rng: ChaCha8Rng,
}

impl Agent {
    /// Fresh actor and critic (12 -> hidden -> 2) seeded from `seed`.
    pub fn new(hidden_width: usize, hyper: AgentHyperparams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let sizes = [OBSERVATION_WIDTH, hidden_width, Action::COUNT];
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let actor = NetworkParams::new(&sizes, seeds.gen())?;
        let critic = NetworkParams::new(&sizes, seeds.gen())?;
        let rng = ChaCha8Rng::seed_from_u64(seeds.gen());
        Self::from_parts(actor, critic, hyper, rng)
    }

    pub fn from_parts(
        actor: NetworkParams,
        critic: NetworkParams,
        hyper: AgentHyperparams,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        for (net, what) in [(&actor, "actor"), (&critic, "critic")] {
            if net.input_width() != OBSERVATION_WIDTH || net.output_width() != Action::COUNT {
                return Err(Error::config(
                    "agent",
                    format!(
                        "{what} must map {OBSERVATION_WIDTH} inputs to {} outputs",
                        Action::COUNT
                    ),
                ));
            }
        }
        Ok(Self {
            actor,
            critic,
            hyper,
            rng,
        })
    }

    pub fn probabilities(&self, obs: &ObservationVector) -> Result<Vec<f64>> {
        action_probabilities(&self.actor.output(obs.as_slice())?, self.hyper.tau)
    }

    pub fn select_action(&mut self, obs: &ObservationVector) -> Result<Action> {
        let probs = self.probabilities(obs)?;
        let i = sample_index(&probs, &mut self.rng);
        Ok(Action::from_index(i).expect("two actions"))
    }

    /// `R + gamma Q(s', a') - Q(s, a)`, with the successor term dropped on terminal steps.
    pub fn td_error(&self, t: &Transition) -> Result<f64> {
        let q = self.critic.output(t.obs.as_slice())?;
        Ok(self.td_target(t)? - q[t.action.index()])
    }

    fn td_target(&self, t: &Transition) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        let q_next = self.critic.output(t.next_obs.as_slice())?;
        Ok(t.reward + self.hyper.gamma * q_next[t.next_action.index()])
    }

    /// One critic and one actor update for `t`; returns the pre-update TD error.
    pub fn learn<T: Trainer + ?Sized>(&mut self, t: &Transition, trainer: &mut T) -> Result<f64> {
        let input = t.obs.as_slice();
        let a = t.action.index();

        let mut critic_target = self.critic.output(input)?;
        let td_target = self.td_target(t)?;
        let delta = td_target - critic_target[a];
        critic_target[a] = td_target;

        let mut actor_target = self.actor.output(input)?;
        actor_target[a] += delta;

        let (alpha, beta) = (self.hyper.alpha, self.hyper.beta);
        trainer.train(
            NetRole::Critic,
            &mut self.critic,
            input,
            &critic_target,
            alpha,
        )?;
        trainer.train(NetRole::Actor, &mut self.actor, input, &actor_target, beta)?;
        Ok(delta)
    }

    /// Runs one episode from `start`, learning online after every step.
    pub fn run_episode<T: Trainer + ?Sized>(
        &mut self,
        start: CartState,
        physics: &PhysicsParams,
        step_cap: usize,
        trainer: &mut T,
    ) -> Result<EpisodeOutcome> {
        if step_cap == 0 {
            return Err(Error::config("run.step_cap", "must be at least 1"));
        }
        let mut state = start;
        let mut obs = encoding::encode(&state)?;
        let mut action = self.select_action(&obs)?;
        for steps in 1..=step_cap {
            let out = cartpole::step(&state, action, physics)?;
            let next_obs = encoding::encode(&out.next_state)?;
            let next_action = if out.failed {
                action
            } else {
                self.select_action(&next_obs)?
            };
            let transition = Transition {
                obs,
                action,
                reward: out.reward,
                next_obs,
                next_action,
                terminal: out.failed,
            };
            self.learn(&transition, trainer)?;
            if out.failed {
                return Ok(EpisodeOutcome {
                    steps,
                    failed: true,
                });
            }
            state = out.next_state;
            obs = transition.next_obs;
            action = next_action;
        }
        Ok(EpisodeOutcome {
            steps: step_cap,
            failed: false,
        })
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.actor
            .max_abs_weight()
            .max(self.critic.max_abs_weight())
    }
}
