//! Pseudorehearsal strategies.
//!
//! A pseudoset holds random 0/1 inputs together with the responses the
//! network gave to them when they were captured. Training on a fresh example
//! then either reshapes the weight update so it is orthogonal to the
//! pseudo-inputs (the `fr-*` modes) or co-trains the fresh example with the
//! pseudoitems by batch backprop (`batch`).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{BatchItem, BatchReport, LayerActivations, NetworkParams};

/// Relative Gram-determinant floor below which a pseudo-term is dropped.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RehearsalMode {
    #[default]
    None,
    /// Orthogonal correction on the input layer only; plain backprop above it.
    FrOutputOnly,
    /// Orthogonal correction on every layer using stored pseudo-activations.
    FrAllLayers,
    Batch,
}

impl RehearsalMode {
    pub const ALL: [RehearsalMode; 4] = [
        RehearsalMode::None,
        RehearsalMode::FrOutputOnly,
        RehearsalMode::FrAllLayers,
        RehearsalMode::Batch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RehearsalMode::None => "none",
            RehearsalMode::FrOutputOnly => "fr-output",
            RehearsalMode::FrAllLayers => "fr-all",
            RehearsalMode::Batch => "batch",
        }
    }
}

impl fmt::Display for RehearsalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RehearsalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

impl Serialize for RehearsalMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RehearsalMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RehearsalConfig {
    pub mode: RehearsalMode,
    pub pr: usize,
    pub reinit_period: usize,
    pub batch_iterations: usize,
}

impl Default for RehearsalConfig {
    fn default() -> Self {
        Self {
            mode: RehearsalMode::None,
            pr: 30,
            reinit_period: 10,
            batch_iterations: 20,
        }
    }
}

impl RehearsalConfig {
    pub fn with_mode(mut self, mode: RehearsalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != RehearsalMode::None {
            if self.pr == 0 {
                return Err(Error::config("rehearsal.pr", "must be at least 1"));
            }
            if self.reinit_period == 0 {
                return Err(Error::config(
                    "rehearsal.reinit_period",
                    "must be at least 1",
                ));
            }
        }
        if self.mode == RehearsalMode::Batch && self.batch_iterations == 0 {
            return Err(Error::config(
                "rehearsal.batch_iterations",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pseudoitem {
    pub input: Vec<f64>,
    pub target_output: Vec<f64>,
    pub layer_activations: Option<LayerActivations>,
}

impl Pseudoitem {
    /// Activation vector feeding weight layer `layer`, if known.
    fn layer_input(&self, layer: usize) -> Option<&[f64]> {
        match (layer, &self.layer_activations) {
            (0, _) => Some(&self.input),
            (l, Some(acts)) => acts.per_layer.get(l).map(Vec::as_slice),
            (_, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSet {
    pub items: Vec<Pseudoitem>,
    pub reinit_period: usize,
    pub episodes_since_reinit: usize,
}

impl PseudoSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Counts one finished episode and re-captures from `net` when the period is reached.
    ///
    /// Returns true when the set was re-captured.
    pub fn maintain<R: Rng + ?Sized>(
        &mut self,
        net: &NetworkParams,
        config: &RehearsalConfig,
        rng: &mut R,
    ) -> Result<bool> {
        self.episodes_since_reinit += 1;
        if self.episodes_since_reinit >= self.reinit_period {
            *self = capture_pseudoset(net, config, rng)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn check_topology(&self, net: &NetworkParams) -> Result<()> {
        let [input, hidden, output] = net.layer_sizes();
        for item in &self.items {
            let ok = item.input.len() == input
                && item.target_output.len() == output
                && item.layer_activations.as_ref().is_none_or(|a| {
                    a.per_layer.len() == 3
                        && a.per_layer[1].len() == hidden
                        && a.per_layer[2].len() == output
                });
            if !ok {
                return Err(Error::Dimension {
                    context: "pseudoset topology",
                    expected: input,
                    actual: item.input.len(),
                });
            }
        }
        Ok(())
    }

    fn batch_items(&self) -> impl Iterator<Item = BatchItem> + '_ {
        self.items.iter().map(|item| BatchItem {
            input: item.input.clone(),
            target: item.target_output.clone(),
        })
    }
}

/// Random input with each entry independently 0 or 1.
pub fn generate_pseudoinput<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Vec<f64> {
    (0..width)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 })
        .collect()
}

/// Draws `config.pr` pseudo-inputs and records `net`'s responses to them.
pub fn capture_pseudoset<R: Rng + ?Sized>(
    net: &NetworkParams,
    config: &RehearsalConfig,
    rng: &mut R,
) -> Result<PseudoSet> {
    if config.pr == 0 {
        return Err(Error::config("rehearsal.pr", "must be at least 1"));
    }
    let keep_layers = config.mode == RehearsalMode::FrAllLayers;
    let items = (0..config.pr)
        .map(|_| {
            let input = generate_pseudoinput(net.input_width(), rng);
            let acts = net.forward(&input)?;
            Ok(Pseudoitem {
                target_output: acts.output().to_vec(),
                layer_activations: keep_layers.then_some(acts),
                input,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoSet {
        items,
        reinit_period: config.reinit_period.max(1),
        episodes_since_reinit: 0,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Update direction for a neuron with input `b`, kept orthogonal to each pseudo-input.
///
/// Averages `[b (x.x) - x (x.b)] / [(b.b)(x.x) - (b.x)^2]` over the
/// pseudo-inputs `x`. Each term satisfies `term . b = 1` and `term . x = 0`.
/// Terms whose Gram determinant is below [`COLLINEAR_TOLERANCE`] relative to
/// `(b.b)(x.x)` are dropped; if every term is dropped the plain direction
/// `b / (b.b)` is returned.
pub fn orthogonal_direction<X: AsRef<[f64]>>(b: &[f64], pseudo_inputs: &[X]) -> Result<Vec<f64>> {
    let bb = dot(b, b);
    if bb == 0.0 || !bb.is_finite() {
        return Err(Error::ZeroVector);
    }
    let mut sum = vec![0.0; b.len()];
    let mut kept = 0usize;
    for x in pseudo_inputs {
        let x = x.as_ref();
        if x.len() != b.len() {
            return Err(Error::Dimension {
                context: "pseudo-input",
                expected: b.len(),
                actual: x.len(),
            });
        }
        let xx = dot(x, x);
        let bx = dot(b, x);
        let gram = bb * xx - bx * bx;
        if gram.is_nan() || gram <= COLLINEAR_TOLERANCE * bb * xx {
            continue;
        }
        for ((s, bi), xi) in sum.iter_mut().zip(b).zip(x) {
            *s += (bi * xx - xi * bx) / gram;
        }
        kept += 1;
    }
    if kept == 0 {
        return Ok(b.iter().map(|v| v / bb).collect());
    }
    let n = kept as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Per-weight correction for one neuron: `err_b` times [`orthogonal_direction`].
pub fn eq3_delta<X: AsRef<[f64]>>(b: &[f64], err_b: f64, pseudo_inputs: &[X]) -> Result<Vec<f64>> {
    let dir = orthogonal_direction(b, pseudo_inputs)?;
    Ok(dir.into_iter().map(|d| err_b * d).collect())
}

fn with_bias(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.extend_from_slice(v);
    out.push(1.0);
    out
}

/// Applies one orthogonally-corrected learning step.
///
/// `activations` and `neuron_errors` come from the backward pass of the
/// fresh example (see [`NetworkParams::backward`]). Neuron inputs are taken
/// with the constant bias input appended, so corrected rows leave every
/// pseudo pre-activation unchanged to first order.
pub fn fr_rehearse(
    net: &mut NetworkParams,
    activations: &LayerActivations,
    neuron_errors: &[Vec<f64>],
    pseudoset: &PseudoSet,
    mode: RehearsalMode,
    learning_rate: f64,
) -> Result<()> {
    pseudoset.check_topology(net)?;
    if neuron_errors.len() != net.layer_count() {
        return Err(Error::Dimension {
            context: "neuron error layers",
            expected: net.layer_count(),
            actual: neuron_errors.len(),
        });
    }
    let mut deltas = Vec::with_capacity(net.layer_count());
    for (layer, errors) in neuron_errors.iter().enumerate() {
        let b = with_bias(&activations.per_layer[layer]);
        let corrected = match mode {
            RehearsalMode::FrAllLayers => true,
            RehearsalMode::FrOutputOnly => layer == 0,
            RehearsalMode::None => false,
            RehearsalMode::Batch => {
                return Err(Error::config(
                    "rehearsal.mode",
                    "batch mode has no orthogonal step",
                ))
            }
        };
        let direction = if corrected {
            let xs = pseudoset
                .items
                .iter()
                .map(|item| {
                    item.layer_input(layer).map(with_bias).ok_or_else(|| {
                        Error::config(
                            "rehearsal.mode",
                            "pseudoset lacks layer activations for all-layer correction",
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            orthogonal_direction(&b, &xs)?
        } else {
            b
        };
        let mut delta = Vec::with_capacity(errors.len() * direction.len());
        for e in errors {
            delta.extend(direction.iter().map(|d| learning_rate * e * d));
        }
        deltas.push(delta);
    }
    for (layer, delta) in deltas.iter().enumerate() {
        net.apply_delta(layer, delta)?;
    }
    Ok(())
}

/// Co-trains the fresh example with every pseudoitem by batch backprop.
pub fn batch_rehearse(
    net: &mut NetworkParams,
    fresh: BatchItem,
    pseudoset: &PseudoSet,
    learning_rate: f64,
    batch_iterations: usize,
) -> Result<BatchReport> {
    if pseudoset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    pseudoset.check_topology(net)?;
    let mut items: Vec<BatchItem> = pseudoset.batch_items().collect();
    items.push(fresh);
    net.batch_backprop(&items, learning_rate, batch_iterations)
}

/// Which of the agent's two networks a training call addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetRole {
    Actor,
    Critic,
}

/// Strategy that turns "move `net` toward `target` on `input`" into weight changes.
pub trait Trainer {
    fn train(
        &mut self,
        role: NetRole,
        net: &mut NetworkParams,
        input: &[f64],
        target: &[f64],
        learning_rate: f64,
    ) -> Result<()>;

    /// Called once after every episode.
    fn end_episode(&mut self, _actor: &NetworkParams, _critic: &NetworkParams) -> Result<()> {
        Ok(())
    }
}

/// Plain online backprop with no rehearsal machinery at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainBackprop;

impl Trainer for PlainBackprop {
    fn train(
        &mut self,
        _role: NetRole,
        net: &mut NetworkParams,
        input: &[f64],
        target: &[f64],
        learning_rate: f64,
    ) -> Result<()> {
        net.backprop(input, target, learning_rate)
    }
}

/// Rehearsal state for one run: a pseudoset per network and the generator that refreshes them.
#[derive(Debug, Clone)]
pub struct Rehearser {
    config: RehearsalConfig,
    actor_set: Option<PseudoSet>,
    critic_set: Option<PseudoSet>,
    rng: ChaCha8Rng,
}

impl Rehearser {
    pub fn new(
        config: RehearsalConfig,
        actor: &NetworkParams,
        critic: &NetworkParams,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (actor_set, critic_set) = if config.mode == RehearsalMode::None {
            (None, None)
        } else {
            (
                Some(capture_pseudoset(actor, &config, &mut rng)?),
                Some(capture_pseudoset(critic, &config, &mut rng)?),
            )
        };
        Ok(Self {
            config,
            actor_set,
            critic_set,
            rng,
        })
    }

    pub fn config(&self) -> &RehearsalConfig {
        &self.config
    }

    pub fn pseudoset(&self, role: NetRole) -> Option<&PseudoSet> {
        match role {
            NetRole::Actor => self.actor_set.as_ref(),
            NetRole::Critic => self.critic_set.as_ref(),
        }
    }
}

impl Trainer for Rehearser {
    fn train(
        &mut self,
        role: NetRole,
        net: &mut NetworkParams,
        input: &[f64],
        target: &[f64],
        learning_rate: f64,
    ) -> Result<()> {
        let set = match role {
            NetRole::Actor => self.actor_set.as_ref(),
            NetRole::Critic => self.critic_set.as_ref(),
        };
        match (self.config.mode, set) {
            (RehearsalMode::None, _) => net.backprop(input, target, learning_rate),
            (mode @ (RehearsalMode::FrOutputOnly | RehearsalMode::FrAllLayers), Some(set)) => {
                let back = net.backward(input, target)?;
                fr_rehearse(
                    net,
                    &back.activations,
                    &back.neuron_errors,
                    set,
                    mode,
                    learning_rate,
                )
            }
            (RehearsalMode::Batch, Some(set)) => {
                let fresh = BatchItem {
                    input: input.to_vec(),
                    target: target.to_vec(),
                };
                batch_rehearse(net, fresh, set, learning_rate, self.config.batch_iterations)
                    .map(|_| ())
            }
            (_, None) => Err(Error::config("rehearsal", "pseudoset missing")),
        }
    }

    fn end_episode(&mut self, actor: &NetworkParams, critic: &NetworkParams) -> Result<()> {
        if let Some(set) = self.actor_set.as_mut() {
            set.maintain(actor, &self.config, &mut self.rng)?;
        }
        if let Some(set) = self.critic_set.as_mut() {
            set.maintain(critic, &self.config, &mut self.rng)?;
        }
        Ok(())
    }
}
