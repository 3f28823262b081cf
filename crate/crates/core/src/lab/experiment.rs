//! Seeded runs and multi-strategy comparisons.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::Agent;
use crate::cartpole;
use crate::error::{Error, Result};
use crate::lab::config::RunConfig;
use crate::lab::stats::{self, TTestResult, DEFAULT_WINDOW};
use crate::mlp::NetworkParams;
use crate::rehearsal::{NetRole, PlainBackprop, Rehearser, Trainer};

/// Any weight beyond this magnitude marks the run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub steps_per_episode: Vec<usize>,
    /// Episodes that ran into the step cap without failing.
    pub cap_hits: usize,
    pub diverged: bool,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn steps_f64(&self) -> Vec<f64> {
        self.steps_per_episode.iter().map(|s| *s as f64).collect()
    }

    pub fn mean_steps(&self) -> f64 {
        stats::mean(&self.steps_f64())
    }
}

/// Seeds for the independent random streams of one run.
#[derive(Debug, Clone, Copy)]
struct RunSeeds {
    agent: u64,
    starts: u64,
    rehearsal: u64,
}

impl RunSeeds {
    fn derive(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        Self {
            agent: master.gen(),
            starts: master.gen(),
            rehearsal: master.gen(),
        }
    }
}

/// Wraps a trainer and stops all learning once a weight crosses the divergence threshold.
///
/// The offending update is rolled back, so the networks stay finite and the
/// rest of the run proceeds with a frozen agent.
struct DivergenceGuard<T> {
    inner: T,
    diverged: bool,
}

impl<T: Trainer> Trainer for DivergenceGuard<T> {
    fn train(
        &mut self,
        role: NetRole,
        net: &mut NetworkParams,
        input: &[f64],
        target: &[f64],
        learning_rate: f64,
    ) -> Result<()> {
        if self.diverged {
            return Ok(());
        }
        let backup = net.clone();
        self.inner.train(role, net, input, target, learning_rate)?;
        if net.max_abs_weight() > DIVERGENCE_THRESHOLD {
            *net = backup;
            self.diverged = true;
        }
        Ok(())
    }

    fn end_episode(&mut self, actor: &NetworkParams, critic: &NetworkParams) -> Result<()> {
        if self.diverged {
            return Ok(());
        }
        self.inner.end_episode(actor, critic)
    }
}

fn run_with<T: Trainer>(
    config: &RunConfig,
    agent: Agent,
    trainer: T,
    seeds: RunSeeds,
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut agent = agent;
    let mut trainer = DivergenceGuard {
        inner: trainer,
        diverged: false,
    };
    let mut starts = ChaCha8Rng::seed_from_u64(seeds.starts);
    let mut steps_per_episode = Vec::with_capacity(config.run.episodes);
    let mut cap_hits = 0;
    for _ in 0..config.run.episodes {
        let start = cartpole::reset_with(&mut starts);
        let outcome =
            agent.run_episode(start, &config.physics, config.run.step_cap, &mut trainer)?;
        if !outcome.failed {
            cap_hits += 1;
        }
        steps_per_episode.push(outcome.steps);
        trainer.end_episode(&agent.actor, &agent.critic)?;
    }
    Ok(RunRecord {
        config: config.clone(),
        steps_per_episode,
        cap_hits,
        diverged: trainer.diverged,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Runs `config.run.episodes` episodes with the configured rehearsal strategy.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let seeds = RunSeeds::derive(config.run.seed);
    let agent = Agent::new(config.run.hidden_width, config.hyper, seeds.agent)?;
    let rehearser = Rehearser::new(
        config.rehearsal,
        &agent.actor,
        &agent.critic,
        seeds.rehearsal,
    )?;
    run_with(config, agent, rehearser, seeds)
}

/// Same run loop with plain backprop and no rehearsal machinery, ignoring the rehearsal mode.
pub fn run_without_rehearsal(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let seeds = RunSeeds::derive(config.run.seed);
    let agent = Agent::new(config.run.hidden_width, config.hyper, seeds.agent)?;
    run_with(config, agent, PlainBackprop, seeds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub label: String,
    /// Per-seed records in seed order.
    pub runs: Vec<RunRecord>,
    /// All per-episode step counts from every seed, concatenated in seed order.
    pub pooled: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Per-episode mean across seeds.
    pub mean_curve: Vec<f64>,
    /// Tendency of `mean_curve`; empty when there are too few episodes.
    pub tendency_curve: Vec<f64>,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTest {
    pub a: usize,
    pub b: usize,
    /// Test on the raw pooled per-episode step counts.
    pub raw: TTestResult,
    /// Test on the tendency curves of the per-episode means, when long enough.
    pub smoothed: Option<TTestResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub strategies: Vec<StrategySummary>,
    pub pairwise: Vec<PairwiseTest>,
}

impl Comparison {
    pub fn strategy(&self, label: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.label == label)
    }

    pub fn test(&self, a: usize, b: usize) -> Option<TTestResult> {
        self.pairwise.iter().find_map(|p| match (p.a, p.b) {
            (x, y) if x == a && y == b => Some(p.raw),
            (x, y) if x == b && y == a => Some(TTestResult {
                t_stat: -p.raw.t_stat,
                dof: p.raw.dof,
                significant_one_tail_05: -p.raw.t_stat > stats::one_tail_critical(p.raw.dof),
            }),
            _ => None,
        })
    }

    /// Tendency of `mean_curve(a) - mean_curve(b)`.
    pub fn difference_tendency(&self, a: usize, b: usize) -> Result<Vec<f64>> {
        let diff = stats::difference(
            &self.strategies[a].mean_curve,
            &self.strategies[b].mean_curve,
        );
        stats::tendency(&diff, DEFAULT_WINDOW)
    }
}

fn unique_labels(configs: &[RunConfig]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(configs.len());
    for c in configs {
        let base = c.label();
        let mut label = base.clone();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{base}-{n}");
            n += 1;
        }
        labels.push(label);
    }
    labels
}

/// Runs every `(config, seed)` pair and compares the strategies.
pub fn compare_strategies(configs: &[RunConfig], seeds: &[u64]) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::config("compare", "need at least two configurations"));
    }
    if seeds.len() < 2 {
        return Err(Error::config("compare", "need at least two seeds"));
    }
    let episodes = configs[0].run.episodes;
    if configs.iter().any(|c| c.run.episodes != episodes) {
        return Err(Error::config(
            "run.episodes",
            "must match across compared configurations",
        ));
    }
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |s| (i, *s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|(i, seed)| run_experiment(&configs[*i].clone().with_seed(*seed)))
        .collect::<Result<Vec<_>>>()?;

    let labels = unique_labels(configs);
    let mut strategies = Vec::with_capacity(configs.len());
    let mut records = records.into_iter();
    for label in labels {
        let runs: Vec<RunRecord> = records.by_ref().take(seeds.len()).collect();
        let pooled: Vec<f64> = runs.iter().flat_map(|r| r.steps_f64()).collect();
        let mean_curve: Vec<f64> = (0..episodes)
            .map(|e| {
                runs.iter()
                    .map(|r| r.steps_per_episode[e] as f64)
                    .sum::<f64>()
                    / runs.len() as f64
            })
            .collect();
        let tendency_curve = stats::tendency(&mean_curve, DEFAULT_WINDOW).unwrap_or_default();
        strategies.push(StrategySummary {
            label,
            mean: stats::mean(&pooled),
            variance: stats::variance(&pooled),
            diverged_runs: runs.iter().filter(|r| r.diverged).count(),
            runs,
            pooled,
            mean_curve,
            tendency_curve,
        });
    }

    let mut pairwise = Vec::new();
    for a in 0..strategies.len() {
        for b in a + 1..strategies.len() {
            let raw = stats::t_test(&strategies[a].pooled, &strategies[b].pooled)?;
            let (ta, tb) = (&strategies[a].tendency_curve, &strategies[b].tendency_curve);
            let smoothed = if ta.len() >= 2 {
                Some(stats::t_test(ta, tb)?)
            } else {
                None
            };
            pairwise.push(PairwiseTest {
                a,
                b,
                raw,
                smoothed,
            });
        }
    }
    Ok(Comparison {
        strategies,
        pairwise,
    })
}
