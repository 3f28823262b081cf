//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! The trend experiments default to 30 seeds x 3000 episodes per strategy.
//! `ACCEPTANCE_SEEDS` and `ACCEPTANCE_EPISODES` shrink them for a quick look;
//! reduced-scale trend lines are labelled as such.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rehearsal_lab::agent::{action_probabilities, Agent};
use rehearsal_lab::cartpole::{self, CartState, PhysicsParams};
use rehearsal_lab::lab::stats::{smoothed_min, tendency, TTestResult};
use rehearsal_lab::lab::{
    compare_strategies, run_experiment, run_without_rehearsal, Comparison, RunConfig,
};
use rehearsal_lab::mlp::{BatchItem, NetworkParams};
use rehearsal_lab::rehearsal::{
    eq3_delta, NetRole, PseudoSet, RehearsalConfig, RehearsalMode, Rehearser, Trainer,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, name: &str, outcome: Outcome) {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            self.failures += 1;
        }
        println!("{tag}  {name}: {}", outcome.detail);
    }

    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let started = Instant::now();
        let mut outcome = f();
        outcome.detail = format!(
            "{} [{:.2} s]",
            outcome.detail,
            started.elapsed().as_secs_f64()
        );
        self.record(name, outcome);
    }
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let net = NetworkParams::new(&[12, 16, 2], 5000 + trial).unwrap();
        let input = random_vec(&mut rng, 12, -1.0, 1.0);
        let target = random_vec(&mut rng, 2, -1.0, 1.0);
        let back = net.backward(&input, &target).unwrap();
        let analytic = back.gradients.iter().flat_map(|g| g.as_slice().to_vec());
        let numeric = finite_difference_gradient(&net, &input, &target, 1e-5);
        for (a, n) in analytic.zip(numeric) {
            worst = worst.max(relative_error(a, n, 1e-4));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst < 1e-5 && secs < 10.0,
        format!("100 nets 12/16/2, max relative error {worst:.2e} (limit 1e-5), {secs:.2} s (limit 10 s)"),
    )
}

fn softmax_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let (mut sum_err, mut shift_err, mut min_p) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=6);
        let logits = random_vec(&mut rng, n, -1.0, 1.0);
        let tau = rng.gen_range(0.01..=100.0);
        let shift = rng.gen_range(-5.0..5.0);
        let p = action_probabilities(&logits, tau).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let q = action_probabilities(&shifted, tau).unwrap();
        sum_err = sum_err.max((p.iter().sum::<f64>() - 1.0).abs());
        min_p = p.iter().copied().fold(min_p, f64::min);
        for (a, b) in p.iter().zip(&q) {
            shift_err = shift_err.max((a - b).abs());
        }
    }
    let e = action_probabilities(&[1.0, 0.0], 1.0).unwrap();
    let example_ok = (e[0] - 0.7311).abs() < 1e-4 && (e[1] - 0.2689).abs() < 1e-4;
    Outcome::new(
        sum_err < 1e-12 && shift_err < 1e-12 && min_p > 0.0 && example_ok,
        format!(
            "10^4 cases, |sum-1| {sum_err:.1e}, shift deviation {shift_err:.1e}, min p {min_p:.2e}, [1,0] at tau 1 gives [{:.4}, {:.4}]",
            e[0], e[1]
        ),
    )
}

fn eq3_algebra() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let (mut orth_err, mut perp_err, mut collinear_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=17);
        let b = random_vec(&mut rng, n, -1.0, 1.0);
        let err = rng.gen_range(-2.0..2.0);

        let x = orthogonal_to(&mut rng, &b);
        let d = eq3_delta(&b, err, &[x]).unwrap();
        let bb = dot(&b, &b);
        for (di, bi) in d.iter().zip(&b) {
            orth_err =
                orth_err.max((di - err * bi / bb).abs() / (err.abs() * norm(&b) / bb).max(1e-300));
        }

        let x = random_vec(&mut rng, n, -1.0, 1.0);
        let d = eq3_delta(&b, err, std::slice::from_ref(&x)).unwrap();
        let gram = bb * dot(&x, &x) - dot(&b, &x).powi(2);
        if gram > 1e-9 * bb * dot(&x, &x) && err != 0.0 {
            perp_err = perp_err.max(dot(&d, &x).abs() / (norm(&d) * norm(&x)));
        }

        let c = rng.gen_range(-3.0..3.0);
        let parallel: Vec<f64> = b.iter().map(|v| c * v).collect();
        let d = eq3_delta(&b, err, &[parallel]).unwrap();
        collinear_ok &= d.iter().all(|v| v.is_finite())
            && d.iter()
                .zip(&b)
                .all(|(di, bi)| (di - err * bi / bb).abs() <= 1e-12 * (1.0 + di.abs()));
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        orth_err < 1e-12 && perp_err < 1e-10 && collinear_ok && secs < 5.0,
        format!(
            "10^4 pairs, orthogonal-case deviation {orth_err:.1e} (limit 1e-12), relative delta.x {perp_err:.1e} (limit 1e-10), collinear fallback finite: {collinear_ok}, {secs:.2} s (limit 5 s)"
        ),
    )
}

fn physics() -> Outcome {
    let params = PhysicsParams::default();
    let mut s = CartState::upright();
    for _ in 0..10_000 {
        s = cartpole::step_with_force(&s, 0.0, &params)
            .unwrap()
            .next_state;
    }
    let equilibrium = s == CartState::upright();

    let signs = [-0.05, -1e-3, -1e-6, 1e-6, 1e-3, 0.05]
        .iter()
        .all(|theta: &f64| {
            let (_, acc) =
                cartpole::accelerations(&CartState::with_pose(0.0, *theta), 0.0, &params);
            acc.signum() == theta.signum()
        });

    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let start = random_start(&mut rng);
        let force = [-params.force_magnitude, 0.0, params.force_magnitude][rng.gen_range(0..3)];
        let r = euler_error_ratio(start, force, &params, 0.5);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let convergence = lo >= 1.7 && hi <= 2.3;
    Outcome::new(
        equilibrium && signs && convergence,
        format!(
            "equilibrium exact: {equilibrium}, sign(theta_ddot)=sign(theta): {signs}, Euler halving ratio over 50 states in [{lo:.3}, {hi:.3}] (limit 2.0 +/- 0.3)"
        ),
    )
}

fn fidelity_error(set: &PseudoSet, net: &NetworkParams) -> f64 {
    let mut worst = 0.0f64;
    for item in &set.items {
        let acts = net.forward(&item.input).unwrap();
        for (o, t) in acts.output().iter().zip(&item.target_output) {
            worst = worst.max((o - t).abs());
        }
        if let Some(stored) = &item.layer_activations {
            for (a, b) in stored
                .per_layer
                .iter()
                .flatten()
                .zip(acts.per_layer.iter().flatten())
            {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

fn capture_fidelity() -> Outcome {
    let physics = PhysicsParams::default();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for mode in [
        RehearsalMode::FrOutputOnly,
        RehearsalMode::FrAllLayers,
        RehearsalMode::Batch,
    ] {
        for period in [1, 3, 10] {
            let config = RehearsalConfig {
                mode,
                reinit_period: period,
                batch_iterations: 5,
                ..RehearsalConfig::default()
            };
            let mut agent = Agent::new(16, Default::default(), 77).unwrap();
            let mut rehearser = Rehearser::new(config, &agent.actor, &agent.critic, 78).unwrap();
            for role in [NetRole::Actor, NetRole::Critic] {
                let net = if role == NetRole::Actor {
                    &agent.actor
                } else {
                    &agent.critic
                };
                worst = worst.max(fidelity_error(rehearser.pseudoset(role).unwrap(), net));
                checks += 1;
            }
            let mut starts = ChaCha8Rng::seed_from_u64(79);
            for _ in 0..30 {
                let start = cartpole::reset_with(&mut starts);
                agent
                    .run_episode(start, &physics, 100_000, &mut rehearser)
                    .unwrap();
                rehearser.end_episode(&agent.actor, &agent.critic).unwrap();
                for role in [NetRole::Actor, NetRole::Critic] {
                    let set = rehearser.pseudoset(role).unwrap();
                    if set.episodes_since_reinit == 0 {
                        let net = if role == NetRole::Actor {
                            &agent.actor
                        } else {
                            &agent.critic
                        };
                        worst = worst.max(fidelity_error(set, net));
                        checks += 1;
                    }
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && checks > 0,
        format!("{checks} captures checked across modes and periods, max deviation {worst:.1e} (limit 1e-12)"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(102..400);
        let v = random_vec(&mut rng, len, 0.0, 500.0);
        if tendency(&v, 100).unwrap() != oracle_tendency(&v, 100)
            || smoothed_min(&v, 100).unwrap() != oracle_smoothed_min(&v, 100)
        {
            mismatches += 1;
        }
    }

    let mut worst = 0.0f64;
    for trial in 0..50 {
        let net = NetworkParams::new(&[12, 16, 2], 9000 + trial).unwrap();
        let items: Vec<(Vec<f64>, Vec<f64>)> = (0..31)
            .map(|_| {
                let x = (0..12).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
                (x, random_vec(&mut rng, 2, -1.0, 1.0))
            })
            .collect();
        let batch: Vec<BatchItem> = items
            .iter()
            .map(|(x, t)| BatchItem {
                input: x.clone(),
                target: t.clone(),
            })
            .collect();
        // small enough that the first full step always lowers the loss
        let lr = 0.01;
        let expected = oracle_batch_step(&net, &items, lr);
        let mut trained = net.clone();
        trained.batch_backprop(&batch, lr, 1).unwrap();
        for (a, b) in trained.to_flat().iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(
        mismatches == 0 && worst < 1e-12,
        format!(
            "{mismatches}/1000 windowed mismatches, single batch step deviation {worst:.1e} (limit 1e-12)"
        ),
    )
}

fn mode_none_transparency() -> Outcome {
    let mut identical = 0;
    for seed in 1..=10 {
        let config = RunConfig::default().with_episodes(100).with_seed(seed);
        let a = run_experiment(&config).unwrap();
        let b = run_without_rehearsal(&config).unwrap();
        if a.steps_per_episode == b.steps_per_episode && a.diverged == b.diverged {
            identical += 1;
        }
    }
    Outcome::new(
        identical == 10,
        format!("{identical}/10 seeded 100-episode runs bit-identical"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let modes = ["none", "fr-output", "fr-all", "batch"];
    for mode in modes {
        let run = |name: &str| {
            let path = dir.path().join(format!("{mode}-{name}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_rehearsal-lab"))
                .args([
                    "run",
                    "--mode",
                    mode,
                    "--episodes",
                    "60",
                    "--seed",
                    "13",
                    "--quiet",
                    "--out",
                ])
                .arg(&path)
                .status()
                .unwrap();
            assert!(status.success());
            std::fs::read(path).unwrap()
        };
        if run("a") == run("b") {
            identical += 1;
        }
    }
    Outcome::new(
        identical == modes.len(),
        format!(
            "{identical}/{} modes produced byte-identical CSVs on repeat",
            modes.len()
        ),
    )
}

struct TrendScale {
    seeds: u64,
    episodes: usize,
}

impl TrendScale {
    fn from_env() -> Self {
        let read = |key: &str, default: u64| {
            std::env::var(key)
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(default)
        };
        Self {
            seeds: read("ACCEPTANCE_SEEDS", 30),
            episodes: read("ACCEPTANCE_EPISODES", 3000) as usize,
        }
    }

    fn is_full(&self) -> bool {
        self.seeds >= 30 && self.episodes >= 3000
    }

    fn tag(&self) -> String {
        if self.is_full() {
            format!("{} seeds x {} episodes", self.seeds, self.episodes)
        } else {
            format!(
                "REDUCED SCALE {} seeds x {} episodes",
                self.seeds, self.episodes
            )
        }
    }
}

fn trend_comparison(force: f64, scale: &TrendScale) -> Comparison {
    let configs: Vec<RunConfig> = RehearsalMode::ALL
        .iter()
        .map(|m| {
            RunConfig::for_mode(*m)
                .with_force(force)
                .with_episodes(scale.episodes)
        })
        .collect();
    let seeds: Vec<u64> = (1..=scale.seeds).collect();
    compare_strategies(&configs, &seeds).unwrap()
}

fn index(cmp: &Comparison, label: &str) -> usize {
    cmp.strategies
        .iter()
        .position(|s| s.label == label)
        .unwrap()
}

fn mean_of(cmp: &Comparison, label: &str) -> f64 {
    cmp.strategy(label).unwrap().mean
}

/// Test of `better` over `worse`, with the direction and t value spelled out.
fn directional(cmp: &Comparison, better: &str, worse: &str) -> (TTestResult, String) {
    let t = cmp.test(index(cmp, better), index(cmp, worse)).unwrap();
    let (mb, mw) = (mean_of(cmp, better), mean_of(cmp, worse));
    let relation = if mb > mw { ">" } else { "<=" };
    let text = format!(
        "{better} {mb:.2} {relation} {worse} {mw:.2} (t {:.2}, dof {}, significant {})",
        t.t_stat, t.dof, t.significant_one_tail_05
    );
    (t, text)
}

fn diverged_summary(cmp: &Comparison) -> String {
    cmp.strategies
        .iter()
        .map(|s| format!("{} {}", s.label, s.diverged_runs))
        .collect::<Vec<_>>()
        .join(", ")
}

fn finding(pass: bool, detail: String) -> Outcome {
    if pass {
        Outcome::new(true, detail)
    } else {
        Outcome::new(
            false,
            format!("calibration finding, trend not reproduced: {detail}"),
        )
    }
}

fn trends(report: &mut Report) {
    let scale = TrendScale::from_env();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let started = Instant::now();
    let high = trend_comparison(25.0, &scale);
    let high_secs = started.elapsed().as_secs_f64();
    let low = trend_comparison(2.5, &scale);
    let total = started.elapsed();
    println!(
        "      trend runs: {}, 25 N in {high_secs:.0} s, 2.5 N in {:.0} s, {cores} core(s)",
        scale.tag(),
        total.as_secs_f64() - high_secs
    );
    println!("      diverged runs at 25 N: {}", diverged_summary(&high));
    println!("      diverged runs at 2.5 N: {}", diverged_summary(&low));

    let (t1, d1) = directional(&high, "fr-all", "none");
    let (t2, d2) = directional(&high, "fr-all", "fr-output");
    report.record(
        &format!("trend (a) 25 N all-layer correction wins [{}]", scale.tag()),
        finding(
            t1.significant_one_tail_05 && t2.significant_one_tail_05,
            format!("{d1}; {d2}"),
        ),
    );

    let (t3, d3) = directional(&high, "batch", "fr-all");
    let (vb, vf) = (
        high.strategy("batch").unwrap().variance,
        high.strategy("fr-all").unwrap().variance,
    );
    report.record(
        &format!(
            "trend (b) 25 N batch beats all-layer correction [{}]",
            scale.tag()
        ),
        finding(
            t3.significant_one_tail_05 && vb > vf,
            format!("{d3}; variance batch {vb:.1} vs fr-all {vf:.1}"),
        ),
    );

    let (t4, d4) = directional(&low, "fr-all", "batch");
    report.record(
        &format!(
            "trend (c) 2.5 N all-layer correction beats batch [{}]",
            scale.tag()
        ),
        finding(t4.significant_one_tail_05, d4),
    );

    let mut parts = Vec::new();
    let mut all_ok = true;
    for (force, cmp) in [(25.0, &high), (2.5, &low)] {
        let base = mean_of(cmp, "none");
        for mode in ["fr-output", "fr-all", "batch"] {
            let m = mean_of(cmp, mode);
            all_ok &= m >= base;
            parts.push(format!("{force} N {mode} {m:.2} vs none {base:.2}"));
        }
    }
    report.record(
        &format!(
            "trend (d) no rehearsal mode is worse than none [{}]",
            scale.tag()
        ),
        finding(all_ok, parts.join("; ")),
    );

    let limit = Duration::from_secs(30 * 60);
    report.record(
        &format!("trend suite runtime [{}]", scale.tag()),
        Outcome::new(
            total < limit,
            format!(
                "{:.1} min wall clock on {cores} core(s) (limit 30 min)",
                total.as_secs_f64() / 60.0
            ),
        ),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    report.check("gradient correctness", gradient_correctness);
    report.check("softmax properties", softmax_properties);
    report.check("orthogonal correction algebra", eq3_algebra);
    report.check("physics", physics);
    report.check("capture fidelity", capture_fidelity);
    report.check("oracle equivalence", oracle_equivalence);
    report.check("mode-none transparency", mode_none_transparency);
    report.check("determinism", determinism);
    trends(&mut report);
    println!("{} criteria failed", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
