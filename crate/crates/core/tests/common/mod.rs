//! Independent reference implementations used by the integration and acceptance tests.
//!
//! Nothing here calls the library's own forward/backward code; the oracles read
//! weights through the public accessors and recompute everything from scratch.

#![allow(dead_code)]

use rand::Rng;
use rehearsal_lab::cartpole::{self, CartState, PhysicsParams};
use rehearsal_lab::mlp::NetworkParams;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Hidden and output activations for one input, computed from the raw weights.
pub fn oracle_forward(net: &NetworkParams, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (w0, w1) = (net.weights(0), net.weights(1));
    let layer = |w: &rehearsal_lab::mlp::WeightMatrix, x: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|r| {
                let mut z = w.get(r, x.len());
                for (c, xc) in x.iter().enumerate() {
                    z += w.get(r, c) * xc;
                }
                z
            })
            .collect()
    };
    let hidden: Vec<f64> = layer(w0, input).into_iter().map(logistic).collect();
    let output = layer(w1, &hidden);
    (hidden, output)
}

pub fn oracle_loss(net: &NetworkParams, input: &[f64], target: &[f64]) -> f64 {
    let (_, out) = oracle_forward(net, input);
    0.5 * out
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
}

/// Analytic gradient of the half squared error, flattened in layer order,
/// row-major with the bias column last.
pub fn oracle_gradient(net: &NetworkParams, input: &[f64], target: &[f64]) -> Vec<f64> {
    let (hidden, out) = oracle_forward(net, input);
    let w1 = net.weights(1);
    let d_out: Vec<f64> = out.iter().zip(target).map(|(o, t)| o - t).collect();
    let d_hidden: Vec<f64> = (0..hidden.len())
        .map(|j| {
            let s: f64 = (0..w1.rows()).map(|k| w1.get(k, j) * d_out[k]).sum();
            s * hidden[j] * (1.0 - hidden[j])
        })
        .collect();
    let mut g = Vec::with_capacity(net.parameter_count());
    for d in &d_hidden {
        g.extend(input.iter().map(|x| d * x));
        g.push(*d);
    }
    for d in &d_out {
        g.extend(hidden.iter().map(|h| d * h));
        g.push(*d);
    }
    g
}

/// Central finite-difference gradient over the flat parameter vector.
pub fn finite_difference_gradient(
    net: &NetworkParams,
    input: &[f64],
    target: &[f64],
    h: f64,
) -> Vec<f64> {
    let sizes = net.layer_sizes();
    let flat = net.to_flat();
    (0..flat.len())
        .map(|i| {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[i] += h;
            minus[i] -= h;
            let up = NetworkParams::from_flat(&sizes, &plus).unwrap();
            let down = NetworkParams::from_flat(&sizes, &minus).unwrap();
            (oracle_loss(&up, input, target) - oracle_loss(&down, input, target)) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// One plain full-batch gradient step on the mean loss, built from per-item gradients.
pub fn oracle_batch_step(net: &NetworkParams, items: &[(Vec<f64>, Vec<f64>)], lr: f64) -> Vec<f64> {
    let mut sum = vec![0.0; net.parameter_count()];
    for (x, t) in items {
        for (s, g) in sum.iter_mut().zip(oracle_gradient(net, x, t)) {
            *s += g;
        }
    }
    let n = items.len() as f64;
    net.to_flat()
        .iter()
        .zip(&sum)
        .map(|(w, s)| w - lr * (s / n))
        .collect()
}

pub fn oracle_tendency(v: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..v.len() - window {
        let mut acc = 0.0;
        for x in &v[i..=i + window] {
            acc += x;
        }
        out.push(acc / (window + 1) as f64);
    }
    out
}

pub fn oracle_smoothed_min(v: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..v.len() - window {
        let mut m = v[i];
        for x in &v[i + 1..=i + window] {
            if *x < m {
                m = *x;
            }
        }
        out.push(m);
    }
    out
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Random vector with the component along `b` removed.
pub fn orthogonal_to<R: Rng>(rng: &mut R, b: &[f64]) -> Vec<f64> {
    let v = random_vec(rng, b.len(), -1.0, 1.0);
    let k = dot(&v, b) / dot(b, b);
    v.iter().zip(b).map(|(vi, bi)| vi - k * bi).collect()
}

/// Euler-integrates `seconds` of motion under a constant force, ignoring failure.
pub fn integrate(start: CartState, force: f64, params: &PhysicsParams, seconds: f64) -> CartState {
    let steps = (seconds / params.timestep).round() as usize;
    let mut s = start;
    for _ in 0..steps {
        s = cartpole::step_with_force(&s, force, params)
            .unwrap()
            .next_state;
    }
    s
}

pub fn state_distance(a: &CartState, b: &CartState) -> f64 {
    [
        a.x - b.x,
        a.x_dot - b.x_dot,
        a.theta - b.theta,
        a.theta_dot - b.theta_dot,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Ratio of Euler errors at `dt` and `dt / 2`, both measured against `dt / 20`.
pub fn euler_error_ratio(
    start: CartState,
    force: f64,
    params: &PhysicsParams,
    seconds: f64,
) -> f64 {
    let with_dt = |dt: f64| PhysicsParams {
        timestep: dt,
        ..*params
    };
    let dt = params.timestep;
    let reference = integrate(start, force, &with_dt(dt / 20.0), seconds);
    let coarse = integrate(start, force, &with_dt(dt), seconds);
    let fine = integrate(start, force, &with_dt(dt / 2.0), seconds);
    state_distance(&coarse, &reference) / state_distance(&fine, &reference)
}

/// Random near-upright, moving state well inside the failure bounds.
pub fn random_start<R: Rng>(rng: &mut R) -> CartState {
    let mut s = CartState::with_pose(rng.gen_range(-0.5..0.5), rng.gen_range(-0.1..0.1));
    s.x_dot = rng.gen_range(-0.5..0.5);
    s.theta_dot = rng.gen_range(-0.5..0.5);
    s
}
