//! Per-subcarrier power allocation for a fixed user row.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::metric::metric_unchecked;
use crate::channel::SubcarrierGains;
use crate::error::{Error, Result};

/// Uniform power `V` assumed on every active beam when estimating
/// interference before powers are known.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InterferencePower(f64);

impl InterferencePower {
    pub fn new(watts: f64) -> Result<Self> {
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(Error::config(format!("interference power must be >= 0, got {watts}")));
        }
        Ok(Self(watts))
    }

    pub fn watts(self) -> f64 {
        self.0
    }
}

fn check_inputs(c: SubcarrierGains<'_>, users: &[Option<usize>], mu: &[f64], lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::contract(format!("power price must be positive, got {lambda}")));
    }
    if users.len() != c.beams() {
        return Err(Error::contract("user row length differs from beam count"));
    }
    if mu.len() != c.users() {
        return Err(Error::contract("weight vector length differs from user count"));
    }
    if users.iter().flatten().any(|&k| k >= c.users()) {
        return Err(Error::contract("user index out of range"));
    }
    Ok(())
}

/// Closed-form water-filling with interference from uniform power `V` on
/// the other active beams:
/// `p_q = [μ_u/(λ ln2) - (1 + Σ_{s≠q active} V c_{u,s}) / c_{u,q}]^+`.
pub fn waterfill(
    c: SubcarrierGains<'_>,
    users: &[Option<usize>],
    mu: &[f64],
    lambda: f64,
    v: InterferencePower,
) -> Result<Vec<f64>> {
    check_inputs(c, users, mu, lambda)?;
    let v = v.watts();
    Ok(users
        .iter()
        .enumerate()
        .map(|(q, u)| match *u {
            None => 0.0,
            Some(k) => {
                let gains = c.user(k);
                if gains[q] <= 0.0 {
                    return 0.0;
                }
                let interference: f64 = users
                    .iter()
                    .enumerate()
                    .filter(|&(s, other)| s != q && other.is_some())
                    .map(|(s, _)| v * gains[s])
                    .sum();
                (mu[k] / (lambda * LN_2) - (1.0 + interference) / gains[q]).max(0.0)
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    pub metric: f64,
    pub iterations: usize,
    /// False when the iteration that produced `powers` hit the cap.
    pub converged: bool,
}

struct Search<'a> {
    c: SubcarrierGains<'a>,
    users: &'a [Option<usize>],
    mu: &'a [f64],
    lambda: f64,
    best: PowerSolution,
    best_converged: f64,
}

impl Search<'_> {
    fn consider(&mut self, powers: &[f64], iterations: usize, converged: bool) {
        let metric = metric_unchecked(self.c, self.users, powers, self.mu, self.lambda);
        if converged {
            self.best_converged = self.best_converged.max(metric);
        }
        if metric > self.best.metric {
            self.best = PowerSolution {
                powers: powers.to_vec(),
                metric,
                iterations,
                converged,
            };
        }
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Approximately maximizes the per-subcarrier metric over `p >= 0` for a
/// fixed user row.
///
/// Two iterative schemes run and the best iterate by metric is returned:
/// successive water-filling, where each beam water-fills against the
/// interference produced by the previous iterate, and a successive convex
/// approximation that lower-bounds `log(1+γ)` by `α log γ + β` and solves the
/// resulting concave problem in log-power by fixed point, once for every
/// support of active beams. The second accounts for the interference a beam
/// causes to the others, which plain water-filling ignores.
pub fn optimal_power(
    c: SubcarrierGains<'_>,
    users: &[Option<usize>],
    mu: &[f64],
    lambda: f64,
    opts: PowerOptions,
) -> Result<PowerSolution> {
    check_inputs(c, users, mu, lambda)?;
    if !(opts.tol > 0.0) {
        return Err(Error::contract("power tolerance must be positive"));
    }
    let t = users.len();
    let active: Vec<usize> = (0..t).filter(|&q| users[q].is_some()).collect();
    let mut search = Search {
        c,
        users,
        mu,
        lambda,
        best: PowerSolution {
            powers: vec![0.0; t],
            metric: 0.0,
            iterations: 0,
            converged: true,
        },
        best_converged: 0.0,
    };
    if active.is_empty() {
        return Ok(search.best);
    }

    let own_gain = |q: usize| c.get(users[q].unwrap(), q);
    let level = |q: usize| mu[users[q].unwrap()] / (lambda * LN_2);
    let isolated = |q: usize| {
        let g = own_gain(q);
        if g > 0.0 {
            (level(q) - 1.0 / g).max(0.0)
        } else {
            0.0
        }
    };

    // successive water-filling
    let mut p = vec![0.0; t];
    for &q in &active {
        p[q] = isolated(q);
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        search.consider(&p, iterations, false);
        let next: Vec<f64> = (0..t)
            .map(|q| match users[q] {
                None => 0.0,
                Some(k) => {
                    let gains = c.user(k);
                    if gains[q] <= 0.0 {
                        return 0.0;
                    }
                    let interference: f64 = (0..t).filter(|&s| s != q).map(|s| p[s] * gains[s]).sum();
                    (level(q) - (1.0 + interference) / gains[q]).max(0.0)
                }
            })
            .collect();
        iterations += 1;
        let change = max_change(&p, &next);
        p = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    search.consider(&p, iterations, converged);

    // successive convex approximation on every support
    for mask in 1u32..(1 << active.len()) {
        let support: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask & (1 << i) != 0)
            .map(|(_, &q)| q)
            .collect();
        let mut p = vec![0.0; t];
        if let [q] = support[..] {
            p[q] = isolated(q);
            search.consider(&p, 1, true);
            continue;
        }
        for &q in &support {
            p[q] = isolated(q).max(0.5 * level(q));
        }
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let gain = |s: usize, r: usize| c.get(users[s].unwrap(), r);
            let interference: Vec<f64> = (0..t)
                .map(|s| {
                    support
                        .iter()
                        .filter(|&&r| r != s)
                        .map(|&r| p[r] * gain_or_zero(users, c, s, r))
                        .sum()
                })
                .collect();
            let alpha: Vec<f64> = (0..t)
                .map(|s| {
                    if !support.contains(&s) {
                        return 0.0;
                    }
                    let snir = p[s] * gain(s, s) / (1.0 + interference[s]);
                    snir / (1.0 + snir)
                })
                .collect();
            let mut next = vec![0.0; t];
            for &q in &support {
                let weight = |s: usize| mu[users[s].unwrap()];
                let price: f64 = support
                    .iter()
                    .filter(|&&s| s != q)
                    .map(|&s| weight(s) * alpha[s] * gain(s, q) / (1.0 + interference[s]))
                    .sum();
                next[q] = weight(q) * alpha[q] / (lambda * LN_2 + price);
            }
            iterations += 1;
            let change = max_change(&p, &next);
            p = next;
            let done = change < opts.tol;
            search.consider(&p, iterations, done);
            if done {
                break;
            }
        }
    }

    let mut best = search.best;
    // an earlier iterate may tie the fixed point it converged to
    if !best.converged && search.best_converged >= best.metric - 1e-12 * best.metric.abs().max(1.0) {
        best.converged = true;
    }
    Ok(best)
}

fn gain_or_zero(users: &[Option<usize>], c: SubcarrierGains<'_>, s: usize, r: usize) -> f64 {
    users[s].map_or(0.0, |k| c.get(k, r))
}
