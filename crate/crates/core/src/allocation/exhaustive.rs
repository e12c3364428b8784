use serde::{Deserialize, Serialize};

use super::metric::{metric_unchecked, uniform_powers};
use super::power::{optimal_power, InterferencePower, PowerOptions};
use crate::channel::SubcarrierGains;
use crate::error::{Error, Result};

/// Largest `(K+1)^t` the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    /// Power `V` on every active beam.
    UniformV,
    /// Per-candidate power optimization.
    Optimal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub users: Vec<Option<usize>>,
    pub powers: Vec<f64>,
    pub metric: f64,
    /// Valid user rows evaluated.
    pub candidates: u64,
    /// False when the winning row's power solve hit the iteration cap.
    pub converged: bool,
}

/// Size of the raw search space `(K+1)^t`, saturating.
pub fn search_space(users: usize, beams: usize) -> u128 {
    (0..beams).fold(1u128, |acc, _| acc.saturating_mul(users as u128 + 1))
}

pub fn check_search_space(users: usize, beams: usize) -> Result<()> {
    let candidates = search_space(users, beams);
    if candidates > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpace {
            candidates,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    Ok(())
}

/// Evaluates every user row without repeated users and returns the one with
/// the largest metric `Σ μ log2(1+γ) - λ Σ p`. The all-off row wins ties.
///
/// `lambda` may be zero in uniform mode; optimal mode needs `lambda > 0`.
pub fn allocate_exhaustive(
    c: SubcarrierGains<'_>,
    mu: &[f64],
    lambda: f64,
    v: InterferencePower,
    mode: PowerMode,
    opts: PowerOptions,
) -> Result<ExhaustiveResult> {
    let (k, t) = (c.users(), c.beams());
    check_search_space(k, t)?;
    if mu.len() != k {
        return Err(Error::contract("weight vector length differs from user count"));
    }
    let mut best = ExhaustiveResult {
        users: vec![None; t],
        powers: vec![0.0; t],
        metric: 0.0,
        candidates: 0,
        converged: true,
    };
    let mut digits = vec![0usize; t];
    let mut users = vec![None; t];
    let mut candidates = 0u64;
    loop {
        // odometer over {0..K}^t, 0 meaning off
        let mut i = 0;
        while i < t {
            digits[i] += 1;
            if digits[i] <= k {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == t {
            break;
        }
        for (u, &d) in users.iter_mut().zip(&digits) {
            *u = d.checked_sub(1);
        }
        if has_duplicate(&users) {
            continue;
        }
        candidates += 1;
        let (powers, metric, converged) = match mode {
            PowerMode::UniformV => {
                let p = uniform_powers(&users, v.watts());
                let m = metric_unchecked(c, &users, &p, mu, lambda);
                (p, m, true)
            }
            PowerMode::Optimal => {
                let sol = optimal_power(c, &users, mu, lambda, opts)?;
                (sol.powers, sol.metric, sol.converged)
            }
        };
        if metric > best.metric {
            best.users.clone_from(&users);
            best.powers = powers;
            best.metric = metric;
            best.converged = converged;
        }
    }
    best.candidates = candidates + 1;
    Ok(best)
}

fn has_duplicate(users: &[Option<usize>]) -> bool {
    users
        .iter()
        .enumerate()
        .any(|(q, u)| u.is_some() && users[..q].contains(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::metric::rate;

    fn v(x: f64) -> InterferencePower {
        InterferencePower::new(x).unwrap()
    }

    #[test]
    fn no_users_means_all_off() {
        let g = SubcarrierGains::new(0, 2, &[]);
        let out = allocate_exhaustive(g, &[], 0.5, v(1.0), PowerMode::UniformV, PowerOptions::default()).unwrap();
        assert_eq!(out.users, vec![None, None]);
        assert_eq!(out.metric, 0.0);
        assert_eq!(out.candidates, 1);
    }

    #[test]
    fn one_user_one_beam() {
        let c = [3.0];
        let g = SubcarrierGains::new(1, 1, &c);
        let on = rate(3.0) - 0.5;
        let out = allocate_exhaustive(g, &[1.0], 0.5, v(1.0), PowerMode::UniformV, PowerOptions::default()).unwrap();
        assert!((out.metric - on.max(0.0)).abs() < 1e-12);
        assert_eq!(out.users, vec![Some(0)]);
        // a steep price turns the beam off
        let out = allocate_exhaustive(g, &[1.0], 5.0, v(1.0), PowerMode::UniformV, PowerOptions::default()).unwrap();
        assert_eq!(out.users, vec![None]);
        assert_eq!(out.metric, 0.0);
    }

    #[test]
    fn candidate_count_skips_repeats() {
        let c = vec![1.0; 3 * 2];
        let g = SubcarrierGains::new(3, 2, &c);
        let out = allocate_exhaustive(g, &[1.0; 3], 0.0, v(1.0), PowerMode::UniformV, PowerOptions::default()).unwrap();
        // 16 rows minus 3 with a repeated user
        assert_eq!(out.candidates, 13);
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let c = vec![1.0; 10 * 6];
        let g = SubcarrierGains::new(10, 6, &c);
        let err = allocate_exhaustive(g, &[1.0; 10], 1.0, v(1.0), PowerMode::UniformV, PowerOptions::default());
        assert!(matches!(err, Err(Error::SearchSpace { .. })));
        assert_eq!(search_space(9, 6), 1_000_000);
        assert!(check_search_space(9, 6).is_ok());
    }
}
