use crate::channel::SubcarrierGains;
use crate::error::{Error, Result};

/// SNIR of user `k` on beam `q` given the per-beam powers of the subcarrier:
/// `p_q c_{k,q} / (1 + Σ_{s≠q} p_s c_{k,s})`.
pub fn snir(c: SubcarrierGains<'_>, powers: &[f64], k: usize, q: usize) -> f64 {
    let gains = c.user(k);
    let interference: f64 = gains
        .iter()
        .zip(powers)
        .enumerate()
        .filter(|&(s, _)| s != q)
        .map(|(_, (g, p))| g * p)
        .sum();
    powers[q] * gains[q] / (1.0 + interference)
}

#[inline]
pub fn rate(snir: f64) -> f64 {
    snir.ln_1p() / std::f64::consts::LN_2
}

/// Checks that no user appears twice and that off beams carry no power.
pub fn check_row(users: &[Option<usize>], powers: &[f64]) -> Result<()> {
    if users.len() != powers.len() {
        return Err(Error::contract("user and power rows differ in length"));
    }
    for (q, u) in users.iter().enumerate() {
        match u {
            Some(k) if users[..q].contains(&Some(*k)) => {
                return Err(Error::contract(format!("user {k} scheduled twice on one subcarrier")));
            }
            None if powers[q] != 0.0 => {
                return Err(Error::contract(format!("beam {q} is off but carries power")));
            }
            _ => {}
        }
        if !(powers[q].is_finite() && powers[q] >= 0.0) {
            return Err(Error::contract(format!("beam {q} has invalid power {}", powers[q])));
        }
    }
    Ok(())
}

/// Per-subcarrier Lagrangian term
/// `Σ_{active q} μ_{u_q} log2(1 + γ_{u_q,q}) - λ p_q`.
pub fn weighted_metric(
    c: SubcarrierGains<'_>,
    users: &[Option<usize>],
    powers: &[f64],
    mu: &[f64],
    lambda: f64,
) -> Result<f64> {
    check_row(users, powers)?;
    Ok(metric_unchecked(c, users, powers, mu, lambda))
}

pub(crate) fn metric_unchecked(
    c: SubcarrierGains<'_>,
    users: &[Option<usize>],
    powers: &[f64],
    mu: &[f64],
    lambda: f64,
) -> f64 {
    users
        .iter()
        .enumerate()
        .filter_map(|(q, u)| u.map(|k| (q, k)))
        .map(|(q, k)| mu[k] * rate(snir(c, powers, k, q)) - lambda * powers[q])
        .sum()
}

/// Power `v` on every active beam, zero elsewhere.
pub fn uniform_powers(users: &[Option<usize>], v: f64) -> Vec<f64> {
    users.iter().map(|u| if u.is_some() { v } else { 0.0 }).collect()
}
