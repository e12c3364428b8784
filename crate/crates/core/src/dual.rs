//! Dual variables, filtered subgradients and step-size schedules.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::allocation::{rate, snir, Allocation};
use crate::channel::GainTable;
use crate::error::{Error, Result};

/// Target fraction of the sum rate for each user.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTargets(Vec<f64>);

impl RateTargets {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::config("rate targets must not be empty"));
        }
        if phi.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::config("rate targets must be positive"));
        }
        let sum: f64 = phi.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("rate targets must sum to 1, got {sum}")));
        }
        Ok(Self(phi))
    }

    pub fn uniform(users: usize) -> Self {
        Self(vec![1.0 / users as f64; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    Diminishing,
    Constant,
}

/// `β_n = β₀/(1+n)^b`, `α_n = α₀/(1+n)^a` in diminishing mode; `(β₀, α₀)` in
/// constant mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub mode: StepMode,
    pub beta0: f64,
    pub alpha0: f64,
    pub beta_exp: f64,
    pub alpha_exp: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            mode: StepMode::Diminishing,
            beta0: 0.1,
            alpha0: 0.5,
            beta_exp: 0.9,
            alpha_exp: 0.6,
        }
    }
}

impl StepSchedule {
    /// In diminishing mode the exponents must give `Σβ = ∞`,
    /// `Σ(β² + α²) < ∞` and `β/α → 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::config("beta0 must be positive"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::config("alpha0 must lie in (0, 1]"));
        }
        if self.mode == StepMode::Constant {
            return Ok(());
        }
        let (b, a) = (self.beta_exp, self.alpha_exp);
        if b > 1.0 {
            return Err(Error::config(format!("beta exponent {b} > 1 makes the steps summable")));
        }
        if b <= 0.5 {
            return Err(Error::config(format!("beta exponent {b} <= 0.5 makes the squared steps diverge")));
        }
        if a <= 0.5 {
            return Err(Error::config(format!("alpha exponent {a} <= 0.5 makes the squared weights diverge")));
        }
        if b <= a {
            return Err(Error::config(format!("beta exponent {b} must exceed alpha exponent {a}")));
        }
        Ok(())
    }

    pub fn step_size(&self, n: u64) -> (f64, f64) {
        match self.mode {
            StepMode::Constant => (self.beta0, self.alpha0),
            StepMode::Diminishing => {
                let base = 1.0 + n as f64;
                (self.beta0 / base.powf(self.beta_exp), self.alpha0 / base.powf(self.alpha_exp))
            }
        }
    }
}

/// Power price, rate weights and their filtered subgradients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualState {
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub g_lambda: f64,
    pub g_mu: Vec<f64>,
    /// Updates applied so far.
    pub n: u64,
    /// Times every weight was clipped to zero and `μ` had to be reset.
    pub resets: u64,
}

impl DualState {
    /// Equal weights scaled so that `μᵀφ = 1`.
    pub fn new(lambda: f64, targets: &RateTargets) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("initial power price must be positive, got {lambda}")));
        }
        let k = targets.len();
        let scale = 1.0 / targets.as_slice().iter().sum::<f64>();
        Ok(Self {
            lambda,
            mu: vec![scale; k],
            g_lambda: 0.0,
            g_mu: vec![0.0; k],
            n: 0,
            resets: 0,
        })
    }

    /// Exponential filter of the power and rate residuals with weight `alpha`.
    pub fn filter_subgradients(&mut self, p_inst: f64, rates: &[f64], targets: &RateTargets, p_bar: f64, alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::contract(format!("forgetting factor must lie in (0, 1], got {alpha}")));
        }
        if rates.len() != self.mu.len() || targets.len() != self.mu.len() {
            return Err(Error::contract("rate vector length differs from user count"));
        }
        self.g_lambda = alpha * (p_bar - p_inst) + (1.0 - alpha) * self.g_lambda;
        let total: f64 = rates.iter().sum();
        for ((g, &r), &phi) in self.g_mu.iter_mut().zip(rates).zip(targets.as_slice()) {
            *g = alpha * (r - phi * total) + (1.0 - alpha) * *g;
        }
        Ok(())
    }

    /// `λ ← max(ε, λ - ρ g_λ)`.
    pub fn update_lambda(&mut self, rho: f64, eps: f64) -> Result<()> {
        if !(rho > 0.0) || !(eps > 0.0) {
            return Err(Error::contract("step and floor must be positive"));
        }
        self.lambda = (self.lambda - rho * self.g_lambda).max(eps);
        Ok(())
    }

    /// Projected step `μ̂ = max(0, μ - ρ g_μ)` followed by `μ = μ̂/(φᵀμ̂)`.
    /// When every weight is clipped, `μ` restarts from equal weights and the
    /// reset counter is bumped.
    pub fn update_mu(&mut self, targets: &RateTargets, rho: f64) -> Result<()> {
        if !(rho > 0.0) {
            return Err(Error::contract("step must be positive"));
        }
        for (m, &g) in self.mu.iter_mut().zip(&self.g_mu) {
            *m = (*m - rho * g).max(0.0);
        }
        let norm: f64 = self.mu.iter().zip(targets.as_slice()).map(|(m, p)| m * p).sum();
        if norm > 0.0 && norm.is_finite() {
            self.mu.iter_mut().for_each(|m| *m /= norm);
        } else {
            let scale = 1.0 / targets.as_slice().iter().sum::<f64>();
            self.mu.fill(scale);
            self.resets += 1;
        }
        Ok(())
    }

    pub fn update(&mut self, targets: &RateTargets, rho_lambda: f64, rho_mu: f64, eps: f64) -> Result<()> {
        self.update_lambda(rho_lambda, eps)?;
        self.update_mu(targets, rho_mu)?;
        self.n += 1;
        Ok(())
    }

    /// Upper bound `max_k μ_k / (λ ln 2)` on any water-filled power.
    pub fn power_bound(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max) / (self.lambda * LN_2)
    }
}

/// Total allocated power and per-user rates (bits per slot) with SNIR taken
/// from the allocated powers.
pub fn instantaneous_metrics(alloc: &Allocation, gains: &GainTable) -> (f64, Vec<f64>) {
    let mut rates = vec![0.0; gains.dims().users];
    for m in 0..alloc.subcarriers() {
        let c = gains.subcarrier(m);
        let powers = alloc.row_powers(m);
        for (q, u) in alloc.row_users(m).iter().enumerate() {
            if let Some(k) = *u {
                rates[k] += rate(snir(c, powers, k, q));
            }
        }
    }
    (alloc.total_power(), rates)
}
