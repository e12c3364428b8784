//! Fairness indices, running averages and operation counters.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jain's index `(Σx)² / (n Σx²)`.
pub fn jain_index(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Undefined("Jain index of an empty vector"));
    }
    let sum: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(Error::Undefined("Jain index of an all-zero vector"));
    }
    Ok(sum * sum / (x.len() as f64 * sq))
}

/// Jain's index of the ratios `x_i / req_i`.
pub fn modified_jain(x: &[f64], req: &[f64]) -> Result<f64> {
    if x.len() != req.len() {
        return Err(Error::contract("allocation and requirement vectors differ in length"));
    }
    if req.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::contract("requirements must be positive"));
    }
    let ratios: Vec<f64> = x.iter().zip(req).map(|(a, r)| a / r).collect();
    jain_index(&ratios)
}

pub fn mean(x: &[f64]) -> Option<f64> {
    (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64)
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Undefined("variance needs at least two samples"));
    }
    let m = mean(x).unwrap_or_default();
    Ok(x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64)
}

pub fn coefficient_of_variation(x: &[f64]) -> Result<f64> {
    let m = mean(x).ok_or(Error::Undefined("coefficient of variation of an empty vector"))?;
    if m == 0.0 {
        return Err(Error::Undefined("coefficient of variation with zero mean"));
    }
    Ok(variance(x)?.sqrt() / m)
}

pub fn min_max_ratio(x: &[f64]) -> Result<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() || max == 0.0 {
        return Err(Error::Undefined("min-max ratio with zero maximum"));
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min / max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassicIndices {
    pub variance: f64,
    pub coefficient_of_variation: f64,
    pub min_max_ratio: f64,
}

pub fn classic_indices(x: &[f64]) -> Result<ClassicIndices> {
    Ok(ClassicIndices {
        variance: variance(x)?,
        coefficient_of_variation: coefficient_of_variation(x)?,
        min_max_ratio: min_max_ratio(x)?,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(x: &[f64]) -> Option<(f64, f64)> {
    let m = mean(x)?;
    let se = variance(x).map(|v| (v / x.len() as f64).sqrt()).unwrap_or(0.0);
    Some((m, se))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackScheme {
    /// Every gain of every beam.
    AdaptiveTprime,
    /// Disposition, beam and SNIR per subcarrier.
    FixedTbar,
    /// Beam and SNIR per subcarrier.
    ClassicOb,
}

impl FeedbackScheme {
    /// Scheme for a fixed number `tbar` of active beams out of `t`.
    pub fn fixed(tbar: usize, t: usize) -> Self {
        if tbar == t {
            Self::ClassicOb
        } else {
            Self::FixedTbar
        }
    }
}

/// Parameters each user feeds back per slot.
pub fn feedback_count(scheme: FeedbackScheme, subcarriers: usize, beams: usize) -> usize {
    match scheme {
        FeedbackScheme::AdaptiveTprime => beams * subcarriers,
        FeedbackScheme::FixedTbar => 3 * subcarriers,
        FeedbackScheme::ClassicOb => 2 * subcarriers,
    }
}

/// Operation counts per stage of the slot loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    /// Gain values pooled from the channel.
    pub pooling: u64,
    /// SNIR evaluations done on the user side.
    pub snir_evaluations: u64,
    /// Rate-element evaluations done by the scheduler.
    pub rate_evaluations: u64,
    /// Per-beam power computations.
    pub power: u64,
    /// Dual updates.
    pub update: u64,
    /// Parameters fed back, summed over users.
    pub feedback: u64,
}

impl CostLedger {
    pub fn total(&self) -> u64 {
        self.pooling + self.snir_evaluations + self.rate_evaluations + self.power + self.update
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.pooling += rhs.pooling;
        self.snir_evaluations += rhs.snir_evaluations;
        self.rate_evaluations += rhs.rate_evaluations;
        self.power += rhs.power;
        self.update += rhs.update;
        self.feedback += rhs.feedback;
    }
}

/// Per-slot history of power and rates with cumulative and window means.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningStats {
    users: usize,
    power: Vec<f64>,
    // slot-major, `users` entries per slot
    rates: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StatsSummary {
    pub slots: usize,
    pub mean_power: Option<f64>,
    pub mean_rates: Vec<f64>,
    pub mean_sum_rate: Option<f64>,
    /// Share of the sum rate each user received.
    pub rate_fractions: Vec<f64>,
}

impl RunningStats {
    pub fn new(users: usize) -> Self {
        Self {
            users,
            ..Self::default()
        }
    }

    pub fn record(&mut self, power: f64, rates: &[f64]) {
        assert_eq!(rates.len(), self.users, "rate vector has wrong length");
        self.power.push(power);
        self.rates.extend_from_slice(rates);
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn power_history(&self) -> &[f64] {
        &self.power
    }

    pub fn rates_at(&self, n: usize) -> &[f64] {
        &self.rates[n * self.users..(n + 1) * self.users]
    }

    pub fn sum_rate_history(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.rates_at(n).iter().sum()).collect()
    }

    /// Means over every recorded slot.
    pub fn summary(&self) -> StatsSummary {
        self.window(self.len())
    }

    /// Means over the last `last` slots (all of them if fewer were recorded).
    pub fn window(&self, last: usize) -> StatsSummary {
        let n = self.len();
        let start = n - last.min(n);
        let slots = n - start;
        if slots == 0 {
            return StatsSummary::default();
        }
        let mut mean_rates = vec![0.0; self.users];
        for i in start..n {
            for (acc, r) in mean_rates.iter_mut().zip(self.rates_at(i)) {
                *acc += r;
            }
        }
        mean_rates.iter_mut().for_each(|r| *r /= slots as f64);
        let sum: f64 = mean_rates.iter().sum();
        let rate_fractions = if sum > 0.0 {
            mean_rates.iter().map(|r| r / sum).collect()
        } else {
            vec![0.0; self.users]
        };
        StatsSummary {
            slots,
            mean_power: mean(&self.power[start..]),
            mean_rates,
            mean_sum_rate: Some(sum),
            rate_fractions,
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[2.5; 4]).unwrap(), 1.0);
        assert_eq!(jain_index(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!((jain_index(&[1.0, 2.0, 3.0]).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert!(jain_index(&[0.0, 0.0]).is_err());
        assert!(jain_index(&[]).is_err());
    }

    #[test]
    fn modified_jain_examples() {
        let req = [1.0, 3.0, 0.5];
        assert!((modified_jain(&req, &req).unwrap() - 1.0).abs() < 1e-15);
        let doubled: Vec<f64> = req.iter().map(|r| 2.0 * r).collect();
        assert!((modified_jain(&doubled, &req).unwrap() - 1.0).abs() < 1e-15);
        assert!((modified_jain(&[1.0, 1.0], &[1.0, 2.0]).unwrap() - 0.9).abs() < 1e-15);
        assert!(modified_jain(&[1.0, 1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn classic_examples() {
        let constant = classic_indices(&[4.0; 5]).unwrap();
        assert_eq!(constant.variance, 0.0);
        assert_eq!(constant.coefficient_of_variation, 0.0);
        assert_eq!(constant.min_max_ratio, 1.0);
        let pair = classic_indices(&[0.0, 2.0]).unwrap();
        assert!((pair.variance - 2.0).abs() < 1e-15);
        assert!((pair.coefficient_of_variation - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(pair.min_max_ratio, 0.0);
        assert!((variance(&[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(variance(&[1.0]).is_err());
        assert!(coefficient_of_variation(&[-1.0, 1.0]).is_err());
        assert!(min_max_ratio(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn feedback_examples() {
        assert_eq!(feedback_count(FeedbackScheme::AdaptiveTprime, 72, 4), 288);
        assert_eq!(feedback_count(FeedbackScheme::FixedTbar, 72, 4), 216);
        assert_eq!(feedback_count(FeedbackScheme::ClassicOb, 72, 4), 144);
        assert_eq!(FeedbackScheme::fixed(4, 4), FeedbackScheme::ClassicOb);
        assert_eq!(FeedbackScheme::fixed(2, 4), FeedbackScheme::FixedTbar);
    }

    #[test]
    fn running_means() {
        let empty = RunningStats::new(2);
        assert_eq!(empty.summary(), StatsSummary::default());

        let mut s = RunningStats::new(1);
        for _ in 0..10 {
            s.record(0.7, &[3.0]);
        }
        assert!((s.summary().mean_power.unwrap() - 0.7).abs() < 1e-15);

        let n = 101;
        let mut s = RunningStats::new(2);
        for i in 1..=n {
            s.record(i as f64, &[i as f64, 0.0]);
        }
        let summary = s.summary();
        assert!((summary.mean_power.unwrap() - (n + 1) as f64 / 2.0).abs() < 1e-12);
        assert_eq!(summary.rate_fractions, vec![1.0, 0.0]);
        let tail = s.window(10);
        assert_eq!(tail.slots, 10);
        assert!((tail.mean_power.unwrap() - 96.5).abs() < 1e-12);
    }

    #[test]
    fn ledger_adds_fieldwise() {
        let mut a = CostLedger {
            pooling: 1,
            rate_evaluations: 5,
            ..Default::default()
        };
        a += CostLedger {
            pooling: 2,
            update: 1,
            ..Default::default()
        };
        assert_eq!(a.pooling, 3);
        assert_eq!(a.total(), 9);
    }

    proptest! {
        #[test]
        fn jain_bounds_and_scale_invariance(
            x in prop::collection::vec(0.0f64..100.0, 1..20),
            a in 0.001f64..1000.0,
        ) {
            prop_assume!(x.iter().any(|&v| v > 0.0));
            let j = jain_index(&x).unwrap();
            prop_assert!(j > 0.0 && j <= 1.0 + 1e-15);
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            prop_assert!((jain_index(&scaled).unwrap() - j).abs() < 1e-12);
        }

        #[test]
        fn exact_balancing_gives_unit_modified_jain(
            raw in prop::collection::vec(0.01f64..1.0, 2..10),
            total in 0.1f64..1000.0,
        ) {
            let s: f64 = raw.iter().sum();
            let phi: Vec<f64> = raw.iter().map(|r| r / s).collect();
            let req: Vec<f64> = phi.iter().map(|p| p * total).collect();
            let rates = req.clone();
            prop_assert!((modified_jain(&rates, &req).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
