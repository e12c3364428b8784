//! Per-subcarrier user/beam selection and power allocation.

mod adaptive;
mod disposition;
mod exhaustive;
mod metric;
mod opportunistic;
mod power;

pub use adaptive::{allocate_alg1, disposition_snir, BeamDecision};
pub use disposition::{binomial, Disposition, DispositionTable};
pub use exhaustive::{allocate_exhaustive, check_search_space, search_space, ExhaustiveResult, PowerMode, EXHAUSTIVE_LIMIT};
pub use metric::{check_row, rate, snir, uniform_powers, weighted_metric};
pub use opportunistic::{allocate_alg2, user_select, UserReport};
pub use power::{optimal_power, waterfill, InterferencePower, PowerOptions, PowerSolution};

#[cfg(test)]
use metric::metric_unchecked;

use crate::error::{Error, Result};

/// Users and powers for every (subcarrier, beam) of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    subcarriers: usize,
    beams: usize,
    users: Vec<Option<usize>>,
    powers: Vec<f64>,
}

impl Allocation {
    pub fn empty(subcarriers: usize, beams: usize) -> Self {
        Self {
            subcarriers,
            beams,
            users: vec![None; subcarriers * beams],
            powers: vec![0.0; subcarriers * beams],
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    /// Stores one subcarrier row. Beams that end up with zero power are
    /// switched off so that a beam is on exactly when it carries power.
    pub fn set_row(&mut self, m: usize, users: &[Option<usize>], powers: &[f64]) -> Result<()> {
        if m >= self.subcarriers || users.len() != self.beams {
            return Err(Error::contract("allocation row does not fit"));
        }
        check_row(users, powers)?;
        let range = m * self.beams..(m + 1) * self.beams;
        for ((slot_u, slot_p), (&u, &p)) in self.users[range.clone()]
            .iter_mut()
            .zip(&mut self.powers[range])
            .zip(users.iter().zip(powers))
        {
            *slot_u = if p > 0.0 { u } else { None };
            *slot_p = p;
        }
        Ok(())
    }

    pub fn user(&self, m: usize, q: usize) -> Option<usize> {
        self.users[m * self.beams + q]
    }

    pub fn power(&self, m: usize, q: usize) -> f64 {
        self.powers[m * self.beams + q]
    }

    pub fn row_users(&self, m: usize) -> &[Option<usize>] {
        &self.users[m * self.beams..(m + 1) * self.beams]
    }

    pub fn row_powers(&self, m: usize) -> &[f64] {
        &self.powers[m * self.beams..(m + 1) * self.beams]
    }

    pub fn active_beams(&self, m: usize) -> usize {
        self.row_users(m).iter().flatten().count()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn max_power(&self) -> f64 {
        self.powers.iter().copied().fold(0.0, f64::max)
    }

    /// Re-checks the row invariants and the on/off coupling.
    pub fn validate(&self) -> Result<()> {
        for m in 0..self.subcarriers {
            check_row(self.row_users(m), self.row_powers(m))?;
            for q in 0..self.beams {
                if self.user(m, q).is_some() != (self.power(m, q) > 0.0) {
                    return Err(Error::contract(format!("subcarrier {m} beam {q}: user and power disagree")));
                }
            }
        }
        Ok(())
    }
}
