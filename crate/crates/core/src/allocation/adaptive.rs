use super::disposition::{Disposition, DispositionTable};
use super::metric::rate;
use super::power::InterferencePower;
use crate::channel::SubcarrierGains;

/// Outcome of a beam/user selection on one subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamDecision {
    /// User per beam, `None` when the beam is off.
    pub users: Vec<Option<usize>>,
    /// Weighted rate `Σ μ_k r_k` under the interference model of the selector.
    pub metric: f64,
    /// `(size, index)` of the winning disposition, `None` when every beam is off.
    pub disposition: Option<(usize, usize)>,
    /// Rate-element evaluations performed.
    pub evaluations: u64,
}

impl BeamDecision {
    pub(crate) fn off(beams: usize, evaluations: u64) -> Self {
        Self {
            users: vec![None; beams],
            metric: 0.0,
            disposition: None,
            evaluations,
        }
    }
}

/// SNIR of user `k` on beam `q` when every beam of `d` carries power `v`.
pub fn disposition_snir(c: SubcarrierGains<'_>, d: &Disposition, v: f64, k: usize, q: usize) -> f64 {
    let gains = c.user(k);
    let interference: f64 = d.beams().iter().filter(|&&s| s != q).map(|&s| v * gains[s]).sum();
    v * gains[q] / (1.0 + interference)
}

/// Adaptive number of beams: for every disposition of every size, greedily
/// assigns each beam to the unallocated user with the largest weighted rate,
/// then keeps the disposition with the largest total.
///
/// Ties go to the lower user index, then to the earlier disposition. A beam
/// whose best weighted rate is zero stays off.
pub fn allocate_alg1(
    c: SubcarrierGains<'_>,
    mu: &[f64],
    v: InterferencePower,
    table: &DispositionTable,
) -> BeamDecision {
    debug_assert_eq!(table.beams(), c.beams());
    debug_assert_eq!(mu.len(), c.users());
    let v = v.watts();
    let t = c.beams();
    let mut best = BeamDecision::off(t, 0);
    let mut evaluations = 0u64;
    let mut users = vec![None; t];
    let mut taken = vec![false; c.users()];
    let mut load = vec![0.0; c.users()];
    for d in table.iter() {
        users.fill(None);
        taken.fill(false);
        // Σ_{s∈d} c_{k,s}, so the interference on beam q is V (load - c_{k,q})
        for (k, l) in load.iter_mut().enumerate() {
            let gains = c.user(k);
            *l = d.beams().iter().map(|&s| gains[s]).sum();
        }
        let mut metric = 0.0;
        for &q in d.beams() {
            let mut pick = None;
            let mut value = 0.0;
            for k in (0..c.users()).filter(|&k| !taken[k]) {
                evaluations += 1;
                let own = c.get(k, q);
                let snir = v * own / (1.0 + v * (load[k] - own));
                let candidate = mu[k] * rate(snir);
                if candidate > value {
                    value = candidate;
                    pick = Some(k);
                }
            }
            if let Some(k) = pick {
                users[q] = Some(k);
                taken[k] = true;
                metric += value;
            }
        }
        if metric > best.metric {
            best.metric = metric;
            best.users.clone_from(&users);
            best.disposition = Some((d.size(), d.index()));
        }
    }
    best.evaluations = evaluations;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> InterferencePower {
        InterferencePower::new(x).unwrap()
    }

    #[test]
    fn single_user_prefers_one_beam_under_interference() {
        // strong cross-gain makes two beams worse than the best single beam
        let c = [4.0, 3.0];
        let g = SubcarrierGains::new(1, 2, &c);
        let table = DispositionTable::new(2);
        let out = allocate_alg1(g, &[1.0], v(1.0), &table);
        let single0 = (1.0f64 + 4.0).log2();
        let single1 = (1.0f64 + 3.0).log2();
        // with K=1 only one beam of a pair can be served
        let pair_first = (1.0f64 + 4.0 / 4.0).log2();
        assert!(single0 > single1 && single0 > pair_first);
        assert_eq!(out.users, vec![Some(0), None]);
        assert_eq!(out.disposition, Some((1, 0)));
        assert!((out.metric - single0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_leave_everything_off() {
        let c = [1.0, 2.0, 3.0, 4.0];
        let g = SubcarrierGains::new(2, 2, &c);
        let out = allocate_alg1(g, &[0.0, 0.0], v(1.0), &DispositionTable::new(2));
        assert_eq!(out.users, vec![None, None]);
        assert_eq!(out.metric, 0.0);
        assert_eq!(out.disposition, None);
    }

    #[test]
    fn evaluation_count_matches_enumeration() {
        // k ∉ U shrinks the scan by one per assigned beam
        let k = 6;
        let t = 3;
        let c: Vec<f64> = (0..k * t).map(|i| 1.0 + i as f64 * 0.1).collect();
        let g = SubcarrierGains::new(k, t, &c);
        let out = allocate_alg1(g, &vec![1.0; k], v(0.5), &DispositionTable::new(t));
        let expected: u64 = (1..=t)
            .map(|size| {
                let per = (0..size).map(|i| (k - i) as u64).sum::<u64>();
                per * super::super::disposition::binomial(t, size) as u64
            })
            .sum();
        assert_eq!(out.evaluations, expected);
        assert!(out.evaluations <= (k * t * (1 << (t - 1))) as u64);
    }

    #[test]
    fn greedy_excludes_assigned_users() {
        let c = [5.0, 5.0, 1.0, 1.0];
        let g = SubcarrierGains::new(2, 2, &c);
        let out = allocate_alg1(g, &[1.0, 1.0], v(0.01), &DispositionTable::new(2));
        assert_eq!(out.users, vec![Some(0), Some(1)]);
    }
}
