use super::adaptive::{disposition_snir, BeamDecision};
use super::disposition::DispositionTable;
use super::metric::rate;
use super::power::InterferencePower;
use crate::channel::SubcarrierGains;

/// What one user feeds back for one subcarrier with a fixed number of beams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserReport {
    /// 0-based index among dispositions of size `t̄`.
    pub disposition: usize,
    pub beam: usize,
    pub snir: f64,
}

/// Best `(disposition, beam)` for user `k` among dispositions of `tbar`
/// beams, using only that user's gains. Ties go to the lower beam, then the
/// earlier disposition. Returns the report and the number of SNIR
/// evaluations.
pub fn user_select(
    c: SubcarrierGains<'_>,
    k: usize,
    tbar: usize,
    v: InterferencePower,
    table: &DispositionTable,
) -> (UserReport, u64) {
    let v = v.watts();
    let dispositions = table.of_size(tbar);
    let mut best: Option<UserReport> = None;
    let mut evaluations = 0;
    for q in 0..c.beams() {
        for (j, d) in dispositions.iter().enumerate().filter(|(_, d)| d.contains(q)) {
            evaluations += 1;
            let snir = disposition_snir(c, d, v, k, q);
            if !best.is_some_and(|b| snir <= b.snir) {
                best = Some(UserReport {
                    disposition: j,
                    beam: q,
                    snir,
                });
            }
        }
    }
    (best.expect("every beam belongs to some disposition"), evaluations)
}

/// Fixed number of beams: the base station only sees the reports. For each
/// disposition, every beam goes to the highest weighted-rate user among those
/// who asked for it; the disposition with the largest total wins. Users whose
/// request loses receive nothing on this subcarrier.
pub fn allocate_alg2(reports: &[UserReport], mu: &[f64], tbar: usize, table: &DispositionTable) -> BeamDecision {
    debug_assert_eq!(reports.len(), mu.len());
    let t = table.beams();
    let mut best = BeamDecision::off(t, 0);
    let mut evaluations = 0u64;
    for d in table.of_size(tbar) {
        let mut users = vec![None; t];
        let mut metric = 0.0;
        for &q in d.beams() {
            let mut value = 0.0;
            for (k, r) in reports.iter().enumerate() {
                // each user sits in exactly one competition set, so no
                // user can already hold a beam of this disposition
                if r.disposition != d.index() || r.beam != q {
                    continue;
                }
                evaluations += 1;
                let candidate = mu[k] * rate(r.snir);
                if candidate > value {
                    value = candidate;
                    users[q] = Some(k);
                }
            }
            metric += value;
        }
        if metric > best.metric {
            best.metric = metric;
            best.users = users;
            best.disposition = Some((d.size(), d.index()));
        }
    }
    best.evaluations = evaluations;
    best
}
