//! The per-slot loop, sweeps and rate regions.

use std::f64::consts::LN_2;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{
    allocate_alg1, allocate_alg2, allocate_exhaustive, uniform_powers, user_select, waterfill, Allocation,
    DispositionTable, PowerMode,
};
use crate::channel::{equivalent_gains, BeamSet, FaderState, GainTable, SubcarrierGains};
use crate::config::{ResolvedConfig, Scheme, SimConfig};
use crate::dual::{instantaneous_metrics, DualState};
use crate::error::{Error, Result};
use crate::metrics::{feedback_count, jain_index, modified_jain, CostLedger, FeedbackScheme, RunningStats, StatsSummary};

/// Stream of the beam generator; the fading generator uses stream 0.
const BEAM_STREAM: u64 = 1;

/// One logged slot. Dual values are the ones used for the slot's allocation,
/// before the update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub p_inst: f64,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub t_active_mean: f64,
    /// Subcarriers with 0, 1, ..., t active beams.
    pub active_histogram: Vec<u32>,
    pub max_beam_power: f64,
    /// `max_k μ_k / (λ ln 2)`.
    pub power_bound: f64,
    /// `(B / ln 2) Σ_{m,q} c_{k,m,q}` per user.
    pub rate_bounds: Vec<f64>,
}

impl TraceRow {
    pub fn power_bound_holds(&self) -> bool {
        self.max_beam_power <= self.power_bound * (1.0 + 1e-12) + 1e-12
    }

    pub fn rate_bounds_hold(&self) -> bool {
        self.rates
            .iter()
            .zip(&self.rate_bounds)
            .all(|(r, b)| *r <= b * (1.0 + 1e-12) + 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceLog {
    pub rows: Vec<TraceRow>,
    pub initial: DualState,
    pub final_state: DualState,
    pub ledger: CostLedger,
    pub stats: RunningStats,
    /// Per-subcarrier power optimizations that hit the iteration cap.
    pub power_not_converged: u64,
}

impl TraceLog {
    pub fn users(&self) -> usize {
        self.initial.mu.len()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let k = self.users();
        let mut h = vec!["n".to_string(), "lambda".to_string()];
        h.extend((1..=k).map(|i| format!("mu_{i}")));
        h.push("P_inst".into());
        h.extend((1..=k).map(|i| format!("R_{i}")));
        h.push("sum_rate".into());
        h.push("t_active_mean".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for r in &self.rows {
            let mut rec = vec![r.n.to_string(), r.lambda.to_string()];
            rec.extend(r.mu.iter().map(f64::to_string));
            rec.push(r.p_inst.to_string());
            rec.extend(r.rates.iter().map(f64::to_string));
            rec.push(r.sum_rate.to_string());
            rec.push(r.t_active_mean.to_string());
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualSnapshot {
    pub lambda: f64,
    pub mu: Vec<f64>,
}

impl From<&DualState> for DualSnapshot {
    fn from(s: &DualState) -> Self {
        Self {
            lambda: s.lambda,
            mu: s.mu.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub noise_var: f64,
    pub tbar: usize,
    pub feedback_per_user: usize,
    pub adapts_lambda: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundViolations {
    pub power: u64,
    pub rate: u64,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub config: SimConfig,
    pub derived: Derived,
    pub slots: u64,
    pub cumulative: StatsSummary,
    pub last_half: StatsSummary,
    /// Jain's index of the cumulative per-user rates.
    pub jain: Option<f64>,
    /// Jain's index of the cumulative rates relative to `φ_k Γ`.
    pub modified_jain: Option<f64>,
    pub initial_dual: DualSnapshot,
    pub final_dual: DualSnapshot,
    pub ledger: CostLedger,
    pub ledger_per_slot: Option<CostLedgerMean>,
    pub active_beam_histogram: Vec<u64>,
    pub mu_resets: u64,
    pub power_not_converged: u64,
    pub bound_violations: BoundViolations,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostLedgerMean {
    pub pooling: f64,
    pub snir_evaluations: f64,
    pub rate_evaluations: f64,
    pub power: f64,
    pub update: f64,
    pub feedback: f64,
}

impl CostLedgerMean {
    fn new(l: &CostLedger, slots: u64) -> Option<Self> {
        let n = slots as f64;
        (slots > 0).then(|| Self {
            pooling: l.pooling as f64 / n,
            snir_evaluations: l.snir_evaluations as f64 / n,
            rate_evaluations: l.rate_evaluations as f64 / n,
            power: l.power as f64 / n,
            update: l.update as f64 / n,
            feedback: l.feedback as f64 / n,
        })
    }
}

impl Summary {
    pub fn new(resolved: &ResolvedConfig, log: &TraceLog) -> Self {
        let slots = log.rows.len() as u64;
        let cumulative = log.stats.summary();
        let last_half = log.stats.window(log.rows.len() / 2);
        let jain = jain_index(&cumulative.mean_rates).ok();
        let modified_jain = cumulative.mean_sum_rate.and_then(|total| {
            let req: Vec<f64> = resolved.targets.as_slice().iter().map(|p| p * total).collect();
            modified_jain(&cumulative.mean_rates, &req).ok()
        });
        let t = resolved.dims.antennas;
        let mut hist = vec![0u64; t + 1];
        for r in &log.rows {
            for (h, &c) in hist.iter_mut().zip(&r.active_histogram) {
                *h += c as u64;
            }
        }
        Self {
            config: resolved.config.clone(),
            derived: Derived {
                noise_var: resolved.noise_var,
                tbar: resolved.tbar,
                feedback_per_user: feedback_count(feedback_scheme(resolved), resolved.dims.subcarriers, t),
                adapts_lambda: adapts_lambda(resolved),
            },
            slots,
            cumulative,
            last_half,
            jain,
            modified_jain,
            initial_dual: (&log.initial).into(),
            final_dual: (&log.final_state).into(),
            ledger: log.ledger,
            ledger_per_slot: CostLedgerMean::new(&log.ledger, slots),
            active_beam_histogram: hist,
            mu_resets: log.final_state.resets,
            power_not_converged: log.power_not_converged,
            bound_violations: BoundViolations {
                power: log.rows.iter().filter(|r| !r.power_bound_holds()).count() as u64,
                rate: log.rows.iter().filter(|r| !r.rate_bounds_hold()).count() as u64,
            },
            elapsed_seconds: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn feedback_scheme(resolved: &ResolvedConfig) -> FeedbackScheme {
    match resolved.config.scheduler.scheme {
        Scheme::Alg1Waterfill | Scheme::Alg1Uniform | Scheme::ExhaustiveOracle => FeedbackScheme::AdaptiveTprime,
        Scheme::FixedTbar | Scheme::ClassicOb => FeedbackScheme::fixed(resolved.tbar, resolved.dims.antennas),
    }
}

/// Whether the power price follows the power residual. Schemes with fixed
/// per-beam power keep it at `ε`.
pub fn adapts_lambda(resolved: &ResolvedConfig) -> bool {
    match resolved.config.scheduler.scheme {
        Scheme::Alg1Waterfill => true,
        Scheme::ExhaustiveOracle => resolved.config.scheduler.oracle_power == PowerMode::Optimal,
        _ => false,
    }
}

struct Scheduler<'a> {
    resolved: &'a ResolvedConfig,
    table: DispositionTable,
}

struct RowOutcome {
    users: Vec<Option<usize>>,
    powers: Vec<f64>,
    cost: CostLedger,
    converged: bool,
}

impl Scheduler<'_> {
    fn subcarrier(&self, c: SubcarrierGains<'_>, state: &DualState) -> Result<RowOutcome> {
        let r = self.resolved;
        let (k, t) = (c.users(), c.beams());
        let v = r.v;
        let mu = &state.mu;
        let mut cost = CostLedger {
            power: t as u64,
            ..CostLedger::default()
        };
        let mut converged = true;
        let (users, powers) = match r.config.scheduler.scheme {
            Scheme::Alg1Waterfill | Scheme::Alg1Uniform => {
                let d = allocate_alg1(c, mu, v, &self.table);
                cost.rate_evaluations = d.evaluations;
                let p = if r.config.scheduler.scheme == Scheme::Alg1Waterfill {
                    waterfill(c, &d.users, mu, state.lambda, v)?
                } else {
                    uniform_powers(&d.users, v.watts())
                };
                (d.users, p)
            }
            Scheme::FixedTbar | Scheme::ClassicOb => {
                let reports: Vec<_> = (0..k)
                    .map(|i| {
                        let (rep, evals) = user_select(c, i, r.tbar, v, &self.table);
                        cost.snir_evaluations += evals;
                        rep
                    })
                    .collect();
                let d = allocate_alg2(&reports, mu, r.tbar, &self.table);
                cost.rate_evaluations = d.evaluations;
                let p = uniform_powers(&d.users, v.watts());
                (d.users, p)
            }
            Scheme::ExhaustiveOracle => {
                let out = allocate_exhaustive(c, mu, state.lambda, v, r.config.scheduler.oracle_power, r.power)?;
                cost.rate_evaluations = out.candidates * t as u64;
                converged = out.converged;
                (out.users, out.powers)
            }
        };
        Ok(RowOutcome {
            users,
            powers,
            cost,
            converged,
        })
    }
}

/// Runs the adaptive loop for `config.run.slots` slots.
pub fn run(config: &SimConfig) -> Result<(ResolvedConfig, TraceLog)> {
    let resolved = config.resolve()?;
    let log = run_resolved(&resolved)?;
    Ok((resolved, log))
}

pub fn run_resolved(r: &ResolvedConfig) -> Result<TraceLog> {
    let dims = r.dims;
    let (k, m_count, t) = (dims.users, dims.subcarriers, dims.antennas);
    let cfg = &r.config;
    let seed = cfg.run.seed;
    let mut fader = FaderState::with_oscillators(
        &r.profile,
        dims,
        cfg.system.subcarrier_spacing,
        cfg.channel.oscillators,
        seed,
    )?;
    let mut beam_rng = ChaCha8Rng::seed_from_u64(seed);
    beam_rng.set_stream(BEAM_STREAM);

    let lambda_adapts = adapts_lambda(r);
    let mut state = DualState::new(if lambda_adapts { r.lambda0 } else { cfg.dual.epsilon }, &r.targets)?;
    let initial = state.clone();
    let scheduler = Scheduler {
        resolved: r,
        table: DispositionTable::new(t),
    };
    let feedback = (k * feedback_count(feedback_scheme(r), m_count, t)) as u64;

    let mut rows = Vec::with_capacity(cfg.run.slots as usize);
    let mut stats = RunningStats::new(k);
    let mut ledger = CostLedger::default();
    let mut power_not_converged = 0;
    let mut beams: Option<BeamSet> = None;
    for n in 0..cfg.run.slots {
        let h = fader.step(cfg.channel.slot_duration);
        if beams.is_none() || n % cfg.channel.frame_len == 0 {
            beams = Some(BeamSet::generate(t, m_count, cfg.channel.beam_mode, &mut beam_rng));
        }
        let gains = equivalent_gains(&h, beams.as_ref().expect("beams drawn"), r.noise_var)?;

        let mut alloc = Allocation::empty(m_count, t);
        let mut slot_cost = CostLedger {
            pooling: feedback,
            feedback,
            update: 1 + k as u64,
            ..CostLedger::default()
        };
        for m in 0..m_count {
            let out = scheduler.subcarrier(gains.subcarrier(m), &state)?;
            alloc.set_row(m, &out.users, &out.powers)?;
            slot_cost += out.cost;
            power_not_converged += u64::from(!out.converged);
        }
        ledger += slot_cost;

        let (p_inst, rates) = instantaneous_metrics(&alloc, &gains);
        rows.push(trace_row(n, &state, &alloc, &gains, p_inst, &rates));
        stats.record(p_inst, &rates);

        let (beta, alpha) = r.schedule.step_size(n);
        state.filter_subgradients(p_inst, &rates, &r.targets, cfg.system.total_power, alpha)?;
        if lambda_adapts {
            state.update_lambda(r.rho_lambda * beta, cfg.dual.epsilon)?;
        }
        state.update_mu(&r.targets, r.rho_mu * beta)?;
        state.n += 1;
    }

    Ok(TraceLog {
        rows,
        initial,
        final_state: state,
        ledger,
        stats,
        power_not_converged,
    })
}

fn trace_row(n: u64, state: &DualState, alloc: &Allocation, gains: &GainTable, p_inst: f64, rates: &[f64]) -> TraceRow {
    let t = alloc.beams();
    let mut hist = vec![0u32; t + 1];
    let mut active = 0usize;
    for m in 0..alloc.subcarriers() {
        let a = alloc.active_beams(m);
        hist[a] += 1;
        active += a;
    }
    let bound = state.power_bound();
    let rate_bounds = (0..rates.len())
        .map(|k| bound / LN_2 * gains.user_total(k))
        .collect();
    TraceRow {
        n,
        lambda: state.lambda,
        mu: state.mu.clone(),
        p_inst,
        rates: rates.to_vec(),
        sum_rate: rates.iter().sum(),
        t_active_mean: active as f64 / alloc.subcarriers() as f64,
        active_histogram: hist,
        max_beam_power: alloc.max_power(),
        power_bound: bound,
        rate_bounds,
    }
}

/// Writes `trace.csv` and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, log: &TraceLog, summary: &Summary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace = dir.join("trace.csv");
    let file = std::fs::File::create(&trace).map_err(|e| Error::io(&trace, e))?;
    log.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(&trace, e))?;
    let path = dir.join("summary.json");
    std::fs::write(&path, summary.to_json() + "\n").map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    K,
    T,
    Tbar,
    Snr,
}

impl Axis {
    pub fn key(self) -> &'static str {
        match self {
            Axis::K => "system.K",
            Axis::T => "system.t",
            Axis::Tbar => "scheduler.tbar",
            Axis::Snr => "system.snr_db",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" => Ok(Axis::K),
            "t" => Ok(Axis::T),
            "tbar" => Ok(Axis::Tbar),
            "SNR" | "snr" | "snr_db" => Ok(Axis::Snr),
            _ => Err(Error::config(format!("unknown sweep axis `{s}` (expected K, t, tbar or SNR)"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::K => "K",
            Axis::T => "t",
            Axis::Tbar => "tbar",
            Axis::Snr => "SNR",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub summary: Summary,
}

/// Runs one simulation per axis value, in parallel, each with the template's
/// seed.
pub fn sweep(template: &SimConfig, axis: Axis, values: &[String]) -> Result<Vec<SweepPoint>> {
    values
        .par_iter()
        .map(|value| {
            let wrap = |source: Error| Error::Sweep {
                axis: axis.to_string(),
                value: value.clone(),
                source: Box::new(source),
            };
            let config = template
                .with_overrides(&[format!("{}={}", axis.key(), value)])
                .map_err(wrap)?;
            let (resolved, log) = run(&config).map_err(wrap)?;
            Ok(SweepPoint {
                value: value.clone(),
                summary: Summary::new(&resolved, &log),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(axis: Axis, points: &[SweepPoint], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        &axis.to_string(),
        "sum_rate",
        "mean_power",
        "jain",
        "rate_evaluations_per_slot",
        "snir_evaluations_per_slot",
        "feedback_per_user",
    ])?;
    for p in points {
        let s = &p.summary;
        let per = s.ledger_per_slot.as_ref();
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        w.write_record([
            p.value.clone(),
            opt(s.cumulative.mean_sum_rate),
            opt(s.cumulative.mean_power),
            opt(s.jain),
            opt(per.map(|l| l.rate_evaluations)),
            opt(per.map(|l| l.snir_evaluations)),
            s.derived.feedback_per_user.to_string(),
        ])?;
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub phi: [f64; 2],
    /// Mean rates over the second half of the run.
    pub rates: [f64; 2],
}

/// Two-user average rates reached for each target split.
pub fn rate_region(config: &SimConfig, phis: &[[f64; 2]]) -> Result<Vec<RatePoint>> {
    if config.system.K != 2 {
        return Err(Error::config(format!("rate region needs K=2, got K={}", config.system.K)));
    }
    phis.par_iter()
        .map(|phi| {
            let mut c = config.clone();
            c.system.phi = crate::config::AutoOr::Value(phi.to_vec());
            let (_, log) = run(&c)?;
            let tail = log.stats.window(log.rows.len() / 2);
            let rates = match tail.mean_rates[..] {
                [a, b] => [a, b],
                _ => [0.0, 0.0],
            };
            Ok(RatePoint { phi: *phi, rates })
        })
        .collect()
}
