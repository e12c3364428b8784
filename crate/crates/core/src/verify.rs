//! Small-instance oracle and invariant checks behind `beamsched verify`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::allocation::{
    allocate_alg1, allocate_exhaustive, optimal_power, waterfill, weighted_metric, DispositionTable,
    InterferencePower, PowerMode, PowerOptions,
};
use crate::channel::{equivalent_gains, BeamMode, BeamSet, ChannelDims, ChannelRealization, SubcarrierGains};
use crate::config::SimConfig;
use crate::metrics::{feedback_count, jain_index, modified_jain, FeedbackScheme};
use crate::sim::{run, Summary};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn exp_gains(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| -scale * (1.0 - rng.gen::<f64>()).ln()).collect()
}

/// Runs every check; a failed check never stops the others.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        oracle_dominance(&mut rng),
        waterfill_stationarity(&mut rng),
        optimal_power_grid(&mut rng),
        beam_orthonormality(&mut rng),
        energy_conservation(&mut rng),
        fairness_identities(),
        feedback_counts(),
        short_run_invariants(seed),
    ]
}

fn oracle_dominance(rng: &mut ChaCha8Rng) -> Check {
    let table = DispositionTable::new(2);
    let v = InterferencePower::new(1.0 / 8.0).unwrap();
    let trials = 2000;
    let (mut equal, mut violations) = (0, 0);
    for _ in 0..trials {
        let c = exp_gains(rng, 6, 100.0);
        let g = SubcarrierGains::new(3, 2, &c);
        let mu: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..2.0)).collect();
        let a1 = allocate_alg1(g, &mu, v, &table);
        let brute = allocate_exhaustive(g, &mu, 0.0, v, PowerMode::UniformV, PowerOptions::default()).unwrap();
        if a1.metric > brute.metric + 1e-9 {
            violations += 1;
        }
        if (a1.metric - brute.metric).abs() <= 1e-9 * brute.metric.max(1.0) {
            equal += 1;
        }
    }
    let frac = equal as f64 / trials as f64;
    check(
        "greedy vs exhaustive",
        violations == 0 && frac >= 0.95,
        format!("{violations} dominance violations, {:.1}% equal", 100.0 * frac),
    )
}

fn waterfill_stationarity(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let c = [rng.gen_range(0.01..100.0)];
        let mu = rng.gen_range(0.05..3.0);
        let lambda = rng.gen_range(0.05..5.0);
        let g = SubcarrierGains::new(1, 1, &c);
        let p = waterfill(g, &[Some(0)], &[mu], lambda, InterferencePower::new(0.1).unwrap()).unwrap()[0];
        if p > 1e-3 {
            let f = |x: f64| mu * (1.0 + x * c[0]).log2() - lambda * x;
            let h = 1e-6 * p.max(1.0);
            worst = worst.max(((f(p + h) - f(p - h)) / (2.0 * h)).abs());
        }
    }
    check("water-filling stationarity", worst < 1e-6, format!("largest |derivative| {worst:.2e}"))
}

fn optimal_power_grid(rng: &mut ChaCha8Rng) -> Check {
    let mu = [0.5, 0.5];
    let lambda = 1.0;
    let p_max = 0.5 / LN_2;
    let step = 1e-3;
    let n = (p_max / step) as usize + 1;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let c = exp_gains(rng, 4, 20.0);
        let g = SubcarrierGains::new(2, 2, &c);
        let users = [Some(0), Some(1)];
        let sol = optimal_power(g, &users, &mu, lambda, PowerOptions::default()).unwrap();
        let mut grid = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let p = [i as f64 * step, j as f64 * step];
                grid = grid.max(weighted_metric(g, &users, &p, &mu, lambda).unwrap());
            }
        }
        worst = worst.max(grid - sol.metric);
    }
    check("power optimization vs grid", worst < 1e-3, format!("largest shortfall {worst:.2e}"))
}

fn beam_orthonormality(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for t in 1..=6 {
        for mode in [BeamMode::RandomOrthonormal, BeamMode::UlaHalfwave] {
            let b = BeamSet::generate(t, 8, mode, rng);
            worst = (0..8).map(|m| b.gram_deviation(m)).fold(worst, f64::max);
        }
    }
    check("beam orthonormality", worst < 1e-10, format!("largest Gram deviation {worst:.2e}"))
}

fn energy_conservation(rng: &mut ChaCha8Rng) -> Check {
    let dims = ChannelDims::new(3, 4, 4).unwrap();
    let h: Vec<Complex64> = (0..3 * 4 * 4)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let real = ChannelRealization::from_raw(dims, 0, h).unwrap();
    let beams = BeamSet::generate(4, 4, BeamMode::RandomOrthonormal, rng);
    let sigma2 = 0.3;
    let gains = equivalent_gains(&real, &beams, sigma2).unwrap();
    let mut worst = 0.0f64;
    for k in 0..3 {
        for m in 0..4 {
            let norm: f64 = real.row(k, m).iter().map(|z| z.norm_sqr()).sum();
            let total: f64 = (0..4).map(|q| gains.get(k, m, q)).sum::<f64>() * sigma2;
            worst = worst.max((norm - total).abs() / norm);
        }
    }
    check("gain energy conservation", worst < 1e-12, format!("largest relative error {worst:.2e}"))
}

fn fairness_identities() -> Check {
    let constant = jain_index(&[3.0; 6]).unwrap();
    let rates = [3.0, 2.5, 2.0, 1.5, 1.0];
    let total: f64 = rates.iter().sum();
    let phi: Vec<f64> = rates.iter().map(|r| r / total).collect();
    let req: Vec<f64> = phi.iter().map(|p| p * total).collect();
    let balanced = modified_jain(&rates, &req).unwrap();
    let x = [0.3, 1.7, 2.2];
    let scaled: Vec<f64> = x.iter().map(|v| v * 41.0).collect();
    let drift = (jain_index(&x).unwrap() - jain_index(&scaled).unwrap()).abs();
    let ok = (constant - 1.0).abs() < 1e-12 && (balanced - 1.0).abs() < 1e-12 && drift < 1e-12;
    check("fairness identities", ok, format!("constant {constant}, balanced {balanced}, scale drift {drift:.1e}"))
}

fn feedback_counts() -> Check {
    let got = [
        feedback_count(FeedbackScheme::AdaptiveTprime, 72, 4),
        feedback_count(FeedbackScheme::FixedTbar, 72, 4),
        feedback_count(FeedbackScheme::ClassicOb, 72, 4),
    ];
    check("feedback counts", got == [288, 216, 144], format!("{got:?}"))
}

fn short_run_invariants(seed: u64) -> Check {
    let config = SimConfig::default()
        .with_overrides(&["K=3", "t=2", "M=8", "slots=200", &format!("seed={seed}")])
        .expect("valid overrides");
    let outcome = (|| {
        let (r, a) = run(&config)?;
        let (_, b) = run(&config)?;
        let summary = Summary::new(&r, &a);
        let dual_ok = a.rows.iter().all(|row| {
            let dot: f64 = row.mu.iter().zip(r.targets.as_slice()).map(|(m, p)| m * p).sum();
            (dot - 1.0).abs() < 1e-12 && row.lambda >= r.config.dual.epsilon && row.mu.iter().all(|&m| m >= 0.0)
        });
        let bounds = summary.bound_violations.power + summary.bound_violations.rate;
        crate::Result::Ok((a == b, dual_ok, bounds))
    })();
    match outcome {
        Ok((deterministic, dual_ok, bounds)) => check(
            "simulation invariants",
            deterministic && dual_ok && bounds == 0,
            format!("deterministic {deterministic}, dual feasible {dual_ok}, bound violations {bounds}"),
        ),
        Err(e) => check("simulation invariants", false, e.to_string()),
    }
}
