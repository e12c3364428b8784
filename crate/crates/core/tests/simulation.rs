use beamsched::config::SimConfig;
use beamsched::metrics::mean_and_stderr;
use beamsched::sim::{rate_region, run, sweep, Axis, Summary};

fn config(overrides: &[&str]) -> SimConfig {
    SimConfig::default().with_overrides(overrides).expect("valid overrides")
}

fn small(extra: &[&str]) -> SimConfig {
    let mut o = vec!["K=3", "t=2", "M=8", "slots=300"];
    o.extend_from_slice(extra);
    config(&o)
}

#[test]
fn zero_slots_give_an_empty_trace() {
    let (r, log) = run(&small(&["slots=0"])).unwrap();
    assert!(log.rows.is_empty());
    let s = Summary::new(&r, &log);
    assert_eq!(s.slots, 0);
    assert_eq!(s.initial_dual.lambda, r.lambda0);
    assert_eq!(s.final_dual, s.initial_dual);
    assert_eq!(s.cumulative.mean_sum_rate, None);
}

#[test]
fn runs_are_deterministic_and_seed_dependent() {
    let (_, a) = run(&small(&["seed=5"])).unwrap();
    let (_, b) = run(&small(&["seed=5"])).unwrap();
    let (_, c) = run(&small(&["seed=6"])).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.rows, c.rows);
    assert_eq!(a.rows.len(), 300);
}

#[test]
fn dual_iterates_stay_feasible() {
    for scheme in ["alg1-waterfill", "alg1-uniform", "fixed-tbar", "classic-ob", "exhaustive-oracle"] {
        let scheme = format!("scheme=\"{scheme}\"");
        let (r, log) = run(&small(&["tbar=1", &scheme])).unwrap();
        for row in &log.rows {
            let dot: f64 = row.mu.iter().zip(r.targets.as_slice()).map(|(m, p)| m * p).sum();
            assert!((dot - 1.0).abs() < 1e-12, "{scheme}: phi.mu = {dot}");
            assert!(row.mu.iter().all(|&m| m >= 0.0));
            assert!(row.lambda >= r.config.dual.epsilon);
            assert!(row.power_bound_holds() && row.rate_bounds_hold(), "{scheme} slot {}", row.n);
        }
    }
}

#[test]
fn lambda_settles() {
    let (_, log) = run(&small(&["slots=4000"])).unwrap();
    let tail: Vec<f64> = log.rows[log.rows.len() * 9 / 10..].iter().map(|r| r.lambda).collect();
    let (mean, _) = mean_and_stderr(&tail).unwrap();
    let std = (tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    assert!(std / mean < 0.05, "relative std {}", std / mean);
}

#[test]
fn single_value_sweep_equals_run() {
    let template = small(&[]);
    let points = sweep(&template, Axis::K, &["3".to_string()]).unwrap();
    let (r, log) = run(&template).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].summary, Summary::new(&r, &log));
}

#[test]
fn sweep_reports_the_offending_value() {
    let err = sweep(&small(&[]), Axis::K, &["2".to_string(), "0".to_string()]).unwrap_err();
    let text = err.to_string();
    assert!(text.contains('K') && text.contains('0'), "{text}");
}

#[test]
fn alg2_work_grows_linearly_in_users() {
    let template = config(&["t=4", "M=16", "slots=3", "scheme=\"fixed-tbar\"", "tbar=2"]);
    let ks = ["2", "4", "8", "16"].map(String::from);
    let points = sweep(&template, Axis::K, &ks).unwrap();
    let x: Vec<f64> = ks.iter().map(|k| k.parse().unwrap()).collect();
    let y: Vec<f64> = points
        .iter()
        .map(|p| {
            let l = p.summary.ledger_per_slot.as_ref().unwrap();
            l.rate_evaluations + l.snir_evaluations
        })
        .collect();
    // least-squares slope and R²
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    assert!(sxy / sxx > 0.0);
    assert!(sxy * sxy / (sxx * syy) > 0.99);
}

#[test]
fn sum_rate_peaks_at_an_interior_antenna_count() {
    let template = config(&["K=16", "M=8", "slots=300", "scheme=\"classic-ob\""]);
    let ts: Vec<String> = (1..=6).map(|t| t.to_string()).collect();
    let rates: Vec<f64> = sweep(&template, Axis::T, &ts)
        .unwrap()
        .iter()
        .map(|p| p.summary.cumulative.mean_sum_rate.unwrap())
        .collect();
    let best = rates.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(best > 0 && best < rates.len() - 1, "{rates:?}");
}

fn two_users(extra: &[&str]) -> SimConfig {
    let mut o = vec!["K=2", "t=2", "M=8", "slots=3000"];
    o.extend_from_slice(extra);
    config(&o)
}

#[test]
fn symmetric_targets_give_symmetric_rates() {
    let pts = rate_region(&two_users(&[]), &[[0.5, 0.5]]).unwrap();
    let [a, b] = pts[0].rates;
    assert!((a - b).abs() / a.max(b) < 0.1, "{a} {b}");
}

#[test]
fn skewed_targets_are_tracked() {
    let pts = rate_region(&two_users(&[]), &[[0.9, 0.1]]).unwrap();
    let [a, b] = pts[0].rates;
    let share = a / (a + b);
    assert!((0.8..=1.0).contains(&share), "{share}");
}

#[test]
fn oracle_region_dominates_restricted_selection() {
    let phis = [[0.2, 0.8], [0.5, 0.5], [0.8, 0.2]];
    let oracle = rate_region(&two_users(&["scheme=\"exhaustive-oracle\""]), &phis).unwrap();
    let alg2 = rate_region(&two_users(&["scheme=\"fixed-tbar\"", "tbar=1"]), &phis).unwrap();
    for (o, a) in oracle.iter().zip(&alg2) {
        assert!(o.rates[0] >= a.rates[0] && o.rates[1] >= a.rates[1], "{o:?} vs {a:?}");
    }
}

#[test]
fn rate_region_needs_two_users() {
    assert!(rate_region(&small(&[]), &[[0.5, 0.5]]).is_err());
}
