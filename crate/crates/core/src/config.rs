//! Simulation configuration: TOML sections, `auto` defaults and `key=value`
//! overrides.

use std::f64::consts::LN_2;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{check_search_space, InterferencePower, PowerMode, PowerOptions};
use crate::channel::{BeamMode, ChannelDims, MultipathProfile, Tap, DEFAULT_OSCILLATORS};
use crate::dual::{RateTargets, StepMode, StepSchedule};
use crate::error::{Error, Result};

/// Marker for a value derived from the rest of the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Either `"auto"` or an explicit value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Auto(AutoTag),
    Value(T),
}

impl<T> AutoOr<T> {
    pub const AUTO: Self = AutoOr::Auto(AutoTag::Auto);

    pub fn value(&self) -> Option<&T> {
        match self {
            AutoOr::Auto(_) => None,
            AutoOr::Value(v) => Some(v),
        }
    }
}

impl<T: Clone> AutoOr<T> {
    fn resolve(&mut self, auto: impl FnOnce() -> T) -> T {
        let v = match self {
            AutoOr::Auto(_) => auto(),
            AutoOr::Value(v) => v.clone(),
        };
        *self = AutoOr::Value(v.clone());
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Adaptive number of beams with water-filled power.
    Alg1Waterfill,
    /// Adaptive number of beams with power `V` on every active beam.
    Alg1Uniform,
    /// `tbar` beams per subcarrier chosen from user reports, power `V`.
    FixedTbar,
    /// All `t` beams active, chosen from user reports, power `V`.
    ClassicOb,
    /// Exhaustive search over user rows.
    ExhaustiveOracle,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scheme::Alg1Waterfill => "alg1-waterfill",
            Scheme::Alg1Uniform => "alg1-uniform",
            Scheme::FixedTbar => "fixed-tbar",
            Scheme::ClassicOb => "classic-ob",
            Scheme::ExhaustiveOracle => "exhaustive-oracle",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Pedestrian,
    SingleTap,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SystemSection {
    pub K: usize,
    pub t: usize,
    pub M: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Average total transmit power per slot, watts.
    pub total_power: f64,
    /// Average per-user SNR, `P̄ / (M σ²)`, in dB.
    pub snr_db: f64,
    /// Target fractions of the sum rate; `auto` means equal shares.
    pub phi: AutoOr<Vec<f64>>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            K: 5,
            t: 4,
            M: 72,
            subcarrier_spacing: 15e3,
            total_power: 1.0,
            snr_db: 20.0,
            phi: AutoOr::AUTO,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub profile: ProfileKind,
    /// Seconds; only read for the custom profile.
    pub tap_delays: Vec<f64>,
    /// Linear powers summing to one; only read for the custom profile.
    pub tap_gains: Vec<f64>,
    pub doppler_hz: f64,
    /// Seconds.
    pub slot_duration: f64,
    pub oscillators: usize,
    pub beam_mode: BeamMode,
    /// Slots between beam redraws.
    pub frame_len: u64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Pedestrian,
            tap_delays: Vec::new(),
            tap_gains: Vec::new(),
            doppler_hz: 6.0,
            slot_duration: 1e-3,
            oscillators: DEFAULT_OSCILLATORS,
            beam_mode: BeamMode::RandomOrthonormal,
            frame_len: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SchedulerSection {
    pub scheme: Scheme,
    /// Active beams for `fixed-tbar`.
    pub tbar: usize,
    /// Power per active beam assumed for interference, watts; `auto` is
    /// `P̄ / (M t)`.
    pub V: AutoOr<f64>,
    pub oracle_power: PowerMode,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        let opts = PowerOptions::default();
        Self {
            scheme: Scheme::Alg1Waterfill,
            tbar: 2,
            V: AutoOr::AUTO,
            oracle_power: PowerMode::Optimal,
            power_tol: opts.tol,
            power_max_iter: opts.max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSection {
    /// `auto` is `1 / (V ln 2)`, the price at which a unit weight puts the
    /// water level at `V`.
    pub lambda0: AutoOr<f64>,
    pub epsilon: f64,
    pub mode: StepMode,
    pub beta0: f64,
    pub alpha0: f64,
    pub beta_exp: f64,
    pub alpha_exp: f64,
    /// Multiplies `β_n` in the price update; `auto` is
    /// `LAMBDA_GAIN · λ₀ / P̄`.
    pub rho_lambda: AutoOr<f64>,
    /// Multiplies `β_n` in the weight update; `auto` is
    /// `MU_GAIN / (M log2(1 + SNR))`.
    pub rho_mu: AutoOr<f64>,
}

impl Default for DualSection {
    fn default() -> Self {
        let s = StepSchedule::default();
        Self {
            lambda0: AutoOr::AUTO,
            epsilon: 1e-6,
            mode: s.mode,
            beta0: s.beta0,
            alpha0: s.alpha0,
            beta_exp: s.beta_exp,
            alpha_exp: s.alpha_exp,
            rho_lambda: AutoOr::AUTO,
            rho_mu: AutoOr::AUTO,
        }
    }
}

impl DualSection {
    pub fn schedule(&self) -> StepSchedule {
        StepSchedule {
            mode: self.mode,
            beta0: self.beta0,
            alpha0: self.alpha0,
            beta_exp: self.beta_exp,
            alpha_exp: self.alpha_exp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub slots: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, slots: 20_000 }
    }
}

/// Relative price step per unit of `β_n` when the power residual equals `P̄`.
pub const LAMBDA_GAIN: f64 = 5.0;
/// Weight step per unit of `β_n` when a user's rate residual equals the
/// nominal per-slot capacity `M log2(1 + SNR)`.
pub const MU_GAIN: f64 = 5.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub scheduler: SchedulerSection,
    pub dual: DualSection,
    pub run: RunSection,
}

/// A validated configuration with every `auto` value filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    /// Echo of the configuration with no `auto` left.
    pub config: SimConfig,
    pub dims: ChannelDims,
    pub profile: MultipathProfile,
    pub targets: RateTargets,
    pub noise_var: f64,
    pub v: InterferencePower,
    pub lambda0: f64,
    pub rho_lambda: f64,
    pub rho_mu: f64,
    pub schedule: StepSchedule,
    pub power: PowerOptions,
    /// Active beams per subcarrier for the report-based schemes.
    pub tbar: usize,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies `key=value` overrides. Keys are `section.key` or a bare key
    /// that names exactly one field; values are TOML literals, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = toml::Table::try_from(self).map_err(|e| Error::config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override `{item}` is not key=value")))?;
            let (section, field) = locate(key.trim())?;
            let value = parse_literal(raw.trim());
            table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("sections are tables")
                .insert(field, value);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut config = self.clone();
        let sys = &config.system;
        let dims = ChannelDims::new(sys.K, sys.M, sys.t)?;
        if sys.t > 16 {
            return Err(Error::config(format!("at most 16 antennas are supported, got t={}", sys.t)));
        }
        let p_bar = sys.total_power;
        if !(p_bar > 0.0 && p_bar.is_finite()) {
            return Err(Error::config(format!("total power must be positive, got {p_bar}")));
        }
        if !sys.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite"));
        }
        if !(sys.subcarrier_spacing > 0.0 && sys.subcarrier_spacing.is_finite()) {
            return Err(Error::config("subcarrier spacing must be positive"));
        }
        let snr = 10f64.powf(sys.snr_db / 10.0);
        let noise_var = p_bar / (sys.M as f64 * snr);
        let (k, t, m) = (sys.K, sys.t, sys.M);

        let phi = config.system.phi.resolve(|| vec![1.0 / k as f64; k]);
        if phi.len() != k {
            return Err(Error::config(format!("phi has {} entries but K={k}", phi.len())));
        }
        let targets = RateTargets::new(phi)?;

        let ch = &config.channel;
        let profile = match ch.profile {
            ProfileKind::Pedestrian => MultipathProfile::pedestrian(ch.doppler_hz),
            ProfileKind::SingleTap => MultipathProfile::single_tap(ch.doppler_hz),
            ProfileKind::Custom => {
                if ch.tap_delays.len() != ch.tap_gains.len() {
                    return Err(Error::config("tap_delays and tap_gains differ in length"));
                }
                let taps = ch
                    .tap_delays
                    .iter()
                    .zip(&ch.tap_gains)
                    .map(|(&delay, &power)| Tap { delay, power })
                    .collect();
                MultipathProfile::new(taps, ch.doppler_hz)?
            }
        };
        if !(ch.slot_duration > 0.0 && ch.slot_duration.is_finite()) {
            return Err(Error::config("slot duration must be positive"));
        }
        if ch.frame_len == 0 {
            return Err(Error::config("frame_len must be at least 1"));
        }

        let sched = &config.scheduler;
        let tbar = match sched.scheme {
            Scheme::FixedTbar => {
                if !(1..=t).contains(&sched.tbar) {
                    return Err(Error::config(format!("tbar must lie in 1..={t}, got {}", sched.tbar)));
                }
                sched.tbar
            }
            Scheme::ClassicOb => t,
            _ => sched.tbar.clamp(1, t),
        };
        if sched.scheme == Scheme::ExhaustiveOracle {
            check_search_space(k, t)?;
        }
        if !(sched.power_tol > 0.0) || sched.power_max_iter == 0 {
            return Err(Error::config("power_tol and power_max_iter must be positive"));
        }
        let power = PowerOptions {
            tol: sched.power_tol,
            max_iter: sched.power_max_iter,
        };
        let v = config.scheduler.V.resolve(|| p_bar / (m * t) as f64);
        let v = InterferencePower::new(v)?;

        let dual = &mut config.dual;
        let schedule = dual.schedule();
        schedule.validate()?;
        if !(dual.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        let lambda0 = dual.lambda0.resolve(|| {
            if v.watts() > 0.0 {
                1.0 / (v.watts() * LN_2)
            } else {
                1.0
            }
        });
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::config("lambda0 must be positive"));
        }
        let rho_lambda = dual.rho_lambda.resolve(|| LAMBDA_GAIN * lambda0 / p_bar);
        let rho_mu = dual.rho_mu.resolve(|| MU_GAIN / (m as f64 * (1.0 + snr).log2().max(1e-3)));
        if !(rho_lambda > 0.0 && rho_mu > 0.0) {
            return Err(Error::config("rho_lambda and rho_mu must be positive"));
        }

        Ok(ResolvedConfig {
            config,
            dims,
            profile,
            targets,
            noise_var,
            v,
            lambda0,
            rho_lambda,
            rho_mu,
            schedule,
            power,
            tbar,
        })
    }
}

fn locate(key: &str) -> Result<(String, String)> {
    let defaults = toml::Table::try_from(SimConfig::default()).expect("defaults serialize");
    let has = |section: &str, field: &str| {
        defaults
            .get(section)
            .and_then(toml::Value::as_table)
            .is_some_and(|t| t.contains_key(field))
    };
    if let Some((section, field)) = key.split_once('.') {
        if !has(section, field) {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
        return Ok((section.to_string(), field.to_string()));
    }
    let owners: Vec<&String> = defaults.keys().filter(|s| has(s, key)).collect();
    match owners[..] {
        [section] => Ok((section.clone(), key.to_string())),
        [] => Err(Error::config(format!("unknown key `{key}`"))),
        _ => Err(Error::config(format!("key `{key}` is ambiguous, use section.key"))),
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("value = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("value"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = SimConfig::default().resolve().unwrap();
        assert_eq!(r.dims, ChannelDims::new(5, 72, 4).unwrap());
        assert!((r.v.watts() - 1.0 / 288.0).abs() < 1e-15);
        assert!((r.noise_var - 1.0 / (72.0 * 100.0)).abs() < 1e-15);
        assert!((r.lambda0 - 288.0 / LN_2).abs() < 1e-9);
        assert_eq!(r.targets.as_slice(), &[0.2; 5]);
        assert_eq!(r.config.scheduler.V, AutoOr::Value(1.0 / 288.0));
        assert!(r.config.dual.rho_mu.value().is_some());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            [system]
            K = 3
            phi = [0.5, 0.3, 0.2]
            [scheduler]
            scheme = "fixed-tbar"
            tbar = 3
            V = 0.01
        "#;
        let c = SimConfig::from_toml_str(text).unwrap();
        assert_eq!(c.system.K, 3);
        assert_eq!(c.scheduler.scheme, Scheme::FixedTbar);
        assert_eq!(c.scheduler.V, AutoOr::Value(0.01));
        let back = SimConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(SimConfig::from_toml_str("[system]\nusers = 3\n").is_err());
        assert!(SimConfig::from_toml_str("[extra]\nx = 1\n").is_err());
        let c = SimConfig::default();
        assert!(c.with_overrides(&["nope=1"]).is_err());
        assert!(c.with_overrides(&["system.nope=1"]).is_err());
        assert!(c.with_overrides(&["K"]).is_err());
    }

    #[test]
    fn overrides_are_type_checked() {
        let c = SimConfig::default();
        let o = c.with_overrides(&["K=3", "scheduler.scheme=classic-ob", "snr_db=10", "V=auto"]).unwrap();
        assert_eq!(o.system.K, 3);
        assert_eq!(o.scheduler.scheme, Scheme::ClassicOb);
        assert_eq!(o.system.snr_db, 10.0);
        assert!(c.with_overrides(&["K=abc"]).is_err());
        assert!(c.with_overrides(&["K=-1"]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let c = SimConfig::default();
        for o in ["K=0", "t=0", "M=0", "total_power=0", "frame_len=0", "beta_exp=0.4", "oscillators=8"] {
            let bad = c.with_overrides(&[o]).unwrap();
            let err = bad.resolve().and_then(|r| {
                crate::channel::FaderState::with_oscillators(&r.profile, r.dims, 15e3, r.config.channel.oscillators, 0).map(|_| ())
            });
            assert!(err.is_err(), "{o} accepted");
        }
        let bad = c.with_overrides(&["scheme=fixed-tbar", "tbar=5"]).unwrap();
        assert!(bad.resolve().is_err());
        let bad = c.with_overrides(&["phi=[0.5, 0.5]"]).unwrap();
        assert!(bad.resolve().is_err());
        let big = c.with_overrides(&["scheme=exhaustive-oracle", "K=40", "t=4"]).unwrap();
        assert!(matches!(big.resolve(), Err(Error::SearchSpace { .. })));
    }

    #[test]
    fn custom_profile() {
        let c = SimConfig::default()
            .with_overrides(&["profile=custom", "tap_delays=[0.0, 1e-6]", "tap_gains=[0.5, 0.5]"])
            .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.profile.taps().len(), 2);
        let c = c.with_overrides(&["tap_gains=[0.5, 0.6]"]).unwrap();
        assert!(c.resolve().is_err());
    }
}
