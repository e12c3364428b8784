//! Time-correlated frequency-selective MISO fading, orthonormal beam sets and
//! the equivalent channel gains seen by the scheduler.
//!
//! Every (user, transmit antenna, tap) triple owns an independent unit-power
//! fading process built as a sum of sinusoids with Jakes (Clarke) Doppler
//! spectrum. Oscillator arrival angles are equispaced on the circle with a
//! per-process rotation, which makes the time-averaged autocorrelation of a
//! single realization follow `J0(2π f_D τ)` closely out to several
//! coherence times. The frequency response on subcarrier `m` is the Fourier
//! sum of the taps over the delay profile.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oscillators per fading process unless configured otherwise.
pub const DEFAULT_OSCILLATORS: usize = 32;

/// Smallest oscillator count accepted by [`FaderState`].
pub const MIN_OSCILLATORS: usize = 16;

const NORMALIZATION_TOL: f64 = 1e-9;

/// One multipath component: excess delay in seconds and linear power gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay: f64,
    pub power: f64,
}

/// Power-delay profile plus the maximum Doppler frequency of every tap.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipathProfile {
    taps: Vec<Tap>,
    doppler_hz: f64,
}

impl MultipathProfile {
    pub fn new(taps: Vec<Tap>, doppler_hz: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::config("multipath profile needs at least one tap"));
        }
        if !(doppler_hz.is_finite() && doppler_hz >= 0.0) {
            return Err(Error::config(format!(
                "doppler frequency must be finite and non-negative, got {doppler_hz}"
            )));
        }
        for (i, tap) in taps.iter().enumerate() {
            if !(tap.delay.is_finite() && tap.delay >= 0.0) {
                return Err(Error::config(format!("tap {i}: invalid delay {}", tap.delay)));
            }
            if !(tap.power.is_finite() && tap.power >= 0.0) {
                return Err(Error::config(format!("tap {i}: invalid power {}", tap.power)));
            }
            if i > 0 && tap.delay <= taps[i - 1].delay {
                return Err(Error::config("tap delays must be strictly increasing"));
            }
        }
        let total: f64 = taps.iter().map(|t| t.power).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::config(format!(
                "tap powers must sum to 1, got {total}"
            )));
        }
        Ok(Self { taps, doppler_hz })
    }

    /// Builds a profile from delays and powers given in dB, normalizing the
    /// total power to one.
    pub fn from_db(delays: &[f64], powers_db: &[f64], doppler_hz: f64) -> Result<Self> {
        if delays.len() != powers_db.len() {
            return Err(Error::config("delays and powers must have the same length"));
        }
        let linear: Vec<f64> = powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        let taps = delays
            .iter()
            .zip(&linear)
            .map(|(&delay, &p)| Tap {
                delay,
                power: p / total,
            })
            .collect();
        Self::new(taps, doppler_hz)
    }

    /// Pedestrian-type profile whose last tap arrives 2.3 µs after the first.
    ///
    /// Delays and relative powers follow the first five taps of the ITU
    /// Pedestrian B table.
    pub fn pedestrian(doppler_hz: f64) -> Self {
        Self::from_db(
            &[0.0, 0.2e-6, 0.8e-6, 1.2e-6, 2.3e-6],
            &[0.0, -0.9, -4.9, -8.0, -7.8],
            doppler_hz,
        )
        .expect("built-in profile is valid")
    }

    /// Frequency-flat profile with a single tap at zero delay.
    pub fn single_tap(doppler_hz: f64) -> Self {
        Self::new(
            vec![Tap {
                delay: 0.0,
                power: 1.0,
            }],
            doppler_hz,
        )
        .expect("single tap is valid")
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn max_excess_delay(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay) - self.taps[0].delay
    }

    pub fn rms_delay_spread(&self) -> f64 {
        let mean: f64 = self.taps.iter().map(|t| t.power * t.delay).sum();
        let second: f64 = self.taps.iter().map(|t| t.power * t.delay * t.delay).sum();
        (second - mean * mean).max(0.0).sqrt()
    }
}

/// Dimensions shared by channel realizations and gain tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDims {
    pub users: usize,
    pub subcarriers: usize,
    pub antennas: usize,
}

impl ChannelDims {
    pub fn new(users: usize, subcarriers: usize, antennas: usize) -> Result<Self> {
        if users == 0 || subcarriers == 0 || antennas == 0 {
            return Err(Error::config(format!(
                "users, subcarriers and antennas must be at least 1 (got K={users}, M={subcarriers}, t={antennas})"
            )));
        }
        Ok(Self {
            users,
            subcarriers,
            antennas,
        })
    }

    fn len(&self) -> usize {
        self.users * self.subcarriers * self.antennas
    }
}

/// Unit-power sum-of-sinusoids process with Jakes Doppler spectrum.
#[derive(Clone, Debug, PartialEq)]
struct JakesProcess {
    omega: Vec<f64>,
    phase: Vec<f64>,
}

impl JakesProcess {
    fn new(doppler_hz: f64, oscillators: usize, rng: &mut ChaCha8Rng) -> Self {
        // Rotating the grid by an angle in [π/4, 3π/4] (mod π) keeps every
        // oscillator frequency distinct, so cross terms average out in time.
        let mut rotation = PI / 4.0 + rng.gen::<f64>() * PI / 2.0;
        if rng.gen::<bool>() {
            rotation += PI;
        }
        let n = oscillators as f64;
        let (omega, phase) = (0..oscillators)
            .map(|i| {
                let arrival = (2.0 * PI * i as f64 + rotation) / n;
                let omega = 2.0 * PI * doppler_hz * arrival.cos();
                (omega, rng.gen::<f64>() * 2.0 * PI)
            })
            .unzip();
        Self { omega, phase }
    }

    fn sample(&self, time: f64) -> Complex64 {
        let sum: Complex64 = self
            .omega
            .iter()
            .zip(&self.phase)
            .map(|(w, p)| Complex64::from_polar(1.0, w * time + p))
            .sum();
        sum / (self.omega.len() as f64).sqrt()
    }
}

/// State of the multi-user, multi-antenna fading generator.
#[derive(Clone, Debug, PartialEq)]
pub struct FaderState {
    dims: ChannelDims,
    amplitudes: Vec<f64>,
    // index ((k * t) + a) * taps + l
    processes: Vec<JakesProcess>,
    // index m * taps + l: exp(-j 2π f_m d_l)
    phasors: Vec<Complex64>,
    time: f64,
    slot: u64,
}

impl FaderState {
    pub fn new(
        profile: &MultipathProfile,
        dims: ChannelDims,
        subcarrier_spacing: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_oscillators(profile, dims, subcarrier_spacing, DEFAULT_OSCILLATORS, seed)
    }

    pub fn with_oscillators(
        profile: &MultipathProfile,
        dims: ChannelDims,
        subcarrier_spacing: f64,
        oscillators: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
            return Err(Error::config(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing}"
            )));
        }
        if oscillators < MIN_OSCILLATORS {
            return Err(Error::config(format!(
                "at least {MIN_OSCILLATORS} oscillators per tap are required, got {oscillators}"
            )));
        }
        // Re-validate in case the profile was built by hand elsewhere.
        let profile = MultipathProfile::new(profile.taps.clone(), profile.doppler_hz)?;
        let taps = profile.taps();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let processes = (0..dims.users * dims.antennas * taps.len())
            .map(|_| JakesProcess::new(profile.doppler_hz, oscillators, &mut rng))
            .collect();

        let phasors = (0..dims.subcarriers)
            .flat_map(|m| {
                let freq = m as f64 * subcarrier_spacing;
                taps.iter()
                    .map(move |tap| Complex64::from_polar(1.0, -2.0 * PI * freq * tap.delay))
            })
            .collect();

        Ok(Self {
            dims,
            amplitudes: taps.iter().map(|t| t.power.sqrt()).collect(),
            processes,
            phasors,
            time: 0.0,
            slot: 0,
        })
    }

    pub fn dims(&self) -> ChannelDims {
        self.dims
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Per-tap fading values at the current time, indexed
    /// `((k * t) + a) * taps + l`.
    pub fn tap_values(&self) -> Vec<Complex64> {
        self.processes.iter().map(|p| p.sample(self.time)).collect()
    }

    /// Samples the channel at the current slot, then advances the clock.
    pub fn step(&mut self, slot_duration: f64) -> ChannelRealization {
        let ChannelDims {
            users,
            subcarriers,
            antennas,
        } = self.dims;
        let taps = self.amplitudes.len();

        let weighted: Vec<Complex64> = self
            .processes
            .iter()
            .enumerate()
            .map(|(i, p)| p.sample(self.time) * self.amplitudes[i % taps])
            .collect();

        let mut h = vec![Complex64::new(0.0, 0.0); self.dims.len()];
        for k in 0..users {
            for m in 0..subcarriers {
                let phasors = &self.phasors[m * taps..(m + 1) * taps];
                for a in 0..antennas {
                    let base = (k * antennas + a) * taps;
                    h[(k * subcarriers + m) * antennas + a] = weighted[base..base + taps]
                        .iter()
                        .zip(phasors)
                        .map(|(g, e)| g * e)
                        .sum();
                }
            }
        }
        debug_assert!(h.iter().all(|z| z.re.is_finite() && z.im.is_finite()));

        let realization = ChannelRealization {
            dims: self.dims,
            slot: self.slot,
            h,
        };
        self.time += slot_duration;
        self.slot += 1;
        realization
    }
}

/// Channel row vectors `h_{k,m}` for every user and subcarrier at one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    dims: ChannelDims,
    slot: u64,
    h: Vec<Complex64>,
}

pub const CHANNEL_CSV_HEADER: &str = "slot,k,m,antenna,re,im";

impl ChannelRealization {
    pub fn from_raw(dims: ChannelDims, slot: u64, h: Vec<Complex64>) -> Result<Self> {
        if h.len() != dims.len() {
            return Err(Error::contract(format!(
                "expected {} channel entries, got {}",
                dims.len(),
                h.len()
            )));
        }
        if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::contract("channel entries must be finite"));
        }
        Ok(Self { dims, slot, h })
    }

    pub fn dims(&self) -> ChannelDims {
        self.dims
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn row(&self, k: usize, m: usize) -> &[Complex64] {
        let t = self.dims.antennas;
        let start = (k * self.dims.subcarriers + m) * t;
        &self.h[start..start + t]
    }

    /// Appends `slot,k,m,antenna,re,im` rows (1-based k, m and antenna).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for k in 0..self.dims.users {
            for m in 0..self.dims.subcarriers {
                for (a, z) in self.row(k, m).iter().enumerate() {
                    writeln!(out, "{},{},{},{},{},{}", self.slot, k + 1, m + 1, a + 1, z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamMode {
    /// Haar-random orthonormal basis per subcarrier, redrawn every frame.
    RandomOrthonormal,
    /// DFT steering vectors of a half-wavelength uniform linear array.
    UlaHalfwave,
}

/// Orthonormal beamforming vectors `b_{m,q}` for every subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSet {
    subcarriers: usize,
    antennas: usize,
    // index ((m * t) + q) * t + a
    b: Vec<Complex64>,
}

fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

impl BeamSet {
    pub fn generate<R: Rng + ?Sized>(
        antennas: usize,
        subcarriers: usize,
        mode: BeamMode,
        rng: &mut R,
    ) -> Self {
        assert!(antennas >= 1 && subcarriers >= 1);
        let b = match mode {
            BeamMode::RandomOrthonormal => (0..subcarriers)
                .flat_map(|_| random_unitary(antennas, rng))
                .collect(),
            BeamMode::UlaHalfwave => {
                let steering = ula_steering(antennas);
                (0..subcarriers).flat_map(|_| steering.iter().copied()).collect()
            }
        };
        Self {
            subcarriers,
            antennas,
            b,
        }
    }

    pub fn from_seed(antennas: usize, subcarriers: usize, mode: BeamMode, seed: u64) -> Self {
        Self::generate(antennas, subcarriers, mode, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Builds a beam set from explicit weights, checking orthonormality.
    pub fn from_raw(antennas: usize, subcarriers: usize, b: Vec<Complex64>) -> Result<Self> {
        if b.len() != antennas * antennas * subcarriers {
            return Err(Error::contract("beam weight count does not match dimensions"));
        }
        let set = Self {
            subcarriers,
            antennas,
            b,
        };
        for m in 0..subcarriers {
            if set.gram_deviation(m) > 1e-10 {
                return Err(Error::contract(format!("beams on subcarrier {m} are not orthonormal")));
            }
        }
        Ok(set)
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn beam(&self, m: usize, q: usize) -> &[Complex64] {
        let t = self.antennas;
        let start = (m * t + q) * t;
        &self.b[start..start + t]
    }

    /// Largest `|<b_q, b_q'> - δ_qq'|` on subcarrier `m`.
    pub fn gram_deviation(&self, m: usize) -> f64 {
        let t = self.antennas;
        let mut worst = 0.0f64;
        for q in 0..t {
            for s in 0..t {
                let target = if q == s { 1.0 } else { 0.0 };
                let g = inner(self.beam(m, q), self.beam(m, s));
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Haar-distributed unitary via Gram-Schmidt on complex Gaussian columns,
/// returned column by column.
fn random_unitary<R: Rng + ?Sized>(t: usize, rng: &mut R) -> Vec<Complex64> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(t);
    while basis.len() < t {
        let mut v: Vec<Complex64> = (0..t)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        // two passes of modified Gram-Schmidt keep orthogonality near machine precision
        for _ in 0..2 {
            for u in &basis {
                let proj = inner(u, &v);
                v.iter_mut().zip(u).for_each(|(x, e)| *x -= proj * e);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis.into_iter().flatten().collect()
}

/// Steering vectors `(1/√t) exp(-jπ n sinθ_q)` with `sinθ_q = -1 + 2q/t`.
fn ula_steering(t: usize) -> Vec<Complex64> {
    let scale = 1.0 / (t as f64).sqrt();
    (0..t)
        .flat_map(|q| {
            let sin_theta = -1.0 + 2.0 * q as f64 / t as f64;
            (0..t).map(move |n| Complex64::from_polar(scale, -PI * n as f64 * sin_theta))
        })
        .collect()
}

/// Equivalent channel gains `c_{k,m,q} = |h_{k,m} b_{m,q}|^2 / σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainTable {
    dims: ChannelDims,
    noise_var: f64,
    // index ((m * K) + k) * t + q
    c: Vec<f64>,
}

impl GainTable {
    pub fn from_raw(dims: ChannelDims, noise_var: f64, c: Vec<f64>) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::config(format!("noise variance must be positive, got {noise_var}")));
        }
        if c.len() != dims.len() {
            return Err(Error::contract(format!(
                "expected {} gains, got {}",
                dims.len(),
                c.len()
            )));
        }
        if c.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::contract("gains must be finite and non-negative"));
        }
        Ok(Self { dims, noise_var, c })
    }

    pub fn dims(&self) -> ChannelDims {
        self.dims
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn get(&self, k: usize, m: usize, q: usize) -> f64 {
        self.c[(m * self.dims.users + k) * self.dims.antennas + q]
    }

    pub fn subcarrier(&self, m: usize) -> SubcarrierGains<'_> {
        let block = self.dims.users * self.dims.antennas;
        SubcarrierGains {
            users: self.dims.users,
            beams: self.dims.antennas,
            c: &self.c[m * block..(m + 1) * block],
        }
    }

    /// `Σ_{m,q} c_{k,m,q}` for one user.
    pub fn user_total(&self, k: usize) -> f64 {
        (0..self.dims.subcarriers)
            .map(|m| self.subcarrier(m).user(k).iter().sum::<f64>())
            .sum()
    }
}

/// Borrowed `K × t` gain block of a single subcarrier.
#[derive(Clone, Copy, Debug)]
pub struct SubcarrierGains<'a> {
    users: usize,
    beams: usize,
    c: &'a [f64],
}

impl<'a> SubcarrierGains<'a> {
    /// Wraps a row-major `users × beams` slice.
    pub fn new(users: usize, beams: usize, c: &'a [f64]) -> Self {
        assert_eq!(c.len(), users * beams, "gain block has wrong length");
        Self { users, beams, c }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn get(&self, k: usize, q: usize) -> f64 {
        self.c[k * self.beams + q]
    }

    pub fn user(&self, k: usize) -> &'a [f64] {
        &self.c[k * self.beams..(k + 1) * self.beams]
    }
}

pub fn equivalent_gains(
    h: &ChannelRealization,
    beams: &BeamSet,
    noise_var: f64,
) -> Result<GainTable> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::config(format!("noise variance must be positive, got {noise_var}")));
    }
    let dims = h.dims();
    if beams.antennas() != dims.antennas || beams.subcarriers() != dims.subcarriers {
        return Err(Error::contract("beam set and channel dimensions disagree"));
    }
    let mut c = Vec::with_capacity(dims.len());
    for m in 0..dims.subcarriers {
        for k in 0..dims.users {
            let row = h.row(k, m);
            for q in 0..dims.antennas {
                let proj: Complex64 = row.iter().zip(beams.beam(m, q)).map(|(x, y)| x * y).sum();
                c.push(proj.norm_sqr() / noise_var);
            }
        }
    }
    Ok(GainTable { dims, noise_var, c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(k: usize, m: usize, t: usize) -> ChannelDims {
        ChannelDims::new(k, m, t).unwrap()
    }

    #[test]
    fn profile_rejects_bad_input() {
        assert!(MultipathProfile::new(vec![], 6.0).is_err());
        let unnormalized = vec![
            Tap { delay: 0.0, power: 0.5 },
            Tap { delay: 1e-6, power: 0.4 },
        ];
        assert!(MultipathProfile::new(unnormalized, 6.0).is_err());
        let unordered = vec![
            Tap { delay: 1e-6, power: 0.5 },
            Tap { delay: 0.0, power: 0.5 },
        ];
        assert!(MultipathProfile::new(unordered, 6.0).is_err());
        assert!(MultipathProfile::new(vec![Tap { delay: 0.0, power: 1.0 }], -1.0).is_err());
    }

    #[test]
    fn pedestrian_profile_is_normalized() {
        let p = MultipathProfile::pedestrian(6.0);
        let total: f64 = p.taps().iter().map(|t| t.power).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((p.max_excess_delay() - 2.3e-6).abs() < 1e-15);
        assert!(p.rms_delay_spread() > 0.0);
    }

    #[test]
    fn fader_rejects_bad_spacing_and_oscillators() {
        let p = MultipathProfile::single_tap(6.0);
        assert!(FaderState::new(&p, dims(1, 1, 1), 0.0, 1).is_err());
        assert!(FaderState::with_oscillators(&p, dims(1, 1, 1), 15e3, 8, 1).is_err());
        assert!(ChannelDims::new(0, 1, 1).is_err());
    }

    #[test]
    fn fader_is_deterministic_per_seed() {
        let p = MultipathProfile::pedestrian(6.0);
        let a = FaderState::new(&p, dims(2, 8, 2), 15e3, 42).unwrap();
        let b = FaderState::new(&p, dims(2, 8, 2), 15e3, 42).unwrap();
        assert_eq!(a, b);
        let c = FaderState::new(&p, dims(2, 8, 2), 15e3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_doppler_freezes_channel() {
        let p = MultipathProfile::single_tap(0.0);
        let mut f = FaderState::new(&p, dims(2, 4, 2), 15e3, 7).unwrap();
        let first = f.step(1e-3);
        for _ in 0..50 {
            let next = f.step(1e-3);
            for k in 0..2 {
                for m in 0..4 {
                    for (x, y) in first.row(k, m).iter().zip(next.row(k, m)) {
                        assert!((x - y).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn single_tap_is_frequency_flat() {
        let p = MultipathProfile::single_tap(6.0);
        let mut f = FaderState::new(&p, dims(2, 16, 3), 15e3, 3).unwrap();
        for _ in 0..5 {
            let h = f.step(1e-3);
            for k in 0..2 {
                for m in 1..16 {
                    for (x, y) in h.row(k, 0).iter().zip(h.row(k, m)) {
                        assert!((x - y).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn multi_tap_is_frequency_selective() {
        let p = MultipathProfile::pedestrian(6.0);
        let mut f = FaderState::new(&p, dims(1, 72, 1), 15e3, 3).unwrap();
        let h = f.step(1e-3);
        let spread = (0..72)
            .map(|m| (h.row(0, m)[0] - h.row(0, 0)[0]).norm())
            .fold(0.0, f64::max);
        assert!(spread > 1e-3);
    }

    #[test]
    fn slot_counter_advances() {
        let p = MultipathProfile::single_tap(6.0);
        let mut f = FaderState::new(&p, dims(1, 1, 1), 15e3, 3).unwrap();
        assert_eq!(f.step(1e-3).slot(), 0);
        assert_eq!(f.step(1e-3).slot(), 1);
        assert_eq!(f.slot(), 2);
        assert!((f.time() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn beam_sets_are_orthonormal() {
        for t in 1..=5 {
            for mode in [BeamMode::RandomOrthonormal, BeamMode::UlaHalfwave] {
                let b = BeamSet::from_seed(t, 6, mode, 11);
                for m in 0..6 {
                    assert!(b.gram_deviation(m) < 1e-10, "t={t} mode={mode:?}");
                }
            }
        }
    }

    #[test]
    fn single_antenna_beam_is_unit() {
        let b = BeamSet::from_seed(1, 3, BeamMode::RandomOrthonormal, 1);
        for m in 0..3 {
            assert!((b.beam(m, 0)[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ula_weights_match_steering_formula() {
        let b = BeamSet::from_seed(4, 2, BeamMode::UlaHalfwave, 0);
        for q in 0..4 {
            let sin_theta = -1.0 + 2.0 * q as f64 / 4.0;
            for n in 0..4 {
                let expected = Complex64::from_polar(0.5, -PI * n as f64 * sin_theta);
                assert!((b.beam(1, q)[n] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn random_beams_change_with_rng_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = BeamSet::generate(2, 1, BeamMode::RandomOrthonormal, &mut rng);
        let b = BeamSet::generate(2, 1, BeamMode::RandomOrthonormal, &mut rng);
        assert_ne!(a, b);
    }

    #[test]
    fn aligned_channel_hits_one_beam() {
        let beams = BeamSet::from_seed(3, 1, BeamMode::RandomOrthonormal, 9);
        let h: Vec<Complex64> = beams.beam(0, 0).iter().map(|z| z.conj()).collect();
        let real = ChannelRealization::from_raw(dims(1, 1, 3), 0, h).unwrap();
        let g = equivalent_gains(&real, &beams, 1.0).unwrap();
        assert!((g.get(0, 0, 0) - 1.0).abs() < 1e-12);
        assert!(g.get(0, 0, 1) < 1e-20);
        assert!(g.get(0, 0, 2) < 1e-20);
    }

    #[test]
    fn gains_scale_quadratically() {
        let p = MultipathProfile::pedestrian(6.0);
        let mut f = FaderState::new(&p, dims(2, 4, 2), 15e3, 1).unwrap();
        let h = f.step(1e-3);
        let mut doubled = Vec::new();
        for k in 0..2 {
            for m in 0..4 {
                doubled.extend(h.row(k, m).iter().map(|z| z * 2.0));
            }
        }
        let h2 = ChannelRealization::from_raw(h.dims(), 0, doubled).unwrap();
        let beams = BeamSet::from_seed(2, 4, BeamMode::RandomOrthonormal, 2);
        let g1 = equivalent_gains(&h, &beams, 0.5).unwrap();
        let g2 = equivalent_gains(&h2, &beams, 0.5).unwrap();
        for k in 0..2 {
            for m in 0..4 {
                for q in 0..2 {
                    assert!((g2.get(k, m, q) - 4.0 * g1.get(k, m, q)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn gains_conserve_channel_energy() {
        let p = MultipathProfile::pedestrian(6.0);
        let mut f = FaderState::new(&p, dims(3, 5, 2), 15e3, 8).unwrap();
        let beams = BeamSet::from_seed(2, 5, BeamMode::RandomOrthonormal, 4);
        let noise = 0.25;
        for _ in 0..10 {
            let h = f.step(1e-3);
            let g = equivalent_gains(&h, &beams, noise).unwrap();
            for k in 0..3 {
                for m in 0..5 {
                    let energy: f64 = h.row(k, m).iter().map(|z| z.norm_sqr()).sum();
                    let total: f64 = (0..2).map(|q| g.get(k, m, q)).sum();
                    assert!((total * noise - energy).abs() < 1e-10 * energy.max(1.0));
                }
            }
        }
    }

    #[test]
    fn gains_reject_bad_noise() {
        let beams = BeamSet::from_seed(1, 1, BeamMode::UlaHalfwave, 0);
        let h = ChannelRealization::from_raw(dims(1, 1, 1), 0, vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert!(equivalent_gains(&h, &beams, 0.0).is_err());
        assert!(equivalent_gains(&h, &beams, -1.0).is_err());
    }

    #[test]
    fn csv_dump_has_one_row_per_entry() {
        let p = MultipathProfile::single_tap(6.0);
        let mut f = FaderState::new(&p, dims(2, 3, 2), 15e3, 1).unwrap();
        let mut out = Vec::new();
        f.step(1e-3).write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with("0,1,1,1,"));
    }
}
