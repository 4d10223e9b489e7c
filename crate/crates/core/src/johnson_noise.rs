//! Quantum Johnson noise of the amplifier's resistors, the Monte-Carlo
//! output spectral density and the amplifier noise temperature.
//!
//! Every resistor R carries white noise of one-sided density
//! S_V = 2Rhf·coth(hf/2k_BT), evaluated at the signal frequency. R₁ and the
//! tank resistor get series voltage sources; each junction shunt gets a
//! parallel current source of density S_V/R².

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::input_circuit::{network_derivative, InputCircuit, NetworkState};
use crate::physcore::{fourier_line, TimeSeries, BOLTZMANN, PLANCK};
use crate::squid::{run_squid, step_count, steady_part, FluxWaveform, JunctionNoise, OperatingPoint, SquidParams};
use crate::{Error, Result};

/// One-sided voltage noise density of a resistor, V²/Hz. T = 0 gives the
/// zero-point value 2Rhf.
pub fn noise_psd(r: f64, f: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) || !(f > 0.0) || !(t >= 0.0) || !r.is_finite() || !f.is_finite() || !t.is_finite() {
        return Err(Error::domain(format!(
            "noise density needs R > 0, f > 0, T >= 0; got R = {r}, f = {f}, T = {t}"
        )));
    }
    let zero_point = 2.0 * r * PLANCK * f;
    if t == 0.0 {
        return Ok(zero_point);
    }
    let x = PLANCK * f / (2.0 * BOLTZMANN * t);
    Ok(zero_point / x.tanh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    SeriesVoltage,
    ParallelCurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceLocation {
    SourceResistor,
    TankResistor,
    Junction1,
    Junction2,
}

impl SourceLocation {
    pub const ALL: [SourceLocation; 4] = [
        SourceLocation::SourceResistor,
        SourceLocation::TankResistor,
        SourceLocation::Junction1,
        SourceLocation::Junction2,
    ];

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub resistance: f64,
    pub kind: SourceKind,
    pub location: SourceLocation,
    /// V²/Hz for voltage sources, A²/Hz for current sources.
    pub psd: f64,
}

/// The four sources of the amplifier at temperature `t`, evaluated at `f`.
pub fn amplifier_sources(c: &InputCircuit, p: &SquidParams, f: f64, t: f64) -> Result<[NoiseSource; 4]> {
    let junction = noise_psd(p.r_j, f, t)? / (p.r_j * p.r_j);
    Ok([
        NoiseSource {
            resistance: c.r1,
            kind: SourceKind::SeriesVoltage,
            location: SourceLocation::SourceResistor,
            psd: noise_psd(c.r1, f, t)?,
        },
        NoiseSource {
            resistance: c.r,
            kind: SourceKind::SeriesVoltage,
            location: SourceLocation::TankResistor,
            psd: noise_psd(c.r, f, t)?,
        },
        NoiseSource {
            resistance: p.r_j,
            kind: SourceKind::ParallelCurrent,
            location: SourceLocation::Junction1,
            psd: junction,
        },
        NoiseSource {
            resistance: p.r_j,
            kind: SourceKind::ParallelCurrent,
            location: SourceLocation::Junction2,
            psd: junction,
        },
    ])
}

/// Generator for one source in one realization. Streams are disjoint for
/// distinct (realization, source) pairs under the same base seed.
pub fn source_rng(base_seed: u64, realization: u64, source: SourceLocation) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((realization << 2) | source.index());
    rng
}

fn fill_gaussian(rng: &mut ChaCha8Rng, sigma: f64, out: &mut [f64]) {
    for x in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = sigma * z;
    }
}

/// Piecewise-constant white noise: one Gaussian value per step with variance
/// psd/(2·dt), so that its one-sided density is `psd` well below 1/dt.
pub fn sample_noise(psd: f64, dt: f64, n_steps: usize, seed: u64) -> Result<TimeSeries<f64>> {
    if !(psd >= 0.0) || !psd.is_finite() {
        return Err(Error::domain("noise density must be finite and non-negative"));
    }
    let mut v = vec![0.0; n_steps];
    fill_gaussian(&mut ChaCha8Rng::seed_from_u64(seed), (psd / (2.0 * dt)).sqrt(), &mut v);
    TimeSeries::new(0.0, dt, v)
}

/// One-sided periodogram (2/T)·|∫ s(t) e^{2πift} dt|² over the whole-period window.
pub fn periodogram(s: &TimeSeries<f64>, f: f64) -> Result<f64> {
    Ok(fourier_line(s, f)?.periodogram())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrumResult {
    /// Mean one-sided density at the evaluation frequency, V²/Hz.
    pub s_out: f64,
    /// Standard error of the mean; absent with fewer than two realizations.
    pub standard_error: Option<f64>,
    pub per_realization: Vec<f64>,
}

impl NoiseSpectrumResult {
    /// Mean and standard error of per-realization periodogram values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("at least one realization is required"));
        }
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let standard_error = (values.len() >= 2).then(|| {
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Ok(NoiseSpectrumResult {
            s_out: m,
            standard_error,
            per_realization: values,
        })
    }

    /// Lag-1 autocorrelation of the per-realization values.
    pub fn lag1_autocorrelation(&self) -> f64 {
        let v = &self.per_realization;
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
        if var == 0.0 {
            return 0.0;
        }
        v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / var
    }
}

/// Periodogram average of independent white records drawn straight from a
/// source, for calibrating the estimator.
pub fn estimate_source_psd(
    psd: f64,
    dt: f64,
    n_steps: usize,
    f: f64,
    realizations: usize,
    base_seed: u64,
) -> Result<NoiseSpectrumResult> {
    let values = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = source_rng(base_seed, r, SourceLocation::SourceResistor);
            let mut v = vec![0.0; n_steps];
            fill_gaussian(&mut rng, (psd / (2.0 * dt)).sqrt(), &mut v);
            periodogram(&TimeSeries::new(0.0, dt, v)?, f)
        })
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrumResult::from_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRunConfig {
    /// Bath temperature, K.
    pub temperature: f64,
    /// Evaluation frequency, Hz.
    pub f_eval: f64,
    pub realizations: usize,
    /// Record length per realization, s (the first quarter is discarded).
    pub t_i: f64,
    pub dt: f64,
    pub base_seed: u64,
    /// Multiplies every source density.
    pub psd_scale: f64,
    /// Per-source switches in [`SourceLocation::ALL`] order.
    pub enabled: [bool; 4],
}

impl Default for NoiseRunConfig {
    fn default() -> Self {
        NoiseRunConfig {
            temperature: 0.015,
            f_eval: 6.19e9,
            realizations: 300,
            t_i: 40e-9,
            dt: 0.05e-12,
            base_seed: 20_240_601,
            psd_scale: 1.0,
            enabled: [true; 4],
        }
    }
}

impl NoiseRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("at least one realization is required"));
        }
        if !(self.f_eval > 0.0) || !(self.dt > 0.0) || !(self.temperature >= 0.0) || !(self.psd_scale >= 0.0) {
            return Err(Error::config("noise run needs f_eval > 0, dt > 0, T >= 0, psd_scale >= 0"));
        }
        if !(self.t_i >= 100.0 / self.f_eval) {
            return Err(Error::config(format!(
                "record of {:e} s is shorter than 100 periods of {:e} Hz",
                self.t_i, self.f_eval
            )));
        }
        Ok(())
    }
}

/// Fourier component of one full-chain record at `f_eval`, together with the window length.
fn chain_component(
    p: &SquidParams,
    op: &OperatingPoint,
    c: &InputCircuit,
    cfg: &NoiseRunConfig,
    sigmas: &[f64; 4],
    realization: Option<u64>,
) -> Result<(num_complex::Complex64, f64)> {
    let steps = step_count(cfg.dt, cfg.t_i)?;
    let mut draws: [Vec<f64>; 4] = Default::default();
    for (k, loc) in SourceLocation::ALL.iter().enumerate() {
        draws[k] = vec![0.0; steps];
        if let Some(r) = realization {
            if sigmas[k] > 0.0 {
                fill_gaussian(&mut source_rng(cfg.base_seed, r, *loc), sigmas[k], &mut draws[k]);
            }
        }
    }

    // input network on half steps, source values held over each full step
    let mut flux = Vec::with_capacity(2 * steps + 1);
    let mut s = NetworkState::default();
    flux.push(s.flux(c));
    let h = 0.5 * cfg.dt;
    for k in 0..steps {
        let (e1, er) = (draws[0][k], draws[1][k]);
        for _ in 0..2 {
            let d = |x: &NetworkState| network_derivative(c, 0.0, e1, er, x);
            let add = |x: &NetworkState, y: &NetworkState, a: f64| NetworkState {
                q1: x.q1 + a * y.q1,
                v_c: x.v_c + a * y.v_c,
                i_l: x.i_l + a * y.i_l,
            };
            let k1 = d(&s);
            let k2 = d(&add(&s, &k1, 0.5 * h));
            let k3 = d(&add(&s, &k2, 0.5 * h));
            let k4 = d(&add(&s, &k3, h));
            s.q1 += h / 6.0 * (k1.q1 + 2.0 * k2.q1 + 2.0 * k3.q1 + k4.q1);
            s.v_c += h / 6.0 * (k1.v_c + 2.0 * k2.v_c + 2.0 * k3.v_c + k4.v_c);
            s.i_l += h / 6.0 * (k1.i_l + 2.0 * k2.i_l + 2.0 * k3.i_l + k4.i_l);
            flux.push(s.flux(c));
        }
    }

    let mut v = vec![0.0; steps + 1];
    let noise = JunctionNoise {
        n1: &draws[2],
        n2: &draws[3],
    };
    run_squid(p, op, &FluxWaveform::HalfStep(flux), Some(noise), cfg.dt, steps, |k, st| {
        v[k] = st.output_voltage()
    })?;
    let tail = steady_part(&TimeSeries::new(0.0, cfg.dt, v)?)?;
    let line = fourier_line(&tail, cfg.f_eval)?;
    Ok((line.component, line.window))
}

/// Output noise density of the full amplifier chain with zero input signal.
///
/// Each realization draws all four sources from its own streams, drives the
/// input network (which turns the two series sources into flux) and the
/// SQUID, and forms the periodogram of the output at `f_eval`. The
/// component of the noise-free run is subtracted first, so only the
/// fluctuating part of the output is counted.
pub fn estimate_output_psd(
    p: &SquidParams,
    op: &OperatingPoint,
    c: &InputCircuit,
    cfg: &NoiseRunConfig,
) -> Result<NoiseSpectrumResult> {
    cfg.validate()?;
    p.validate()?;
    c.validate()?;
    let sources = amplifier_sources(c, p, cfg.f_eval, cfg.temperature)?;
    let mut sigmas = [0.0; 4];
    for k in 0..4 {
        if cfg.enabled[k] {
            sigmas[k] = (cfg.psd_scale * sources[k].psd / (2.0 * cfg.dt)).sqrt();
        }
    }
    let (reference, _) = chain_component(p, op, c, cfg, &sigmas, None)?;
    let values = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (z, window) = chain_component(p, op, c, cfg, &sigmas, Some(r))?;
            Ok(2.0 / window * (z - reference).norm_sqr())
        })
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrumResult::from_values(values)
}

/// Noise temperature from the output density: the source temperature
/// increment for which G·2R₁hf·coth(hf/2k_B(T + T_n)) equals `s_msa`.
pub fn noise_temperature(s_msa: f64, gain: f64, r1: f64, t: f64, f: f64) -> Result<f64> {
    if !(s_msa > 0.0) || !(gain > 0.0) || !(r1 > 0.0) || !(f > 0.0) || !(t >= 0.0) {
        return Err(Error::domain("noise temperature needs positive S, G, R1, f and T >= 0"));
    }
    let y = s_msa / (2.0 * r1 * PLANCK * f * gain);
    if !(y > 1.0) {
        return Err(Error::Infeasible(format!(
            "output density is {y:.4} times the amplified zero-point floor; it must exceed 1"
        )));
    }
    let x = 0.5 * ((y + 1.0) / (y - 1.0)).ln();
    Ok(PLANCK * f / (2.0 * BOLTZMANN * x) - t)
}

/// Output density implied by a noise temperature (inverse of [`noise_temperature`]).
pub fn output_density(t_n: f64, gain: f64, r1: f64, t: f64, f: f64) -> Result<f64> {
    Ok(gain * noise_psd(r1, f, t + t_n)?)
}

/// Gain that makes a given (S, T_n) pair consistent.
pub fn implied_gain(s_msa: f64, t_n: f64, r1: f64, t: f64, f: f64) -> Result<f64> {
    Ok(s_msa / noise_psd(r1, f, t + t_n)?)
}

/// Cross-check of a quoted (S, G, T_n) triple against the noise-temperature
/// relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureCheck {
    pub s_msa: f64,
    pub gain: f64,
    pub quoted_t_n: f64,
    /// T_n implied by S and G.
    pub t_n: f64,
    /// Gain that would make S and the quoted T_n agree.
    pub implied_gain: f64,
    /// |t_n − quoted|/quoted.
    pub mismatch: f64,
    /// Mismatch at most `tolerance`.
    pub consistent: bool,
}

pub fn check_temperature(
    s_msa: f64,
    gain: f64,
    quoted_t_n: f64,
    r1: f64,
    t: f64,
    f: f64,
    tolerance: f64,
) -> Result<TemperatureCheck> {
    let t_n = noise_temperature(s_msa, gain, r1, t, f)?;
    let implied = implied_gain(s_msa, quoted_t_n, r1, t, f)?;
    let mismatch = ((t_n - quoted_t_n) / quoted_t_n).abs();
    Ok(TemperatureCheck {
        s_msa,
        gain,
        quoted_t_n,
        t_n,
        implied_gain: implied,
        mismatch,
        consistent: mismatch <= tolerance,
    })
}
