//! dc SQUID equations of motion, power gain and operating-point search.
//!
//! Each junction obeys the resistively and capacitively shunted model,
//!
//! ```text
//! φ₀C_J·δ̈₁ + (φ₀/R_J)·δ̇₁ = I/2 − J − I₀ sin δ₁ + n₁(t)
//! φ₀C_J·δ̈₂ + (φ₀/R_J)·δ̇₂ = I/2 + J − I₀ sin δ₂ + n₂(t)
//! J = [φ₀(δ₁ − δ₂) − Φ_dc − Φ_in(t)] / L_J
//! ```
//!
//! and the output voltage is V = (φ₀/2)(δ̇₁ + δ̇₂). The circulating current J
//! is eliminated algebraically rather than integrated.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::input_circuit::{flux_drive, HarmonicFlux, InputCircuit};
use crate::physcore::{db_from_power_ratio, fourier_line, FreqSeries, TimeSeries, FLUX_QUANTUM, PHI0_REDUCED};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidParams {
    /// Junction critical current, A.
    pub i0: f64,
    /// Junction shunt resistance, Ω.
    pub r_j: f64,
    /// Junction capacitance, F.
    pub c_j: f64,
    /// Loop inductance, H.
    pub l_j: f64,
}

impl Default for SquidParams {
    fn default() -> Self {
        SquidParams {
            i0: 8e-6,
            r_j: 20.0,
            c_j: 52.7e-15,
            l_j: 0.129e-9,
        }
    }
}

impl SquidParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("I0", self.i0), ("R_J", self.r_j), ("C_J", self.c_j), ("L_J", self.l_j)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Stewart–McCumber parameter I₀R_J²C_J/φ₀. Values ≥ 1 mean hysteretic junctions.
    pub fn beta_c(&self) -> f64 {
        self.i0 * self.r_j * self.r_j * self.c_j / PHI0_REDUCED
    }

    /// Screening parameter 2L_J·I₀/Φ₀.
    pub fn beta_l(&self) -> f64 {
        2.0 * self.l_j * self.i0 / FLUX_QUANTUM
    }

    /// Junction plasma frequency sqrt(I₀/(φ₀C_J))/2π, Hz.
    pub fn plasma_frequency(&self) -> f64 {
        (self.i0 / (PHI0_REDUCED * self.c_j)).sqrt() / (2.0 * PI)
    }

    /// Largest admissible step, 1/(50·f_p).
    pub fn max_dt(&self) -> f64 {
        1.0 / (50.0 * self.plasma_frequency())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Bias current, A.
    pub i_bias: f64,
    /// Static flux through the loop, Wb.
    pub phi_dc: f64,
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_bias >= 0.0) || !self.i_bias.is_finite() || !self.phi_dc.is_finite() {
            return Err(Error::config("bias current must be non-negative and both values finite"));
        }
        Ok(())
    }
}

/// Flux applied on top of Φ_dc.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxWaveform {
    Zero,
    Harmonic(HarmonicFlux),
    /// Samples at every half step, starting at t = 0: `values[j]` is the flux
    /// at t = j·dt/2. Needs 2·steps + 1 samples.
    HalfStep(Vec<f64>),
}

impl FluxWaveform {
    fn half_step_at(&self, j: usize, dt: f64) -> f64 {
        match self {
            FluxWaveform::Zero => 0.0,
            FluxWaveform::Harmonic(h) => h.at(j as f64 * 0.5 * dt),
            FluxWaveform::HalfStep(v) => v[j],
        }
    }
}

/// Per-step junction noise currents, A, held constant across each step.
#[derive(Debug, Clone, Copy)]
pub struct JunctionNoise<'a> {
    pub n1: &'a [f64],
    pub n2: &'a [f64],
}

/// Phase state of both junctions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidState {
    pub delta1: f64,
    pub delta2: f64,
    pub ddelta1: f64,
    pub ddelta2: f64,
}

impl SquidState {
    /// Both junctions at rest with δ₁ = δ₂ = arcsin(min(I/2I₀, 1)) below the
    /// critical current, zero phases above it.
    pub fn initial(p: &SquidParams, op: &OperatingPoint) -> Self {
        let x = op.i_bias / (2.0 * p.i0);
        let d = if x < 1.0 { x.asin() } else { 0.0 };
        SquidState {
            delta1: d,
            delta2: d,
            ddelta1: 0.0,
            ddelta2: 0.0,
        }
    }

    /// Circulating current from the loop constraint, A.
    pub fn circulating_current(&self, p: &SquidParams, op: &OperatingPoint, flux_in: f64) -> f64 {
        (PHI0_REDUCED * (self.delta1 - self.delta2) - op.phi_dc - flux_in) / p.l_j
    }

    pub fn output_voltage(&self) -> f64 {
        0.5 * PHI0_REDUCED * (self.ddelta1 + self.ddelta2)
    }
}

struct Coeffs {
    inv_mass: f64,
    damping: f64,
    half_bias: f64,
    i0: f64,
    phi0_over_l: f64,
    offset_over_l: f64,
    inv_l: f64,
}

impl Coeffs {
    fn new(p: &SquidParams, op: &OperatingPoint) -> Self {
        Coeffs {
            inv_mass: 1.0 / (PHI0_REDUCED * p.c_j),
            damping: PHI0_REDUCED / p.r_j,
            half_bias: 0.5 * op.i_bias,
            i0: p.i0,
            phi0_over_l: PHI0_REDUCED / p.l_j,
            offset_over_l: op.phi_dc / p.l_j,
            inv_l: 1.0 / p.l_j,
        }
    }

    #[inline(always)]
    fn accel(&self, d1: f64, d2: f64, v1: f64, v2: f64, flux: f64, n1: f64, n2: f64) -> (f64, f64) {
        let j = self.phi0_over_l * (d1 - d2) - self.offset_over_l - flux * self.inv_l;
        let a1 = (self.half_bias - j - self.i0 * d1.sin() - self.damping * v1 + n1) * self.inv_mass;
        let a2 = (self.half_bias + j - self.i0 * d2.sin() - self.damping * v2 + n2) * self.inv_mass;
        (a1, a2)
    }
}

fn check_step(p: &SquidParams, dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > p.max_dt() * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "step {dt:e} s must lie in (0, {:e}] s = 1/(50 f_p)",
            p.max_dt()
        )));
    }
    Ok(())
}

/// Integrates `steps` RK4 steps of size `dt`, calling `observe(k, state)` for
/// every sample k = 0..=steps.
pub(crate) fn run_squid(
    p: &SquidParams,
    op: &OperatingPoint,
    flux: &FluxWaveform,
    noise: Option<JunctionNoise<'_>>,
    dt: f64,
    steps: usize,
    mut observe: impl FnMut(usize, &SquidState),
) -> Result<SquidState> {
    p.validate()?;
    op.validate()?;
    check_step(p, dt)?;
    if let FluxWaveform::HalfStep(v) = flux {
        if v.len() < 2 * steps + 1 {
            return Err(Error::config(format!(
                "sampled flux has {} values, {} needed",
                v.len(),
                2 * steps + 1
            )));
        }
    }
    if let Some(n) = noise {
        if n.n1.len() < steps || n.n2.len() < steps {
            return Err(Error::config("junction noise shorter than the run"));
        }
    }
    let c = Coeffs::new(p, op);
    let mut s = SquidState::initial(p, op);
    observe(0, &s);
    let h = dt;
    let hh = 0.5 * dt;
    let mut f0 = flux.half_step_at(0, dt);
    for k in 0..steps {
        let fm = flux.half_step_at(2 * k + 1, dt);
        let f1 = flux.half_step_at(2 * k + 2, dt);
        let (n1, n2) = match noise {
            Some(n) => (n.n1[k], n.n2[k]),
            None => (0.0, 0.0),
        };
        let (d1, d2, v1, v2) = (s.delta1, s.delta2, s.ddelta1, s.ddelta2);
        let (a1, a2) = c.accel(d1, d2, v1, v2, f0, n1, n2);
        let (bv1, bv2) = (v1 + hh * a1, v2 + hh * a2);
        let (b1, b2) = c.accel(d1 + hh * v1, d2 + hh * v2, bv1, bv2, fm, n1, n2);
        let (cv1, cv2) = (v1 + hh * b1, v2 + hh * b2);
        let (c1, c2) = c.accel(d1 + hh * bv1, d2 + hh * bv2, cv1, cv2, fm, n1, n2);
        let (ev1, ev2) = (v1 + h * c1, v2 + h * c2);
        let (e1, e2) = c.accel(d1 + h * cv1, d2 + h * cv2, ev1, ev2, f1, n1, n2);
        s.delta1 = d1 + h / 6.0 * (v1 + 2.0 * bv1 + 2.0 * cv1 + ev1);
        s.delta2 = d2 + h / 6.0 * (v2 + 2.0 * bv2 + 2.0 * cv2 + ev2);
        s.ddelta1 = v1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + e1);
        s.ddelta2 = v2 + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + e2);
        if !(s.delta1.is_finite() && s.delta2.is_finite() && s.ddelta1.is_finite() && s.ddelta2.is_finite()) {
            return Err(Error::NumericalBlowup {
                step: k + 1,
                time: (k + 1) as f64 * dt,
                what: "junction phases".into(),
            });
        }
        observe(k + 1, &s);
        f0 = f1;
    }
    Ok(s)
}

/// Number of steps of size `dt` covering `t_end`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::config(format!("end time must be positive, got {t_end}")));
    }
    Ok((t_end / dt).round().max(1.0) as usize)
}

/// Output voltage V(t) at every step from t = 0 to `t_end`.
pub fn integrate_squid(
    p: &SquidParams,
    op: &OperatingPoint,
    flux: &FluxWaveform,
    noise: Option<JunctionNoise<'_>>,
    dt: f64,
    t_end: f64,
) -> Result<TimeSeries<f64>> {
    let steps = step_count(dt, t_end)?;
    let mut v = vec![0.0; steps + 1];
    run_squid(p, op, flux, noise, dt, steps, |k, s| v[k] = s.output_voltage())?;
    TimeSeries::new(0.0, dt, v)
}

/// Duration discarded before spectral analysis: max(25 % of the run, 2 ns).
pub fn transient_skip(t_end: f64) -> f64 {
    (0.25 * t_end).max(2e-9)
}

/// The post-transient part of an output record.
pub fn steady_part(v: &TimeSeries<f64>) -> Result<TimeSeries<f64>> {
    let t_end = (v.len() - 1) as f64 * v.dt;
    let skip = transient_skip(t_end);
    if skip >= t_end {
        return Err(Error::Precondition(format!(
            "run of {t_end:e} s is shorter than the {skip:e} s transient skip"
        )));
    }
    v.tail_from((skip / v.dt).ceil() as usize)
}

pub fn mean(v: &TimeSeries<f64>) -> f64 {
    v.values.iter().sum::<f64>() / v.len() as f64
}

/// Settings shared by every gain evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSettings {
    /// Source amplitude, V.
    pub v_amp: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Run length, s.
    pub t_end: f64,
}

impl Default for GainSettings {
    fn default() -> Self {
        GainSettings {
            v_amp: 0.1e-6,
            dt: 0.05e-12,
            t_end: 40e-9,
        }
    }
}

/// A single gain evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    /// Frequency, Hz.
    pub frequency: f64,
    /// Power gain |V_out(f)/V|².
    pub gain: f64,
    /// Time-averaged output voltage over the analysis window, V.
    pub mean_voltage: f64,
}

impl GainPoint {
    /// Josephson frequency V̄/Φ₀, Hz.
    pub fn josephson_frequency(&self) -> f64 {
        self.mean_voltage / FLUX_QUANTUM
    }

    pub fn gain_db(&self) -> f64 {
        if self.gain > 0.0 {
            10.0 * self.gain.log10()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Power gain at `f` for a source `v_amp·cos(2πft)`.
///
/// The response is measured with the source at +V and at −V, and the
/// Fourier components are differenced: (F₊ − F₋)/2. Even-order responses,
/// including the SQUID's own oscillation leaking into the signal bin, cancel;
/// the odd (linear) response remains.
pub fn gain(p: &SquidParams, op: &OperatingPoint, c: &InputCircuit, f: f64, s: &GainSettings) -> Result<GainPoint> {
    if !(s.v_amp > 0.0) || !s.v_amp.is_finite() {
        return Err(Error::config("source amplitude must be positive"));
    }
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::domain(format!("frequency must be positive, got {f}")));
    }
    let skip = transient_skip(s.t_end);
    if s.t_end < skip + 50.0 / f {
        return Err(Error::Precondition(format!(
            "run of {:e} s must cover the {skip:e} s transient plus 50 periods",
            s.t_end
        )));
    }
    let omega = 2.0 * PI * f;
    let plus = flux_drive(c, Complex64::new(s.v_amp, 0.0), omega)?;
    let minus = HarmonicFlux {
        phasor: -plus.phasor,
        omega,
    };
    let mut lines = Vec::with_capacity(2);
    let mut means = 0.0;
    for flux in [plus, minus] {
        let v = integrate_squid(p, op, &FluxWaveform::Harmonic(flux), None, s.dt, s.t_end)?;
        let tail = steady_part(&v)?;
        means += 0.5 * mean(&tail);
        lines.push(fourier_line(&tail, f)?);
    }
    let odd = (lines[0].component - lines[1].component) * (0.5 * 2.0 / lines[0].window);
    Ok(GainPoint {
        frequency: f,
        gain: (odd.norm() / s.v_amp).powi(2),
        mean_voltage: means,
    })
}

/// Time-averaged output voltage without signal, V.
pub fn mean_voltage(p: &SquidParams, op: &OperatingPoint, dt: f64, t_end: f64) -> Result<f64> {
    let v = integrate_squid(p, op, &FluxWaveform::Zero, None, dt, t_end)?;
    Ok(mean(&steady_part(&v)?))
}

/// Gain over a frequency grid with its peak and −3 dB band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub curve: FreqSeries<f64>,
    /// Frequency of the interpolated maximum, Hz.
    pub peak_freq: f64,
    /// Largest gain on the grid.
    pub peak_gain: f64,
    /// Gain at the parabolic vertex through the three points around the maximum (in dB).
    pub peak_gain_interpolated: f64,
    pub lower_edge: Option<f64>,
    pub upper_edge: Option<f64>,
    /// Width of the −3 dB band, Hz; absent when the grid does not bracket it.
    pub bandwidth: Option<f64>,
    pub mean_voltages: Vec<f64>,
}

impl GainCurve {
    pub fn peak_gain_db(&self) -> f64 {
        10.0 * self.peak_gain.log10()
    }

    pub fn gains_db(&self) -> Vec<f64> {
        self.curve.values.iter().map(|&g| 10.0 * g.max(f64::MIN_POSITIVE).log10()).collect()
    }

    /// Peak, vertex and −3 dB crossings from a gain series.
    pub fn from_series(curve: FreqSeries<f64>, mean_voltages: Vec<f64>) -> Result<Self> {
        if curve.len() < 3 {
            return Err(Error::config("gain curve needs at least three frequencies"));
        }
        let f = &curve.frequencies;
        let db: Vec<f64> = curve
            .values
            .iter()
            .map(|&g| db_from_power_ratio(g))
            .collect::<Result<_>>()?;
        let k = (0..db.len()).fold(0, |best, i| if db[i] > db[best] { i } else { best });
        let peak_db = db[k];
        let (mut peak_freq, mut vertex_db) = (f[k], peak_db);
        if k > 0 && k + 1 < db.len() {
            // vertex of the parabola through three (possibly uneven) points
            let (x0, x1, x2) = (f[k - 1] - f[k], 0.0, f[k + 1] - f[k]);
            let (y0, y1, y2) = (db[k - 1], db[k], db[k + 1]);
            let d01 = (y1 - y0) / (x1 - x0);
            let d12 = (y2 - y1) / (x2 - x1);
            let a = (d12 - d01) / (x2 - x0);
            let b = d01 - a * (x0 + x1);
            if a < 0.0 {
                let xv = -b / (2.0 * a);
                if xv > x0 && xv < x2 {
                    peak_freq = f[k] + xv;
                    vertex_db = y1 + b * xv + a * xv * xv;
                }
            }
        }
        let level = peak_db - 3.0;
        let crossing = |i: usize, j: usize| f[i] + (level - db[i]) / (db[j] - db[i]) * (f[j] - f[i]);
        let lower_edge = (0..k).rev().find(|&i| db[i] < level).map(|i| crossing(i, i + 1));
        let upper_edge = (k + 1..db.len()).find(|&i| db[i] < level).map(|i| crossing(i - 1, i));
        let bandwidth = match (lower_edge, upper_edge) {
            (Some(lo), Some(hi)) => Some(hi - lo),
            _ => None,
        };
        let peak_gain = curve.values[k];
        Ok(GainCurve {
            curve,
            peak_freq,
            peak_gain,
            peak_gain_interpolated: 10f64.powf(vertex_db / 10.0),
            lower_edge,
            upper_edge,
            bandwidth,
            mean_voltages,
        })
    }
}

/// Gain at every grid frequency, evaluated in parallel and merged in grid order.
pub fn gain_curve(
    p: &SquidParams,
    op: &OperatingPoint,
    c: &InputCircuit,
    f_grid: &[f64],
    s: &GainSettings,
) -> Result<GainCurve> {
    if f_grid.len() < 3 {
        return Err(Error::config("gain sweep needs at least three frequencies"));
    }
    let points: Vec<GainPoint> = f_grid
        .par_iter()
        .map(|&f| gain(p, op, c, f, s))
        .collect::<Result<_>>()?;
    let curve = FreqSeries::new(f_grid.to_vec(), points.iter().map(|g| g.gain).collect())?;
    GainCurve::from_series(curve, points.iter().map(|g| g.mean_voltage).collect())
}

/// Evenly spaced frequency grid including both ends.
pub fn linear_grid(f_min: f64, f_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(f_max > f_min) || !(f_min > 0.0) {
        return Err(Error::config("frequency grid needs 0 < f_min < f_max and at least two points"));
    }
    Ok((0..points)
        .map(|k| f_min + (f_max - f_min) * k as f64 / (points - 1) as f64)
        .collect())
}

/// Search box and refinement schedule for [`tune_operating_point`]. Bias
/// values are in units of I₀, flux values in units of Φ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub bias_min: f64,
    pub bias_max: f64,
    pub bias_points: usize,
    pub flux_min: f64,
    pub flux_max: f64,
    pub flux_points: usize,
    /// Number of step-halving refinements around the best point.
    pub refine_levels: usize,
    /// Admissible points need V̄/Φ₀ ≥ ratio·f_target.
    pub josephson_ratio: f64,
    /// Maximum number of one-step box extensions.
    pub max_widen: usize,
    /// Bias may not be widened below this value.
    pub bias_floor: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            bias_min: 1.8,
            bias_max: 2.6,
            bias_points: 9,
            flux_min: 0.0,
            flux_max: 0.5,
            flux_points: 11,
            refine_levels: 3,
            josephson_ratio: 3.0,
            max_widen: 8,
            bias_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    /// Bias in units of I₀.
    pub bias: f64,
    /// Static flux in units of Φ₀.
    pub flux: f64,
    pub gain: f64,
    pub mean_voltage: f64,
    pub admissible: bool,
}

/// Every point evaluated during tuning, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuningSurface {
    pub f_target: f64,
    pub points: Vec<SurfacePoint>,
    /// Final search box (bias_min, bias_max, flux_min, flux_max).
    pub search_box: [f64; 4],
    /// Box extensions made because the optimum sat on an edge.
    pub widen_events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub op: OperatingPoint,
    pub gain: GainPoint,
    pub surface: TuningSurface,
}

fn evaluate_points(
    p: &SquidParams,
    c: &InputCircuit,
    f: f64,
    s: &GainSettings,
    ratio: f64,
    coords: &[(f64, f64)],
) -> Result<Vec<SurfacePoint>> {
    coords
        .par_iter()
        .map(|&(bias, flux)| {
            let op = OperatingPoint {
                i_bias: bias * p.i0,
                phi_dc: flux * FLUX_QUANTUM,
            };
            let g = gain(p, &op, c, f, s)?;
            Ok(SurfacePoint {
                bias,
                flux,
                gain: g.gain,
                mean_voltage: g.mean_voltage,
                admissible: g.josephson_frequency() >= ratio * f,
            })
        })
        .collect()
}

fn best_admissible(points: &[SurfacePoint]) -> Option<SurfacePoint> {
    points
        .iter()
        .filter(|q| q.admissible && q.gain.is_finite())
        .fold(None, |best: Option<SurfacePoint>, q| match best {
            Some(b) if b.gain >= q.gain => Some(b),
            _ => Some(*q),
        })
}

fn contains(points: &[SurfacePoint], bias: f64, flux: f64) -> bool {
    points
        .iter()
        .any(|q| (q.bias - bias).abs() < 1e-9 && (q.flux - flux).abs() < 1e-9)
}

/// Coarse-to-fine search for the bias current and static flux maximising
/// the gain at `f_target`.
///
/// Only points whose Josephson frequency is at least `josephson_ratio·f_target`
/// are admissible; closer to the critical current the oscillation locks to
/// low harmonics of the signal and the measured gain stops describing linear
/// amplification. If the best point sits on an edge of the box the box is
/// extended by one coarse step on that side and the event recorded.
pub fn tune_operating_point(
    p: &SquidParams,
    c: &InputCircuit,
    f_target: f64,
    s: &GainSettings,
    cfg: &TuneConfig,
) -> Result<TuneResult> {
    p.validate()?;
    c.validate()?;
    if cfg.bias_points < 2 || cfg.flux_points < 2 || !(cfg.bias_max > cfg.bias_min) || !(cfg.flux_max > cfg.flux_min) {
        return Err(Error::config("tuning box needs at least two points per axis and a positive extent"));
    }
    let db = (cfg.bias_max - cfg.bias_min) / (cfg.bias_points - 1) as f64;
    let dflux = (cfg.flux_max - cfg.flux_min) / (cfg.flux_points - 1) as f64;
    let axis = |lo: f64, step: f64, n: usize| -> Vec<f64> { (0..n).map(|k| lo + step * k as f64).collect() };
    let mut biases = axis(cfg.bias_min, db, cfg.bias_points);
    let mut fluxes = axis(cfg.flux_min, dflux, cfg.flux_points);
    let coords: Vec<(f64, f64)> = biases
        .iter()
        .flat_map(|&b| fluxes.iter().map(move |&x| (b, x)))
        .collect();
    let mut surface = TuningSurface {
        f_target,
        points: evaluate_points(p, c, f_target, s, cfg.josephson_ratio, &coords)?,
        ..Default::default()
    };

    let flux_lo_limit = cfg.flux_min - 0.5;
    let flux_hi_limit = cfg.flux_max + 0.5;
    for _ in 0..cfg.max_widen {
        let Some(best) = best_admissible(&surface.points) else { break };
        let (b_lo, b_hi) = (biases[0], *biases.last().unwrap());
        let (x_lo, x_hi) = (fluxes[0], *fluxes.last().unwrap());
        let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
        let new_coords: Vec<(f64, f64)>;
        let event;
        if near(best.bias, b_lo) && b_lo - db >= cfg.bias_floor - 1e-9 {
            let nb = b_lo - db;
            biases.insert(0, nb);
            new_coords = fluxes.iter().map(|&x| (nb, x)).collect();
            event = format!("bias lower edge widened from {b_lo:.4} to {nb:.4} I0");
        } else if near(best.bias, b_hi) {
            let nb = b_hi + db;
            biases.push(nb);
            new_coords = fluxes.iter().map(|&x| (nb, x)).collect();
            event = format!("bias upper edge widened from {b_hi:.4} to {nb:.4} I0");
        } else if near(best.flux, x_lo) && x_lo - dflux >= flux_lo_limit - 1e-9 {
            let nx = x_lo - dflux;
            fluxes.insert(0, nx);
            new_coords = biases.iter().map(|&b| (b, nx)).collect();
            event = format!("flux lower edge widened from {x_lo:.4} to {nx:.4} Phi0");
        } else if near(best.flux, x_hi) && x_hi + dflux <= flux_hi_limit + 1e-9 {
            let nx = x_hi + dflux;
            fluxes.push(nx);
            new_coords = biases.iter().map(|&b| (b, nx)).collect();
            event = format!("flux upper edge widened from {x_hi:.4} to {nx:.4} Phi0");
        } else {
            break;
        }
        surface.widen_events.push(event);
        let mut extra = evaluate_points(p, c, f_target, s, cfg.josephson_ratio, &new_coords)?;
        surface.points.append(&mut extra);
    }
    surface.search_box = [biases[0], *biases.last().unwrap(), fluxes[0], *fluxes.last().unwrap()];

    let Some(mut best) = best_admissible(&surface.points) else {
        return Err(Error::Tuning {
            message: format!(
                "no sweep point has a Josephson frequency of at least {} x {:e} Hz",
                cfg.josephson_ratio, f_target
            ),
            surface: Box::new(surface),
        });
    };
    let (mut step_b, mut step_x) = (db, dflux);
    for _ in 0..cfg.refine_levels {
        step_b *= 0.5;
        step_x *= 0.5;
        let stencil: Vec<(f64, f64)> = [-1.0, 0.0, 1.0]
            .iter()
            .flat_map(|&i| [-1.0, 0.0, 1.0].iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| i != 0.0 || j != 0.0)
            .map(|(i, j)| (best.bias + i * step_b, best.flux + j * step_x))
            .filter(|&(b, x)| b >= 0.0 && !contains(&surface.points, b, x))
            .collect();
        let mut extra = evaluate_points(p, c, f_target, s, cfg.josephson_ratio, &stencil)?;
        surface.points.append(&mut extra);
        best = best_admissible(&surface.points).expect("an admissible point already exists");
    }

    if !(best.gain >= 1.0) {
        return Err(Error::Tuning {
            message: format!("best admissible gain {:.3e} is below unity", best.gain),
            surface: Box::new(surface),
        });
    }
    let op = OperatingPoint {
        i_bias: best.bias * p.i0,
        phi_dc: best.flux * FLUX_QUANTUM,
    };
    Ok(TuneResult {
        op,
        gain: GainPoint {
            frequency: f_target,
            gain: best.gain,
            mean_voltage: best.mean_voltage,
        },
        surface,
    })
}
