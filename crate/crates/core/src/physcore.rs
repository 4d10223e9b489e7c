//! Physical constants, sampled series and the rectangular-rule Fourier
//! component shared by every stage of the readout chain.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced flux quantum ħ/2e, Wb.
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);
/// Flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Complex amplitude. The unit (dimensionless, V, A, Ω) is carried by context.
pub type ComplexAmp = Complex64;

/// The constant set as a value, for callers that want to pass it around.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub h: f64,
    pub hbar: f64,
    pub e_charge: f64,
    pub k_b: f64,
    pub phi0_reduced: f64,
    pub flux_quantum: f64,
}

impl Constants {
    pub const SI: Constants = Constants {
        h: PLANCK,
        hbar: HBAR,
        e_charge: ELEMENTARY_CHARGE,
        k_b: BOLTZMANN,
        phi0_reduced: PHI0_REDUCED,
        flux_quantum: FLUX_QUANTUM,
    };
}

impl Default for Constants {
    fn default() -> Self {
        Constants::SI
    }
}

pub(crate) fn ensure_finite(z: ComplexAmp, what: &str) -> Result<ComplexAmp> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::domain(format!("{what} is not finite")))
    }
}

/// Uniformly sampled series starting at `t0` with spacing `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(t0: f64, dt: f64, values: Vec<T>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::config("time series needs at least one sample"));
        }
        Ok(TimeSeries { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn last(&self) -> &T {
        self.values.last().expect("non-empty by construction")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> + '_ {
        self.values.iter().enumerate().map(|(k, v)| (self.time(k), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> TimeSeries<U> {
        TimeSeries {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(f).collect(),
        }
    }

    /// The samples from index `start` on, keeping absolute time.
    pub fn tail_from(&self, start: usize) -> Result<TimeSeries<T>>
    where
        T: Clone,
    {
        if start >= self.values.len() {
            return Err(Error::config("tail start beyond end of series"));
        }
        TimeSeries::new(self.time(start), self.dt, self.values[start..].to_vec())
    }
}

/// A series on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSeries<T> {
    pub frequencies: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> FreqSeries<T> {
    pub fn new(frequencies: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::config("frequency grid and values differ in length"));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("frequency grid must be strictly increasing"));
        }
        Ok(FreqSeries {
            frequencies,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `10·log10(g)`.
pub fn db_from_power_ratio(g: f64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::domain(format!("power ratio must be positive, got {g}")));
    }
    Ok(10.0 * g.log10())
}

pub fn power_ratio_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A Fourier component together with the length of the window it was
/// integrated over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    /// `∫ s(t)·exp(+2πi f t) dt`, in value-unit·s.
    pub component: ComplexAmp,
    /// Window length actually used, s.
    pub window: f64,
    /// Index of the first sample inside the window.
    pub first_sample: usize,
}

impl SpectralLine {
    /// Complex amplitude of the line: a pure `A·cos(2πft + φ)` returns `A·e^{-iφ}`.
    pub fn amplitude(&self) -> ComplexAmp {
        self.component * (2.0 / self.window)
    }

    /// One-sided periodogram value `(2/T)·|V(f)|²`.
    pub fn periodogram(&self) -> f64 {
        2.0 / self.window * self.component.norm_sqr()
    }
}

/// Rectangular-rule Fourier component over the largest whole number of
/// periods of `f` that fits in the series. Leftover samples are discarded
/// from the start of the record.
pub fn fourier_line(s: &TimeSeries<f64>, f: f64) -> Result<SpectralLine> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::domain(format!("frequency must be positive, got {f}")));
    }
    let nyquist = 0.5 / s.dt;
    if f >= nyquist {
        return Err(Error::Precondition(format!(
            "frequency {f:e} Hz is not below the Nyquist frequency {nyquist:e} Hz"
        )));
    }
    let duration = s.len() as f64 * s.dt;
    let periods = (duration * f * (1.0 + 1e-12)).floor();
    if periods < 10.0 {
        return Err(Error::Precondition(format!(
            "record of {duration:e} s spans {:.2} periods of {f:e} Hz; at least 10 required",
            duration * f
        )));
    }
    let keep = ((periods / f) / s.dt).round() as usize;
    let keep = keep.min(s.len());
    let first = s.len() - keep;
    let omega = 2.0 * PI * f;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &v) in s.values.iter().enumerate().skip(first) {
        // phase reduced to one period keeps the argument small for long records
        let phase = omega * s.t0 + 2.0 * PI * ((f * s.dt * k as f64).fract());
        let (sin, cos) = phase.sin_cos();
        acc += Complex64::new(v * cos, v * sin);
    }
    Ok(SpectralLine {
        component: acc * s.dt,
        window: keep as f64 * s.dt,
        first_sample: first,
    })
}

/// `∫ s(t)·exp(+2πi f t) dt` over the whole-period window (see [`fourier_line`]).
pub fn fourier_component(s: &TimeSeries<f64>, f: f64) -> Result<ComplexAmp> {
    fourier_line(s, f).map(|line| line.component)
}
