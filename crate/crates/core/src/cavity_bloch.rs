//! Driven resonator dispersively coupled to a decaying qubit, in the frame
//! rotating at the drive frequency.
//!
//! The tracked moments are ⟨a⟩, ⟨σᶻ⟩, ⟨aσᶻ⟩ and the photon number ⟨n⟩:
//!
//! ```text
//! d⟨a⟩/dt   = −iΔ⟨a⟩ − iχ⟨aσᶻ⟩ − iε − (κ/2)⟨a⟩
//! d⟨σᶻ⟩/dt  = −γ₁(1 + ⟨σᶻ⟩)
//! d⟨aσᶻ⟩/dt = −iΔ⟨aσᶻ⟩ − iχ⟨a⟩ − iε⟨σᶻ⟩ − γ₁⟨a⟩ − (γ₁ + κ/2)⟨aσᶻ⟩
//! d⟨n⟩/dt   = −2ε·Im⟨a⟩ − κ⟨n⟩
//! ```
//!
//! Δ is the resonator-minus-drive detuning (rad/s).

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::physcore::{ComplexAmp, TimeSeries, PLANCK};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Resonator, coupling and drive constants. Rates are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Bare resonator frequency, Hz.
    pub f_r: f64,
    /// Dispersive shift χ, rad/s.
    pub chi: f64,
    /// Resonator energy decay rate κ, rad/s.
    pub kappa: f64,
    /// Qubit relaxation rate 1/T₁, 1/s. Zero means no relaxation.
    pub gamma1: f64,
    /// Drive amplitude ε, rad/s.
    pub eps_m: f64,
    /// Line impedance, Ω.
    pub z_line: f64,
    /// Resonator-minus-drive detuning Δ, rad/s.
    pub delta_m: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        let kappa = 2.0 * PI * 1.7e6;
        let chi = 2.0 * PI * 0.7e6;
        ReadoutParams {
            f_r: 6.19e9,
            chi,
            kappa,
            gamma1: 0.0,
            eps_m: kappa / 2.0,
            z_line: 50.0,
            delta_m: -chi,
        }
    }
}

impl ReadoutParams {
    /// Parameters with the drive tuned to Δ = −χ and unit-photon drive ε = κ/2.
    pub fn new(f_r: f64, chi: f64, kappa: f64, gamma1: f64, z_line: f64) -> Result<Self> {
        let p = ReadoutParams {
            f_r,
            chi,
            kappa,
            gamma1,
            eps_m: kappa / 2.0,
            z_line,
            delta_m: -chi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.f_r, self.chi, self.kappa, self.gamma1, self.eps_m, self.z_line, self.delta_m]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("readout parameters must be finite"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::config("kappa must be positive"));
        }
        if !(self.f_r > 0.0) {
            return Err(Error::config("resonator frequency must be positive"));
        }
        if !(self.z_line > 0.0) {
            return Err(Error::config("line impedance must be positive"));
        }
        if self.gamma1 < 0.0 {
            return Err(Error::config("qubit decay rate must be non-negative"));
        }
        if self.eps_m < 0.0 {
            return Err(Error::config("drive amplitude must be non-negative"));
        }
        Ok(())
    }

    /// Sets γ₁ = 1/T₁; `None` disables relaxation.
    pub fn with_t1(mut self, t1: Option<f64>) -> Result<Self> {
        self.gamma1 = match t1 {
            None => 0.0,
            Some(t) if t > 0.0 && t.is_finite() => 1.0 / t,
            Some(t) => return Err(Error::config(format!("T1 must be positive, got {t}"))),
        };
        Ok(self)
    }

    /// Drive frequency f_m = f_r − Δ/2π, Hz.
    pub fn f_m(&self) -> f64 {
        self.f_r - self.delta_m / (2.0 * PI)
    }

    /// Default integration step, 10⁻³/κ.
    pub fn default_dt(&self) -> f64 {
        1e-3 / self.kappa
    }

    /// Largest admissible integration step.
    pub fn max_dt(&self) -> f64 {
        0.01 / self.kappa.max(self.gamma1)
    }
}

/// The moment vector ⟨a⟩, ⟨σᶻ⟩, ⟨aσᶻ⟩, ⟨n⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityBlochState {
    pub a: ComplexAmp,
    pub sz: f64,
    pub asz: ComplexAmp,
    pub n: f64,
}

impl CavityBlochState {
    /// Empty resonator with the qubit in a definite state `sz = ±1`.
    pub fn empty(sz: f64) -> Self {
        CavityBlochState {
            a: Complex64::new(0.0, 0.0),
            sz,
            asz: Complex64::new(0.0, 0.0),
            n: 0.0,
        }
    }

    pub fn excited() -> Self {
        Self::empty(1.0)
    }

    pub fn ground() -> Self {
        Self::empty(-1.0)
    }

    fn validate(&self) -> Result<()> {
        let tol = 1e-9;
        if !(self.sz.abs() <= 1.0 + tol) {
            return Err(Error::config(format!("sz = {} outside [-1, 1]", self.sz)));
        }
        if !(self.n >= -tol) {
            return Err(Error::config(format!("photon number {} is negative", self.n)));
        }
        if ![self.a.re, self.a.im, self.asz.re, self.asz.im, self.n].iter().all(|v| v.is_finite()) {
            return Err(Error::config("initial state is not finite"));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        [self.a.re, self.a.im, self.sz, self.asz.re, self.asz.im, self.n]
            .iter()
            .all(|v| v.is_finite())
    }
}

impl Add for CavityBlochState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        CavityBlochState {
            a: self.a + o.a,
            sz: self.sz + o.sz,
            asz: self.asz + o.asz,
            n: self.n + o.n,
        }
    }
}

impl Mul<f64> for CavityBlochState {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        CavityBlochState {
            a: self.a * k,
            sz: self.sz * k,
            asz: self.asz * k,
            n: self.n * k,
        }
    }
}

/// Rectangular drive envelope: `amplitude` for `t_on ≤ t < t_off`, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    pub t_on: f64,
    pub t_off: f64,
    pub amplitude: f64,
}

impl DrivePulse {
    pub fn new(t_on: f64, t_off: f64, amplitude: f64) -> Result<Self> {
        if !(t_on >= 0.0) || !(t_off > t_on) {
            return Err(Error::config(format!("pulse needs 0 <= t_on < t_off, got [{t_on}, {t_off})")));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::config("pulse amplitude must be finite and non-negative"));
        }
        Ok(DrivePulse {
            t_on,
            t_off,
            amplitude,
        })
    }

    /// Switched on at t = 0 and never off.
    pub fn step(amplitude: f64) -> Self {
        DrivePulse {
            t_on: 0.0,
            t_off: f64::INFINITY,
            amplitude,
        }
    }

    pub fn off() -> Self {
        Self::step(0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        if t >= self.t_on && t < self.t_off {
            self.amplitude
        } else {
            0.0
        }
    }
}

/// Right-hand side of the moment equations at drive amplitude `eps`.
pub fn derivative(p: &ReadoutParams, eps: f64, s: &CavityBlochState) -> CavityBlochState {
    let half_k = 0.5 * p.kappa;
    let g = p.gamma1;
    let a = -I * p.delta_m * s.a - I * p.chi * s.asz - I * eps - half_k * s.a;
    let asz = -I * p.delta_m * s.asz - I * p.chi * s.a - I * eps * s.sz - g * s.a - (g + half_k) * s.asz;
    CavityBlochState {
        a,
        sz: -g * (1.0 + s.sz),
        asz,
        n: -2.0 * eps * s.a.im - p.kappa * s.n,
    }
}

/// Stationary ⟨a⟩ with the qubit frozen in `sz = ±1` (no relaxation):
/// ⟨a⟩ = −iε / (iΔ + iχ·sz + κ/2). At Δ = −χ this is −2iε/κ for the
/// excited state and −2iε/(κ − 4iχ) for the ground state.
pub fn stationary_amplitude(p: &ReadoutParams, sz: f64) -> Result<ComplexAmp> {
    if sz != 1.0 && sz != -1.0 {
        return Err(Error::domain(format!("sz must be +1 or -1, got {sz}")));
    }
    let denom = I * (p.delta_m + p.chi * sz) + 0.5 * p.kappa;
    crate::physcore::ensure_finite(-I * p.eps_m / denom, "stationary amplitude")
}

/// The full stationary moment vector for a frozen qubit state.
pub fn stationary_state(p: &ReadoutParams, sz: f64) -> Result<CavityBlochState> {
    let a = stationary_amplitude(p, sz)?;
    Ok(CavityBlochState {
        a,
        sz,
        asz: a * sz,
        n: -2.0 * p.eps_m * a.im / p.kappa,
    })
}

/// Number of uniform steps of at most `dt` covering `t_end`, and the step actually used.
fn step_plan(dt: f64, t_end: f64) -> Result<(usize, f64)> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::config(format!("end time must be positive, got {t_end}")));
    }
    let n = (t_end / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Fixed-step RK4 integration from t = 0 to `t_end`.
///
/// The step is shrunk, if needed, so that a whole number of steps lands on
/// `t_end`; the returned series carries the step actually used.
pub fn integrate(
    p: &ReadoutParams,
    init: CavityBlochState,
    pulse: &DrivePulse,
    dt: f64,
    t_end: f64,
) -> Result<TimeSeries<CavityBlochState>> {
    p.validate()?;
    init.validate()?;
    if !(dt > 0.0) || dt > p.max_dt() * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "step {dt:e} s must lie in (0, {:e}] s = 0.01/max(gamma1, kappa)",
            p.max_dt()
        )));
    }
    let (steps, h) = step_plan(dt, t_end)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = init;
    out.push(s);
    for k in 0..steps {
        let t = k as f64 * h;
        let e0 = pulse.at(t);
        let em = pulse.at(t + 0.5 * h);
        let e1 = pulse.at(t + h);
        let k1 = derivative(p, e0, &s);
        let k2 = derivative(p, em, &(s + k1 * (0.5 * h)));
        let k3 = derivative(p, em, &(s + k2 * (0.5 * h)));
        let k4 = derivative(p, e1, &(s + k3 * h));
        s = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !s.is_finite() {
            return Err(Error::NumericalBlowup {
                step: k + 1,
                time: t + h,
                what: "cavity moments".into(),
            });
        }
        out.push(s);
    }
    TimeSeries::new(0.0, h, out)
}

/// Exact solution for a drive of constant amplitude `p.eps_m` switched on at
/// t = 0, starting from an empty resonator with the qubit in `sz0 = ±1`.
///
/// Writing x = (⟨a⟩, ⟨aσᶻ⟩), the pair obeys x' = A·x + c₀ + c₁·e^{−γ₁t},
/// solved with spectral projectors of the 2×2 matrix A. When the
/// eigenvalues coincide, or a forcing exponent hits a resonance, the
/// solution falls back to the RK4 integrator and reports itself as numeric.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    params: ReadoutParams,
    sz0: f64,
    kind: ClosedFormKind,
}

#[derive(Debug, Clone)]
enum ClosedFormKind {
    Exact {
        /// Constant particular solution.
        xp0: [Complex64; 2],
        /// Coefficient of e^{−γ₁t}.
        xp1: [Complex64; 2],
        /// Homogeneous modes: (rate, vector).
        modes: [(Complex64, [Complex64; 2]); 2],
    },
    Numeric,
}

/// A closed-form evaluation, flagged when it came from the integrator instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormPoint {
    pub state: CavityBlochState,
    pub numeric: bool,
}

fn solve2(m: [[Complex64; 2]; 2], b: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-12 * scale * scale {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

impl ClosedForm {
    pub fn new(p: &ReadoutParams, sz0: f64) -> Result<Self> {
        p.validate()?;
        if sz0 != 1.0 && sz0 != -1.0 {
            return Err(Error::domain(format!("initial sz must be +1 or -1, got {sz0}")));
        }
        let g = p.gamma1;
        let eps = p.eps_m;
        let d = -I * p.delta_m - 0.5 * p.kappa;
        let a = [[d, -I * p.chi], [-I * p.chi - g, d - g]];
        let c0 = [-I * eps, I * eps];
        let c1 = [Complex64::new(0.0, 0.0), -I * eps * (sz0 + 1.0)];

        let trace = a[0][0] + a[1][1];
        let split = Complex64::new(0.5 * g, p.chi);
        let lp = 0.5 * trace + split;
        let lm = 0.5 * trace - split;
        let scale = p.kappa.max(g).max(p.chi.abs()).max(p.delta_m.abs());
        let mut kind = ClosedFormKind::Numeric;
        if (lp - lm).norm() > 1e-9 * scale {
            let shifted = [[a[0][0] + g, a[0][1]], [a[1][0], a[1][1] + g]];
            let xp0 = solve2(a, [-c0[0], -c0[1]]);
            let xp1 = solve2(shifted, [-c1[0], -c1[1]]);
            let resonant = [lp, lm, Complex64::new(-g, 0.0)]
                .iter()
                .any(|mu| (mu + p.kappa).norm() <= 1e-9 * scale);
            if let (Some(xp0), Some(xp1), false) = (xp0, xp1, resonant) {
                // homogeneous amplitude fixes x(0) = 0
                let r = [-(xp0[0] + xp1[0]), -(xp0[1] + xp1[1])];
                let proj = |l_this: Complex64, l_other: Complex64| -> [Complex64; 2] {
                    let inv = 1.0 / (l_this - l_other);
                    [
                        ((a[0][0] - l_other) * r[0] + a[0][1] * r[1]) * inv,
                        (a[1][0] * r[0] + (a[1][1] - l_other) * r[1]) * inv,
                    ]
                };
                kind = ClosedFormKind::Exact {
                    xp0,
                    xp1,
                    modes: [(lp, proj(lp, lm)), (lm, proj(lm, lp))],
                };
            }
        }
        Ok(ClosedForm {
            params: *p,
            sz0,
            kind,
        })
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ClosedFormKind::Numeric)
    }

    pub fn at(&self, t: f64) -> Result<ClosedFormPoint> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be non-negative, got {t}")));
        }
        let p = &self.params;
        match &self.kind {
            ClosedFormKind::Exact { xp0, xp1, modes } => {
                let g = p.gamma1;
                let k = p.kappa;
                let decay_g = (-g * t).exp();
                let decay_k = (-k * t).exp();
                let mut a = xp0[0] + xp1[0] * decay_g;
                let mut asz = xp0[1] + xp1[1] * decay_g;
                // photon number: n' = −2ε·Im a − κ n with a = xp0 + Σ c_j e^{μ_j t}
                let mut drive_integral = Complex64::new(xp0[0].re, xp0[0].im) * ((1.0 - decay_k) / k);
                let mu_g = Complex64::new(-g, 0.0);
                drive_integral += xp1[0] * ((mu_g * t).exp() - decay_k) / (mu_g + k);
                for (mu, v) in modes {
                    let e = (mu * t).exp();
                    a += v[0] * e;
                    asz += v[1] * e;
                    drive_integral += v[0] * (e - decay_k) / (mu + k);
                }
                let state = CavityBlochState {
                    a,
                    sz: -1.0 + (self.sz0 + 1.0) * decay_g,
                    asz,
                    n: -2.0 * p.eps_m * drive_integral.im,
                };
                if !state.is_finite() {
                    return Err(Error::domain("closed-form state is not finite"));
                }
                Ok(ClosedFormPoint {
                    state,
                    numeric: false,
                })
            }
            ClosedFormKind::Numeric => {
                let init = CavityBlochState::empty(self.sz0);
                if t == 0.0 {
                    return Ok(ClosedFormPoint {
                        state: init,
                        numeric: true,
                    });
                }
                let series = integrate(p, init, &DrivePulse::step(p.eps_m), p.default_dt().min(p.max_dt()), t)?;
                Ok(ClosedFormPoint {
                    state: *series.last(),
                    numeric: true,
                })
            }
        }
    }
}

/// Closed-form moments at time `t` (see [`ClosedForm`]).
pub fn closed_form(p: &ReadoutParams, sz0: f64, t: f64) -> Result<ClosedFormPoint> {
    ClosedForm::new(p, sz0)?.at(t)
}

/// sqrt(h·f_r·κ·Z), the voltage corresponding to Im⟨a⟩ = 1.
pub fn voltage_scale(p: &ReadoutParams) -> f64 {
    (PLANCK * p.f_r * p.kappa * p.z_line).sqrt()
}

/// Quadrature voltage V = sqrt(h·f_r·κ·Z)·Im⟨a⟩.
pub fn quadrature_voltage(a: ComplexAmp, p: &ReadoutParams) -> Result<f64> {
    p.validate()?;
    Ok(voltage_scale(p) * a.im)
}

/// Quadrature-voltage trace for a qubit starting in `sz0`, driven by a step
/// of amplitude `p.eps_m` from t = 0.
pub fn quadrature_trace(p: &ReadoutParams, sz0: f64, dt: f64, t_end: f64) -> Result<TimeSeries<f64>> {
    let traj = integrate(p, CavityBlochState::empty(sz0), &DrivePulse::step(p.eps_m), dt, t_end)?;
    let scale = voltage_scale(p);
    Ok(traj.map(|s| scale * s.a.im))
}
