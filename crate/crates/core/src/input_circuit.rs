//! Input network of the amplifier: a source resistor R₁ and series capacitor
//! C₁ feeding a parallel L‖C‖R tank whose inductor is the input coil. The
//! coil couples flux M·I into the SQUID loop; the SQUID does not load the
//! network.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::physcore::{ensure_finite, ComplexAmp};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputCircuit {
    /// Source resistance, Ω.
    pub r1: f64,
    /// Series coupling capacitance, F.
    pub c1: f64,
    /// Coil inductance, H.
    pub l: f64,
    /// Tank capacitance, F.
    pub c: f64,
    /// Tank loss resistance, Ω.
    pub r: f64,
    /// Coil-to-SQUID mutual inductance, H. Zero decouples the SQUID.
    pub m: f64,
}

impl Default for InputCircuit {
    fn default() -> Self {
        InputCircuit {
            r1: 50.0,
            c1: 0.12e-12,
            l: 0.69e-9,
            c: 0.85e-12,
            r: 1.0e3,
            m: 0.22e-9,
        }
    }
}

impl InputCircuit {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R1", self.r1), ("C1", self.c1), ("L", self.l), ("C", self.c), ("R", self.r)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.m >= 0.0) || !self.m.is_finite() {
            return Err(Error::config(format!("M must be non-negative and finite, got {}", self.m)));
        }
        Ok(())
    }

    /// Bare tank resonance 1/(2π·sqrt(LC)), Hz.
    pub fn tank_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l * self.c).sqrt())
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain(format!("angular frequency must be positive, got {omega}")));
    }
    Ok(())
}

fn tank_raw(c: &InputCircuit, omega: f64) -> Complex64 {
    let admittance = 1.0 / (I * omega * c.l) + I * omega * c.c + 1.0 / c.r;
    1.0 / admittance
}

fn total_raw(c: &InputCircuit, omega: f64) -> Complex64 {
    c.r1 + 1.0 / (I * omega * c.c1) + tank_raw(c, omega)
}

fn coil_raw(c: &InputCircuit, v: Complex64, omega: f64) -> Complex64 {
    v * tank_raw(c, omega) / (I * omega * c.l * total_raw(c, omega))
}

/// Parallel L‖C‖R impedance, Ω.
pub fn tank_impedance(c: &InputCircuit, omega: f64) -> Result<ComplexAmp> {
    check_omega(omega)?;
    ensure_finite(tank_raw(c, omega), "tank impedance")
}

/// R₁ + 1/(iωC₁) + Z_tank, Ω.
pub fn total_impedance(c: &InputCircuit, omega: f64) -> Result<ComplexAmp> {
    check_omega(omega)?;
    ensure_finite(total_raw(c, omega), "total impedance")
}

/// Current phasor in the coil for a source phasor `v`: V·Z_tank/(Z_L·Z), A.
pub fn coil_current(c: &InputCircuit, v: ComplexAmp, omega: f64) -> Result<ComplexAmp> {
    check_omega(omega)?;
    ensure_finite(coil_raw(c, v, omega), "coil current")
}

/// Branch currents of the tank for a source phasor, A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCurrents {
    pub total: ComplexAmp,
    pub inductor: ComplexAmp,
    pub capacitor: ComplexAmp,
    pub resistor: ComplexAmp,
}

/// Tank branch currents reconstructed from the tank voltage V·Z_tank/Z.
pub fn branch_currents(c: &InputCircuit, v: ComplexAmp, omega: f64) -> Result<BranchCurrents> {
    check_omega(omega)?;
    let z = total_raw(c, omega);
    let v_tank = v * tank_raw(c, omega) / z;
    Ok(BranchCurrents {
        total: v / z,
        inductor: v_tank / (I * omega * c.l),
        capacitor: v_tank * (I * omega * c.c),
        resistor: v_tank / c.r,
    })
}

/// Real flux waveform Φ(t) = Re[Φ̂·e^{iωt}] delivered to the SQUID loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFlux {
    /// Complex flux amplitude M·I_coil, Wb.
    pub phasor: ComplexAmp,
    /// Angular frequency, rad/s.
    pub omega: f64,
}

impl HarmonicFlux {
    pub fn zero(omega: f64) -> Self {
        HarmonicFlux {
            phasor: Complex64::new(0.0, 0.0),
            omega,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        self.phasor.re * c - self.phasor.im * s
    }

    pub fn amplitude(&self) -> f64 {
        self.phasor.norm()
    }
}

/// Flux delivered by a harmonic source `v·e^{iωt}` (real part taken).
pub fn flux_drive(c: &InputCircuit, v: ComplexAmp, omega: f64) -> Result<HarmonicFlux> {
    c.validate()?;
    let i_coil = coil_current(c, v, omega)?;
    Ok(HarmonicFlux {
        phasor: i_coil * c.m,
        omega,
    })
}

/// Time-domain state of the network: charge on C₁, tank voltage, coil current.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub q1: f64,
    pub v_c: f64,
    pub i_l: f64,
}

impl NetworkState {
    pub fn flux(&self, c: &InputCircuit) -> f64 {
        c.m * self.i_l
    }
}

/// Time derivative of the network state.
///
/// `v_in` is the source voltage, `e_r1` a voltage source in series with R₁
/// and `e_r` one in series with the tank resistor R.
pub fn network_derivative(c: &InputCircuit, v_in: f64, e_r1: f64, e_r: f64, s: &NetworkState) -> NetworkState {
    let i = (v_in + e_r1 - s.q1 / c.c1 - s.v_c) / c.r1;
    NetworkState {
        q1: i,
        v_c: (i - s.i_l - (s.v_c - e_r) / c.r) / c.c,
        i_l: s.v_c / c.l,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nominal() -> InputCircuit {
        InputCircuit::default()
    }

    #[test]
    fn tank_is_resistive_at_resonance() {
        let c = nominal();
        let w0 = 1.0 / (c.l * c.c).sqrt();
        let z = tank_impedance(&c, w0).unwrap();
        assert!((z.re - c.r).abs() < 1e-9 * c.r);
        assert!(z.im.abs() < 1e-9 * c.r);
        // 1/(2π·sqrt(0.69 nH · 0.85 pF))
        assert!((c.tank_resonance() - 6.5718e9).abs() < 1e6);
    }

    #[test]
    fn low_frequency_tank_is_shorted() {
        let c = nominal();
        assert!(tank_impedance(&c, 2.0 * PI * 1e3).unwrap().norm() < 1e-4);
        assert!(matches!(tank_impedance(&c, 0.0), Err(Error::Domain(_))));
        assert!(total_impedance(&c, -1.0).is_err());
    }

    #[test]
    fn high_frequency_total_is_r1() {
        let c = nominal();
        let z = total_impedance(&c, 2.0 * PI * 1e16).unwrap();
        assert!((z - Complex64::new(c.r1, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn total_at_resonance() {
        let c = nominal();
        let w0 = 1.0 / (c.l * c.c).sqrt();
        let z = total_impedance(&c, w0).unwrap();
        let expect = Complex64::new(c.r1 + c.r, -1.0 / (w0 * c.c1));
        assert!((z - expect).norm() < 1e-9 * expect.norm());
        let i = coil_current(&c, Complex64::new(1e-7, 0.0), w0).unwrap();
        let oracle = Complex64::new(1e-7 * c.r, 0.0) / (I * w0 * c.l * expect);
        assert!((i - oracle).norm() < 1e-9 * oracle.norm());
    }

    #[test]
    fn total_at_operating_frequency() {
        // hand evaluation at 6.19 GHz: admittances of L, C, R summed and inverted
        let c = nominal();
        let w = 2.0 * PI * 6.19e9;
        let y_l = 1.0 / (w * c.l);
        let y_c = w * c.c;
        let b = y_c - y_l;
        let g = 1.0 / c.r;
        let z_tank = Complex64::new(g / (g * g + b * b), -b / (g * g + b * b));
        let expect = Complex64::new(c.r1 + z_tank.re, z_tank.im - 1.0 / (w * c.c1));
        let z = total_impedance(&c, w).unwrap();
        assert!((z - expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn zero_source_gives_zero_current_and_flux() {
        let c = nominal();
        let w = 2.0 * PI * 6.19e9;
        assert_eq!(coil_current(&c, Complex64::new(0.0, 0.0), w).unwrap().norm(), 0.0);
        let f = flux_drive(&c, Complex64::new(0.0, 0.0), w).unwrap();
        assert!((0..50).all(|k| f.at(k as f64 * 1e-11) == 0.0));
    }

    #[test]
    fn flux_extrema_and_phase() {
        let c = nominal();
        let w = 2.0 * PI * 6.19e9;
        let v = Complex64::new(1e-7, 0.0);
        let i = coil_current(&c, v, w).unwrap();
        let f = flux_drive(&c, v, w).unwrap();
        assert!((f.amplitude() - c.m * i.norm()).abs() < 1e-12 * f.amplitude());
        // maximum of Re[A e^{iωt}] sits at ωt = −arg(A)
        let t_max = (-i.arg()).rem_euclid(2.0 * PI) / w;
        assert!((f.at(t_max) - c.m * i.norm()).abs() < 1e-9 * f.amplitude());
    }

    #[test]
    fn kirchhoff_current_law() {
        let c = nominal();
        for f in [1e9, 5.0e9, 6.19e9, 6.575e9, 9e9, 4e10] {
            let v = Complex64::new(0.3e-6, -0.2e-6);
            let b = branch_currents(&c, v, 2.0 * PI * f).unwrap();
            let resid = b.inductor + b.capacitor + b.resistor - b.total;
            assert!(resid.norm() < 1e-12 * b.total.norm());
            let i = coil_current(&c, v, 2.0 * PI * f).unwrap();
            assert!((i - b.inductor).norm() < 1e-12 * i.norm());
        }
    }

    fn peak_frequency(c: &InputCircuit) -> f64 {
        let v = Complex64::new(1.0, 0.0);
        let grid: Vec<f64> = (0..=2000).map(|k| 4e9 + k as f64 * 2.5e6).collect();
        let mags: Vec<f64> = grid.iter().map(|&f| coil_current(c, v, 2.0 * PI * f).unwrap().norm()).collect();
        let interior_maxima = (1..mags.len() - 1).filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1]).count();
        assert_eq!(interior_maxima, 1);
        let k = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        grid[k]
    }

    #[test]
    fn single_coil_current_peak_is_stable() {
        let base = peak_frequency(&nominal());
        assert!(base > 5.5e9 && base < 7.0e9, "peak at {base:e}");
        for scale in [0.99, 1.01] {
            for which in 0..5 {
                let mut c = nominal();
                match which {
                    0 => c.r1 *= scale,
                    1 => c.c1 *= scale,
                    2 => c.l *= scale,
                    3 => c.c *= scale,
                    _ => c.r *= scale,
                }
                let f = peak_frequency(&c);
                assert!((f - base).abs() < 0.02 * base, "component {which} x{scale}: {f:e}");
            }
        }
    }

    #[test]
    fn time_domain_network_matches_phasor() {
        let c = nominal();
        let f = 6.19e9;
        let w = 2.0 * PI * f;
        let amp = 1e-7;
        let dt = 0.05e-12;
        let steps = (20e-9 / dt) as usize;
        let mut s = NetworkState::default();
        let mut peak: f64 = 0.0;
        for k in 0..steps {
            let t = k as f64 * dt;
            let vin = |t: f64| amp * (w * t).cos();
            let k1 = network_derivative(&c, vin(t), 0.0, 0.0, &s);
            let mid = |s: &NetworkState, d: &NetworkState, h: f64| NetworkState {
                q1: s.q1 + h * d.q1,
                v_c: s.v_c + h * d.v_c,
                i_l: s.i_l + h * d.i_l,
            };
            let k2 = network_derivative(&c, vin(t + dt / 2.0), 0.0, 0.0, &mid(&s, &k1, dt / 2.0));
            let k3 = network_derivative(&c, vin(t + dt / 2.0), 0.0, 0.0, &mid(&s, &k2, dt / 2.0));
            let k4 = network_derivative(&c, vin(t + dt), 0.0, 0.0, &mid(&s, &k3, dt));
            s.q1 += dt / 6.0 * (k1.q1 + 2.0 * k2.q1 + 2.0 * k3.q1 + k4.q1);
            s.v_c += dt / 6.0 * (k1.v_c + 2.0 * k2.v_c + 2.0 * k3.v_c + k4.v_c);
            s.i_l += dt / 6.0 * (k1.i_l + 2.0 * k2.i_l + 2.0 * k3.i_l + k4.i_l);
            if t > 15e-9 {
                peak = peak.max(s.i_l.abs());
            }
        }
        let phasor = coil_current(&c, Complex64::new(amp, 0.0), w).unwrap().norm();
        assert!((peak - phasor).abs() < 2e-3 * phasor, "time domain {peak:e} vs phasor {phasor:e}");
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(f in 1e6f64..1e11, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let c = nominal();
            let w = 2.0 * PI * f;
            let v = Complex64::new(re, im);
            let zt = tank_raw(&c, -w);
            prop_assert!((zt - tank_raw(&c, w).conj()).norm() <= 1e-12 * zt.norm());
            let z = total_raw(&c, -w);
            prop_assert!((z - total_raw(&c, w).conj()).norm() <= 1e-12 * z.norm());
            let i = coil_raw(&c, v.conj(), -w);
            prop_assert!((i - coil_raw(&c, v, w).conj()).norm() <= 1e-12 * i.norm().max(1e-300));
        }

        #[test]
        fn coil_current_is_continuous(f in 1e8f64..3e10) {
            let c = nominal();
            let v = Complex64::new(1.0, 0.0);
            let a = coil_current(&c, v, 2.0 * PI * f).unwrap();
            let b = coil_current(&c, v, 2.0 * PI * f * (1.0 + 1e-9)).unwrap();
            prop_assert!((a - b).norm() <= 1e-5 * a.norm());
        }
    }
}
