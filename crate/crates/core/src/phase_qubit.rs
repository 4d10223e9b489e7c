//! Flux-biased phase qubit: double-well potential, finite-difference spectrum,
//! bias tuning for a given number of shallow-well levels, and the coupling to
//! the readout resonator in the dispersive regime.
//!
//! The solver works in units of the Josephson energy E_J internally and
//! reports energies in joules.

mod tridiag;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::physcore::{HBAR, PHI0_REDUCED, PLANCK};
use crate::{Error, Result};
use tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseQubitParams {
    /// Junction capacitance (F).
    pub c_q: f64,
    /// Loop inductance (H).
    pub l_q: f64,
    /// Critical current (A).
    pub i0: f64,
    /// Bias flux (Wb).
    pub phi_p: f64,
}

impl Default for PhaseQubitParams {
    /// C_q = 700 fF, L_q = 720 pH, I0 = 1.7 µA, biased at the symmetric point
    /// φ_p = π (use [`tune_bias_flux`] to place the levels).
    fn default() -> Self {
        Self {
            c_q: 700e-15,
            l_q: 720e-12,
            i0: 1.7e-6,
            phi_p: PI * PHI0_REDUCED,
        }
    }
}

impl PhaseQubitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C_q", self.c_q), ("L_q", self.l_q), ("I0", self.i0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.phi_p.is_finite() && self.phi_p > 0.0) {
            return Err(Error::config(format!("bias flux must be positive, got {}", self.phi_p)));
        }
        if self.lambda() <= 1.0 {
            return Err(Error::config(format!(
                "L_q/L0 = {} must exceed 1 for a double well",
                self.lambda()
            )));
        }
        Ok(())
    }

    pub fn e_j(&self) -> f64 {
        self.i0 * PHI0_REDUCED
    }

    pub fn l0(&self) -> f64 {
        PHI0_REDUCED / self.i0
    }

    pub fn lambda(&self) -> f64 {
        self.l_q / self.l0()
    }

    /// Effective mass φ₀²·C_q of the phase particle.
    pub fn mass(&self) -> f64 {
        PHI0_REDUCED * PHI0_REDUCED * self.c_q
    }

    /// Bias flux in units of φ₀ (radians of phase).
    pub fn reduced_bias(&self) -> f64 {
        self.phi_p / PHI0_REDUCED
    }

    pub fn with_reduced_bias(mut self, phi: f64) -> Self {
        self.phi_p = phi * PHI0_REDUCED;
        self
    }

    /// ħ²/(2m) in units of E_J.
    fn kinetic_scale(&self) -> f64 {
        HBAR * HBAR / (2.0 * self.mass() * self.e_j())
    }
}

fn reduced_potential(lambda: f64, bias: f64, delta: f64) -> f64 {
    let x = delta - bias;
    x * x / (2.0 * lambda) - delta.cos()
}

/// U(δ) = E_J·[(δ − φ_p − φ₁)²/(2λ) − cos δ], in joules. `phi1` is an extra
/// flux in units of φ₀.
pub fn potential(p: &PhaseQubitParams, phi1: f64, delta: f64) -> f64 {
    p.e_j() * reduced_potential(p.lambda(), p.reduced_bias() + phi1, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub delta: f64,
    /// U(δ) in units of E_J.
    pub energy: f64,
    /// U″(δ) in units of E_J.
    pub curvature: f64,
    pub kind: StationaryKind,
}

/// Roots of (δ − φ_p − φ₁)/λ + sin δ = 0, ascending in δ.
pub fn stationary_points(p: &PhaseQubitParams, phi1: f64) -> Vec<StationaryPoint> {
    let lambda = p.lambda();
    let bias = p.reduced_bias() + phi1;
    let slope = |d: f64| (d - bias) / lambda + d.sin();
    let lo = bias - lambda - 1.0;
    let hi = bias + lambda + 1.0;
    let n = 4000;
    let h = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = slope(a);
    for k in 1..=n {
        let b = lo + k as f64 * h;
        let fb = slope(b);
        if fa == 0.0 || fa * fb < 0.0 {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                if m <= x0 || m >= x1 {
                    break;
                }
                let fm = slope(m);
                if fm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if f0 * fm < 0.0 {
                    x1 = m;
                } else {
                    x0 = m;
                    f0 = fm;
                }
            }
            let d = if fa == 0.0 { a } else { 0.5 * (x0 + x1) };
            let curvature = 1.0 / lambda + d.cos();
            out.push(StationaryPoint {
                delta: d,
                energy: reduced_potential(lambda, bias, d),
                curvature,
                kind: if curvature > 0.0 { StationaryKind::Minimum } else { StationaryKind::Maximum },
            });
        }
        a = b;
        fa = fb;
    }
    out
}

/// The two wells used for labelling: the global minimum (deep), its
/// neighbouring minimum (shallow) and the maximum between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleWell {
    pub deep: StationaryPoint,
    pub shallow: StationaryPoint,
    pub barrier: StationaryPoint,
}

impl DoubleWell {
    /// Small-oscillation frequency of the shallow well, rad/s.
    pub fn shallow_plasma_frequency(&self, p: &PhaseQubitParams) -> f64 {
        (p.e_j() * self.shallow.curvature / p.mass()).sqrt()
    }

    /// Barrier height above the shallow minimum, in units of E_J.
    pub fn barrier_height(&self) -> f64 {
        self.barrier.energy - self.shallow.energy
    }

    fn shallow_is_left(&self) -> bool {
        self.shallow.delta < self.barrier.delta
    }
}

pub fn double_well(p: &PhaseQubitParams, phi1: f64) -> Result<DoubleWell> {
    let pts = stationary_points(p, phi1);
    let minima: Vec<usize> = (0..pts.len())
        .filter(|&i| pts[i].kind == StationaryKind::Minimum)
        .collect();
    if minima.len() < 2 {
        return Err(Error::domain(format!(
            "potential has a single well at bias {:.6} φ₀",
            p.reduced_bias() + phi1
        )));
    }
    let deep_pos = *minima
        .iter()
        .min_by(|&&a, &&b| pts[a].energy.total_cmp(&pts[b].energy))
        .unwrap();
    let k = minima.iter().position(|&i| i == deep_pos).unwrap();
    let left = (k > 0).then(|| minima[k - 1]);
    let right = minima.get(k + 1).copied();
    let shallow_pos = match (left, right) {
        (Some(l), Some(r)) => {
            if pts[l].energy <= pts[r].energy {
                l
            } else {
                r
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => unreachable!(),
    };
    let (lo, hi) = (shallow_pos.min(deep_pos), shallow_pos.max(deep_pos));
    let barrier = pts[lo + 1..hi]
        .iter()
        .filter(|s| s.kind == StationaryKind::Maximum)
        .max_by(|a, b| a.energy.total_cmp(&b.energy))
        .copied()
        .ok_or_else(|| Error::domain("no barrier between neighbouring minima"))?;
    Ok(DoubleWell {
        deep: pts[deep_pos],
        shallow: pts[shallow_pos],
        barrier,
    })
}

/// Upper end φ_c of the bias range with two wells on the right of the
/// symmetric point π: φ_c = δ_c + λ·sin δ_c with cos δ_c = −1/λ.
pub fn critical_bias(lambda: f64) -> Result<f64> {
    if lambda <= 1.0 {
        return Err(Error::domain(format!("λ = {lambda} ≤ 1 has a single well")));
    }
    let dc = (-1.0 / lambda).acos();
    Ok(dc + lambda * dc.sin())
}

/// Highest energy (units of E_J) the solver resolves: 10% of the barrier
/// height above the barrier.
fn level_window_top(w: &DoubleWell) -> f64 {
    w.barrier.energy + 0.1 * w.barrier_height()
}

/// First δ beyond `from` in direction `dir` where U reaches `energy`.
fn turning_point(lambda: f64, bias: f64, from: f64, dir: f64, energy: f64) -> f64 {
    let u = |d: f64| reduced_potential(lambda, bias, d);
    let step = 0.01;
    let mut a = from;
    while u(a + dir * step) < energy {
        a += dir * step;
    }
    let mut b = a + dir * step;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if u(m) < energy {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 4096;
    pub const DEFAULT_MARGIN: f64 = 3.0;

    /// [lower minimum − 3, upper minimum + 3] with 4096 points, stretched to
    /// keep 2 rad beyond the outer turning points at the top of the level
    /// window.
    pub fn around(p: &PhaseQubitParams, phi1: f64, w: &DoubleWell) -> Self {
        let (lambda, bias) = (p.lambda(), p.reduced_bias() + phi1);
        let e_top = level_window_top(w);
        let lo = w.shallow.delta.min(w.deep.delta);
        let hi = w.shallow.delta.max(w.deep.delta);
        let left = turning_point(lambda, bias, lo, -1.0, e_top);
        let right = turning_point(lambda, bias, hi, 1.0, e_top);
        Self {
            delta_min: (lo - Self::DEFAULT_MARGIN).min(left - 2.0),
            delta_max: (hi + Self::DEFAULT_MARGIN).max(right + 2.0),
            n_points: Self::DEFAULT_POINTS,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.delta_max - self.delta_min) / (self.n_points - 1) as f64
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.delta_min + i as f64 * self.spacing()
    }

    /// Same range with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points - 1,
            ..*self
        }
    }

    fn widened(&self, by: f64) -> Self {
        let h = self.spacing();
        let extra = (by / h).ceil() as usize;
        Self {
            delta_min: self.delta_min - extra as f64 * h,
            delta_max: self.delta_max + extra as f64 * h,
            n_points: self.n_points + 2 * extra,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 1024 {
            return Err(Error::config(format!("grid needs at least 1024 points, got {}", self.n_points)));
        }
        if !(self.delta_min.is_finite() && self.delta_max.is_finite() && self.delta_max > self.delta_min) {
            return Err(Error::config("grid range must be finite and increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WellLabel {
    Shallow,
    Deep,
    AboveBarrier,
}

#[derive(Debug, Clone, Serialize)]
pub struct WellSpectrum {
    /// Ascending energies (J).
    pub energies: Vec<f64>,
    /// Grid-sampled eigenvectors with unit sum of squares.
    #[serde(skip)]
    pub wavefunctions: Vec<Vec<f64>>,
    pub labels: Vec<WellLabel>,
    pub barrier_energy: f64,
    pub shallow_count: usize,
    /// ‖Hψ − Eψ‖₂ per level, in units of E_J.
    pub residuals: Vec<f64>,
    pub grid: GridSpec,
    pub wells: DoubleWell,
    pub e_j: f64,
}

impl WellSpectrum {
    /// Indices of the shallow-well levels, ascending in energy.
    pub fn shallow_levels(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == WellLabel::Shallow)
            .collect()
    }

    /// (E₁ − E₀)/h of the two lowest shallow-well levels.
    pub fn qubit_frequency(&self) -> Result<f64> {
        let s = self.shallow_levels();
        if s.len() < 2 {
            return Err(Error::domain(format!("{} shallow-well level(s), need 2", s.len())));
        }
        Ok((self.energies[s[1]] - self.energies[s[0]]) / PLANCK)
    }

    /// max |⟨ψ_a|ψ_b⟩ − δ_ab| over all returned pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let w = &self.wavefunctions;
        let mut worst: f64 = 0.0;
        for a in 0..w.len() {
            for b in a..w.len() {
                let dot: f64 = w[a].iter().zip(&w[b]).map(|(x, y)| x * y).sum();
                worst = worst.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Width of the boundary layer checked for leaked probability (ground state
/// and shallow-well levels).
const BOUNDARY_LAYER: f64 = 0.25;
const BOUNDARY_MASS: f64 = 1e-6;

const LOWEST_LEVELS: usize = 12;

/// Finite-difference spectrum on `grid` (Dirichlet ends). Returns the lowest
/// 12 levels together with every level between the shallow-well minimum and
/// 10% of the barrier height above the barrier; deep-well levels below the
/// shallow minimum beyond the lowest 12 are skipped.
pub fn solve_spectrum(p: &PhaseQubitParams, phi1: f64, grid: &GridSpec) -> Result<WellSpectrum> {
    p.validate()?;
    grid.validate()?;
    let wells = double_well(p, phi1)?;
    let lambda = p.lambda();
    let bias = p.reduced_bias() + phi1;
    let n = grid.n_points;
    let h = grid.spacing();
    let t = p.kinetic_scale() / (h * h);
    let diag: Vec<f64> = (0..n)
        .map(|i| reduced_potential(lambda, bias, grid.delta(i)) + 2.0 * t)
        .collect();
    let off = vec![-t; n - 1];
    let mat = Tridiagonal { diag: &diag, off: &off };

    let e_top = level_window_top(&wells);
    let k_top = mat.count_below(e_top).max(LOWEST_LEVELS).min(n);
    let k_band = mat.count_below(wells.shallow.energy).max(LOWEST_LEVELS).min(k_top);
    let indices: Vec<usize> = (0..LOWEST_LEVELS.min(n)).chain(k_band..k_top).collect();
    let count = indices.len();
    let values: Vec<f64> = indices.into_par_iter().map(|k| mat.eigenvalue(k)).collect();
    let mut vectors = mat.eigenvectors(&values);

    let shallow_left = wells.shallow_is_left();
    let split = wells.barrier.delta;
    let i_shallow = (((wells.shallow.delta - grid.delta_min) / h).round() as usize).min(n - 1);
    let mut labels = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut tmp = vec![0.0; n];
    for (k, v) in vectors.iter_mut().enumerate() {
        if v[i_shallow] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        mat.apply(v, &mut tmp);
        let r = tmp
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - values[k] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
        let shallow_mass: f64 = v
            .iter()
            .enumerate()
            .filter(|&(i, _)| (grid.delta(i) < split) == shallow_left)
            .map(|(_, x)| x * x)
            .sum();
        labels.push(if values[k] >= wells.barrier.energy {
            WellLabel::AboveBarrier
        } else if shallow_mass > 0.5 {
            WellLabel::Shallow
        } else {
            WellLabel::Deep
        });
    }

    let layer = ((BOUNDARY_LAYER / h).ceil() as usize).max(1).min(n / 2);
    for (k, v) in vectors.iter().enumerate() {
        if k > 0 && labels[k] != WellLabel::Shallow {
            continue;
        }
        let edge: f64 = v[..layer].iter().chain(&v[n - layer..]).map(|x| x * x).sum();
        if edge > BOUNDARY_MASS {
            return Err(Error::Grid(format!(
                "level {k} has probability {edge:.3e} within {BOUNDARY_LAYER} rad of the grid edge \
                 [{:.4}, {:.4}]",
                grid.delta_min, grid.delta_max
            )));
        }
    }

    let e_j = p.e_j();
    let shallow_count = labels.iter().filter(|&&l| l == WellLabel::Shallow).count();
    Ok(WellSpectrum {
        energies: values.iter().map(|v| v * e_j).collect(),
        wavefunctions: vectors,
        labels,
        barrier_energy: wells.barrier.energy * e_j,
        shallow_count,
        residuals,
        grid: *grid,
        wells,
        e_j,
    })
}

/// [`solve_spectrum`] on the default grid, widened by 2 rad per side (at the
/// same spacing) while the boundary check fails.
pub fn solve_spectrum_auto(p: &PhaseQubitParams, phi1: f64) -> Result<WellSpectrum> {
    let mut grid = GridSpec::around(p, phi1, &double_well(p, phi1)?);
    let mut last = None;
    for _ in 0..4 {
        match solve_spectrum(p, phi1, &grid) {
            Err(Error::Grid(msg)) => {
                last = Some(msg);
                grid = grid.widened(2.0);
            }
            other => return other,
        }
    }
    Err(Error::Grid(last.unwrap_or_default()))
}

/// How levels are attributed to the shallow well when tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingRule {
    /// Eigenstates with more than half their probability on the shallow side
    /// and energy below the barrier.
    #[default]
    Localized,
    /// Harmonic ladder ħω_p(n + ½) of the shallow well below the barrier:
    /// round(ΔU/ħω_p).
    HarmonicLadder,
}

pub fn shallow_count(p: &PhaseQubitParams, rule: CountingRule) -> Result<usize> {
    match rule {
        CountingRule::Localized => Ok(solve_spectrum_auto(p, 0.0)?.shallow_count),
        CountingRule::HarmonicLadder => {
            let w = double_well(p, 0.0)?;
            let quanta = w.barrier_height() * p.e_j() / (HBAR * w.shallow_plasma_frequency(p));
            Ok(quanta.round() as usize)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountSample {
    /// Bias in units of φ₀.
    pub bias: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasTuning {
    /// Returned bias flux (Wb), the midpoint of `interval`.
    pub phi_p: f64,
    /// Bias range (units of φ₀) with the target count.
    pub interval: (f64, f64),
    pub rule: CountingRule,
    pub qubit_frequency: f64,
    pub spectrum: WellSpectrum,
    pub scan: Vec<CountSample>,
}

const SCAN_STEP: f64 = 0.01;
const SCAN_CHUNK: usize = 16;
const EDGE_TOLERANCE: f64 = 1e-6;

/// Finds the bias range, below the critical bias, in which the shallow well
/// holds `target` levels, and returns its midpoint. The scan starts at the
/// critical bias (no shallow well) and walks towards the symmetric point.
pub fn tune_bias_flux(p: &PhaseQubitParams, target: usize, rule: CountingRule) -> Result<BiasTuning> {
    if target == 0 {
        return Err(Error::domain("target level count must be at least 1"));
    }
    p.validate()?;
    let phi_c = critical_bias(p.lambda())?;
    let count_at = |b: f64| shallow_count(&p.with_reduced_bias(b), rule);

    let mut scan: Vec<CountSample> = Vec::new();
    let mut k = 0usize;
    'outer: loop {
        let biases: Vec<f64> = (k..k + SCAN_CHUNK)
            .map(|j| phi_c - 1e-4 - j as f64 * SCAN_STEP)
            .filter(|&b| b > PI + 1e-3)
            .collect();
        if biases.is_empty() {
            break;
        }
        let counts: Vec<Result<usize>> = biases.par_iter().map(|&b| count_at(b)).collect();
        for (b, c) in biases.iter().zip(counts) {
            let count = c?;
            scan.push(CountSample { bias: *b, count });
            if count > target {
                break 'outer;
            }
        }
        k += SCAN_CHUNK;
    }

    let table = || {
        scan.iter()
            .map(|s| format!("{:.4}:{}", s.bias, s.count))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let first = scan.iter().position(|s| s.count == target).ok_or_else(|| {
        Error::Infeasible(format!("no bias gives {target} shallow levels; count vs φ_p/φ₀: {}", table()))
    })?;
    let after = scan[first..].iter().position(|s| s.count != target).map(|i| i + first);

    let on_target = |b: f64| count_at(b).map(|c| c == target);
    // bisect between a bias with the target count and one without
    let edge = |mut inside: f64, mut outside: f64| -> Result<f64> {
        while (inside - outside).abs() > EDGE_TOLERANCE {
            let mid = 0.5 * (inside + outside);
            if on_target(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let upper = if first == 0 { scan[0].bias } else { edge(scan[first].bias, scan[first - 1].bias)? };
    let lower = match after {
        Some(j) => edge(scan[j - 1].bias, scan[j].bias)?,
        None => scan.last().unwrap().bias,
    };

    let mid = 0.5 * (lower + upper);
    let tuned = p.with_reduced_bias(mid);
    let spectrum = solve_spectrum_auto(&tuned, 0.0)?;
    let qubit_frequency = spectrum.qubit_frequency()?;
    Ok(BiasTuning {
        phi_p: tuned.phi_p,
        interval: (lower, upper),
        rule,
        qubit_frequency,
        spectrum,
        scan,
    })
}

/// ⟨e|δ|g⟩ between the two lowest shallow-well levels. The ground state is
/// positive at the shallow minimum; the excited state's sign is chosen so the
/// element is non-negative.
pub fn matrix_element(s: &WellSpectrum) -> Result<f64> {
    let idx = s.shallow_levels();
    if idx.len() < 2 {
        return Err(Error::domain(format!("{} shallow-well level(s), need 2", idx.len())));
    }
    let (g, e) = (&s.wavefunctions[idx[0]], &s.wavefunctions[idx[1]]);
    let m: f64 = (0..g.len()).map(|i| g[i] * s.grid.delta(i) * e[i]).sum();
    Ok(m.abs())
}

/// Harmonic-oscillator value sqrt(ħ/(2·m·ω_q)).
pub fn harmonic_matrix_element(p: &PhaseQubitParams, f_q: f64) -> f64 {
    (HBAR / (2.0 * p.mass() * 2.0 * PI * f_q)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingParams {
    /// Qubit-resonator mutual inductance (H).
    pub m_qr: f64,
    /// Resonator inductance (H).
    pub l_r: f64,
    pub f_r: f64,
    pub f_q: f64,
    /// ⟨e|δ|g⟩.
    pub matrix_element: f64,
    /// Resonator length (m); the qubit sits at its centre.
    pub d_r: f64,
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_qr.is_finite() && self.m_qr >= 0.0) {
            return Err(Error::config(format!("M_qr must be non-negative, got {}", self.m_qr)));
        }
        for (name, v) in [("L_r", self.l_r), ("f_r", self.f_r), ("f_q", self.f_q), ("d_r", self.d_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.matrix_element.abs() < PI) {
            return Err(Error::config(format!("|⟨e|δ|g⟩| must be below π, got {}", self.matrix_element)));
        }
        Ok(())
    }
}

/// |g| (rad/s) from ħg = −(M·I0/λ)·sqrt(ħω_r/L_r)·⟨e|δ|g⟩.
pub fn coupling_g(cp: &CouplingParams, p: &PhaseQubitParams) -> f64 {
    let omega_r = 2.0 * PI * cp.f_r;
    (cp.m_qr * p.i0 / p.lambda() * (HBAR * omega_r / cp.l_r).sqrt() * cp.matrix_element / HBAR).abs()
}

/// Harmonic form g = (M/L_q)·sqrt(f_r/(2·f_q·L_r·C_q)), rad/s.
pub fn coupling_g_harmonic(cp: &CouplingParams, p: &PhaseQubitParams) -> f64 {
    cp.m_qr / p.l_q * (cp.f_r / (2.0 * cp.f_q * cp.l_r * p.c_q)).sqrt()
}

/// Inverse of [`coupling_g_harmonic`]: M = g·L_q·sqrt(2·f_q·C_q·L_r/f_r).
pub fn required_mutual_inductance(g: f64, p: &PhaseQubitParams, l_r: f64, f_r: f64, f_q: f64) -> f64 {
    g * p.l_q * (2.0 * f_q * p.c_q * l_r / f_r).sqrt()
}

fn detuning(f_q: f64, f_r: f64) -> Result<f64> {
    let d = 2.0 * PI * (f_q - f_r);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::domain("qubit and resonator are degenerate"));
    }
    Ok(d)
}

/// χ = g²/Δ with Δ = ω_q − ω_r, rad/s.
pub fn dispersive_shift(g: f64, f_q: f64, f_r: f64) -> Result<f64> {
    Ok(g * g / detuning(f_q, f_r)?)
}

/// n_c = (Δ/2g)².
pub fn critical_photons(g: f64, f_q: f64, f_r: f64) -> Result<f64> {
    let d = detuning(f_q, f_r)?;
    Ok((d / (2.0 * g)).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveCheck {
    /// 4g²(⟨n⟩ + 1)/Δ².
    pub ratio: f64,
    pub valid: bool,
}

/// Flags photon numbers where the dispersive expansion breaks down
/// (ratio above 0.1).
pub fn dispersive_validity(g: f64, f_q: f64, f_r: f64, mean_photons: f64) -> Result<DispersiveCheck> {
    let d = detuning(f_q, f_r)?;
    let ratio = 4.0 * g * g * (mean_photons + 1.0) / (d * d);
    Ok(DispersiveCheck { ratio, valid: ratio <= 0.1 })
}
