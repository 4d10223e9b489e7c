use serde::Serialize;

use qrl_core::cavity_bloch::{integrate, voltage_scale, CavityBlochState, DrivePulse};
use qrl_core::johnson_noise::{check_temperature, estimate_output_psd, noise_temperature, TemperatureCheck};
use qrl_core::phase_qubit::{
    coupling_g, critical_photons, harmonic_matrix_element, matrix_element, required_mutual_inductance,
    shallow_count, solve_spectrum_auto, tune_bias_flux, CountingRule, CouplingParams, PhaseQubitParams, WellLabel,
};
use qrl_core::physcore::{db_from_power_ratio, power_ratio_from_db, PHI0_REDUCED, PLANCK};
use qrl_core::readout::{run_pipeline, snr, PartialReport, ReadoutReport};
use qrl_core::squid::{gain, gain_curve, linear_grid, tune_operating_point, OperatingPoint, TuningSurface};
use qrl_core::{Error, Result};

use crate::config::{nominal_resonator_length, OperatingPointSection, RunConfig};
use crate::output::{Emitter, RunMetadata, Stopwatch};

pub enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Core(e) => match e.root() {
                Error::Config(_) | Error::Precondition(_) => 2,
                Error::Tuning { .. } | Error::Infeasible(_) => 4,
                _ => 3,
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Io(e) => format!("i/o error: {e}"),
            Failure::Core(e) => e.to_string(),
        }
    }
}

pub struct Context {
    pub config: RunConfig,
    pub meta: RunMetadata,
    pub out: Emitter,
    pub watch: Stopwatch,
}

impl Context {
    fn finish_meta(&mut self) -> RunMetadata {
        self.meta.resolved_config = self.config.clone();
        let mut m = self.meta.clone();
        self.watch.stamp(&mut m);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TuneMode {
    /// Tune unless the config supplies an operating point.
    Auto,
    On,
    Off,
}

#[derive(Serialize)]
struct TunedPoint {
    operating_point: OperatingPointSection,
    tuned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning_surface: Option<TuningSurface>,
}

fn operating_point(ctx: &mut Context, mode: TuneMode) -> Result<(OperatingPoint, TunedPoint)> {
    let p = ctx.config.squid.params()?;
    let supplied = ctx.config.operating_point;
    let tune = match mode {
        TuneMode::On => true,
        TuneMode::Off => false,
        TuneMode::Auto => supplied.is_none(),
    };
    if !tune {
        let section = supplied.ok_or_else(|| Error::Config("tuning is off but no operating_point is configured".into()))?;
        return Ok((
            section.point(&p)?,
            TunedPoint {
                operating_point: section,
                tuned: false,
                tuning_surface: None,
            },
        ));
    }
    let c = ctx.config.input_circuit.circuit()?;
    let f_r = ctx.config.readout.params()?.f_r;
    let (gs, tc) = (ctx.config.squid.gain_settings(), ctx.config.squid.tune());
    let r = ctx.watch.time("tuning", || tune_operating_point(&p, &c, f_r, &gs, &tc))?;
    Ok((
        r.op,
        TunedPoint {
            operating_point: OperatingPointSection::from_point(&r.op, &p),
            tuned: true,
            tuning_surface: Some(r.surface),
        },
    ))
}

pub fn bloch(ctx: &mut Context, t1: Option<Option<f64>>) -> std::result::Result<(), Failure> {
    if let Some(t1) = t1 {
        ctx.config.readout.t1_ns = t1;
    }
    let r = &ctx.config.readout;
    let p = r.params()?;
    let (dt, t_end) = (r.dt_ns * 1e-9, r.t_end_us * 1e-6);
    let pulse = DrivePulse::step(p.eps_m);
    let (ex, gr) = ctx.watch.time("integrate", || -> Result<_> {
        Ok((
            integrate(&p, CavityBlochState::excited(), &pulse, dt, t_end)?,
            integrate(&p, CavityBlochState::ground(), &pulse, dt, t_end)?,
        ))
    })?;
    let scale = voltage_scale(&p);
    let rows: Vec<Vec<f64>> = (0..ex.len())
        .map(|k| {
            let (e, g) = (&ex.values[k], &gr.values[k]);
            vec![
                ex.time(k) * 1e6,
                -scale * e.a.im * 1e9,
                -scale * g.a.im * 1e9,
                e.n,
                g.n,
            ]
        })
        .collect();
    let meta = ctx.finish_meta();
    ctx.out.csv(
        "bloch.csv",
        &meta,
        &["t_us", "neg_V_excited_nV", "neg_V_ground_nV", "n_excited", "n_ground"],
        &rows,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct GainSummary {
    f_msa_ghz: f64,
    g_msa_db: f64,
    g_msa_db_interpolated: f64,
    bandwidth_mhz: Option<f64>,
    lower_edge_ghz: Option<f64>,
    upper_edge_ghz: Option<f64>,
    gain_at_f_r_db: Option<f64>,
    #[serde(flatten)]
    point: TunedPoint,
}

pub struct SweepOverride {
    pub f_min_ghz: Option<f64>,
    pub f_max_ghz: Option<f64>,
    pub points: Option<usize>,
}

pub fn gain_sweep(ctx: &mut Context, sweep: SweepOverride, mode: TuneMode) -> std::result::Result<(), Failure> {
    let s = &mut ctx.config.squid;
    s.sweep_f_min_ghz = sweep.f_min_ghz.unwrap_or(s.sweep_f_min_ghz);
    s.sweep_f_max_ghz = sweep.f_max_ghz.unwrap_or(s.sweep_f_max_ghz);
    s.sweep_points = sweep.points.unwrap_or(s.sweep_points);
    let (op, point) = operating_point(ctx, mode)?;
    let p = ctx.config.squid.params()?;
    let c = ctx.config.input_circuit.circuit()?;
    let gs = ctx.config.squid.gain_settings();
    let sw = ctx.config.squid.sweep();
    let grid = linear_grid(sw.f_min, sw.f_max, sw.points)?;
    let curve = ctx.watch.time("gain_curve", || gain_curve(&p, &op, &c, &grid, &gs))?;
    let f_r = ctx.config.readout.params()?.f_r;
    let at_f_r = grid
        .iter()
        .position(|f| (f - f_r).abs() < 1.0)
        .map(|i| db_from_power_ratio(curve.curve.values[i]))
        .transpose()?;
    let summary = GainSummary {
        f_msa_ghz: curve.peak_freq * 1e-9,
        g_msa_db: curve.peak_gain_db(),
        g_msa_db_interpolated: db_from_power_ratio(curve.peak_gain_interpolated)?,
        bandwidth_mhz: curve.bandwidth.map(|b| b * 1e-6),
        lower_edge_ghz: curve.lower_edge.map(|f| f * 1e-9),
        upper_edge_ghz: curve.upper_edge.map(|f| f * 1e-9),
        gain_at_f_r_db: at_f_r,
        point,
    };
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .zip(curve.gains_db())
        .map(|(f, g)| vec![f * 1e-9, g])
        .collect();
    let meta = ctx.finish_meta();
    ctx.out.csv("gain.csv", &meta, &["f_ghz", "gain_db"], &rows)?;
    ctx.out.json("gain_summary.json", &meta, &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct NoiseOutput {
    s_msa_v2_per_hz: f64,
    standard_error_v2_per_hz: Option<f64>,
    realizations: usize,
    lag1_autocorrelation: f64,
    gain_at_f_eval_db: f64,
    noise_temperature_k: std::result::Result<f64, String>,
    quoted_values: TemperatureCheck,
    #[serde(flatten)]
    point: TunedPoint,
    per_realization_v2_per_hz: Vec<f64>,
}

pub fn noise(ctx: &mut Context, realizations: Option<usize>) -> std::result::Result<(), Failure> {
    if let Some(n) = realizations {
        ctx.config.noise.realizations = n;
    }
    let cfg = ctx.config.noise.run_config()?;
    let (op, point) = operating_point(ctx, TuneMode::Auto)?;
    let p = ctx.config.squid.params()?;
    let c = ctx.config.input_circuit.circuit()?;
    let gs = ctx.config.squid.gain_settings();
    let g = ctx.watch.time("gain", || gain(&p, &op, &c, cfg.f_eval, &gs))?;
    let r = ctx.watch.time("noise", || estimate_output_psd(&p, &op, &c, &cfg))?;
    let n = &ctx.config.noise;
    let quoted = check_temperature(
        n.quoted_s_v2_per_hz,
        power_ratio_from_db(n.quoted_gain_db),
        n.quoted_t_n_mk * 1e-3,
        c.r1,
        cfg.temperature,
        cfg.f_eval,
        0.05,
    )?;
    let out = NoiseOutput {
        s_msa_v2_per_hz: r.s_out,
        standard_error_v2_per_hz: r.standard_error,
        realizations: cfg.realizations,
        lag1_autocorrelation: r.lag1_autocorrelation(),
        gain_at_f_eval_db: g.gain_db(),
        noise_temperature_k: noise_temperature(r.s_out, g.gain, c.r1, cfg.temperature, cfg.f_eval)
            .map_err(|e| e.to_string()),
        quoted_values: quoted,
        point,
        per_realization_v2_per_hz: r.per_realization,
    };
    let meta = ctx.finish_meta();
    ctx.out.json("noise.json", &meta, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct Level {
    index: usize,
    /// (E − U_shallow_min)/h.
    energy_ghz: f64,
    label: WellLabel,
}

#[derive(Serialize)]
struct BiasChoice {
    counting_rule: CountingRule,
    bias_over_phi0: f64,
    interval_over_phi0: Option<(f64, f64)>,
    /// Shallow-well levels under `counting_rule`.
    levels_by_rule: usize,
    /// Levels whose wavefunction is localized in the shallow well.
    localized_levels: usize,
    qubit_frequency_ghz: f64,
}

#[derive(Serialize)]
struct CouplingDesign {
    l_r_nh: f64,
    g_over_2pi_mhz: f64,
    chi_over_2pi_mhz: f64,
    critical_photons: f64,
    m_qr_ph: f64,
    /// Coupling from the numeric matrix element at this M_qr.
    g_numeric_over_2pi_mhz: f64,
}

#[derive(Serialize)]
struct QubitOutput {
    e_j_over_h_ghz: f64,
    lambda: f64,
    l0_ph: f64,
    phi_p_wb: f64,
    #[serde(flatten)]
    choice: BiasChoice,
    shallow_plasma_frequency_ghz: f64,
    barrier_ghz: f64,
    matrix_element: f64,
    harmonic_matrix_element: f64,
    max_residual_over_e_j: f64,
    orthonormality_error: f64,
    levels: Vec<Level>,
    alternative: Option<BiasChoice>,
    design_f_q_ghz: f64,
    design_f_r_ghz: f64,
    coupling: Vec<CouplingDesign>,
}

fn choose_bias(p: &PhaseQubitParams, target: usize, rule: CountingRule) -> Result<(PhaseQubitParams, BiasChoice)> {
    let t = tune_bias_flux(p, target, rule)?;
    let tuned = PhaseQubitParams { phi_p: t.phi_p, ..*p };
    Ok((
        tuned,
        BiasChoice {
            counting_rule: rule,
            bias_over_phi0: tuned.reduced_bias(),
            interval_over_phi0: Some(t.interval),
            levels_by_rule: target,
            localized_levels: t.spectrum.shallow_count,
            qubit_frequency_ghz: t.qubit_frequency * 1e-9,
        },
    ))
}

pub fn qubit(ctx: &mut Context) -> std::result::Result<(), Failure> {
    let q = ctx.config.phase_qubit.clone();
    let p = q.params()?;
    let (p, choice, alternative) = match q.bias_over_phi0 {
        Some(_) => {
            let s = solve_spectrum_auto(&p, 0.0)?;
            let choice = BiasChoice {
                counting_rule: q.counting_rule,
                bias_over_phi0: p.reduced_bias(),
                interval_over_phi0: None,
                levels_by_rule: shallow_count(&p, q.counting_rule)?,
                localized_levels: s.shallow_count,
                qubit_frequency_ghz: s.qubit_frequency()? * 1e-9,
            };
            (p, choice, None)
        }
        None => {
            let (tuned, choice) = ctx.watch.time("tune_bias", || choose_bias(&p, q.target_levels, q.counting_rule))?;
            let other = match q.counting_rule {
                CountingRule::Localized => CountingRule::HarmonicLadder,
                CountingRule::HarmonicLadder => CountingRule::Localized,
            };
            let alt = ctx
                .watch
                .time("tune_bias_alternative", || choose_bias(&p, q.target_levels, other))
                .ok()
                .map(|(_, c)| c);
            (tuned, choice, alt)
        }
    };
    let s = ctx.watch.time("spectrum", || solve_spectrum_auto(&p, 0.0))?;
    let f_q = s.qubit_frequency()?;
    let me = matrix_element(&s)?;
    let u_s = s.wells.shallow.energy * s.e_j;
    let levels = s
        .energies
        .iter()
        .zip(&s.labels)
        .enumerate()
        .map(|(index, (e, l))| Level {
            index,
            energy_ghz: (e - u_s) / PLANCK * 1e-9,
            label: *l,
        })
        .collect();

    let design_f_q = q.design_f_q_ghz.map_or(f_q, |f| f * 1e9);
    let design_f_r = q.design_f_r_ghz.map_or(Ok(ctx.config.readout.f_r_ghz * 1e9), |f| Ok::<_, Error>(f * 1e9))?;
    let chi = 2.0 * std::f64::consts::PI * q.design_chi_over_2pi_mhz * 1e6;
    let detuning = 2.0 * std::f64::consts::PI * (design_f_q - design_f_r);
    if !(chi * detuning > 0.0) {
        return Err(Error::Domain("dispersive shift and qubit-resonator detuning must have the same sign".into()).into());
    }
    let g = (chi * detuning).sqrt();
    let mut coupling = Vec::new();
    for &l_r_nh in &q.design_l_r_nh {
        let l_r = l_r_nh * 1e-9;
        let m = required_mutual_inductance(g, &p, l_r, design_f_r, design_f_q);
        let cp = CouplingParams {
            m_qr: m,
            l_r,
            f_r: design_f_r,
            f_q: design_f_q,
            matrix_element: me,
            d_r: nominal_resonator_length(design_f_r),
        };
        cp.validate()?;
        coupling.push(CouplingDesign {
            l_r_nh,
            g_over_2pi_mhz: g / (2.0 * std::f64::consts::PI) * 1e-6,
            chi_over_2pi_mhz: q.design_chi_over_2pi_mhz,
            critical_photons: critical_photons(g, design_f_q, design_f_r)?,
            m_qr_ph: m * 1e12,
            g_numeric_over_2pi_mhz: coupling_g(&cp, &p) / (2.0 * std::f64::consts::PI) * 1e-6,
        });
    }

    let out = QubitOutput {
        e_j_over_h_ghz: p.e_j() / PLANCK * 1e-9,
        lambda: p.lambda(),
        l0_ph: p.l0() * 1e12,
        phi_p_wb: p.reduced_bias() * PHI0_REDUCED,
        choice,
        shallow_plasma_frequency_ghz: s.wells.shallow_plasma_frequency(&p) / (2.0 * std::f64::consts::PI) * 1e-9,
        barrier_ghz: (s.barrier_energy - u_s) / PLANCK * 1e-9,
        matrix_element: me,
        harmonic_matrix_element: harmonic_matrix_element(&p, f_q),
        max_residual_over_e_j: s.max_residual(),
        orthonormality_error: s.orthonormality_error(),
        levels,
        alternative,
        design_f_q_ghz: design_f_q * 1e-9,
        design_f_r_ghz: design_f_r * 1e-9,
        coupling,
    };
    let meta = ctx.finish_meta();
    ctx.out.json("qubit.json", &meta, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct PipelineOutput<'a> {
    #[serde(flatten)]
    report: &'a ReadoutReport,
    quoted_snr: f64,
    /// SNR from the quoted S·B and D_max, for reference.
    snr_at_quoted_noise_power: f64,
}

#[derive(Serialize)]
struct PipelinePartial<'a> {
    failed: String,
    partial: &'a PartialReport,
}

pub fn pipeline(ctx: &mut Context) -> std::result::Result<(), Failure> {
    let cfg = ctx.config.pipeline()?;
    let result = ctx.watch.time("pipeline", || run_pipeline(&cfg));
    let report = match result {
        Ok(r) => r,
        Err(f) => {
            let meta = ctx.finish_meta();
            ctx.out.json(
                "pipeline_partial.json",
                &meta,
                &PipelinePartial {
                    failed: f.error.to_string(),
                    partial: &f.partial,
                },
            )?;
            return Err(Failure::Core(f.error));
        }
    };
    let quoted_power = ctx.config.noise.quoted_s_v2_per_hz * cfg.filter_bandwidth;
    let out = PipelineOutput {
        report: &report,
        quoted_snr: ctx.config.pipeline.quoted_snr,
        snr_at_quoted_noise_power: snr(report.d_max, quoted_power, 1.0)?,
    };
    let rows: Vec<Vec<f64>> = report
        .d_trace
        .iter()
        .map(|(t, d)| vec![t * 1e6, d * 1e9])
        .collect();
    let meta = ctx.finish_meta();
    ctx.out.json("pipeline.json", &meta, &out)?;
    ctx.out.csv("pipeline_d.csv", &meta, &["t_us", "D_nV"], &rows)?;
    Ok(())
}
