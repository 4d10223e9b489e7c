//! End-to-end readout figure of merit: the amplified voltage difference
//! between the two qubit states, its signal-to-noise ratio in a filter
//! bandwidth, and the drive increase needed for unit SNR.

use std::fmt;

use serde::Serialize;

use crate::cavity_bloch::{quadrature_trace, ReadoutParams};
use crate::input_circuit::InputCircuit;
use crate::johnson_noise::{estimate_output_psd, noise_temperature, NoiseRunConfig, NoiseSpectrumResult};
use crate::physcore::{db_from_power_ratio, TimeSeries};
use crate::squid::{
    gain, gain_curve, linear_grid, tune_operating_point, GainCurve, GainSettings, OperatingPoint, SquidParams,
    TuneConfig, TuningSurface,
};
use crate::{Error, Result};

/// Upper end of the amplifier's linear input range, V.
pub const LINEAR_RANGE: f64 = 30e-6;

/// Amplified difference D(t) = sqrt(G)·|V₊(t) − V₋(t)| of the quadrature
/// voltages for a qubit starting excited and in the ground state.
pub fn voltage_difference(p: &ReadoutParams, amp_gain: f64, dt: f64, t_end: f64) -> Result<TimeSeries<f64>> {
    if !(amp_gain > 0.0) || !amp_gain.is_finite() {
        return Err(Error::domain(format!("power gain must be positive, got {amp_gain}")));
    }
    let (excited, ground) = input_traces(p, dt, t_end)?;
    let a = amp_gain.sqrt();
    let values = excited.values.iter().zip(&ground.values).map(|(e, g)| a * (e - g).abs()).collect();
    TimeSeries::new(0.0, excited.dt, values)
}

fn input_traces(p: &ReadoutParams, dt: f64, t_end: f64) -> Result<(TimeSeries<f64>, TimeSeries<f64>)> {
    Ok((quadrature_trace(p, 1.0, dt, t_end)?, quadrature_trace(p, -1.0, dt, t_end)?))
}

/// SNR = D_max / sqrt(S·B).
pub fn snr(d_max: f64, s_msa: f64, bandwidth: f64) -> Result<f64> {
    if !(d_max >= 0.0) || !(s_msa > 0.0) || !(bandwidth > 0.0) {
        return Err(Error::domain("SNR needs D_max >= 0, S > 0 and B > 0"));
    }
    Ok(d_max / (s_msa * bandwidth).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonScaling {
    /// Factor on the input voltage.
    pub k: f64,
    /// Mean photon number, K².
    pub n: f64,
}

/// Drive increase K = target/SNR₁ for a target SNR, with ⟨n⟩ = K².
pub fn photon_scaling(snr_at_one_photon: f64, target_snr: f64) -> Result<PhotonScaling> {
    if !(snr_at_one_photon > 0.0) || !(target_snr > 0.0) {
        return Err(Error::domain("photon scaling needs positive SNR values"));
    }
    let k = target_snr / snr_at_one_photon;
    Ok(PhotonScaling { k, n: k * k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            f_min: 5.8e9,
            f_max: 6.6e9,
            points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Resonator and qubit; `eps_m` is the one-photon reference drive.
    pub readout: ReadoutParams,
    pub circuit: InputCircuit,
    pub squid: SquidParams,
    /// Skips tuning when present.
    pub operating_point: Option<OperatingPoint>,
    pub tune: TuneConfig,
    pub gain_settings: GainSettings,
    pub sweep: SweepSpec,
    /// Filter bandwidth B, Hz.
    pub filter_bandwidth: f64,
    pub noise: NoiseRunConfig,
    /// Factor K on the drive amplitude.
    pub photon_scale: f64,
    pub target_snr: f64,
    pub trace_dt: f64,
    pub trace_end: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            readout: ReadoutParams::default()
                .with_t1(Some(900e-9))
                .expect("default T1 is valid"),
            circuit: InputCircuit::default(),
            squid: SquidParams::default(),
            operating_point: None,
            tune: TuneConfig::default(),
            gain_settings: GainSettings::default(),
            sweep: SweepSpec::default(),
            filter_bandwidth: 2e6,
            noise: NoiseRunConfig::default(),
            photon_scale: 1.0,
            target_snr: 1.0,
            trace_dt: 0.5e-9,
            trace_end: 3e-6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.readout.validate()?;
        self.circuit.validate()?;
        self.squid.validate()?;
        self.noise.validate()?;
        if let Some(op) = &self.operating_point {
            op.validate()?;
        }
        for (name, v) in [
            ("filter bandwidth", self.filter_bandwidth),
            ("photon scale", self.photon_scale),
            ("target SNR", self.target_snr),
            ("trace step", self.trace_dt),
            ("trace length", self.trace_end),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReadoutReport {
    pub operating_point: OperatingPoint,
    /// Present when the operating point was tuned.
    pub tuning: Option<TuningSurface>,
    /// Power gain at the resonator frequency used to amplify the traces.
    pub amp_gain: f64,
    pub amp_gain_db: f64,
    pub gain_curve: GainCurve,
    pub noise: NoiseSpectrumResult,
    /// Noise temperature from S_MSA, or why it could not be formed.
    pub noise_temperature: std::result::Result<f64, String>,
    pub d_trace: TimeSeries<f64>,
    pub d_max: f64,
    pub t_peak: f64,
    pub s_msa: f64,
    pub filter_bandwidth: f64,
    pub noise_power: f64,
    pub snr: f64,
    pub photon_scale: f64,
    pub target_snr: f64,
    /// SNR with K = 1.
    pub snr_one_photon: f64,
    pub k_required: f64,
    pub n_required: f64,
    /// Largest |quadrature voltage| at the amplifier input for K = 1.
    pub max_input_one_photon: f64,
    /// Largest input over the configured K and K_required.
    pub max_input: f64,
    pub linearity_ok: bool,
}

impl ReadoutReport {
    /// Recomputes the derived fields from the embedded intermediates.
    pub fn check_consistency(&self) -> Result<()> {
        let (i, d) = self
            .d_trace
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let ok = d == self.d_max
            && self.d_trace.time(i) == self.t_peak
            && self.s_msa == self.noise.s_out
            && self.noise_power == self.s_msa * self.filter_bandwidth
            && self.snr == self.d_max / self.noise_power.sqrt()
            && self.snr_one_photon == self.snr / self.photon_scale
            && self.k_required == self.target_snr / self.snr_one_photon
            && self.n_required == self.k_required * self.k_required
            && self.linearity_ok == (self.max_input < LINEAR_RANGE);
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition("report fields are not consistent with their inputs".into()))
        }
    }
}

/// Artifacts of the stages that completed before a failure.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PartialReport {
    pub operating_point: Option<OperatingPoint>,
    pub tuning: Option<TuningSurface>,
    pub amp_gain: Option<f64>,
    pub gain_curve: Option<GainCurve>,
    pub noise: Option<NoiseSpectrumResult>,
}

#[derive(Debug)]
pub struct PipelineFailure {
    /// Stage-annotated error.
    pub error: Error,
    pub partial: Box<PartialReport>,
}

impl fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for PipelineFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs tuning (unless an operating point is given), the gain sweep, the
/// noise estimate, the state-dependent traces and the SNR bookkeeping.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<ReadoutReport, PipelineFailure> {
    let mut partial = PartialReport::default();
    macro_rules! stage {
        ($name:literal, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => {
                    return Err(PipelineFailure {
                        error: Error::in_stage(err, $name),
                        partial: Box::new(partial),
                    })
                }
            }
        };
    }

    stage!("config", cfg.validate());
    let f_r = cfg.readout.f_r;
    let (op, amp_gain) = match cfg.operating_point {
        Some(op) => {
            let g = stage!("gain", gain(&cfg.squid, &op, &cfg.circuit, f_r, &cfg.gain_settings));
            (op, g.gain)
        }
        None => {
            let t = stage!(
                "tuning",
                tune_operating_point(&cfg.squid, &cfg.circuit, f_r, &cfg.gain_settings, &cfg.tune)
            );
            partial.tuning = Some(t.surface);
            (t.op, t.gain.gain)
        }
    };
    partial.operating_point = Some(op);
    partial.amp_gain = Some(amp_gain);
    let amp_gain_db = stage!("gain", db_from_power_ratio(amp_gain));

    let grid = stage!("gain_curve", linear_grid(cfg.sweep.f_min, cfg.sweep.f_max, cfg.sweep.points));
    let curve = stage!(
        "gain_curve",
        gain_curve(&cfg.squid, &op, &cfg.circuit, &grid, &cfg.gain_settings)
    );
    partial.gain_curve = Some(curve.clone());

    let noise = stage!("noise", estimate_output_psd(&cfg.squid, &op, &cfg.circuit, &cfg.noise));
    partial.noise = Some(noise.clone());
    let s_msa = noise.s_out;
    let t_n = noise_temperature(s_msa, amp_gain, cfg.circuit.r1, cfg.noise.temperature, cfg.noise.f_eval)
        .map_err(|e| e.to_string());

    let mut driven = cfg.readout;
    driven.eps_m *= cfg.photon_scale;
    let d_trace = stage!(
        "traces",
        voltage_difference(&driven, amp_gain, cfg.trace_dt, cfg.trace_end)
    );
    let (excited, ground) = stage!("traces", input_traces(&cfg.readout, cfg.trace_dt, cfg.trace_end));
    let max_input_one_photon = excited
        .values
        .iter()
        .chain(&ground.values)
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let (i_peak, d_max) = d_trace
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let t_peak = d_trace.time(i_peak);
    let noise_power = s_msa * cfg.filter_bandwidth;
    let snr_value = stage!("snr", snr(d_max, s_msa, cfg.filter_bandwidth));
    let snr_one_photon = snr_value / cfg.photon_scale;
    let scaling = stage!("snr", photon_scaling(snr_one_photon, cfg.target_snr));
    let max_input = max_input_one_photon * cfg.photon_scale.max(scaling.k);

    let report = ReadoutReport {
        operating_point: op,
        tuning: partial.tuning.take(),
        amp_gain,
        amp_gain_db,
        gain_curve: curve,
        noise,
        noise_temperature: t_n,
        d_trace,
        d_max,
        t_peak,
        s_msa,
        filter_bandwidth: cfg.filter_bandwidth,
        noise_power,
        snr: snr_value,
        photon_scale: cfg.photon_scale,
        target_snr: cfg.target_snr,
        snr_one_photon,
        k_required: scaling.k,
        n_required: scaling.n,
        max_input_one_photon,
        max_input,
        linearity_ok: max_input < LINEAR_RANGE,
    };
    stage!("report", report.check_consistency());
    Ok(report)
}
