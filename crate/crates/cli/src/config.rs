//! Run configuration file. Every physical key names its unit; missing keys
//! and sections take the compiled-in defaults, and unknown keys are errors.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qrl_core::cavity_bloch::ReadoutParams;
use qrl_core::input_circuit::InputCircuit;
use qrl_core::johnson_noise::NoiseRunConfig;
use qrl_core::phase_qubit::{CountingRule, PhaseQubitParams};
use qrl_core::physcore::{FLUX_QUANTUM, PHI0_REDUCED};
use qrl_core::readout::{PipelineConfig, SweepSpec};
use qrl_core::squid::{GainSettings, OperatingPoint, SquidParams, TuneConfig};
use qrl_core::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSection {
    pub f_r_ghz: f64,
    pub chi_over_2pi_mhz: f64,
    pub kappa_over_2pi_mhz: f64,
    /// `null` disables qubit relaxation.
    #[serde(rename = "T1_ns")]
    pub t1_ns: Option<f64>,
    pub drive_over_kappa: f64,
    pub z_line_ohm: f64,
    pub detuning_over_chi: f64,
    pub dt_ns: f64,
    pub t_end_us: f64,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        Self {
            f_r_ghz: 6.19,
            chi_over_2pi_mhz: 0.7,
            kappa_over_2pi_mhz: 1.7,
            t1_ns: Some(900.0),
            drive_over_kappa: 0.5,
            z_line_ohm: 50.0,
            detuning_over_chi: -1.0,
            dt_ns: 0.5,
            t_end_us: 5.0,
        }
    }
}

impl ReadoutSection {
    pub fn params(&self) -> Result<ReadoutParams> {
        let kappa = 2.0 * PI * self.kappa_over_2pi_mhz * 1e6;
        let chi = 2.0 * PI * self.chi_over_2pi_mhz * 1e6;
        let p = ReadoutParams {
            f_r: self.f_r_ghz * 1e9,
            chi,
            kappa,
            gamma1: 0.0,
            eps_m: self.drive_over_kappa * kappa,
            z_line: self.z_line_ohm,
            delta_m: self.detuning_over_chi * chi,
        }
        .with_t1(self.t1_ns.map(|t| t * 1e-9))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputCircuitSection {
    #[serde(rename = "R1_ohm")]
    pub r1_ohm: f64,
    #[serde(rename = "C1_pf")]
    pub c1_pf: f64,
    #[serde(rename = "L_nh")]
    pub l_nh: f64,
    #[serde(rename = "C_pf")]
    pub c_pf: f64,
    #[serde(rename = "R_ohm")]
    pub r_ohm: f64,
    #[serde(rename = "M_nh")]
    pub m_nh: f64,
}

impl Default for InputCircuitSection {
    fn default() -> Self {
        let c = InputCircuit::default();
        Self {
            r1_ohm: c.r1,
            c1_pf: tidy(c.c1 * 1e12),
            l_nh: tidy(c.l * 1e9),
            c_pf: tidy(c.c * 1e12),
            r_ohm: c.r,
            m_nh: tidy(c.m * 1e9),
        }
    }
}

impl InputCircuitSection {
    pub fn circuit(&self) -> Result<InputCircuit> {
        let c = InputCircuit {
            r1: self.r1_ohm,
            c1: self.c1_pf * 1e-12,
            l: self.l_nh * 1e-9,
            c: self.c_pf * 1e-12,
            r: self.r_ohm,
            m: self.m_nh * 1e-9,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SquidSection {
    #[serde(rename = "I0_ua")]
    pub i0_ua: f64,
    #[serde(rename = "Rj_ohm")]
    pub rj_ohm: f64,
    #[serde(rename = "Cj_ff")]
    pub cj_ff: f64,
    #[serde(rename = "Lj_ph")]
    pub lj_ph: f64,
    pub gain_drive_uv: f64,
    pub gain_dt_ps: f64,
    pub gain_t_end_ns: f64,
    pub sweep_f_min_ghz: f64,
    pub sweep_f_max_ghz: f64,
    pub sweep_points: usize,
    pub tune_bias_min_over_i0: f64,
    pub tune_bias_max_over_i0: f64,
    pub tune_bias_points: usize,
    pub tune_flux_min_over_phi0: f64,
    pub tune_flux_max_over_phi0: f64,
    pub tune_flux_points: usize,
    pub tune_refine_levels: usize,
    pub tune_josephson_ratio: f64,
    pub tune_max_widen: usize,
    pub tune_bias_floor_over_i0: f64,
}

impl Default for SquidSection {
    fn default() -> Self {
        let p = SquidParams::default();
        let g = GainSettings::default();
        let s = SweepSpec::default();
        let t = TuneConfig::default();
        Self {
            i0_ua: tidy(p.i0 * 1e6),
            rj_ohm: p.r_j,
            cj_ff: tidy(p.c_j * 1e15),
            lj_ph: tidy(p.l_j * 1e12),
            gain_drive_uv: tidy(g.v_amp * 1e6),
            gain_dt_ps: tidy(g.dt * 1e12),
            gain_t_end_ns: tidy(g.t_end * 1e9),
            sweep_f_min_ghz: tidy(s.f_min * 1e-9),
            sweep_f_max_ghz: tidy(s.f_max * 1e-9),
            sweep_points: s.points,
            tune_bias_min_over_i0: t.bias_min,
            tune_bias_max_over_i0: t.bias_max,
            tune_bias_points: t.bias_points,
            tune_flux_min_over_phi0: t.flux_min,
            tune_flux_max_over_phi0: t.flux_max,
            tune_flux_points: t.flux_points,
            tune_refine_levels: t.refine_levels,
            tune_josephson_ratio: t.josephson_ratio,
            tune_max_widen: t.max_widen,
            tune_bias_floor_over_i0: t.bias_floor,
        }
    }
}

impl SquidSection {
    pub fn params(&self) -> Result<SquidParams> {
        let p = SquidParams {
            i0: self.i0_ua * 1e-6,
            r_j: self.rj_ohm,
            c_j: self.cj_ff * 1e-15,
            l_j: self.lj_ph * 1e-12,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gain_settings(&self) -> GainSettings {
        GainSettings {
            v_amp: self.gain_drive_uv * 1e-6,
            dt: self.gain_dt_ps * 1e-12,
            t_end: self.gain_t_end_ns * 1e-9,
        }
    }

    pub fn sweep(&self) -> SweepSpec {
        SweepSpec {
            f_min: self.sweep_f_min_ghz * 1e9,
            f_max: self.sweep_f_max_ghz * 1e9,
            points: self.sweep_points,
        }
    }

    pub fn tune(&self) -> TuneConfig {
        TuneConfig {
            bias_min: self.tune_bias_min_over_i0,
            bias_max: self.tune_bias_max_over_i0,
            bias_points: self.tune_bias_points,
            flux_min: self.tune_flux_min_over_phi0,
            flux_max: self.tune_flux_max_over_phi0,
            flux_points: self.tune_flux_points,
            refine_levels: self.tune_refine_levels,
            josephson_ratio: self.tune_josephson_ratio,
            max_widen: self.tune_max_widen,
            bias_floor: self.tune_bias_floor_over_i0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointSection {
    pub bias_over_i0: f64,
    pub flux_over_phi0: f64,
}

impl OperatingPointSection {
    pub fn point(&self, p: &SquidParams) -> Result<OperatingPoint> {
        let op = OperatingPoint {
            i_bias: self.bias_over_i0 * p.i0,
            phi_dc: self.flux_over_phi0 * FLUX_QUANTUM,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn from_point(op: &OperatingPoint, p: &SquidParams) -> Self {
        Self {
            bias_over_i0: op.i_bias / p.i0,
            flux_over_phi0: op.phi_dc / FLUX_QUANTUM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    #[serde(rename = "T_mk")]
    pub t_mk: f64,
    pub f_eval_ghz: f64,
    pub realizations: usize,
    pub record_ns: f64,
    pub dt_ps: f64,
    pub base_seed: u64,
    pub psd_scale: f64,
    /// Source resistor, tank resistor, junction 1, junction 2.
    pub enabled_sources: [bool; 4],
    /// Quoted output density checked against the noise-temperature relation.
    pub quoted_s_v2_per_hz: f64,
    pub quoted_gain_db: f64,
    #[serde(rename = "quoted_T_n_mk")]
    pub quoted_t_n_mk: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseRunConfig::default();
        Self {
            t_mk: tidy(n.temperature * 1e3),
            f_eval_ghz: tidy(n.f_eval * 1e-9),
            realizations: n.realizations,
            record_ns: tidy(n.t_i * 1e9),
            dt_ps: tidy(n.dt * 1e12),
            base_seed: n.base_seed,
            psd_scale: n.psd_scale,
            enabled_sources: n.enabled,
            quoted_s_v2_per_hz: 5e-20,
            quoted_gain_db: 14.9,
            quoted_t_n_mk: 440.0,
        }
    }
}

impl NoiseSection {
    pub fn run_config(&self) -> Result<NoiseRunConfig> {
        let cfg = NoiseRunConfig {
            temperature: self.t_mk * 1e-3,
            f_eval: self.f_eval_ghz * 1e9,
            realizations: self.realizations,
            t_i: self.record_ns * 1e-9,
            dt: self.dt_ps * 1e-12,
            base_seed: self.base_seed,
            psd_scale: self.psd_scale,
            enabled: self.enabled_sources,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseQubitSection {
    #[serde(rename = "C_q_ff")]
    pub c_q_ff: f64,
    #[serde(rename = "L_q_ph")]
    pub l_q_ph: f64,
    #[serde(rename = "I0_ua")]
    pub i0_ua: f64,
    /// `null` tunes the bias for `target_levels`.
    pub bias_over_phi0: Option<f64>,
    pub target_levels: usize,
    pub counting_rule: CountingRule,
    pub design_chi_over_2pi_mhz: f64,
    #[serde(rename = "design_L_r_nh")]
    pub design_l_r_nh: Vec<f64>,
    /// `null` uses the computed qubit frequency.
    pub design_f_q_ghz: Option<f64>,
    /// `null` uses the readout section's resonator frequency.
    pub design_f_r_ghz: Option<f64>,
}

impl Default for PhaseQubitSection {
    fn default() -> Self {
        let p = PhaseQubitParams::default();
        Self {
            c_q_ff: tidy(p.c_q * 1e15),
            l_q_ph: tidy(p.l_q * 1e12),
            i0_ua: tidy(p.i0 * 1e6),
            bias_over_phi0: None,
            target_levels: 5,
            counting_rule: CountingRule::Localized,
            design_chi_over_2pi_mhz: 0.7,
            design_l_r_nh: vec![1.0, 10.0],
            design_f_q_ghz: None,
            design_f_r_ghz: None,
        }
    }
}

impl PhaseQubitSection {
    pub fn params(&self) -> Result<PhaseQubitParams> {
        let mut p = PhaseQubitParams {
            c_q: self.c_q_ff * 1e-15,
            l_q: self.l_q_ph * 1e-12,
            i0: self.i0_ua * 1e-6,
            ..Default::default()
        };
        if let Some(b) = self.bias_over_phi0 {
            p.phi_p = b * PHI0_REDUCED;
        }
        p.validate()?;
        if self.target_levels == 0 {
            return Err(Error::Config("target_levels must be at least 1".into()));
        }
        if self.design_l_r_nh.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("design_L_r_nh entries must be positive".into()));
        }
        Ok(p)
    }
}

/// Half wavelength of a resonator at `f_r` in vacuum; informational only.
/// Rounds a unit conversion to 12 significant digits so defaults print cleanly.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn nominal_resonator_length(f_r: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * f_r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    #[serde(rename = "B_mhz")]
    pub b_mhz: f64,
    pub photon_scale: f64,
    pub target_snr: f64,
    pub trace_dt_ns: f64,
    pub trace_end_us: f64,
    /// SNR quoted for comparison with the computed value.
    pub quoted_snr: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            b_mhz: 2.0,
            photon_scale: 1.0,
            target_snr: 1.0,
            trace_dt_ns: 0.5,
            trace_end_us: 3.0,
            quoted_snr: 0.425,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub readout: ReadoutSection,
    pub input_circuit: InputCircuitSection,
    pub squid: SquidSection,
    pub operating_point: Option<OperatingPointSection>,
    pub noise: NoiseSection,
    pub phase_qubit: PhaseQubitSection,
    pub pipeline: PipelineSection,
}

impl RunConfig {
    /// Pipeline settings; the readout uses T₁ from the readout section.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let squid = self.squid.params()?;
        let cfg = PipelineConfig {
            readout: self.readout.params()?,
            circuit: self.input_circuit.circuit()?,
            squid,
            operating_point: self.operating_point.map(|o| o.point(&squid)).transpose()?,
            tune: self.squid.tune(),
            gain_settings: self.squid.gain_settings(),
            sweep: self.squid.sweep(),
            filter_bandwidth: self.pipeline.b_mhz * 1e6,
            noise: self.noise.run_config()?,
            photon_scale: self.pipeline.photon_scale,
            target_snr: self.pipeline.target_snr,
            trace_dt: self.pipeline.trace_dt_ns * 1e-9,
            trace_end: self.pipeline.trace_end_us * 1e-6,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parsed configuration with the list of keys that fell back to defaults.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub defaults_applied: Vec<String>,
}

pub fn parse(text: &str) -> Result<LoadedConfig> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let config: RunConfig = serde_path_to_error::deserialize(&raw)
        .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    let resolved = serde_json::to_value(&config).expect("config serializes");
    let mut defaults_applied = Vec::new();
    missing_keys(&resolved, &raw, "", &mut defaults_applied);
    Ok(LoadedConfig {
        config,
        defaults_applied,
    })
}

pub fn load(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse(&text)
        }
        None => parse("{}"),
    }
}

fn missing_keys(resolved: &Value, raw: &Value, prefix: &str, out: &mut Vec<String>) {
    let Value::Object(map) = resolved else { return };
    for (key, value) in map {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (raw.get(key), value) {
            (Some(inner), _) => missing_keys(value, inner, &path, out),
            (None, Value::Object(_)) => missing_keys(value, &Value::Null, &path, out),
            (None, _) => out.push(path),
        }
    }
}

/// One-line descriptions of the compiled-in defaults.
pub fn default_notes() -> Vec<(&'static str, &'static str)> {
    vec![
        ("readout.f_r_ghz", "readout resonator frequency"),
        ("readout.chi_over_2pi_mhz", "dispersive shift of the resonator"),
        ("readout.kappa_over_2pi_mhz", "resonator energy decay rate"),
        ("readout.T1_ns", "qubit relaxation time; null for no relaxation"),
        ("readout.drive_over_kappa", "drive amplitude in units of kappa; 0.5 gives one photon in the excited-state response"),
        ("readout.detuning_over_chi", "drive tuned to the excited-state resonance"),
        ("input_circuit", "MSA input network: source resistor, coupling capacitor, coil, tank capacitor and loss, mutual inductance"),
        ("squid", "SQUID junctions and loop; gain settings and the operating-point search box"),
        ("operating_point", "absent: tune bias and flux for peak gain at f_r"),
        ("noise.T_mk", "bath temperature"),
        ("noise.realizations", "Monte-Carlo realizations averaged for the output density"),
        ("noise.quoted_*", "quoted output density, gain and noise temperature checked for mutual consistency"),
        ("phase_qubit", "phase-qubit junction and loop; bias tuned for target_levels shallow-well levels"),
        ("phase_qubit.design_*", "coupling design: dispersive shift and resonator inductances"),
        ("pipeline.B_mhz", "filter bandwidth of the readout"),
        ("pipeline.quoted_snr", "quoted single-photon SNR for comparison"),
    ]
}
