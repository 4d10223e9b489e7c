//! `qrl`: batch front end for the readout simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 tuning or infeasibility failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{Context, Failure, SweepOverride, TuneMode};
use output::{Emitter, RunMetadata, Stopwatch};

#[derive(Parser)]
#[command(name = "qrl", version, about = "Dispersive-readout simulator: cavity, amplifier, noise, phase qubit")]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Base seed for noise sampling (overrides the config).
    #[arg(long, global = true, env = "QRL_SEED")]
    seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also write a gnuplot script next to every CSV file.
    #[arg(long, global = true)]
    gnuplot_stub: bool,

    /// Record wall-clock time and per-stage timings in the metadata
    /// (outputs are then no longer byte-reproducible).
    #[arg(long, global = true)]
    timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resonator response for both qubit states (CSV).
    Bloch {
        /// Qubit relaxation time in ns, or `inf`.
        #[arg(long, value_parser = parse_t1)]
        t1: Option<Relaxation>,
    },
    /// Amplifier gain sweep (CSV and JSON summary).
    Gain {
        #[arg(long)]
        fmin: Option<f64>,
        #[arg(long)]
        fmax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        tune: TuneMode,
    },
    /// Output noise density and noise temperature (JSON).
    Noise {
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Phase-qubit bias, levels and coupling design (JSON).
    Qubit,
    /// Full readout chain (JSON report and CSV of D(t)).
    Pipeline,
    /// Print the compiled-in default configuration.
    PrintDefaults,
}

/// Relaxation time in ns; `None` means no decay.
#[derive(Debug, Clone, Copy)]
struct Relaxation(Option<f64>);

fn parse_t1(s: &str) -> Result<Relaxation, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(Relaxation(None));
    }
    let v: f64 = s.parse().map_err(|_| format!("expected `inf` or a time in ns, got `{s}`"))?;
    Ok(Relaxation(Some(v)))
}

#[derive(Serialize)]
struct Defaults {
    config: config::RunConfig,
    notes: std::collections::BTreeMap<&'static str, &'static str>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Core(qrl_core::Error::Config(format!("thread pool: {e}"))))?;
    }
    if let Command::PrintDefaults = cli.command {
        let d = Defaults {
            config: config::RunConfig::default(),
            notes: config::default_notes().into_iter().collect(),
        };
        println!("{}", serde_json::to_string_pretty(&d).expect("defaults serialize"));
        return Ok(());
    }

    let loaded = config::load(cli.config.as_deref())?;
    let mut cfg = loaded.config;
    if let Some(seed) = cli.seed {
        cfg.noise.base_seed = seed;
    }
    let command = match &cli.command {
        Command::Bloch { .. } => "bloch",
        Command::Gain { .. } => "gain",
        Command::Noise { .. } => "noise",
        Command::Qubit => "qubit",
        Command::Pipeline => "pipeline",
        Command::PrintDefaults => unreachable!(),
    };
    let meta = RunMetadata {
        tool: "qrl",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        base_seed: cfg.noise.base_seed,
        resolved_config: cfg.clone(),
        defaults_applied: loaded.defaults_applied,
        wall_clock: None,
        stage_timings: None,
    };
    let mut ctx = Context {
        config: cfg,
        meta,
        out: Emitter::new(&cli.out_dir, cli.gnuplot_stub)?,
        watch: Stopwatch::new(cli.timings),
    };
    match cli.command {
        Command::Bloch { t1 } => commands::bloch(&mut ctx, t1.map(|r| r.0)),
        Command::Gain { fmin, fmax, points, tune } => commands::gain_sweep(
            &mut ctx,
            SweepOverride {
                f_min_ghz: fmin,
                f_max_ghz: fmax,
                points,
            },
            tune,
        ),
        Command::Noise { realizations } => commands::noise(&mut ctx, realizations),
        Command::Qubit => commands::qubit(&mut ctx),
        Command::Pipeline => commands::pipeline(&mut ctx),
        Command::PrintDefaults => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qrl: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn invoke(dir: &Path, config: Option<&str>, args: &[&str]) -> Result<(), Failure> {
        let mut argv = vec!["qrl".to_string(), "--out-dir".into(), dir.display().to_string()];
        if let Some(text) = config {
            let path = dir.join("config.json");
            std::fs::create_dir_all(dir).unwrap();
            std::fs::write(&path, text).unwrap();
            argv.extend(["--config".into(), path.display().to_string()]);
        }
        argv.extend(args.iter().map(|s| s.to_string()));
        run(Cli::try_parse_from(argv).expect("arguments parse"))
    }

    fn exit_code(r: Result<(), Failure>) -> i32 {
        r.err().map_or(0, |f| f.exit_code())
    }

    fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        (header, rows)
    }

    const FIXED_POINT: &str = r#"{"operating_point": {"bias_over_i0": 1.775, "flux_over_phi0": 0.2125}"#;

    #[test]
    fn t1_argument_accepts_inf_and_numbers() {
        assert_eq!(parse_t1("inf").unwrap().0, None);
        assert_eq!(parse_t1("INF").unwrap().0, None);
        assert_eq!(parse_t1("900").unwrap().0, Some(900.0));
        assert!(parse_t1("soon").is_err());
    }

    #[test]
    fn bloch_without_relaxation_saturates_at_the_voltage_scale() {
        let dir = tempfile::tempdir().unwrap();
        invoke(dir.path(), None, &["bloch", "--t1", "inf"]).map_err(|f| f.message()).unwrap();
        let (header, rows) = table(&dir.path().join("bloch.csv"));
        assert_eq!(header, ["t_us", "neg_V_excited_nV", "neg_V_ground_nV", "n_excited", "n_ground"]);
        let last = rows.last().unwrap();
        assert!((last[0] - 5.0).abs() < 1e-9);
        assert!((last[1] - 46.8).abs() < 0.5, "{}", last[1]);
        let text = std::fs::read_to_string(dir.path().join("bloch.csv")).unwrap();
        assert!(text.starts_with("# qrl "));
        assert!(text.contains("# metadata {"));
    }

    #[test]
    fn bloch_with_relaxation_traces_converge() {
        let dir = tempfile::tempdir().unwrap();
        invoke(dir.path(), None, &["bloch", "--t1", "900"]).map_err(|f| f.message()).unwrap();
        let (_, rows) = table(&dir.path().join("bloch.csv"));
        let gap = |r: &Vec<f64>| (r[1] - r[2]).abs();
        let widest = rows.iter().map(gap).fold(0.0, f64::max);
        assert!(gap(rows.last().unwrap()) < 0.05 * widest);
    }

    #[test]
    fn zero_relaxation_time_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(exit_code(invoke(dir.path(), None, &["bloch", "--t1", "0"])), 2);
    }

    #[test]
    fn unknown_key_exits_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        let r = invoke(dir.path(), Some(r#"{"readout": {"f_r": 6}}"#), &["bloch"]);
        let f = r.err().unwrap();
        assert_eq!(f.exit_code(), 2);
        assert!(f.message().contains("readout"), "{}", f.message());
    }

    #[test]
    fn tuning_off_needs_an_operating_point() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(exit_code(invoke(dir.path(), None, &["gain", "--tune", "off"])), 2);
    }

    #[test]
    fn gain_with_fixed_point_writes_curve_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = format!("{FIXED_POINT}}}");
        let args = ["gain", "--tune", "off", "--fmin", "6.1", "--fmax", "6.3", "--points", "3", "--gnuplot-stub"];
        invoke(dir.path(), Some(&cfg), &args).map_err(|f| f.message()).unwrap();
        let (header, rows) = table(&dir.path().join("gain.csv"));
        assert_eq!(header, ["f_ghz", "gain_db"]);
        assert_eq!(rows.len(), 3);
        assert!(dir.path().join("gain.gp").exists());
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("gain_summary.json")).unwrap()).unwrap();
        let r = &summary["result"];
        assert_eq!(r["tuned"], false);
        assert!(r["g_msa_db"].as_f64().unwrap().is_finite());
        assert!((r["operating_point"]["bias_over_i0"].as_f64().unwrap() - 1.775).abs() < 1e-12);
        assert_eq!(summary["metadata"]["command"], "gain");
        assert!(summary["metadata"].get("wall_clock").is_none());
    }

    #[test]
    fn small_noise_run_reports_standard_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = format!(r#"{FIXED_POINT}, "noise": {{"record_ns": 20}}}}"#);
        invoke(dir.path(), Some(&cfg), &["--seed", "5", "noise", "--realizations", "4"])
            .map_err(|f| f.message())
            .unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("noise.json")).unwrap()).unwrap();
        let r = &doc["result"];
        assert!(r["standard_error_v2_per_hz"].as_f64().unwrap() > 0.0);
        assert_eq!(r["per_realization_v2_per_hz"].as_array().unwrap().len(), 4);
        assert_eq!(r["quoted_values"]["consistent"], false);
        assert_eq!(doc["metadata"]["base_seed"], 5);
    }

    #[test]
    fn unreachable_level_count_exits_with_infeasible_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"phase_qubit": {"target_levels": 400}}"#;
        assert_eq!(exit_code(invoke(dir.path(), Some(cfg), &["qubit"])), 4);
    }

    #[test]
    fn qubit_at_fixed_bias_lists_levels_and_coupling() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"phase_qubit": {"bias_over_phi0": 5.12, "design_f_q_ghz": 8.66}}"#;
        invoke(dir.path(), Some(cfg), &["qubit"]).map_err(|f| f.message()).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("qubit.json")).unwrap()).unwrap();
        let r = &doc["result"];
        assert_eq!(r["localized_levels"], 5);
        assert!(r["levels"].as_array().unwrap().len() >= 12);
        let m: Vec<f64> = r["coupling"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["m_qr_ph"].as_f64().unwrap())
            .collect();
        assert!((m[0] - 8.3).abs() < 0.02 * 8.3, "{m:?}");
        assert!((m[1] - 26.0).abs() < 0.02 * 26.0, "{m:?}");
    }

    #[test]
    fn resolved_config_reproduces_the_data() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("first");
        invoke(&first, Some(r#"{"readout": {"t_end_us": 1}}"#), &["bloch"]).map_err(|f| f.message()).unwrap();
        let text = std::fs::read_to_string(first.join("bloch.csv")).unwrap();
        let meta: serde_json::Value = serde_json::from_str(
            text.lines().find_map(|l| l.strip_prefix("# metadata ")).unwrap(),
        )
        .unwrap();
        let resolved = serde_json::to_string(&meta["resolved_config"]).unwrap();
        let second = dir.path().join("second");
        invoke(&second, Some(&resolved), &["bloch"]).map_err(|f| f.message()).unwrap();
        assert_eq!(table(&first.join("bloch.csv")), table(&second.join("bloch.csv")));
    }

    #[test]
    fn timings_flag_adds_clock_fields() {
        let dir = tempfile::tempdir().unwrap();
        invoke(dir.path(), None, &["--timings", "bloch"]).map_err(|f| f.message()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("bloch.csv")).unwrap();
        let meta: serde_json::Value = serde_json::from_str(
            text.lines().find_map(|l| l.strip_prefix("# metadata ")).unwrap(),
        )
        .unwrap();
        assert!(meta["wall_clock"].as_f64().unwrap() > 0.0);
        assert_eq!(meta["stage_timings"][0]["stage"], "integrate");
    }
}
