//! File emission: JSON documents with a metadata block, CSV tables with a
//! `#`-prefixed metadata header, and optional gnuplot stubs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub base_seed: u64,
    pub resolved_config: RunConfig,
    pub defaults_applied: Vec<String>,
    /// Seconds since the Unix epoch; only with `--timings`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_timings: Option<Vec<StageTiming>>,
}

/// Per-stage stopwatch; records nothing unless enabled so that outputs stay
/// byte-identical between runs.
pub struct Stopwatch {
    enabled: bool,
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            stages: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.stages.push(StageTiming {
                stage: stage.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        out
    }

    pub fn stamp(&self, meta: &mut RunMetadata) {
        if self.enabled {
            meta.wall_clock = Some(
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
            );
            meta.stage_timings = Some(self.stages.clone());
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a RunMetadata,
    result: &'a T,
}

pub struct Emitter {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

impl Emitter {
    pub fn new(dir: &Path, gnuplot: bool) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            gnuplot,
        })
    }

    pub fn json<T: Serialize>(&self, name: &str, meta: &RunMetadata, result: &T) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &Document { metadata: meta, result })?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    /// Writes `rows` under `header` with 9 significant digits.
    pub fn csv(&self, name: &str, meta: &RunMetadata, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# {} {} {}", meta.tool, meta.version, meta.command)?;
        writeln!(w, "# base_seed {}", meta.base_seed)?;
        writeln!(w, "# metadata {}", serde_json::to_string(meta)?)?;
        let mut table = csv::Writer::from_writer(w);
        table.write_record(header)?;
        for row in rows {
            table.write_record(row.iter().map(|v| format!("{v:.8e}")))?;
        }
        table.flush()?;
        if self.gnuplot {
            self.gnuplot_stub(name, header)?;
        }
        Ok(path)
    }

    fn gnuplot_stub(&self, csv_name: &str, header: &[&str]) -> std::io::Result<()> {
        let stem = csv_name.trim_end_matches(".csv");
        let mut w = BufWriter::new(File::create(self.dir.join(format!("{stem}.gp")))?);
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set datafile commentschars '#'")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set xlabel '{}'", header[0])?;
        let plots: Vec<String> = (2..=header.len())
            .map(|k| {
                let file = if k == 2 { format!("'{csv_name}'") } else { "''".to_string() };
                format!("{file} using 1:{k} with lines")
            })
            .collect();
        writeln!(w, "plot {}", plots.join(", \\\n     "))?;
        w.flush()
    }
}
