//! Command implementations behind the `ttedge` binary.
//!
//! Exit codes depend only on the error class:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | `verify`: reconstruction error above the accuracy contract |
//! | 2 | malformed input file, bad config or bad arguments |
//! | 3 | numerical failure (no convergence, broken rank chain) |
//! | 4 | scratchpad overflow in simulation |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{read_archive, read_tensor, write_archive, write_atomic, write_tensor};
use crate::sim::GemmExecutor;
use crate::sim::{
    energy_report, reference_phase_times, simulate_ttd, summary, ComparisonSummary, EventTrace, MachineConfig,
    PhaseReport, SimulationRun, Variant,
};
use crate::synth::{generate, SyntheticSpec};
use crate::tensor::Tensor;
use crate::tt::{compression_ratio, reconstruction_error, tt_decompose, TtCores};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONTRACT: u8 = 1;
pub const EXIT_BAD_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_SPM_OVERFLOW: u8 = 4;

/// Relative error floor used by `verify` when the recorded epsilon is 0.
pub const VERIFY_FLOOR: f64 = 1e-10;
/// Headroom factor of the accuracy contract.
pub const CONTRACT_SLACK: f64 = 1.05;

pub const MACHINE_DIR_ENV: &str = "TTEDGE_MACHINE_DIR";

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoConvergence { .. } | Error::RankChainBroken { .. } | Error::DegenerateBeta => EXIT_NUMERICAL,
        Error::SpmOverflow { .. } => EXIT_SPM_OVERFLOW,
        Error::DimMismatch(_) | Error::ContractDimMismatch { .. } => EXIT_NUMERICAL,
        _ => EXIT_BAD_INPUT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub input: Option<InputSource>,
    pub archive: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub epsilon: Option<f64>,
    /// `baseline`, `tt-edge` or a config path/name; `None` runs both.
    pub machine: Option<String>,
    pub report: ReportFormat,
    pub seed: u64,
    pub paper_times: bool,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            input: None,
            archive: None,
            output: None,
            epsilon: None,
            machine: None,
            report: ReportFormat::Text,
            seed: 0,
            paper_times: false,
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-2;

impl RunManifest {
    fn epsilon(&self) -> Result<f64> {
        let eps = self.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidEpsilon(eps));
        }
        Ok(eps)
    }

    fn load_input(&self) -> Result<Tensor> {
        match &self.input {
            Some(InputSource::File(p)) => read_tensor(p),
            Some(InputSource::Synthetic(spec)) => generate(spec, self.seed),
            None => Err(Error::Config("an input (--input or --synthetic) is required".into())),
        }
    }

    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::Config("--output is required".into()))
    }
}

/// Sidecar written next to an archive as `<archive>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub epsilon: f64,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub compression_ratio: f64,
    pub reconstruction_error: f64,
}

pub fn metadata_path(archive: &Path) -> PathBuf {
    let mut s = archive.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressReport {
    pub command: &'static str,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub epsilon: f64,
    pub parameters: usize,
    pub compression_ratio: f64,
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompressReport {
    pub command: &'static str,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub epsilon: f64,
    pub threshold: f64,
    pub reconstruction_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRun {
    pub variant: Variant,
    pub ranks: Option<Vec<usize>>,
    pub reports: Vec<PhaseReport>,
    pub trace: Option<EventTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    /// `simulated` or `reference_times`.
    pub mode: &'static str,
    pub epsilon: Option<f64>,
    pub dims: Option<Vec<usize>>,
    pub variants: Vec<VariantRun>,
    pub summary: Option<ComparisonSummary>,
    pub cores_identical: Option<bool>,
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(std::io::Error::other)?;
    writeln!(out)?;
    Ok(())
}

fn emit_csv_row(out: &mut dyn Write, header: &[&str], row: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(std::io::Error::other)?;
    w.write_record(row).map_err(std::io::Error::other)?;
    w.flush()?;
    Ok(())
}

fn list(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn cmd_compress(m: &RunManifest, out: &mut dyn Write) -> Result<u8> {
    let eps = m.epsilon()?;
    let w = m.load_input()?;
    let output = m.output()?;
    let cores = tt_decompose(&w, eps, &mut GemmExecutor::reference())?;
    let report = CompressReport {
        command: "compress",
        dims: w.dims().to_vec(),
        ranks: cores.ranks().to_vec(),
        epsilon: eps,
        parameters: cores.parameter_count(),
        compression_ratio: compression_ratio(w.dims(), &cores),
        reconstruction_error: reconstruction_error(&w, &cores)?,
    };
    write_archive(output, &cores)?;
    let meta = RunMetadata {
        epsilon: eps,
        dims: report.dims.clone(),
        ranks: report.ranks.clone(),
        compression_ratio: report.compression_ratio,
        reconstruction_error: report.reconstruction_error,
    };
    let meta_json = serde_json::to_vec_pretty(&meta).map_err(std::io::Error::other)?;
    write_atomic(&metadata_path(output), &meta_json)?;

    match m.report {
        ReportFormat::Json => emit_json(out, &report)?,
        ReportFormat::Csv => emit_csv_row(
            out,
            &[
                "dims",
                "ranks",
                "epsilon",
                "parameters",
                "compression_ratio",
                "reconstruction_error",
            ],
            &[
                list(&report.dims),
                list(&report.ranks),
                report.epsilon.to_string(),
                report.parameters.to_string(),
                report.compression_ratio.to_string(),
                report.reconstruction_error.to_string(),
            ],
        )?,
        ReportFormat::Text => {
            writeln!(out, "dims                 {:?}", report.dims)?;
            writeln!(out, "ranks                {:?}", report.ranks)?;
            writeln!(out, "epsilon              {}", report.epsilon)?;
            writeln!(out, "parameters           {}", report.parameters)?;
            writeln!(out, "compression_ratio    {}", report.compression_ratio)?;
            writeln!(out, "reconstruction_error {}", report.reconstruction_error)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_decompress(m: &RunManifest, out: &mut dyn Write) -> Result<u8> {
    let input = match (&m.archive, &m.input) {
        (Some(p), _) | (None, Some(InputSource::File(p))) => p.clone(),
        _ => return Err(Error::Config("decompress needs an archive via --input".into())),
    };
    let cores = read_archive(&input)?;
    let output = m.output()?;
    let w = crate::tt::tt_decode(&cores)?;
    let w = Tensor::with_precision(w.dims().to_vec(), w.into_data(), cores.cores()[0].precision())?;
    write_tensor(output, &w)?;
    let report = DecompressReport {
        command: "decompress",
        dims: w.dims().to_vec(),
        ranks: cores.ranks().to_vec(),
        elements: w.numel(),
    };
    match m.report {
        ReportFormat::Json => emit_json(out, &report)?,
        ReportFormat::Csv => emit_csv_row(
            out,
            &["dims", "ranks", "elements"],
            &[list(&report.dims), list(&report.ranks), report.elements.to_string()],
        )?,
        ReportFormat::Text => {
            writeln!(out, "dims     {:?}", report.dims)?;
            writeln!(out, "ranks    {:?}", report.ranks)?;
            writeln!(out, "elements {}", report.elements)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(m: &RunManifest, out: &mut dyn Write) -> Result<u8> {
    let archive = m
        .archive
        .as_deref()
        .ok_or_else(|| Error::Config("verify needs --archive".into()))?;
    let eps = match m.epsilon {
        Some(_) => m.epsilon()?,
        None => {
            let path = metadata_path(archive);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("no --epsilon and no run metadata at {}: {e}", path.display())))?;
            let meta: RunMetadata =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            meta.epsilon
        }
    };
    let w = m.load_input()?;
    let cores = read_archive(archive)?;
    let err = reconstruction_error(&w, &cores)?;
    let threshold = (CONTRACT_SLACK * eps).max(VERIFY_FLOOR);
    let report = VerifyReport {
        command: "verify",
        epsilon: eps,
        threshold,
        reconstruction_error: err,
        passed: err <= threshold,
    };
    match m.report {
        ReportFormat::Json => emit_json(out, &report)?,
        ReportFormat::Csv => emit_csv_row(
            out,
            &["epsilon", "threshold", "reconstruction_error", "passed"],
            &[
                report.epsilon.to_string(),
                report.threshold.to_string(),
                report.reconstruction_error.to_string(),
                report.passed.to_string(),
            ],
        )?,
        ReportFormat::Text => {
            let verdict = if report.passed { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "{verdict}: reconstruction_error {} (threshold {})",
                report.reconstruction_error, report.threshold
            )?;
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_CONTRACT })
}

/// Resolves `baseline`, `tt-edge`, a config file path, or a config name
/// looked up in `$TTEDGE_MACHINE_DIR`.
pub fn resolve_machine(spec: &str) -> Result<MachineConfig> {
    match spec {
        "baseline" => return Ok(MachineConfig::baseline()),
        "tt-edge" | "tt_edge" => return Ok(MachineConfig::tt_edge()),
        _ => {}
    }
    let direct = Path::new(spec);
    if direct.is_file() {
        return MachineConfig::load(direct);
    }
    if let Some(dir) = std::env::var_os(MACHINE_DIR_ENV) {
        let dir = PathBuf::from(dir);
        for candidate in [dir.join(spec), dir.join(format!("{spec}.json"))] {
            if candidate.is_file() {
                return MachineConfig::load(&candidate);
            }
        }
    }
    Err(Error::Config(format!("unknown machine {spec:?}")))
}

fn machines(m: &RunManifest) -> Result<Vec<MachineConfig>> {
    match &m.machine {
        None => Ok(vec![MachineConfig::baseline(), MachineConfig::tt_edge()]),
        Some(spec) => Ok(vec![resolve_machine(spec)?]),
    }
}

fn write_simulation(m: &RunManifest, report: &SimulateReport, out: &mut dyn Write) -> Result<()> {
    match m.report {
        ReportFormat::Json => emit_json(out, report),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["variant", "phase", "time_ms", "energy_mj", "core_gated"])
                .map_err(std::io::Error::other)?;
            for r in report.variants.iter().flat_map(|v| &v.reports) {
                w.write_record([
                    r.variant.to_string(),
                    r.phase.to_string(),
                    r.time_ms.to_string(),
                    r.energy_mj.to_string(),
                    r.core_gated.to_string(),
                ])
                .map_err(std::io::Error::other)?;
            }
            w.flush()?;
            Ok(())
        }
        ReportFormat::Text => {
            writeln!(
                out,
                "{:<10} {:<16} {:>14} {:>14}",
                "variant", "phase", "time_ms", "energy_mj"
            )?;
            for v in &report.variants {
                for r in &v.reports {
                    let mark = if r.core_gated { "*" } else { "" };
                    writeln!(
                        out,
                        "{:<10} {:<16} {:>14.3} {:>14.3}{mark}",
                        r.variant.to_string(),
                        r.phase.to_string(),
                        r.time_ms,
                        r.energy_mj
                    )?;
                }
                let (t, e) = v
                    .reports
                    .iter()
                    .fold((0.0, 0.0), |(t, e), r| (t + r.time_ms, e + r.energy_mj));
                writeln!(
                    out,
                    "{:<10} {:<16} {:>14.3} {:>14.3}",
                    v.variant.to_string(),
                    "Total",
                    t,
                    e
                )?;
            }
            if report.variants.iter().any(|v| v.reports.iter().any(|r| r.core_gated)) {
                writeln!(out, "* core clock gated")?;
            }
            if let Some(s) = &report.summary {
                writeln!(out, "speedup          {}", s.speedup)?;
                writeln!(out, "energy_reduction {}%", s.energy_reduction_pct)?;
            }
            if let Some(same) = report.cores_identical {
                writeln!(out, "cores_identical  {same}")?;
            }
            Ok(())
        }
    }
}

pub fn cmd_simulate(m: &RunManifest, out: &mut dyn Write) -> Result<u8> {
    let configs = machines(m)?;
    let report = if m.paper_times {
        // one config per variant: defaults, overridden by --machine
        let mut by_variant: BTreeMap<&str, MachineConfig> = [
            ("baseline", MachineConfig::baseline()),
            ("tt_edge", MachineConfig::tt_edge()),
        ]
        .into_iter()
        .collect();
        if m.machine.is_some() {
            for c in configs {
                by_variant.insert(c.variant.name(), c);
            }
        }
        let variants: Vec<VariantRun> = by_variant
            .values()
            .map(|c| VariantRun {
                variant: c.variant,
                ranks: None,
                reports: energy_report(&reference_phase_times(c.variant), c),
                trace: None,
            })
            .collect();
        let summary = Some(summary(&variants[0].reports, &variants[1].reports)?);
        SimulateReport {
            command: "simulate",
            mode: "reference_times",
            epsilon: None,
            dims: None,
            variants,
            summary,
            cores_identical: None,
        }
    } else {
        let eps = m.epsilon()?;
        let w = match &m.input {
            None => generate(&"16x16x16".parse()?, m.seed)?,
            Some(_) => m.load_input()?,
        };
        let runs: Vec<Result<SimulationRun>> = std::thread::scope(|s| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| {
                    let w = &w;
                    s.spawn(move || simulate_ttd(w, eps, c))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread"))
                .collect()
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let cores: Vec<&TtCores> = runs.iter().map(|r| &r.cores).collect();
        let both = runs.len() == 2;
        let summary = if both {
            Some(summary(&runs[0].reports, &runs[1].reports)?)
        } else {
            None
        };
        SimulateReport {
            command: "simulate",
            mode: "simulated",
            epsilon: Some(eps),
            dims: Some(w.dims().to_vec()),
            cores_identical: both.then(|| cores[0] == cores[1]),
            variants: runs
                .into_iter()
                .map(|r| VariantRun {
                    variant: r.reports[0].variant,
                    ranks: Some(r.cores.ranks().to_vec()),
                    reports: r.reports,
                    trace: Some(r.trace),
                })
                .collect(),
            summary,
        }
    };
    write_simulation(m, &report, out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Compress,
    Decompress,
    Simulate,
    Verify,
}

/// Runs `cmd`, printing errors to `err`, and returns the process exit code.
pub fn run(cmd: Command, m: &RunManifest, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cmd {
        Command::Compress => cmd_compress(m, out),
        Command::Decompress => cmd_decompress(m, out),
        Command::Simulate => cmd_simulate(m, out),
        Command::Verify => cmd_verify(m, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&Error::NoConvergence { sweeps: 3 }), 3);
        assert_eq!(
            exit_code(&Error::RankChainBroken {
                core: 0,
                detail: String::new()
            }),
            3
        );
        assert_eq!(
            exit_code(&Error::SpmOverflow {
                needed_bytes: 1,
                capacity_bytes: 0
            }),
            4
        );
    }

    #[test]
    fn metadata_sidecar_name() {
        assert_eq!(metadata_path(Path::new("a/b.ttea")), PathBuf::from("a/b.ttea.json"));
    }

    #[test]
    fn machine_names() {
        assert_eq!(resolve_machine("baseline").unwrap(), MachineConfig::baseline());
        assert_eq!(resolve_machine("tt-edge").unwrap(), MachineConfig::tt_edge());
        assert!(matches!(resolve_machine("no-such-machine"), Err(Error::Config(_))));
    }
}
