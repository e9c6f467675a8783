use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ttedge::cli::{run, Command, InputSource, ReportFormat, RunManifest};
use ttedge::synth::SyntheticSpec;

#[derive(Parser)]
#[command(
    name = "ttedge",
    version,
    about = "Tensor-train compression and TT-Edge cost simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a tensor file into a core archive
    Compress(ManifestArgs),
    /// Rebuild a tensor file from a core archive
    Decompress(ManifestArgs),
    /// Run the baseline and/or TT-Edge cost model
    Simulate(ManifestArgs),
    /// Check an archive against the accuracy contract
    Verify(ManifestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct ManifestArgs {
    /// Input tensor (compress, verify, simulate) or archive (decompress)
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Core archive checked by `verify`
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Prescribed relative accuracy (default 0.01)
    #[arg(long)]
    epsilon: Option<f64>,
    /// baseline, tt-edge, or a machine config (path or name in $TTEDGE_MACHINE_DIR)
    #[arg(long)]
    machine: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    report: Report,
    /// Seed for synthetic inputs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic input: DIMS or DIMS:RANKS, e.g. 16x16x16 or 4x3x2:1,2,2,1
    #[arg(long)]
    synthetic: Option<SyntheticSpec>,
    /// Use the measured prototype phase times instead of simulating
    #[arg(long)]
    paper_times: bool,
}

impl From<ManifestArgs> for RunManifest {
    fn from(a: ManifestArgs) -> Self {
        let input = match (a.input, a.synthetic) {
            (Some(p), _) => Some(InputSource::File(p)),
            (None, Some(s)) => Some(InputSource::Synthetic(s)),
            (None, None) => None,
        };
        RunManifest {
            input,
            archive: a.archive,
            output: a.output,
            epsilon: a.epsilon,
            machine: a.machine,
            report: match a.report {
                Report::Json => ReportFormat::Json,
                Report::Csv => ReportFormat::Csv,
                Report::Text => ReportFormat::Text,
            },
            seed: a.seed,
            paper_times: a.paper_times,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Compress(a) => (Command::Compress, a),
        Cmd::Decompress(a) => (Command::Decompress, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let manifest = RunManifest::from(args);
    let code = run(
        cmd,
        &manifest,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code)
}
