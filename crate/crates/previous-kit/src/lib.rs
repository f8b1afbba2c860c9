//! Command-line companion to `previous-core`: file handling, measurement
//! import/export, and the end-to-end characterize → fit → predict flow.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use previous_core::metrics::{
    layer_mem_ops, layer_ops, layer_weights, ArchMetrics, MetricsError, MetricsOptions,
};
use previous_core::model::Target;
use previous_core::netdef::{infer_shapes, parse_network, NetworkDef, ShapedNetwork};

pub mod commands;
pub mod formats;

/// Why a command failed, deciding the process exit code: problems
/// decoding inputs exit 2, problems inside the modeled domain exit 1.
#[derive(Debug)]
pub enum Failure {
    Domain(anyhow::Error),
    Input(anyhow::Error),
}

pub type CmdResult = Result<(), Failure>;

pub(crate) fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Domain(e.into())
}

pub(crate) fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

#[derive(Parser)]
#[command(
    name = "previous-kit",
    version,
    about = "Per-layer inference cost modeling: characterize a device, fit, predict"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network definition and show inferred tensor shapes.
    Inspect(commands::inspect::InspectArgs),
    /// Compute per-layer architectural metrics as CSV.
    Metrics(commands::metrics::MetricsArgs),
    /// Emit characterization network definitions.
    Generate(commands::generate::GenerateArgs),
    /// Profile a network on a simulated device, writing measurement files.
    Simulate(commands::simulate::SimulateArgs),
    /// Fit per-kind models from metrics and measurements into a bundle.
    Fit(commands::fit::FitArgs),
    /// Predict per-layer and network cost for a network with a bundle.
    Predict(commands::predict::PredictArgs),
    /// Tabulate measured-versus-predicted comparisons.
    Report(commands::report::ReportArgs),
}

/// Prediction target selector shared by subcommands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    #[default]
    Runtime,
    Energy,
}

impl From<TargetArg> for Target {
    fn from(value: TargetArg) -> Self {
        match value {
            TargetArg::Runtime => Target::Runtime,
            TargetArg::Energy => Target::Energy,
        }
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Inspect(args) => commands::inspect::run(args),
        Command::Metrics(args) => commands::metrics::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

// --- shared plumbing ---------------------------------------------------------

pub(crate) fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))
                .map_err(input)?;
        }
    }
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(input)
}

/// Write to the file when given, otherwise print to stdout; reports the
/// destination on file writes.
pub(crate) fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_text(path, text)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub(crate) fn load_network(path: &Path) -> Result<NetworkDef, Failure> {
    let text = read_text(path)?;
    parse_network(&text)
        .map_err(|e| input(anyhow!("{}: {e}", path.display())))
}

pub(crate) fn shape_network(net: &NetworkDef) -> Result<ShapedNetwork, Failure> {
    infer_shapes(net).map_err(|e| domain(anyhow!("network {}: {e}", net.name)))
}

/// Unix timestamp for `--stamp`, or `None` to keep output deterministic.
pub(crate) fn stamp_now(enabled: bool) -> Option<u64> {
    if !enabled {
        return None;
    }
    Some(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    )
}

/// Per-layer metrics rows, optionally computed in parallel. Both paths
/// produce identical rows in network order.
pub(crate) fn compute_rows(
    shaped: &ShapedNetwork,
    opts: MetricsOptions,
    parallel: bool,
) -> Result<Vec<ArchMetrics>, MetricsError> {
    if !parallel {
        return previous_core::metrics::network_metrics(shaped, opts);
    }
    use rayon::prelude::*;
    shaped
        .net
        .layers
        .par_iter()
        .map(|layer| {
            let shapes = shaped
                .layer_shapes(&layer.name)
                .ok_or(MetricsError::BadArity {
                    layer: layer.name.clone(),
                })?;
            let n_weights = layer_weights(layer, &shapes.inputs)?;
            let ops = layer_ops(layer, &shapes.inputs, shapes.output, opts)?;
            let mem_ops = layer_mem_ops(layer, &shapes.inputs, shapes.output, n_weights, opts)?;
            Ok(ArchMetrics {
                layer_name: layer.name.clone(),
                kind: layer.kind(),
                out_shape: shapes.output,
                n_weights,
                ops,
                mem_ops,
            })
        })
        .collect()
}
