use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;

use previous_core::model::{ModelBundle, Target};
use previous_core::predict::{bundle_metrics_options, predict_rows};
use previous_core::profiling::{
    assemble_profiles, ingest_timing, segment_power_trace,
};

use crate::formats::{
    read_schedule_csv, read_timing_csv, read_trace, write_plot_data, write_prediction_csv,
};
use crate::{
    compute_rows, domain, emit, input, load_network, read_text, shape_network, stamp_now,
    CmdResult, TargetArg,
};

#[derive(Args)]
pub struct PredictArgs {
    /// Network definition (JSON).
    pub network: PathBuf,
    /// Fitted model bundle (JSON).
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub target: TargetArg,
    /// Timing log of the same network; fills the measured column for the
    /// runtime target.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Power trace of the same network; with --schedule, fills the
    /// measured column for the energy target.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Idle gap the trace was recorded with, in ms.
    #[arg(long, default_value_t = 300.0)]
    pub gap_ms: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-layer table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write measured-versus-predicted pairs for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Compute layers on a thread pool (same output, same order).
    #[arg(long)]
    pub parallel: bool,
    /// Add a generation-time comment to the text outputs.
    #[arg(long)]
    pub stamp: bool,
}

pub fn run(args: PredictArgs) -> CmdResult {
    let bundle = ModelBundle::from_json(&read_text(&args.bundle)?)
        .map_err(|e| input(anyhow!("{}: {e}", args.bundle.display())))?;
    let net = load_network(&args.network)?;
    let shaped = shape_network(&net)?;
    let target: Target = args.target.into();

    let rows = compute_rows(&shaped, bundle_metrics_options(&bundle), args.parallel)
        .map_err(domain)?;
    let mut report = predict_rows(&net.name, &rows, &bundle, target).map_err(domain)?;

    if let Some(measured) = measurements(&args, target, &bundle)? {
        report.attach_measurements(&measured);
    }

    let stamp = stamp_now(args.stamp);
    let no_output_flags = args.out.is_none() && args.csv.is_none() && args.plot_data.is_none();
    if let Some(path) = &args.out {
        let mut text =
            serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
        text.push('\n');
        crate::write_text(path, &text)?;
        println!("wrote {}", path.display());
    }
    if args.csv.is_some() || no_output_flags {
        let text = write_prediction_csv(&report, stamp).map_err(domain)?;
        emit(args.csv.as_ref(), &text)?;
    }
    if let Some(path) = &args.plot_data {
        crate::write_text(path, &write_plot_data(&report, stamp).map_err(domain)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Per-layer measured values for the requested target, when measurement
/// files were given.
fn measurements(
    args: &PredictArgs,
    target: Target,
    bundle: &ModelBundle,
) -> Result<Option<BTreeMap<String, f64>>, crate::Failure> {
    match target {
        Target::Runtime => {
            let Some(path) = &args.timing else {
                return Ok(None);
            };
            let records = read_timing_csv(&read_text(path)?)
                .map_err(|e| input(anyhow!("{}: {e:#}", path.display())))?;
            let runtimes = ingest_timing(&records)
                .map_err(|e| domain(anyhow!("{}: {e}", path.display())))?;
            Ok(Some(
                runtimes
                    .into_iter()
                    .map(|(layer, stats)| (layer, stats.mean_ms))
                    .collect(),
            ))
        }
        Target::Energy => {
            let (Some(trace_path), Some(schedule_path)) = (&args.trace, &args.schedule) else {
                if args.trace.is_some() || args.schedule.is_some() {
                    return Err(input(anyhow!(
                        "--trace and --schedule must be given together"
                    )));
                }
                return Ok(None);
            };
            let trace = read_trace(&read_text(trace_path)?)
                .map_err(|e| input(anyhow!("{}: {e:#}", trace_path.display())))?;
            let schedule = read_schedule_csv(&read_text(schedule_path)?)
                .map_err(|e| input(anyhow!("{}: {e:#}", schedule_path.display())))?;
            let seg = segment_power_trace(&trace, &schedule, args.gap_ms)
                .map_err(|e| domain(anyhow!("{}: {e}", trace_path.display())))?;
            // runtimes are irrelevant here; reuse the schedule's layer set
            let placeholder = schedule
                .iter()
                .map(|entry| {
                    (
                        entry.layer.clone(),
                        previous_core::profiling::RuntimeStats {
                            mean_ms: 0.0,
                            std_ms: 0.0,
                            n_runs: entry.n_runs as usize,
                        },
                    )
                })
                .collect();
            let profiles = assemble_profiles(
                &placeholder,
                Some((&trace, &seg)),
                bundle.provenance.subtract_baseline,
            )
            .map_err(|e| domain(anyhow!("{}: {e}", trace_path.display())))?;
            Ok(Some(
                profiles
                    .into_iter()
                    .filter_map(|p| p.energy.map(|e| (p.layer, e.mean_mj)))
                    .collect(),
            ))
        }
    }
}
