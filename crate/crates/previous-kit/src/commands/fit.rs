use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;

use previous_core::model::{
    collect_observations, fit_network_coefficient, fit_ridge, ModelBundle, ObservationSet,
    Provenance, RidgeModel, Target,
};
use previous_core::netdef::LayerKind;
use previous_core::profiling::{assemble_profiles, ingest_timing, segment_power_trace};
use previous_core::simdevice::NetworkTotals;

use crate::formats::{read_metrics_csv, read_schedule_csv, read_timing_csv, read_trace};
use crate::{domain, input, read_text, write_text, CmdResult, Failure};

/// Inputs are repeated flags paired by position: the i-th `--timing`
/// (and, when present, `--trace`/`--schedule`/`--totals`) belongs to the
/// network of the i-th `--metrics`.
#[derive(Args)]
pub struct FitArgs {
    /// Per-layer metrics CSV, one per profiled network.
    #[arg(long = "metrics", required = true)]
    pub metrics: Vec<PathBuf>,
    /// Timing log CSV, one per profiled network.
    #[arg(long = "timing", required = true)]
    pub timing: Vec<PathBuf>,
    /// Power trace, one per profiled network (enables energy models).
    #[arg(long = "trace")]
    pub trace: Vec<PathBuf>,
    /// Execution schedule CSV matching each trace.
    #[arg(long = "schedule")]
    pub schedule: Vec<PathBuf>,
    /// Measured network totals JSON, one per network (fits the network
    /// coefficients).
    #[arg(long = "totals")]
    pub totals: Vec<PathBuf>,
    /// Idle gap the traces were recorded with, in ms.
    #[arg(long, default_value_t = 300.0)]
    pub gap_ms: f64,
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Subtract idle-baseline energy from each measurement window.
    #[arg(long)]
    pub subtract_baseline: bool,
    /// Identifier of the measured system, recorded in the bundle.
    #[arg(long)]
    pub system_id: String,
    /// Bundle output path (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: FitArgs) -> CmdResult {
    let n = args.metrics.len();
    if args.timing.len() != n {
        return Err(input(anyhow!(
            "{} --timing file(s) for {} --metrics file(s); they pair one-to-one",
            args.timing.len(),
            n
        )));
    }
    if args.trace.len() != args.schedule.len() {
        return Err(input(anyhow!(
            "{} --trace file(s) but {} --schedule file(s); they pair one-to-one",
            args.trace.len(),
            args.schedule.len()
        )));
    }
    if !args.trace.is_empty() && args.trace.len() != n {
        return Err(input(anyhow!(
            "{} --trace file(s) for {} networks; give one per network or none",
            args.trace.len(),
            n
        )));
    }
    if !args.totals.is_empty() && args.totals.len() != n {
        return Err(input(anyhow!(
            "{} --totals file(s) for {} networks; give one per network or none",
            args.totals.len(),
            n
        )));
    }

    let with_energy = !args.trace.is_empty();
    let mut suite = Vec::with_capacity(n);
    let mut options = None;
    let mut sets: BTreeMap<(Target, LayerKind), ObservationSet> = BTreeMap::new();
    // per-network metrics rows, kept for the totals stage
    let mut network_rows = Vec::with_capacity(n);

    for i in 0..n {
        let metrics_file = read_metrics_csv(&read_text(&args.metrics[i])?)
            .map_err(|e| input(anyhow!("{}: {e:#}", args.metrics[i].display())))?;
        match &options {
            None => options = Some(metrics_file.options),
            Some(existing) if *existing != metrics_file.options => {
                return Err(domain(anyhow!(
                    "metrics files disagree on computation options: {} was computed with \
                     im2col={} bias_ops={}, earlier files with im2col={} bias_ops={}",
                    args.metrics[i].display(),
                    metrics_file.options.im2col,
                    metrics_file.options.count_bias_ops,
                    existing.im2col,
                    existing.count_bias_ops
                )));
            }
            Some(_) => {}
        }

        let records = read_timing_csv(&read_text(&args.timing[i])?)
            .map_err(|e| input(anyhow!("{}: {e:#}", args.timing[i].display())))?;
        let runtimes = ingest_timing(&records)
            .map_err(|e| domain(anyhow!("{}: {e}", args.timing[i].display())))?;

        let energy_source = if with_energy {
            let trace = read_trace(&read_text(&args.trace[i])?)
                .map_err(|e| input(anyhow!("{}: {e:#}", args.trace[i].display())))?;
            let schedule = read_schedule_csv(&read_text(&args.schedule[i])?)
                .map_err(|e| input(anyhow!("{}: {e:#}", args.schedule[i].display())))?;
            let seg = segment_power_trace(&trace, &schedule, args.gap_ms)
                .map_err(|e| domain(anyhow!("{}: {e}", args.trace[i].display())))?;
            Some((trace, seg))
        } else {
            None
        };
        let profiles = assemble_profiles(
            &runtimes,
            energy_source.as_ref().map(|(t, s)| (t, s)),
            args.subtract_baseline,
        )
        .map_err(|e| domain(anyhow!("{}: {e}", metrics_file.network)))?;

        let mut targets = vec![Target::Runtime];
        if with_energy {
            targets.push(Target::Energy);
        }
        for target in targets {
            let (grouped, warnings) = collect_observations(&metrics_file.rows, &profiles, target);
            for warning in warnings {
                eprintln!("warning: {}: {target}: {warning}", metrics_file.network);
            }
            for (kind, set) in grouped {
                let merged = sets.entry((target, kind)).or_default();
                for (row, y) in set.rows.iter().zip(&set.targets) {
                    merged.push(*row, *y);
                }
            }
        }

        suite.push(metrics_file.network.clone());
        network_rows.push(metrics_file.rows);
    }

    let mut models: Vec<RidgeModel> = Vec::new();
    for ((target, kind), set) in &sets {
        let model = fit_ridge(*kind, *target, set, args.lambda)
            .map_err(|e| domain(anyhow!("fitting {} / {target}: {e}", kind.as_str())))?;
        models.push(model);
    }

    let options = options.expect("at least one metrics file");
    let mut bundle = ModelBundle {
        system_id: args.system_id.clone(),
        provenance: Provenance {
            im2col: options.im2col,
            count_bias_ops: options.count_bias_ops,
            subtract_baseline: args.subtract_baseline,
            suite,
        },
        models,
        c_runtime: 1.0,
        c_energy: 1.0,
    };
    bundle.normalize();

    if !args.totals.is_empty() {
        let mut measured_runtime = Vec::with_capacity(n);
        let mut measured_energy = Vec::with_capacity(n);
        for (i, path) in args.totals.iter().enumerate() {
            let totals: NetworkTotals = serde_json::from_str(&read_text(path)?)
                .map_err(|e| input(anyhow!("{}: {e}", path.display())))?;
            if totals.network != bundle.provenance.suite[i] {
                return Err(domain(anyhow!(
                    "{}: totals are for network {} but position {} holds {}",
                    path.display(),
                    totals.network,
                    i + 1,
                    bundle.provenance.suite[i]
                )));
            }
            measured_runtime.push(totals.runtime_ms);
            measured_energy.push(totals.energy_mj);
        }
        bundle.c_runtime =
            network_coefficient(&bundle, &network_rows, Target::Runtime, &measured_runtime)?;
        if with_energy {
            bundle.c_energy =
                network_coefficient(&bundle, &network_rows, Target::Energy, &measured_energy)?;
        }
    }

    write_text(&args.out, &bundle.to_json())?;
    println!("wrote {}", args.out.display());
    for model in &bundle.models {
        let count = sets[&(model.target, model.kind)].len();
        println!(
            "fitted {} / {} from {} observation(s)",
            model.kind.as_str(),
            model.target,
            count
        );
    }
    println!(
        "network coefficients: runtime {} energy {}",
        bundle.c_runtime, bundle.c_energy
    );
    Ok(())
}

/// Least-squares slope from summed per-layer predictions to measured
/// totals, mirroring prediction's clamping.
fn network_coefficient(
    bundle: &ModelBundle,
    network_rows: &[Vec<previous_core::metrics::ArchMetrics>],
    target: Target,
    measured: &[f64],
) -> Result<f64, Failure> {
    let mut sums = Vec::with_capacity(network_rows.len());
    for rows in network_rows {
        let report = previous_core::predict::predict_rows("totals", rows, bundle, target)
            .map_err(|e| domain(anyhow!("summing {target} predictions: {e}")))?;
        sums.push(report.sum_layers);
    }
    fit_network_coefficient(measured, &sums)
        .ok_or_else(|| domain(anyhow!("cannot fit a {target} network coefficient: all summed predictions are zero")))
}
