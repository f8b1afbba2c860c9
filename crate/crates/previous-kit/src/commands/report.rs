use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;

use previous_core::predict::{totals_error_table, PredictionReport};

use crate::formats::{read_totals_csv, write_totals_table, FILE_BANNER};
use crate::{domain, emit, input, read_text, stamp_now, CmdResult};

#[derive(Args)]
pub struct ReportArgs {
    /// Comparison CSV of measured and predicted network totals.
    #[arg(long, conflicts_with = "inputs")]
    pub totals: Option<PathBuf>,
    /// Directory of prediction report JSON files to summarize.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add a generation-time comment to the output.
    #[arg(long)]
    pub stamp: bool,
}

pub fn run(args: ReportArgs) -> CmdResult {
    let stamp = stamp_now(args.stamp);
    let text = match (&args.totals, &args.inputs) {
        (Some(totals_path), None) => {
            let rows = read_totals_csv(&read_text(totals_path)?)
                .map_err(|e| input(anyhow!("{}: {e:#}", totals_path.display())))?;
            let table = totals_error_table(&rows).map_err(domain)?;
            write_totals_table(&table, stamp).map_err(domain)?
        }
        (None, Some(dir)) => summarize_reports(dir, stamp)?,
        _ => return Err(input(anyhow!("pass exactly one of --totals or --inputs"))),
    };
    emit(args.out.as_ref(), &text)
}

/// One summary line per prediction report found in `dir`, in file-name
/// order.
fn summarize_reports(dir: &PathBuf, stamp: Option<u64>) -> Result<String, crate::Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))
        .map_err(input)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input(anyhow!(
            "no prediction report JSON files in {}",
            dir.display()
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    if let Some(seconds) = stamp {
        let _ = writeln!(out, "# stamp={seconds}");
    }
    let _ = writeln!(
        out,
        "network,target,layers,sum_layers,coefficient,network_total,layer_mape_pct"
    );
    for path in &paths {
        let report: PredictionReport = serde_json::from_str(&read_text(path)?)
            .map_err(|e| input(anyhow!("{}: {e}", path.display())))?;
        let mape = report
            .layer_mape()
            .map(|m| m.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            report.network,
            report.target,
            report.layers.len(),
            report.sum_layers,
            report.coefficient,
            report.network_total,
            mape
        );
    }
    Ok(out)
}
