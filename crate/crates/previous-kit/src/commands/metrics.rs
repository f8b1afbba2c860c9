use std::path::PathBuf;

use clap::Args;

use previous_core::metrics::{metrics_totals, MetricsOptions};

use crate::formats::write_metrics_csv;
use crate::{compute_rows, domain, emit, load_network, shape_network, stamp_now, CmdResult};

#[derive(Args)]
pub struct MetricsArgs {
    /// Network definition (JSON).
    pub network: PathBuf,
    /// Count convolution input reads as unrolled patch matrices.
    #[arg(long)]
    pub im2col: bool,
    /// Exclude bias additions from operation counts.
    #[arg(long)]
    pub no_bias_ops: bool,
    /// Compute layers on a thread pool (same output, same order).
    #[arg(long)]
    pub parallel: bool,
    /// Add a generation-time comment to the output.
    #[arg(long)]
    pub stamp: bool,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: MetricsArgs) -> CmdResult {
    let net = load_network(&args.network)?;
    let shaped = shape_network(&net)?;
    let opts = MetricsOptions {
        im2col: args.im2col,
        count_bias_ops: !args.no_bias_ops,
    };
    let rows = compute_rows(&shaped, opts, args.parallel).map_err(domain)?;
    let totals = metrics_totals(&rows).map_err(domain)?;
    let text =
        write_metrics_csv(&net.name, opts, &rows, &totals, stamp_now(args.stamp)).map_err(domain)?;
    emit(args.out.as_ref(), &text)
}
