use std::path::PathBuf;

use clap::Args;

use previous_core::simdevice::SimDevice;

use crate::formats::{write_schedule_csv, write_timing_csv, write_trace};
use crate::{domain, load_network, shape_network, stamp_now, write_text, CmdResult};

#[derive(Args)]
pub struct SimulateArgs {
    /// Network definition (JSON).
    pub network: PathBuf,
    /// Seed selecting the device's hidden cost model.
    #[arg(long)]
    pub seed: u64,
    /// Relative measurement noise, 0 to 0.5.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Hidden whole-network coefficient, 0.5 to 1.5.
    #[arg(long, default_value_t = 1.0)]
    pub coefficient: f64,
    /// Measured runs per layer.
    #[arg(long, default_value_t = 10)]
    pub runs: u32,
    /// Idle gap between runs, in ms.
    #[arg(long, default_value_t = 300.0)]
    pub gap_ms: f64,
    /// Directory the measurement files are written into.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Add a generation-time comment to the text outputs.
    #[arg(long)]
    pub stamp: bool,
}

pub fn run(args: SimulateArgs) -> CmdResult {
    let net = load_network(&args.network)?;
    let shaped = shape_network(&net)?;
    let device = SimDevice::new(args.seed, args.noise, args.coefficient)
        .and_then(|d| d.with_runs(args.runs))
        .and_then(|d| d.with_gap_ms(args.gap_ms))
        .map_err(domain)?;
    let sim = device.simulate_profile(&shaped).map_err(domain)?;
    let stamp = stamp_now(args.stamp);

    let file = |suffix: &str| args.out_dir.join(format!("{}.{suffix}", net.name));

    let timing_path = file("timing.csv");
    write_text(&timing_path, &write_timing_csv(&sim.timing, stamp).map_err(domain)?)?;
    let schedule_path = file("schedule.csv");
    write_text(
        &schedule_path,
        &write_schedule_csv(&sim.schedule, stamp).map_err(domain)?,
    )?;
    let trace_path = file("trace.txt");
    write_text(&trace_path, &write_trace(&sim.trace, stamp))?;
    let totals_path = file("totals.json");
    let mut totals_json =
        serde_json::to_string_pretty(&sim.totals).expect("totals serialization cannot fail");
    totals_json.push('\n');
    write_text(&totals_path, &totals_json)?;

    for path in [&timing_path, &schedule_path, &trace_path, &totals_path] {
        println!("wrote {}", path.display());
    }
    println!(
        "network {}: measured total runtime {} ms, energy {} mJ (gap {} ms)",
        sim.totals.network, sim.totals.runtime_ms, sim.totals.energy_mj, sim.gap_ms
    );
    Ok(())
}
