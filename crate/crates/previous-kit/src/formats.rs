//! Line-oriented file formats shared by the subcommands.
//!
//! Every text file starts with the `# previous-kit v1` banner followed by
//! optional `# key=value` comment lines; the first non-comment line is
//! the column header. Numbers are written with Rust's shortest
//! round-trip float formatting, so files are byte-stable and parse back
//! to the exact values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};

use previous_core::metrics::{ArchMetrics, MetricsOptions, MetricsTotals};
use previous_core::netdef::{LayerKind, TensorShape};
use previous_core::predict::PredictionReport;
use previous_core::profiling::{PowerTrace, ScheduleEntry, TimingRecord};

pub const FILE_BANNER: &str = "# previous-kit v1";

/// Reject characters that would corrupt a CSV cell.
fn check_cell(value: &str) -> Result<&str> {
    if value.contains(',') || value.contains('\n') || value.contains('\r') {
        bail!("value {value:?} contains CSV delimiter characters");
    }
    Ok(value)
}

fn push_stamp(out: &mut String, stamp: Option<u64>) {
    if let Some(seconds) = stamp {
        let _ = writeln!(out, "# stamp={seconds}");
    }
}

/// Split a text file into comment key/value pairs and data lines.
fn split_lines(text: &str) -> Result<(BTreeMap<String, String>, Vec<(usize, &str)>)> {
    let mut meta = BTreeMap::new();
    let mut data = Vec::new();
    let mut saw_banner = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if comment == FILE_BANNER.trim_start_matches("# ") {
                saw_banner = true;
                continue;
            }
            // comments may hold several space-separated key=value pairs
            for pair in comment.split_whitespace() {
                if let Some((key, value)) = pair.split_once('=') {
                    meta.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        data.push((idx + 1, line));
    }
    if !saw_banner {
        bail!("missing `{FILE_BANNER}` banner");
    }
    Ok((meta, data))
}

fn expect_header(data: &[(usize, &str)], header: &str) -> Result<()> {
    match data.first() {
        Some((_, line)) if *line == header => Ok(()),
        Some((line_no, line)) => bail!(
            "line {line_no}: expected header `{header}`, found `{line}`"
        ),
        None => bail!("file has no data lines"),
    }
}

fn fields<'a>(line_no: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != n {
        bail!("line {line_no}: expected {n} comma-separated fields, found {}", parts.len());
    }
    Ok(parts)
}

fn parse_num<T: core::str::FromStr>(line_no: usize, label: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| anyhow!("line {line_no}: cannot parse {label} from {text:?}"))
}

// --- metrics CSV ------------------------------------------------------------

const METRICS_HEADER: &str = "layer,kind,h_out,w_out,c_out,n_weights,ops,mem_ops";

/// A metrics file: per-layer rows plus the options they were computed
/// under, so downstream fitting records faithful provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsFile {
    pub network: String,
    pub options: MetricsOptions,
    pub rows: Vec<ArchMetrics>,
}

pub fn write_metrics_csv(
    network: &str,
    options: MetricsOptions,
    rows: &[ArchMetrics],
    totals: &MetricsTotals,
    stamp: Option<u64>,
) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    let _ = writeln!(out, "# network={}", check_cell(network)?);
    let _ = writeln!(
        out,
        "# im2col={} bias_ops={}",
        options.im2col, options.count_bias_ops
    );
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "{METRICS_HEADER}");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            check_cell(&row.layer_name)?,
            row.kind.as_str(),
            row.out_shape.h,
            row.out_shape.w,
            row.out_shape.c,
            row.n_weights,
            row.ops,
            row.mem_ops
        );
    }
    let _ = writeln!(
        out,
        "total,,,,,{},{},{}",
        totals.n_weights, totals.ops, totals.mem_ops
    );
    Ok(out)
}

pub fn read_metrics_csv(text: &str) -> Result<MetricsFile> {
    let (meta, data) = split_lines(text)?;
    expect_header(&data, METRICS_HEADER)?;
    let network = meta
        .get("network")
        .context("missing `# network=` comment")?
        .clone();
    let parse_bool = |key: &str| -> Result<bool> {
        meta.get(key)
            .with_context(|| format!("missing `# {key}=` comment"))?
            .parse()
            .map_err(|_| anyhow!("comment `{key}` is not a boolean"))
    };
    let options = MetricsOptions {
        im2col: parse_bool("im2col")?,
        count_bias_ops: parse_bool("bias_ops")?,
    };
    let mut rows = Vec::new();
    let mut declared_totals = None;
    for (line_no, line) in &data[1..] {
        let parts = fields(*line_no, line, 8)?;
        if parts[0] == "total" {
            declared_totals = Some(MetricsTotals {
                n_weights: parse_num(*line_no, "total weights", parts[5])?,
                ops: parse_num(*line_no, "total ops", parts[6])?,
                mem_ops: parse_num(*line_no, "total mem_ops", parts[7])?,
            });
            continue;
        }
        let kind = LayerKind::from_str_opt(parts[1])
            .with_context(|| format!("line {line_no}: unknown layer kind {:?}", parts[1]))?;
        rows.push(ArchMetrics {
            layer_name: parts[0].to_string(),
            kind,
            out_shape: TensorShape::new(
                parse_num(*line_no, "h_out", parts[2])?,
                parse_num(*line_no, "w_out", parts[3])?,
                parse_num(*line_no, "c_out", parts[4])?,
            ),
            n_weights: parse_num(*line_no, "n_weights", parts[5])?,
            ops: parse_num(*line_no, "ops", parts[6])?,
            mem_ops: parse_num(*line_no, "mem_ops", parts[7])?,
        });
    }
    if let Some(declared) = declared_totals {
        let mut acc = [0u128; 3];
        for row in &rows {
            acc[0] += row.n_weights as u128;
            acc[1] += row.ops as u128;
            acc[2] += row.mem_ops as u128;
        }
        let stated = [
            declared.n_weights as u128,
            declared.ops as u128,
            declared.mem_ops as u128,
        ];
        if acc != stated {
            bail!(
                "totals row disagrees with the sum of layer rows \
                 (declared {stated:?}, computed {acc:?})"
            );
        }
    }
    Ok(MetricsFile {
        network,
        options,
        rows,
    })
}

// --- timing CSV -------------------------------------------------------------

const TIMING_HEADER: &str = "layer,run,elapsed_ms";

pub fn write_timing_csv(records: &[TimingRecord], stamp: Option<u64>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "{TIMING_HEADER}");
    for record in records {
        let _ = writeln!(
            out,
            "{},{},{}",
            check_cell(&record.layer)?,
            record.run,
            record.elapsed_ms
        );
    }
    Ok(out)
}

pub fn read_timing_csv(text: &str) -> Result<Vec<TimingRecord>> {
    let (_, data) = split_lines(text)?;
    expect_header(&data, TIMING_HEADER)?;
    data[1..]
        .iter()
        .map(|(line_no, line)| {
            let parts = fields(*line_no, line, 3)?;
            Ok(TimingRecord {
                layer: parts[0].to_string(),
                run: parse_num(*line_no, "run", parts[1])?,
                elapsed_ms: parse_num(*line_no, "elapsed_ms", parts[2])?,
            })
        })
        .collect()
}

// --- schedule CSV -----------------------------------------------------------

const SCHEDULE_HEADER: &str = "layer,n_runs,per_run_ms";

pub fn write_schedule_csv(entries: &[ScheduleEntry], stamp: Option<u64>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "{SCHEDULE_HEADER}");
    for entry in entries {
        let _ = writeln!(
            out,
            "{},{},{}",
            check_cell(&entry.layer)?,
            entry.n_runs,
            entry.per_run_ms
        );
    }
    Ok(out)
}

pub fn read_schedule_csv(text: &str) -> Result<Vec<ScheduleEntry>> {
    let (_, data) = split_lines(text)?;
    expect_header(&data, SCHEDULE_HEADER)?;
    data[1..]
        .iter()
        .map(|(line_no, line)| {
            let parts = fields(*line_no, line, 3)?;
            Ok(ScheduleEntry {
                layer: parts[0].to_string(),
                n_runs: parse_num(*line_no, "n_runs", parts[1])?,
                per_run_ms: parse_num(*line_no, "per_run_ms", parts[2])?,
            })
        })
        .collect()
}

// --- power trace ------------------------------------------------------------

pub fn write_trace(trace: &PowerTrace, stamp: Option<u64>) -> String {
    let mut out = String::with_capacity(trace.samples_w.len() * 4 + 64);
    let _ = writeln!(out, "{FILE_BANNER}");
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "sample_period_s={}", trace.sample_period_s);
    for sample in &trace.samples_w {
        let _ = writeln!(out, "{sample}");
    }
    out
}

pub fn read_trace(text: &str) -> Result<PowerTrace> {
    let (_, data) = split_lines(text)?;
    let Some((first_no, first)) = data.first() else {
        bail!("trace has no data lines");
    };
    let period = first
        .strip_prefix("sample_period_s=")
        .with_context(|| format!("line {first_no}: expected `sample_period_s=<value>`"))?;
    let sample_period_s: f64 = parse_num(*first_no, "sample period", period)?;
    let samples_w = data[1..]
        .iter()
        .map(|(line_no, line)| parse_num(*line_no, "power sample", line))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PowerTrace {
        sample_period_s,
        samples_w,
    })
}

// --- prediction CSV and plot data -------------------------------------------

const PREDICTION_HEADER: &str = "layer,kind,predicted,measured,error_pct";

fn optional(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_prediction_csv(report: &PredictionReport, stamp: Option<u64>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    let _ = writeln!(out, "# network={}", check_cell(&report.network)?);
    let _ = writeln!(out, "# target={}", report.target);
    let _ = writeln!(out, "# coefficient={}", report.coefficient);
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "{PREDICTION_HEADER}");
    for layer in &report.layers {
        let error = layer
            .measured
            .and_then(|m| previous_core::predict::error_pct(layer.predicted, m));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            check_cell(&layer.layer)?,
            layer.kind.as_str(),
            layer.predicted,
            optional(layer.measured),
            optional(error)
        );
    }
    let _ = writeln!(out, "sum,,{},,", report.sum_layers);
    let _ = writeln!(out, "network_total,,{},,", report.network_total);
    Ok(out)
}

pub fn write_plot_data(report: &PredictionReport, stamp: Option<u64>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    let _ = writeln!(out, "# network={}", check_cell(&report.network)?);
    let _ = writeln!(out, "# target={}", report.target);
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "layer,measured,predicted");
    for layer in &report.layers {
        let _ = writeln!(
            out,
            "{},{},{}",
            check_cell(&layer.layer)?,
            optional(layer.measured),
            layer.predicted
        );
    }
    Ok(out)
}

// --- network totals comparison ----------------------------------------------

const TOTALS_IN_HEADER: &str = "network,measured,predicted";
const TOTALS_OUT_HEADER: &str = "network,measured,predicted,error_pct";

/// Read `(network, measured, predicted)` comparison rows.
pub fn read_totals_csv(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let (_, data) = split_lines(text)?;
    expect_header(&data, TOTALS_IN_HEADER)?;
    data[1..]
        .iter()
        .map(|(line_no, line)| {
            let parts = fields(*line_no, line, 3)?;
            Ok((
                parts[0].to_string(),
                parse_num(*line_no, "measured", parts[1])?,
                parse_num(*line_no, "predicted", parts[2])?,
            ))
        })
        .collect()
}

pub fn write_totals_table(
    table: &previous_core::predict::TotalsTable,
    stamp: Option<u64>,
) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_BANNER}");
    push_stamp(&mut out, stamp);
    let _ = writeln!(out, "{TOTALS_OUT_HEADER}");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            check_cell(&row.network)?,
            row.measured,
            row.predicted,
            row.error_pct
        );
    }
    let _ = writeln!(out, "average_abs,,,{}", table.average_abs_error_pct);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_round_trips_with_provenance() {
        let rows = vec![
            ArchMetrics {
                layer_name: "c1".into(),
                kind: LayerKind::Conv,
                out_shape: TensorShape::new(8, 8, 16),
                n_weights: 448,
                ops: 28672,
                mem_ops: 30000,
            },
            ArchMetrics {
                layer_name: "r1".into(),
                kind: LayerKind::Relu,
                out_shape: TensorShape::new(8, 8, 16),
                n_weights: 0,
                ops: 1024,
                mem_ops: 2048,
            },
        ];
        let totals = MetricsTotals {
            n_weights: 448,
            ops: 29696,
            mem_ops: 32048,
        };
        let opts = MetricsOptions {
            im2col: true,
            count_bias_ops: false,
        };
        let text = write_metrics_csv("net", opts, &rows, &totals, None).unwrap();
        assert!(text.starts_with("# previous-kit v1\n"));
        let file = read_metrics_csv(&text).unwrap();
        assert_eq!(file.network, "net");
        assert_eq!(file.options, opts);
        assert_eq!(file.rows, rows);
        // regenerating produces identical bytes
        assert_eq!(
            write_metrics_csv("net", opts, &file.rows, &totals, None).unwrap(),
            text
        );
    }

    #[test]
    fn metrics_totals_are_cross_checked() {
        let text = "# previous-kit v1\n# network=n\n# im2col=false bias_ops=true\n\
                    layer,kind,h_out,w_out,c_out,n_weights,ops,mem_ops\n\
                    a,relu,1,1,1,0,5,10\n\
                    total,,,,,0,5,11\n";
        let err = read_metrics_csv(text).unwrap_err();
        assert!(format!("{err}").contains("totals row disagrees"));
    }

    #[test]
    fn timing_and_schedule_round_trip_exact_floats() {
        let records = vec![
            TimingRecord {
                layer: "a".into(),
                run: 0,
                elapsed_ms: 0.1 + 0.2, // deliberately non-representable sum
            },
            TimingRecord {
                layer: "a".into(),
                run: 1,
                elapsed_ms: 40.96e-3,
            },
        ];
        let text = write_timing_csv(&records, None).unwrap();
        assert_eq!(read_timing_csv(&text).unwrap(), records);

        let schedule = vec![ScheduleEntry {
            layer: "a".into(),
            n_runs: 3,
            per_run_ms: 489.0 * 40.96e-3,
        }];
        let text = write_schedule_csv(&schedule, None).unwrap();
        assert_eq!(read_schedule_csv(&text).unwrap(), schedule);
    }

    #[test]
    fn traces_round_trip_and_validate() {
        let trace = PowerTrace {
            sample_period_s: 40.96e-6,
            samples_w: vec![1.0, 2.5, 3.125],
        };
        let text = write_trace(&trace, None);
        assert!(text.contains("sample_period_s=0.00004096\n"));
        assert_eq!(read_trace(&text).unwrap(), trace);

        assert!(read_trace("1.0\n2.0\n").is_err(), "banner required");
        let bad = "# previous-kit v1\n1.0\n";
        assert!(read_trace(bad).is_err(), "period line required");
    }

    #[test]
    fn totals_tables_write_errors_and_average() {
        let rows = vec![
            ("alexnet".to_string(), 561.64, 526.75),
            ("squeezenet".to_string(), 348.15, 343.54),
        ];
        let parsed = read_totals_csv(
            "# previous-kit v1\nnetwork,measured,predicted\nalexnet,561.64,526.75\nsqueezenet,348.15,343.54\n",
        )
        .unwrap();
        assert_eq!(parsed, rows);
        let table = previous_core::predict::totals_error_table(&rows).unwrap();
        let text = write_totals_table(&table, None).unwrap();
        assert!(text.contains("average_abs,,,"));
        let err_line = text.lines().find(|l| l.starts_with("alexnet")).unwrap();
        let err: f64 = err_line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((err + 6.21).abs() < 0.01);
    }

    #[test]
    fn csv_cells_reject_delimiter_characters() {
        let record = [TimingRecord {
            layer: "bad,name".into(),
            run: 0,
            elapsed_ms: 1.0,
        }];
        assert!(write_timing_csv(&record, None).is_err());
    }

    #[test]
    fn stamps_appear_as_comments_and_do_not_disturb_parsing() {
        let records = vec![TimingRecord {
            layer: "a".into(),
            run: 0,
            elapsed_ms: 1.5,
        }];
        let text = write_timing_csv(&records, Some(1_755_867_600)).unwrap();
        assert!(text.contains("# stamp=1755867600\n"));
        assert_eq!(read_timing_csv(&text).unwrap(), records);
    }
}
