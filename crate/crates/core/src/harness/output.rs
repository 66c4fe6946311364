use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Metrics, ResultRow, TierStats};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::scenario::Tier;

pub const RESULTS_HEADER: &str = "# hapnet-results v1";
pub const SUMMARY_HEADER: &str = "# hapnet-summary v1";

const BASE_COLUMNS: [&str; 7] = [
    "utility",
    "sum_rate_bps",
    "mean_rate_bps",
    "min_rate_bps",
    "max_rate_bps",
    "served",
    "placement_objective",
];

const TIER_COLUMNS: [&str; 6] = [
    "users",
    "mean_rate_bps",
    "max_rate_bps",
    "min_rate_bps",
    "max_power_w",
    "min_power_w",
];

/// Metric column names in output order.
pub fn metric_columns() -> Vec<String> {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for t in Tier::ALL {
        cols.extend(TIER_COLUMNS.iter().map(|c| format!("{}_{c}", t.name())));
    }
    cols
}

fn metrics_from_values(v: &[f64]) -> Metrics {
    let tier = |i: usize| {
        let b = BASE_COLUMNS.len() + i * TIER_COLUMNS.len();
        TierStats {
            users: v[b] as usize,
            mean_rate_bps: v[b + 1],
            max_rate_bps: v[b + 2],
            min_rate_bps: v[b + 3],
            max_power_w: v[b + 4],
            min_power_w: v[b + 5],
        }
    };
    Metrics {
        utility: v[0],
        sum_rate_bps: v[1],
        mean_rate_bps: v[2],
        min_rate_bps: v[3],
        max_rate_bps: v[4],
        served: v[5] as usize,
        placement_objective: v[6] as usize,
        tiers: [tier(0), tier(1), tier(2)],
    }
}

/// Raw rows: a version comment, then
/// `sweep_value,seed,status,<metric columns>`. Failed rows carry the error
/// text in `status` and empty metrics.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sweep_value".to_string(), "seed".into(), "status".into()];
    header.extend(metric_columns());
    w.write_record(&header)?;
    let width = metric_columns().len();
    for row in rows {
        let mut rec = vec![row.sweep_value.to_string(), row.seed.to_string()];
        match &row.outcome {
            Ok(m) => {
                rec.push("ok".into());
                rec.extend(m.values().iter().map(|x| x.to_string()));
            }
            Err(e) => {
                rec.push(format!("error: {e}"));
                rec.extend(std::iter::repeat_n(String::new(), width));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Reads a file written by [`write_results_csv`].
pub fn read_results_csv<R: BufRead>(mut input: R) -> Result<Vec<ResultRow>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != RESULTS_HEADER {
        return Err(Error::Parse(format!("expected {RESULTS_HEADER:?}, found {:?}", first.trim_end())));
    }
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let sweep_value = parse_f64(&rec[0])?;
        let seed = rec[1].parse().map_err(|_| Error::Parse(format!("bad seed {:?}", &rec[1])))?;
        let outcome = if &rec[2] == "ok" {
            let v = rec.iter().skip(3).map(parse_f64).collect::<Result<Vec<f64>>>()?;
            Ok(metrics_from_values(&v))
        } else {
            Err(rec[2].trim_start_matches("error: ").to_string())
        };
        rows.push(ResultRow { sweep_value, seed, outcome });
    }
    Ok(rows)
}

/// Mean and sample standard deviation of every metric over the successful
/// rows of one grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub ok: usize,
    pub failed: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl SummaryRow {
    /// Mean of the named metric column.
    pub fn mean_of(&self, column: &str) -> Option<f64> {
        metric_columns().iter().position(|c| c == column).map(|i| self.mean[i])
    }
}

/// Groups rows by grid value (first-appearance order).
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.iter().any(|v| v.to_bits() == r.sweep_value.to_bits()) {
            values.push(r.sweep_value);
        }
    }
    let width = metric_columns().len();
    values
        .into_iter()
        .map(|value| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_value.to_bits() == value.to_bits()).collect();
            let ok: Vec<Vec<f64>> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).map(|m| m.values()).collect();
            let n = ok.len();
            let mut mean = vec![0.0; width];
            let mut std = vec![0.0; width];
            if n > 0 {
                for c in 0..width {
                    let m = ok.iter().map(|v| v[c]).sum::<f64>() / n as f64;
                    mean[c] = m;
                    if n > 1 {
                        let ss: f64 = ok.iter().map(|v| (v[c] - m) * (v[c] - m)).sum();
                        std[c] = (ss / (n - 1) as f64).sqrt();
                    }
                }
            }
            SummaryRow { sweep_value: value, ok: n, failed: group.len() - n, mean, std }
        })
        .collect()
}

/// `sweep_value,ok,failed,<metric>_mean,<metric>_std,...`.
pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sweep_value".to_string(), "ok".into(), "failed".into()];
    for c in metric_columns() {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    w.write_record(&header)?;
    for s in summary {
        let mut rec = vec![s.sweep_value.to_string(), s.ok.to_string(), s.failed.to_string()];
        for (m, d) in s.mean.iter().zip(&s.std) {
            rec.push(m.to_string());
            rec.push(d.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Git-style content hash: `sha256("blob <len>\0" || bytes)`, hex encoded.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Hash of the resolved configuration below.
    pub config_hash: String,
    /// Hashes of the files this run wrote, by file name.
    pub outputs: std::collections::BTreeMap<String, String>,
}

/// Run manifest: run metadata plus the full resolved configuration. It can
/// be passed back as `--config` to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub config: Config,
}

impl Manifest {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            run: RunInfo {
                tool: "hapnet".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config_hash: blob_hash(config.to_toml_string().as_bytes()),
                outputs: Default::default(),
            },
            config: config.clone(),
        }
    }

    pub fn add_output(&mut self, name: &str, bytes: &[u8]) {
        self.run.outputs.insert(name.into(), blob_hash(bytes));
    }
}

pub fn write_manifest<W: Write>(manifest: &Manifest, mut out: W) -> Result<()> {
    let text = toml::to_string(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(text.as_bytes())?;
    Ok(())
}
