//! One-variable parameter sweeps over generated scenarios.

use std::io::Write;
use std::str::FromStr;

use fogmarket_core::market::{cloud_only_baseline, run_market};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::generator::{generate, GeneratorParams};
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    NDss,
    LambdaMean,
    Mu,
    TTh,
    NFn,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::NDss => "n_dss",
            SweepVar::LambdaMean => "lambda_mean",
            SweepVar::Mu => "mu",
            SweepVar::TTh => "t_th",
            SweepVar::NFn => "n_fn",
        }
    }

    /// Copy of `base` with this variable set to `value`.
    pub fn apply(self, base: &GeneratorParams, value: f64) -> Result<GeneratorParams> {
        let mut p = base.clone();
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Sweep(format!("{} must be a non-negative integer, got {value}", self.name())))
            }
        };
        match self {
            SweepVar::NDss => p.n_dss = count()?,
            SweepVar::NFn => p.n_fn = count()?,
            SweepVar::LambdaMean => p.lambda_mean = value,
            SweepVar::Mu => p.mu = value,
            SweepVar::TTh => p.t_th = value,
        }
        Ok(p)
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "n_dss" => Ok(SweepVar::NDss),
            "lambda_mean" => Ok(SweepVar::LambdaMean),
            "mu" => Ok(SweepVar::Mu),
            "t_th" => Ok(SweepVar::TTh),
            "n_fn" => Ok(SweepVar::NFn),
            _ => Err(format!("unknown sweep variable {s:?} (expected n_dss, lambda_mean, mu, t_th or n_fn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub grid: Vec<f64>,
    pub replications: usize,
    pub base: GeneratorParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(HarnessError::Sweep("grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Sweep("grid values must be finite".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Sweep("grid must be strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Sweep("at least one replication is required".into()));
        }
        self.base.validate()
    }
}

/// Parses `start:stop:step` (inclusive of `stop` when it lies on the grid)
/// or a comma-separated list.
pub fn parse_grid(text: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad grid value {s:?}: {e}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop.is_nan() || stop < start {
                return Err(format!("bad grid range {text:?}"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(format!("bad grid {text:?}: use start:stop:step or a comma list")),
    }
}

/// Seed for one (grid point, replicate) cell. Both indices are folded into
/// the base seed with the splitmix64 finaliser, so a cell's seed depends
/// only on its own indices.
pub fn cell_seed(base: u64, grid_index: usize, replicate: usize) -> u64 {
    let a = splitmix64(base ^ splitmix64(grid_index as u64 + 1));
    splitmix64(a ^ splitmix64((replicate as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One CSV row. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub util_fn_total: f64,
    pub util_dso_total: f64,
    pub util_dss_total: f64,
    pub util_dss_baseline: f64,
    pub cloud_crbs: f64,
}

pub const CSV_HEADER: &str =
    "variable,value,replicate,seed,util_fn_total,util_dso_total,util_dss_total,util_dss_baseline,cloud_crbs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub grid_index: usize,
    pub value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<PointError>,
    /// Arrival rates clipped across all generated scenarios.
    pub clipped_rates: usize,
    pub total_rates: usize,
}

/// Per-grid-point means over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub value: f64,
    pub n: usize,
    pub util_fn_total: f64,
    pub util_dso_total: f64,
    pub util_dss_total: f64,
    pub util_dss_baseline: f64,
    pub cloud_crbs: f64,
}

impl SweepReport {
    pub fn summary(&self) -> Vec<PointSummary> {
        let mut out: Vec<PointSummary> = Vec::new();
        let mut start = 0;
        while start < self.rows.len() {
            let value = self.rows[start].value;
            let end = start + self.rows[start..].iter().take_while(|r| r.value == value).count();
            let rows = &self.rows[start..end];
            let col = |f: fn(&SweepRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
            out.push(PointSummary {
                value,
                n: rows.len(),
                util_fn_total: col(|r| r.util_fn_total),
                util_dso_total: col(|r| r.util_dso_total),
                util_dss_total: col(|r| r.util_dss_total),
                util_dss_baseline: col(|r| r.util_dss_baseline),
                cloud_crbs: col(|r| r.cloud_crbs),
            });
            start = end;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

struct Cell {
    row: std::result::Result<SweepRow, PointError>,
    clipped: usize,
    rates: usize,
}

fn run_cell(spec: &SweepSpec, grid_index: usize, replicate: usize) -> Cell {
    let value = spec.grid[grid_index];
    let seed = cell_seed(spec.base.seed, grid_index, replicate);
    let attempt = || -> Result<(SweepRow, usize, usize)> {
        let mut params = spec.variable.apply(&spec.base, value)?;
        params.seed = seed;
        let generated = generate(&params)?;
        let scenario = &generated.scenario;
        let outcome = run_market(scenario)?;
        let baseline = cloud_only_baseline(scenario)?;
        let row = SweepRow {
            variable: spec.variable.name().to_string(),
            value,
            replicate,
            seed,
            util_fn_total: outcome.utilities.total_fn,
            util_dso_total: outcome.utilities.total_dso,
            util_dss_total: outcome.utilities.total_dss,
            util_dss_baseline: baseline.utilities.total_dss,
            cloud_crbs: outcome.cloud_total(),
        };
        Ok((row, generated.clipped, scenario.dsss.len()))
    };
    match attempt() {
        Ok((row, clipped, rates)) => Cell { row: Ok(row), clipped, rates },
        Err(e) => {
            log::warn!("{}={value} replicate {replicate}: {e}", spec.variable.name());
            Cell {
                row: Err(PointError { grid_index, value, replicate, seed, message: e.to_string() }),
                clipped: 0,
                rates: 0,
            }
        }
    }
}

/// Runs every (grid point, replicate) cell on `workers` threads (0 means
/// rayon's default). Rows come back ordered by grid index, then replicate,
/// whatever the completion order. A failing cell is reported in `errors`
/// and does not stop the others.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepReport> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.grid.len()).flat_map(|g| (0..spec.replications).map(move |r| (g, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Sweep(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Cell> = pool.install(|| cells.par_iter().map(|&(g, r)| run_cell(spec, g, r)).collect());

    let mut report = SweepReport { rows: Vec::new(), errors: Vec::new(), clipped_rates: 0, total_rates: 0 };
    for cell in results {
        report.clipped_rates += cell.clipped;
        report.total_rates += cell.rates;
        match cell.row {
            Ok(row) => report.rows.push(row),
            Err(e) => report.errors.push(e),
        }
    }
    if report.clipped_rates > 0 {
        log::info!(
            "clipped {} of {} arrival rates ({:.2}%)",
            report.clipped_rates,
            report.total_rates,
            100.0 * report.clipped_rates as f64 / report.total_rates as f64
        );
    }
    Ok(report)
}
