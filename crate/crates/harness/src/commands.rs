//! Table-producing experiments addressed by name, so a table can be
//! regenerated from its header.

use anyhow::{bail, Result};

use crate::config::Config;
use crate::curves::{dp_curve, stream_curve, DpCurveSpec, StreamCurveSpec};
use crate::phase::{phase_table, run_phase_transition, trial_table, SweepSpec};
use crate::svg::{Chart, Series};
use crate::table::Table;
use crate::whiten::{medians, whitening_table, WhitenSpec};

pub const EXPERIMENTS: &[&str] = &["phase", "stream-curve", "dp-curve", "whiten"];

#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    /// Non-reproducible companion data (per-trial outcomes with timings).
    pub sidecar: Option<Table>,
}

/// Runs experiment `command` with settings `cfg`; absent keys take the
/// experiment's defaults and every resolved value lands in the header.
pub fn run_table(command: &str, cfg: &Config) -> Result<Output> {
    Ok(match command {
        "phase" => {
            let spec = SweepSpec::from_config(cfg)?;
            let sweep = run_phase_transition(&spec)?;
            Output {
                table: phase_table(&spec, &sweep),
                sidecar: Some(trial_table(&sweep)),
            }
        }
        "stream-curve" => Output {
            table: stream_curve(&StreamCurveSpec::from_config(cfg)?)?,
            sidecar: None,
        },
        "dp-curve" => Output {
            table: dp_curve(&DpCurveSpec::from_config(cfg)?)?,
            sidecar: None,
        },
        "whiten" => Output {
            table: whitening_table(&WhitenSpec::from_config(cfg)?)?,
            sidecar: None,
        },
        other => bail!("unknown experiment `{other}` (expected one of: {})", EXPERIMENTS.join(", ")),
    })
}

pub fn reproduce(table: &Table) -> Result<Table> {
    Ok(run_table(&table.command, &table.config)?.table)
}

fn grouped(table: &Table, key: &str, x: &str, y: &str, prefix: &str) -> Result<Vec<Series>> {
    let kc = table.column(key)?;
    let xs = table.floats(x)?;
    let ys = table.floats(y)?;
    let mut out: Vec<Series> = Vec::new();
    for ((row, x), y) in table.rows.iter().zip(xs).zip(ys) {
        let label = format!("{prefix}{}", row[kc]);
        match out.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, y)),
            None => out.push(Series {
                label,
                points: vec![(x, y)],
            }),
        }
    }
    Ok(out)
}

pub fn chart(table: &Table) -> Result<Chart> {
    let (title, x_label, y_label, log_y, series) = match table.command.as_str() {
        "phase" => ("failure probability", "sigma", "fail_prob", false, grouped(table, "d", "sigma", "fail_prob", "d=")?),
        "stream-curve" => ("online error", "batch size", "median_err", true, grouped(table, "d", "n", "median_err", "d=")?),
        "dp-curve" => ("private error", "epsilon", "median_err_v1", true, grouped(table, "d", "epsilon", "median_err_v1", "d=")?),
        "whiten" => {
            let pts = medians(table)?.into_iter().map(|(d, m)| (d as f64, m)).collect();
            let s = vec![Series {
                label: "median".into(),
                points: pts,
            }];
            ("matrix-collapse subspace error", "d", "distance", true, s)
        }
        other => bail!("no chart for `{other}`"),
    };
    Ok(Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_x: true,
        log_y,
        series,
    })
}
