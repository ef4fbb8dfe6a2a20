//! CSV tables with a provenance header.
//!
//! ```text
//! # tpm-harness 0.1.0
//! # command: phase
//! # seed: 7
//! # digest: 3f1c…
//! # config: dims=25,50,100
//! # config: regime=gaussian
//! seed,d,regime,sigma,…
//! ```
//!
//! The `config:` lines hold every resolved setting, so the command can be
//! re-run from the header alone. Floats are written in Rust's shortest
//! round-trip form.

use std::io::{BufRead, BufReader, Read, Write};

use anyhow::{anyhow, bail, Context, Result};

use crate::config::Config;

pub const TOOL: &str = concat!("tpm-harness ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub config: Config,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

impl Table {
    pub fn new(command: &str, config: Config, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn seed(&self) -> Option<u64> {
        self.config.get("seed").and_then(|s| s.parse().ok())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {TOOL}")?;
        writeln!(w, "# command: {}", self.command)?;
        if let Some(seed) = self.config.get("seed") {
            writeln!(w, "# seed: {seed}")?;
        }
        writeln!(w, "# digest: {}", self.config.digest())?;
        for (k, v) in self.config.iter() {
            writeln!(w, "# config: {k}={v}")?;
        }
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut command = None;
        let mut digest = None;
        let mut config = Config::new();
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            let Some(comment) = line.strip_prefix('#') else {
                body.push_str(&line);
                reader.read_to_string(&mut body)?;
                break;
            };
            let comment = comment.trim();
            if let Some(c) = comment.strip_prefix("command:") {
                command = Some(c.trim().to_string());
            } else if let Some(d) = comment.strip_prefix("digest:") {
                digest = Some(d.trim().to_string());
            } else if let Some(kv) = comment.strip_prefix("config:") {
                let (k, v) = kv.trim().split_once('=').ok_or_else(|| anyhow!("bad config line `{comment}`"))?;
                config.set(k, v);
            }
        }
        let command = command.ok_or_else(|| anyhow!("table header lacks a `command:` line"))?;
        if let Some(d) = digest {
            if d != config.digest() {
                bail!("config digest mismatch: header says {d}, config hashes to {}", config.digest());
            }
        }
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        let columns = csv.headers()?.iter().map(str::to_string).collect();
        let rows = csv
            .records()
            .map(|r| Ok(r?.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>>>()
            .context("reading table rows")?;
        Ok(Self {
            command,
            config,
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| anyhow!("table has no `{name}` column"))
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name)?;
        self.rows
            .iter()
            .map(|r| r[i].parse().map_err(|_| anyhow!("non-numeric `{name}` value `{}`", r[i])))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut cfg = Config::new();
        cfg.set("seed", 7);
        cfg.set("dims", "25,50");
        let mut t = Table::new("phase", cfg, &["d", "sigma"]);
        t.push(vec!["25".into(), num(0.1)]);
        t.push(vec!["50".into(), num(1.0 / 3.0)]);
        t
    }

    #[test]
    fn header_and_round_trip() {
        let t = sample();
        let text = t.to_csv_string();
        assert!(text.starts_with(&format!("# {TOOL}\n# command: phase\n# seed: 7\n# digest: ")));
        assert!(text.contains("# config: dims=25,50\n"));
        let back = Table::read(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("sigma").unwrap()[1], 1.0 / 3.0);
        assert_eq!(back.seed(), Some(7));
    }

    #[test]
    fn tampered_config_is_detected() {
        let text = sample().to_csv_string().replace("dims=25,50", "dims=25,51");
        assert!(Table::read(text.as_bytes()).is_err());
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1e-300, 123456.789, f64::MIN_POSITIVE, 2.0f64.sqrt()] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
