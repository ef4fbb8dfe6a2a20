//! Flat `key=value` settings. The same map is read from config files,
//! overridden by command-line flags, and embedded in every CSV header.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key=value`, got `{line}`", n + 1))?;
            let k = k.trim();
            if k.is_empty() {
                bail!("line {}: empty key", n + 1);
            }
            if cfg.entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key `{k}`", n + 1);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Sets `key` only when `value` is present.
    pub fn set_opt<V: Display>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Entries of `other` replace entries of `self`.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("bad value for `{key}`: `{v}` ({e})")),
        }
    }

    pub fn list_or<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(v).with_context(|| format!("bad list for `{key}`")),
        }
    }

    /// Fails on keys outside `known`, which catches typos in config files.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            if !known.contains(&k.as_str()) {
                bail!("unknown setting `{k}` (expected one of: {})", known.join(", "));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Sorted `key=value` lines.
    pub fn render(&self) -> String {
        self.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`render`](Self::render), hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.render().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse().map_err(|e| anyhow!("bad list element `{p}` ({e})"))
        })
        .collect()
}

/// A grid given either as a comma list or as `lo:hi:per_decade`, meaning
/// `lo·10^(i/per_decade)` for every `i` that stays at or below `hi`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| anyhow!("bad grid bound `{p}`")))
            .collect::<Result<_>>()?;
        let [lo, hi, per] = parts[..] else {
            bail!("log grid must be `lo:hi:per_decade`, got `{s}`");
        };
        if !(lo > 0.0 && hi >= lo && per >= 1.0 && per.fract() == 0.0) {
            bail!("log grid needs 0 < lo ≤ hi and a whole number of points per decade, got `{s}`");
        }
        let span = (hi / lo).log10() * per;
        let n = (span + 1e-9).floor() as usize + 1;
        (0..n).map(|i| lo * 10f64.powf(i as f64 / per)).collect()
    } else {
        parse_list(s)?
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
        bail!("grid values must be finite and non-negative");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        bail!("grid must be strictly increasing");
    }
    Ok(grid)
}
