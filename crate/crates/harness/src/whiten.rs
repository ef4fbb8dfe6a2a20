//! Subspace error of the matrix-collapse baseline: the top eigenspace of
//! `T̃(I, I, θ)` for random unit `θ`, compared with the true span.
//!
//! Each dimension gets one noise tensor; draw `t` uses the same Gaussian
//! prefix for `θ` in every dimension, so the per-dimension medians differ
//! by the dimension effect rather than by resampling.

use anyhow::{bail, Result};
use tpm_core::linalg::norm2;
use tpm_core::rng::{rng_at, split_seed, standard_normal_vec};
use tpm_core::{benchmark_spectrum, whitening_compare, CalibratedNoise, NoiseRegime, SsHopmConfig, Tensor3};

use crate::config::Config;
use crate::stats::median;
use crate::table::{num, Table};

pub const KEYS: &[&str] = &["seed", "dims", "noise", "draws", "regime"];

#[derive(Debug, Clone, PartialEq)]
pub struct WhitenSpec {
    pub dims: Vec<usize>,
    /// Operator norm of the added noise.
    pub noise: f64,
    pub draws: usize,
    pub regime: NoiseRegime,
    pub seed: u64,
}

impl Default for WhitenSpec {
    fn default() -> Self {
        Self {
            dims: vec![50, 100],
            noise: 0.02,
            draws: 20,
            regime: NoiseRegime::Gaussian,
            seed: 1,
        }
    }
}

impl WhitenSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys(KEYS)?;
        let d = Self::default();
        let spec = Self {
            dims: cfg.list_or("dims", &d.dims)?,
            noise: cfg.parse_or("noise", d.noise)?,
            draws: cfg.parse_or("draws", d.draws)?,
            regime: cfg.parse_or("regime", d.regime)?,
            seed: cfg.parse_or("seed", d.seed)?,
        };
        if spec.draws == 0 || spec.dims.is_empty() || spec.dims.iter().any(|d| *d < 4) {
            bail!("need at least one draw and dimensions of at least 4");
        }
        Ok(spec)
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("dims", self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
        c.set("noise", num(self.noise));
        c.set("draws", self.draws);
        c.set("regime", self.regime);
        c.set("seed", self.seed);
        c
    }
}

pub const COLUMNS: &[&str] = &["d", "noise_opnorm", "draw", "distance"];

pub fn whitening_table(spec: &WhitenSpec) -> Result<Table> {
    let longest = spec.dims.iter().copied().max().unwrap_or(0);
    let mut t = Table::new("whiten", spec.to_config(), COLUMNS);
    for &d in &spec.dims {
        let truth = benchmark_spectrum::<f64>(d)?;
        let noise = CalibratedNoise::new(spec.regime, &truth, split_seed(spec.seed, &[d as u64]), &SsHopmConfig::new(5, 100))?;
        let noisy = Tensor3::from_components(&truth).add(&noise.at(spec.noise)?)?;
        for draw in 0..spec.draws {
            let g: Vec<f64> = standard_normal_vec(longest, &mut rng_at(split_seed(spec.seed, &[draw as u64]), &[9]));
            let n = norm2(&g[..d]);
            let theta: Vec<f64> = g[..d].iter().map(|x| x / n).collect();
            let dist = whitening_compare(&noisy, &truth, &theta)?;
            t.push(vec![d.to_string(), num(spec.noise), draw.to_string(), num(dist)]);
        }
    }
    Ok(t)
}

/// Median distance per dimension, in table order.
pub fn medians(table: &Table) -> Result<Vec<(usize, f64)>> {
    let dc = table.column("d")?;
    let dist = table.floats("distance")?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for (row, x) in table.rows.iter().zip(dist) {
        let d: usize = row[dc].parse()?;
        match out.iter_mut().find(|(e, _)| *e == d) {
            Some((_, v)) => v.push(x),
            None => out.push((d, vec![x])),
        }
    }
    Ok(out.into_iter().map(|(d, v)| (d, median(&v))).collect())
}
