//! Failure probability of the robust power method on the benchmark tensor
//! `e₁⊗³ + 0.75·e₂⊗³ + 0.5·e₃⊗³` plus noise of a controlled operator norm.
//!
//! Trial `t` in dimension `d` uses seed `split_seed(master, [regime, d, t])`.
//! One noise tensor is drawn per trial and rescaled to every grid value, so
//! neighbouring cells share random numbers and the failure curve of each
//! trial is monotone wherever the method itself is.

use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use tpm_core::rng::split_seed;
use tpm_core::{benchmark_spectrum, robust_tpm, score_recovery, CalibratedNoise, NoiseRegime, SsHopmConfig, Tensor3, TpmConfig};

use crate::config::{parse_grid, Config};
use crate::table::{num, Table};

/// A trial succeeds when every true component has a match with
/// `|v̂ᵀv| ≥ 1/4`.
pub const SUCCESS_DOT: f64 = 0.25;
const K: usize = 3;

pub const KEYS: &[&str] = &["seed", "regime", "dims", "sigma_grid", "trials", "L", "R", "opnorm_restarts", "opnorm_iters"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub regime: NoiseRegime,
    pub dims: Vec<usize>,
    pub sigma_grid: String,
    pub trials: usize,
    pub restarts: usize,
    pub iters: usize,
    pub opnorm: SsHopmConfig,
    pub seed: u64,
}

impl SweepSpec {
    /// Regime-specific defaults: the grid window and schedule are chosen so
    /// that the transition falls inside the grid for `d` from 25 to 200.
    pub fn defaults(regime: NoiseRegime) -> Self {
        let (grid, restarts, iters) = match regime {
            NoiseRegime::Gaussian => ("0.01:3.2:12", 3, 10),
            NoiseRegime::Adversarial => ("0.1:32:12", 20, 30),
            NoiseRegime::WeaklyCorrelated => ("0.01:3.2:12", 5, 20),
        };
        Self {
            regime,
            dims: vec![25, 50, 100, 200],
            sigma_grid: grid.to_string(),
            trials: 20,
            restarts,
            iters,
            opnorm: SsHopmConfig::new(5, 100),
            seed: 1,
        }
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys(KEYS)?;
        let regime: NoiseRegime = cfg.parse_or("regime", NoiseRegime::Gaussian)?;
        let d = Self::defaults(regime);
        let spec = Self {
            regime,
            dims: cfg.list_or("dims", &d.dims)?,
            sigma_grid: cfg.get("sigma_grid").unwrap_or(&d.sigma_grid).to_string(),
            trials: cfg.parse_or("trials", d.trials)?,
            restarts: cfg.parse_or("L", d.restarts)?,
            iters: cfg.parse_or("R", d.iters)?,
            opnorm: SsHopmConfig::new(cfg.parse_or("opnorm_restarts", d.opnorm.restarts)?, cfg.parse_or("opnorm_iters", d.opnorm.iters)?),
            seed: cfg.parse_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("regime", self.regime);
        c.set("dims", self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
        c.set("sigma_grid", &self.sigma_grid);
        c.set("trials", self.trials);
        c.set("L", self.restarts);
        c.set("R", self.iters);
        c.set("opnorm_restarts", self.opnorm.restarts);
        c.set("opnorm_iters", self.opnorm.iters);
        c.set("seed", self.seed);
        c
    }

    pub fn sigmas(&self) -> Result<Vec<f64>> {
        parse_grid(&self.sigma_grid).context("sigma_grid")
    }

    pub fn validate(&self) -> Result<()> {
        self.sigmas()?;
        if self.trials == 0 {
            bail!("at least one trial per cell is required");
        }
        if self.dims.is_empty() || self.dims.iter().any(|d| *d < 4) {
            bail!("dimensions must be at least 4");
        }
        if self.restarts == 0 || self.iters == 0 {
            bail!("L and R must be positive");
        }
        Ok(())
    }

    pub fn trial_seed(&self, d: usize, trial: usize) -> u64 {
        split_seed(self.seed, &[self.regime.index(), d as u64, trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub d: usize,
    pub regime: NoiseRegime,
    pub sigma: f64,
    pub success: Vec<bool>,
    pub eigenvalue_errors: Vec<f64>,
    pub eigenvector_errors: Vec<f64>,
    /// Set when extraction itself failed; such trials count as failures.
    pub error: Option<String>,
    pub wall: Duration,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.success.iter().all(|s| *s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub d: usize,
    pub sigma: f64,
    pub failures: usize,
    pub trials: usize,
}

impl Cell {
    pub fn fail_prob(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub cells: Vec<Cell>,
    /// Ordered by dimension, trial, then grid value.
    pub trials: Vec<TrialRecord>,
}

fn run_trial(spec: &SweepSpec, d: usize, trial: usize, sigmas: &[f64]) -> Result<Vec<TrialRecord>> {
    let seed = spec.trial_seed(d, trial);
    let truth = benchmark_spectrum::<f64>(d)?;
    let signal = Tensor3::from_components(&truth);
    let noise = CalibratedNoise::new(spec.regime, &truth, split_seed(seed, &[0]), &spec.opnorm)?;
    let cfg = TpmConfig::new(K, spec.restarts, spec.iters, split_seed(seed, &[1]));
    let mut out = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let start = Instant::now();
        let noisy = signal.add(&noise.at(sigma)?)?;
        let mut rec = TrialRecord {
            seed,
            d,
            regime: spec.regime,
            sigma,
            success: Vec::new(),
            eigenvalue_errors: Vec::new(),
            eigenvector_errors: Vec::new(),
            error: None,
            wall: Duration::ZERO,
        };
        match robust_tpm(&noisy, &cfg).and_then(|est| score_recovery(&truth, &est, SUCCESS_DOT)) {
            Ok(r) => {
                rec.success = r.success;
                rec.eigenvalue_errors = r.eigenvalue_errors;
                rec.eigenvector_errors = r.eigenvector_errors;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec.wall = start.elapsed();
        out.push(rec);
    }
    Ok(out)
}

pub fn run_phase_transition(spec: &SweepSpec) -> Result<Sweep> {
    spec.validate()?;
    let sigmas = spec.sigmas()?;
    let jobs: Vec<(usize, usize)> = spec.dims.iter().flat_map(|&d| (0..spec.trials).map(move |t| (d, t))).collect();
    let per_job: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(d, t)| run_trial(spec, d, t, &sigmas))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (di, &d) in spec.dims.iter().enumerate() {
        let runs = &per_job[di * spec.trials..(di + 1) * spec.trials];
        for (si, &sigma) in sigmas.iter().enumerate() {
            let failures = runs.iter().filter(|r| !r[si].succeeded()).count();
            cells.push(Cell {
                d,
                sigma,
                failures,
                trials: spec.trials,
            });
        }
    }
    Ok(Sweep {
        cells,
        trials: per_job.into_iter().flatten().collect(),
    })
}

pub const COLUMNS: &[&str] = &["seed", "d", "regime", "sigma", "sigma_sqrtd", "sigma_d", "sigma_logd", "fail_prob"];

pub fn phase_table(spec: &SweepSpec, sweep: &Sweep) -> Table {
    let mut t = Table::new("phase", spec.to_config(), COLUMNS);
    for c in &sweep.cells {
        let d = c.d as f64;
        t.push(vec![
            spec.seed.to_string(),
            c.d.to_string(),
            spec.regime.to_string(),
            num(c.sigma),
            num(c.sigma * d.sqrt()),
            num(c.sigma * d),
            num(c.sigma * d.ln()),
            num(c.fail_prob()),
        ]);
    }
    t
}

/// Per-trial outcomes with wall times; kept apart from the main table so
/// that the latter stays bit-reproducible.
pub fn trial_table(sweep: &Sweep) -> Table {
    let mut t = Table::new(
        "phase-trials",
        Config::new(),
        &["seed", "d", "regime", "sigma", "success", "eigenvalue_errors", "eigenvector_errors", "error", "wall_ms"],
    );
    let join = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
    for r in &sweep.trials {
        t.push(vec![
            r.seed.to_string(),
            r.d.to_string(),
            r.regime.to_string(),
            num(r.sigma),
            r.success.iter().map(|s| if *s { "1" } else { "0" }).collect::<Vec<_>>().join(""),
            join(&r.eigenvalue_errors),
            join(&r.eigenvector_errors),
            r.error.clone().unwrap_or_default(),
            num(r.wall.as_secs_f64() * 1e3),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub sigma: f64,
    /// The failure curve decreases somewhere before the crossing.
    pub non_monotone: bool,
}

/// First grid crossing of `fail_prob = 0.5`, linearly interpolated between
/// the bracketing grid points. `points` must be sorted by `σ`.
pub fn extract_transition(points: &[(f64, f64)]) -> Result<Transition> {
    let idx = points
        .iter()
        .position(|&(_, p)| p >= 0.5)
        .with_context(|| "failure probability never reaches 0.5; widen the grid")?;
    let non_monotone = points[..=idx].windows(2).any(|w| w[1].1 < w[0].1);
    let sigma = if idx == 0 {
        points[0].0
    } else {
        let ((s0, p0), (s1, p1)) = (points[idx - 1], points[idx]);
        s0 + (0.5 - p0) / (p1 - p0) * (s1 - s0)
    };
    Ok(Transition { sigma, non_monotone })
}

/// [`extract_transition`] on the rows of a phase table for dimension `d`.
pub fn transition_from_table(table: &Table, d: usize) -> Result<Transition> {
    let dc = table.column("d")?;
    let sigmas = table.floats("sigma")?;
    let probs = table.floats("fail_prob")?;
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .zip(sigmas.into_iter().zip(probs))
        .filter(|(r, _)| r[dc] == d.to_string())
        .map(|(_, p)| p)
        .collect();
    if points.is_empty() {
        bail!("table has no rows for d = {d}");
    }
    extract_transition(&points)
}
