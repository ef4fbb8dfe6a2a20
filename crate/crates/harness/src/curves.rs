//! Error curves: online method against batch size, private method against
//! the privacy budget.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use rayon::prelude::*;
use tpm_core::linalg::basis_vector;
use tpm_core::rng::{rng_at, split_seed, standard_normal};
use tpm_core::streaming::ConstantStream;
use tpm_core::{
    benchmark_spectrum, coherence, online_rtpm, private_rtpm, robust_tpm, score_recovery, PrivateConfig, SampleStream,
    SingleTopicGenerator, Spectrum64, StreamConfig, Tensor3, TpmConfig,
};

use crate::config::{parse_list, Config};
use crate::stats::{quantile_sorted, sorted};
use crate::table::{num, Table};

/// Recovery threshold on `|v̂ᵀv|` used when matching estimates to truth.
const MATCH_DOT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Single-topic samples over the benchmark spectrum, uniform topics.
    Topics,
    /// `x = e₁` forever; the moment is exactly `e₁⊗³`.
    Constant,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Topics => "topics",
            Source::Constant => "constant",
        })
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "topics" => Ok(Source::Topics),
            "constant" => Ok(Source::Constant),
            _ => Err(format!("unknown source `{s}` (topics, constant)")),
        }
    }
}

pub const STREAM_KEYS: &[&str] = &["seed", "source", "d", "L", "R", "batch_sizes", "reps", "shared_batch"];

#[derive(Debug, Clone, PartialEq)]
pub struct StreamCurveSpec {
    pub source: Source,
    pub d: usize,
    pub restarts: usize,
    pub iters: usize,
    pub batch_sizes: Vec<usize>,
    pub reps: usize,
    pub shared_batch: bool,
    pub seed: u64,
}

impl Default for StreamCurveSpec {
    fn default() -> Self {
        Self {
            source: Source::Topics,
            d: 25,
            restarts: 10,
            iters: 20,
            batch_sizes: vec![1000, 4000, 16000],
            reps: 20,
            shared_batch: false,
            seed: 5,
        }
    }
}

impl StreamCurveSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys(STREAM_KEYS)?;
        let d = Self::default();
        let spec = Self {
            source: cfg.parse_or("source", d.source)?,
            d: cfg.parse_or("d", d.d)?,
            restarts: cfg.parse_or("L", d.restarts)?,
            iters: cfg.parse_or("R", d.iters)?,
            batch_sizes: cfg.list_or("batch_sizes", &d.batch_sizes)?,
            reps: cfg.parse_or("reps", d.reps)?,
            shared_batch: cfg.parse_or("shared_batch", d.shared_batch)?,
            seed: cfg.parse_or("seed", d.seed)?,
        };
        if spec.reps == 0 || spec.batch_sizes.is_empty() {
            bail!("need at least one repetition and one batch size");
        }
        Ok(spec)
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("source", self.source);
        c.set("d", self.d);
        c.set("L", self.restarts);
        c.set("R", self.iters);
        c.set("batch_sizes", join(&self.batch_sizes));
        c.set("reps", self.reps);
        c.set("shared_batch", self.shared_batch);
        c.set("seed", self.seed);
        c
    }

    pub fn truth(&self) -> Result<Spectrum64> {
        Ok(match self.source {
            Source::Topics => benchmark_spectrum(self.d)?,
            Source::Constant => Spectrum64::from_pairs(self.d, vec![(1.0, basis_vector(self.d, 0))])?,
        })
    }

    /// Largest eigenvalue error of one run.
    pub fn run_one(&self, batch: usize, rep: usize) -> Result<f64> {
        let truth = self.truth()?;
        let seed = split_seed(self.seed, &[batch as u64, rep as u64]);
        let mut cfg = StreamConfig::new(truth.k(), self.restarts, self.iters, batch, split_seed(seed, &[1]));
        if self.shared_batch {
            cfg = cfg.shared();
        }
        let mut stream: Box<dyn SampleStream<f64>> = match self.source {
            Source::Topics => Box::new(SingleTopicGenerator::uniform(truth.clone(), seed)?),
            Source::Constant => Box::new(ConstantStream::new(basis_vector(self.d, 0))),
        };
        let est = online_rtpm(stream.as_mut(), &cfg)?;
        Ok(score_recovery(&truth, &est, MATCH_DOT)?.max_eigenvalue_error())
    }
}

pub const STREAM_COLUMNS: &[&str] = &["n", "d", "median_err", "q25", "q75"];

pub fn stream_curve(spec: &StreamCurveSpec) -> Result<Table> {
    let mut t = Table::new("stream-curve", spec.to_config(), STREAM_COLUMNS);
    for &n in &spec.batch_sizes {
        let errs: Vec<f64> = (0..spec.reps).into_par_iter().map(|r| spec.run_one(n, r)).collect::<Result<_>>()?;
        let s = sorted(&errs);
        t.push(vec![
            n.to_string(),
            spec.d.to_string(),
            num(quantile_sorted(&s, 0.5)),
            num(quantile_sorted(&s, 0.25)),
            num(quantile_sorted(&s, 0.75)),
        ]);
    }
    Ok(t)
}

pub const DP_KEYS: &[&str] = &["seed", "d", "coherent", "epsilons", "delta", "L", "R", "reps", "input_perturbation"];

#[derive(Debug, Clone, PartialEq)]
pub struct DpCurveSpec {
    pub d: usize,
    /// Rank-one signal along `e₁` instead of the flat vector.
    pub coherent: bool,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub restarts: usize,
    pub iters: usize,
    pub reps: usize,
    /// Perturb the tensor once and run the non-private method instead.
    pub input_perturbation: bool,
    pub seed: u64,
}

impl Default for DpCurveSpec {
    fn default() -> Self {
        Self {
            d: 100,
            coherent: false,
            epsilons: vec![1e3, 3e3, 1e4, 3e4, 1e5, 1e6],
            delta: 1e-5,
            restarts: 10,
            iters: 20,
            reps: 20,
            input_perturbation: false,
            seed: 1,
        }
    }
}

/// Success means the sign-resolved eigenvector error is at most this.
pub const DP_SUCCESS_ERR: f64 = 0.5;

/// Entry-wise sensitivity of the upper-triangular entries under one
/// neighbouring change (six slot permutations of a single entry).
const INPUT_SENSITIVITY: f64 = 6.0;

impl DpCurveSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys(DP_KEYS)?;
        let d = Self::default();
        let epsilons = match cfg.get("epsilons") {
            Some(s) => parse_list(s)?,
            None => d.epsilons.clone(),
        };
        let spec = Self {
            d: cfg.parse_or("d", d.d)?,
            coherent: cfg.parse_or("coherent", d.coherent)?,
            epsilons,
            delta: cfg.parse_or("delta", d.delta)?,
            restarts: cfg.parse_or("L", d.restarts)?,
            iters: cfg.parse_or("R", d.iters)?,
            reps: cfg.parse_or("reps", d.reps)?,
            input_perturbation: cfg.parse_or("input_perturbation", d.input_perturbation)?,
            seed: cfg.parse_or("seed", d.seed)?,
        };
        if spec.reps == 0 || spec.epsilons.is_empty() {
            bail!("need at least one repetition and one epsilon");
        }
        Ok(spec)
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("d", self.d);
        c.set("coherent", self.coherent);
        c.set("epsilons", self.epsilons.iter().map(|e| num(*e)).collect::<Vec<_>>().join(","));
        c.set("delta", num(self.delta));
        c.set("L", self.restarts);
        c.set("R", self.iters);
        c.set("reps", self.reps);
        c.set("input_perturbation", self.input_perturbation);
        c.set("seed", self.seed);
        c
    }

    pub fn truth(&self) -> Result<Spectrum64> {
        let v = if self.coherent {
            basis_vector(self.d, 0)
        } else {
            vec![1.0 / (self.d as f64).sqrt(); self.d]
        };
        Ok(Spectrum64::from_pairs(self.d, vec![(1.0, v)])?)
    }

    /// `(eigenvalue error, eigenvector error)` of one run.
    pub fn run_one(&self, truth: &Spectrum64, epsilon: f64, rep: usize) -> Result<(f64, f64)> {
        let seed = split_seed(self.seed, &[rep as u64]);
        let est = if self.input_perturbation {
            let sd = INPUT_SENSITIVITY * (2.0 * (1.25 / self.delta).ln()).sqrt() / epsilon;
            let mut rng = rng_at(seed, &[7]);
            let noise = Tensor3::from_sorted_fn(self.d, |_, _, _| sd * standard_normal::<f64>(&mut rng));
            let noisy = Tensor3::from_components(truth).add(&noise)?;
            robust_tpm(&noisy, &TpmConfig::new(1, self.restarts, self.iters, seed))?
        } else {
            let cfg = PrivateConfig::new(1, self.restarts, self.iters, epsilon, self.delta, seed);
            private_rtpm(truth, &cfg)?.spectrum
        };
        let r = score_recovery(truth, &est, MATCH_DOT)?;
        Ok((r.eigenvalue_errors[0], r.eigenvector_errors[0]))
    }
}

pub const DP_COLUMNS: &[&str] = &["epsilon", "d", "mu0", "median_err_lambda1", "median_err_v1", "success_rate"];

pub fn dp_curve(spec: &DpCurveSpec) -> Result<Table> {
    let truth = spec.truth()?;
    let mu0 = coherence(&truth.vectors())?;
    let mut t = Table::new("dp-curve", spec.to_config(), DP_COLUMNS);
    for &eps in &spec.epsilons {
        let runs: Vec<(f64, f64)> =
            (0..spec.reps).into_par_iter().map(|r| spec.run_one(&truth, eps, r)).collect::<Result<_>>()?;
        let lam: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let vec: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let ok = vec.iter().filter(|e| **e <= DP_SUCCESS_ERR).count();
        t.push(vec![
            num(eps),
            spec.d.to_string(),
            num(mu0),
            num(crate::stats::median(&lam)),
            num(crate::stats::median(&vec)),
            num(ok as f64 / spec.reps as f64),
        ]);
    }
    Ok(t)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
