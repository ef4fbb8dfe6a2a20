//! Online tensor power method over a pull-based sample stream.
//!
//! The third-moment tensor `E[x⊗x⊗x]` is never formed: each power step
//! accumulates `(1/n)Σ(xᵀu)²x` and `(1/n)Σ(xᵀu)³` one sample at a time into a
//! `d`-length buffer, so a run holds `O(d(k+L))` numbers regardless of `n`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{axpy, dot};
use crate::power::{extract, validate_schedule, IterateEvent, StepOracle};
use crate::rng::{rng_from_seed, split_seed, Rng};
use crate::scalar::Scalar;
use crate::tensor::{DeflationList, Spectrum, SymmetricTensor3};

/// Largest dimension accepted by [`empirical_moment`].
pub const EMPIRICAL_MOMENT_MAX_DIM: usize = 50;

pub trait SampleStream<T: Scalar> {
    fn dim(&self) -> usize;

    /// Writes the next sample into `out` (length `dim`).
    fn next_into(&mut self, out: &mut [T]) -> Result<()>;

    /// Samples emitted so far.
    fn consumed(&self) -> u64;

    fn next_batch(&mut self, n: usize) -> Result<Vec<Vec<T>>> {
        (0..n)
            .map(|_| {
                let mut x = vec![T::zero(); self.dim()];
                self.next_into(&mut x)?;
                Ok(x)
            })
            .collect()
    }
}

/// Emits `x = aᵢvᵢ` with `i ∼ p` and `pᵢaᵢ³ = λᵢ`, so `E[x⊗³] = Σλᵢvᵢ⊗³`.
#[derive(Debug, Clone)]
pub struct SingleTopicGenerator<T> {
    spectrum: Spectrum<T>,
    probabilities: Vec<f64>,
    amplitudes: Vec<T>,
    index: WeightedIndex<f64>,
    seed: u64,
    rng: Rng,
    consumed: u64,
}

impl<T: Scalar> SingleTopicGenerator<T> {
    pub fn new(spectrum: Spectrum<T>, probabilities: Vec<f64>, seed: u64) -> Result<Self> {
        if spectrum.k() == 0 {
            return Err(invalid("generator needs at least one component"));
        }
        check_dim(spectrum.k(), probabilities.len())?;
        if probabilities.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(invalid("topic probabilities must be positive"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("topic probabilities sum to {total}, not 1")));
        }
        if spectrum.values().iter().any(|l| *l < T::zero()) {
            return Err(invalid("generator eigenvalues must be non-negative"));
        }
        let spectrum = Spectrum::ground_truth(spectrum.dim(), spectrum.into_pairs())?;
        let amplitudes = spectrum
            .values()
            .iter()
            .zip(&probabilities)
            .map(|(l, p)| (*l / T::lit(*p)).cbrt())
            .collect();
        let index = WeightedIndex::new(&probabilities).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            spectrum,
            probabilities,
            amplitudes,
            index,
            seed,
            rng: rng_from_seed(seed),
            consumed: 0,
        })
    }

    /// Uniform topic probabilities.
    pub fn uniform(spectrum: Spectrum<T>, seed: u64) -> Result<Self> {
        let k = spectrum.k();
        Self::new(spectrum, vec![1.0 / k as f64; k], seed)
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        &self.spectrum
    }

    /// `E[x⊗³]` as a dense tensor.
    pub fn population_moment(&self) -> SymmetricTensor3<T> {
        SymmetricTensor3::from_components(&self.spectrum)
    }

    /// A fresh generator with the same distribution on an independent stream.
    pub fn split(&self, stream: u64) -> Self {
        let seed = split_seed(self.seed, &[stream]);
        Self {
            seed,
            rng: rng_from_seed(seed),
            consumed: 0,
            ..self.clone()
        }
    }
}

impl<T: Scalar> SampleStream<T> for SingleTopicGenerator<T> {
    fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    fn next_into(&mut self, out: &mut [T]) -> Result<()> {
        check_dim(self.dim(), out.len())?;
        let i = self.index.sample(&mut self.rng);
        let a = self.amplitudes[i];
        for (o, v) in out.iter_mut().zip(&self.spectrum.pairs()[i].vector) {
            *o = a * *v;
        }
        self.consumed += 1;
        Ok(())
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }
}

/// Replays recorded samples. By default the stream ends after the last
/// sample; a cycling replay restarts from the first one.
#[derive(Debug, Clone)]
pub struct ReplayStream<T> {
    dim: usize,
    samples: Vec<Vec<T>>,
    pos: usize,
    cycle: bool,
    consumed: u64,
}

impl<T: Scalar> ReplayStream<T> {
    pub fn new(dim: usize, samples: Vec<Vec<T>>) -> Result<Self> {
        for s in &samples {
            check_dim(dim, s.len())?;
            if s.iter().any(|x| !x.is_finite()) {
                return Err(invalid("recorded sample has non-finite entries"));
            }
        }
        Ok(Self {
            dim,
            samples,
            pos: 0,
            cycle: false,
            consumed: 0,
        })
    }

    /// Replays the samples endlessly, so every batch of `samples.len()`
    /// draws sees the same data.
    pub fn cycling(dim: usize, samples: Vec<Vec<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("cannot cycle an empty recording"));
        }
        Ok(Self {
            cycle: true,
            ..Self::new(dim, samples)?
        })
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }
}

impl<T: Scalar> SampleStream<T> for ReplayStream<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut [T]) -> Result<()> {
        check_dim(self.dim, out.len())?;
        if self.pos == self.samples.len() {
            if !self.cycle {
                return Err(Error::StreamExhausted { consumed: self.consumed });
            }
            self.pos = 0;
        }
        out.copy_from_slice(&self.samples[self.pos]);
        self.pos += 1;
        self.consumed += 1;
        Ok(())
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }
}

/// Emits the same vector forever.
#[derive(Debug, Clone)]
pub struct ConstantStream<T> {
    sample: Vec<T>,
    consumed: u64,
}

impl<T: Scalar> ConstantStream<T> {
    pub fn new(sample: Vec<T>) -> Self {
        Self { sample, consumed: 0 }
    }
}

impl<T: Scalar> SampleStream<T> for ConstantStream<T> {
    fn dim(&self) -> usize {
        self.sample.len()
    }

    fn next_into(&mut self, out: &mut [T]) -> Result<()> {
        check_dim(self.sample.len(), out.len())?;
        out.copy_from_slice(&self.sample);
        self.consumed += 1;
        Ok(())
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }
}

/// Running sums for one data-association pass.
#[derive(Debug, Clone)]
pub struct Association<T> {
    vector: Vec<T>,
    scalar: T,
    count: usize,
}

impl<T: Scalar> Association<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            vector: vec![T::zero(); dim],
            scalar: T::zero(),
            count: 0,
        }
    }

    pub fn add(&mut self, x: &[T], u: &[T]) {
        let c = dot(x, u);
        let c2 = c * c;
        axpy(c2, x, &mut self.vector);
        self.scalar += c2 * c;
        self.count += 1;
    }

    /// `((1/n)Σ(xᵀu)²x, (1/n)Σ(xᵀu)³)`.
    pub fn finish(mut self) -> Result<(Vec<T>, T)> {
        if self.count == 0 {
            return Err(invalid("data association over an empty batch"));
        }
        let n = T::from_usize(self.count).expect("batch size fits the scalar type");
        self.vector.iter_mut().for_each(|x| *x /= n);
        Ok((self.vector, self.scalar / n))
    }
}

pub fn data_association<T: Scalar>(batch: &[Vec<T>], u: &[T]) -> Result<(Vec<T>, T)> {
    let mut acc = Association::new(u.len());
    for x in batch {
        check_dim(u.len(), x.len())?;
        acc.add(x, u);
    }
    acc.finish()
}

/// How power steps draw their samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    /// Every (step, restart) pair reads its own `n` samples.
    #[default]
    Fresh,
    /// One batch of `n` samples per step, shared by all restarts.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamConfig {
    pub k: usize,
    pub restarts: usize,
    pub iters: usize,
    /// Samples per data-association pass.
    pub batch_size: usize,
    pub seed: u64,
    pub mode: BatchMode,
}

impl StreamConfig {
    pub fn new(k: usize, restarts: usize, iters: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            k,
            restarts,
            iters,
            batch_size,
            seed,
            mode: BatchMode::Fresh,
        }
    }

    pub fn shared(mut self) -> Self {
        self.mode = BatchMode::Shared;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        validate_schedule(self.k, self.restarts, self.iters, d)
    }

    /// Samples consumed by a run in which no restart is discarded.
    pub fn samples_required(&self) -> u64 {
        let per_step = match self.mode {
            BatchMode::Fresh => self.restarts,
            BatchMode::Shared => 1,
        };
        (self.k * self.iters * per_step * self.batch_size) as u64
    }
}

struct StreamOracle<'a, T: Scalar> {
    stream: &'a mut dyn SampleStream<T>,
    batch_size: usize,
    mode: BatchMode,
    buf: Vec<T>,
}

impl<T: Scalar> StepOracle<T> for StreamOracle<'_, T> {
    fn step(&mut self, _: usize, _: usize, _: &[usize], us: &[&[T]], deflation: &DeflationList<T>) -> Result<Vec<(Vec<T>, T)>> {
        let d = self.buf.len();
        let accs = match self.mode {
            BatchMode::Fresh => {
                let mut out = Vec::with_capacity(us.len());
                for u in us {
                    let mut acc = Association::new(d);
                    for _ in 0..self.batch_size {
                        self.stream.next_into(&mut self.buf)?;
                        acc.add(&self.buf, u);
                    }
                    out.push(acc);
                }
                out
            }
            BatchMode::Shared => {
                let mut out: Vec<Association<T>> = us.iter().map(|_| Association::new(d)).collect();
                for _ in 0..self.batch_size {
                    self.stream.next_into(&mut self.buf)?;
                    for (acc, u) in out.iter_mut().zip(us) {
                        acc.add(&self.buf, u);
                    }
                }
                out
            }
        };
        accs.into_iter()
            .zip(us)
            .map(|(acc, u)| {
                let (y, s) = acc.finish()?;
                Ok(deflation.apply(u, y, s))
            })
            .collect()
    }

    fn select(&mut self, _: usize, _: &[usize], _: &[&[T]], last: &[T], _: &DeflationList<T>) -> Result<Vec<T>> {
        Ok(last.to_vec())
    }
}

/// Online extraction of `k` components. The eigenvalue estimate of each
/// restart is the deflated third-moment estimate from its final data pass.
pub fn online_rtpm<T: Scalar>(stream: &mut dyn SampleStream<T>, cfg: &StreamConfig) -> Result<Spectrum<T>> {
    online_rtpm_observed(stream, cfg, &mut |_| {})
}

pub fn online_rtpm_observed<T: Scalar>(
    stream: &mut dyn SampleStream<T>,
    cfg: &StreamConfig,
    observer: &mut dyn FnMut(IterateEvent<'_, T>),
) -> Result<Spectrum<T>> {
    let d = stream.dim();
    cfg.validate(d)?;
    let mut oracle = StreamOracle {
        stream,
        batch_size: cfg.batch_size,
        mode: cfg.mode,
        buf: vec![T::zero(); d],
    };
    extract(d, cfg.k, cfg.restarts, cfg.iters, cfg.seed, &mut oracle, observer)
}

/// Dense `(1/n)Σ xᵢ⊗xᵢ⊗xᵢ`; a test oracle limited to small `d`.
pub fn empirical_moment<T: Scalar>(batch: &[Vec<T>]) -> Result<SymmetricTensor3<T>> {
    let first = batch.first().ok_or_else(|| invalid("empirical moment of an empty batch"))?;
    let d = first.len();
    if d > EMPIRICAL_MOMENT_MAX_DIM {
        return Err(Error::TooLarge {
            dim: d,
            max: EMPIRICAL_MOMENT_MAX_DIM,
        });
    }
    for x in batch {
        check_dim(d, x.len())?;
    }
    let n = T::from_usize(batch.len()).expect("batch size fits the scalar type");
    Ok(SymmetricTensor3::from_sorted_fn(d, |i, j, k| {
        batch.iter().map(|x| x[i] * x[j] * x[k]).sum::<T>() / n
    }))
}

/// Pulls `n` samples from `stream` for later replay.
pub fn record<T: Scalar>(stream: &mut dyn SampleStream<T>, n: usize) -> Result<ReplayStream<T>> {
    let d = stream.dim();
    ReplayStream::new(d, stream.next_batch(n)?)
}
