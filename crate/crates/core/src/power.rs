//! Robust tensor power method with random restarts and lazy deflation, and
//! recovery scoring against a known spectrum.
//!
//! The extraction loop is shared with the streaming and private variants
//! through [`StepOracle`]: each variant only decides how a power step and the
//! final selection value are evaluated.

use itertools::Itertools;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::{random_unit_vector, rng_at};
use crate::scalar::Scalar;
use crate::tensor::{DeflationList, EigenPair, Spectrum, SymmetricTensor3, TensorOperator};

/// Contraction norm below which a restart is discarded.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Largest `k` for which [`score_recovery`] searches all matchings.
pub const EXHAUSTIVE_MATCH_MAX_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TpmConfig {
    /// Components to extract.
    pub k: usize,
    /// Random restarts per component.
    pub restarts: usize,
    /// Power iterations per restart.
    pub iters: usize,
    pub seed: u64,
}

impl TpmConfig {
    pub fn new(k: usize, restarts: usize, iters: usize, seed: u64) -> Self {
        Self {
            k,
            restarts,
            iters,
            seed,
        }
    }

    /// Schedules from [`default_restarts`] and [`default_iters`].
    pub fn with_default_schedule(k: usize, d: usize, lambda_max_hint: f64, seed: u64) -> Self {
        Self::new(k, default_restarts(k), default_iters(d, lambda_max_hint), seed)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        validate_schedule(self.k, self.restarts, self.iters, d)
    }
}

pub(crate) fn validate_schedule(k: usize, restarts: usize, iters: usize, d: usize) -> Result<()> {
    if restarts == 0 || iters == 0 {
        return Err(invalid("restarts and iterations must be at least 1"));
    }
    if k == 0 || k > d {
        return Err(invalid(format!("component count k = {k} must lie in 1..={d}")));
    }
    Ok(())
}

/// `ceil(10·log₂(d·max(λ,1)/1e-6))`.
pub fn default_iters(d: usize, lambda_max_hint: f64) -> usize {
    let arg = d.max(1) as f64 * lambda_max_hint.max(1.0) / 1e-6;
    (10.0 * arg.log2()).ceil() as usize
}

/// `max(10, ceil(4·k·ln(k+1)))`.
pub fn default_restarts(k: usize) -> usize {
    let v = (4.0 * k as f64 * ((k + 1) as f64).ln()).ceil() as usize;
    v.max(10)
}

/// One observed iterate; `step = 0` is the initial vector.
#[derive(Debug, Clone, Copy)]
pub struct IterateEvent<'a, T> {
    pub component: usize,
    pub restart: usize,
    pub step: usize,
    pub iterate: &'a [T],
}

/// Per-variant evaluation of the deflated power map.
pub(crate) trait StepOracle<T: Scalar> {
    /// Unnormalized update and scalar for each live restart at power step
    /// `step` (1-based); `us` are the current iterates `u_{step−1}`.
    fn step(
        &mut self,
        component: usize,
        step: usize,
        restarts: &[usize],
        us: &[&[T]],
        deflation: &DeflationList<T>,
    ) -> Result<Vec<(Vec<T>, T)>>;

    /// Selection value for each surviving restart. `last` holds the scalar
    /// returned with the final step.
    fn select(
        &mut self,
        component: usize,
        restarts: &[usize],
        us: &[&[T]],
        last: &[T],
        deflation: &DeflationList<T>,
    ) -> Result<Vec<T>>;
}

struct Live<T> {
    restart: usize,
    u: Vec<T>,
    last: T,
}

/// Sequential extraction of `k` components. The initial vector of restart
/// `τ` for component `c` is drawn from the stream `rng_at(seed, [c, τ])`.
pub(crate) fn extract<T: Scalar, O: StepOracle<T>>(
    d: usize,
    k: usize,
    restarts: usize,
    iters: usize,
    seed: u64,
    oracle: &mut O,
    observer: &mut dyn FnMut(IterateEvent<'_, T>),
) -> Result<Spectrum<T>> {
    validate_schedule(k, restarts, iters, d)?;
    let threshold = T::lit(DEGENERATE_NORM);
    let mut deflation = DeflationList::new(d);
    for component in 0..k {
        let mut live: Vec<Live<T>> = (0..restarts)
            .map(|tau| Live {
                restart: tau,
                u: random_unit_vector(d, &mut rng_at(seed, &[component as u64, tau as u64])),
                last: T::zero(),
            })
            .collect();
        for l in &live {
            observer(IterateEvent {
                component,
                restart: l.restart,
                step: 0,
                iterate: &l.u,
            });
        }
        for step in 1..=iters {
            if live.is_empty() {
                break;
            }
            let ids: Vec<usize> = live.iter().map(|l| l.restart).collect();
            let refs: Vec<&[T]> = live.iter().map(|l| l.u.as_slice()).collect();
            let updates = oracle.step(component, step, &ids, &refs, &deflation)?;
            let mut next = Vec::with_capacity(live.len());
            for (l, (mut y, s)) in live.into_iter().zip(updates) {
                let n = norm2(&y);
                if !(n >= threshold) || !n.is_finite() {
                    continue;
                }
                y.iter_mut().for_each(|x| *x /= n);
                observer(IterateEvent {
                    component,
                    restart: l.restart,
                    step,
                    iterate: &y,
                });
                next.push(Live {
                    restart: l.restart,
                    u: y,
                    last: s,
                });
            }
            live = next;
        }
        if live.is_empty() {
            return Err(Error::ExtractionFailure { component });
        }
        let ids: Vec<usize> = live.iter().map(|l| l.restart).collect();
        let refs: Vec<&[T]> = live.iter().map(|l| l.u.as_slice()).collect();
        let last: Vec<T> = live.iter().map(|l| l.last).collect();
        let values = oracle.select(component, &ids, &refs, &last, &deflation)?;
        let best = argmax_first(&values).ok_or(Error::ExtractionFailure { component })?;
        let mut value = values[best];
        let mut vector = live.swap_remove(best).u;
        if value < T::zero() {
            value = -value;
            vector.iter_mut().for_each(|x| *x = -*x);
        }
        deflation.push(EigenPair::new(value, vector)?)?;
    }
    Ok(deflation.into_spectrum())
}

/// Index of the largest finite value; the lowest index wins ties.
fn argmax_first<T: Scalar>(values: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Exact deflated contractions of an explicit tensor.
pub(crate) struct TensorOracle<'a, A: ?Sized> {
    pub tensor: &'a A,
}

impl<T: Scalar, A: TensorOperator<T> + ?Sized> StepOracle<T> for TensorOracle<'_, A> {
    fn step(&mut self, _: usize, _: usize, _: &[usize], us: &[&[T]], deflation: &DeflationList<T>) -> Result<Vec<(Vec<T>, T)>> {
        Ok(self.tensor.contract_deflated_many(deflation, us))
    }

    fn select(&mut self, _: usize, _: &[usize], us: &[&[T]], _: &[T], deflation: &DeflationList<T>) -> Result<Vec<T>> {
        Ok(self
            .tensor
            .contract_deflated_many(deflation, us)
            .into_iter()
            .map(|(_, s)| s)
            .collect())
    }
}

/// `R` normalized deflated power steps from `u0`; returns `u_R` and the
/// deflated `T(u_R, u_R, u_R)`.
pub fn power_iterate<T: Scalar>(
    t: &SymmetricTensor3<T>,
    deflation: &DeflationList<T>,
    u0: &[T],
    iters: usize,
) -> Result<(Vec<T>, T)> {
    check_dim(t.dim(), u0.len())?;
    check_dim(t.dim(), deflation.dim())?;
    let threshold = T::lit(DEGENERATE_NORM);
    let mut u = u0.to_vec();
    for _ in 0..iters {
        let (mut y, _) = t.contract_deflated(deflation, &u)?;
        let n = norm2(&y);
        if !(n >= threshold) || !n.is_finite() {
            return Err(Error::DegenerateDirection { norm: n.as_f64() });
        }
        y.iter_mut().for_each(|x| *x /= n);
        u = y;
    }
    let (_, s) = t.contract_deflated(deflation, &u)?;
    Ok((u, s))
}

/// Accepts a dense tensor or any other [`TensorOperator`].
pub fn robust_tpm<T: Scalar, A: TensorOperator<T> + ?Sized>(t: &A, cfg: &TpmConfig) -> Result<Spectrum<T>> {
    robust_tpm_observed(t, cfg, &mut |_| {})
}

/// [`robust_tpm`] reporting every iterate to `observer`.
pub fn robust_tpm_observed<T: Scalar, A: TensorOperator<T> + ?Sized>(
    t: &A,
    cfg: &TpmConfig,
    observer: &mut dyn FnMut(IterateEvent<'_, T>),
) -> Result<Spectrum<T>> {
    cfg.validate(t.dim())?;
    let mut oracle = TensorOracle { tensor: t };
    extract(t.dim(), cfg.k, cfg.restarts, cfg.iters, cfg.seed, &mut oracle, observer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport<T> {
    /// `permutation[i]` is the index of the estimate matched to truth `i`.
    pub permutation: Vec<usize>,
    pub eigenvalue_errors: Vec<T>,
    /// Sign-resolved `‖vᵢ − ±v̂_{π(i)}‖₂`.
    pub eigenvector_errors: Vec<T>,
    /// `|v̂_{π(i)}ᵀ vᵢ|`.
    pub dots: Vec<T>,
    pub success: Vec<bool>,
}

impl<T: Scalar> RecoveryReport<T> {
    pub fn all_success(&self) -> bool {
        self.success.iter().all(|s| *s)
    }

    pub fn max_eigenvalue_error(&self) -> T {
        self.eigenvalue_errors.iter().copied().fold(T::zero(), T::max)
    }

    pub fn max_eigenvector_error(&self) -> T {
        self.eigenvector_errors.iter().copied().fold(T::zero(), T::max)
    }
}

fn signed_distance<T: Scalar>(v: &[T], w: &[T]) -> (T, T) {
    let c = dot(v, w);
    let s = if c < T::zero() { -T::one() } else { T::one() };
    let dist = v
        .iter()
        .zip(w)
        .map(|(a, b)| {
            let e = *a - s * *b;
            e * e
        })
        .sum::<T>()
        .sqrt();
    (dist, c.abs())
}

/// Matches estimates to truth minimizing the summed eigenvector error
/// (exhaustively up to [`EXHAUSTIVE_MATCH_MAX_K`], greedily beyond).
pub fn score_recovery<T: Scalar>(truth: &Spectrum<T>, est: &Spectrum<T>, threshold: T) -> Result<RecoveryReport<T>> {
    let k = truth.k();
    if est.k() != k {
        return Err(invalid(format!("truth has {k} components, estimate has {}", est.k())));
    }
    check_dim(truth.dim(), est.dim())?;
    if !(threshold > T::zero() && threshold <= T::one()) {
        return Err(invalid("success threshold must lie in (0, 1]"));
    }
    let table: Vec<Vec<(T, T)>> = truth
        .pairs()
        .iter()
        .map(|t| est.pairs().iter().map(|e| signed_distance(&t.vector, &e.vector)).collect())
        .collect();

    let permutation: Vec<usize> = if k <= EXHAUSTIVE_MATCH_MAX_K {
        let mut best: Option<(T, Vec<usize>)> = None;
        for perm in (0..k).permutations(k) {
            let cost: T = perm.iter().enumerate().map(|(i, &j)| table[i][j].0).sum();
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, perm));
            }
        }
        best.map(|(_, p)| p).unwrap_or_default()
    } else {
        let mut cells: Vec<(usize, usize)> = (0..k).cartesian_product(0..k).collect();
        cells.sort_by(|a, b| table[b.0][b.1].1.partial_cmp(&table[a.0][a.1].1).unwrap_or(std::cmp::Ordering::Equal));
        let mut perm = vec![usize::MAX; k];
        let mut used = vec![false; k];
        for (i, j) in cells {
            if perm[i] == usize::MAX && !used[j] {
                perm[i] = j;
                used[j] = true;
            }
        }
        perm
    };

    let mut report = RecoveryReport {
        permutation: permutation.clone(),
        eigenvalue_errors: Vec::with_capacity(k),
        eigenvector_errors: Vec::with_capacity(k),
        dots: Vec::with_capacity(k),
        success: Vec::with_capacity(k),
    };
    for (i, &j) in permutation.iter().enumerate() {
        let (dist, c) = table[i][j];
        report
            .eigenvalue_errors
            .push((truth.pairs()[i].value - est.pairs()[j].value).abs());
        report.eigenvector_errors.push(dist);
        report.dots.push(c);
        report.success.push(c >= threshold);
    }
    Ok(report)
}
