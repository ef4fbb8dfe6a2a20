//! Differentially private tensor power method.
//!
//! Every power step releases `(T−D)(I,u,u) + ν‖u‖∞²·z` and every restart
//! releases `(T−D)(u,u,u) + ν‖u‖∞³·z`, with `z` standard Gaussian. Privacy of
//! the whole run follows from the Gaussian mechanism applied to each release
//! and advanced composition over the `K = k·L·(R+1)` releases; this module
//! exposes the ingredients (budget arithmetic, sensitivity bounds, noise
//! calibration, draw accounting) so each can be audited separately.
//!
//! Noise is drawn from a seeded ChaCha stream so runs can be replayed. That is
//! a testing affordance only: a deployment that needs an actual privacy
//! guarantee must draw noise from a cryptographically secure entropy source
//! and never reuse seeds.

use crate::error::{invalid, Error, Result};
use crate::linalg::norm_inf;
use crate::power::{extract, validate_schedule, StepOracle};
use crate::rng::{rng_at, standard_normal, Rng};
use crate::scalar::Scalar;
use crate::tensor::{DeflationList, DenseTensor3, Spectrum, SymmetricTensor3, TensorOperator};

/// Sub-stream index under `(component, restart)` reserved for noise draws.
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Number of private releases, `k·L·(R+1)`.
    pub releases: u64,
    /// Per-release `ε′ = ε/√(K(4 + ln(2/δ)))`.
    pub epsilon_prime: f64,
    /// Per-release `δ′ = δ/(2K)`.
    pub delta_prime: f64,
    /// Noise multiplier `ν = 6√(2 ln(1.25/δ′))/ε′`.
    pub nu: f64,
}

pub fn derive_budget(epsilon: f64, delta: f64, k: usize, restarts: usize, iters: usize) -> Result<PrivacyBudget> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if k == 0 || restarts == 0 || iters == 0 {
        return Err(invalid("k, L and R must be at least 1"));
    }
    let releases = (k as u64) * (restarts as u64) * (iters as u64 + 1);
    let kf = releases as f64;
    let epsilon_prime = epsilon / (kf * (4.0 + (2.0 / delta).ln())).sqrt();
    let delta_prime = delta / (2.0 * kf);
    let nu = 6.0 * (2.0 * (1.25 / delta_prime).ln()).sqrt() / epsilon_prime;
    Ok(PrivacyBudget {
        epsilon,
        delta,
        releases,
        epsilon_prime,
        delta_prime,
        nu,
    })
}

impl PrivacyBudget {
    /// `key = value` lines for reports.
    pub fn report(&self) -> String {
        format!(
            "epsilon = {:?}\ndelta = {:?}\nK = {}\nepsilon_prime = {:?}\ndelta_prime = {:?}\nnu = {:?}\n",
            self.epsilon, self.delta, self.releases, self.epsilon_prime, self.delta_prime, self.nu
        )
    }
}

/// `T′ = T ± (sum over the six slot permutations of eᵢ⊗eⱼ⊗e_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborPerturbation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub positive: bool,
}

impl NeighborPerturbation {
    pub fn new(i: usize, j: usize, k: usize, positive: bool) -> Self {
        Self { i, j, k, positive }
    }

    pub fn flipped(self) -> Self {
        Self {
            positive: !self.positive,
            ..self
        }
    }

    /// Every perturbation with `i ≤ j ≤ k < d`, both signs.
    pub fn enumerate(d: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    out.push(Self::new(i, j, k, true));
                    out.push(Self::new(i, j, k, false));
                }
            }
        }
        out
    }

    /// The symmetric difference tensor `T′ − T`.
    pub fn difference<T: Scalar>(&self, d: usize) -> Result<SymmetricTensor3<T>> {
        if self.i >= d || self.j >= d || self.k >= d {
            return Err(invalid(format!("perturbation index out of range for d = {d}")));
        }
        let mut raw = DenseTensor3::zeros(d);
        raw.set(self.i, self.j, self.k, if self.positive { T::one() } else { -T::one() });
        SymmetricTensor3::perm_sum_symmetrize(&raw)
    }
}

pub fn apply_neighbor<T: Scalar>(t: &SymmetricTensor3<T>, p: NeighborPerturbation) -> Result<SymmetricTensor3<T>> {
    t.add(&p.difference(t.dim())?)
}

/// Bound `6‖u‖∞²` on the ℓ₂ change of `T(I,u,u)` between neighbours.
pub fn query_sensitivity_f1<T: Scalar>(u: &[T]) -> T {
    let m = norm_inf(u);
    T::lit(6.0) * m * m
}

/// Bound `6‖u‖∞³` on the change of `T(u,u,u)` between neighbours.
pub fn query_sensitivity_f2<T: Scalar>(u: &[T]) -> T {
    let m = norm_inf(u);
    T::lit(6.0) * m * m * m
}

/// Noise for one power step: `ν‖u‖∞²·z`, `z ∼ N(0, I_d)`.
pub fn power_step_noise<T: Scalar>(nu: T, u_prev: &[T], rng: &mut Rng) -> Vec<T> {
    let m = norm_inf(u_prev);
    let scale = nu * m * m;
    (0..u_prev.len()).map(|_| scale * standard_normal::<T>(rng)).collect()
}

/// Noise for one eigenvalue release: `ν‖u‖∞³·z`, `z ∼ N(0, 1)`.
pub fn eigenvalue_noise<T: Scalar>(nu: T, u: &[T], rng: &mut Rng) -> T {
    let m = norm_inf(u);
    nu * m * m * m * standard_normal::<T>(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateConfig {
    pub k: usize,
    pub restarts: usize,
    pub iters: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// Record `‖u_t‖∞` for every iterate.
    pub trace: bool,
    /// Replace the derived `ν`; `Some(0.0)` disables noise while keeping
    /// every draw.
    pub nu_override: Option<f64>,
}

impl PrivateConfig {
    pub fn new(k: usize, restarts: usize, iters: usize, epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            k,
            restarts,
            iters,
            epsilon,
            delta,
            seed,
            trace: false,
            nu_override: None,
        }
    }

    pub fn traced(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu_override = Some(nu);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry<T> {
    pub component: usize,
    pub restart: usize,
    pub step: usize,
    pub inf_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivateRun<T> {
    pub spectrum: Spectrum<T>,
    pub budget: PrivacyBudget,
    /// The multiplier actually used.
    pub nu: f64,
    /// Gaussian values drawn per component.
    pub draws: Vec<u64>,
    trace: Option<Vec<TraceEntry<T>>>,
}

impl<T: Scalar> PrivateRun<T> {
    pub fn trace(&self) -> Result<&[TraceEntry<T>]> {
        self.trace.as_deref().ok_or(Error::TraceUnavailable)
    }
}

/// `‖u_t‖∞` (equal to `‖u_t‖∞/‖u_t‖₂` for unit iterates) for every traced
/// iterate, in execution order.
pub fn infinity_ratio_trace<T: Scalar>(run: &PrivateRun<T>) -> Result<Vec<T>> {
    Ok(run.trace()?.iter().map(|e| e.inf_norm).collect())
}

struct PrivateOracle<'a, T, A: ?Sized> {
    tensor: &'a A,
    nu: T,
    seed: u64,
    restarts: usize,
    component: Option<usize>,
    rngs: Vec<Rng>,
    draws: Vec<u64>,
}

impl<T: Scalar, A: ?Sized> PrivateOracle<'_, T, A> {
    fn rng(&mut self, component: usize, restart: usize) -> &mut Rng {
        if self.component != Some(component) {
            self.component = Some(component);
            self.rngs = (0..self.restarts)
                .map(|tau| rng_at(self.seed, &[component as u64, tau as u64, NOISE_STREAM]))
                .collect();
            self.draws.push(0);
        }
        &mut self.rngs[restart]
    }
}

impl<T: Scalar, A: TensorOperator<T> + ?Sized> StepOracle<T> for PrivateOracle<'_, T, A> {
    fn step(
        &mut self,
        component: usize,
        _: usize,
        restarts: &[usize],
        us: &[&[T]],
        deflation: &DeflationList<T>,
    ) -> Result<Vec<(Vec<T>, T)>> {
        let mut out = self.tensor.contract_deflated_many(deflation, us);
        let nu = self.nu;
        for ((&tau, u), (y, _)) in restarts.iter().zip(us).zip(out.iter_mut()) {
            let noise = power_step_noise(nu, u, self.rng(component, tau));
            *self.draws.last_mut().expect("component started") += noise.len() as u64;
            if nu != T::zero() {
                y.iter_mut().zip(&noise).for_each(|(a, b)| *a += *b);
            }
        }
        Ok(out)
    }

    fn select(&mut self, component: usize, restarts: &[usize], us: &[&[T]], _: &[T], deflation: &DeflationList<T>) -> Result<Vec<T>> {
        let raw = self.tensor.contract_deflated_many(deflation, us);
        let nu = self.nu;
        let mut values = Vec::with_capacity(us.len());
        for ((&tau, u), (_, s)) in restarts.iter().zip(us).zip(raw) {
            let noise = eigenvalue_noise(nu, u, self.rng(component, tau));
            *self.draws.last_mut().expect("component started") += 1;
            values.push(if nu != T::zero() { s + noise } else { s });
        }
        Ok(values)
    }
}

/// Accepts a dense tensor or any other [`TensorOperator`].
pub fn private_rtpm<T: Scalar, A: TensorOperator<T> + ?Sized>(t: &A, cfg: &PrivateConfig) -> Result<PrivateRun<T>> {
    validate_schedule(cfg.k, cfg.restarts, cfg.iters, t.dim())?;
    let budget = derive_budget(cfg.epsilon, cfg.delta, cfg.k, cfg.restarts, cfg.iters)?;
    let nu = cfg.nu_override.unwrap_or(budget.nu);
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(invalid(format!("noise multiplier must be finite and ≥ 0, got {nu}")));
    }
    let mut oracle = PrivateOracle {
        tensor: t,
        nu: T::lit(nu),
        seed: cfg.seed,
        restarts: cfg.restarts,
        component: None,
        rngs: Vec::with_capacity(cfg.restarts),
        draws: Vec::with_capacity(cfg.k),
    };
    let mut trace = cfg.trace.then(Vec::new);
    let spectrum = extract(t.dim(), cfg.k, cfg.restarts, cfg.iters, cfg.seed, &mut oracle, &mut |e| {
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceEntry {
                component: e.component,
                restart: e.restart,
                step: e.step,
                inf_norm: norm_inf(e.iterate),
            });
        }
    })?;
    Ok(PrivateRun {
        spectrum,
        budget,
        nu,
        draws: oracle.draws,
        trace,
    })
}
