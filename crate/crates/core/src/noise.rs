//! Noise tensors with a controlled operator norm, and the matrix-whitening
//! baseline that recovers the signal subspace from a single collapse
//! `T(I, I, θ)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{axpy, basis_vector, check_orthonormal, dot, normalize, symmetric_spectral_norm, symmetric_topk_eigs, Matrix};
use crate::opnorm::{operator_norm_estimate, SsHopmConfig};
use crate::rng::{rng_at, standard_normal, standard_normal_vec};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor3, Spectrum, SymmetricTensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseRegime {
    /// I.i.d. standard normal entries, permutation-averaged.
    Gaussian,
    /// `Σᵢ v₂⊗eᵢ⊗eᵢ + eᵢ⊗v₂⊗eᵢ + eᵢ⊗eᵢ⊗v₂` built from the second signal
    /// vector. Deterministic despite the name it is usually given.
    Adversarial,
    /// `Σ w⊗w⊗w` over an orthonormal basis of the complement of the signal.
    WeaklyCorrelated,
}

impl NoiseRegime {
    pub const ALL: [NoiseRegime; 3] = [Self::Gaussian, Self::Adversarial, Self::WeaklyCorrelated];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Adversarial => "adversarial",
            Self::WeaklyCorrelated => "weak",
        }
    }

    /// Stable index used when deriving seeds.
    pub fn index(self) -> u64 {
        match self {
            Self::Gaussian => 0,
            Self::Adversarial => 1,
            Self::WeaklyCorrelated => 2,
        }
    }
}

impl fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "adversarial" => Ok(Self::Adversarial),
            "weak" | "weakly_correlated" => Ok(Self::WeaklyCorrelated),
            other => Err(invalid(format!("unknown noise regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub regime: NoiseRegime,
    pub d: usize,
    /// Target operator norm.
    pub sigma: f64,
    pub seed: u64,
}

/// `(1, e₁), (0.75, e₂), (0.5, e₃)` in dimension `d ≥ 3`.
pub fn benchmark_spectrum<T: Scalar>(d: usize) -> Result<Spectrum<T>> {
    if d < 3 {
        return Err(invalid("the benchmark spectrum needs d ≥ 3"));
    }
    Spectrum::from_pairs(
        d,
        [(1.0, 0), (0.75, 1), (0.5, 2)].map(|(l, i)| (T::lit(l), basis_vector(d, i))),
    )
}

/// The regime tensor before rescaling.
pub fn raw_noise<T: Scalar>(regime: NoiseRegime, signal: &Spectrum<T>, seed: u64) -> Result<SymmetricTensor3<T>> {
    let d = signal.dim();
    match regime {
        NoiseRegime::Gaussian => {
            let mut rng = rng_at(seed, &[0]);
            let raw = DenseTensor3::from_fn(d, |_, _, _| standard_normal::<T>(&mut rng));
            SymmetricTensor3::perm_avg_symmetrize(&raw)
        }
        NoiseRegime::Adversarial => {
            if signal.k() < 2 || d < 3 {
                return Err(invalid("adversarial noise needs d ≥ 3 and a second signal vector"));
            }
            Ok(adversarial(&signal.pairs()[1].vector))
        }
        NoiseRegime::WeaklyCorrelated => {
            if d < 3 {
                return Err(invalid("weakly correlated noise needs d ≥ 3"));
            }
            let basis = complement_basis(&signal.vectors(), d, seed)?;
            let pairs = basis.into_iter().map(|w| (T::one(), w));
            Ok(SymmetricTensor3::from_components(&Spectrum::from_pairs(d, pairs)?))
        }
    }
}

fn adversarial<T: Scalar>(v: &[T]) -> SymmetricTensor3<T> {
    let delta = |a: usize, b: usize| if a == b { T::one() } else { T::zero() };
    SymmetricTensor3::from_sorted_fn(v.len(), |a, b, c| v[a] * delta(b, c) + v[b] * delta(a, c) + v[c] * delta(a, b))
}

/// Regime noise rescaled to estimated operator norm `spec.sigma`.
pub fn make_noise<T: Scalar>(spec: &NoiseSpec, signal: &Spectrum<T>, opnorm: &SsHopmConfig) -> Result<SymmetricTensor3<T>> {
    check_dim(spec.d, signal.dim())?;
    CalibratedNoise::new(spec.regime, signal, spec.seed, opnorm)?.at(T::lit(spec.sigma))
}

/// One raw noise draw with its estimated operator norm, reusable across
/// many target norms. `at(σ)` equals `make_noise` with the same seed.
#[derive(Debug, Clone)]
pub struct CalibratedNoise<T> {
    raw: SymmetricTensor3<T>,
    opnorm: T,
}

impl<T: Scalar> CalibratedNoise<T> {
    pub fn new(regime: NoiseRegime, signal: &Spectrum<T>, seed: u64, opnorm: &SsHopmConfig) -> Result<Self> {
        let raw = raw_noise(regime, signal, seed)?;
        let est = operator_norm_estimate(&raw, opnorm, &mut rng_at(seed, &[1]))?.value;
        if est <= T::zero() {
            return Err(Error::Degenerate("estimated operator norm is zero".into()));
        }
        Ok(Self { raw, opnorm: est })
    }

    pub fn raw_opnorm(&self) -> T {
        self.opnorm
    }

    pub fn at(&self, sigma: T) -> Result<SymmetricTensor3<T>> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(invalid(format!("target operator norm must be finite and ≥ 0, got {sigma}")));
        }
        if sigma == T::zero() {
            return Ok(SymmetricTensor3::zeros(self.raw.dim()));
        }
        Ok(self.raw.scaled(sigma / self.opnorm))
    }
}

/// Orthonormal basis of the complement of the orthonormal columns `v`,
/// completed from seeded Gaussian vectors by twice-iterated Gram–Schmidt.
pub fn complement_basis<T: Scalar>(v: &[Vec<T>], d: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    let m = v.len();
    if m >= d {
        return Err(invalid(format!("no complement: {m} columns in dimension {d}")));
    }
    for c in v {
        check_dim(d, c.len())?;
    }
    check_orthonormal(v, T::lit(1e-8))?;
    let mut rng = rng_at(seed, &[2]);
    let mut basis: Vec<Vec<T>> = v.to_vec();
    while basis.len() < d {
        let mut g: Vec<T> = standard_normal_vec(d, &mut rng);
        for _ in 0..2 {
            for b in &basis {
                let p = dot(b, &g);
                axpy(-p, b, &mut g);
            }
        }
        if normalize(&mut g) > T::lit(1e-3) {
            basis.push(g);
        }
    }
    Ok(basis.split_off(m))
}

/// Spectral distance `‖Π_W − Π_Ŵ‖₂` between the span of the truth vectors and
/// the top-`k` eigenspace of `T̃(I, I, θ)`.
pub fn whitening_compare<T: Scalar>(noisy: &SymmetricTensor3<T>, truth: &Spectrum<T>, theta: &[T]) -> Result<T> {
    let d = noisy.dim();
    let k = truth.k();
    check_dim(d, truth.dim())?;
    if k == 0 || k > d {
        return Err(invalid(format!("subspace dimension {k} must lie in 1..={d}")));
    }
    let m = noisy.collapse_to_matrix(theta)?;
    let (_, estimated) = symmetric_topk_eigs(&m, k)?;
    let truth_proj = Matrix::sum_outer(d, truth.pairs().iter().map(|p| (T::one(), &p.vector)));
    let est_proj = Matrix::sum_outer(d, estimated.iter().map(|v| (T::one(), v)));
    let diff = truth_proj.sub(&est_proj)?;
    Ok(symmetric_spectral_norm(&diff)?.max(T::zero()).min(T::one()))
}
