//! Operator-norm estimation by the shifted symmetric higher-order power method.
//!
//! Each start maximizes `f(u) = T(u,u,u)` on the sphere with the update
//! `u ← normalize(T(I,u,u) + αu)`. The shift is adaptive per start: it begins
//! at zero and grows (doubling, capped at `1 + ‖T‖_F`) whenever a step would
//! decrease `f`. At the cap the shifted objective is convex on the sphere, so
//! the ascent property always holds eventually. For order three, the
//! negative-shift run on `T` from `u` is the positive-shift run from `−u`, so
//! every random start is also run from its antipode.

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::{random_unit_vector, Rng};
use crate::scalar::Scalar;
use crate::tensor::SymmetricTensor3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsHopmConfig {
    pub restarts: usize,
    pub iters: usize,
    pub tol: f64,
}

impl Default for SsHopmConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            iters: 500,
            tol: 1e-10,
        }
    }
}

impl SsHopmConfig {
    pub fn new(restarts: usize, iters: usize) -> Self {
        Self {
            restarts,
            iters,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iters == 0 {
            return Err(invalid("operator-norm estimation needs restarts ≥ 1 and iters ≥ 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("convergence tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpNormEstimate<T> {
    /// `max |T(u*,u*,u*)|` over all runs.
    pub value: T,
    /// Maximizing unit vector, oriented so that `T(u,u,u) = value`.
    pub argmax: Vec<T>,
    /// Whether the run that produced `value` met the tolerance.
    pub converged: bool,
    pub converged_runs: usize,
    pub total_runs: usize,
}

struct Run<T> {
    u: Vec<T>,
    y: Vec<T>,
    f: T,
    alpha: T,
    done: bool,
}

pub fn operator_norm_estimate<T: Scalar>(
    t: &SymmetricTensor3<T>,
    cfg: &SsHopmConfig,
    rng: &mut Rng,
) -> Result<OpNormEstimate<T>> {
    cfg.validate()?;
    let d = t.dim();
    let alpha_max = T::one() + t.frobenius_norm();
    let tol = T::lit(cfg.tol);
    let slack = T::epsilon() * T::lit(16.0) * alpha_max;

    let mut starts = Vec::with_capacity(2 * cfg.restarts);
    for _ in 0..cfg.restarts {
        let u: Vec<T> = random_unit_vector(d, rng);
        let neg = u.iter().map(|x| -*x).collect();
        starts.push(u);
        starts.push(neg);
    }
    let refs: Vec<&[T]> = starts.iter().map(Vec::as_slice).collect();
    let ys = t.contract_many(&refs);
    let mut runs: Vec<Run<T>> = starts
        .into_iter()
        .zip(ys)
        .map(|(u, y)| {
            let f = dot(&u, &y);
            Run {
                u,
                y,
                f,
                alpha: T::zero(),
                done: false,
            }
        })
        .collect();

    for _ in 0..cfg.iters {
        let active: Vec<usize> = (0..runs.len()).filter(|&r| !runs[r].done).collect();
        if active.is_empty() {
            break;
        }
        let candidates: Vec<Vec<T>> = active
            .iter()
            .map(|&r| {
                let run = &runs[r];
                let mut c: Vec<T> = run.y.iter().zip(&run.u).map(|(y, u)| *y + run.alpha * *u).collect();
                let n = norm2(&c);
                if n > T::zero() {
                    c.iter_mut().for_each(|x| *x /= n);
                    c
                } else {
                    run.u.clone()
                }
            })
            .collect();
        let refs: Vec<&[T]> = candidates.iter().map(Vec::as_slice).collect();
        let cys = t.contract_many(&refs);
        for ((&r, c), cy) in active.iter().zip(candidates).zip(cys) {
            let run = &mut runs[r];
            let cf = dot(&c, &cy);
            let at_cap = run.alpha >= alpha_max;
            if cf + slack >= run.f || at_cap {
                let step = norm2(&crate::linalg::sub(&c, &run.u));
                run.u = c;
                run.y = cy;
                run.f = cf;
                if step < tol {
                    run.done = true;
                }
            } else {
                run.alpha = if run.alpha == T::zero() {
                    run.f.abs().max(T::epsilon())
                } else {
                    run.alpha + run.alpha
                }
                .min(alpha_max);
            }
        }
    }

    let total_runs = runs.len();
    let converged_runs = runs.iter().filter(|r| r.done).count();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.f.abs() > runs[best].f.abs() {
            best = i;
        }
    }
    let run = runs.swap_remove(best);
    let (value, argmax) = if run.f < T::zero() {
        (-run.f, run.u.iter().map(|x| -*x).collect())
    } else {
        (run.f, run.u)
    };
    Ok(OpNormEstimate {
        value,
        argmax,
        converged: run.done,
        converged_runs,
        total_runs,
    })
}

/// Scales `t` so its estimated operator norm equals `sigma`.
pub fn rescale_to_opnorm<T: Scalar>(
    t: &SymmetricTensor3<T>,
    sigma: T,
    cfg: &SsHopmConfig,
    rng: &mut Rng,
) -> Result<SymmetricTensor3<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(invalid(format!("target operator norm must be finite and ≥ 0, got {sigma}")));
    }
    if sigma == T::zero() {
        return Ok(SymmetricTensor3::zeros(t.dim()));
    }
    let est = operator_norm_estimate(t, cfg, rng)?;
    if est.value <= T::zero() {
        return Err(Error::Degenerate("estimated operator norm is zero".into()));
    }
    Ok(t.scaled(sigma / est.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::basis_vector;
    use crate::rng::{rng_from_seed, standard_normal};
    use crate::tensor::{DenseTensor3, Spectrum};

    fn reference(d: usize) -> SymmetricTensor3<f64> {
        let s = Spectrum::from_pairs(
            d,
            [(1.0, basis_vector(d, 0)), (0.75, basis_vector(d, 1)), (0.5, basis_vector(d, 2))],
        )
        .unwrap();
        SymmetricTensor3::from_components(&s)
    }

    fn gaussian(d: usize, seed: u64) -> SymmetricTensor3<f64> {
        let mut rng = rng_from_seed(seed);
        SymmetricTensor3::perm_avg_symmetrize(&DenseTensor3::from_fn(d, |_, _, _| standard_normal(&mut rng))).unwrap()
    }

    #[test]
    fn rank_one_norm_is_eigenvalue() {
        let mut rng = rng_from_seed(1);
        let v: Vec<f64> = random_unit_vector(7, &mut rng);
        let t = SymmetricTensor3::from_components(&Spectrum::from_pairs(7, [(2.5, v)]).unwrap());
        for restarts in [1, 3] {
            let e = operator_norm_estimate(&t, &SsHopmConfig::new(restarts, 500), &mut rng).unwrap();
            assert!((e.value - 2.5).abs() < 1e-6, "{e:?}");
        }
    }

    #[test]
    fn orthogonal_tensor_norm_matches_exhaustive_check() {
        let t = reference(10);
        // candidates ±vᵢ: the maximum of |T(±vᵢ)| over the components
        let exhaustive = (0..3)
            .flat_map(|i| [1.0, -1.0].map(|s| (t.contract_to_scalar(&basis_vector(10, i)).unwrap() * s).abs()))
            .fold(0.0, f64::max);
        let e = operator_norm_estimate(&t, &SsHopmConfig::new(10, 500), &mut rng_from_seed(2)).unwrap();
        assert!((e.value - exhaustive).abs() < 1e-6);
        assert!(e.converged);
    }

    #[test]
    fn sign_symmetric() {
        let t = gaussian(6, 3);
        let cfg = SsHopmConfig::default();
        let a = operator_norm_estimate(&t, &cfg, &mut rng_from_seed(4)).unwrap();
        let b = operator_norm_estimate(&t.scaled(-1.0), &cfg, &mut rng_from_seed(4)).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn estimate_is_a_lower_bound_on_random_directions() {
        let t = gaussian(8, 5);
        let e = operator_norm_estimate(&t, &SsHopmConfig::default(), &mut rng_from_seed(6)).unwrap();
        let mut rng = rng_from_seed(7);
        for _ in 0..2000 {
            let u: Vec<f64> = random_unit_vector(8, &mut rng);
            assert!(t.contract_to_scalar(&u).unwrap().abs() <= e.value + 1e-9);
        }
        assert!((t.contract_to_scalar(&e.argmax).unwrap() - e.value).abs() < 1e-12);
    }

    #[test]
    fn zero_tensor_estimates_zero() {
        let e = operator_norm_estimate(&SymmetricTensor3::<f64>::zeros(4), &SsHopmConfig::new(2, 10), &mut rng_from_seed(0))
            .unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let t = reference(3);
        assert!(operator_norm_estimate(&t, &SsHopmConfig::new(0, 10), &mut rng_from_seed(0)).is_err());
        assert!(operator_norm_estimate(&t, &SsHopmConfig::new(1, 0), &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn rescale_examples() {
        let d = 5;
        let v: Vec<f64> = basis_vector(d, 3);
        let t = SymmetricTensor3::from_components(&Spectrum::from_pairs(d, [(2.0, v.clone())]).unwrap());
        let cfg = SsHopmConfig::default();
        let mut rng = rng_from_seed(9);
        let r = rescale_to_opnorm(&t, 1.0, &cfg, &mut rng).unwrap();
        let unit = SymmetricTensor3::from_components(&Spectrum::from_pairs(d, [(1.0, v)]).unwrap());
        for (a, b) in r.as_slice().iter().zip(unit.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(rescale_to_opnorm(&t, 0.0, &cfg, &mut rng).unwrap().is_zero());

        let g = gaussian(6, 10);
        let once = rescale_to_opnorm(&g, 0.3, &cfg, &mut rng_from_seed(1)).unwrap();
        let twice = rescale_to_opnorm(
            &rescale_to_opnorm(&g, 2.0, &cfg, &mut rng_from_seed(2)).unwrap(),
            0.3,
            &cfg,
            &mut rng_from_seed(3),
        )
        .unwrap();
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rescale_errors() {
        let cfg = SsHopmConfig::new(2, 10);
        let z = SymmetricTensor3::<f64>::zeros(3);
        assert!(matches!(rescale_to_opnorm(&z, 1.0, &cfg, &mut rng_from_seed(0)), Err(Error::Degenerate(_))));
        assert!(rescale_to_opnorm(&reference(3), -1.0, &cfg, &mut rng_from_seed(0)).is_err());
    }
}
