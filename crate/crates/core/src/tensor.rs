//! Dense symmetric third-order tensors and their multilinear contractions.
//!
//! A [`SymmetricTensor3`] stores all `d³` entries row-major at `(i·d + j)·d + k`.
//! Every constructor writes one value per sorted index triple and mirrors it to
//! all permutations, so entries are exactly permutation invariant. Elementwise
//! arithmetic preserves that property bit-for-bit.

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{check_orthonormal, dot, norm2, Matrix};
use crate::scalar::Scalar;

/// Unsymmetrized dense `d×d×d` array, the input to the symmetrization
/// operators.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor3<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<T>) -> Result<Self> {
        check_dim(dim * dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Dense symmetric `d×d×d` tensor. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor3<T> {
    dim: usize,
    data: Vec<T>,
}

#[inline]
fn idx(d: usize, i: usize, j: usize, k: usize) -> usize {
    (i * d + j) * d + k
}

impl<T: Scalar> SymmetricTensor3<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "tensor dimension must be positive");
        Self {
            dim,
            data: vec![T::zero(); dim * dim * dim],
        }
    }

    /// Builds a tensor from a function evaluated once per sorted triple
    /// `i ≤ j ≤ k`; the value is copied to every permutation.
    pub fn from_sorted_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    let v = f(i, j, k);
                    t.mirror(i, j, k, v);
                }
            }
        }
        t
    }

    fn mirror(&mut self, i: usize, j: usize, k: usize, v: T) {
        let d = self.dim;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.data[idx(d, a, b, c)] = v;
        }
    }

    /// `Σᵢ λᵢ vᵢ⊗vᵢ⊗vᵢ`.
    pub fn from_components(spectrum: &Spectrum<T>) -> Self {
        let d = spectrum.dim();
        Self::from_sorted_fn(d, |i, j, k| {
            spectrum
                .pairs()
                .iter()
                .fold(T::zero(), |acc, p| acc + p.value * p.vector[i] * p.vector[j] * p.vector[k])
        })
    }

    /// `out[i,j,k] = Σ_σ raw[σ(i,j,k)]` over the six slot permutations.
    pub fn perm_sum_symmetrize(raw: &DenseTensor3<T>) -> Result<Self> {
        if raw.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(invalid("raw tensor has non-finite entries"));
        }
        if raw.dim() == 0 {
            return Err(invalid("tensor dimension must be positive"));
        }
        Ok(Self::from_sorted_fn(raw.dim(), |i, j, k| {
            raw.get(i, j, k) + raw.get(i, k, j) + raw.get(j, i, k) + raw.get(j, k, i) + raw.get(k, i, j) + raw.get(k, j, i)
        }))
    }

    /// Permutation average: [`Self::perm_sum_symmetrize`] divided by six.
    pub fn perm_avg_symmetrize(raw: &DenseTensor3<T>) -> Result<Self> {
        let six = T::lit(6.0);
        let mut t = Self::perm_sum_symmetrize(raw)?;
        t.data.iter_mut().for_each(|x| *x /= six);
        Ok(t)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[idx(self.dim, i, j, k)]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// The contiguous fibre `T[i, j, :]`.
    #[inline]
    pub fn fibre(&self, i: usize, j: usize) -> &[T] {
        let start = idx(self.dim, i, j, 0);
        &self.data[start..start + self.dim]
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| *x * a).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·self + b·other`
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| *x == T::zero())
    }

    /// `T(I, u, u)`.
    pub fn contract_to_vector(&self, u: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, u.len())?;
        Ok(self.contract_many(&[u]).pop().expect("one output per input"))
    }

    /// `T(u, u, u)`, evaluated as `uᵀ T(I, u, u)`.
    pub fn contract_to_scalar(&self, u: &[T]) -> Result<T> {
        let y = self.contract_to_vector(u)?;
        Ok(dot(u, &y))
    }

    /// `T(I, u, u)` for several vectors in one pass over the entries. Each
    /// output is computed with exactly the arithmetic of a single call, so
    /// batching never changes results.
    pub fn contract_many(&self, us: &[&[T]]) -> Vec<Vec<T>> {
        let d = self.dim;
        for u in us {
            assert_eq!(u.len(), d, "contraction vector has wrong dimension");
        }
        let mut out = vec![vec![T::zero(); d]; us.len()];
        for i in 0..d {
            for j in 0..d {
                let fibre = self.fibre(i, j);
                for (u, y) in us.iter().zip(out.iter_mut()) {
                    y[i] += u[j] * dot(fibre, u);
                }
            }
        }
        out
    }

    /// The symmetric matrix `T(I, I, θ)`.
    pub fn collapse_to_matrix(&self, theta: &[T]) -> Result<Matrix<T>> {
        check_dim(self.dim, theta.len())?;
        Ok(Matrix::from_fn(self.dim, self.dim, |i, j| dot(self.fibre(i, j), theta)))
    }

    /// `(T − Σⱼ λ̂ⱼ v̂ⱼ⊗³)(I, u, u)` and `(T − Σⱼ λ̂ⱼ v̂ⱼ⊗³)(u, u, u)` without
    /// forming the deflated tensor.
    pub fn contract_deflated(&self, deflation: &DeflationList<T>, u: &[T]) -> Result<(Vec<T>, T)> {
        check_dim(self.dim, u.len())?;
        check_dim(self.dim, deflation.dim())?;
        Ok(self.contract_deflated_many(deflation, &[u]).pop().expect("one output per input"))
    }

    /// Batched [`Self::contract_deflated`].
    pub fn contract_deflated_many(&self, deflation: &DeflationList<T>, us: &[&[T]]) -> Vec<(Vec<T>, T)> {
        let raw = self.contract_many(us);
        us.iter()
            .zip(raw)
            .map(|(u, y)| {
                let scalar = dot(u, &y);
                deflation.apply(u, y, scalar)
            })
            .collect()
    }
}

/// Anything that can evaluate `T(I, u, u)` for a batch of vectors.
///
/// Implemented by dense tensors and by [`Spectrum`], which acts as the
/// implicit tensor `Σ λᵢ vᵢ⊗³` at `O(kd)` cost per contraction.
pub trait TensorOperator<T: Scalar> {
    fn dim(&self) -> usize;

    fn contract_many(&self, us: &[&[T]]) -> Vec<Vec<T>>;

    /// Deflated vector and scalar contractions, as in
    /// [`SymmetricTensor3::contract_deflated`].
    fn contract_deflated_many(&self, deflation: &DeflationList<T>, us: &[&[T]]) -> Vec<(Vec<T>, T)> {
        us.iter()
            .zip(self.contract_many(us))
            .map(|(u, y)| {
                let scalar = dot(u, &y);
                deflation.apply(u, y, scalar)
            })
            .collect()
    }
}

impl<T: Scalar> TensorOperator<T> for SymmetricTensor3<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contract_many(&self, us: &[&[T]]) -> Vec<Vec<T>> {
        SymmetricTensor3::contract_many(self, us)
    }
}

impl<T: Scalar> TensorOperator<T> for Spectrum<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contract_many(&self, us: &[&[T]]) -> Vec<Vec<T>> {
        us.iter()
            .map(|u| {
                assert_eq!(u.len(), self.dim, "contraction vector has wrong dimension");
                let mut y = vec![T::zero(); self.dim];
                for p in &self.pairs {
                    let c = dot(&p.vector, u);
                    crate::linalg::axpy(p.value * c * c, &p.vector, &mut y);
                }
                y
            })
            .collect()
    }
}

/// One `(λ, v)` component with `‖v‖₂ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<T>,
}

impl<T: Scalar> EigenPair<T> {
    pub fn new(value: T, vector: Vec<T>) -> Result<Self> {
        if vector.is_empty() {
            return Err(invalid("eigenvector is empty"));
        }
        let n = norm2(&vector);
        if (n - T::one()).abs() > T::unit_tolerance() {
            return Err(invalid(format!("eigenvector norm {n} is not 1")));
        }
        if !value.is_finite() {
            return Err(invalid("eigenvalue is not finite"));
        }
        Ok(Self { value, vector })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Ordered list of eigenpairs sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    dim: usize,
    pairs: Vec<EigenPair<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn new(dim: usize, pairs: Vec<EigenPair<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("spectrum dimension must be positive"));
        }
        for p in &pairs {
            check_dim(dim, p.dim())?;
        }
        Ok(Self { dim, pairs })
    }

    /// A ground-truth spectrum: additionally requires pairwise orthogonal
    /// vectors (`|vᵢᵀvⱼ| ≤ 1e-10`).
    pub fn ground_truth(dim: usize, pairs: Vec<EigenPair<T>>) -> Result<Self> {
        let s = Self::new(dim, pairs)?;
        if !s.is_orthogonal(T::lit(1e-10).max(T::epsilon() * T::lit(64.0))) {
            return Err(invalid("ground-truth components are not orthogonal"));
        }
        Ok(s)
    }

    /// Convenience constructor from `(λ, v)` tuples, validating each pair.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (T, Vec<T>)>) -> Result<Self> {
        let pairs = pairs
            .into_iter()
            .map(|(l, v)| EigenPair::new(l, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, pairs)
    }

    pub fn is_orthogonal(&self, tol: T) -> bool {
        self.pairs.iter().enumerate().all(|(i, a)| {
            self.pairs[i + 1..]
                .iter()
                .all(|b| dot(&a.vector, &b.vector).abs() <= tol)
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[EigenPair<T>] {
        &self.pairs
    }

    pub fn values(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn vectors(&self) -> Vec<Vec<T>> {
        self.pairs.iter().map(|p| p.vector.clone()).collect()
    }

    pub fn into_pairs(self) -> Vec<EigenPair<T>> {
        self.pairs
    }
}

/// Components already extracted, subtracted lazily during contractions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationList<T> {
    dim: usize,
    pairs: Vec<EigenPair<T>>,
}

impl<T: Scalar> DeflationList<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, pairs: Vec::new() }
    }

    pub fn from_pairs(dim: usize, pairs: Vec<EigenPair<T>>) -> Result<Self> {
        let mut list = Self::new(dim);
        for p in pairs {
            list.push(p)?;
        }
        Ok(list)
    }

    pub fn push(&mut self, pair: EigenPair<T>) -> Result<()> {
        check_dim(self.dim, pair.dim())?;
        if self.pairs.len() >= self.dim {
            return Err(invalid(format!("deflation list already holds {} = d pairs", self.dim)));
        }
        self.pairs.push(pair);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[EigenPair<T>] {
        &self.pairs
    }

    /// Subtracts `Σ λ̂ⱼ ξⱼ² v̂ⱼ` from `y` and `Σ λ̂ⱼ ξⱼ³` from `scalar`, with
    /// `ξⱼ = v̂ⱼᵀu`.
    pub fn apply(&self, u: &[T], mut y: Vec<T>, mut scalar: T) -> (Vec<T>, T) {
        for p in &self.pairs {
            let xi = dot(&p.vector, u);
            let w = p.value * xi * xi;
            for (yi, vi) in y.iter_mut().zip(&p.vector) {
                *yi -= w * *vi;
            }
            scalar -= w * xi;
        }
        (y, scalar)
    }

    /// Materializes `Σ λ̂ⱼ v̂ⱼ⊗³`.
    pub fn to_tensor(&self) -> SymmetricTensor3<T> {
        let s = Spectrum {
            dim: self.dim,
            pairs: self.pairs.clone(),
        };
        SymmetricTensor3::from_components(&s)
    }

    pub fn into_spectrum(self) -> Spectrum<T> {
        Spectrum {
            dim: self.dim,
            pairs: self.pairs,
        }
    }
}

/// Incoherence `(d/k)·maxᵢ ‖Vᵀeᵢ‖₂²` of orthonormal columns `V` (`d×k`).
pub fn coherence<T: Scalar>(columns: &[Vec<T>]) -> Result<T> {
    let k = columns.len();
    if k == 0 {
        return Err(invalid("coherence needs at least one column"));
    }
    let d = columns[0].len();
    for c in columns {
        check_dim(d, c.len())?;
    }
    if k > d {
        return Err(invalid(format!("{k} columns cannot be orthonormal in dimension {d}")));
    }
    check_orthonormal(columns, T::lit(1e-8))?;
    let max_row = (0..d)
        .map(|i| columns.iter().map(|c| c[i] * c[i]).sum::<T>())
        .fold(T::zero(), T::max);
    Ok(T::lit(d as f64 / k as f64) * max_row)
}

impl<T: Scalar> TryFrom<(usize, Vec<T>)> for SymmetricTensor3<T> {
    type Error = Error;

    /// Accepts a full `d³` array that is already exactly symmetric.
    fn try_from((dim, data): (usize, Vec<T>)) -> Result<Self> {
        check_dim(dim * dim * dim, data.len())?;
        let t = Self { dim, data };
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    let v = t.get(i, j, k);
                    let perms = [t.get(i, k, j), t.get(j, i, k), t.get(j, k, i), t.get(k, i, j), t.get(k, j, i)];
                    if perms.iter().any(|p| *p != v) {
                        return Err(invalid(format!("entries at permutations of ({i},{j},{k}) differ")));
                    }
                }
            }
        }
        if t.data.iter().any(|x| !x.is_finite()) {
            return Err(invalid("tensor has non-finite entries"));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, symmetric_topk_eigs};
    use crate::rng::{random_unit_vector, rng_from_seed, standard_normal};
    use proptest::prelude::*;

    /// Literal evaluation of the multilinear form `T(A₁, A₂, A₃)` for
    /// vector/identity arguments; the oracle for every contraction kernel.
    fn naive_vector(t: &SymmetricTensor3<f64>, u: &[f64]) -> Vec<f64> {
        let d = t.dim();
        let mut out = vec![0.0; d];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..d {
                for k in 0..d {
                    *o += t.get(i, j, k) * u[j] * u[k];
                }
            }
        }
        out
    }

    fn naive_scalar(t: &SymmetricTensor3<f64>, u: &[f64]) -> f64 {
        let d = t.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    s += t.get(i, j, k) * u[i] * u[j] * u[k];
                }
            }
        }
        s
    }

    fn random_symmetric(d: usize, seed: u64) -> SymmetricTensor3<f64> {
        let mut rng = rng_from_seed(seed);
        let raw = DenseTensor3::from_fn(d, |_, _, _| standard_normal(&mut rng));
        SymmetricTensor3::perm_avg_symmetrize(&raw).unwrap()
    }

    fn reference(d: usize) -> Spectrum<f64> {
        Spectrum::from_pairs(
            d,
            [(1.0, basis_vector(d, 0)), (0.75, basis_vector(d, 1)), (0.5, basis_vector(d, 2))],
        )
        .unwrap()
    }

    fn assert_exactly_symmetric(t: &SymmetricTensor3<f64>, seed: u64) {
        let d = t.dim();
        let mut rng = rng_from_seed(seed);
        use rand::Rng;
        for _ in 0..200 {
            let (i, j, k) = (rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d));
            let v = t.get(i, j, k);
            for p in [t.get(i, k, j), t.get(j, i, k), t.get(j, k, i), t.get(k, i, j), t.get(k, j, i)] {
                assert_eq!(p, v);
            }
        }
    }

    #[test]
    fn rank_one_basis_tensor() {
        let s = Spectrum::from_pairs(3, [(1.0, basis_vector(3, 0))]).unwrap();
        let t = SymmetricTensor3::from_components(&s);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect = if (i, j, k) == (0, 0, 0) { 1.0 } else { 0.0 };
                    assert_eq!(t.get(i, j, k), expect);
                }
            }
        }
    }

    #[test]
    fn reference_tensor_entries() {
        let t = SymmetricTensor3::from_components(&reference(25));
        let mut nonzero = 0;
        for (n, x) in t.as_slice().iter().enumerate() {
            if *x != 0.0 {
                nonzero += 1;
                let expect = match n {
                    0 => 1.0,
                    _ if n == idx(25, 1, 1, 1) => 0.75,
                    _ if n == idx(25, 2, 2, 2) => 0.5,
                    _ => panic!("unexpected nonzero at {n}"),
                };
                assert_eq!(*x, expect);
            }
        }
        assert_eq!(nonzero, 3);
    }

    #[test]
    fn diagonal_direction_entry() {
        let lambda = 2.0;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = Spectrum::from_pairs(3, [(lambda, vec![h, h, 0.0])]).unwrap();
        let t = SymmetricTensor3::from_components(&s);
        // triple-loop expansion of λ v⊗v⊗v at (0,0,0)
        let expect = lambda / (2.0 * 2f64.sqrt());
        assert!((t.get(0, 0, 0) - expect).abs() < 1e-15);
        assert!((t.get(0, 1, 0) - expect).abs() < 1e-15);
        assert_eq!(t.get(2, 0, 0), 0.0);
    }

    #[test]
    fn mismatched_spectrum_dimension_rejected() {
        let pairs = vec![
            EigenPair::new(1.0, basis_vector(3, 0)).unwrap(),
            EigenPair::new(1.0, basis_vector(4, 0)).unwrap(),
        ];
        assert!(matches!(Spectrum::new(3, pairs), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn contraction_examples() {
        let e1 = SymmetricTensor3::from_components(&Spectrum::from_pairs(3, [(1.0, basis_vector(3, 0))]).unwrap());
        assert_eq!(e1.contract_to_vector(&basis_vector(3, 0)).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(e1.contract_to_scalar(&basis_vector(3, 0)).unwrap(), 1.0);
        assert_eq!(e1.contract_to_scalar(&basis_vector(3, 1)).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let diag = vec![h, h, 0.0];
        let expect = naive_scalar(&e1, &diag);
        assert!((expect - 0.353553).abs() < 1e-6);
        assert!((e1.contract_to_scalar(&diag).unwrap() - expect).abs() < 1e-15);

        let two = SymmetricTensor3::from_components(
            &Spectrum::from_pairs(4, [(1.0, basis_vector(4, 0)), (0.75, basis_vector(4, 1))]).unwrap(),
        );
        let u = vec![h, h, 0.0, 0.0];
        let got = two.contract_to_vector(&u).unwrap();
        let oracle = naive_vector(&two, &u);
        assert!((oracle[0] - 0.5).abs() < 1e-15 && (oracle[1] - 0.375).abs() < 1e-15);
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-15);
        }
    }

    #[test]
    fn contraction_dimension_mismatch() {
        let t = random_symmetric(4, 1);
        assert!(matches!(t.contract_to_vector(&[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(t.contract_to_scalar(&[1.0; 5]).is_err());
        assert!(t.collapse_to_matrix(&[1.0]).is_err());
    }

    #[test]
    fn contraction_matches_multilinear_oracle() {
        for trial in 0..30u64 {
            let d = 1 + (trial as usize * 7) % 20;
            let t = random_symmetric(d, 100 + trial);
            let u: Vec<f64> = random_unit_vector(d, &mut rng_from_seed(trial));
            let v = t.contract_to_vector(&u).unwrap();
            for (a, b) in v.iter().zip(naive_vector(&t, &u)) {
                assert!((a - b).abs() < 1e-10);
            }
            let s = t.contract_to_scalar(&u).unwrap();
            assert!((s - naive_scalar(&t, &u)).abs() < 1e-10);
            assert!((dot(&u, &v) - s).abs() < 1e-10);
        }
    }

    #[test]
    fn batched_contraction_is_bit_identical() {
        let t = random_symmetric(9, 4);
        let mut rng = rng_from_seed(5);
        let us: Vec<Vec<f64>> = (0..5).map(|_| random_unit_vector(9, &mut rng)).collect();
        let refs: Vec<&[f64]> = us.iter().map(Vec::as_slice).collect();
        let many = t.contract_many(&refs);
        for (u, y) in us.iter().zip(&many) {
            assert_eq!(&t.contract_to_vector(u).unwrap(), y);
        }
    }

    #[test]
    fn perm_sum_examples() {
        let mut raw = DenseTensor3::zeros(3);
        raw.set(0, 1, 2, 1.0);
        let t = SymmetricTensor3::perm_sum_symmetrize(&raw).unwrap();
        let ones = t.as_slice().iter().filter(|x| **x == 1.0).count();
        assert_eq!(ones, 6);
        assert!((t.frobenius_norm() - 6f64.sqrt()).abs() < 1e-15);

        let mut diag = DenseTensor3::zeros(3);
        diag.set(0, 0, 0, 1.0);
        let t = SymmetricTensor3::perm_sum_symmetrize(&diag).unwrap();
        assert_eq!(t.get(0, 0, 0), 6.0);
        assert_eq!(t.frobenius_norm(), 6.0);

        let sym = random_symmetric(4, 9);
        let raw = DenseTensor3::from_vec(4, sym.as_slice().to_vec()).unwrap();
        let summed = SymmetricTensor3::perm_sum_symmetrize(&raw).unwrap();
        let x = sym.get(0, 1, 3);
        assert!((summed.get(0, 1, 3) - 6.0 * x).abs() < 1e-14);
    }

    #[test]
    fn perm_avg_examples() {
        let mut raw = DenseTensor3::zeros(3);
        raw.set(0, 1, 2, 1.0);
        let t = SymmetricTensor3::perm_avg_symmetrize(&raw).unwrap();
        assert_eq!(t.as_slice().iter().filter(|x| **x == 1.0 / 6.0).count(), 6);

        let sym = random_symmetric(5, 10);
        let again =
            SymmetricTensor3::perm_avg_symmetrize(&DenseTensor3::from_vec(5, sym.as_slice().to_vec()).unwrap()).unwrap();
        for (a, b) in again.as_slice().iter().zip(sym.as_slice()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
        }

        let mut rng = rng_from_seed(12);
        let raw = DenseTensor3::from_fn(4, |_, _, _| standard_normal::<f64>(&mut rng));
        let s = SymmetricTensor3::perm_sum_symmetrize(&raw).unwrap();
        let a = SymmetricTensor3::perm_avg_symmetrize(&raw).unwrap();
        for (x, y) in s.as_slice().iter().zip(a.as_slice()) {
            assert_eq!(*x / 6.0, *y);
        }
    }

    #[test]
    fn non_finite_raw_rejected() {
        let mut raw = DenseTensor3::zeros(2);
        raw.set(1, 0, 1, f64::NAN);
        assert!(SymmetricTensor3::perm_sum_symmetrize(&raw).is_err());
    }

    #[test]
    fn constructed_tensors_are_exactly_symmetric() {
        assert_exactly_symmetric(&random_symmetric(7, 3), 1);
        let mut rng = rng_from_seed(77);
        let pairs: Vec<(f64, Vec<f64>)> = (0..3).map(|i| (0.5 + i as f64, random_unit_vector(6, &mut rng))).collect();
        let t = SymmetricTensor3::from_components(&Spectrum::from_pairs(6, pairs).unwrap());
        assert_exactly_symmetric(&t, 2);
        let sum = t.linear_combination(0.3, &random_symmetric(6, 8), -1.7).unwrap();
        assert_exactly_symmetric(&sum, 3);
    }

    #[test]
    fn collapse_examples() {
        let d = 6;
        let mut rng = rng_from_seed(31);
        let v: Vec<f64> = random_unit_vector(d, &mut rng);
        let theta: Vec<f64> = random_unit_vector(d, &mut rng);
        let t = SymmetricTensor3::from_components(&Spectrum::from_pairs(d, [(1.0, v.clone())]).unwrap());
        let m = t.collapse_to_matrix(&theta).unwrap();
        let c = dot(&v, &theta);
        for i in 0..d {
            for j in 0..d {
                assert!((m.get(i, j) - c * v[i] * v[j]).abs() < 1e-14);
            }
        }

        // orthonormal components: eigenvalues λᵢ(vᵢᵀθ), checked with the matrix eigensolver
        let basis: Vec<Vec<f64>> = (0..d).map(|i| basis_vector(d, i)).collect();
        let lambdas = [1.0, 0.8, 0.6];
        let spec = Spectrum::from_pairs(d, lambdas.iter().zip(&basis).map(|(l, v)| (*l, v.clone()))).unwrap();
        let m = SymmetricTensor3::from_components(&spec).collapse_to_matrix(&theta).unwrap();
        let (vals, _) = symmetric_topk_eigs(&m, 3).unwrap();
        let mut expect: Vec<f64> = lambdas.iter().zip(&basis).map(|(l, v)| l * dot(v, &theta)).collect();
        expect.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        for (g, e) in vals.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }

        let perp = basis_vector(d, 5);
        let m = SymmetricTensor3::from_components(&spec).collapse_to_matrix(&perp).unwrap();
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn deflated_contraction_examples() {
        let d = 5;
        let t = SymmetricTensor3::from_components(&reference(d));
        let u: Vec<f64> = random_unit_vector(d, &mut rng_from_seed(3));
        let empty = DeflationList::new(d);
        let (y, s) = t.contract_deflated(&empty, &u).unwrap();
        assert_eq!(y, t.contract_to_vector(&u).unwrap());
        assert_eq!(s, t.contract_to_scalar(&u).unwrap());

        let mut first = DeflationList::new(d);
        first.push(EigenPair::new(1.0, basis_vector(d, 0)).unwrap()).unwrap();
        let (y, s) = t.contract_deflated(&first, &basis_vector(d, 0)).unwrap();
        assert!(norm2(&y) < 1e-12 && s.abs() < 1e-12);
    }

    #[test]
    fn deflated_contraction_matches_materialized_oracle() {
        for seed in 0..10u64 {
            let d = 3 + seed as usize * 2;
            let t = random_symmetric(d, seed);
            let mut rng = rng_from_seed(1000 + seed);
            let mut defl = DeflationList::new(d);
            for _ in 0..3.min(d) {
                let l: f64 = standard_normal(&mut rng);
                defl.push(EigenPair::new(l, random_unit_vector(d, &mut rng)).unwrap()).unwrap();
            }
            let materialized = t.sub(&defl.to_tensor()).unwrap();
            let u: Vec<f64> = random_unit_vector(d, &mut rng);
            let (y, s) = t.contract_deflated(&defl, &u).unwrap();
            let ny = naive_vector(&materialized, &u);
            for (a, b) in y.iter().zip(&ny) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((s - naive_scalar(&materialized, &u)).abs() < 1e-10);
        }
    }

    #[test]
    fn implicit_low_rank_operator_matches_dense() {
        let d = 7;
        let mut rng = rng_from_seed(44);
        let pairs: Vec<(f64, Vec<f64>)> = (0..3).map(|i| (1.0 - 0.2 * i as f64, random_unit_vector(d, &mut rng))).collect();
        let s = Spectrum::from_pairs(d, pairs).unwrap();
        let dense = SymmetricTensor3::from_components(&s);
        let u: Vec<f64> = random_unit_vector(d, &mut rng);
        let mut defl = DeflationList::new(d);
        defl.push(EigenPair::new(0.3, random_unit_vector(d, &mut rng)).unwrap()).unwrap();
        let a = TensorOperator::contract_deflated_many(&s, &defl, &[&u]);
        let b = dense.contract_deflated_many(&defl, &[&u]);
        for (x, y) in a[0].0.iter().zip(&b[0].0) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a[0].1 - b[0].1).abs() < 1e-12);
    }

    #[test]
    fn deflation_list_is_bounded_by_dimension() {
        let mut l = DeflationList::new(2);
        l.push(EigenPair::new(1.0, basis_vector(2, 0)).unwrap()).unwrap();
        l.push(EigenPair::new(1.0, basis_vector(2, 1)).unwrap()).unwrap();
        assert!(l.push(EigenPair::new(1.0, basis_vector(2, 1)).unwrap()).is_err());
        assert!(l.clone().push(EigenPair::new(1.0, basis_vector(3, 1)).unwrap()).is_err());
    }

    #[test]
    fn eigenpair_rejects_non_unit_vector() {
        assert!(EigenPair::new(1.0, vec![1.0, 1.0]).is_err());
        assert!(EigenPair::new(1.0, vec![1.0 + 1e-9, 0.0]).is_err());
    }

    #[test]
    fn ground_truth_requires_orthogonality() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pairs = vec![
            EigenPair::new(1.0, vec![1.0, 0.0]).unwrap(),
            EigenPair::new(1.0, vec![h, h]).unwrap(),
        ];
        assert!(Spectrum::ground_truth(2, pairs.clone()).is_err());
        assert!(Spectrum::new(2, pairs).is_ok());
    }

    #[test]
    fn coherence_examples() {
        let d = 8;
        let all: Vec<Vec<f64>> = (0..d).map(|i| basis_vector(d, i)).collect();
        assert!((coherence(&all).unwrap() - 1.0).abs() < 1e-15);
        let few: Vec<Vec<f64>> = (0..2).map(|i| basis_vector(d, i)).collect();
        assert!((coherence(&few).unwrap() - 4.0).abs() < 1e-15);
        assert!(coherence(&[vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn tensor_from_full_array_checks_symmetry() {
        let t = random_symmetric(3, 2);
        let ok = SymmetricTensor3::try_from((3, t.as_slice().to_vec())).unwrap();
        assert_eq!(ok, t);
        let mut bad = t.as_slice().to_vec();
        bad[1] += 1.0;
        assert!(SymmetricTensor3::try_from((3, bad)).is_err());
    }

    /// Random `d×k` orthonormal columns via Gram–Schmidt on Gaussian vectors.
    fn random_orthonormal(d: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < k {
            let mut g: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
            for _ in 0..2 {
                for c in &cols {
                    let p = dot(c, &g);
                    crate::linalg::axpy(-p, c, &mut g);
                }
            }
            if crate::linalg::normalize(&mut g) > 1e-6 {
                cols.push(g);
            }
        }
        cols
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn contraction_is_linear(d in 1usize..9, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let t1 = random_symmetric(d, seed);
            let t2 = random_symmetric(d, seed ^ 0xabc);
            let u: Vec<f64> = random_unit_vector(d, &mut rng_from_seed(seed.wrapping_add(1)));
            let combo = t1.linear_combination(a, &t2, b).unwrap();
            let lhs = combo.contract_to_vector(&u).unwrap();
            let y1 = t1.contract_to_vector(&u).unwrap();
            let y2 = t2.contract_to_vector(&u).unwrap();
            for i in 0..d {
                prop_assert!((lhs[i] - (a * y1[i] + b * y2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn power_map_bounded_by_largest_eigenvalue(d in 2usize..10, seed in any::<u64>()) {
            let k = 1 + (seed as usize % d.min(4));
            let vs = random_orthonormal(d, k, seed);
            let lambdas: Vec<f64> = (0..k).map(|i| 1.0 - 0.1 * i as f64).collect();
            let spec = Spectrum::ground_truth(d, lambdas.iter().copied().zip(vs).map(|(l, v)| EigenPair::new(l, v).unwrap()).collect()).unwrap();
            let t = SymmetricTensor3::from_components(&spec);
            let u: Vec<f64> = random_unit_vector(d, &mut rng_from_seed(seed ^ 7));
            prop_assert!(norm2(&t.contract_to_vector(&u).unwrap()) <= 1.0 + 1e-12);
        }

        #[test]
        fn coherence_in_range_and_rotation_invariant(d in 2usize..12, seed in any::<u64>()) {
            let k = 1 + (seed as usize % d);
            let v = random_orthonormal(d, k, seed);
            let mu = coherence(&v).unwrap();
            prop_assert!(mu >= 1.0 - 1e-9 && mu <= d as f64 / k as f64 + 1e-9);
            // right-multiply by a random k×k rotation
            let q = random_orthonormal(k, k, seed ^ 0x55);
            let rotated: Vec<Vec<f64>> = (0..k)
                .map(|c| (0..d).map(|r| (0..k).map(|m| v[m][r] * q[c][m]).sum()).collect())
                .collect();
            prop_assert!((coherence(&rotated).unwrap() - mu).abs() < 1e-8);
        }
    }
}
