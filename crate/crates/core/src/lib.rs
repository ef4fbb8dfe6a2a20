//! Tensor power methods for orthogonally decomposable symmetric third-order
//! tensors: the robust batch method, an online variant driven by a sample
//! stream, and a differentially private variant, plus noise constructions
//! and a matrix-whitening baseline.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the common `f64` instantiations.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod error;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod opnorm;
pub mod power;
pub mod rng;
pub mod scalar;
pub mod streaming;
pub mod tensor;

pub use dp::{derive_budget, private_rtpm, NeighborPerturbation, PrivacyBudget, PrivateConfig, PrivateRun};
pub use error::{Error, Result};
pub use noise::{benchmark_spectrum, make_noise, whitening_compare, CalibratedNoise, NoiseRegime, NoiseSpec};
pub use opnorm::{operator_norm_estimate, rescale_to_opnorm, OpNormEstimate, SsHopmConfig};
pub use power::{robust_tpm, score_recovery, RecoveryReport, TpmConfig};
pub use scalar::Scalar;
pub use streaming::{online_rtpm, BatchMode, SampleStream, SingleTopicGenerator, StreamConfig};
pub use tensor::{coherence, DeflationList, DenseTensor3, EigenPair, Spectrum, SymmetricTensor3, TensorOperator};

pub type Tensor3 = SymmetricTensor3<f64>;
pub type Tensor3F32 = SymmetricTensor3<f32>;
pub type Spectrum64 = Spectrum<f64>;
pub type EigenPair64 = EigenPair<f64>;
pub type DeflationList64 = DeflationList<f64>;
pub type PrivateRun64 = PrivateRun<f64>;
pub type RecoveryReport64 = RecoveryReport<f64>;
