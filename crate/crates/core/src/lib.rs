//! GEMM-based and direct multi-channel multi-kernel convolution.
//!
//! Every method computes the same function: an unstrided, same-padded
//! cross-correlation of a `C x H x W` input with `M` kernels of size
//! `k x k x C`, producing `M x H x W`.
//!
//! | method            | module                | intermediate           |
//! |-------------------|-----------------------|------------------------|
//! | `direct-sum`      | [`conv::reference`]   | none                   |
//! | `direct-loopnest` | [`conv::reference`]   | none                   |
//! | `im2col`/`im2row` | [`conv::im2`]         | `k^2 * C * H * W`      |
//! | `kn2row`/`kn2col` | [`conv::kn2`]         | `k^2 * M * H * W`      |
//! | `conv1x1`         | [`conv::kn2`]         | none (`k == 1` only)   |
//!
//! GEMM-based methods run on any [`gemm::Gemm`] implementation; the built-in
//! [`gemm::GemmBackend`] provides reference, cache-blocked and row-parallel
//! variants.

pub mod conv;
pub mod error;
pub mod gemm;
pub mod harness;
pub mod rng;
pub mod tensor;

pub use conv::ConvProblem;
pub use error::{Error, Result};
pub use gemm::{Gemm, GemmBackend, GemmKind};
pub use harness::Method;
pub use tensor::{allclose, bitwise_eq, max_abs_diff, within_bound, KernelLayout, KernelSet, Layout, Matrix, Tensor3};
