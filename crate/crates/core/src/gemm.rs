//! Single-precision `C = A * B`.
//!
//! Three built-in variants share one accumulation law: every output element
//! starts at `0.0` and receives `a(r, t) * b(t, c)` for `t` in ascending
//! order, one rounded add at a time. The blocked variant only reorders which
//! elements are updated when, never the per-element sequence, so blocked and
//! parallel results are bitwise reproducible under any tiling or thread count.

use std::fmt;
use std::str::FromStr;
use std::thread;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Anything that can multiply two matrices under the `C = A * B` contract.
///
/// External implementations (e.g. a tuned BLAS binding) only need to be
/// accurate to allclose tolerances; the bitwise guarantees are specific to
/// [`GemmBackend`].
pub trait Gemm: Sync {
    fn name(&self) -> &str;
    fn gemm(&self, a: &Matrix, b: &Matrix) -> Result<Matrix>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GemmKind {
    Reference,
    Blocked,
    Parallel,
}

impl GemmKind {
    pub fn name(self) -> &'static str {
        match self {
            GemmKind::Reference => "reference",
            GemmKind::Blocked => "blocked",
            GemmKind::Parallel => "parallel",
        }
    }
}

impl FromStr for GemmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(GemmKind::Reference),
            "blocked" => Ok(GemmKind::Blocked),
            "parallel" => Ok(GemmKind::Parallel),
            other => Err(Error::UnknownBackend(other.to_string())),
        }
    }
}

impl fmt::Display for GemmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_BLOCK_MR: usize = 64;
pub const DEFAULT_BLOCK_NR: usize = 64;
pub const DEFAULT_BLOCK_KC: usize = 256;

/// Configuration of one of the built-in GEMM variants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GemmBackend {
    kind: GemmKind,
    block_mr: usize,
    block_nr: usize,
    block_kc: usize,
    thread_count: usize,
}

impl GemmBackend {
    pub fn reference() -> Self {
        Self {
            kind: GemmKind::Reference,
            block_mr: DEFAULT_BLOCK_MR,
            block_nr: DEFAULT_BLOCK_NR,
            block_kc: DEFAULT_BLOCK_KC,
            thread_count: 1,
        }
    }

    pub fn blocked() -> Self {
        Self {
            kind: GemmKind::Blocked,
            ..Self::reference()
        }
    }

    pub fn parallel(thread_count: usize) -> Result<Self> {
        Self::blocked().with_kind(GemmKind::Parallel).with_threads(thread_count)
    }

    /// Looks a backend up by its CLI name.
    pub fn from_name(name: &str, thread_count: usize) -> Result<Self> {
        let kind: GemmKind = name.parse()?;
        Self::reference().with_kind(kind).with_threads(thread_count)
    }

    fn with_kind(mut self, kind: GemmKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_tiles(mut self, block_mr: usize, block_nr: usize, block_kc: usize) -> Result<Self> {
        if block_mr == 0 || block_nr == 0 || block_kc == 0 {
            return Err(Error::InvalidArgument(format!(
                "tile sizes must be >= 1, got {block_mr}/{block_nr}/{block_kc}"
            )));
        }
        self.block_mr = block_mr;
        self.block_nr = block_nr;
        self.block_kc = block_kc;
        Ok(self)
    }

    pub fn with_threads(mut self, thread_count: usize) -> Result<Self> {
        if thread_count == 0 {
            return Err(Error::InvalidArgument("thread count must be >= 1".into()));
        }
        self.thread_count = thread_count;
        Ok(self)
    }

    pub fn kind(&self) -> GemmKind {
        self.kind
    }

    pub fn tiles(&self) -> (usize, usize, usize) {
        (self.block_mr, self.block_nr, self.block_kc)
    }

    pub fn thread_count(&self) -> usize {
        self.thread_count
    }
}

impl Default for GemmBackend {
    fn default() -> Self {
        Self::blocked()
    }
}

impl Gemm for GemmBackend {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn gemm(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        match self.kind {
            GemmKind::Reference => gemm_reference(a, b),
            GemmKind::Blocked => gemm_blocked(a, b, self),
            GemmKind::Parallel => gemm_parallel(a, b, self),
        }
    }
}

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", a.rows(), a.cols()),
            right: format!("{}x{}", b.rows(), b.cols()),
        });
    }
    Ok(())
}

/// Untuned triple loop; the oracle for the other variants.
pub fn gemm_reference(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dims(a, b)?;
    let (m, p, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0f32; m * n];
    for r in 0..m {
        for c in 0..n {
            let mut acc = 0.0f32;
            for t in 0..p {
                acc += ad[r * p + t] * bd[t * n + c];
            }
            out[r * n + c] = acc;
        }
    }
    Matrix::new(m, n, out)
}

pub fn gemm_blocked(a: &Matrix, b: &Matrix, backend: &GemmBackend) -> Result<Matrix> {
    check_dims(a, b)?;
    let (m, n) = (a.rows(), b.cols());
    let mut out = vec![0.0f32; m * n];
    blocked_band(a, b, 0, &mut out, backend);
    Matrix::new(m, n, out)
}

/// Output rows split into `min(thread_count, m)` contiguous bands, each
/// computed by its own scoped thread with the blocked procedure.
pub fn gemm_parallel(a: &Matrix, b: &Matrix, backend: &GemmBackend) -> Result<Matrix> {
    check_dims(a, b)?;
    let (m, n) = (a.rows(), b.cols());
    let workers = backend.thread_count.min(m).max(1);
    let mut out = vec![0.0f32; m * n];
    if workers == 1 {
        blocked_band(a, b, 0, &mut out, backend);
    } else {
        let band_rows = m.div_ceil(workers);
        thread::scope(|s| {
            for (band, chunk) in out.chunks_mut(band_rows * n).enumerate() {
                s.spawn(move || blocked_band(a, b, band * band_rows, chunk, backend));
            }
        });
    }
    Matrix::new(m, n, out)
}

/// Accumulates rows `row0..row0 + out.len() / n` of `a * b` into `out`,
/// which must be zeroed.
fn blocked_band(a: &Matrix, b: &Matrix, row0: usize, out: &mut [f32], backend: &GemmBackend) {
    let (p, n) = (a.cols(), b.cols());
    let rows = out.len() / n;
    let (ad, bd) = (a.data(), b.data());
    let (mr, nr, kc) = backend.tiles();

    for pc in (0..p).step_by(kc) {
        let pe = (pc + kc).min(p);
        for ic in (0..rows).step_by(mr) {
            let ie = (ic + mr).min(rows);
            for jc in (0..n).step_by(nr) {
                let je = (jc + nr).min(n);
                for i in ic..ie {
                    let a_row = &ad[(row0 + i) * p..(row0 + i + 1) * p];
                    let c_row = &mut out[i * n + jc..i * n + je];
                    for t in pc..pe {
                        let av = a_row[t];
                        let b_row = &bd[t * n + jc..t * n + je];
                        for (cv, bv) in c_row.iter_mut().zip(b_row) {
                            *cv += av * bv;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{allclose, bitwise_eq};
    use proptest::prelude::*;

    fn int_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        // Integer entries in [-4, 4]; products and sums are exact in f32.
        let r = Matrix::random(rows, cols, seed).unwrap();
        Matrix::new(rows, cols, r.data().iter().map(|v| (v * 4.5).trunc()).collect()).unwrap()
    }

    #[test]
    fn identity_times_b() {
        let b = Matrix::random(3, 4, 11).unwrap();
        let out = gemm_reference(&Matrix::identity(3).unwrap(), &b).unwrap();
        assert!(bitwise_eq(&out, &b));
    }

    #[test]
    fn scalar_product() {
        let a = Matrix::new(1, 1, vec![2.0]).unwrap();
        let b = Matrix::new(1, 1, vec![3.0]).unwrap();
        assert_eq!(gemm_reference(&a, &b).unwrap().data(), &[6.0]);
    }

    #[test]
    fn reference_matches_hand_dot_products() {
        let a = int_matrix(5, 7, 1);
        let b = int_matrix(7, 3, 2);
        let out = gemm_reference(&a, &b).unwrap();
        for r in 0..5 {
            for c in 0..3 {
                let dot: f64 = (0..7).map(|t| a.get(r, t) as f64 * b.get(t, c) as f64).sum();
                assert_eq!(out.get(r, c) as f64, dot);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::zeros(2, 3).unwrap();
        let b = Matrix::zeros(2, 3).unwrap();
        assert!(gemm_reference(&a, &b).is_err());
        assert!(gemm_blocked(&a, &b, &GemmBackend::blocked()).is_err());
        assert!(gemm_parallel(&a, &b, &GemmBackend::parallel(2).unwrap()).is_err());
    }

    #[test]
    fn single_block_is_bitwise_reference() {
        let a = Matrix::random(20, 30, 3).unwrap();
        let b = Matrix::random(30, 10, 4).unwrap();
        let be = GemmBackend::blocked().with_tiles(32, 32, 32).unwrap();
        assert!(bitwise_eq(
            &gemm_blocked(&a, &b, &be).unwrap(),
            &gemm_reference(&a, &b).unwrap()
        ));
    }

    #[test]
    fn blocked_64_cubed_small_tiles() {
        let a = Matrix::random(64, 64, 5).unwrap();
        let b = Matrix::random(64, 64, 6).unwrap();
        let be = GemmBackend::blocked().with_tiles(16, 16, 16).unwrap();
        let reference = gemm_reference(&a, &b).unwrap();
        assert!(allclose(&gemm_blocked(&a, &b, &be).unwrap(), &reference, 1e-5, 1e-6).unwrap());
    }

    #[test]
    fn dot_product_any_blocking() {
        let a = Matrix::random(1, 50, 7).unwrap();
        let b = Matrix::random(50, 1, 8).unwrap();
        let reference = gemm_reference(&a, &b).unwrap();
        for (mr, nr) in [(1, 1), (3, 2), (64, 64)] {
            let be = GemmBackend::blocked().with_tiles(mr, nr, 50).unwrap();
            assert!(bitwise_eq(&gemm_blocked(&a, &b, &be).unwrap(), &reference));
        }
    }

    #[test]
    fn more_threads_than_rows() {
        let a = Matrix::random(3, 9, 9).unwrap();
        let b = Matrix::random(9, 5, 10).unwrap();
        let par = GemmBackend::parallel(8).unwrap();
        let out = gemm_parallel(&a, &b, &par).unwrap();
        assert!(bitwise_eq(
            &out,
            &gemm_blocked(&a, &b, &GemmBackend::blocked()).unwrap()
        ));
    }

    #[test]
    fn one_thread_equals_blocked() {
        let a = Matrix::random(33, 17, 12).unwrap();
        let b = Matrix::random(17, 29, 13).unwrap();
        let be = GemmBackend::blocked().with_tiles(8, 8, 4).unwrap();
        let par = be.clone().with_kind(GemmKind::Parallel).with_threads(1).unwrap();
        assert!(bitwise_eq(
            &gemm_parallel(&a, &b, &par).unwrap(),
            &gemm_blocked(&a, &b, &be).unwrap()
        ));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(GemmBackend::blocked().with_tiles(0, 1, 1).is_err());
        assert!(GemmBackend::parallel(0).is_err());
        assert!(matches!(
            GemmBackend::from_name("openblas", 1),
            Err(Error::UnknownBackend(_))
        ));
        assert_eq!(GemmBackend::from_name("parallel", 3).unwrap().thread_count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn variants_agree_with_reference(
            m in 1usize..=32, p in 1usize..=32, n in 1usize..=32,
            mr in 1usize..=16, nr in 1usize..=16, kc in 1usize..=16,
            threads in 1usize..=8, seed: u64,
        ) {
            let a = Matrix::random(m, p, seed).unwrap();
            let b = Matrix::random(p, n, seed ^ 1).unwrap();
            let reference = gemm_reference(&a, &b).unwrap();
            let be = GemmBackend::blocked().with_tiles(mr, nr, kc).unwrap();
            let blocked = gemm_blocked(&a, &b, &be).unwrap();
            prop_assert!(allclose(&blocked, &reference, 1e-5, 1e-6).unwrap());
            let par = be.with_kind(GemmKind::Parallel).with_threads(threads).unwrap();
            prop_assert!(bitwise_eq(&gemm_parallel(&a, &b, &par).unwrap(), &blocked));
        }

        #[test]
        fn associativity(m in 1usize..12, p in 1usize..12, q in 1usize..12, n in 1usize..12, seed: u64) {
            let a = Matrix::random(m, p, seed).unwrap();
            let b = Matrix::random(p, q, seed ^ 2).unwrap();
            let c = Matrix::random(q, n, seed ^ 3).unwrap();
            let be = GemmBackend::blocked();
            let left = be.gemm(&be.gemm(&a, &b).unwrap(), &c).unwrap();
            let right = be.gemm(&a, &be.gemm(&b, &c).unwrap()).unwrap();
            prop_assert!(allclose(&left, &right, 1e-4, 1e-5).unwrap());
        }
    }
}
