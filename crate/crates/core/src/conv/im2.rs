//! im2col and im2row: replicate every `k x k x C` input patch into one column
//! (or row) of a patch matrix, then convolve with a single GEMM.
//!
//! Patch element order is tap row `i`, tap column `j`, channel `c` (channel
//! innermost), which is the flat MKKC order of one kernel. The kernel matrix
//! is therefore a plain reshape of MKKC storage.

use crate::conv::ConvProblem;
use crate::error::{Error, Result};
use crate::gemm::Gemm;
use crate::tensor::{KernelLayout, KernelSet, Layout, Matrix, Tensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchOrientation {
    /// `(k*k*C) x (H*W)`: one patch per column.
    Columns,
    /// `(H*W) x (k*k*C)`: one patch per row.
    Rows,
}

/// A materialized patch matrix together with the geometry it was built from.
#[derive(Clone, Debug)]
pub struct PatchMatrix {
    matrix: Matrix,
    kernel_size: usize,
    channels: usize,
    height: usize,
    width: usize,
    orientation: PatchOrientation,
}

impl PatchMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn orientation(&self) -> PatchOrientation {
        self.orientation
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Element count, `k^2 * C * H * W`.
    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }
}

fn odd(k: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        Err(Error::EvenKernel(k))
    } else if k == 0 {
        Err(Error::ZeroDimension("kernel size"))
    } else {
        Ok(())
    }
}

/// Column `x*W + y` holds the zero-padded patch centered on pixel `(x, y)`;
/// row `(i*k + j)*C + c` holds `input(c, x - k/2 + i, y - k/2 + j)`.
pub fn im2col_patch_matrix(input: &Tensor3, k: usize) -> Result<PatchMatrix> {
    odd(k)?;
    let input = input.in_layout(Layout::Chw);
    let (c_n, h, w) = (input.channels(), input.height(), input.width());
    let r = k / 2;
    let hw = h * w;
    let src = input.data();
    let mut data = vec![0.0f32; k * k * c_n * hw];

    for i in 0..k {
        for j in 0..k {
            // Output columns y whose source column y + j - r is in range.
            let y_lo = r.saturating_sub(j);
            let y_hi = (w + r).saturating_sub(j).min(w);
            for c in 0..c_n {
                let row = ((i * k + j) * c_n + c) * hw;
                for x in 0..h {
                    let sx = x + i;
                    if sx < r || sx - r >= h || y_lo >= y_hi {
                        continue;
                    }
                    let s0 = c * hw + (sx - r) * w + y_lo + j - r;
                    data[row + x * w + y_lo..row + x * w + y_hi].copy_from_slice(&src[s0..s0 + (y_hi - y_lo)]);
                }
            }
        }
    }
    Ok(PatchMatrix {
        matrix: Matrix::new(k * k * c_n, hw, data)?,
        kernel_size: k,
        channels: c_n,
        height: h,
        width: w,
        orientation: PatchOrientation::Columns,
    })
}

/// Row-patch dual of [`im2col_patch_matrix`], built directly from HWC data
/// so that the `C` values of each tap are one contiguous copy.
pub fn im2row_patch_matrix(input: &Tensor3, k: usize) -> Result<PatchMatrix> {
    odd(k)?;
    let input = input.in_layout(Layout::Hwc);
    let (c_n, h, w) = (input.channels(), input.height(), input.width());
    let r = k / 2;
    let patch = k * k * c_n;
    let src = input.data();
    let mut data = vec![0.0f32; h * w * patch];

    for x in 0..h {
        for y in 0..w {
            let row = (x * w + y) * patch;
            for i in 0..k {
                let sx = x + i;
                if sx < r || sx - r >= h {
                    continue;
                }
                for j in 0..k {
                    let sy = y + j;
                    if sy < r || sy - r >= w {
                        continue;
                    }
                    let s0 = ((sx - r) * w + (sy - r)) * c_n;
                    let d0 = row + (i * k + j) * c_n;
                    data[d0..d0 + c_n].copy_from_slice(&src[s0..s0 + c_n]);
                }
            }
        }
    }
    Ok(PatchMatrix {
        matrix: Matrix::new(h * w, patch, data)?,
        kernel_size: k,
        channels: c_n,
        height: h,
        width: w,
        orientation: PatchOrientation::Rows,
    })
}

/// `M x (k*k*C)` kernel matrix: row `m` is kernel `m` in MKKC order.
pub fn kernel_patch_matrix_rows(kernels: &KernelSet) -> Result<Matrix> {
    if kernels.layout() != KernelLayout::Mkkc {
        return Err(Error::WrongLayout {
            expected: KernelLayout::Mkkc.name(),
            found: kernels.layout().name(),
        });
    }
    let k = kernels.size();
    Matrix::new(kernels.count(), k * k * kernels.channels(), kernels.data().to_vec())
}

pub fn conv_im2col(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
    let kernels = p.kernels().in_layout(KernelLayout::Mkkc);
    let kmat = kernel_patch_matrix_rows(&kernels)?;
    let patches = im2col_patch_matrix(p.input(), p.kernel_size())?;
    let out = gemm.gemm(&kmat, patches.matrix())?;
    Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Chw, out.into_data())
}

pub fn conv_im2row(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
    let kernels = p.kernels().in_layout(KernelLayout::Mkkc);
    let kmat = kernel_patch_matrix_rows(&kernels)?.transpose();
    let patches = im2row_patch_matrix(p.input(), p.kernel_size())?;
    // (H*W) x M is the HWC storage of the output.
    let out = gemm.gemm(patches.matrix(), &kmat)?;
    let hwc = Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Hwc, out.into_data())?;
    Ok(hwc.to_layout(Layout::Chw))
}
