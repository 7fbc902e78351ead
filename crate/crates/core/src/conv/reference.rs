//! Direct convolutions, used as oracles and as the direct baselines.
//!
//! All of them compute the same-padded cross-correlation
//!
//! ```text
//! out(m, x, y) = sum_c sum_i sum_j in(c, x - k/2 + i, y - k/2 + j) * ker(m, i, j, c)
//! ```
//!
//! with out-of-range input reads contributing zero. `x` is the row and `y`
//! the column. The kernel is not flipped.

use crate::conv::ConvProblem;
use crate::error::{Error, Result};
use crate::tensor::{KernelLayout, KernelSet, Layout, Matrix, Tensor3};

/// Valid tap range `lo..hi` for output coordinate `x` on an axis of length `n`.
#[inline]
pub(crate) fn tap_range(x: usize, n: usize, k: usize) -> (usize, usize) {
    let r = k / 2;
    let lo = r.saturating_sub(x);
    let hi = k.min(n + r - x);
    (lo, hi)
}

/// Single-channel, single-kernel 2D convolution of an `H x W` image with a
/// square `k x k` kernel.
pub fn conv2d_scsk(image: &Matrix, kernel: &Matrix) -> Result<Matrix> {
    if kernel.rows() != kernel.cols() {
        return Err(Error::ShapeMismatch {
            left: "square kernel".into(),
            right: format!("{}x{}", kernel.rows(), kernel.cols()),
        });
    }
    let k = kernel.rows();
    if k.is_multiple_of(2) {
        return Err(Error::EvenKernel(k));
    }
    let (h, w) = (image.rows(), image.cols());
    let r = k / 2;
    let mut out = Matrix::zeros(h, w)?;
    let src = image.data();
    let dst = out.data_mut();

    // Taps outermost; each output pixel still receives its taps in (i, j)
    // row-major order, exactly as the per-pixel double sum.
    for i in 0..k {
        for j in 0..k {
            let kv = kernel.get(i, j);
            for x in 0..h {
                let (ilo, ihi) = tap_range(x, h, k);
                if i < ilo || i >= ihi {
                    continue;
                }
                let sx = x + i - r;
                // y + j - r in [0, w)  <=>  y in [r - j, w + r - j)
                let y_lo = r.saturating_sub(j);
                let y_hi = (w + r).saturating_sub(j).min(w);
                if y_lo >= y_hi {
                    continue;
                }
                let s0 = sx * w + y_lo + j - r;
                let d_row = &mut dst[x * w + y_lo..x * w + y_hi];
                let s_row = &src[s0..s0 + (y_hi - y_lo)];
                for (d, s) in d_row.iter_mut().zip(s_row) {
                    *d += s * kv;
                }
            }
        }
    }
    Ok(out)
}

/// Multi-channel, single-kernel convolution: the sum over channels of
/// [`conv2d_scsk`]. `kernel` must hold exactly one kernel.
pub fn conv_mcsk(input: &Tensor3, kernel: &KernelSet) -> Result<Matrix> {
    if kernel.count() != 1 {
        return Err(Error::InvalidArgument(format!(
            "conv_mcsk takes a single kernel, got {}",
            kernel.count()
        )));
    }
    if input.channels() != kernel.channels() {
        return Err(Error::ChannelMismatch {
            input: input.channels(),
            kernel: kernel.channels(),
        });
    }
    let mut acc = Matrix::zeros(input.height(), input.width())?;
    for c in 0..input.channels() {
        let plane = conv2d_scsk(&input.plane(c), &kernel.plane(0, c))?;
        for (a, v) in acc.data_mut().iter_mut().zip(plane.data()) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Multi-kernel convolution as the concatenation of `M` [`conv_mcsk`] planes.
pub fn conv_mcmk_sum(p: &ConvProblem) -> Result<Tensor3> {
    let kernels = p.kernels();
    let planes = (0..kernels.count())
        .map(|m| conv_mcsk(p.input(), &kernels.select(m)))
        .collect::<Result<Vec<_>>>()?;
    Tensor3::from_planes(&planes)
}

/// The fused six-deep loop nest (pixel row, pixel column, kernel, tap row,
/// tap column, channel) over a CHW input and MKKC kernels.
pub fn conv_mcmk_loopnest(p: &ConvProblem) -> Result<Tensor3> {
    let kernels = p.kernels();
    if kernels.layout() != KernelLayout::Mkkc {
        return Err(Error::WrongLayout {
            expected: KernelLayout::Mkkc.name(),
            found: kernels.layout().name(),
        });
    }
    let input = p.input().in_layout(Layout::Chw);
    let (c_n, h_n, w_n) = (input.channels(), input.height(), input.width());
    let (m_n, k) = (kernels.count(), kernels.size());
    let r = k / 2;
    let src = input.data();
    let ker = kernels.data();
    let plane = h_n * w_n;
    let mut out = vec![0.0f32; m_n * plane];

    for h in 0..h_n {
        let (xlo, xhi) = tap_range(h, h_n, k);
        for w in 0..w_n {
            let (ylo, yhi) = tap_range(w, w_n, k);
            for o in 0..m_n {
                let mut sum = 0.0f32;
                for x in xlo..xhi {
                    let row = h + x - r;
                    for y in ylo..yhi {
                        let col = w + y - r;
                        let kbase = ((o * k + x) * k + y) * c_n;
                        for i in 0..c_n {
                            sum += src[i * plane + row * w_n + col] * ker[kbase + i];
                        }
                    }
                }
                out[o * plane + h * w_n + w] = sum;
            }
        }
    }
    Tensor3::new(m_n, h_n, w_n, Layout::Chw, out)
}

/// Per-element bound on the rounding error of any f32 evaluation order of
/// the convolution sum: `gamma_n * sum |in| * |ker|` with `n = k^2 * (C + 1)`
/// and `gamma_n = n u / (1 - n u)`, `u = 2^-24`.
///
/// Two correct f32 methods can differ by at most twice this bound.
pub fn rounding_error_bound(p: &ConvProblem) -> Result<Tensor3> {
    let abs_input = Tensor3::new(
        p.channels(),
        p.height(),
        p.width(),
        p.input().layout(),
        p.input().data().iter().map(|v| v.abs()).collect(),
    )?;
    let ks = p.kernels();
    let abs_kernels = KernelSet::new(
        ks.count(),
        ks.size(),
        ks.channels(),
        ks.layout(),
        ks.data().iter().map(|v| v.abs()).collect(),
    )?;
    let magnitude = conv_mcmk_sum(&ConvProblem::new(abs_input, abs_kernels)?)?;
    let n = (ks.size() * ks.size() * (ks.channels() + 1)) as f64;
    let u = f64::from(f32::EPSILON) / 2.0;
    // Slack for the rounding inside `magnitude` itself.
    let gamma = (n * u / (1.0 - n * u) * 1.01) as f32;
    Ok(magnitude.scaled(gamma))
}
