//! Replication-free convolution: 1x1 as one GEMM, and kn2row / kn2col.
//!
//! A `k x k` convolution is the sum of `k^2` shifted 1x1 convolutions, one
//! per tap `(i, j)`. kn2row stacks the `k^2` per-tap `M x C` kernel slices
//! into a `(k^2*M) x C` matrix and multiplies it once with the unreplicated
//! `C x (H*W)` input. The result holds one `M x (H*W)` block per tap, and a
//! shift-add pass sums the blocks into the output. For output pixel `(x, y)`
//! tap `(i, j)` contributes its block's value at `(x + i - k/2, y + j - k/2)`;
//! positions outside the image are dropped, which is the same as zero padding.
//!
//! kn2col is the transposed formulation on an HWC input:
//! `(H*W) x C` times `C x (k^2*M)`.

use crate::conv::reference::tap_range;
use crate::conv::ConvProblem;
use crate::error::{Error, Result};
use crate::gemm::Gemm;
use crate::tensor::{KernelSet, Layout, Matrix, Tensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kn2Orientation {
    /// `(k*k*M) x C` kernel matrix, `(k*k*M) x (H*W)` intermediate.
    Row,
    /// `C x (k*k*M)` kernel matrix, `(H*W) x (k*k*M)` intermediate.
    Col,
}

/// Kernels reordered so that each tap's `M x C` slice is contiguous.
#[derive(Clone, Debug)]
pub struct Kn2KernelMatrix {
    matrix: Matrix,
    orientation: Kn2Orientation,
    kernel_size: usize,
    kernel_count: usize,
    channels: usize,
}

impl Kn2KernelMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn orientation(&self) -> Kn2Orientation {
        self.orientation
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

/// Row `(i*k + j)*M + m` holds the `C` channel values of kernel `m` at tap `(i, j)`.
pub fn kn2row_reorder_kernel(kernels: &KernelSet) -> Kn2KernelMatrix {
    let (m_n, k, c_n) = (kernels.count(), kernels.size(), kernels.channels());
    let mut data = Vec::with_capacity(kernels.len());
    for i in 0..k {
        for j in 0..k {
            for m in 0..m_n {
                data.extend((0..c_n).map(|c| kernels.get(m, i, j, c)));
            }
        }
    }
    Kn2KernelMatrix {
        matrix: Matrix::new(k * k * m_n, c_n, data).expect("kernel set dims are positive"),
        orientation: Kn2Orientation::Row,
        kernel_size: k,
        kernel_count: m_n,
        channels: c_n,
    }
}

/// Transpose of [`kn2row_reorder_kernel`]: `C x (k*k*M)`.
pub fn kn2col_reorder_kernel(kernels: &KernelSet) -> Kn2KernelMatrix {
    let row = kn2row_reorder_kernel(kernels);
    Kn2KernelMatrix {
        matrix: row.matrix.transpose(),
        orientation: Kn2Orientation::Col,
        ..row
    }
}

/// The enlarged GEMM result holding one 1x1-convolution block per tap.
#[derive(Clone, Debug)]
pub struct Kn2Intermediate {
    matrix: Matrix,
    orientation: Kn2Orientation,
    kernel_size: usize,
    kernel_count: usize,
    height: usize,
    width: usize,
}

impl Kn2Intermediate {
    pub fn new(
        matrix: Matrix,
        orientation: Kn2Orientation,
        kernel_size: usize,
        kernel_count: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let taps = kernel_size * kernel_size * kernel_count;
        let pixels = height * width;
        let expected = match orientation {
            Kn2Orientation::Row => (taps, pixels),
            Kn2Orientation::Col => (pixels, taps),
        };
        if kernel_size.is_multiple_of(2) {
            return Err(Error::EvenKernel(kernel_size));
        }
        if (matrix.rows(), matrix.cols()) != expected {
            return Err(Error::ShapeMismatch {
                left: format!("{}x{}", expected.0, expected.1),
                right: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        Ok(Self {
            matrix,
            orientation,
            kernel_size,
            kernel_count,
            height,
            width,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.matrix
    }

    pub fn orientation(&self) -> Kn2Orientation {
        self.orientation
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Unshifted `M x (H*W)` result of tap `(i, j)`, whatever the orientation.
    pub fn tap_block(&self, i: usize, j: usize) -> Matrix {
        let k = self.kernel_size;
        assert!(i < k && j < k, "tap ({i}, {j}) out of range for k={k}");
        let m_n = self.kernel_count;
        let hw = self.height * self.width;
        let base = (i * k + j) * m_n;
        let data = match self.orientation {
            Kn2Orientation::Row => self.matrix.data()[base * hw..(base + m_n) * hw].to_vec(),
            Kn2Orientation::Col => {
                let mut d = vec![0.0; m_n * hw];
                for p in 0..hw {
                    for m in 0..m_n {
                        d[m * hw + p] = self.matrix.get(p, base + m);
                    }
                }
                d
            }
        };
        Matrix::new(m_n, hw, data).expect("block dims are positive")
    }
}

/// Gathers the `k^2` tap blocks of a row-oriented intermediate into the
/// `M x (H*W)` output. Taps are accumulated in `(i, j)` row-major order.
pub fn shift_add(inter: &Kn2Intermediate) -> Result<Matrix> {
    if inter.orientation != Kn2Orientation::Row {
        return Err(Error::InvalidArgument("shift_add expects a kn2row intermediate".into()));
    }
    let (k, m_n, h, w) = (inter.kernel_size, inter.kernel_count, inter.height, inter.width);
    let r = k / 2;
    let hw = h * w;
    let src = inter.matrix.data();
    let mut out = vec![0.0f32; m_n * hw];

    for m in 0..m_n {
        for x in 0..h {
            let (ilo, ihi) = tap_range(x, h, k);
            let d_row = &mut out[m * hw + x * w..m * hw + (x + 1) * w];
            for i in ilo..ihi {
                let sx = x + i - r;
                for j in 0..k {
                    let y_lo = r.saturating_sub(j);
                    let y_hi = (w + r).saturating_sub(j).min(w);
                    if y_lo >= y_hi {
                        continue;
                    }
                    let block = ((i * k + j) * m_n + m) * hw;
                    let s0 = block + sx * w + y_lo + j - r;
                    let s_row = &src[s0..s0 + (y_hi - y_lo)];
                    for (d, s) in d_row[y_lo..y_hi].iter_mut().zip(s_row) {
                        *d += s;
                    }
                }
            }
        }
    }
    Matrix::new(m_n, hw, out)
}

/// Column-oriented shift-add: `(H*W) x (k^2*M)` intermediate to `(H*W) x M`.
pub fn shift_add_cols(inter: &Kn2Intermediate) -> Result<Matrix> {
    if inter.orientation != Kn2Orientation::Col {
        return Err(Error::InvalidArgument(
            "shift_add_cols expects a kn2col intermediate".into(),
        ));
    }
    let (k, m_n, h, w) = (inter.kernel_size, inter.kernel_count, inter.height, inter.width);
    let r = k / 2;
    let taps = k * k * m_n;
    let src = inter.matrix.data();
    let mut out = vec![0.0f32; h * w * m_n];

    for x in 0..h {
        let (ilo, ihi) = tap_range(x, h, k);
        for y in 0..w {
            let (jlo, jhi) = tap_range(y, w, k);
            let d = &mut out[(x * w + y) * m_n..(x * w + y + 1) * m_n];
            for i in ilo..ihi {
                for j in jlo..jhi {
                    let p = (x + i - r) * w + (y + j - r);
                    let s0 = p * taps + (i * k + j) * m_n;
                    for (dv, sv) in d.iter_mut().zip(&src[s0..s0 + m_n]) {
                        *dv += sv;
                    }
                }
            }
        }
    }
    Matrix::new(h * w, m_n, out)
}

fn input_chw_matrix(input: &Tensor3) -> Result<Matrix> {
    let chw = input.in_layout(Layout::Chw);
    Matrix::new(chw.channels(), chw.height() * chw.width(), chw.into_owned().into_data())
}

/// 1x1 convolution as a single `M x C` by `C x (H*W)` GEMM.
pub fn conv_1x1(input: &Tensor3, kernels: &KernelSet, gemm: &dyn Gemm) -> Result<Tensor3> {
    if kernels.size() != 1 {
        return Err(Error::NotApplicable {
            method: "conv1x1",
            k: kernels.size(),
        });
    }
    if input.channels() != kernels.channels() {
        return Err(Error::ChannelMismatch {
            input: input.channels(),
            kernel: kernels.channels(),
        });
    }
    let kmat = kn2row_reorder_kernel(kernels);
    let out = gemm.gemm(kmat.matrix(), &input_chw_matrix(input)?)?;
    Tensor3::new(
        kernels.count(),
        input.height(),
        input.width(),
        Layout::Chw,
        out.into_data(),
    )
}

/// The single kn2row GEMM, before shift-add.
pub fn kn2row_intermediate(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Kn2Intermediate> {
    let kmat = kn2row_reorder_kernel(p.kernels());
    let product = gemm.gemm(kmat.matrix(), &input_chw_matrix(p.input())?)?;
    Kn2Intermediate::new(
        product,
        Kn2Orientation::Row,
        p.kernel_size(),
        p.kernel_count(),
        p.height(),
        p.width(),
    )
}

/// The single kn2col GEMM, before shift-add.
pub fn kn2col_intermediate(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Kn2Intermediate> {
    let kmat = kn2col_reorder_kernel(p.kernels());
    let hwc = p.input().in_layout(Layout::Hwc);
    let input = Matrix::new(p.height() * p.width(), p.channels(), hwc.into_owned().into_data())?;
    let product = gemm.gemm(&input, kmat.matrix())?;
    Kn2Intermediate::new(
        product,
        Kn2Orientation::Col,
        p.kernel_size(),
        p.kernel_count(),
        p.height(),
        p.width(),
    )
}

pub fn conv_kn2row(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
    let out = shift_add(&kn2row_intermediate(p, gemm)?)?;
    Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Chw, out.into_data())
}

pub fn conv_kn2col(p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
    let out = shift_add_cols(&kn2col_intermediate(p, gemm)?)?;
    let hwc = Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Hwc, out.into_data())?;
    Ok(hwc.to_layout(Layout::Chw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::reference::conv_mcmk_sum;
    use crate::gemm::GemmBackend;
    use crate::tensor::{allclose, bitwise_eq, KernelLayout};
    use proptest::prelude::*;

    fn gemm() -> GemmBackend {
        GemmBackend::blocked()
    }

    fn check_reorder(ks: &KernelSet) {
        let k = ks.size();
        let m_n = ks.count();
        let row = kn2row_reorder_kernel(ks);
        let col = kn2col_reorder_kernel(ks);
        assert_eq!((row.matrix().rows(), row.matrix().cols()), (k * k * m_n, ks.channels()));
        assert!(bitwise_eq(&col.matrix().transpose(), row.matrix()));
        let mut seen = 0;
        for m in 0..m_n {
            for i in 0..k {
                for j in 0..k {
                    for c in 0..ks.channels() {
                        assert_eq!(row.matrix().get((i * k + j) * m_n + m, c), ks.get(m, i, j, c));
                        assert_eq!(col.matrix().get(c, (i * k + j) * m_n + m), ks.get(m, i, j, c));
                        seen += 1;
                    }
                }
            }
        }
        assert_eq!(seen, ks.len());
    }

    #[test]
    fn reorder_k1_is_mc_reshape() {
        let ks = KernelSet::random(3, 1, 4, KernelLayout::Mkkc, 1).unwrap();
        let row = kn2row_reorder_kernel(&ks);
        assert_eq!(row.matrix().data(), ks.data());
        assert_eq!(
            (
                kn2col_reorder_kernel(&ks).matrix().rows(),
                kn2col_reorder_kernel(&ks).matrix().cols()
            ),
            (4, 3)
        );
        check_reorder(&ks);
    }

    #[test]
    fn reorder_single_kernel_single_channel() {
        let ks = KernelSet::from_fn(1, 3, 1, KernelLayout::Mkkc, |_, i, j, _| (i * 3 + j) as f32).unwrap();
        let row = kn2row_reorder_kernel(&ks);
        assert_eq!((row.matrix().rows(), row.matrix().cols()), (9, 1));
        assert_eq!(row.matrix().data(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        check_reorder(&ks);
    }

    #[test]
    fn reorder_random_against_offsets() {
        check_reorder(&KernelSet::random(2, 3, 2, KernelLayout::Mkkc, 2).unwrap());
        check_reorder(&KernelSet::random(2, 3, 2, KernelLayout::Mckk, 3).unwrap());
    }

    #[test]
    fn conv1x1_identity_kernel() {
        let input = Tensor3::random(4, 3, 5, Layout::Chw, 4).unwrap();
        let ks = KernelSet::delta(4, 1, KernelLayout::Mkkc).unwrap();
        assert!(bitwise_eq(&conv_1x1(&input, &ks, &gemm()).unwrap(), &input));
    }

    #[test]
    fn conv1x1_single_channel_scales() {
        let input = Tensor3::random(1, 4, 4, Layout::Chw, 5).unwrap();
        let ks = KernelSet::random(3, 1, 1, KernelLayout::Mkkc, 6).unwrap();
        let out = conv_1x1(&input, &ks, &gemm()).unwrap();
        for m in 0..3 {
            let s = ks.get(m, 0, 0, 0);
            for (o, v) in out.plane(m).data().iter().zip(input.data()) {
                assert_eq!(*o, s * v);
            }
        }
    }

    #[test]
    fn conv1x1_rejects_k3() {
        let input = Tensor3::zeros(2, 3, 3, Layout::Chw).unwrap();
        let ks = KernelSet::zeros(1, 3, 2, KernelLayout::Mkkc).unwrap();
        assert!(matches!(
            conv_1x1(&input, &ks, &gemm()),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn conv1x1_random_matches_oracle() {
        let p = ConvProblem::random(64, 7, 7, 32, 1, 7).unwrap();
        let out = conv_1x1(p.input(), p.kernels(), &gemm()).unwrap();
        assert!(allclose(&out, &conv_mcmk_sum(&p).unwrap(), 1e-5, 1e-6).unwrap());
    }

    fn row_intermediate(
        k: usize,
        m: usize,
        h: usize,
        w: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Kn2Intermediate {
        // f(tap, m, pixel)
        let hw = h * w;
        let mat = Matrix::from_fn(k * k * m, hw, |r, p| f(r / m, r % m, p)).unwrap();
        Kn2Intermediate::new(mat, Kn2Orientation::Row, k, m, h, w).unwrap()
    }

    #[test]
    fn shift_add_k1_is_identity() {
        let inter = row_intermediate(1, 3, 4, 5, |_, m, p| (m * 100 + p) as f32);
        let out = shift_add(&inter).unwrap();
        assert_eq!(out.data(), inter.matrix().data());
    }

    #[test]
    fn shift_add_center_block_aligned() {
        let inter = row_intermediate(
            3,
            2,
            4,
            4,
            |tap, m, p| if tap == 4 { (m * 16 + p) as f32 + 0.5 } else { 0.0 },
        );
        let out = shift_add(&inter).unwrap();
        assert_eq!(out, inter.tap_block(1, 1));
    }

    #[test]
    fn shift_add_counts_in_bounds_taps() {
        let inter = row_intermediate(3, 1, 3, 3, |_, _, _| 1.0);
        let out = shift_add(&inter).unwrap();
        assert_eq!(out.get(0, 4), 9.0);
        for corner in [0, 2, 6, 8] {
            assert_eq!(out.get(0, corner), 4.0);
        }
        for edge in [1, 3, 5, 7] {
            assert_eq!(out.get(0, edge), 6.0);
        }
    }

    #[test]
    fn shift_add_reads_offset_positions() {
        // Only tap (0, 0) is nonzero: out(x, y) = R00(x - 1, y - 1).
        let (h, w) = (4, 5);
        let inter = row_intermediate(3, 1, h, w, |tap, _, p| if tap == 0 { (p + 1) as f32 } else { 0.0 });
        let out = shift_add(&inter).unwrap();
        for x in 0..h {
            for y in 0..w {
                let expect = if x >= 1 && y >= 1 {
                    ((x - 1) * w + (y - 1) + 1) as f32
                } else {
                    0.0
                };
                assert_eq!(out.get(0, x * w + y), expect);
            }
        }
    }

    #[test]
    fn intermediate_dims_checked() {
        let mat = Matrix::zeros(9, 10).unwrap();
        assert!(Kn2Intermediate::new(mat.clone(), Kn2Orientation::Row, 3, 1, 2, 5).is_ok());
        assert!(Kn2Intermediate::new(mat.clone(), Kn2Orientation::Row, 3, 1, 3, 5).is_err());
        assert!(Kn2Intermediate::new(mat.clone(), Kn2Orientation::Col, 3, 1, 2, 5).is_err());
        let col = Kn2Intermediate::new(mat.transpose(), Kn2Orientation::Col, 3, 1, 2, 5).unwrap();
        assert!(shift_add(&col).is_err());
        let row = Kn2Intermediate::new(mat, Kn2Orientation::Row, 3, 1, 2, 5).unwrap();
        assert!(shift_add_cols(&row).is_err());
    }

    #[test]
    fn kn2row_k1_bitwise_conv1x1() {
        let p = ConvProblem::random(5, 4, 6, 3, 1, 8).unwrap();
        let a = conv_kn2row(&p, &gemm()).unwrap();
        let b = conv_1x1(p.input(), p.kernels(), &gemm()).unwrap();
        assert!(bitwise_eq(&a, &b));
        let c = conv_kn2col(&p, &gemm()).unwrap();
        assert!(allclose(&c, &b, 1e-6, 0.0).unwrap());
    }

    #[test]
    fn delta_kernels_reproduce_input() {
        let input = Tensor3::random(3, 5, 6, Layout::Chw, 9).unwrap();
        for k in [3, 5] {
            let p = ConvProblem::new(input.clone(), KernelSet::delta(3, k, KernelLayout::Mkkc).unwrap()).unwrap();
            assert!(bitwise_eq(&conv_kn2row(&p, &gemm()).unwrap(), &input));
            assert!(bitwise_eq(&conv_kn2col(&p, &gemm()).unwrap(), &input));
        }
    }

    #[test]
    fn random_problems_match_oracle() {
        for (c, m, h, w, k) in [(3, 4, 6, 5, 3), (3, 4, 6, 5, 5), (16, 8, 13, 13, 3)] {
            let p = ConvProblem::random(c, h, w, m, k, 10).unwrap();
            let oracle = conv_mcmk_sum(&p).unwrap();
            let a = conv_kn2row(&p, &gemm()).unwrap();
            let b = conv_kn2col(&p, &gemm()).unwrap();
            assert!(allclose(&a, &oracle, 1e-5, 1e-6).unwrap(), "kn2row {c} {m} {h} {w} {k}");
            assert!(allclose(&b, &oracle, 1e-5, 1e-6).unwrap(), "kn2col {c} {m} {h} {w} {k}");
            assert!(allclose(&b, &a, 1e-5, 1e-6).unwrap());
        }
    }

    #[test]
    fn intermediate_sizes() {
        let p = ConvProblem::random(3, 5, 7, 4, 3, 11).unwrap();
        assert_eq!(kn2row_intermediate(&p, &gemm()).unwrap().len(), 9 * 4 * 5 * 7);
        assert_eq!(kn2col_intermediate(&p, &gemm()).unwrap().len(), 9 * 4 * 5 * 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tap_blocks_are_1x1_convolutions(
            c in 1usize..5, m in 1usize..4, h in 1usize..7, w in 1usize..7,
            k in prop::sample::select(vec![1usize, 3, 5]), seed: u64,
        ) {
            let p = ConvProblem::random(c, h, w, m, k, seed).unwrap();
            let row = kn2row_intermediate(&p, &gemm()).unwrap();
            let col = kn2col_intermediate(&p, &gemm()).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let slice = KernelSet::from_fn(m, 1, c, KernelLayout::Mkkc, |mm, _, _, cc| p.kernels().get(mm, i, j, cc)).unwrap();
                    let one = conv_1x1(p.input(), &slice, &gemm()).unwrap();
                    let one = Matrix::new(m, h * w, one.into_data()).unwrap();
                    prop_assert!(bitwise_eq(&row.tap_block(i, j), &one));
                    prop_assert!(allclose(&col.tap_block(i, j), &one, 1e-5, 1e-6).unwrap());
                }
            }
        }

        #[test]
        fn boundary_heavy_shapes_match_oracle(
            k in prop::sample::select(vec![3usize, 5, 7]), c in 1usize..4, m in 1usize..4,
            hs in 0usize..8, ws in 0usize..8, seed: u64,
        ) {
            let limit = k / 2 + 1;
            let (h, w) = (hs % limit + 1, ws % limit + 1);
            let p = ConvProblem::random(c, h, w, m, k, seed).unwrap();
            let oracle = conv_mcmk_sum(&p).unwrap();
            prop_assert!(allclose(&conv_kn2row(&p, &gemm()).unwrap(), &oracle, 1e-5, 1e-6).unwrap());
            prop_assert!(allclose(&conv_kn2col(&p, &gemm()).unwrap(), &oracle, 1e-5, 1e-6).unwrap());
        }
    }
}
