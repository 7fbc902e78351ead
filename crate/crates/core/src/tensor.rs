//! Dense containers: row-major [`Matrix`], 3D [`Tensor3`] with CHW or HWC
//! storage, and 4D [`KernelSet`] with MKKC or MCKK storage.
//!
//! All element access goes through the logical coordinates; the layout only
//! decides the flat offset.

use std::borrow::Cow;
use std::fmt;

use crate::error::{Error, Result};
use crate::rng;

fn positive(value: usize, what: &'static str) -> Result<()> {
    if value == 0 {
        Err(Error::ZeroDimension(what))
    } else {
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DataLength { expected, found })
    } else {
        Ok(())
    }
}

/// Dense row-major matrix of `f32`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        positive(rows, "rows")?;
        positive(cols, "cols")?;
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    /// Matrix filled from the deterministic stream `seed` in row-major order.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        Self::new(rows, cols, rng::fill(rows * cols, seed))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        positive(rows, "rows")?;
        positive(cols, "cols")?;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.rows && c < self.cols);
        r * self.cols + c
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[self.offset(r, c)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        let o = self.offset(r, c);
        self.data[o] = v;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.data.iter().take(16)).finish()
    }
}

/// Storage order of a [`Tensor3`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// `offset(c, h, w) = (c * H + h) * W + w`
    Chw,
    /// `offset(c, h, w) = (h * W + w) * C + c`
    Hwc,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Chw => "CHW",
            Layout::Hwc => "HWC",
        }
    }
}

/// Dense 3D tensor of `channels x height x width` values.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    layout: Layout,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, layout: Layout, data: Vec<f32>) -> Result<Self> {
        positive(channels, "channels")?;
        positive(height, "height")?;
        positive(width, "width")?;
        check_len(channels * height * width, data.len())?;
        Ok(Self {
            channels,
            height,
            width,
            layout,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, layout: Layout) -> Result<Self> {
        Self::new(channels, height, width, layout, vec![0.0; channels * height * width])
    }

    /// Tensor filled from the deterministic stream `seed` in flat storage order.
    pub fn random(channels: usize, height: usize, width: usize, layout: Layout, seed: u64) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            layout,
            rng::fill(channels * height * width, seed),
        )
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        layout: Layout,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut t = Self::zeros(channels, height, width, layout)?;
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    t.set(c, h, w, f(c, h, w));
                }
            }
        }
        Ok(t)
    }

    /// Builds a CHW tensor by stacking equally sized planes.
    pub fn from_planes(planes: &[Matrix]) -> Result<Self> {
        let first = planes.first().ok_or(Error::ZeroDimension("channels"))?;
        let (height, width) = (first.rows(), first.cols());
        let mut data = Vec::with_capacity(planes.len() * height * width);
        for p in planes {
            if p.rows() != height || p.cols() != width {
                return Err(Error::ShapeMismatch {
                    left: format!("{height}x{width}"),
                    right: format!("{}x{}", p.rows(), p.cols()),
                });
            }
            data.extend_from_slice(p.data());
        }
        Self::new(planes.len(), height, width, Layout::Chw, data)
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

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(c < self.channels && h < self.height && w < self.width);
        match self.layout {
            Layout::Chw => (c * self.height + h) * self.width + w,
            Layout::Hwc => (h * self.width + w) * self.channels + c,
        }
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.offset(c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, h: usize, w: usize, v: f32) {
        let o = self.offset(c, h, w);
        self.data[o] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Copy of `self` stored in `target` layout.
    pub fn to_layout(&self, target: Layout) -> Tensor3 {
        if target == self.layout {
            return self.clone();
        }
        let (c_n, h_n, w_n) = (self.channels, self.height, self.width);
        let plane = h_n * w_n;
        let mut data = vec![0.0; self.data.len()];
        match target {
            Layout::Hwc => {
                for c in 0..c_n {
                    for p in 0..plane {
                        data[p * c_n + c] = self.data[c * plane + p];
                    }
                }
            }
            Layout::Chw => {
                for p in 0..plane {
                    for c in 0..c_n {
                        data[c * plane + p] = self.data[p * c_n + c];
                    }
                }
            }
        }
        Tensor3 {
            layout: target,
            data,
            ..*self
        }
    }

    /// Borrows `self` in `target` layout, converting only when needed.
    pub fn in_layout(&self, target: Layout) -> Cow<'_, Tensor3> {
        if self.layout == target {
            Cow::Borrowed(self)
        } else {
            Cow::Owned(self.to_layout(target))
        }
    }

    /// Channel `c` as an `H x W` matrix.
    pub fn plane(&self, c: usize) -> Matrix {
        assert!(c < self.channels, "channel {c} out of range");
        let data = match self.layout {
            Layout::Chw => {
                let plane = self.height * self.width;
                self.data[c * plane..(c + 1) * plane].to_vec()
            }
            Layout::Hwc => self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        };
        Matrix {
            rows: self.height,
            cols: self.width,
            data,
        }
    }

    pub fn scaled(&self, alpha: f32) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|v| v * alpha).collect(),
            ..*self
        }
    }
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor3 {}x{}x{} {} ",
            self.channels,
            self.height,
            self.width,
            self.layout.name()
        )?;
        f.debug_list().entries(self.data.iter().take(16)).finish()
    }
}

/// Storage order of a [`KernelSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelLayout {
    /// `offset(m, i, j, c) = ((m * k + i) * k + j) * C + c`; channel innermost.
    Mkkc,
    /// `offset(m, i, j, c) = ((m * C + c) * k + i) * k + j`; one `k x k` plane per channel.
    Mckk,
}

impl KernelLayout {
    pub fn name(self) -> &'static str {
        match self {
            KernelLayout::Mkkc => "MKKC",
            KernelLayout::Mckk => "MCKK",
        }
    }
}

/// `M` square kernels of odd size `k`, each with `C` channels.
#[derive(Clone, PartialEq)]
pub struct KernelSet {
    count: usize,
    size: usize,
    channels: usize,
    layout: KernelLayout,
    data: Vec<f32>,
}

impl KernelSet {
    pub fn new(count: usize, size: usize, channels: usize, layout: KernelLayout, data: Vec<f32>) -> Result<Self> {
        positive(count, "kernel count")?;
        positive(size, "kernel size")?;
        positive(channels, "channels")?;
        if size.is_multiple_of(2) {
            return Err(Error::EvenKernel(size));
        }
        check_len(count * size * size * channels, data.len())?;
        Ok(Self {
            count,
            size,
            channels,
            layout,
            data,
        })
    }

    pub fn zeros(count: usize, size: usize, channels: usize, layout: KernelLayout) -> Result<Self> {
        Self::new(count, size, channels, layout, vec![0.0; count * size * size * channels])
    }

    /// Kernels filled from the deterministic stream `seed` in flat storage order.
    pub fn random(count: usize, size: usize, channels: usize, layout: KernelLayout, seed: u64) -> Result<Self> {
        let len = count * size * size * channels;
        Self::new(count, size, channels, layout, rng::fill(len, seed))
    }

    pub fn from_fn(
        count: usize,
        size: usize,
        channels: usize,
        layout: KernelLayout,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut ks = Self::zeros(count, size, channels, layout)?;
        for m in 0..count {
            for i in 0..size {
                for j in 0..size {
                    for c in 0..channels {
                        ks.set(m, i, j, c, f(m, i, j, c));
                    }
                }
            }
        }
        Ok(ks)
    }

    /// `M == C` kernels with a 1 at the center tap of channel `m` of kernel
    /// `m`; convolving with them reproduces the input.
    pub fn delta(channels: usize, size: usize, layout: KernelLayout) -> Result<Self> {
        let r = size / 2;
        Self::from_fn(channels, size, channels, layout, |m, i, j, c| {
            if m == c && i == r && j == r {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn layout(&self) -> KernelLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, m: usize, i: usize, j: usize, c: usize) -> usize {
        debug_assert!(m < self.count && i < self.size && j < self.size && c < self.channels);
        let k = self.size;
        match self.layout {
            KernelLayout::Mkkc => ((m * k + i) * k + j) * self.channels + c,
            KernelLayout::Mckk => ((m * self.channels + c) * k + i) * k + j,
        }
    }

    #[inline]
    pub fn get(&self, m: usize, i: usize, j: usize, c: usize) -> f32 {
        self.data[self.offset(m, i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, i: usize, j: usize, c: usize, v: f32) {
        let o = self.offset(m, i, j, c);
        self.data[o] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_layout(&self, target: KernelLayout) -> KernelSet {
        if target == self.layout {
            return self.clone();
        }
        let mut out = KernelSet {
            layout: target,
            data: vec![0.0; self.data.len()],
            ..*self
        };
        for m in 0..self.count {
            for i in 0..self.size {
                for j in 0..self.size {
                    for c in 0..self.channels {
                        out.set(m, i, j, c, self.get(m, i, j, c));
                    }
                }
            }
        }
        out
    }

    pub fn in_layout(&self, target: KernelLayout) -> Cow<'_, KernelSet> {
        if self.layout == target {
            Cow::Borrowed(self)
        } else {
            Cow::Owned(self.to_layout(target))
        }
    }

    /// Kernel `m` alone, as a single-kernel set in the same layout.
    pub fn select(&self, m: usize) -> KernelSet {
        assert!(m < self.count, "kernel {m} out of range");
        let per = self.size * self.size * self.channels;
        // Both layouts keep the kernel index outermost.
        KernelSet {
            count: 1,
            data: self.data[m * per..(m + 1) * per].to_vec(),
            ..*self
        }
    }

    /// Channel `c` of kernel `m` as a `k x k` matrix.
    pub fn plane(&self, m: usize, c: usize) -> Matrix {
        let k = self.size;
        let mut data = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                data.push(self.get(m, i, j, c));
            }
        }
        Matrix { rows: k, cols: k, data }
    }
}

impl fmt::Debug for KernelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "KernelSet {}x{}x{}x{} {} ",
            self.count,
            self.size,
            self.size,
            self.channels,
            self.layout.name()
        )?;
        f.debug_list().entries(self.data.iter().take(16)).finish()
    }
}

/// Values that can be compared element by element in a canonical order.
pub trait Dense {
    fn shape(&self) -> Vec<usize>;
    fn canonical(&self) -> Cow<'_, [f32]>;
}

impl Dense for Matrix {
    fn shape(&self) -> Vec<usize> {
        vec![self.rows, self.cols]
    }

    fn canonical(&self) -> Cow<'_, [f32]> {
        Cow::Borrowed(&self.data)
    }
}

impl Dense for Tensor3 {
    fn shape(&self) -> Vec<usize> {
        vec![self.channels, self.height, self.width]
    }

    fn canonical(&self) -> Cow<'_, [f32]> {
        match self.layout {
            Layout::Chw => Cow::Borrowed(&self.data),
            Layout::Hwc => Cow::Owned(self.to_layout(Layout::Chw).data),
        }
    }
}

fn same_shape<T: Dense>(a: &T, b: &T) -> Result<()> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(Error::ShapeMismatch {
            left: format!("{sa:?}"),
            right: format!("{sb:?}"),
        });
    }
    Ok(())
}

/// True iff `|a - b| <= abs_tol + rel_tol * |b|` for every element.
///
/// Tensors in different layouts are compared by logical coordinates. NaN
/// never compares close.
pub fn allclose<T: Dense>(a: &T, b: &T, rel_tol: f32, abs_tol: f32) -> Result<bool> {
    same_shape(a, b)?;
    let (a, b) = (a.canonical(), b.canonical());
    Ok(a.iter()
        .zip(b.iter())
        .all(|(&x, &y)| (x - y).abs() <= abs_tol + rel_tol * y.abs()))
}

/// Largest `|a - b|` over all elements (NaN if any difference is NaN).
pub fn max_abs_diff<T: Dense>(a: &T, b: &T) -> Result<f32> {
    same_shape(a, b)?;
    let (a, b) = (a.canonical(), b.canonical());
    Ok(a.iter().zip(b.iter()).fold(0.0f32, |acc, (&x, &y)| {
        let d = (x - y).abs();
        if d.is_nan() || acc.is_nan() {
            f32::NAN
        } else {
            acc.max(d)
        }
    }))
}

/// True iff `|a - b| <= bound` element-wise, for a per-element `bound` of
/// the same shape.
pub fn within_bound<T: Dense>(a: &T, b: &T, bound: &T) -> Result<bool> {
    same_shape(a, b)?;
    same_shape(a, bound)?;
    let (a, b, bound) = (a.canonical(), b.canonical(), bound.canonical());
    Ok(a.iter()
        .zip(b.iter())
        .zip(bound.iter())
        .all(|((&x, &y), &e)| (x - y).abs() <= e))
}

/// True iff both hold the same shape and bit-identical canonical values.
pub fn bitwise_eq<T: Dense>(a: &T, b: &T) -> bool {
    a.shape() == b.shape()
        && a.canonical()
            .iter()
            .zip(b.canonical().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}
