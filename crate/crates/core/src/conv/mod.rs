//! Multi-channel multi-kernel convolution, unstrided and same-padded.

pub mod im2;
pub mod kn2;
pub mod reference;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{KernelLayout, KernelSet, Layout, Tensor3};

/// One input tensor `C x H x W` and `M` kernels `k x k x C`. The output is
/// always `M x H x W`.
#[derive(Clone, Debug)]
pub struct ConvProblem {
    input: Tensor3,
    kernels: KernelSet,
}

impl ConvProblem {
    pub fn new(input: Tensor3, kernels: KernelSet) -> Result<Self> {
        if input.channels() != kernels.channels() {
            return Err(Error::ChannelMismatch {
                input: input.channels(),
                kernel: kernels.channels(),
            });
        }
        // KernelSet already guarantees odd k >= 1, and a padded extent of
        // H + 2 * (k / 2) >= k always holds for H >= 1.
        Ok(Self { input, kernels })
    }

    /// CHW input from stream `substream(seed, 0)` and MKKC kernels from
    /// `substream(seed, 1)`.
    pub fn random(
        channels: usize,
        height: usize,
        width: usize,
        kernel_count: usize,
        kernel_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let input = Tensor3::random(channels, height, width, Layout::Chw, rng::substream(seed, 0))?;
        let kernels = KernelSet::random(
            kernel_count,
            kernel_size,
            channels,
            KernelLayout::Mkkc,
            rng::substream(seed, 1),
        )?;
        Self::new(input, kernels)
    }

    pub fn input(&self) -> &Tensor3 {
        &self.input
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn channels(&self) -> usize {
        self.input.channels()
    }

    pub fn height(&self) -> usize {
        self.input.height()
    }

    pub fn width(&self) -> usize {
        self.input.width()
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.count()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.size()
    }
}
