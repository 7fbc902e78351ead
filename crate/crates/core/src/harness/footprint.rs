//! Closed-form memory footprints per method. Element counts are exact; bytes
//! are `4 * elements`.

use crate::error::{Error, Result};
use crate::harness::{LayerConfig, Method};

pub const ELEMENT_BYTES: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Footprint {
    pub input_elements: u64,
    pub kernel_elements: u64,
    pub intermediate_elements: u64,
    pub output_elements: u64,
    /// Elements of the input-side GEMM operand: the patch matrix for
    /// im2col/im2row, the input itself for the replication-free methods.
    pub input_operand_elements: u64,
}

impl Footprint {
    pub fn input_bytes(&self) -> u64 {
        self.input_elements * ELEMENT_BYTES
    }

    pub fn kernel_bytes(&self) -> u64 {
        self.kernel_elements * ELEMENT_BYTES
    }

    pub fn intermediate_bytes(&self) -> u64 {
        self.intermediate_elements * ELEMENT_BYTES
    }

    pub fn output_bytes(&self) -> u64 {
        self.output_elements * ELEMENT_BYTES
    }

    pub fn total_bytes(&self) -> u64 {
        self.input_bytes() + self.kernel_bytes() + self.intermediate_bytes() + self.output_bytes()
    }
}

fn product(layer: &LayerConfig, factors: &[usize]) -> Result<u64> {
    factors
        .iter()
        .try_fold(1u64, |acc, &f| acc.checked_mul(f as u64))
        .ok_or_else(|| Error::InvalidArgument(format!("footprint of layer {} overflows u64", layer.name)))
}

/// Footprint of `method` on `layer`; pure arithmetic, nothing is allocated.
pub fn footprint(layer: &LayerConfig, method: Method) -> Result<Footprint> {
    let (c, h, w, m, k) = (
        layer.channels,
        layer.height,
        layer.width,
        layer.kernel_count,
        layer.kernel_size,
    );
    let input = product(layer, &[c, h, w])?;
    let kernels = product(layer, &[m, k, k, c])?;
    let output = product(layer, &[m, h, w])?;
    let (intermediate, operand) = match method {
        Method::DirectSum | Method::DirectLoopnest => (0, input),
        Method::Im2col | Method::Im2row => {
            let patches = product(layer, &[k, k, c, h, w])?;
            (patches, patches)
        }
        Method::Kn2row | Method::Kn2col | Method::Conv1x1 => (product(layer, &[k, k, m, h, w])?, input),
    };
    Ok(Footprint {
        input_elements: input,
        kernel_elements: kernels,
        intermediate_elements: intermediate,
        output_elements: output,
        input_operand_elements: operand,
    })
}
