//! Browser bindings for the convlab convolution methods.
//!
//! The plain functions ([`run`], [`footprint_table`], [`taps`]) are ordinary
//! Rust and are what the native tests exercise; the `#[wasm_bindgen]`
//! wrappers only convert errors for JavaScript.

use convlab::conv::kn2::kn2row_intermediate;
use convlab::harness::footprint::footprint;
use convlab::harness::LayerConfig;
use convlab::{max_abs_diff, ConvProblem, GemmBackend, Method, Result};
use wasm_bindgen::prelude::*;

/// One method's output next to the oracle's.
#[wasm_bindgen]
pub struct RunOutput {
    output: Vec<f32>,
    oracle: Vec<f32>,
    max_abs_diff: f32,
}

#[wasm_bindgen]
impl RunOutput {
    /// `M x H x W` output, planes concatenated.
    #[wasm_bindgen(getter)]
    pub fn output(&self) -> Vec<f32> {
        self.output.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn oracle(&self) -> Vec<f32> {
        self.oracle.clone()
    }

    #[wasm_bindgen(getter, js_name = maxAbsDiff)]
    pub fn max_abs_diff(&self) -> f32 {
        self.max_abs_diff
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_count: usize,
    pub kernel_size: usize,
}

impl Shape {
    fn problem(&self, seed: u64) -> Result<ConvProblem> {
        ConvProblem::random(
            self.channels,
            self.height,
            self.width,
            self.kernel_count,
            self.kernel_size,
            seed,
        )
    }

    fn layer(&self) -> LayerConfig {
        LayerConfig::new(
            "demo",
            self.channels,
            self.height,
            self.width,
            self.kernel_count,
            self.kernel_size,
        )
    }
}

pub fn run(method: &str, shape: Shape, seed: u64) -> Result<RunOutput> {
    let method: Method = method.parse()?;
    let p = shape.problem(seed)?;
    let gemm = GemmBackend::blocked();
    let oracle = Method::DirectSum.run(&p, &gemm)?;
    let output = method.run(&p, &gemm)?;
    Ok(RunOutput {
        max_abs_diff: max_abs_diff(&output, &oracle)?,
        output: output.into_data(),
        oracle: oracle.into_data(),
    })
}

/// `method,intermediate_bytes,input_operand_bytes,total_bytes` lines for the
/// methods applicable to `shape`.
pub fn footprint_table(shape: Shape) -> Result<String> {
    let layer = shape.layer();
    let mut text = String::from("method,intermediate_bytes,input_operand_bytes,total_bytes\n");
    for method in Method::ALL.into_iter().filter(|m| m.applies_to(shape.kernel_size)) {
        let f = footprint(&layer, method)?;
        text.push_str(&format!(
            "{},{},{},{}\n",
            method,
            f.intermediate_bytes(),
            f.input_operand_elements * convlab::harness::footprint::ELEMENT_BYTES,
            f.total_bytes()
        ));
    }
    Ok(text)
}

/// The `k^2` unshifted kn2row tap planes of kernel `kernel`, each `H x W`,
/// concatenated in `(i, j)` row-major order.
pub fn taps(shape: Shape, seed: u64, kernel: usize) -> Result<Vec<f32>> {
    if kernel >= shape.kernel_count {
        return Err(convlab::Error::InvalidArgument(format!(
            "kernel {kernel} out of range for M={}",
            shape.kernel_count
        )));
    }
    let p = shape.problem(seed)?;
    let inter = kn2row_intermediate(&p, &GemmBackend::blocked())?;
    let k = shape.kernel_size;
    let mut planes = Vec::with_capacity(k * k * shape.height * shape.width);
    for i in 0..k {
        for j in 0..k {
            planes.extend_from_slice(inter.tap_block(i, j).row(kernel));
        }
    }
    Ok(planes)
}

fn js(e: convlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn shape(channels: usize, height: usize, width: usize, kernel_count: usize, kernel_size: usize) -> Shape {
    Shape {
        channels,
        height,
        width,
        kernel_count,
        kernel_size,
    }
}

#[wasm_bindgen(js_name = runMethod)]
pub fn run_method(
    method: &str,
    channels: usize,
    height: usize,
    width: usize,
    kernel_count: usize,
    kernel_size: usize,
    seed: u32,
) -> std::result::Result<RunOutput, JsError> {
    run(
        method,
        shape(channels, height, width, kernel_count, kernel_size),
        seed.into(),
    )
    .map_err(js)
}

#[wasm_bindgen(js_name = footprints)]
pub fn footprints(
    channels: usize,
    height: usize,
    width: usize,
    kernel_count: usize,
    kernel_size: usize,
) -> std::result::Result<String, JsError> {
    footprint_table(shape(channels, height, width, kernel_count, kernel_size)).map_err(js)
}

#[wasm_bindgen(js_name = kn2rowTaps)]
pub fn kn2row_taps(
    channels: usize,
    height: usize,
    width: usize,
    kernel_count: usize,
    kernel_size: usize,
    seed: u32,
    kernel: usize,
) -> std::result::Result<Vec<f32>, JsError> {
    taps(
        shape(channels, height, width, kernel_count, kernel_size),
        seed.into(),
        kernel,
    )
    .map_err(js)
}
