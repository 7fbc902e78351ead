use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gemm::Gemm;
use crate::harness::footprint::footprint;
use crate::harness::{LayerConfig, Method};
use crate::tensor::Tensor3;

pub const DEFAULT_RUNS: usize = 25;

/// One CSV row: timing statistics and footprint of a (layer, method) pair.
///
/// Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub layer: String,
    pub method: Method,
    pub runs: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub stddev_s: f64,
    pub input_bytes: u64,
    pub kernel_bytes: u64,
    pub intermediate_bytes: u64,
    pub output_bytes: u64,
}

/// A benchmark's result along with the raw per-run timings and the output
/// of the last run.
#[derive(Clone, Debug)]
pub struct BenchRun {
    pub result: BenchResult,
    pub samples: Vec<f64>,
    pub output: Tensor3,
}

/// Mean, minimum and population standard deviation.
pub fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    // Rounding can put the mean a hair below a constant series' minimum.
    (mean.max(min), min, var.sqrt())
}

/// One untimed warm-up run followed by `runs` timed runs of the full method
/// (patch or reorder construction and post-passes included, input
/// generation excluded).
pub fn benchmark(layer: &LayerConfig, method: Method, runs: usize, gemm: &dyn Gemm, seed: u64) -> Result<BenchRun> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    if !method.applies_to(layer.kernel_size) {
        return Err(Error::NotApplicable {
            method: method.name(),
            k: layer.kernel_size,
        });
    }
    let fp = footprint(layer, method)?;
    reserve_probe(layer, fp.total_bytes())?;

    let problem = layer.problem(seed)?;
    let mut output = method.run(&problem, gemm)?;
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        output = method.run(&problem, gemm)?;
        samples.push(start.elapsed().as_secs_f64());
    }
    let (mean_s, min_s, stddev_s) = summarize(&samples);
    Ok(BenchRun {
        result: BenchResult {
            layer: layer.name.clone(),
            method,
            runs,
            mean_s,
            min_s,
            stddev_s,
            input_bytes: fp.input_bytes(),
            kernel_bytes: fp.kernel_bytes(),
            intermediate_bytes: fp.intermediate_bytes(),
            output_bytes: fp.output_bytes(),
        },
        samples,
        output,
    })
}

fn reserve_probe(layer: &LayerConfig, bytes: u64) -> Result<()> {
    let alloc_err = || Error::Allocation {
        layer: layer.name.clone(),
        bytes,
    };
    let len = usize::try_from(bytes).map_err(|_| alloc_err())?;
    let mut probe: Vec<u8> = Vec::new();
    probe.try_reserve_exact(len).map_err(|_| alloc_err())
}
