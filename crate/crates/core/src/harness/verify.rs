use crate::conv::reference::rounding_error_bound;
use crate::error::Result;
use crate::gemm::Gemm;
use crate::harness::{LayerConfig, Method};
use crate::tensor::{allclose, max_abs_diff, within_bound};

pub const VERIFY_REL_TOL: f32 = 1e-5;
pub const VERIFY_ABS_TOL: f32 = 1e-6;

/// Pass criterion for a method's output against the oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    /// `|out - oracle| <= abs + rel * |oracle|`.
    AllClose { rel: f32, abs: f32 },
    /// `|out - oracle| <= 2 * rounding_error_bound`: both sides are valid
    /// f32 evaluations of the same sum.
    ErrorBound,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::AllClose {
            rel: VERIFY_REL_TOL,
            abs: VERIFY_ABS_TOL,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub tolerance: Tolerance,
    /// Method to run through [`Method::run_corrupted`].
    pub fault: Option<Method>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass {
        max_abs_diff: f32,
    },
    Fail {
        max_abs_diff: f32,
    },
    /// The method raised an error instead of producing an output.
    Error(String),
    /// The method does not apply to this layer (conv1x1 with k > 1).
    Skipped,
}

impl Outcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::Fail { .. } | Outcome::Error(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass { .. } => "PASS",
            Outcome::Fail { .. } => "FAIL",
            Outcome::Error(_) => "ERROR",
            Outcome::Skipped => "SKIP",
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub layer: LayerConfig,
    pub results: Vec<(Method, Outcome)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.results.iter().any(|(_, o)| o.is_failure())
    }

    pub fn outcome(&self, method: Method) -> Option<&Outcome> {
        self.results.iter().find(|(m, _)| *m == method).map(|(_, o)| o)
    }
}

/// Checks each method against the `direct-sum` oracle on deterministic data
/// at the default allclose tolerance.
pub fn verify(layer: &LayerConfig, methods: &[Method], seed: u64, gemm: &dyn Gemm) -> Result<VerifyReport> {
    verify_with(layer, methods, seed, gemm, &VerifyOptions::default())
}

/// [`verify`] with `faulty` run through [`Method::run_corrupted`].
pub fn verify_with_fault(
    layer: &LayerConfig,
    methods: &[Method],
    seed: u64,
    gemm: &dyn Gemm,
    faulty: Method,
) -> Result<VerifyReport> {
    let opts = VerifyOptions {
        fault: Some(faulty),
        ..VerifyOptions::default()
    };
    verify_with(layer, methods, seed, gemm, &opts)
}

pub fn verify_with(
    layer: &LayerConfig,
    methods: &[Method],
    seed: u64,
    gemm: &dyn Gemm,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let problem = layer.problem(seed)?;
    let oracle = Method::DirectSum.run(&problem, gemm)?;
    let bound = match opts.tolerance {
        Tolerance::ErrorBound => Some(rounding_error_bound(&problem)?.scaled(2.0)),
        Tolerance::AllClose { .. } => None,
    };
    let mut results = Vec::with_capacity(methods.len());
    for &method in methods {
        if !method.applies_to(layer.kernel_size) {
            results.push((method, Outcome::Skipped));
            continue;
        }
        let run = if opts.fault == Some(method) {
            method.run_corrupted(&problem, gemm)
        } else {
            method.run(&problem, gemm)
        };
        let outcome = match run {
            Err(e) => Outcome::Error(e.to_string()),
            Ok(out) => {
                let diff = max_abs_diff(&out, &oracle)?;
                let ok = match (opts.tolerance, &bound) {
                    (Tolerance::AllClose { rel, abs }, _) => allclose(&out, &oracle, rel, abs)?,
                    (Tolerance::ErrorBound, Some(b)) => within_bound(&out, &oracle, b)?,
                    (Tolerance::ErrorBound, None) => unreachable!(),
                };
                if ok {
                    Outcome::Pass { max_abs_diff: diff }
                } else {
                    Outcome::Fail { max_abs_diff: diff }
                }
            }
        };
        results.push((method, outcome));
    }
    Ok(VerifyReport {
        layer: layer.clone(),
        results,
    })
}
