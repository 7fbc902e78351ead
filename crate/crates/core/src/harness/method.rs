use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::conv::im2::{conv_im2col, conv_im2row};
use crate::conv::kn2::{conv_1x1, kn2col_intermediate, kn2row_intermediate, shift_add, shift_add_cols};
use crate::conv::reference::{conv_mcmk_loopnest, conv_mcmk_sum};
use crate::conv::ConvProblem;
use crate::error::{Error, Result};
use crate::gemm::Gemm;
use crate::tensor::{KernelLayout, Layout, Tensor3};

/// A convolution method selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    DirectSum,
    DirectLoopnest,
    Im2col,
    Im2row,
    Kn2row,
    Kn2col,
    Conv1x1,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::DirectSum,
        Method::DirectLoopnest,
        Method::Im2col,
        Method::Im2row,
        Method::Kn2row,
        Method::Kn2col,
        Method::Conv1x1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DirectSum => "direct-sum",
            Method::DirectLoopnest => "direct-loopnest",
            Method::Im2col => "im2col",
            Method::Im2row => "im2row",
            Method::Kn2row => "kn2row",
            Method::Kn2col => "kn2col",
            Method::Conv1x1 => "conv1x1",
        }
    }

    pub fn applies_to(self, kernel_size: usize) -> bool {
        self != Method::Conv1x1 || kernel_size == 1
    }

    pub fn uses_gemm(self) -> bool {
        !matches!(self, Method::DirectSum | Method::DirectLoopnest)
    }

    /// Parses a comma-separated list such as `im2col,kn2row`; `all` expands
    /// to every method.
    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "all" {
                out.extend(Method::ALL);
            } else {
                out.push(item.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Runs the method end to end. `kn2row` and `kn2col` take the `conv1x1`
    /// path when `k == 1`.
    pub fn run(self, p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
        self.run_inner(p, gemm, false)
    }

    /// Like [`Method::run`], but adds 1.0 to one element of the method's
    /// intermediate (kn2row/kn2col) or output (all others). Used to check
    /// that verification reports failures.
    pub fn run_corrupted(self, p: &ConvProblem, gemm: &dyn Gemm) -> Result<Tensor3> {
        self.run_inner(p, gemm, true)
    }

    fn run_inner(self, p: &ConvProblem, gemm: &dyn Gemm, corrupt: bool) -> Result<Tensor3> {
        let k = p.kernel_size();
        let mut out = match self {
            Method::DirectSum => conv_mcmk_sum(p)?,
            Method::DirectLoopnest => {
                let kernels = p.kernels().in_layout(KernelLayout::Mkkc);
                let q = ConvProblem::new(p.input().clone(), kernels.into_owned())?;
                conv_mcmk_loopnest(&q)?
            }
            Method::Im2col => conv_im2col(p, gemm)?,
            Method::Im2row => conv_im2row(p, gemm)?,
            Method::Conv1x1 => conv_1x1(p.input(), p.kernels(), gemm)?,
            Method::Kn2row | Method::Kn2col if k == 1 && !corrupt => conv_1x1(p.input(), p.kernels(), gemm)?,
            Method::Kn2row => {
                let mut inter = kn2row_intermediate(p, gemm)?;
                if corrupt {
                    inter.matrix_mut().data_mut()[0] += 1.0;
                }
                let out = shift_add(&inter)?;
                return Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Chw, out.into_data());
            }
            Method::Kn2col => {
                let mut inter = kn2col_intermediate(p, gemm)?;
                if corrupt {
                    inter.matrix_mut().data_mut()[0] += 1.0;
                }
                let out = shift_add_cols(&inter)?;
                let hwc = Tensor3::new(p.kernel_count(), p.height(), p.width(), Layout::Hwc, out.into_data())?;
                return Ok(hwc.to_layout(Layout::Chw));
            }
        };
        if corrupt {
            out.data_mut()[0] += 1.0;
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
