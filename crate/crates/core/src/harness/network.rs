//! Network description files: one convolution layer per line,
//! `name C H W M k [stride]`, whitespace separated, `#` starts a comment.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::conv::ConvProblem;
use crate::error::{Error, Result};

/// Shape of one convolution layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerConfig {
    pub name: String,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_count: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

impl LayerConfig {
    pub fn new(
        name: impl Into<String>,
        channels: usize,
        height: usize,
        width: usize,
        kernel_count: usize,
        kernel_size: usize,
    ) -> Self {
        Self {
            name: name.into(),
            channels,
            height,
            width,
            kernel_count,
            kernel_size,
            stride: 1,
        }
    }

    pub fn is_strided(&self) -> bool {
        self.stride != 1
    }

    /// Same layer with `H` and `W` clamped to at most `max_hw`.
    pub fn capped(&self, max_hw: usize) -> LayerConfig {
        LayerConfig {
            height: self.height.min(max_hw).max(1),
            width: self.width.min(max_hw).max(1),
            ..self.clone()
        }
    }

    /// Deterministic input and kernels for this shape.
    pub fn problem(&self, seed: u64) -> Result<ConvProblem> {
        ConvProblem::random(
            self.channels,
            self.height,
            self.width,
            self.kernel_count,
            self.kernel_size,
            seed,
        )
    }
}

pub fn parse_network_file(path: impl AsRef<Path>) -> Result<Vec<LayerConfig>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_network(&text, path)
}

/// Parses network file contents; `origin` is only used in error messages.
pub fn parse_network(text: &str, origin: &Path) -> Result<Vec<LayerConfig>> {
    let mut layers = Vec::new();
    let mut names = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 6 {
            return Err(err(format!(
                "missing field: expected `name C H W M k [stride]`, got {} fields",
                fields.len()
            )));
        }
        if fields.len() > 7 {
            return Err(err(format!(
                "too many fields: expected at most 7, got {}",
                fields.len()
            )));
        }
        let labels = ["C", "H", "W", "M", "k", "stride"];
        let mut dims = [1usize; 6];
        for (slot, (text, label)) in dims.iter_mut().zip(fields[1..].iter().zip(labels)) {
            let v: usize = text
                .parse()
                .map_err(|_| err(format!("{label} is not a non-negative integer: `{text}`")))?;
            if v == 0 {
                return Err(err(format!("{label} must be positive")));
            }
            *slot = v;
        }
        let [channels, height, width, kernel_count, kernel_size, stride] = dims;
        if kernel_size % 2 == 0 {
            return Err(err(format!("even kernel size {kernel_size}")));
        }
        let name = fields[0].to_string();
        if !names.insert(name.clone()) {
            return Err(err(format!("duplicate layer name `{name}`")));
        }
        layers.push(LayerConfig {
            name,
            channels,
            height,
            width,
            kernel_count,
            kernel_size,
            stride,
        });
    }
    Ok(layers)
}
