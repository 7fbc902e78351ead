//! CSV output.
//!
//! Benchmark files have the header
//! `layer,method,runs,mean_s,min_s,stddev_s,input_bytes,kernel_bytes,intermediate_bytes,output_bytes`.
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the results exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::bench::BenchResult;
use crate::harness::footprint::footprint;
use crate::harness::{LayerConfig, Method};

pub const BENCH_HEADER: &str =
    "layer,method,runs,mean_s,min_s,stddev_s,input_bytes,kernel_bytes,intermediate_bytes,output_bytes";

pub const FOOTPRINT_HEADER: &str =
    "layer,method,input_bytes,kernel_bytes,intermediate_bytes,output_bytes,input_operand_bytes";

pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(BENCH_HEADER.split(','))?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(results: &[BenchResult], path: impl AsRef<Path>) -> Result<()> {
    write_csv(results, File::create(path)?)
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<BenchResult>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchResult>> {
    read_csv_from(File::open(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootprintRow {
    pub layer: String,
    pub method: Method,
    pub input_bytes: u64,
    pub kernel_bytes: u64,
    pub intermediate_bytes: u64,
    pub output_bytes: u64,
    pub input_operand_bytes: u64,
}

pub fn footprint_rows(layers: &[LayerConfig], methods: &[Method]) -> Result<Vec<FootprintRow>> {
    let mut rows = Vec::new();
    for layer in layers {
        for &method in methods.iter().filter(|m| m.applies_to(layer.kernel_size)) {
            let f = footprint(layer, method)?;
            rows.push(FootprintRow {
                layer: layer.name.clone(),
                method,
                input_bytes: f.input_bytes(),
                kernel_bytes: f.kernel_bytes(),
                intermediate_bytes: f.intermediate_bytes(),
                output_bytes: f.output_bytes(),
                input_operand_bytes: f.input_operand_elements * super::footprint::ELEMENT_BYTES,
            });
        }
    }
    Ok(rows)
}

pub fn write_footprint_csv<W: Write>(rows: &[FootprintRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(FOOTPRINT_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(layer: &str, method: Method, mean: f64) -> BenchResult {
        BenchResult {
            layer: layer.into(),
            method,
            runs: 25,
            mean_s: mean,
            min_s: mean / 2.0,
            stddev_s: 0.125,
            input_bytes: 602_112,
            kernel_bytes: 6912,
            intermediate_bytes: 5_419_008,
            output_bytes: 12_845_056,
        }
    }

    fn to_string(results: &[BenchResult]) -> String {
        let mut buf = Vec::new();
        write_csv(results, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(to_string(&[]), format!("{BENCH_HEADER}\n"));
    }

    #[test]
    fn golden_rows() {
        let text = to_string(&[
            sample("conv1_1", Method::Im2col, 0.5),
            sample("inception_3a/1x1", Method::Kn2row, 0.0025),
        ]);
        let expected = "\
layer,method,runs,mean_s,min_s,stddev_s,input_bytes,kernel_bytes,intermediate_bytes,output_bytes
conv1_1,im2col,25,0.5,0.25,0.125,602112,6912,5419008,12845056
inception_3a/1x1,kn2row,25,0.0025,0.00125,0.125,602112,6912,5419008,12845056
";
        assert_eq!(text, expected);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let results = vec![
            sample("a", Method::DirectSum, 1.0),
            sample("b", Method::Kn2col, 3.3e-7),
            sample("c", Method::Conv1x1, 12.75),
        ];
        emit_csv(&results, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), results);
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], dir.path().join("missing/dir/out.csv")).is_err());
    }

    #[test]
    fn footprint_table() {
        let layers = vec![
            LayerConfig::new("a", 3, 4, 4, 2, 3),
            LayerConfig::new("b", 3, 4, 4, 2, 1),
        ];
        let rows = footprint_rows(&layers, &Method::ALL).unwrap();
        // conv1x1 only applies to the k=1 layer.
        assert_eq!(rows.len(), 6 + 7);
        let mut buf = Vec::new();
        write_footprint_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(FOOTPRINT_HEADER));
        assert!(text.contains("\na,im2col,192,216,1728,128,1728\n"), "{text}");
    }

    fn result_strategy() -> impl Strategy<Value = BenchResult> {
        (
            "[a-zA-Z0-9_/,\" .-]{0,16}",
            prop::sample::select(Method::ALL.to_vec()),
            1usize..1000,
            (0.0f64..1e3, 0.0f64..1e3, 0.0f64..1e3),
            (any::<u32>(), any::<u32>(), any::<u64>(), any::<u32>()),
        )
            .prop_map(|(layer, method, runs, (a, b, c), (i, k, m, o))| BenchResult {
                layer,
                method,
                runs,
                mean_s: a,
                min_s: b,
                stddev_s: c,
                input_bytes: i as u64,
                kernel_bytes: k as u64,
                intermediate_bytes: m,
                output_bytes: o as u64,
            })
    }

    proptest! {
        #[test]
        fn roundtrip(results in prop::collection::vec(result_strategy(), 0..8)) {
            let text = to_string(&results);
            prop_assert_eq!(read_csv_from(text.as_bytes()).unwrap(), results);
        }
    }
}
