//! Benchmark and verification harness: network files, method dispatch,
//! oracle verification, timing, footprint accounting and CSV output.

pub mod bench;
pub mod footprint;
pub mod method;
pub mod network;
pub mod report;
pub mod verify;

pub use bench::{benchmark, BenchResult, BenchRun, DEFAULT_RUNS};
pub use footprint::{footprint, Footprint};
pub use method::Method;
pub use network::{parse_network, parse_network_file, LayerConfig};
pub use report::{emit_csv, read_csv, write_csv};
pub use verify::{verify, verify_with, verify_with_fault, Outcome, Tolerance, VerifyOptions, VerifyReport};
