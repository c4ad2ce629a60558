//! Instance files, synthetic instances and the benchmark sweep.

pub mod bench;
pub mod generator;
pub mod instance;

pub use bench::{run_bench, BenchReport, BenchRow, Budget};
pub use generator::{generate_instance, GeneratorConfig, Pattern, Peak};
pub use instance::{read_instance, write_instance, Instance, InstanceError};
