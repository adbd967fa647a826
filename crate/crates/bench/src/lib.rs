//! Criterion benchmarks for the spikemei kernels; see `benches/kernels.rs`.
//! Run with `cargo bench -p spikemei-bench`.
