//! Criterion benchmarks for the hot kernels; see `benches/kernels.rs`.
