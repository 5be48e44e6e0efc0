//! Criterion benchmarks for the `ergm-core` kernels; see `benches/kernels.rs`.
