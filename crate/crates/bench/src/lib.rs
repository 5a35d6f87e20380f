//! Criterion benchmarks for the `nfsa-core` kernels live in `benches/`.
