//! Criterion benchmarks for the holoifs crate live in `benches/`.
