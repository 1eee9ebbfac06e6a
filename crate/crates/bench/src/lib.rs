//! Criterion benchmarks for the invariance checks live in `benches/`.
