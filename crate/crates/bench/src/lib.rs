//! Criterion benchmarks for the solver and the bootstrap; see `benches/`.
