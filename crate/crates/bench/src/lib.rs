//! Criterion benchmarks for ldp-core; see `benches/`.
