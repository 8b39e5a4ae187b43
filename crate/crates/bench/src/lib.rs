//! Criterion benchmarks for the multiprior engine; see `benches/`.
