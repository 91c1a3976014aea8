//! Criterion benchmarks for `liref-core`; see `benches/`.
