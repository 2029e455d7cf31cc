//! Criterion benchmarks for `csa-core`; see `benches/csa.rs`.
