//! Criterion benchmarks for `viscoflow-core`; see `benches/solvers.rs`.
