//! Criterion benchmarks for `jointgap`; see `benches/pipelines.rs`.
