//! Benchmarks for the compiler pipeline live in `benches/`.
