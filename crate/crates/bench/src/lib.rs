//! Criterion benchmarks for the likelihood kernels and the full fit; see
//! `benches/likelihood.rs`. Run with `cargo bench -p pnmtrem-bench`.
