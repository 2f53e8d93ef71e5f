//! Benchmark harness for lidskii-core; see `benches/`.
