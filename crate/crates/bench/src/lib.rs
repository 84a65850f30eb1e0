//! Criterion benches live under `benches/`, the acceptance suite under `tests/`.
