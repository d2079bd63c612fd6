//! Acceptance suite for `v2i-edge`. The checks live in `tests/acceptance.rs`
//! and run with `cargo test -p v2i-edge-acceptance -- --nocapture`.
