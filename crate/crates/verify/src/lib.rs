//! Acceptance suite for the mkf workspace. The checks live in
//! `tests/acceptance.rs`; run them with `cargo test -p mkf-verify`.
