//! The acceptance suite lives in `tests/acceptance.rs`.
