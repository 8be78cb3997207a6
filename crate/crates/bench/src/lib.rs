//! Empty library target; the crate exists for its criterion benches
//! (see `benches/generation.rs`).
