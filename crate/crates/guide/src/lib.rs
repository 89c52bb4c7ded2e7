//! The book's chapters, one module each, so that `cargo test --doc` compiles
//! and runs every Rust listing against the current crates. A failing
//! doc-test is named after its module, which points at the chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grid.md")]
pub mod grid {}

#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}

#[doc = include_str!("../../../book/src/onebody.md")]
pub mod onebody {}

#[doc = include_str!("../../../book/src/manybody.md")]
pub mod manybody {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
