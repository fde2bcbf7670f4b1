//! Doctest harness for the guide: every chapter under `book/src/` is
//! attached to a module here, so `cargo test --doc` compiles and runs the
//! book's code blocks and the guide can never drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine_chapter {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry_chapter {}

#[doc = include_str!("../../../book/src/mobility.md")]
pub mod mobility_chapter {}

#[doc = include_str!("../../../book/src/medium.md")]
pub mod medium_chapter {}

#[doc = include_str!("../../../book/src/protocols.md")]
pub mod protocols_chapter {}

#[doc = include_str!("../../../book/src/dual-lists.md")]
pub mod dual_lists_chapter {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics_chapter {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios_chapter {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli_chapter {}
