//! The book chapters from `book/src/`, mirrored as doc pages so
//! `cargo test --doc` compiles and runs every Rust snippet in the guide and
//! the two can never drift apart.

#[doc = include_str!("../../../README.md")]
pub mod readme {}

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/rotations.md")]
pub mod rotations {}

#[doc = include_str!("../../../book/src/kinematics.md")]
pub mod kinematics {}

#[doc = include_str!("../../../book/src/hand-integration.md")]
pub mod hand_integration {}

#[doc = include_str!("../../../book/src/shoulder-refinement.md")]
pub mod shoulder_refinement {}

#[doc = include_str!("../../../book/src/smoothing.md")]
pub mod smoothing {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/files-and-cli.md")]
pub mod files_and_cli {}
