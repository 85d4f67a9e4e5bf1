//! The `mdrw` guide. Each module holds one chapter of the book so that its
//! code samples run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/projective.md")]
pub mod projective {}
#[doc = include_str!("../../../book/src/laws.md")]
pub mod laws {}
#[doc = include_str!("../../../book/src/transfer.md")]
pub mod transfer {}
#[doc = include_str!("../../../book/src/cramer.md")]
pub mod cramer {}
#[doc = include_str!("../../../book/src/tilting.md")]
pub mod tilting {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/smoothing.md")]
pub mod smoothing {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/acceptance.md")]
pub mod acceptance {}
