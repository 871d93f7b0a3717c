//! Compiles and runs every snippet of the guide in `book/src` as a doc-test.

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/sources.md")]
pub mod sources {}

#[doc = include_str!("../../../book/src/forward.md")]
pub mod forward {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/continuation.md")]
pub mod continuation {}

#[doc = include_str!("../../../book/src/time_domain.md")]
pub mod time_domain {}

#[doc = include_str!("../../../book/src/reconstruction.md")]
pub mod reconstruction {}

#[doc = include_str!("../../../book/src/cavity.md")]
pub mod cavity {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
