//! Guide chapters, compiled so that their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}
#[doc = include_str!("../../../book/src/attention.md")]
pub mod attention {}
#[doc = include_str!("../../../book/src/latent.md")]
pub mod latent {}
#[doc = include_str!("../../../book/src/target.md")]
pub mod target {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/topics.md")]
pub mod topics {}
#[doc = include_str!("../../../book/src/mixture.md")]
pub mod mixture {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
