//! Natural language inference with lambda attention.
//!
//! A decomposable-attention classifier whose alignment scores can blend the
//! learned dot product with a symbolic exact-match signal. The blend weight
//! comes from a small gate over the named-entity categories of the two
//! tokens being compared, so the model can learn to trust surface identity
//! for names while still leaning on embeddings for ordinary words.

pub mod attention;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod ner;
pub mod resources;
pub mod tape;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};

// Snippets in the guide run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/entities.md")]
mod book_entities {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/attention.md")]
mod book_attention {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/corpora.md")]
mod book_corpora {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/training.md")]
mod book_training {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
