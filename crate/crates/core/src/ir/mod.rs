//! Typed configuration IR, lowering and content hashing.

mod canonical;
mod lower;
mod types;
mod unparse;

pub use canonical::{canonical_serialize, config_hash, ConfigHash, FORMAT_TAG, NAMESPACE_HEX_CHARS, NAMESPACE_PREFIX};
pub use lower::{lower, lower_expr, lower_kernel, LowerError};
pub use types::*;
pub use unparse::{to_expr, unparse};
