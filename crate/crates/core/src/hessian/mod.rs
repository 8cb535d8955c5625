//! Hessian sparsity detection, acyclic coloring and recovery from
//! Hessian-vector products.

mod coloring;
mod sparsity;

pub use coloring::{color, is_valid_acyclic, recover, recover_into, Coloring, RecoveryError, RecoveryStep};
pub use sparsity::{detect_sparsity, detect_sparsity_union, SparsityPattern};
