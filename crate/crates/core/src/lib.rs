//! CHSH-certified matrix Module-LWE key agreement.

// dense 4×4 and kernel code reads best with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod chsh;
pub mod cli;
pub mod evolution;
pub mod hamiltonian;
pub mod hash;
pub mod mlwe;
pub mod protocol;
pub mod security;
pub mod zq;
