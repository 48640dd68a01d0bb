pub mod attack;
pub mod bits;
pub mod decoy;
pub mod error;
pub mod evaluation;
pub mod filter_design;
pub mod hw;
pub mod key;
pub mod lp;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator behind every randomized choice; seeds are recorded in the
/// artifacts so each run can be replayed.
pub type DesignRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> DesignRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// The guide's chapters, so their snippets run with the doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/decoys.md")]
    mod decoys {}
    #[doc = include_str!("../../../book/src/hardware.md")]
    mod hardware {}
    #[doc = include_str!("../../../book/src/attack.md")]
    mod attack {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
