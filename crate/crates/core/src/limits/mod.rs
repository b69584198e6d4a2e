//! Monte Carlo and exact checks of the limit theorems: CLT, the two laws
//! of the iterated logarithm, the modulus-of-continuity corollaries and the
//! functional CLT, plus the block decomposition diagnostics.

mod blocks;
mod clt;
mod lil;
mod modulus;
mod profile;

pub use blocks::{blocks_experiment, BLOCK_LLN_MIN_ENERGY, BLOCK_LLN_TOL};
pub use clt::{clt_experiment, CLT_KS_LIMIT};
pub use lil::{chung_experiment, lil_experiment, odd_weights_limsup, Normalization, MIN_HORIZON, ORACLE_STREAM};
pub use modulus::{
    digit_tail_experiment, functional_clt_experiment, modulus_experiment, sup_quotient_trace, QuotientTrace,
    EVEN_KS_LIMIT, ODD_KS_LIMIT,
};
pub use profile::{profile_check_experiment, variance_profile, VarianceProfile};
