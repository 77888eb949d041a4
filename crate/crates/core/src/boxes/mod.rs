//! n-round boxes: dense tables, CHSH-symmetric compression, predicates and signaling checks.

mod alphabets;
mod chsh;
mod dense;
mod predicate;
mod profile;
mod symbox;

pub use alphabets::{Alphabets, Interface, Layout, DENSE_CAP};
pub use chsh::{
    chsh_round_wins, chsh_symmetry_violation, chsh_wins, dense_from_sym, is_chsh_symmetric, pr_box,
    q_box, sym_from_dense, win_distribution, zero_output_box,
};
pub use dense::{DenseBox, SignalingWitness};
pub use predicate::{InputDist, Predicate};
pub use profile::SymmetricProfile;
pub use symbox::{win_multiplicity, SymBox};
