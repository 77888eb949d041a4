//! de Finetti boxes and the certificates comparing arbitrary boxes against them.

mod chsh;
mod general;

pub use chsh::{
    binom_l1_bound_check, c_prime_diagnostic, certify_first_definetti,
    certify_first_definetti_dense, certify_second_definetti, chsh_constant, clamp_to_quantum,
    diaconis_freedman_check, score_sup, second_definetti_rhs, tau_chsh, tau_chsh_entry, tau_second,
    BinomialL1Report, Certificate, DiaconisFreedmanReport, FirstDeFinetti, SecondReport,
};
pub use general::{
    certify_general_definetti, expected_freq_set, general_bounds, general_tau, ConvexFamily,
    GeneralCertificate, GeneralDeFinetti, GeneralTau,
};
