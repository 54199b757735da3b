//! Finite-`N` inference engine: disorder sampling, exact Gibbs averages over
//! finite-support priors and disorder averages of the free energy and its
//! derivatives.

mod decoupled;
mod estimators;
mod model;
mod nonsym;
mod table;

pub use decoupled::{normal_rule, psi_decoupled, psi_row, MIN_QUAD_ORDER};
pub use estimators::*;
pub use model::{
    disorder_sample, draw_disorder, hamiltonian, sqrt_two_h, tensor_power, xtilde, DisorderSample,
    ModelSpec, Prior, ENUMERATION_BUDGET,
};
pub use nonsym::build_nonsym_spec;
pub use table::{gibbs_exact, log_sum_exp, ConfigTable, GibbsSummary, Scoring};

#[cfg(test)]
mod tests;
