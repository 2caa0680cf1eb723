//! Lattices, local limit checks and the measure change between the
//! discovery-order degrees and i.i.d. size-biased draws.

pub mod lattice;
pub mod llt;
pub mod measure;

pub use lattice::{hermite_normal_form, main_lattice, IntLattice2};
pub use llt::{
    exact_joint_pmf, exact_sum_pmf, law_lattice, llt_check, llt_prediction, prob_balanced_with_min_positive,
    Covariance, IntPmf, JointPmf, LltRow,
};
pub use measure::{
    gamma_lower_bound, phi_limit_sample, phi_nm_estimate, psi_r, reorder_expectation, tilted_expansion,
    MeasureChange, MeasureChangeValue, TiltedModel,
};
