//! Post-processing tasks on top of [`AlgebraElement`](crate::AlgebraElement):
//! Hadamard functions, level sets, statistics and extreme entries.

mod eigen;
mod functions;
mod level;

pub use eigen::{
    closest_to, exp_power_step, find_extreme, kb_bound, power_rq_step, power_step, EigenMethod, ExtremeResult,
    KbBound, RqStep, Which,
};
pub use functions::{hadamard_inverse, hadamard_sign, hadamard_sqrt, sup_norm_estimate, SignMethod};
pub use level::{
    characteristic, characteristic_with, conditional_mean, conditional_mean_of, level_set, mean_variance,
    probability, probability_of, support_cardinality, Cardinality, Interval,
};
