//! Weighted ridge regression in the fixed-design setting: closed-form
//! estimator, exact bias/variance, one-hot closed forms and the conditions on
//! the per-coordinate weights under which reweighting helps or hurts.

mod conditions;
mod eigen;
mod fixed;
mod onehot;
mod sampler;

pub use conditions::{
    no_reweight_condition, no_reweight_corrected, reweight_condition, reweight_corrected, CoordVerdict,
    NoReweightVerdict, ReweightVerdict,
};
pub use eigen::{eigen_ratio_report, write_eigen_csv, EigenRow};
pub use fixed::{
    bias_variance_fixed, excess_risk_mc, weighted_ridge_solve, BiasVariance, McEstimate,
    RidgeInstance,
};
pub use onehot::{bias_variance_erm, bias_variance_onehot, OneHotProblem, OneHotSpectrum};
pub use sampler::{
    mc_identity_check, no_reweight_sweep, random_fixed_instance, sample_problem, reweight_sweep,
    write_sweep_csv, ConditionForm, McIdentityReport, SweepReport,
};
