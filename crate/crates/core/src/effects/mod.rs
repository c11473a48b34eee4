//! Covariate screening, stepwise DIC selection and average marginal effects.

pub mod ame;
pub mod halton;
pub mod stepwise;
pub mod vif;

pub use ame::{
    ame_for_model, ame_for_models, average_marginal_effects, AmeConfig, AmeModel, AmeRow,
    CovariateKind, EffectReport,
};
pub use halton::{halton, halton_normal, primes, radical_inverse};
pub use stepwise::{
    stepwise_dic, Candidate, StepAction, StepRecord, StepwiseConfig, StepwiseResult,
};
pub use vif::{vif, vif_screen, VifReport};
