//! Distributional regression: links, design matrices, per-parameter
//! maximum-likelihood fitting, information criteria, and stepwise predictor
//! selection.

mod design;
mod fit;
mod link;
mod optim;
mod stepwise;

pub use design::{linear_predictor, Column, CovariateTable, DesignMatrix, TermSpec};
pub use fit::{
    fit_component, gaic, ComponentSpec, Family, FitDiagnostics, FitResult, ObservationBound,
    ParamSpec, ResponseData, ResponseStructure, ZeroHandling,
};
pub use link::{Link, LOGIT_CLAMP};
pub use optim::{fd_gradient, minimize, nelder_mead, OptimOutcome};
pub use stepwise::{stepwise_select, Candidate, StepwiseFit};
