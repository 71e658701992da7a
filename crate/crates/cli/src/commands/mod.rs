//! One module per subcommand; `fit` also carries the data-loading and
//! model-fitting plumbing the diagnostic commands share.

pub mod calibrate;
pub mod compare;
pub mod diagnose;
pub mod fit;
pub mod power;
pub mod simulate;
