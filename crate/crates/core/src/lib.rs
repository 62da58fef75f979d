//! Sparse vector autoregression estimation.
//!
//! The crate fits VAR(p) models whose coefficient support is learned rather
//! than assumed: a smoothed periodogram feeds a complex graphical lasso whose
//! precision estimates are converted to partial spectral coherences, pairs
//! are screened, and a restricted Gaussian MLE refits only the surviving
//! coefficients. Two pipelines are provided (coherence ranking with a BIC
//! grid, and lasso-selected support with FDR cleanup) plus a simulation
//! harness that measures estimation error, support recovery, and forecast
//! accuracy on known models.

pub mod error;
pub mod bench;
pub mod config;
pub mod graph;
pub mod pipeline;
pub mod psc;
pub mod restricted_mle;
pub mod series;
pub mod spectral;
pub mod tsglasso;
pub mod varmodel;

pub use error::{Error, Result};
pub use series::TimeSeries;
