//! Config file loading shared by the command-line tools.
//!
//! Files may be TOML or JSON; the format is sniffed from the first
//! non-whitespace byte, so no extension convention is required. Unknown
//! keys are rejected to catch typos early.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::Result;
use crate::tsglasso::{Criterion, PenaltyCount};

/// Parses TOML or JSON into any deserializable config type. A leading '{'
/// selects JSON, anything else TOML.
pub fn parse_auto<T: DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(toml::from_str(text)?)
    }
}

/// Optional fit settings from a config file. Every present field overrides
/// the matching command-line flag; absent fields leave the flag value in
/// place.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOverrides {
    /// svar | msvar.
    pub method: Option<String>,
    pub p_grid: Option<Vec<usize>>,
    /// False-discovery-rate level for the msvar refinement.
    pub q: Option<f64>,
    /// Fixed penalty level; mutually exclusive with the grid fields.
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    /// Size of the automatic log-spaced grid.
    pub lambda_grid_size: Option<usize>,
    pub criterion: Option<Criterion>,
    pub gamma: Option<f64>,
    /// per-frequency | shared parameter counting in the tuning criterion.
    pub penalty_count: Option<PenaltyCount>,
    /// Smoothing half-window m_t.
    pub mt: Option<usize>,
    /// Stage-1 pair-count grid (svar).
    pub m_grid: Option<Vec<usize>>,
    /// Stage-2 coefficient-count grid (svar).
    pub stage2_grid: Option<Vec<usize>>,
    pub yekutieli: Option<bool>,
    pub rho: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}
