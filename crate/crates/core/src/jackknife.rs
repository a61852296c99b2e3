//! Leave-one-respondent-out variance estimation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{estimate_first_moments, full_pipeline, EstimatorOptions, PipelineError};
use crate::graph::NodeId;
use crate::sampler::ObservedNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "Ks")]
    Ks,
    #[serde(rename = "Kw")]
    Kw,
    #[serde(rename = "Kss")]
    Kss,
    #[serde(rename = "Ksw")]
    Ksw,
    #[serde(rename = "Kww")]
    Kww,
    #[serde(rename = "cc")]
    Cc,
}

impl Parameter {
    pub const FIRST_MOMENTS: [Parameter; 4] = [Parameter::N, Parameter::Q, Parameter::Ks, Parameter::Kw];
    pub const ALL: [Parameter; 8] = [
        Parameter::N,
        Parameter::Q,
        Parameter::Ks,
        Parameter::Kw,
        Parameter::Kss,
        Parameter::Ksw,
        Parameter::Kww,
        Parameter::Cc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::N => "N",
            Parameter::Q => "q",
            Parameter::Ks => "Ks",
            Parameter::Kw => "Kw",
            Parameter::Kss => "Kss",
            Parameter::Ksw => "Ksw",
            Parameter::Kww => "Kww",
            Parameter::Cc => "cc",
        }
    }

    fn needs_census(self) -> bool {
        !Self::FIRST_MOMENTS.contains(&self)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown parameter {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JackknifeResult {
    pub parameter: Parameter,
    pub h_full: f64,
    pub h_bar: f64,
    pub variance: f64,
    pub leave_one_out_values: Vec<f64>,
}

impl JackknifeResult {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JackknifeSummary {
    pub estimate: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JackknifeOutcome {
    pub results: Vec<JackknifeResult>,
    /// Respondents whose leave-one-out estimate failed, with the reason.
    pub failures: Vec<(NodeId, String)>,
}

impl JackknifeOutcome {
    pub fn get(&self, parameter: Parameter) -> Option<&JackknifeResult> {
        self.results.iter().find(|r| r.parameter == parameter)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.failures.iter().map(|(id, why)| format!("leave-one-out without {id} failed: {why}")).collect()
    }

    /// `{parameter: {estimate, mean, sd}}`.
    pub fn summary(&self) -> BTreeMap<String, JackknifeSummary> {
        self.results
            .iter()
            .map(|r| (r.parameter.name().to_string(), JackknifeSummary { estimate: r.h_full, mean: r.h_bar, sd: r.sd() }))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JackknifeError {
    #[error("jackknife needs at least two respondents, got {0}")]
    TooFewSeeds(usize),
    #[error("estimation on the full sample failed: {0}")]
    FullSample(PipelineError),
    #[error("fewer than two leave-one-out estimates succeeded")]
    TooFewSubsamples,
}

/// Mean and jackknife variance `(n-1)/n Σ (h_i - h̄)²` of leave-one-out values.
pub fn jackknife_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|h| (h - mean) * (h - mean)).sum();
    (mean, (n - 1.0) / n * ss)
}

fn evaluate(obs: &ObservedNetwork, parameters: &[Parameter], options: &EstimatorOptions) -> Result<Vec<f64>, PipelineError> {
    if parameters.iter().any(|p| p.needs_census()) {
        let r = full_pipeline(obs, options)?;
        Ok(parameters
            .iter()
            .map(|p| match p {
                Parameter::N => r.n_hat,
                Parameter::Q => r.q_hat,
                Parameter::Ks => r.ks_hat,
                Parameter::Kw => r.kw_hat,
                Parameter::Kss => r.kss_hat,
                Parameter::Ksw => r.ksw_hat,
                Parameter::Kww => r.kww_hat,
                Parameter::Cc => r.cc_hat.unwrap_or(f64::NAN),
            })
            .collect())
    } else {
        let (first, ks) = estimate_first_moments(obs, options)?;
        Ok(parameters
            .iter()
            .map(|p| match p {
                Parameter::N => first.n,
                Parameter::Q => first.q,
                Parameter::Ks => ks,
                Parameter::Kw => first.kw,
                _ => unreachable!("census parameters take the other branch"),
            })
            .collect())
    }
}

/// Re-estimates `parameters` with each respondent removed in turn.
/// Respondents whose reduced sample cannot be estimated are excluded and
/// listed in [`JackknifeOutcome::failures`].
pub fn jackknife(
    obs: &ObservedNetwork,
    parameters: &[Parameter],
    options: &EstimatorOptions,
) -> Result<JackknifeOutcome, JackknifeError> {
    let n0 = obs.seeds().len();
    if n0 < 2 {
        return Err(JackknifeError::TooFewSeeds(n0));
    }
    let full = evaluate(obs, parameters, options).map_err(JackknifeError::FullSample)?;
    let per_seed: Vec<(NodeId, Result<Vec<f64>, PipelineError>)> = obs
        .seeds()
        .par_iter()
        .map(|&r| {
            let reduced = obs.remove_respondent(r).expect("iterating over seeds");
            (r, evaluate(&reduced, parameters, options))
        })
        .collect();

    let mut failures = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n0); parameters.len()];
    for (r, outcome) in per_seed {
        match outcome {
            Ok(values) => {
                for (col, v) in columns.iter_mut().zip(values) {
                    col.push(v);
                }
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if columns.first().map_or(0, Vec::len) < 2 {
        return Err(JackknifeError::TooFewSubsamples);
    }
    let results = parameters
        .iter()
        .zip(full)
        .zip(columns)
        .map(|((&parameter, h_full), values)| {
            let (h_bar, variance) = jackknife_variance(&values);
            JackknifeResult { parameter, h_full, h_bar, variance, leave_one_out_values: values }
        })
        .collect();
    Ok(JackknifeOutcome { results, failures })
}
