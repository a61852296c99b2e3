//! Two-layer network generation, fixed-choice survey sampling, and
//! estimation of degree, second-moment and clustering parameters from the
//! sampled data.

pub mod census;
pub mod estimators;
pub mod generators;
pub mod graph;
pub mod jackknife;
pub mod sampler;

pub use estimators::{full_pipeline, EstimateReport, EstimatorOptions, KwDenominator, PipelineError};
pub use census::{MotifCensus, TriadCounts, TriangleCounts};
pub use generators::{GeneratorConfig, GeneratorError, Model, ModelParams};
pub use jackknife::{jackknife, JackknifeOutcome, JackknifeResult, Parameter};
pub use graph::{DegreeMoments, GraphError, Layer, NodeId, SimpleGraph, TwoLayerGraph};
pub use sampler::{ObservedNetwork, Observables, SamplingConfig, SamplingError};
