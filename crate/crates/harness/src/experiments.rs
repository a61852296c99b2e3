//! Monte Carlo sweeps, the approximation-error study and jackknife sweeps.
//!
//! Every task draws from its own RNG stream derived from the master seed and
//! its position in the work list; results come back in work-list order.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use fcnet_core::census::{triad_totals_from_degrees, triangle_census, TriadCounts, TriangleCounts};
use fcnet_core::estimators::{full_pipeline, EstimateReport, EstimatorOptions, KwDenominator};
use fcnet_core::generators::{generate_single_layer, generate_two_layer, GeneratorConfig, Model};
use fcnet_core::graph::{global_clustering, SimpleGraph, TwoLayerGraph};
use fcnet_core::jackknife::{jackknife, Parameter};
use fcnet_core::sampler::{conduct_survey, ObservedNetwork, SamplingConfig, SamplingError};
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig};
use crate::seeds::{rng_for, GRAPH_STREAM, SURVEY_STREAM};

/// Ground truth of a generated two-layer graph.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthValues {
    pub n: usize,
    pub ks: f64,
    pub kw: f64,
    pub kss: f64,
    pub ksw: f64,
    pub kww: f64,
    pub cc: Option<f64>,
    pub triangles: TriangleCounts,
    pub open_triads: TriadCounts,
}

impl TruthValues {
    pub fn of(g: &TwoLayerGraph) -> Result<Self> {
        let m = g.degree_moments()?;
        let triangles = triangle_census(g);
        let totals = triad_totals_from_degrees(g);
        // open triads follow from the totals through the composition identities
        let open_triads = TriadCounts {
            ss: totals.ss - 3 * triangles.s3 - triangles.s2w,
            sw: totals.sw - 2 * triangles.s2w - 2 * triangles.sw2,
            ww: totals.ww - 3 * triangles.w3 - triangles.sw2,
        };
        Ok(TruthValues {
            n: g.node_count(),
            ks: m.k_s,
            kw: m.k_w,
            kss: m.k_ss,
            ksw: m.k_sw,
            kww: m.k_ww,
            cc: global_clustering(&g.collapse()).ok(),
            triangles,
            open_triads,
        })
    }

    const COLUMNS: [&'static str; 15] = [
        "true_N", "true_Ks", "true_Kw", "true_Kss", "true_Ksw", "true_Kww", "true_cc", "true_T_s3", "true_T_s2w",
        "true_T_sw2", "true_T_w3", "true_lam_ss", "true_lam_sw", "true_lam_ww", "true_tau_total",
    ];

    fn fields(&self) -> Vec<String> {
        let t = &self.triangles;
        let l = &self.open_triads;
        let tau = l.total() + 3 * t.total();
        let mut out = vec![self.n.to_string()];
        out.extend([self.ks, self.kw, self.kss, self.ksw, self.kww].iter().map(f64::to_string));
        out.push(self.cc.map(|c| c.to_string()).unwrap_or_default());
        out.extend([t.s3, t.s2w, t.sw2, t.w3, l.ss, l.sw, l.ww, tau].iter().map(u64::to_string));
        out
    }
}

/// Generator settings for one cell: the cell's N, and a weak floor of at
/// least B so every node can fill its naming budget.
fn cell_generator(base: &GeneratorConfig, cell: &Cell) -> GeneratorConfig {
    let mut g = base.clone();
    g.node_count = cell.n;
    g.model_params.weak_floor = g.model_params.weak_floor.max(cell.budget);
    g
}

fn estimator_options(config: &ExperimentConfig) -> EstimatorOptions {
    EstimatorOptions {
        kw_denominator: if config.paper_literal_kw { KwDenominator::PaperLiteral } else { KwDenominator::ModelConsistent },
        ..Default::default()
    }
}

/// Trial `t` of every cell with the same N surveys the same network, so
/// cells differing only in q or B are directly comparable.
fn graph_rng(master: u64, cell: &Cell, trial: usize) -> rand_chacha::ChaCha8Rng {
    rng_for(master, &[GRAPH_STREAM, cell.n as u64, trial as u64])
}

/// Surveys `g`, redrawing with a fresh stream whenever no seed is selected.
fn survey_with_retries(
    g: &TwoLayerGraph,
    sampling: &SamplingConfig,
    master: u64,
    path: [u64; 2],
    max_retries: u32,
) -> (Result<ObservedNetwork, SamplingError>, u32) {
    let mut retries = 0;
    loop {
        let mut rng = rng_for(master, &[path[0], path[1], SURVEY_STREAM, retries as u64]);
        match conduct_survey(g, sampling, &mut rng) {
            Err(SamplingError::DegenerateSample) if retries < max_retries => retries += 1,
            other => return (other, retries),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub model: Model,
    pub n: usize,
    pub q: f64,
    pub budget: usize,
    pub retries: u32,
    pub truth: Option<TruthValues>,
    pub estimate: Option<EstimateReport>,
    pub error: Option<String>,
    /// Inference wall time in milliseconds.
    pub elapsed_ms: f64,
}

impl TrialRecord {
    pub fn header(timing: bool) -> Vec<String> {
        let mut h: Vec<String> =
            ["cell", "trial", "model", "N", "q", "B", "retries"].iter().map(|s| s.to_string()).collect();
        h.extend(TruthValues::COLUMNS.iter().map(|s| s.to_string()));
        h.extend(EstimateReport::CSV_COLUMNS.iter().map(|s| s.to_string()));
        h.push("error".into());
        if timing {
            h.push("elapsed_ms".into());
        }
        h
    }

    pub fn row(&self, timing: bool) -> Vec<String> {
        let mut r = vec![
            self.cell.to_string(),
            self.trial.to_string(),
            self.model.to_string(),
            self.n.to_string(),
            self.q.to_string(),
            self.budget.to_string(),
            self.retries.to_string(),
        ];
        match &self.truth {
            Some(t) => r.extend(t.fields()),
            None => r.extend(std::iter::repeat_n(String::new(), TruthValues::COLUMNS.len())),
        }
        match &self.estimate {
            Some(e) => r.extend(e.csv_row()),
            None => r.extend(std::iter::repeat_n(String::new(), EstimateReport::CSV_COLUMNS.len())),
        }
        r.push(self.error.clone().unwrap_or_default());
        if timing {
            r.push(format!("{:.3}", self.elapsed_ms));
        }
        r
    }
}

/// Generate, survey and estimate one trial of one cell.
pub fn run_trial(config: &ExperimentConfig, cell: &Cell, trial: usize) -> TrialRecord {
    let mut record = TrialRecord {
        cell: cell.id,
        trial,
        model: config.generator.model,
        n: cell.n,
        q: cell.q,
        budget: cell.budget,
        retries: 0,
        truth: None,
        estimate: None,
        error: None,
        elapsed_ms: 0.0,
    };
    let path = [cell.id as u64, trial as u64];
    let generator = cell_generator(&config.generator, cell);
    let g = match generate_two_layer(&generator, &mut graph_rng(config.master_seed, cell, trial)) {
        Ok(g) => g,
        Err(e) => {
            record.error = Some(format!("generate: {e}"));
            return record;
        }
    };
    match TruthValues::of(&g) {
        Ok(t) => record.truth = Some(t),
        Err(e) => {
            record.error = Some(format!("truth: {e}"));
            return record;
        }
    }
    let sampling = SamplingConfig::new(cell.q, cell.budget);
    let (survey, retries) = survey_with_retries(&g, &sampling, config.master_seed, path, config.max_retries);
    record.retries = retries;
    let obs = match survey {
        Ok(obs) => obs,
        Err(e) => {
            record.error = Some(format!("sample: {e}"));
            return record;
        }
    };
    let start = Instant::now();
    let estimate = full_pipeline(&obs, &estimator_options(config));
    record.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match estimate {
        Ok(report) => record.estimate = Some(report),
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// All cells times all trials, in (cell, trial) order.
pub fn run_mc_sweep(config: &ExperimentConfig) -> Vec<TrialRecord> {
    let work: Vec<(Cell, usize)> =
        config.cells().into_iter().flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    work.par_iter().map(|(cell, trial)| run_trial(config, cell, *trial)).collect()
}

/// The exact sum `Σ_i Σ_{j ∈ N(i)} 1 / (k_i k_j)` and its mean-field
/// approximation `N / K`.
pub fn approx_pair(g: &SimpleGraph) -> (f64, f64) {
    let n = g.node_count();
    let mut exact = 0.0;
    for i in 0..n {
        let ki = g.degree(i) as f64;
        for &j in g.neighbors(i) {
            exact += 1.0 / (ki * g.degree(j) as f64);
        }
    }
    (exact, n as f64 / g.mean_degree())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxRecord {
    pub family: Model,
    pub size: usize,
    pub index: usize,
    pub mean_degree: f64,
    pub y: f64,
    pub y_hat: f64,
    pub error: Option<String>,
}

impl ApproxRecord {
    pub fn ratio(&self) -> f64 {
        self.y_hat / self.y
    }

    pub fn header() -> Vec<String> {
        ["family", "size", "index", "mean_degree", "Y", "Y_hat", "ratio", "error"].iter().map(|s| s.to_string()).collect()
    }

    pub fn row(&self) -> Vec<String> {
        if self.error.is_some() {
            let mut r = vec![self.family.to_string(), self.size.to_string(), self.index.to_string()];
            r.extend(std::iter::repeat_n(String::new(), 4));
            r.push(self.error.clone().unwrap_or_default());
            return r;
        }
        vec![
            self.family.to_string(),
            self.size.to_string(),
            self.index.to_string(),
            self.mean_degree.to_string(),
            self.y.to_string(),
            self.y_hat.to_string(),
            self.ratio().to_string(),
            String::new(),
        ]
    }
}

fn family_stream(model: Model) -> u64 {
    match model {
        Model::ModifiedWs => 0,
        Model::HolmeKim => 1,
        Model::Ba => 2,
        Model::Rrt => 3,
    }
}

/// `Ŷ / Y` for `trials` single-layer networks per family and size.
pub fn run_approx_check(config: &ExperimentConfig) -> Vec<ApproxRecord> {
    let mut work = Vec::new();
    for &family in &config.families {
        for &size in &config.node_counts {
            for index in 0..config.trials {
                work.push((family, size, index));
            }
        }
    }
    work.par_iter()
        .map(|&(family, size, index)| {
            let generator = GeneratorConfig { model: family, node_count: size, ..config.generator.clone() };
            let mut rng = rng_for(config.master_seed, &[family_stream(family), size as u64, index as u64]);
            let mut record =
                ApproxRecord { family, size, index, mean_degree: 0.0, y: 0.0, y_hat: 0.0, error: None };
            match generate_single_layer(&generator, &mut rng) {
                Ok(g) => {
                    let (y, y_hat) = approx_pair(&g);
                    record.mean_degree = g.mean_degree();
                    record.y = y;
                    record.y_hat = y_hat;
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JackknifeRecord {
    pub cell: usize,
    pub trial: usize,
    pub n: usize,
    pub q: f64,
    pub budget: usize,
    pub retries: u32,
    pub truth: Option<TruthValues>,
    pub n0: usize,
    pub failures: usize,
    /// `(parameter, estimate, mean, sd)` in parameter order.
    pub results: Vec<(Parameter, f64, f64, f64)>,
    pub error: Option<String>,
}

impl JackknifeRecord {
    pub fn header(parameters: &[Parameter]) -> Vec<String> {
        let mut h: Vec<String> = ["cell", "trial", "N", "q", "B", "retries"].iter().map(|s| s.to_string()).collect();
        h.extend(TruthValues::COLUMNS.iter().map(|s| s.to_string()));
        h.push("n0".into());
        h.push("failures".into());
        for p in parameters {
            for suffix in ["estimate", "mean", "sd"] {
                h.push(format!("{p}_{suffix}"));
            }
        }
        h.push("error".into());
        h
    }

    pub fn row(&self, parameters: &[Parameter]) -> Vec<String> {
        let mut r = vec![
            self.cell.to_string(),
            self.trial.to_string(),
            self.n.to_string(),
            self.q.to_string(),
            self.budget.to_string(),
            self.retries.to_string(),
        ];
        match &self.truth {
            Some(t) => r.extend(t.fields()),
            None => r.extend(std::iter::repeat_n(String::new(), TruthValues::COLUMNS.len())),
        }
        r.push(self.n0.to_string());
        r.push(self.failures.to_string());
        for p in parameters {
            match self.results.iter().find(|x| x.0 == *p) {
                Some(&(_, est, mean, sd)) => r.extend([est, mean, sd].iter().map(f64::to_string)),
                None => r.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        r.push(self.error.clone().unwrap_or_default());
        r
    }
}

fn run_jackknife_trial(config: &ExperimentConfig, cell: &Cell, trial: usize) -> JackknifeRecord {
    let mut record = JackknifeRecord {
        cell: cell.id,
        trial,
        n: cell.n,
        q: cell.q,
        budget: cell.budget,
        retries: 0,
        truth: None,
        n0: 0,
        failures: 0,
        results: Vec::new(),
        error: None,
    };
    let path = [cell.id as u64, trial as u64];
    let generator = cell_generator(&config.generator, cell);
    let g = match generate_two_layer(&generator, &mut graph_rng(config.master_seed, cell, trial)) {
        Ok(g) => g,
        Err(e) => {
            record.error = Some(format!("generate: {e}"));
            return record;
        }
    };
    record.truth = TruthValues::of(&g).ok();
    let (survey, retries) =
        survey_with_retries(&g, &SamplingConfig::new(cell.q, cell.budget), config.master_seed, path, config.max_retries);
    record.retries = retries;
    let obs = match survey {
        Ok(obs) => obs,
        Err(e) => {
            record.error = Some(format!("sample: {e}"));
            return record;
        }
    };
    record.n0 = obs.seeds().len();
    match jackknife(&obs, &config.jackknife_parameters(), &estimator_options(config)) {
        Ok(out) => {
            record.failures = out.failures.len();
            record.results = out.results.iter().map(|r| (r.parameter, r.h_full, r.h_bar, r.sd())).collect();
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Jackknife of one survey per (cell, trial).
pub fn run_jackknife_sweep(config: &ExperimentConfig) -> Vec<JackknifeRecord> {
    let work: Vec<(Cell, usize)> =
        config.cells().into_iter().flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    // the leave-one-out loop inside each task is parallel as well
    work.iter().map(|(cell, trial)| run_jackknife_trial(config, cell, *trial)).collect()
}

pub fn write_csv<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Ring lattice where every node has degree `2 * half_degree`.
pub fn regular_ring(n: usize, half_degree: usize) -> SimpleGraph {
    let mut g = SimpleGraph::new(n);
    for d in 1..=half_degree {
        for i in 0..n {
            g.add_edge(i, (i + d) % n).expect("ring offsets are valid");
        }
    }
    g
}
