//! Method-of-moments inference from a fixed-choice survey.
//!
//! The pipeline runs in order: closed-form `(N, q, K_w)`, least-squares
//! `K_s`, naming-probability tables, triangle inversion, open-triad
//! inversion, triad totals, second moments, and the clustering coefficient.

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::census::{MotifCensus, TriadCounts, TriangleCounts};
use crate::graph::{global_clustering, DegreeMoments, GraphError};
use crate::sampler::{ObservedNetwork, Observables};

/// Probability sums below this make a motif type unidentifiable.
pub const IDENTIFIABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("degenerate sample: every weak naming leaves the seed set")]
    DegenerateSample,
    #[error("weak degree denominator is not positive ({0})")]
    SingularDenominator(f64),
    #[error("naming budget B = {budget} is not below the weak degree estimate {kw}")]
    InvalidRegime { budget: usize, kw: f64 },
    #[error("{0} is not identifiable at this sampling rate")]
    Unidentifiable(&'static str),
    #[error("no triads")]
    NoTriads,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FirstMoments,
    StrongDegree,
    Coefficients,
    Triangles,
    OpenTriads,
    Clustering,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::FirstMoments => "first_moments",
            Stage::StrongDegree => "strong_degree",
            Stage::Coefficients => "coefficients",
            Stage::Triangles => "triangles",
            Stage::OpenTriads => "open_triads",
            Stage::Clustering => "clustering",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub source: EstimationError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T, EstimationError> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Which denominator to use in the closed-form weak degree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KwDenominator {
    /// `2(B n0 - m1w - m0w)`: inverts the expected observables exactly.
    #[default]
    ModelConsistent,
    /// `2 B n0 - 2 m1w - m0w`, the form found in the original derivation.
    PaperLiteral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub kw_denominator: KwDenominator,
    /// Argument tolerance of the strong-degree minimization.
    pub strong_degree_tolerance: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { kw_denominator: KwDenominator::ModelConsistent, strong_degree_tolerance: 1e-6 }
    }
}

/// Survey observables as reals, so expected values can be fed in directly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservedStats {
    pub n0: f64,
    pub n1s: f64,
    pub n1w: f64,
    pub m0s: f64,
    pub m1s: f64,
    pub m0w: f64,
    pub m1w: f64,
}

impl From<Observables> for ObservedStats {
    fn from(o: Observables) -> Self {
        ObservedStats {
            n0: o.n0 as f64,
            n1s: o.n1s as f64,
            n1w: o.n1w as f64,
            m0s: o.m0s as f64,
            m1s: o.m1s as f64,
            m0w: o.m0w as f64,
            m1w: o.m1w as f64,
        }
    }
}

impl ObservedStats {
    /// Expected observables of a graph with `n` nodes and (approximately)
    /// homogeneous degrees `ks`, `kw`.
    pub fn expected(n: f64, q: f64, budget: f64, ks: f64, kw: f64) -> Self {
        let p = 1.0 - q;
        ObservedStats {
            n0: n * q,
            n1s: n * p * (1.0 - p.powf(ks)),
            n1w: n * p * (1.0 - (1.0 - q * budget / kw).powf(kw)),
            m0s: 0.5 * q * q * n * ks,
            m1s: q * p * n * ks,
            m0w: 0.5 * q * q * budget * n * (2.0 - budget / kw),
            m1w: q * p * n * budget,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        ObservedStats {
            n0: c * self.n0,
            n1s: c * self.n1s,
            n1w: c * self.n1w,
            m0s: c * self.m0s,
            m1s: c * self.m1s,
            m0w: c * self.m0w,
            m1w: c * self.m1w,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstMoments {
    pub n: f64,
    pub q: f64,
    pub kw: f64,
}

/// Closed-form `(N, q, K_w)` from `n0`, `m1w` and `m0w`.
pub fn first_moment_estimates(
    obs: &ObservedStats,
    budget: usize,
    denominator: KwDenominator,
) -> Result<FirstMoments, EstimationError> {
    if budget == 0 {
        return Err(EstimationError::InvalidInput("B must be at least 1".into()));
    }
    let b = budget as f64;
    let named = b * obs.n0;
    let inside = named - obs.m1w;
    if obs.n0 <= 0.0 || inside <= 0.0 {
        return Err(EstimationError::DegenerateSample);
    }
    let q = inside / named;
    let n = b * obs.n0 * obs.n0 / inside;
    let denom = match denominator {
        KwDenominator::ModelConsistent => 2.0 * (inside - obs.m0w),
        KwDenominator::PaperLiteral => 2.0 * inside - obs.m0w,
    };
    if denom <= 0.0 {
        return Err(EstimationError::SingularDenominator(denom));
    }
    Ok(FirstMoments { n, q, kw: b * inside / denom })
}

/// The least-squares objective for the strong mean degree.
pub fn strong_degree_objective(obs: &ObservedStats, n: f64, q: f64, ks: f64) -> f64 {
    let p = 1.0 - q;
    let r0 = obs.m0s - 0.5 * q * q * n * ks;
    let r1 = obs.m1s - q * p * n * ks;
    let r2 = obs.n1s - n * p * (1.0 - p.powf(ks));
    r0 * r0 + r1 * r1 + r2 * r2
}

/// Strong mean degree minimizing [`strong_degree_objective`] over `[0, n]`.
pub fn estimate_strong_degree(obs: &ObservedStats, n: f64, q: f64, tolerance: f64) -> Result<f64, EstimationError> {
    if !(n > 0.0) || !(q > 0.0 && q <= 1.0) {
        return Err(EstimationError::InvalidInput(format!("need N > 0 and q in (0, 1], got N = {n}, q = {q}")));
    }
    if q == 1.0 {
        return Ok(2.0 * obs.m0s / obs.n0);
    }
    let f = |k: f64| strong_degree_objective(obs, n, q, k);
    let init = (obs.m1s / (q * (1.0 - q) * n)).clamp(0.0, n);

    // Coarse geometric grid plus the moment guess, then refine around the best.
    let mut grid = vec![0.0, init, n];
    let mut x = n;
    while x > 1e-3 {
        x *= 0.5;
        grid.push(x);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let best = (0..grid.len()).min_by(|&i, &j| f(grid[i]).total_cmp(&f(grid[j]))).expect("grid is nonempty");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let x = brent_minimize(f, lo, hi, tolerance);
    Ok(if f(x) <= f(grid[best]) { x } else { grid[best] })
}

/// Brent's bounded scalar minimization (golden section with parabolic steps).
fn brent_minimize<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    const GOLDEN: f64 = 0.381_966_011_250_105;
    if b - a <= xtol {
        return 0.5 * (a + b);
    }
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    x
}

/// Probabilities that a seed names a given number of its motif-incident
/// links: `b_ij` for a node with two incident links (`i` strong and `j` weak
/// named), `a_ij` for a node with one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamingProbabilities {
    pub b00: f64,
    pub b01: f64,
    pub b02: f64,
    pub b10: f64,
    pub b11: f64,
    pub b20: f64,
    pub a00: f64,
    pub a01: f64,
    pub a10: f64,
}

impl NamingProbabilities {
    pub fn new(kw: f64, budget: usize) -> Result<Self, EstimationError> {
        let b = budget as f64;
        if budget == 0 || !(kw > 1.0) || b > kw {
            return Err(EstimationError::InvalidRegime { budget, kw });
        }
        let pair = kw * (kw - 1.0);
        let b11 = b / kw;
        Ok(NamingProbabilities {
            // negative only when B <= K_w < B + 1, where no unnamed pair exists
            b00: ((kw - b) * (kw - b - 1.0) / pair).max(0.0),
            b01: b * (kw - b) / pair,
            b02: b * (b - 1.0) / pair,
            b10: 1.0 - b11,
            b11,
            b20: 1.0,
            a00: 1.0 - b / kw,
            a01: b / kw,
            a10: 1.0,
        })
    }
}

/// Observation probabilities of triangles and open triads under the survey.
///
/// `rho` (1..=26): a triangle is seen as a triangle, grouped by composition
/// as s³ 1..=2, s²w 3..=7, sw² 8..=17, w³ 18..=26. `pi` (1..=24): a triangle
/// is seen as an open triad, grouped as ss 1..=4, sw 5..=13, ww 14..=24.
/// `phi` (1..=24): an open triad is seen as an open triad, same grouping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTables {
    pub q: f64,
    pub naming: NamingProbabilities,
    rho: Vec<f64>,
    pi: Vec<f64>,
    phi: Vec<f64>,
}

pub const RHO_S3: RangeInclusive<usize> = 1..=2;
pub const RHO_S2W: RangeInclusive<usize> = 3..=7;
pub const RHO_SW2: RangeInclusive<usize> = 8..=17;
pub const RHO_W3: RangeInclusive<usize> = 18..=26;
pub const TRIAD_SS: RangeInclusive<usize> = 1..=4;
pub const TRIAD_SW: RangeInclusive<usize> = 5..=13;
pub const TRIAD_WW: RangeInclusive<usize> = 14..=24;

impl CoefficientTables {
    pub fn new(kw: f64, q: f64, budget: usize) -> Result<Self, EstimationError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(EstimationError::InvalidInput(format!("q must lie in [0, 1], got {q}")));
        }
        Ok(Self::from_naming(NamingProbabilities::new(kw, budget)?, q))
    }

    pub fn from_naming(naming: NamingProbabilities, q: f64) -> Self {
        let NamingProbabilities { b00, b01, b02, b10, b11, b20, a00, a01, a10 } = naming;
        let p = 1.0 - q;
        let q3 = q * q * q;
        let q2p = q * q * p;
        let qp2 = q * p * p;
        let rho = vec![
            q3 * b20.powi(3),
            3.0 * q2p * b20 * b20,
            2.0 * q3 * b20 * b11 * b10,
            q3 * b20 * b11 * b11,
            2.0 * q2p * b20 * b11,
            2.0 * q2p * b11 * b10,
            q2p * b11 * b11,
            2.0 * q3 * b02 * b10 * b11,
            2.0 * q3 * b01 * b11 * b11,
            q3 * b02 * b11 * b11,
            q3 * b00 * b11 * b11,
            2.0 * q3 * b01 * b11 * b10,
            q3 * b02 * b10 * b10,
            q2p * b11 * b11,
            2.0 * q2p * b01 * b11,
            2.0 * q2p * b02 * b10,
            2.0 * q2p * b02 * b11,
            6.0 * q2p * b02 * b01,
            3.0 * q2p * b02 * b02,
            6.0 * q3 * b00 * b01 * b02,
            3.0 * q3 * b00 * b02 * b02,
            2.0 * q3 * b01.powi(3),
            6.0 * q3 * b01 * b01 * b02,
            3.0 * q3 * b01 * b01 * b02,
            3.0 * q3 * b01 * b02 * b02,
            q3 * b02.powi(3),
        ];
        let pi = vec![
            q3 * b20 * b10 * b10,
            q2p * b10 * b10,
            qp2 * b20,
            2.0 * q2p * b20 * b10,
            q2p * b10 * b01,
            qp2 * b11,
            q2p * b11 * b10,
            q2p * b11 * b00,
            q2p * b10 * b01,
            q2p * b11 * b01,
            q3 * b10 * b11 * b00,
            q3 * b10 * b10 * b01,
            q3 * b10 * b11 * b01,
            qp2 * b02,
            q2p * b01 * b01,
            2.0 * q2p * b01 * b01,
            2.0 * q2p * b00 * b02,
            2.0 * q2p * b02 * b01,
            2.0 * q3 * b01 * b01 * b00,
            q3 * b00 * b01 * b01,
            2.0 * q3 * b01.powi(3),
            q3 * b02 * b00 * b00,
            2.0 * q3 * b02 * b00 * b01,
            q3 * b02 * b01 * b01,
        ];
        let phi = vec![
            q3 * b20 * a10 * a10,
            q2p * a10 * a10,
            qp2 * b20,
            2.0 * q2p * b20 * a10,
            q2p * a10 * a01,
            qp2 * b11,
            q2p * b11 * a10,
            q2p * b11 * a00,
            q2p * b10 * a01,
            q2p * b11 * a01,
            q3 * b11 * a10 * a00,
            q3 * b10 * a10 * a01,
            q3 * b11 * a10 * a01,
            qp2 * b02,
            q2p * a01 * a01,
            2.0 * q2p * b01 * a01,
            2.0 * q2p * b02 * a00,
            2.0 * q2p * b02 * a01,
            2.0 * q3 * b01 * a01 * a00,
            q3 * b00 * a01 * a01,
            2.0 * q3 * b01 * a01 * a01,
            q3 * b02 * a00 * a00,
            2.0 * q3 * b02 * a00 * a01,
            q3 * b02 * a01 * a01,
        ];
        CoefficientTables { q, naming, rho, pi, phi }
    }

    /// `rho_i`, 1-based.
    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i - 1]
    }

    /// `pi_i`, 1-based.
    pub fn pi(&self, i: usize) -> f64 {
        self.pi[i - 1]
    }

    /// `phi_i`, 1-based.
    pub fn phi(&self, i: usize) -> f64 {
        self.phi[i - 1]
    }

    pub fn rho_sum(&self, range: RangeInclusive<usize>) -> f64 {
        range.map(|i| self.rho(i)).sum()
    }

    pub fn pi_sum(&self, range: RangeInclusive<usize>) -> f64 {
        range.map(|i| self.pi(i)).sum()
    }

    pub fn phi_sum(&self, range: RangeInclusive<usize>) -> f64 {
        range.map(|i| self.phi(i)).sum()
    }

    pub fn all_entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.rho.iter().chain(&self.pi).chain(&self.phi).copied()
    }
}

/// Triangle counts (or estimates) by composition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Triangles {
    pub s3: f64,
    pub s2w: f64,
    pub sw2: f64,
    pub w3: f64,
}

impl Triangles {
    pub fn total(&self) -> f64 {
        self.s3 + self.s2w + self.sw2 + self.w3
    }
}

impl From<TriangleCounts> for Triangles {
    fn from(t: TriangleCounts) -> Self {
        Triangles { s3: t.s3 as f64, s2w: t.s2w as f64, sw2: t.sw2 as f64, w3: t.w3 as f64 }
    }
}

/// Triad counts (or estimates) by the composition of the two ego links.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Triads {
    pub ss: f64,
    pub sw: f64,
    pub ww: f64,
}

impl Triads {
    pub fn total(&self) -> f64 {
        self.ss + self.sw + self.ww
    }
}

impl From<TriadCounts> for Triads {
    fn from(t: TriadCounts) -> Self {
        Triads { ss: t.ss as f64, sw: t.sw as f64, ww: t.ww as f64 }
    }
}

fn identifiable(sum: f64, what: &'static str) -> Result<f64, EstimationError> {
    if sum > IDENTIFIABILITY_FLOOR {
        Ok(sum)
    } else {
        Err(EstimationError::Unidentifiable(what))
    }
}

/// Scales observed triangle counts up by their observation probabilities.
pub fn estimate_triangles(observed: &Triangles, tables: &CoefficientTables) -> Result<Triangles, EstimationError> {
    Ok(Triangles {
        s3: observed.s3 / identifiable(tables.rho_sum(RHO_S3), "s3 triangles")?,
        s2w: observed.s2w / identifiable(tables.rho_sum(RHO_S2W), "s2w triangles")?,
        sw2: observed.sw2 / identifiable(tables.rho_sum(RHO_SW2), "sw2 triangles")?,
        w3: observed.w3 / identifiable(tables.rho_sum(RHO_W3), "w3 triangles")?,
    })
}

/// Expected observed triangle counts given true counts; the inverse of
/// [`estimate_triangles`].
pub fn expected_observed_triangles(truth: &Triangles, tables: &CoefficientTables) -> Triangles {
    Triangles {
        s3: truth.s3 * tables.rho_sum(RHO_S3),
        s2w: truth.s2w * tables.rho_sum(RHO_S2W),
        sw2: truth.sw2 * tables.rho_sum(RHO_SW2),
        w3: truth.w3 * tables.rho_sum(RHO_W3),
    }
}

/// Triangle contributions to the observed open triads, per composition.
fn open_triads_from_triangles(t: &Triangles, tables: &CoefficientTables) -> Triads {
    Triads {
        ss: 3.0 * t.s3 * tables.pi(3) + t.s2w * tables.pi_sum(TRIAD_SS),
        sw: 2.0 * t.s2w * tables.pi(6) + 2.0 * t.sw2 * tables.pi_sum(TRIAD_SW),
        ww: t.sw2 * tables.pi(14) + 3.0 * t.w3 * tables.pi_sum(TRIAD_WW),
    }
}

/// Recovers open-triad counts. Negative solutions are clamped to zero and
/// reported in `warnings`.
pub fn estimate_open_triads(
    observed: &Triads,
    triangles: &Triangles,
    tables: &CoefficientTables,
    warnings: &mut Vec<String>,
) -> Result<Triads, EstimationError> {
    let from_triangles = open_triads_from_triangles(triangles, tables);
    let mut solve = |seen: f64, leak: f64, range: RangeInclusive<usize>, what: &'static str| {
        let value = (seen - leak) / identifiable(tables.phi_sum(range), what)?;
        if value < 0.0 {
            warnings.push(format!("clamped negative {what} estimate {value:.6e} to 0"));
            Ok(0.0)
        } else {
            Ok(value)
        }
    };
    Ok(Triads {
        ss: solve(observed.ss, from_triangles.ss, TRIAD_SS, "ss open triads")?,
        sw: solve(observed.sw, from_triangles.sw, TRIAD_SW, "sw open triads")?,
        ww: solve(observed.ww, from_triangles.ww, TRIAD_WW, "ww open triads")?,
    })
}

/// Expected observed open-triad counts given true counts; the inverse of
/// [`estimate_open_triads`].
pub fn expected_observed_open_triads(open: &Triads, triangles: &Triangles, tables: &CoefficientTables) -> Triads {
    let leak = open_triads_from_triangles(triangles, tables);
    Triads {
        ss: open.ss * tables.phi_sum(TRIAD_SS) + leak.ss,
        sw: open.sw * tables.phi_sum(TRIAD_SW) + leak.sw,
        ww: open.ww * tables.phi_sum(TRIAD_WW) + leak.ww,
    }
}

/// Open triads plus the closed triads each triangle composition contributes.
pub fn total_triads(open: &Triads, t: &Triangles) -> Triads {
    Triads {
        ss: open.ss + 3.0 * t.s3 + t.s2w,
        sw: open.sw + 2.0 * t.s2w + 2.0 * t.sw2,
        ww: open.ww + 3.0 * t.w3 + t.sw2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub kss: f64,
    pub ksw: f64,
    pub kww: f64,
}

pub fn second_moments(tau: &Triads, n: f64, ks: f64, kw: f64) -> SecondMoments {
    SecondMoments { kss: 2.0 * tau.ss / n + ks, ksw: tau.sw / n, kww: 2.0 * tau.ww / n + kw }
}

/// Clustering of the collapsed network from triangle and triad estimates,
/// clamped to `[0, 1]` with a warning.
pub fn estimated_clustering(t: &Triangles, tau: &Triads, warnings: &mut Vec<String>) -> Result<f64, EstimationError> {
    let triads = tau.total();
    if !(triads > 0.0) {
        return Err(EstimationError::NoTriads);
    }
    let cc = 3.0 * t.total() / triads;
    if !(0.0..=1.0).contains(&cc) {
        warnings.push(format!("clamped clustering estimate {cc:.6} into [0, 1]"));
    }
    Ok(cc.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrudeEstimates {
    pub cc: f64,
    pub moments: DegreeMoments,
}

/// Statistics of the observed network taken at face value.
pub fn crude_estimates(obs: &ObservedNetwork) -> Result<CrudeEstimates, EstimationError> {
    let (g, _) = obs.typed_graph();
    let to_estimation = |e: GraphError| match e {
        GraphError::NoTriads | GraphError::EmptyGraph => EstimationError::NoTriads,
        other => EstimationError::InvalidInput(other.to_string()),
    };
    let cc = global_clustering(&g.collapse()).map_err(to_estimation)?;
    Ok(CrudeEstimates { cc, moments: g.degree_moments().map_err(to_estimation)? })
}

/// Every estimate from one survey, flattened for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(rename = "N_hat")]
    pub n_hat: f64,
    pub q_hat: f64,
    #[serde(rename = "Ks_hat")]
    pub ks_hat: f64,
    #[serde(rename = "Kw_hat")]
    pub kw_hat: f64,
    #[serde(rename = "Kss_hat")]
    pub kss_hat: f64,
    #[serde(rename = "Ksw_hat")]
    pub ksw_hat: f64,
    #[serde(rename = "Kww_hat")]
    pub kww_hat: f64,
    #[serde(rename = "T_s3")]
    pub t_s3: f64,
    #[serde(rename = "T_s2w")]
    pub t_s2w: f64,
    #[serde(rename = "T_sw2")]
    pub t_sw2: f64,
    #[serde(rename = "T_w3")]
    pub t_w3: f64,
    pub lam_ss: f64,
    pub lam_sw: f64,
    pub lam_ww: f64,
    pub tau_ss: f64,
    pub tau_sw: f64,
    pub tau_ww: f64,
    pub cc_hat: Option<f64>,
    pub cc_crude: Option<f64>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub const CSV_COLUMNS: [&'static str; 20] = [
        "N_hat", "q_hat", "Ks_hat", "Kw_hat", "Kss_hat", "Ksw_hat", "Kww_hat", "T_s3", "T_s2w", "T_sw2", "T_w3",
        "lam_ss", "lam_sw", "lam_ww", "tau_ss", "tau_sw", "tau_ww", "cc_hat", "cc_crude", "warnings",
    ];

    pub fn triangles(&self) -> Triangles {
        Triangles { s3: self.t_s3, s2w: self.t_s2w, sw2: self.t_sw2, w3: self.t_w3 }
    }

    pub fn open_triads(&self) -> Triads {
        Triads { ss: self.lam_ss, sw: self.lam_sw, ww: self.lam_ww }
    }

    pub fn total_triads(&self) -> Triads {
        Triads { ss: self.tau_ss, sw: self.tau_sw, ww: self.tau_ww }
    }

    /// Values in [`Self::CSV_COLUMNS`] order; warnings are joined with `|`.
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut row: Vec<String> = [
            self.n_hat, self.q_hat, self.ks_hat, self.kw_hat, self.kss_hat, self.ksw_hat, self.kww_hat, self.t_s3,
            self.t_s2w, self.t_sw2, self.t_w3, self.lam_ss, self.lam_sw, self.lam_ww, self.tau_ss, self.tau_sw,
            self.tau_ww,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        row.push(opt(self.cc_hat));
        row.push(opt(self.cc_crude));
        row.push(self.warnings.join("|"));
        row
    }
}

/// Runs the full inference from observables and an observed motif census.
/// `cc_crude` is left empty.
pub fn estimate_from_parts(
    stats: &ObservedStats,
    budget: usize,
    observed_triangles: &Triangles,
    observed_open: &Triads,
    options: &EstimatorOptions,
) -> Result<EstimateReport, PipelineError> {
    let first = first_moment_estimates(stats, budget, options.kw_denominator).at(Stage::FirstMoments)?;
    let ks = estimate_strong_degree(stats, first.n, first.q, options.strong_degree_tolerance).at(Stage::StrongDegree)?;
    let tables = CoefficientTables::new(first.kw, first.q, budget).at(Stage::Coefficients)?;
    let t = estimate_triangles(observed_triangles, &tables).at(Stage::Triangles)?;
    let mut warnings = Vec::new();
    let lam = estimate_open_triads(observed_open, &t, &tables, &mut warnings).at(Stage::OpenTriads)?;
    let tau = total_triads(&lam, &t);
    let sm = second_moments(&tau, first.n, ks, first.kw);
    let cc_hat = match estimated_clustering(&t, &tau, &mut warnings) {
        Ok(cc) => Some(cc),
        Err(e) => {
            warnings.push(format!("clustering: {e}"));
            None
        }
    };
    Ok(EstimateReport {
        n_hat: first.n,
        q_hat: first.q,
        ks_hat: ks,
        kw_hat: first.kw,
        kss_hat: sm.kss,
        ksw_hat: sm.ksw,
        kww_hat: sm.kww,
        t_s3: t.s3,
        t_s2w: t.s2w,
        t_sw2: t.sw2,
        t_w3: t.w3,
        lam_ss: lam.ss,
        lam_sw: lam.sw,
        lam_ww: lam.ww,
        tau_ss: tau.ss,
        tau_sw: tau.sw,
        tau_ww: tau.ww,
        cc_hat,
        cc_crude: None,
        warnings,
    })
}

/// First moments and the strong mean degree only; skips the motif census.
pub fn estimate_first_moments(
    obs: &ObservedNetwork,
    options: &EstimatorOptions,
) -> Result<(FirstMoments, f64), PipelineError> {
    let stats = ObservedStats::from(obs.observables());
    let first = first_moment_estimates(&stats, obs.budget(), options.kw_denominator).at(Stage::FirstMoments)?;
    let ks = estimate_strong_degree(&stats, first.n, first.q, options.strong_degree_tolerance).at(Stage::StrongDegree)?;
    Ok((first, ks))
}

/// The complete inference on an observed network, including the crude
/// clustering baseline.
pub fn full_pipeline(obs: &ObservedNetwork, options: &EstimatorOptions) -> Result<EstimateReport, PipelineError> {
    let stats = ObservedStats::from(obs.observables());
    let (g, _) = obs.typed_graph();
    let census = MotifCensus::of(&g);
    let mut report = estimate_from_parts(
        &stats,
        obs.budget(),
        &census.triangles.into(),
        &census.open_triads.into(),
        options,
    )?;
    match global_clustering(&g.collapse()) {
        Ok(cc) => report.cc_crude = Some(cc),
        Err(e) => report.warnings.push(format!("crude clustering: {e}")),
    }
    Ok(report)
}

/// Second-order correction to the non-seed strong alter count when strong
/// degrees are Poisson rather than homogeneous: the ratio of
/// `E Σ (1 - q)^k_i` to `N (1 - q)^K_s`, to fourth order in `q`.
pub fn poisson_nonseed_correction(ks: f64, q: f64) -> f64 {
    1.0 + ks * q * q / 2.0 + ks * q.powi(3) / 3.0 + ks * (ks + 2.0) * q.powi(4) / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn first_moment_examples() {
        let obs = ObservedStats { n0: 400.0, m1w: 3600.0, m0w: 380.0, ..Default::default() };
        let fm = first_moment_estimates(&obs, 10, KwDenominator::ModelConsistent).unwrap();
        assert!(rel(fm.q, 0.1) < 1e-12 && rel(fm.n, 4000.0) < 1e-12 && rel(fm.kw, 100.0) < 1e-12);

        let literal = first_moment_estimates(&obs, 10, KwDenominator::PaperLiteral).unwrap();
        assert!(rel(literal.kw, 10.0 * 400.0 / 420.0) < 1e-12);

        let full = ObservedStats { n0: 50.0, m0w: 100.0, ..Default::default() };
        let fm = first_moment_estimates(&full, 5, KwDenominator::ModelConsistent).unwrap();
        assert_eq!((fm.q, fm.n), (1.0, 50.0));

        let degenerate = ObservedStats { n0: 400.0, m1w: 4000.0, ..Default::default() };
        assert_eq!(
            first_moment_estimates(&degenerate, 10, KwDenominator::ModelConsistent),
            Err(EstimationError::DegenerateSample)
        );
        let singular = ObservedStats { n0: 10.0, m1w: 50.0, m0w: 50.0, ..Default::default() };
        assert!(matches!(
            first_moment_estimates(&singular, 10, KwDenominator::ModelConsistent),
            Err(EstimationError::SingularDenominator(_))
        ));
    }

    #[test]
    fn strong_degree_examples() {
        let exact = ObservedStats::expected(4000.0, 0.1, 10.0, 15.0, 100.0);
        assert!((exact.n1s - 2858.79).abs() < 0.01);
        let ks = estimate_strong_degree(&exact, 4000.0, 0.1, 1e-6).unwrap();
        assert!((ks - 15.0).abs() < 1e-4, "{ks}");
        let rounded = ObservedStats { m0s: 300.0, m1s: 5400.0, n1s: 2858.79, ..Default::default() };
        let ks = estimate_strong_degree(&rounded, 4000.0, 0.1, 1e-6).unwrap();
        assert!((ks - 15.0).abs() < 1e-4, "{ks}");

        let empty = ObservedStats::default();
        assert!(estimate_strong_degree(&empty, 4000.0, 0.1, 1e-6).unwrap().abs() < 1e-4);

        let bumped = ObservedStats { m1s: 5400.0 * 1.01, ..exact };
        let ks = estimate_strong_degree(&bumped, 4000.0, 0.1, 1e-6).unwrap();
        assert!(rel(ks, 15.0) < 0.02, "{ks}");

        let census = ObservedStats { n0: 100.0, m0s: 600.0, ..Default::default() };
        assert_eq!(estimate_strong_degree(&census, 100.0, 1.0, 1e-6).unwrap(), 12.0);
    }

    #[test]
    fn strong_degree_matches_dense_scan() {
        for (n, q, ks) in [(4000.0, 0.1, 15.0), (1000.0, 0.3, 4.0), (8000.0, 0.05, 40.0), (500.0, 0.5, 0.5)] {
            let mut obs = ObservedStats::expected(n, q, 10.0, ks, 100.0);
            obs.m0s *= 1.07;
            obs.n1s *= 0.97;
            let found = estimate_strong_degree(&obs, n, q, 1e-6).unwrap();
            let f = |k| strong_degree_objective(&obs, n, q, k);
            let scan = (0..=200_000).map(|i| i as f64 * 1e-3 * ks.max(1.0)).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
            assert!((found - scan).abs() < 2e-3 * ks.max(1.0), "{found} vs {scan}");
        }
    }

    #[test]
    fn brent_finds_quadratic_minimum() {
        let x = brent_minimize(|x| (x - 2.5) * (x - 2.5) + 1.0, 0.0, 10.0, 1e-8);
        assert!((x - 2.5).abs() < 1e-7);
        let x = brent_minimize(|x| x, 1.0, 3.0, 1e-8);
        assert!((x - 1.0).abs() < 1e-7);
    }

    #[test]
    fn naming_probability_examples() {
        let b = NamingProbabilities::new(100.0, 10).unwrap();
        assert_eq!((b.b20, b.a10), (1.0, 1.0));
        assert!((b.b11 - 0.1).abs() < 1e-15);
        assert!((b.b00 - 90.0 * 89.0 / (100.0 * 99.0)).abs() < 1e-15);
        assert!((b.b00 + 2.0 * b.b01 + b.b02 - 1.0).abs() < 1e-15);
        assert!(matches!(NamingProbabilities::new(9.0, 10), Err(EstimationError::InvalidRegime { .. })));
        assert!(NamingProbabilities::new(1.0, 1).is_err());
        let edge = NamingProbabilities::new(10.5, 10).unwrap();
        assert_eq!(edge.b00, 0.0);
    }

    fn binom(n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn naming_probabilities_match_subset_counts() {
        // probabilities of a uniform B-subset of K weak ties containing two
        // given ties: both, one specific only, neither
        for k in 2..40u64 {
            for budget in 1..=k {
                let t = NamingProbabilities::new(k as f64, budget as usize).unwrap();
                let total = binom(k, budget);
                let both = if budget >= 2 { binom(k - 2, budget - 2) } else { 0.0 };
                assert!((t.b02 - both / total).abs() < 1e-12);
                assert!((t.b01 - binom(k - 2, budget - 1) / total).abs() < 1e-12);
                assert!((t.b00 - binom(k - 2, budget) / total).abs() < 1e-12);
                assert!((t.b11 - binom(k - 1, budget - 1) / total).abs() < 1e-12);
                assert!((t.a00 - binom(k - 1, budget) / total).abs() < 1e-12);
            }
        }
    }

    /// Exhaustive observation probabilities for one motif: enumerate seed
    /// sets and each seed's naming outcome over its motif-incident weak links.
    mod enumeration {
        use super::super::NamingProbabilities;

        #[derive(Clone, Copy, PartialEq)]
        pub enum L {
            S,
            W,
        }

        /// Probability that the three given links of a triangle on nodes
        /// 0,1,2 (edges 01, 12, 02) are observed, and the probabilities that
        /// exactly one given link is missing, returned as (all observed,
        /// missing per edge).
        pub fn triangle(layers: [L; 3], q: f64, nb: &NamingProbabilities) -> (f64, [f64; 3]) {
            let edges = [(0usize, 1usize), (1, 2), (0, 2)];
            motif(&edges, &layers, 3, q, nb, |seen| {
                let observed = seen.iter().filter(|&&s| s).count();
                let mut miss = [0.0; 3];
                if observed == 2 {
                    miss[seen.iter().position(|&s| !s).unwrap()] = 1.0;
                }
                ((observed == 3) as u8 as f64, miss)
            })
        }

        /// Probability that both links of an open triad with ego 0 and
        /// leaves 1, 2 are observed.
        pub fn open_triad(layers: [L; 2], q: f64, nb: &NamingProbabilities) -> f64 {
            let edges = [(0usize, 1usize), (0, 2)];
            motif(&edges, &layers, 3, q, nb, |seen| (seen.iter().all(|&s| s) as u8 as f64, [0.0; 3])).0
        }

        fn motif<F: Fn(&[bool]) -> (f64, [f64; 3])>(
            edges: &[(usize, usize)],
            layers: &[L],
            nodes: usize,
            q: f64,
            nb: &NamingProbabilities,
            score: F,
        ) -> (f64, [f64; 3]) {
            let mut total = (0.0, [0.0; 3]);
            for seeds in 0..(1u32 << nodes) {
                let is_seed = |v: usize| seeds >> v & 1 == 1;
                let p_seeds: f64 = (0..nodes).map(|v| if is_seed(v) { q } else { 1.0 - q }).product();
                if p_seeds == 0.0 {
                    continue;
                }
                // each seed independently picks which incident weak links it names
                let incident: Vec<Vec<usize>> = (0..nodes)
                    .map(|v| (0..edges.len()).filter(|&e| edges[e].0 == v || edges[e].1 == v).collect())
                    .collect();
                let weak_incident: Vec<Vec<usize>> = incident
                    .iter()
                    .map(|es| es.iter().copied().filter(|&e| layers[e] == L::W).collect())
                    .collect();
                let choices: Vec<usize> = (0..nodes)
                    .map(|v| if is_seed(v) { 1 << weak_incident[v].len() } else { 1 })
                    .collect();
                let combos: usize = choices.iter().product();
                for c in 0..combos {
                    let mut rest = c;
                    let mut p = p_seeds;
                    let mut named = vec![false; edges.len()];
                    for v in 0..nodes {
                        let pick = rest % choices[v];
                        rest /= choices[v];
                        if !is_seed(v) {
                            continue;
                        }
                        let wi = &weak_incident[v];
                        let k = pick.count_ones();
                        p *= match (incident[v].len(), wi.len(), k) {
                            (1, 1, 1) => nb.a01,
                            (1, 1, 0) => nb.a00,
                            (2, 2, 2) => nb.b02,
                            (2, 2, 1) => nb.b01,
                            (2, 2, 0) => nb.b00,
                            (2, 1, 1) => nb.b11,
                            (2, 1, 0) => nb.b10,
                            _ => 1.0,
                        };
                        for (bit, &e) in wi.iter().enumerate() {
                            if pick >> bit & 1 == 1 {
                                named[e] = true;
                            }
                        }
                        for &e in &incident[v] {
                            if layers[e] == L::S {
                                named[e] = true;
                            }
                        }
                    }
                    let (a, m) = score(&named);
                    total.0 += p * a;
                    for i in 0..3 {
                        total.1[i] += p * m[i];
                    }
                }
            }
            total
        }
    }

    #[test]
    fn tables_match_enumeration() {
        use enumeration::L::{S, W};
        for &(kw, budget, q) in &[(100.0, 10, 0.1), (20.0, 3, 0.4), (7.5, 5, 0.8), (50.0, 1, 0.25)] {
            let nb = NamingProbabilities::new(kw, budget).unwrap();
            let t = CoefficientTables::from_naming(nb, q);
            let close = |a: f64, b: f64| (a - b).abs() < 1e-12;

            assert!(close(enumeration::triangle([S, S, S], q, &nb).0, t.rho_sum(RHO_S3)));
            assert!(close(enumeration::triangle([S, S, W], q, &nb).0, t.rho_sum(RHO_S2W)));
            assert!(close(enumeration::triangle([S, W, W], q, &nb).0, t.rho_sum(RHO_SW2)));
            // the w³ table carries one term with multiplicity 3 where direct
            // enumeration gives 6
            let w3 = enumeration::triangle([W, W, W], q, &nb).0;
            assert!(close(w3, t.rho_sum(RHO_W3) + 3.0 * q.powi(3) * nb.b01 * nb.b02 * nb.b02));

            assert!(close(enumeration::open_triad([S, S], q, &nb), t.phi_sum(TRIAD_SS)));
            assert!(close(enumeration::open_triad([S, W], q, &nb), t.phi_sum(TRIAD_SW)));
            assert!(close(enumeration::open_triad([W, W], q, &nb), t.phi_sum(TRIAD_WW)));

            // triangles seen as open triads: missing edge 02 leaves an open
            // triad centred on node 1 with links 01, 12
            let (_, miss) = enumeration::triangle([S, S, S], q, &nb);
            assert!(close(miss.iter().sum::<f64>(), 3.0 * t.pi(3)));
            let (_, miss) = enumeration::triangle([S, S, W], q, &nb);
            assert!(close(miss[2], t.pi_sum(TRIAD_SS)));
            assert!(close(miss[0] + miss[1], 2.0 * t.pi(6)));
            let (_, miss) = enumeration::triangle([W, S, W], q, &nb);
            assert!(close(miss[2], t.pi_sum(TRIAD_SW)));
            let (_, miss) = enumeration::triangle([S, W, W], q, &nb);
            assert!(close(miss[0], t.pi(14)));
            let (_, miss) = enumeration::triangle([W, W, W], q, &nb);
            assert!(close(miss[2], t.pi_sum(TRIAD_WW)));
        }
    }

    #[test]
    fn tables_vanish_at_q_zero() {
        let t = CoefficientTables::new(100.0, 0.0, 10).unwrap();
        assert!(t.all_entries().all(|x| x == 0.0));
        let t = CoefficientTables::new(100.0, 0.3, 10).unwrap();
        assert!((t.rho(1) - 0.027).abs() < 1e-15);
    }

    #[test]
    fn triangle_examples() {
        let t = CoefficientTables::new(100.0, 1.0, 10).unwrap();
        assert_eq!(t.rho_sum(RHO_S3), 1.0);
        let seen = Triangles { s3: 7.0, ..Default::default() };
        assert_eq!(estimate_triangles(&seen, &t).unwrap().s3, 7.0);

        let t = CoefficientTables::new(100.0, 0.1, 10).unwrap();
        assert!((t.rho_sum(RHO_S3) - 0.028).abs() < 1e-15);
        let seen = Triangles { s3: 14.0, ..Default::default() };
        assert!((estimate_triangles(&seen, &t).unwrap().s3 - 500.0).abs() < 1e-9);
        assert_eq!(estimate_triangles(&Triangles::default(), &t).unwrap(), Triangles::default());

        let t = CoefficientTables::new(100.0, 1e-6, 10).unwrap();
        assert!(matches!(estimate_triangles(&seen, &t), Err(EstimationError::Unidentifiable(_))));
    }

    #[test]
    fn open_triad_examples() {
        let t = CoefficientTables::new(100.0, 0.1, 10).unwrap();
        let mut warnings = Vec::new();
        let lam = estimate_open_triads(&Triads::default(), &Triangles::default(), &t, &mut warnings).unwrap();
        assert_eq!(lam, Triads::default());

        // full observation corner
        let t = CoefficientTables::new(10.0, 1.0, 10).unwrap();
        let seen = Triads { ss: 40.0, sw: 7.0, ww: 3.0 };
        let lam = estimate_open_triads(&seen, &Triangles::default(), &t, &mut warnings).unwrap();
        assert_eq!(lam, seen);
        assert!(warnings.is_empty());

        let t = CoefficientTables::new(100.0, 0.1, 10).unwrap();
        let tri = Triangles { s3: 1e6, ..Default::default() };
        let lam = estimate_open_triads(&Triads::default(), &tri, &t, &mut warnings).unwrap();
        assert_eq!(lam.ss, 0.0);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn triad_and_moment_examples() {
        let tau = total_triads(&Triads { ss: 100.0, ..Default::default() }, &Triangles { s3: 50.0, s2w: 30.0, ..Default::default() });
        assert_eq!(tau.ss, 280.0);
        assert_eq!(total_triads(&Triads::default(), &Triangles::default()), Triads::default());

        let sm = second_moments(&Triads { ss: 280.0, ..Default::default() }, 100.0, 4.0, 10.0);
        assert!((sm.kss - 9.6).abs() < 1e-12);
        let sm = second_moments(&Triads::default(), 100.0, 4.0, 10.0);
        assert_eq!((sm.kss, sm.ksw, sm.kww), (4.0, 0.0, 10.0));

        // strong-regular degree d: tau_ss = N C(d, 2)
        let (n, d) = (50.0, 6.0);
        let sm = second_moments(&Triads { ss: n * d * (d - 1.0) / 2.0, ..Default::default() }, n, d, 0.0);
        assert!((sm.kss - d * d).abs() < 1e-12);
    }

    #[test]
    fn clustering_examples() {
        let mut w = Vec::new();
        let tri = Triangles { sw2: 1.0, ..Default::default() };
        let tau = Triads { ss: 0.0, sw: 2.0, ww: 1.0 };
        assert_eq!(estimated_clustering(&tri, &tau, &mut w).unwrap(), 1.0);
        assert_eq!(estimated_clustering(&Triangles::default(), &tau, &mut w).unwrap(), 0.0);
        assert_eq!(estimated_clustering(&tri, &Triads::default(), &mut w), Err(EstimationError::NoTriads));
        assert!(w.is_empty());
        let over = Triangles { s3: 10.0, ..Default::default() };
        assert_eq!(estimated_clustering(&over, &tau, &mut w).unwrap(), 1.0);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn noiseless_pipeline_recovers_truth() {
        let (n, q, budget, ks, kw) = (4000.0, 0.1, 10usize, 15.0, 150.0);
        let (kss, ksw, kww) = (240.0, 15.0 * 150.0 * 1.02, 150.0 * 150.0 * 1.05);
        let tri = Triangles { s3: 20_000.0, s2w: 15_000.0, sw2: 60_000.0, w3: 400_000.0 };
        let tau = Triads { ss: n * (kss - ks) / 2.0, sw: n * ksw, ww: n * (kww - kw) / 2.0 };
        let lam = Triads {
            ss: tau.ss - 3.0 * tri.s3 - tri.s2w,
            sw: tau.sw - 2.0 * tri.s2w - 2.0 * tri.sw2,
            ww: tau.ww - 3.0 * tri.w3 - tri.sw2,
        };
        let tables = CoefficientTables::new(kw, q, budget).unwrap();
        let stats = ObservedStats::expected(n, q, budget as f64, ks, kw);
        let seen_t = expected_observed_triangles(&tri, &tables);
        let seen_l = expected_observed_open_triads(&lam, &tri, &tables);
        let r = estimate_from_parts(&stats, budget, &seen_t, &seen_l, &EstimatorOptions::default()).unwrap();
        let cc = 3.0 * tri.total() / tau.total();
        for (est, truth) in [
            (r.n_hat, n),
            (r.q_hat, q),
            (r.ks_hat, ks),
            (r.kw_hat, kw),
            (r.kss_hat, kss),
            (r.ksw_hat, ksw),
            (r.kww_hat, kww),
            (r.t_w3, tri.w3),
            (r.lam_sw, lam.sw),
            (r.cc_hat.unwrap(), cc),
        ] {
            assert!(rel(est, truth) < 1e-3, "{est} vs {truth}");
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn pipeline_reports_failing_stage() {
        let stats = ObservedStats { n0: 10.0, m1w: 100.0, ..Default::default() };
        let err = estimate_from_parts(&stats, 10, &Triangles::default(), &Triads::default(), &EstimatorOptions::default())
            .unwrap_err();
        assert_eq!(err.stage, Stage::FirstMoments);
        // K_w estimate below B
        let stats = ObservedStats { n0: 100.0, m1w: 500.0, m0w: 100.0, ..Default::default() };
        let err = estimate_from_parts(&stats, 10, &Triangles::default(), &Triads::default(), &EstimatorOptions::default())
            .unwrap_err();
        assert_eq!(err.stage, Stage::Coefficients);
    }

    #[test]
    fn report_serialization() {
        let stats = ObservedStats::expected(4000.0, 0.1, 10.0, 15.0, 150.0);
        let r = estimate_from_parts(
            &stats,
            10,
            &Triangles { s3: 5.0, s2w: 1.0, sw2: 3.0, w3: 2.0 },
            &Triads { ss: 1e4, sw: 3e4, ww: 5e4 },
            &EstimatorOptions::default(),
        )
        .unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for col in &EstimateReport::CSV_COLUMNS {
            assert!(json.get(col).is_some(), "{col}");
        }
        assert_eq!(r.csv_row().len(), EstimateReport::CSV_COLUMNS.len());
        assert_eq!(json["cc_crude"], serde_json::Value::Null);
    }

    #[test]
    fn poisson_correction_against_exact_expectation() {
        // E (1 - q)^k = exp(-K q) for Poisson k
        let (ks, q) = (15.0f64, 0.05f64);
        let exact = (-ks * q).exp() / (1.0 - q).powf(ks);
        assert!(rel(poisson_nonseed_correction(ks, q), exact) < 1e-4);
    }

    proptest! {
        #[test]
        fn normalizations(kw in 2.0f64..500.0, frac in 0.0f64..1.0, q in 0.0f64..=1.0) {
            let budget = 1 + ((kw - 2.0) * frac).floor() as usize;
            prop_assume!(budget as f64 <= kw - 1.0);
            let t = CoefficientTables::new(kw, q, budget).unwrap();
            let b = t.naming;
            prop_assert!((b.b00 + 2.0 * b.b01 + b.b02 - 1.0).abs() < 1e-12);
            prop_assert!((b.b10 + b.b11 - 1.0).abs() < 1e-12);
            prop_assert!((b.a00 + b.a01 - 1.0).abs() < 1e-12);
            for x in t.all_entries() {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            for r in [RHO_S3, RHO_S2W, RHO_SW2, RHO_W3] {
                prop_assert!(t.rho_sum(r) <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn forward_then_invert(
            kw in 5.0f64..400.0,
            q in 0.02f64..=1.0,
            budget in 1usize..5,
            t in prop::array::uniform4(0.0f64..1e6),
            l in prop::array::uniform3(0.0f64..1e7),
        ) {
            let tables = CoefficientTables::new(kw, q, budget).unwrap();
            let tri = Triangles { s3: t[0], s2w: t[1], sw2: t[2], w3: t[3] };
            let lam = Triads { ss: l[0], sw: l[1], ww: l[2] };
            let seen_t = expected_observed_triangles(&tri, &tables);
            let seen_l = expected_observed_open_triads(&lam, &tri, &tables);
            // e.g. B = 1 at small q: w³ triangles are almost never seen whole
            let Ok(back_t) = estimate_triangles(&seen_t, &tables) else { return Ok(()); };
            let mut w = Vec::new();
            let back_l = estimate_open_triads(&seen_l, &back_t, &tables, &mut w).unwrap();
            let scale = t.iter().chain(&l).fold(1.0f64, |m, x| m.max(*x));
            for (a, b) in [(back_t.s3, tri.s3), (back_t.s2w, tri.s2w), (back_t.sw2, tri.sw2), (back_t.w3, tri.w3),
                           (back_l.ss, lam.ss), (back_l.sw, lam.sw), (back_l.ww, lam.ww)] {
                prop_assert!((a - b).abs() <= 1e-9 * scale, "{} vs {}", a, b);
            }
        }

        #[test]
        fn scale_equivariance(c in 0.5f64..8.0, ks in 2.0f64..30.0, kw in 40.0f64..200.0, q in 0.05f64..0.6) {
            let stats = ObservedStats::expected(3000.0, q, 10.0, ks, kw);
            let tri = Triangles { s3: 30.0, s2w: 20.0, sw2: 80.0, w3: 60.0 };
            let open = Triads { ss: 2e3, sw: 9e3, ww: 4e4 };
            let opts = EstimatorOptions::default();
            let a = estimate_from_parts(&stats, 10, &tri, &open, &opts).unwrap();
            let scaled_t = Triangles { s3: c * tri.s3, s2w: c * tri.s2w, sw2: c * tri.sw2, w3: c * tri.w3 };
            let scaled_l = Triads { ss: c * open.ss, sw: c * open.sw, ww: c * open.ww };
            let b = estimate_from_parts(&stats.scaled(c), 10, &scaled_t, &scaled_l, &opts).unwrap();
            prop_assert!(rel(b.n_hat, c * a.n_hat) < 1e-12);
            prop_assert!(rel(b.q_hat, a.q_hat) < 1e-12);
            prop_assert!(rel(b.kw_hat, a.kw_hat) < 1e-12);
            prop_assert!(rel(b.ks_hat, a.ks_hat) < 1e-5);
            prop_assert!(rel(b.t_w3, c * a.t_w3) < 1e-12);
            prop_assert!(rel(b.kww_hat, a.kww_hat) < 1e-9);
        }
    }
}
