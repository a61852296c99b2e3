use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fcnet_core::estimators::{full_pipeline, EstimateReport, EstimatorOptions, KwDenominator};
use fcnet_core::generators::{generate_single_layer, generate_two_layer, GeneratorConfig, Model};
use fcnet_core::graph::{Layer, TwoLayerGraph};
use fcnet_core::jackknife::{jackknife, Parameter};
use fcnet_core::sampler::{conduct_survey, InsufficientWeakPolicy, ObservedNetwork, SamplingConfig, SurveyExport};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::{
    run_approx_check, run_jackknife_sweep, run_mc_sweep, write_csv, ApproxRecord, JackknifeRecord, TrialRecord,
};
use crate::report::aggregate;
use crate::seeds::{rng_for, GRAPH_STREAM, SURVEY_STREAM};

#[derive(Parser, Debug)]
#[command(name = "fcnet", version, about = "Two-layer network surveys: simulate, estimate, and run Monte Carlo studies")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Add an inference wall-time column to trial output.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic network as an edge list.
    Generate(GenerateArgs),
    /// Survey an edge-list network and write the survey JSON.
    Sample(SampleArgs),
    /// Estimate network parameters from a survey.
    Estimate(EstimateArgs),
    /// Monte Carlo sweep over (N, q, B).
    Mc(SweepArgs),
    /// Jackknife sweep over (N, q, B).
    Jackknife(SweepArgs),
    /// Mean-field approximation error per generator family.
    ApproxCheck(ApproxArgs),
    /// Median and IQR of estimate/truth ratios per cell of a trial CSV.
    Report(ReportArgs),
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value = "sw")]
    pub model: Model,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Strong mean degree range, `LO,HI`.
    #[arg(long, value_parser = parse_range)]
    pub strong_range: Option<(f64, f64)>,
    /// Weak (or single-layer) mean degree range, `LO,HI`.
    #[arg(long, value_parser = parse_range)]
    pub weak_range: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Edge-list file as written by `generate`.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub budget: usize,
    /// Let nodes with fewer than B weak ties name all of them.
    #[arg(long)]
    pub report_all: bool,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Survey JSON to estimate from.
    #[arg(long, conflicts_with_all = ["graph", "q", "budget"])]
    pub survey: Option<PathBuf>,
    /// Edge-list network to survey first.
    #[arg(long, requires_all = ["q", "budget"])]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub no_jackknife: bool,
    /// Jackknife second moments and clustering too (slow).
    #[arg(long)]
    pub second_moment_jackknife: bool,
    #[arg(long)]
    pub paper_literal_kw: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub paper_literal_kw: bool,
    #[arg(long)]
    pub second_moment_jackknife: bool,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<Model>>,
    /// Networks per family.
    #[arg(long)]
    pub count: Option<usize>,
    /// Nodes per network.
    #[arg(long)]
    pub size: Option<usize>,
    /// Mean degree range, `LO,HI`.
    #[arg(long, value_parser = parse_range)]
    pub degree_range: Option<(f64, f64)>,
    /// Grow rrt networks as trees instead of matching the drawn mean degree.
    #[arg(long)]
    pub rrt_tree: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Trial CSV from `mc`, `jackknife` or `approx-check`.
    pub input: PathBuf,
}

/// Parses `argv`, runs the command, and returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on data errors (with a JSON error
/// object on stderr).
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({ "error": format!("{e:#}") });
            eprintln!("{body}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let work = || -> Result<Vec<u8>> {
        match &cli.command {
            Command::Generate(a) => generate(cli, a),
            Command::Sample(a) => sample(cli, a),
            Command::Estimate(a) => estimate(cli, a),
            Command::Mc(a) => mc(cli, a),
            Command::Jackknife(a) => jackknife_sweep(cli, a),
            Command::ApproxCheck(a) => approx_check(cli, a),
            Command::Report(a) => report(cli, a),
        }
    };
    let bytes = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work)?,
        None => work()?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn table(format: Format, header: &[String], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&mut buf, header, rows)?;
            Ok(buf)
        }
        Format::Json => {
            let objects: Vec<serde_json::Value> = rows
                .into_iter()
                .map(|r| header.iter().cloned().zip(r.into_iter().map(serde_json::Value::String)).collect())
                .collect();
            json_bytes(&serde_json::Value::Array(objects))
        }
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn load_config(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.kind = kind;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn read_graph(path: &Path) -> Result<TwoLayerGraph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TwoLayerGraph::read_edge_list(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<Vec<u8>> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.generator,
        None => GeneratorConfig::default(),
    };
    config.model = a.model;
    if let Some(n) = a.nodes {
        config.node_count = n;
    }
    if let Some(r) = a.strong_range {
        config.strong_mean_degree_range = r;
    }
    if let Some(r) = a.weak_range {
        config.weak_mean_degree_range = r;
    }
    let mut rng = rng_for(cli.seed.unwrap_or(0), &[GRAPH_STREAM]);
    let g = match a.model {
        Model::ModifiedWs => generate_two_layer(&config, &mut rng)?,
        _ => TwoLayerGraph::from_simple(&generate_single_layer(&config, &mut rng)?, Layer::Weak),
    };
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            g.write_edge_list(&mut buf)?;
            Ok(buf)
        }
        Format::Json => {
            let edges: Vec<(usize, usize, Layer)> = g.edges();
            json_bytes(&serde_json::json!({ "nodes": g.node_count(), "edges": edges }))
        }
    }
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<Vec<u8>> {
    let g = read_graph(&a.graph)?;
    let mut config = SamplingConfig::new(a.q, a.budget);
    if a.report_all {
        config.insufficient_weak_policy = InsufficientWeakPolicy::ReportAll;
    }
    let obs = conduct_survey(&g, &config, &mut rng_for(cli.seed.unwrap_or(0), &[SURVEY_STREAM]))?;
    json_bytes(&obs.to_survey())
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<Vec<u8>> {
    let obs = match (&a.survey, &a.graph) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let survey: SurveyExport = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("parsing {}", path.display()))?;
            ObservedNetwork::from_survey(&survey)?
        }
        (None, Some(path)) => {
            let g = read_graph(path)?;
            let config = SamplingConfig::new(a.q.expect("required by clap"), a.budget.expect("required by clap"));
            conduct_survey(&g, &config, &mut rng_for(cli.seed.unwrap_or(0), &[SURVEY_STREAM]))?
        }
        (None, None) => bail!("estimate needs --survey or --graph with --q and --budget"),
    };
    let options = EstimatorOptions {
        kw_denominator: if a.paper_literal_kw { KwDenominator::PaperLiteral } else { KwDenominator::ModelConsistent },
        ..Default::default()
    };
    let mut report = full_pipeline(&obs, &options)?;
    if cli.format == Some(Format::Csv) {
        let header: Vec<String> = EstimateReport::CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
        return table(Format::Csv, &header, vec![report.csv_row()]);
    }
    let jk = if a.no_jackknife {
        None
    } else {
        let params = if a.second_moment_jackknife { Parameter::ALL.to_vec() } else { Parameter::FIRST_MOMENTS.to_vec() };
        let out = jackknife(&obs, &params, &options)?;
        report.warnings.extend(out.warnings());
        Some(out.summary())
    };
    let mut value = serde_json::to_value(&report)?;
    if let Some(jk) = jk {
        value["jackknife"] = serde_json::to_value(jk)?;
    }
    json_bytes(&value)
}

fn apply_sweep(config: &mut ExperimentConfig, a: &SweepArgs) -> Result<()> {
    if let Some(n) = &a.nodes {
        config.node_counts = n.clone();
    }
    if let Some(q) = &a.q {
        config.q_values = q.clone();
    }
    if let Some(b) = &a.budgets {
        config.budgets = b.clone();
    }
    if let Some(t) = a.trials {
        config.trials = t;
    }
    config.paper_literal_kw |= a.paper_literal_kw;
    config.second_moment_jackknife |= a.second_moment_jackknife;
    config.validate()
}

fn mc(cli: &Cli, a: &SweepArgs) -> Result<Vec<u8>> {
    let mut config = load_config(cli, ExperimentKind::McSweep)?;
    apply_sweep(&mut config, a)?;
    let records = run_mc_sweep(&config);
    let rows = records.iter().map(|r| r.row(cli.timing)).collect();
    table(cli.format.unwrap_or(Format::Csv), &TrialRecord::header(cli.timing), rows)
}

fn jackknife_sweep(cli: &Cli, a: &SweepArgs) -> Result<Vec<u8>> {
    let mut config = load_config(cli, ExperimentKind::JackknifeSweep)?;
    apply_sweep(&mut config, a)?;
    let params = config.jackknife_parameters();
    let records = run_jackknife_sweep(&config);
    let rows = records.iter().map(|r| r.row(&params)).collect();
    table(cli.format.unwrap_or(Format::Csv), &JackknifeRecord::header(&params), rows)
}

fn approx_check(cli: &Cli, a: &ApproxArgs) -> Result<Vec<u8>> {
    let mut config = load_config(cli, ExperimentKind::ApproxCheck)?;
    if let Some(f) = &a.families {
        config.families = f.clone();
    }
    if let Some(c) = a.count {
        config.trials = c;
    }
    if let Some(s) = a.size {
        config.node_counts = vec![s];
    } else if cli.config.is_none() {
        config.node_counts = vec![1000];
    }
    if a.rrt_tree {
        config.generator.model_params.rrt_match_degree = false;
    } else if cli.config.is_none() {
        config.generator.model_params.rrt_match_degree = true;
    }
    if let Some(r) = a.degree_range {
        config.generator.weak_mean_degree_range = r;
    }
    config.validate()?;
    let rows = run_approx_check(&config).iter().map(ApproxRecord::row).collect();
    table(cli.format.unwrap_or(Format::Csv), &ApproxRecord::header(), rows)
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<Vec<u8>> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let report = aggregate(BufReader::new(file))?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => table(Format::Csv, &report.header(), report.rows()),
        Format::Json => json_bytes(&report.to_json()),
    }
}
