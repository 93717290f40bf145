//! End-to-end discovery run: preprocess, search, strengths, pruning, and the
//! on-disk artifacts, plus the synthetic-data and one-shot scoring helpers
//! behind the CLI.

mod emit;
mod report;

pub use emit::{emit_dot, node_label, EdgeEntry, GraphDocument, RunMetrics, VariableEntry, GRAPH_SCHEMA_VERSION};
pub use report::{emit_report, indirect_paths, ReportContext};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    encode_categoricals, load_csv, multicollinearity_filter, standardize, Dataset, PreprocessConfig, VariableTable,
};
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::policy::{train, TrainState, TrainerConfig};
use crate::scoring::{BicScorer, RegressionKind};
use crate::sim::{generate, random_model, GeneratorConfig, MechanismKind};
use crate::strength::{edge_strengths, prune, StrengthMatrix, DEFAULT_PRUNE_THRESHOLD};

pub const GRAPH_JSON: &str = "graph.json";
pub const GRAPH_DOT: &str = "graph.dot";
pub const REPORT_MD: &str = "report.md";
pub const METRICS_JSONL: &str = "metrics.jsonl";
pub const CONFIG_SNAPSHOT: &str = "config.snapshot.json";
pub const PREPROCESS_JSON: &str = "preprocess.json";

/// Settings for one discovery run. Serialized verbatim as the config snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    pub target: Option<String>,
    pub preprocess: PreprocessConfig,
    pub regression: RegressionKind,
    pub trainer: TrainerConfig,
    pub prune_threshold: f64,
    /// Longest indirect path, in edges, listed in the report.
    pub max_path_length: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            schema: None,
            target: None,
            preprocess: PreprocessConfig::default(),
            regression: RegressionKind::Linear,
            trainer: TrainerConfig::default(),
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            max_path_length: 3,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.as_ref().display())))
    }

    /// The configuration actually used: the top-level seed and target are
    /// copied into the trainer and preprocessing sections.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        cfg.trainer.seed = self.seed;
        cfg.preprocess.target = self.target.clone();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.as_os_str().is_empty() {
            return Err(Error::Validation("no input data path given".into()));
        }
        if self.max_path_length < 2 {
            return Err(Error::Validation("max path length must be ≥ 2".into()));
        }
        if self.prune_threshold.is_nan() {
            return Err(Error::Validation("prune threshold is NaN".into()));
        }
        self.trainer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub graph_json: PathBuf,
    pub dot: PathBuf,
    pub report: PathBuf,
    pub metrics: PathBuf,
    pub config_snapshot: PathBuf,
    pub preprocess: PathBuf,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Pruned graph with strengths attached.
    pub graph: CausalGraph,
    /// Graph returned by the search, before pruning.
    pub search_graph: CausalGraph,
    pub strengths: StrengthMatrix,
    pub state: TrainState,
    pub paths: ArtifactPaths,
    pub config: PipelineConfig,
    /// Wall-clock seconds per stage, in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Records finished stages and written files; wraps failures with both.
struct Stages {
    manifest: Vec<PathBuf>,
    timings: Vec<(&'static str, f64)>,
}

impl Stages {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Vec<PathBuf>) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {stage}");
        match f(&mut self.manifest) {
            Ok(v) => {
                self.timings.push((stage, start.elapsed().as_secs_f64()));
                Ok(v)
            }
            Err(source) => Err(Error::Stage {
                stage,
                source: Box::new(source),
                manifest: self.manifest.clone(),
            }),
        }
    }
}

fn write_file(manifest: &mut Vec<PathBuf>, path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents)?;
    manifest.push(path.clone());
    Ok(path)
}

#[derive(Serialize)]
struct PreprocessSummary<'a> {
    rows: usize,
    variables: Vec<&'a str>,
    notes: &'a crate::data::DataNotes,
    codebooks: std::collections::BTreeMap<&'a str, &'a [String]>,
}

fn check_target(target: &Option<String>, vars: &VariableTable) -> Result<()> {
    match target {
        Some(t) if vars.index_of(t).is_none() => Err(Error::Validation(format!(
            "target variable `{t}` not found; available: {}",
            vars.names().join(", ")
        ))),
        _ => Ok(()),
    }
}

/// Executes the whole pipeline and writes every artifact into `out_dir`.
pub fn run(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let cfg = cfg.effective();
    let mut stages = Stages {
        manifest: Vec::new(),
        timings: Vec::new(),
    };
    let out = cfg.out_dir.clone();
    stages.run("config", |_| {
        cfg.validate()?;
        Ok(fs::create_dir_all(&out)?)
    })?;

    let raw = stages.run("load", |_| {
        let schema = cfg.schema.as_ref().map(VariableTable::from_schema_file).transpose()?;
        let ds = load_csv(&cfg.data, schema.as_ref())?;
        let ds = ds.drop_columns(&cfg.preprocess.drop_columns)?;
        check_target(&cfg.target, ds.variables())?;
        Ok(ds)
    })?;
    let encoded = stages.run("encode", |_| Ok(encode_categoricals(&raw)))?;
    let filtered = stages.run("filter", |_| Ok(multicollinearity_filter(&encoded, &cfg.preprocess)?.0))?;
    let ds = stages.run("standardize", |manifest| {
        let ds = if cfg.preprocess.standardize { standardize(&filtered)? } else { filtered.clone() };
        check_target(&cfg.target, ds.variables())?;
        let codebooks = ds
            .variables()
            .iter()
            .filter_map(|v| ds.codebook(&v.name).map(|c| (v.name.as_str(), c)))
            .collect();
        let summary = PreprocessSummary {
            rows: ds.n_samples(),
            variables: ds.variables().names(),
            notes: ds.notes(),
            codebooks,
        };
        write_file(manifest, out.join(PREPROCESS_JSON), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
        Ok(ds)
    })?;

    let (search_graph, state, scorer) = stages.run("train", |manifest| {
        let scorer = BicScorer::new(&ds, cfg.regression)?;
        let (g, state) = train(&cfg.trainer, &ds, &scorer)?;
        let mut lines = String::new();
        for log in &state.logs {
            lines.push_str(&serde_json::to_string(log)?);
            lines.push('\n');
        }
        write_file(manifest, out.join(METRICS_JSONL), &lines)?;
        Ok((g, state, scorer))
    })?;
    let strengths = stages.run("strength", |_| edge_strengths(&search_graph, &ds))?;
    let graph = stages.run("prune", |_| prune(&search_graph, &strengths, cfg.prune_threshold))?;

    let paths = stages.run("emit", |manifest| {
        let snapshot = serde_json::to_value(&cfg)?;
        let config_snapshot = write_file(
            manifest,
            out.join(CONFIG_SNAPSHOT),
            &(serde_json::to_string_pretty(&snapshot)? + "\n"),
        )?;
        let mut doc = GraphDocument::new(&graph, Some(&strengths));
        let mut embedded = snapshot;
        if let Some(obj) = embedded.as_object_mut() {
            obj.remove("out_dir");
        }
        doc.config = Some(embedded);
        doc.metrics = Some(RunMetrics {
            best_reward: state.best_reward,
            iterations: state.iterations_done,
            cyclic_fraction_final: state.logs.last().map_or(0.0, |l| l.cyclic_fraction),
            search_bic: scorer.graph_bic(&search_graph.adjacency)?,
            search_edges: search_graph.adjacency.edge_count(),
            refined: state.refined,
            repaired: state.repaired,
        });
        let graph_json = write_file(manifest, out.join(GRAPH_JSON), &doc.to_json()?)?;
        let dot = write_file(manifest, out.join(GRAPH_DOT), &emit_dot(&graph))?;
        let ctx = ReportContext {
            target: cfg.target.as_deref(),
            max_path_length: cfg.max_path_length,
            strengths: Some(&strengths),
            notes: Some(ds.notes()),
            prune_threshold: cfg.prune_threshold,
            pruned_edges: search_graph.adjacency.edge_count() - graph.adjacency.edge_count(),
            repaired: state.repaired,
        };
        let report = write_file(manifest, out.join(REPORT_MD), &emit_report(&graph, &ctx))?;
        Ok(ArtifactPaths {
            graph_json,
            dot,
            report,
            metrics: out.join(METRICS_JSONL),
            config_snapshot,
            preprocess: out.join(PREPROCESS_JSON),
        })
    })?;

    Ok(RunArtifacts {
        graph,
        search_graph,
        strengths,
        state,
        paths,
        config: cfg,
        timings: stages.timings,
    })
}

/// Settings for the `synth` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub d: usize,
    pub edge_probability: f64,
    pub samples: usize,
    pub mechanism: MechanismKind,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            d: 4,
            edge_probability: 0.5,
            samples: 2000,
            mechanism: MechanismKind::Linear,
            seed: 0,
            out_dir: PathBuf::from("synth"),
        }
    }
}

pub const SYNTH_DATA: &str = "data.csv";
pub const SYNTH_TRUTH: &str = "truth.json";

/// Writes `data.csv` and the ground-truth `truth.json`; returns their paths.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(PathBuf, PathBuf)> {
    let gen = GeneratorConfig {
        d: cfg.d,
        edge_probability: cfg.edge_probability,
        mechanism: cfg.mechanism,
        seed: cfg.seed,
        ..GeneratorConfig::default()
    };
    if cfg.samples < 2 {
        return Err(Error::Validation("need at least 2 samples".into()));
    }
    let model = random_model(&gen)?;
    let ds = generate(&model, cfg.samples, cfg.seed.wrapping_add(1))?;
    fs::create_dir_all(&cfg.out_dir)?;
    let data_path = cfg.out_dir.join(SYNTH_DATA);
    write_csv(&ds, &data_path)?;
    let truth = CausalGraph::new(model.graph.clone(), ds.variables().clone())?;
    let mut doc = GraphDocument::new(&truth, None);
    doc.adjacency = Some(model.graph.to_rows());
    let truth_path = cfg.out_dir.join(SYNTH_TRUTH);
    fs::write(&truth_path, doc.to_json()?)?;
    Ok((data_path, truth_path))
}

/// Numeric dataset as CSV with a header row; values use the shortest exact
/// decimal form.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ds.variables().names())?;
    let cols: Vec<&[f64]> = (0..ds.n_vars())
        .map(|j| ds.column(j).ok_or_else(|| Error::usage("only numeric datasets can be written")))
        .collect::<Result<_>>()?;
    for i in 0..ds.n_samples() {
        w.write_record(cols.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Output of the `score` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub bic: f64,
    pub local: Vec<f64>,
    pub is_dag: bool,
    pub acyclicity_penalty: f64,
    pub edges: usize,
}

/// BIC of the graph in `graph_path` on the data in `data_path`. Graph
/// variable names, when they differ from the data header, are an error.
pub fn score_graph(data_path: &Path, graph_path: &Path, kind: RegressionKind, standardized: bool) -> Result<ScoreSummary> {
    let doc = GraphDocument::from_json(&fs::read_to_string(graph_path)?)?;
    let graph = doc.to_graph()?;
    let ds = encode_categoricals(&load_csv(data_path, None)?);
    let ds = if standardized { standardize(&ds)? } else { ds };
    if ds.variables().names() != graph.variables.names() {
        return Err(Error::Validation(format!(
            "graph variables [{}] do not match data columns [{}]",
            graph.variables.names().join(", "),
            ds.variables().names().join(", ")
        )));
    }
    let scorer = BicScorer::new(&ds, kind)?;
    let a = &graph.adjacency;
    let local = (0..a.d()).map(|j| scorer.local_bic_mask(j, a.parent_mask(j))).collect::<Vec<_>>();
    Ok(ScoreSummary {
        bic: local.iter().sum(),
        local,
        is_dag: a.is_dag(),
        acyclicity_penalty: a.acyclicity_penalty(),
        edges: a.edge_count(),
    })
}
