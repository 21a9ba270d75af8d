//! The experiment stages behind each subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use c2bnvae_core::balance::{generative_balance, BalanceManifest};
use c2bnvae_core::dataset::stratified_subsample;
use c2bnvae_core::metrics::{confusion, format_table};
use c2bnvae_core::model::{save_checkpoint, train, NormKind, TrainOutcome};
use c2bnvae_core::nn::count_params_flops;
use c2bnvae_core::nslkdd::{fit_schema, read_records, ClassTaxonomy, EncodingSchema, CATEGORY_NAMES};
use c2bnvae_core::seed::{child_rng, child_seed};
use c2bnvae_core::{tree, BalanceRequest, EncodedDataset, EvalReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{display_name, ExperimentConfig};
use crate::error::CliError;

/// Encoded width of NSL-KDD before padding.
pub const NATURAL_DIM: usize = 122;

pub const TRAIN_BIN: &str = "train.bin";
pub const TEST_BIN: &str = "test.bin";
pub const SCHEMA_JSON: &str = "schema.json";
pub const COUNTS_TXT: &str = "counts.txt";
pub const REPORTS_JSON: &str = "reports.json";
pub const RESULTS_TXT: &str = "results.txt";
pub const CHART_CSV: &str = "chart.csv";
pub const CHART_SVG: &str = "chart.svg";

/// Identifies the tool version, configuration and seed behind an artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            tool: "c2bnvae".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_digest: cfg.digest(),
            seed: cfg.seed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} config={} seed={}",
            self.tool, self.version, self.config_digest, self.seed
        )
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let out = cfg.paths.out.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    Ok(out)
}

fn load_records(path: &Path, what: &str) -> Result<Vec<c2bnvae_core::RawRecord>, CliError> {
    if !path.is_file() {
        return Err(CliError::Data(format!("{what} file not found: {}", path.display())));
    }
    Ok(read_records(path)?)
}

pub fn load_taxonomy(cfg: &ExperimentConfig) -> Result<ClassTaxonomy, CliError> {
    match &cfg.paths.taxonomy {
        None => Ok(ClassTaxonomy::bundled()),
        Some(p) if !p.is_file() => Err(CliError::Data(format!("taxonomy file not found: {}", p.display()))),
        Some(p) => Ok(ClassTaxonomy::load(p)?),
    }
}

/// Per-class row counts at each stage of preprocessing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsSummary {
    pub train_full: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl CountsSummary {
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<8} {:>10} {:>10} {:>10}\n", "class", "train_all", "train", "test");
        for (c, name) in CATEGORY_NAMES.iter().enumerate() {
            s.push_str(&format!(
                "{:<8} {:>10} {:>10} {:>10}\n",
                name, self.train_full[c], self.train[c], self.test[c]
            ));
        }
        let sum = |v: &[usize]| v.iter().sum::<usize>();
        s.push_str(&format!(
            "{:<8} {:>10} {:>10} {:>10}\n",
            "total",
            sum(&self.train_full),
            sum(&self.train),
            sum(&self.test)
        ));
        s
    }
}

pub struct Prepared {
    pub schema: EncodingSchema,
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub counts: CountsSummary,
}

/// Parses both files, fits the encoding (vocabulary over both files,
/// numeric ranges over the full training file) and applies the stratified
/// training subsample.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let taxonomy = load_taxonomy(cfg)?;
    let train_recs = load_records(&cfg.paths.train, "training")?;
    let test_recs = load_records(&cfg.paths.test, "test")?;
    let schema = fit_schema(&train_recs, &test_recs, cfg.pad_to())?;
    let full = schema.transform(&train_recs, &taxonomy)?;
    let test = schema.transform(&test_recs, &taxonomy)?;
    let train = if cfg.subsample < 1.0 {
        let mut rng = child_rng(cfg.seed, "subsample");
        let idx = stratified_subsample(&full.labels, full.num_classes, cfg.subsample, &mut rng)?;
        full.subset(&idx)
    } else {
        full.clone()
    };
    let counts = CountsSummary {
        train_full: full.class_counts(),
        train: train.class_counts(),
        test: test.class_counts(),
    };
    Ok(Prepared {
        schema,
        train,
        test,
        counts,
    })
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    manifest: Manifest,
    schema: serde_json::Value,
}

pub fn read_schema(path: &Path) -> Result<EncodingSchema, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let file: SchemaFile =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(EncodingSchema::from_json(&file.schema.to_string())?)
}

/// Writes the encoded splits, the schema and the counts summary.
pub fn cmd_preprocess(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let p = prepare(cfg)?;
    let out = ensure_out(cfg)?;
    let manifest = Manifest::new(cfg);
    let line = manifest.line();
    write(&out.join(TRAIN_BIN), p.train.to_bytes(&line))?;
    write(&out.join(TEST_BIN), p.test.to_bytes(&line))?;
    let schema = SchemaFile {
        manifest,
        schema: serde_json::from_str(&p.schema.to_json()).expect("schema json"),
    };
    write(
        &out.join(SCHEMA_JSON),
        serde_json::to_string_pretty(&schema).expect("schema file"),
    )?;
    write(&out.join(COUNTS_TXT), format!("# {line}\n{}", p.counts.to_text()))?;
    Ok(p)
}

pub fn variant_name(norm: NormKind) -> &'static str {
    match norm {
        NormKind::Conditional => "c2bnvae",
        NormKind::Plain => "cvae",
    }
}

fn train_generator(
    cfg: &ExperimentConfig,
    train_set: &EncodedDataset,
    norm: NormKind,
) -> Result<TrainOutcome, CliError> {
    let name = variant_name(norm);
    let model_cfg = cfg.model.to_model_config(
        train_set.feature_dim(),
        train_set.num_classes,
        norm,
        child_seed(cfg.seed, &format!("model/{name}")),
    );
    let start = Instant::now();
    let mut outcome = train(train_set, &model_cfg).map_err(|e| CliError::training(name, e))?;
    outcome.checkpoint.note = Manifest::new(cfg).line();
    log::info!("{name}: trained {} epochs in {:.1?}", model_cfg.epochs, start.elapsed());
    Ok(outcome)
}

fn write_generator(cfg: &ExperimentConfig, norm: NormKind, outcome: &TrainOutcome) -> Result<(), CliError> {
    let out = ensure_out(cfg)?;
    let name = variant_name(norm);
    save_checkpoint(&outcome.checkpoint, &out.join(format!("{name}.ckpt")))?;
    write(
        &out.join(format!("{name}_trace.csv")),
        format!("# {}\n{}", Manifest::new(cfg).line(), outcome.trace_csv()),
    )
}

/// Trains one generator on the (subsampled) training split and writes its
/// checkpoint and loss trace.
pub fn cmd_train_gen(cfg: &ExperimentConfig, norm: NormKind) -> Result<TrainOutcome, CliError> {
    let p = prepare(cfg)?;
    let outcome = train_generator(cfg, &p.train, norm)?;
    write_generator(cfg, norm, &outcome)?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub depth: usize,
    pub leaves: usize,
    pub train_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum RowOutcome {
    Ok {
        report: EvalReport,
        balance: Option<BalanceManifest>,
        tree: TreeSummary,
    },
    Failed {
        /// `data` or `training`.
        kind: String,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub algorithm: String,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: Manifest,
    pub counts: CountsSummary,
    pub rows: Vec<Row>,
}

impl RunReport {
    pub fn ok_reports(&self) -> Vec<&EvalReport> {
        self.rows
            .iter()
            .filter_map(|r| match &r.outcome {
                RowOutcome::Ok { report, .. } => Some(report),
                RowOutcome::Failed { .. } => None,
            })
            .collect()
    }

    pub fn row(&self, method: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn report(&self, method: &str) -> Option<&EvalReport> {
        match &self.row(method)?.outcome {
            RowOutcome::Ok { report, .. } => Some(report),
            RowOutcome::Failed { .. } => None,
        }
    }

    /// First failure, if any.
    pub fn first_failure(&self) -> Option<CliError> {
        self.rows.iter().find_map(|r| match &r.outcome {
            RowOutcome::Failed { kind, reason } => {
                let msg = format!("{}: {reason}", r.method);
                Some(if kind == "training" {
                    CliError::Training(msg)
                } else {
                    CliError::Data(msg)
                })
            }
            RowOutcome::Ok { .. } => None,
        })
    }

    pub fn table(&self) -> String {
        let reports: Vec<EvalReport> = self.ok_reports().into_iter().cloned().collect();
        let mut s = format!("# {}\n{}", self.manifest.line(), format_table(&reports));
        for r in &self.rows {
            if let RowOutcome::Failed { reason, .. } = &r.outcome {
                s.push_str(&format!("{}: failed: {reason}\n", r.algorithm));
            }
        }
        s
    }

    /// Long-format chart data: one `algorithm,metric,value` line per bar.
    pub fn chart_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algorithm", "metric", "value"]).expect("in-memory csv");
        for r in self.ok_reports() {
            for (metric, v) in [
                ("Acc", r.accuracy),
                ("Pre_w", r.precision_w),
                ("Recall_w", r.recall_w),
                ("F1_w", r.f1_w),
            ] {
                w.write_record([r.algorithm.as_str(), metric, &format!("{v:.2}")])
                    .expect("in-memory csv");
            }
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8");
        format!("# {}\n{body}", self.manifest.line())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Writes the JSON report, the results table, chart CSV and optionally
    /// an SVG bar chart into `dir`.
    pub fn write_all(&self, dir: &Path, svg: bool) -> Result<(), CliError> {
        write(&dir.join(REPORTS_JSON), self.to_json())?;
        write(&dir.join(RESULTS_TXT), self.table())?;
        write(&dir.join(CHART_CSV), self.chart_csv())?;
        if svg {
            write(&dir.join(CHART_SVG), crate::chart::bar_chart_svg(self))?;
        }
        Ok(())
    }
}

fn evaluate(
    cfg: &ExperimentConfig,
    method: &str,
    train_set: &EncodedDataset,
    test: &EncodedDataset,
    balance: Option<BalanceManifest>,
) -> Result<RowOutcome, CliError> {
    let start = Instant::now();
    let dt = tree::fit(&train_set.features, &train_set.labels, train_set.num_classes, &cfg.tree)?;
    let pred = dt.predict(&test.features)?;
    let cm = confusion(&test.labels, &pred, test.num_classes)?;
    let report = EvalReport::new(display_name(method), cm, &CATEGORY_NAMES)?;
    log::info!(
        "{method}: tree depth {} with {} leaves in {:.1?}, F1_w {:.2}",
        dt.depth(),
        dt.num_leaves(),
        start.elapsed(),
        report.f1_w
    );
    Ok(RowOutcome::Ok {
        report,
        balance,
        tree: TreeSummary {
            depth: dt.depth(),
            leaves: dt.num_leaves(),
            train_rows: train_set.len(),
        },
    })
}

fn run_method(cfg: &ExperimentConfig, method: &str, p: &Prepared) -> Result<RowOutcome, CliError> {
    let seed = child_seed(cfg.seed, &format!("balance/{method}"));
    match method {
        "original" => evaluate(cfg, method, &p.train, &p.test, None),
        "cvae" | "c2bnvae" => {
            let norm = if method == "cvae" {
                NormKind::Plain
            } else {
                NormKind::Conditional
            };
            let outcome = train_generator(cfg, &p.train, norm)?;
            write_generator(cfg, norm, &outcome)?;
            let req = BalanceRequest::to_max(&p.train, seed)?;
            let balanced = generative_balance(&req, &outcome.checkpoint)?;
            evaluate(cfg, method, &balanced.dataset, &p.test, Some(balanced.manifest))
        }
        _ => {
            let balancer = cfg
                .balancer(method)
                .ok_or_else(|| CliError::Usage(format!("method {method:?} has no balancer settings")))?;
            let start = Instant::now();
            let balanced = balancer.apply(&BalanceRequest::to_max(&p.train, seed)?)?;
            log::info!(
                "{method}: balanced to {} rows in {:.1?}",
                balanced.dataset.len(),
                start.elapsed()
            );
            evaluate(cfg, method, &balanced.dataset, &p.test, Some(balanced.manifest))
        }
    }
}

/// Balances the training split with every configured method, fits a tree
/// on each result and evaluates it on the test split. A failing method is
/// recorded in its row; the others still run. Rows are computed in
/// parallel and reported in configuration order.
pub fn cmd_run_all(cfg: &ExperimentConfig, svg: bool) -> Result<RunReport, CliError> {
    let p = prepare(cfg)?;
    let rows = cfg
        .methods
        .par_iter()
        .map(|m| {
            let outcome = run_method(cfg, m, &p).unwrap_or_else(|e| {
                log::warn!("{m}: {e}");
                RowOutcome::Failed {
                    kind: if e.exit_code() == 3 { "training" } else { "data" }.into(),
                    reason: e.to_string(),
                }
            });
            Row {
                method: m.clone(),
                algorithm: display_name(m).to_string(),
                outcome,
            }
        })
        .collect();
    let report = RunReport {
        manifest: Manifest::new(cfg),
        counts: p.counts,
        rows,
    };
    report.write_all(&ensure_out(cfg)?, svg)?;
    Ok(report)
}

/// Re-renders the table (and optionally the SVG chart) from a saved run.
pub fn cmd_report(dir: &Path, svg: bool) -> Result<RunReport, CliError> {
    let report = RunReport::load(&dir.join(REPORTS_JSON))?;
    if svg {
        write(&dir.join(CHART_SVG), crate::chart::bar_chart_svg(&report))?;
    }
    Ok(report)
}

/// Parameter and FLOP table for the configured generator. Input width is
/// `pad_to`, or the natural NSL-KDD width when padding is disabled.
pub fn cmd_count(cfg: &ExperimentConfig, norm: NormKind) -> String {
    let feature_dim = cfg.pad_to().unwrap_or(NATURAL_DIM);
    let model = cfg.model.to_model_config(feature_dim, CATEGORY_NAMES.len(), norm, 0);
    let r = count_params_flops(&model.arch());
    let mut s = format!(
        "{} (feature_dim {feature_dim}, {} classes, latent {})\n",
        variant_name(norm),
        CATEGORY_NAMES.len(),
        model.latent_dim
    );
    s.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>18}\n",
        "component", "params", "flops", "trainable_params"
    ));
    for (name, c) in r
        .components
        .iter()
        .map(|(n, c)| (n.as_str(), *c))
        .chain([("total", r.total)])
    {
        s.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>18}\n",
            name, c.params, c.flops, c.trainable_params
        ));
    }
    s
}
