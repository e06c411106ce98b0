//! `tablerec`: ingest → index → pool → features → train → rank → eval.
//!
//! Every subcommand reads a plain-text `key = value` config (`--config`),
//! overridable with `--set key=value`. Artifacts are written atomically; the
//! resolved config is embedded as `#` comments where the format allows it and
//! written to a `<file>.config` sidecar otherwise.
//!
//! Exit status: 0 success, 1 usage error, 2 data error.

mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tablerec::assets::{self, WorkDir};
use tablerec::config::{ExperimentConfig, Precision};
use tablerec::engine::{Baseline, Engine, INFOGATHER_FEATURES};
use tablerec::eval::{
    aligned, fleiss_kappa, ndcg, paired_ttest, per_query_delta, significance_marker, split_experiment,
    write_delta_csv, write_split_csv, NdcgResult, Qrels, RunFile,
};
use tablerec::index::{self, build_index};
use tablerec::matching::{write_named_csv, FeatureLayout, FeatureRow, Variant};
use tablerec::ranker::{
    cross_validate, incremental_feature_eval, train_forest, train_linear, Dataset, ForestModel, LinearModel,
    LinearParams, Scorer,
};
use tablerec::scalar::Scalar;
use tablerec::synth::{MicroCorpus, SynthParams};
use tablerec::table::SplitAxis;

use output::{config_header, write_atomic, write_with_sidecar};

#[derive(Parser)]
#[command(name = "tablerec", version, about = "Related-table recommendation experiments")]
struct Cli {
    /// Experiment config file (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus against the knowledge base and store it in the work directory.
    Ingest,
    /// Build and persist the BM25 index and corpus statistics.
    Index,
    /// Print the candidate pool of one corpus table.
    Pool {
        #[arg(long)]
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write labelled feature vectors for every (query, pooled candidate) pair.
    ExtractFeatures {
        #[command(flatten)]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model on a feature CSV.
    Train {
        #[command(flatten)]
        method: MethodArg,
        /// Defaults to the work-directory feature file of the method.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce a TREC run: cross-validated, from a saved model, or a baseline.
    Rank {
        #[command(flatten)]
        method: MethodArg,
        /// Score with this model instead of cross-validating.
        #[arg(long, conflicts_with = "features")]
        model: Option<PathBuf>,
        /// Cross-validate over this feature CSV instead of extracting features.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NDCG@5/@10 per run with significance against the first run.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Defaults to the config's qrels.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Per-query NDCG@10 differences of the second run over the first.
        #[arg(long)]
        deltas: Option<PathBuf>,
    },
    /// Feature importance of a forest model, or the incremental-feature curve.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        top: Option<usize>,
        /// Feature CSV to re-train on with growing feature prefixes.
        #[arg(long, requires = "out")]
        incremental: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        batch: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-rank with the input table cut to a fraction of its rows or columns.
    SplitEval {
        #[command(flatten)]
        method: MethodArg,
        #[arg(long, value_delimiter = ',', default_value = "rows,columns")]
        axes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fleiss' kappa over `item rater grade` judgment lines.
    Kappa {
        #[arg(long)]
        judgments: PathBuf,
    },
    /// Write the synthetic micro-corpus and a config that points at it.
    DemoData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthParams::default().tables)]
        tables: usize,
        #[arg(long, default_value_t = SynthParams::default().seed)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct MethodArg {
    /// hcf-1, hcf-2, crab-1..crab-4, infogather, or a baseline tag; defaults to the config variant.
    #[arg(long)]
    variant: Option<String>,
}

/// Misuse of the command line, as opposed to bad data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Method {
    Learned(Variant),
    InfoGather,
    Baseline(Baseline),
}

impl Method {
    fn tag(self) -> String {
        match self {
            Method::Learned(v) => v.to_string(),
            Method::InfoGather => "infogather".into(),
            Method::Baseline(b) => b.tag().into(),
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("infogather") {
            return Ok(Method::InfoGather);
        }
        if let Ok(v) = s.parse::<Variant>() {
            return Ok(Method::Learned(v));
        }
        if let Ok(b) = s.to_ascii_lowercase().parse::<Baseline>() {
            return Ok(Method::Baseline(b));
        }
        let baselines: Vec<&str> = Baseline::ALL.iter().map(|b| b.tag()).collect();
        Err(usage(format!(
            "unknown method `{s}`; expected hcf-1, hcf-2, crab-1..crab-4, infogather or one of {}",
            baselines.join(", ")
        )))
    }
}

impl MethodArg {
    fn resolve(&self, cfg: &ExperimentConfig) -> Result<Method> {
        match &self.variant {
            Some(v) => v.parse(),
            None => Ok(Method::Learned(cfg.variant)),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn qrels_path(explicit: Option<&Path>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.qrels.clone())
        .ok_or_else(|| usage("no qrels: pass --qrels or set `qrels` in the config"))
}

fn queries(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    Ok(assets::load_queries(assets::required(&cfg.queries, "queries")?)?)
}

fn qrels(cfg: &ExperimentConfig) -> Result<Qrels> {
    Ok(assets::load_qrels(&qrels_path(None, cfg)?)?)
}

fn learned(method: Method) -> Result<Option<Variant>> {
    match method {
        Method::Learned(v) => Ok(Some(v)),
        Method::InfoGather => Ok(None),
        Method::Baseline(b) => Err(usage(format!("`{}` is an unsupervised baseline; it has no features or model", b.tag()))),
    }
}

enum Model {
    Forest(ForestModel),
    Linear(LinearModel),
}

impl Model {
    fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let first = text.lines().next().unwrap_or("");
        let model = if first.starts_with("tablerec-forest") {
            Model::Forest(ForestModel::read(text.as_bytes())?)
        } else if first.starts_with("tablerec-linear") {
            Model::Linear(LinearModel::read(text.as_bytes())?)
        } else {
            bail!("{} is not a tablerec model", path.display());
        };
        Ok(model)
    }

    fn scorer(&self) -> &dyn Scorer {
        match self {
            Model::Forest(m) => m,
            Model::Linear(m) => m,
        }
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        match self {
            Model::Forest(m) => m.write(out),
            Model::Linear(m) => m.write(out),
        }
    }
}

fn fit(data: &Dataset, variant: Option<Variant>, cfg: &ExperimentConfig) -> tablerec::Result<Model> {
    match variant {
        Some(_) => train_forest(data, &cfg.forest()).map(Model::Forest),
        None => train_linear(data, &linear_params(cfg)).map(Model::Linear),
    }
}

fn linear_params(cfg: &ExperimentConfig) -> LinearParams {
    LinearParams {
        gain: cfg.gain,
        ..LinearParams::default()
    }
}

fn write_dataset(path: &Path, command: &str, cfg: &ExperimentConfig, data: &Dataset) -> Result<()> {
    write_atomic(path, |w| {
        let rows = data.rows().iter().map(|s| FeatureRow {
            qid: &s.qid,
            docid: &s.docid,
            label: s.label,
            values: &s.values,
        });
        write_named_csv(w, data.feature_names(), &config_header(command, cfg), rows)?;
        Ok(())
    })
}

fn write_run(path: Option<&Path>, cfg: &ExperimentConfig, mut run: RunFile) -> Result<()> {
    run.sort_queries();
    match path {
        Some(p) => write_with_sidecar(p, "rank", cfg, |w| Ok(run.write(w)?)),
        None => Ok(run.write(std::io::stdout().lock())?),
    }
}

/// Features of every (query, pooled candidate) pair, labelled from qrels.
fn method_dataset<S: Scalar>(
    engine: &Engine<S>,
    variant: Option<Variant>,
    queries: &[String],
    qrels: &Qrels,
) -> Result<(Dataset, BTreeMap<String, Vec<String>>)> {
    Ok(match variant {
        Some(v) => engine.dataset(queries, &Arc::new(FeatureLayout::new(v)), qrels)?,
        None => engine.infogather_dataset(queries, qrels)?,
    })
}

fn ingest(cfg: &ExperimentConfig) -> Result<()> {
    let kb = assets::load_kb(cfg)?;
    let tables = assets::load_corpus(assets::required(&cfg.corpus, "corpus")?, &kb)?;
    // duplicate ids and empty tables are rejected here rather than at index time
    build_index(tables.iter())?;
    let work = WorkDir::new(&cfg.work_dir);
    write_with_sidecar(&work.tables(), "ingest", cfg, |w| {
        for t in &tables {
            writeln!(w, "{}", t.to_record())?;
        }
        Ok(())
    })?;
    log::info!("ingested {} tables; {} links dropped by the knowledge base", tables.len(), kb.dropped_links());
    println!("{} tables -> {}", tables.len(), work.tables().display());
    Ok(())
}

fn build_persisted_index(cfg: &ExperimentConfig) -> Result<()> {
    let work = WorkDir::new(&cfg.work_dir);
    if !work.tables().exists() {
        bail!("{} not found; run the `ingest` step first", work.tables().display());
    }
    let kb = assets::load_kb(cfg)?;
    let tables = assets::load_corpus(&work.tables(), &kb)?;
    let (idx, stats) = build_index(tables.iter())?;
    write_with_sidecar(&work.index(), "index", cfg, |w| Ok(index::persist(&idx, &stats, w)?))?;
    println!("{} tables indexed -> {}", idx.len(), work.index().display());
    Ok(())
}

fn run_engine_command<S: Scalar>(cmd: &Command, cfg: &ExperimentConfig) -> Result<()> {
    // flag mistakes are usage errors even when the data would also fail to load
    if let Command::ExtractFeatures { method, .. } | Command::Rank { method, .. } | Command::SplitEval { method, .. } = cmd {
        method.resolve(cfg)?;
    }
    let work = WorkDir::new(&cfg.work_dir);
    let engine: Engine<S> = assets::load_engine(cfg)?;
    match cmd {
        Command::Pool { input, out } => {
            let pool = engine.pool(input)?;
            match out {
                Some(p) => write_with_sidecar(p, "pool", cfg, |w| {
                    for id in &pool {
                        writeln!(w, "{id}")?;
                    }
                    Ok(())
                })?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    for id in &pool {
                        writeln!(stdout, "{id}")?;
                    }
                }
            }
            log::info!("{} candidates for {input}", pool.len());
        }
        Command::ExtractFeatures { method, out } => {
            let m = method.resolve(cfg)?;
            let variant = learned(m)?;
            let (data, _) = method_dataset(&engine, variant, &queries(cfg)?, &qrels(cfg)?)?;
            let path = out.clone().unwrap_or_else(|| work.features(&m.tag()));
            write_dataset(&path, "extract-features", cfg, &data)?;
            println!("{} rows x {} features -> {}", data.len(), data.n_features(), path.display());
        }
        Command::Rank { method, model, out, .. } => {
            let m = method.resolve(cfg)?;
            let queries = queries(cfg)?;
            let path = out.clone().unwrap_or_else(|| work.run(&m.tag()));
            let run = match (m, model) {
                (Method::Baseline(b), None) => engine.baseline_run(&queries, b)?,
                (Method::Baseline(_), Some(_)) => return Err(usage("baselines take no --model")),
                (_, Some(model_path)) => {
                    let model = Model::load(model_path)?;
                    let mut run = RunFile::new(m.tag());
                    for qid in &queries {
                        let q = engine.query(qid)?;
                        let pool = engine.pool(qid)?;
                        let scores = match learned(m)? {
                            Some(v) => engine.rank_pool(&q, &pool, &Arc::new(FeatureLayout::new(v)), model.scorer())?,
                            None => pool
                                .iter()
                                .map(|c| Ok((c.clone(), model.scorer().score(&engine.infogather_values(&q, c)?))))
                                .collect::<Result<_>>()?,
                        };
                        run.insert(qid.clone(), scores)?;
                    }
                    run
                }
                (_, None) => {
                    let variant = learned(m)?;
                    let (data, _) = method_dataset(&engine, variant, &queries, &qrels(cfg)?)?;
                    cross_validated_run(&data, variant, m, cfg)?
                }
            };
            write_run(Some(&path), cfg, run)?;
            println!("{} -> {}", m.tag(), path.display());
        }
        Command::SplitEval { method, axes, out } => {
            let m = method.resolve(cfg)?;
            let Some(variant) = learned(m)? else {
                return Err(usage("split-eval needs a feature variant (hcf-* or crab-*)"));
            };
            let axes: Vec<SplitAxis> = axes
                .iter()
                .map(|a| a.parse().map_err(|e: tablerec::Error| usage(e.to_string())))
                .collect::<Result<_>>()?;
            let queries = queries(cfg)?;
            let qrels = qrels(cfg)?;
            let layout = Arc::new(FeatureLayout::new(variant));
            let (data, pools) = engine.dataset(&queries, &layout, &qrels)?;
            let params = cfg.forest();
            let cv = cross_validate(&data, cfg.folds, cfg.seed, &m.tag(), |d| train_forest(d, &params))?;
            let rows = split_experiment(&queries, &axes, &[0.25, 0.5, 0.75, 1.0], &qrels, cfg.gain, &m.tag(), |q, axis, f| {
                let model = cv
                    .model_for(q)
                    .ok_or_else(|| tablerec::Error::Invalid(format!("query `{q}` has no pooled candidates")))?;
                engine.rank_split(q, &pools[q], axis, f, &layout, model)
            })?;
            let path = out.clone().unwrap_or_else(|| work.root().join(format!("split-{}.csv", m.tag())));
            write_atomic(&path, |w| {
                for line in config_header("split-eval", cfg) {
                    writeln!(w, "# {line}")?;
                }
                Ok(write_split_csv(w, &rows)?)
            })?;
            for r in &rows {
                println!("{:<8} {:>5.2}  NDCG@5 {:.4}  NDCG@10 {:.4}", r.axis, r.fraction, r.ndcg5, r.ndcg10);
            }
        }
        _ => unreachable!("not an engine command"),
    }
    Ok(())
}

fn cross_validated_run(data: &Dataset, variant: Option<Variant>, m: Method, cfg: &ExperimentConfig) -> Result<RunFile> {
    Ok(match variant {
        Some(_) => {
            let params = cfg.forest();
            cross_validate(data, cfg.folds, cfg.seed, &m.tag(), |d| train_forest(d, &params))?.run
        }
        None => {
            let params = linear_params(cfg);
            cross_validate(data, cfg.folds, cfg.seed, &m.tag(), |d| train_linear(d, &params))?.run
        }
    })
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// The variant a feature CSV was extracted for, judged by its columns.
fn variant_of(data: &Dataset) -> Result<Option<Variant>> {
    if data.feature_names().iter().map(String::as_str).eq(INFOGATHER_FEATURES) {
        return Ok(None);
    }
    for v in Variant::ALL {
        if FeatureLayout::new(v).fingerprint() == data.fingerprint() {
            return Ok(Some(v));
        }
    }
    bail!("feature columns match no known variant")
}

fn train(cfg: &ExperimentConfig, method: &MethodArg, features: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let work = WorkDir::new(&cfg.work_dir);
    let m = method.resolve(cfg)?;
    learned(m)?;
    let path = features.map(Path::to_path_buf).unwrap_or_else(|| work.features(&m.tag()));
    let data = read_dataset(&path)?;
    let variant = variant_of(&data)?;
    let model = fit(&data, variant, cfg)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| work.model(&m.tag()));
    write_with_sidecar(&out, "train", cfg, |w| Ok(model.write(w)?))?;
    println!("{} rows -> {}", data.len(), out.display());
    Ok(())
}

fn rank_from_features(cfg: &ExperimentConfig, method: &MethodArg, features: &Path, out: Option<&Path>) -> Result<()> {
    let m = method.resolve(cfg)?;
    learned(m)?;
    let data = read_dataset(features)?;
    let run = cross_validated_run(&data, variant_of(&data)?, m, cfg)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| WorkDir::new(&cfg.work_dir).run(&m.tag()));
    write_run(Some(&path), cfg, run)?;
    println!("{} -> {}", m.tag(), path.display());
    Ok(())
}

fn eval(cfg: &ExperimentConfig, runs: &[PathBuf], qrels: Option<&Path>, deltas: Option<&Path>) -> Result<()> {
    if deltas.is_some() && runs.len() != 2 {
        return Err(usage("--deltas needs exactly two runs"));
    }
    let qrels = assets::load_qrels(&qrels_path(qrels, cfg)?)?;
    let runs: Vec<RunFile> = runs
        .iter()
        .map(|p| RunFile::read(open(p)?).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let results: Vec<[NdcgResult; 2]> = runs
        .iter()
        .map(|r| Ok([ndcg(r, &qrels, 5, cfg.gain)?, ndcg(r, &qrels, 10, cfg.gain)?]))
        .collect::<Result<_>>()?;
    let width = runs.iter().map(|r| r.tag.len()).max().unwrap_or(0).max(6);
    println!("{:<width$}  {:<9}  {:<9}", "method", "NDCG@5", "NDCG@10");
    for (i, (run, res)) in runs.iter().zip(&results).enumerate() {
        let mut cells = Vec::new();
        for (k, r) in res.iter().enumerate() {
            let marker = if i == 0 {
                ""
            } else {
                let (a, b) = aligned(r, &results[0][k])?;
                significance_marker(paired_ttest(&a, &b)?.p)
            };
            cells.push(format!("{:.4}{marker}", r.mean));
        }
        println!("{:<width$}  {:<9}  {:<9}", run.tag, cells[0], cells[1]);
    }
    if runs.len() > 1 {
        println!("† p < 0.05, ‡ p < 0.01 (paired t-test against {})", runs[0].tag);
    }
    if let Some(path) = deltas {
        let d = per_query_delta(&results[1][1], &results[0][1])?;
        write_atomic(path, |w| Ok(write_delta_csv(w, &d)?))?;
    }
    Ok(())
}

fn importance(
    cfg: &ExperimentConfig,
    model: &Path,
    top: Option<usize>,
    incremental: Option<&Path>,
    batch: usize,
    out: Option<&Path>,
) -> Result<()> {
    let Model::Forest(forest) = Model::load(model)? else {
        bail!("{} is a linear model; importance needs a forest", model.display());
    };
    let ranked = forest.feature_importance();
    let Some(features) = incremental else {
        let mut lines = Vec::new();
        for (i, (name, v)) in ranked.iter().take(top.unwrap_or(ranked.len())).enumerate() {
            lines.push(format!("{}\t{name}\t{v:.6}", i + 1));
        }
        match out {
            Some(p) => write_with_sidecar(p, "importance", cfg, |w| {
                for l in &lines {
                    writeln!(w, "{l}")?;
                }
                Ok(())
            })?,
            None => lines.iter().for_each(|l| println!("{l}")),
        }
        return Ok(());
    };
    let data = read_dataset(features)?;
    let qrels = qrels(cfg)?;
    let names: Vec<String> = ranked.into_iter().map(|(n, _)| n).collect();
    let points = incremental_feature_eval(&data, &qrels, &names, batch, cfg.folds, &cfg.forest(), cfg.gain)?;
    let out = out.expect("clap enforces --out with --incremental");
    write_atomic(out, |w| {
        for line in config_header("importance", cfg) {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "features,ndcg5,ndcg10")?;
        for p in &points {
            writeln!(w, "{},{},{}", p.features, p.ndcg5, p.ndcg10)?;
        }
        Ok(())
    })?;
    for p in &points {
        println!("{:>4}  NDCG@5 {:.4}  NDCG@10 {:.4}", p.features, p.ndcg5, p.ndcg10);
    }
    Ok(())
}

fn kappa(path: &Path) -> Result<()> {
    let mut items: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let [item, _rater, grade] = f[..] else {
            bail!("{} line {}: expected `item rater grade`", path.display(), n + 1);
        };
        let g: usize = grade
            .parse()
            .ok()
            .filter(|&g| g <= 2)
            .ok_or_else(|| anyhow!("{} line {}: grade must be 0, 1 or 2", path.display(), n + 1))?;
        items.entry(item.to_owned()).or_insert_with(|| vec![0; 3])[g] += 1;
    }
    let counts: Vec<Vec<u32>> = items.into_values().collect();
    let k = fleiss_kappa(&counts)?;
    println!("items {}  raters {}  kappa {k:.4}", counts.len(), counts[0].iter().sum::<u32>());
    Ok(())
}

fn demo_data(out: &Path, tables: usize, seed: u64) -> Result<()> {
    let params = SynthParams {
        tables,
        seed,
        ..SynthParams::default()
    };
    let paths = MicroCorpus::generate(&params)?.write_dir(out)?;
    println!("micro-corpus written; config at {}", paths.config.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::DemoData { out, tables, seed } => return demo_data(out, *tables, *seed),
        Command::Kappa { judgments } => return kappa(judgments),
        _ => {}
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Index => build_persisted_index(&cfg),
        Command::Train { method, features, out } => train(&cfg, method, features.as_deref(), out.as_deref()),
        Command::Rank {
            method,
            features: Some(f),
            out,
            ..
        } => rank_from_features(&cfg, method, f, out.as_deref()),
        Command::Eval { runs, qrels, deltas } => eval(&cfg, runs, qrels.as_deref(), deltas.as_deref()),
        Command::Importance {
            model,
            top,
            incremental,
            batch,
            out,
        } => importance(&cfg, model, *top, incremental.as_deref(), *batch, out.as_deref()),
        cmd => match cfg.precision {
            Precision::F32 => run_engine_command::<f32>(cmd, &cfg),
            Precision::F64 => run_engine_command::<f64>(cmd, &cfg),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
