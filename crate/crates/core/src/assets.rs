//! Loading the inputs an [`ExperimentConfig`] names, and the work-directory layout.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::engine::{Engine, EngineSettings};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::{self, CorpusIndex, CorpusStats};
use crate::kb::{KbPaths, KnowledgeBase};
use crate::repr::{EmbeddingStore, Space};
use crate::scalar::Scalar;
use crate::table::{parse_table, RawTable};

/// A config path that the current step cannot do without.
pub fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Invalid(format!("config key `{key}` is not set")))
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn load_kb(cfg: &ExperimentConfig) -> Result<KnowledgeBase> {
    KnowledgeBase::load_files(KbPaths {
        catalog: required(&cfg.kb_catalog, "kb_catalog")?,
        links: required(&cfg.kb_links, "kb_links")?,
        redirects: required(&cfg.kb_redirects, "kb_redirects")?,
    })
}

/// One JSON table record per line; blank and `#` lines are skipped.
pub fn read_corpus(input: impl BufRead, kb: &KnowledgeBase) -> Result<Vec<RawTable>> {
    let mut tables = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("corpus", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        tables.push(parse_table(line, kb).map_err(|e| Error::Format {
            what: "corpus",
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(tables)
}

pub fn load_corpus(path: &Path, kb: &KnowledgeBase) -> Result<Vec<RawTable>> {
    read_corpus(reader(path)?, kb)
}

/// Word and graph embedding stores, each optional.
pub type EmbeddingPair<S> = (Option<EmbeddingStore<S>>, Option<EmbeddingStore<S>>);

pub fn load_embeddings<S: Scalar>(cfg: &ExperimentConfig) -> Result<EmbeddingPair<S>> {
    let open = |p: &Option<PathBuf>, space| p.as_deref().map(|p| EmbeddingStore::open(p, space)).transpose();
    Ok((open(&cfg.word_embeddings, Space::Word)?, open(&cfg.graph_embeddings, Space::Graph)?))
}

/// One table id per line; blank and `#` lines are skipped.
pub fn load_queries(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader(path)?.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('#') {
            out.push(line.to_owned());
        }
    }
    Ok(out)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    Qrels::read(reader(path)?)
}

/// Fixed file names under the configured work directory.
#[derive(Debug, Clone)]
pub struct WorkDir {
    root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        WorkDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Corpus after ingest: entity links resolved, one record per line.
    pub fn tables(&self) -> PathBuf {
        self.root.join("tables.jsonl")
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index.bin")
    }

    pub fn features(&self, tag: &str) -> PathBuf {
        self.root.join("features").join(format!("{tag}.csv"))
    }

    pub fn model(&self, tag: &str) -> PathBuf {
        self.root.join("models").join(format!("{tag}.model"))
    }

    pub fn run(&self, tag: &str) -> PathBuf {
        self.root.join("runs").join(format!("{tag}.run"))
    }
}

/// Ingested corpus plus its persisted index; both must exist.
pub fn load_indexed_corpus(work: &WorkDir, kb: &KnowledgeBase) -> Result<(Vec<RawTable>, CorpusIndex, CorpusStats)> {
    for (path, step) in [(work.tables(), "ingest"), (work.index(), "index")] {
        if !path.exists() {
            return Err(Error::Invalid(format!(
                "{} not found; run the `{step}` step first",
                path.display()
            )));
        }
    }
    let tables = load_corpus(&work.tables(), kb)?;
    let path = work.index();
    let (index, stats) = index::load(reader(&path)?)?;
    Ok((tables, index, stats))
}

/// Engine over the ingested, indexed corpus of `cfg`.
pub fn load_engine<S: Scalar>(cfg: &ExperimentConfig) -> Result<Engine<S>> {
    let kb = load_kb(cfg)?;
    let (tables, index, stats) = load_indexed_corpus(&WorkDir::new(&cfg.work_dir), &kb)?;
    let (word, graph) = load_embeddings(cfg)?;
    Engine::with_index(kb, tables, index, stats, word, graph, EngineSettings::from(cfg))
}
