//! End-to-end pipeline state: corpus, knowledge base, index and embeddings,
//! with cached per-table elements and representations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::baselines::{
    entity_complement_score, hcf_features, infogather_features, keyword_scores, msje_score, nguyen_score,
    schema_complement, BaselineParams, KeywordQuery, TableView,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::{Qrels, RunFile};
use crate::index::{build_index, candidate_pool, CorpusIndex, CorpusStats, POOL_DEPTH};
use crate::kb::{AdjacencyMode, KnowledgeBase, MlmIndex, MlmParams};
use crate::matching::{assemble, crab_features, table_features, CrabKey, FeatureLayout, FeatureVector, TableRepresentations};
use crate::ranker::{Dataset, Sample, Scorer};
use crate::repr::{EmbeddingStore, ReprContext};
use crate::scalar::Scalar;
use crate::table::{extract_elements, split_table, RawTable, SplitAxis, TableElements};

pub const INFOGATHER_FEATURES: [&str; 4] = [
    "infogather_table",
    "infogather_column",
    "infogather_page_title",
    "infogather_headings",
];

#[derive(Debug, Clone)]
pub struct EngineSettings {
    pub pool_depth: usize,
    pub adjacency: AdjacencyMode,
    pub normalize_late_sum: bool,
    pub baselines: BaselineParams,
    pub mlm: MlmParams,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            pool_depth: POOL_DEPTH,
            adjacency: AdjacencyMode::Either,
            normalize_late_sum: false,
            baselines: BaselineParams::default(),
            mlm: MlmParams::default(),
        }
    }
}

impl From<&ExperimentConfig> for EngineSettings {
    fn from(c: &ExperimentConfig) -> Self {
        EngineSettings {
            pool_depth: c.pool_depth,
            adjacency: c.adjacency,
            normalize_late_sum: c.normalize_late_sum,
            baselines: c.baselines(),
            mlm: c.mlm(),
        }
    }
}

/// Unsupervised scorers that rank a candidate pool or the whole corpus directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Keyword(KeywordQuery),
    Msje,
    SchemaComplement,
    EntityComplement,
    Nguyen,
}

impl Baseline {
    pub const ALL: [Baseline; 7] = [
        Baseline::Keyword(KeywordQuery::Entities),
        Baseline::Keyword(KeywordQuery::Headings),
        Baseline::Keyword(KeywordQuery::Caption),
        Baseline::Msje,
        Baseline::SchemaComplement,
        Baseline::EntityComplement,
        Baseline::Nguyen,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Baseline::Keyword(k) => k.tag(),
            Baseline::Msje => "msje",
            Baseline::SchemaComplement => "schema-complement",
            Baseline::EntityComplement => "entity-complement",
            Baseline::Nguyen => "nguyen",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown baseline `{s}`")))
    }
}

/// An input table with everything needed to score candidates against it.
#[derive(Debug, Clone)]
pub struct QueryTable<S> {
    pub raw: RawTable,
    pub elements: TableElements,
    pub reps: TableRepresentations<S>,
    pub features: [f64; 10],
}

impl<S> QueryTable<S> {
    pub fn view(&self) -> TableView<'_> {
        TableView {
            raw: &self.raw,
            elements: &self.elements,
        }
    }
}

pub struct Engine<S: Scalar> {
    kb: KnowledgeBase,
    mlm: MlmIndex,
    tables: Vec<RawTable>,
    by_id: HashMap<String, usize>,
    elements: Vec<TableElements>,
    features: Vec<[f64; 10]>,
    index: CorpusIndex,
    stats: CorpusStats,
    word: Option<EmbeddingStore<S>>,
    graph: Option<EmbeddingStore<S>>,
    reps: Vec<OnceLock<TableRepresentations<S>>>,
    settings: EngineSettings,
}

impl<S: Scalar> Engine<S> {
    pub fn new(
        kb: KnowledgeBase,
        tables: Vec<RawTable>,
        word: Option<EmbeddingStore<S>>,
        graph: Option<EmbeddingStore<S>>,
        settings: EngineSettings,
    ) -> Result<Self> {
        let (index, stats) = build_index(tables.iter())?;
        Self::with_index(kb, tables, index, stats, word, graph, settings)
    }

    /// Use a previously built index; it must cover exactly `tables`.
    pub fn with_index(
        kb: KnowledgeBase,
        tables: Vec<RawTable>,
        index: CorpusIndex,
        stats: CorpusStats,
        word: Option<EmbeddingStore<S>>,
        graph: Option<EmbeddingStore<S>>,
        settings: EngineSettings,
    ) -> Result<Self> {
        if index.len() != tables.len() || tables.iter().any(|t| !index.contains(&t.table_id)) {
            return Err(Error::CorruptIndex("index does not match the corpus".into()));
        }
        let mut by_id = HashMap::with_capacity(tables.len());
        for (i, t) in tables.iter().enumerate() {
            if by_id.insert(t.table_id.clone(), i).is_some() {
                return Err(Error::DuplicateTable(t.table_id.clone()));
            }
        }
        let mlm = MlmIndex::build(&kb, &settings.mlm);
        let elements: Vec<TableElements> = tables.par_iter().map(|t| extract_elements(t, &kb, &mlm)).collect();
        let features = tables.iter().map(|t| table_features(t, &stats)).collect();
        let reps = (0..tables.len()).map(|_| OnceLock::new()).collect();
        Ok(Engine {
            kb,
            mlm,
            tables,
            by_id,
            elements,
            features,
            index,
            stats,
            word,
            graph,
            reps,
            settings,
        })
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn tables(&self) -> &[RawTable] {
        &self.tables
    }

    fn position(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownTable(id.to_owned()))
    }

    pub fn table(&self, id: &str) -> Result<&RawTable> {
        Ok(&self.tables[self.position(id)?])
    }

    pub fn elements(&self, id: &str) -> Result<&TableElements> {
        Ok(&self.elements[self.position(id)?])
    }

    fn ctx(&self) -> ReprContext<'_, S> {
        ReprContext {
            word: self.word.as_ref(),
            graph: self.graph.as_ref(),
            kb: &self.kb,
            stats: &self.stats,
            adjacency: self.settings.adjacency,
        }
    }

    fn representations(&self, i: usize) -> Result<&TableRepresentations<S>> {
        if let Some(r) = self.reps[i].get() {
            return Ok(r);
        }
        let built = TableRepresentations::build(&self.elements[i], &self.ctx())?;
        Ok(self.reps[i].get_or_init(|| built))
    }

    /// Prepare an arbitrary table (a corpus table or a split of one) as input.
    pub fn query_from(&self, raw: RawTable) -> Result<QueryTable<S>> {
        let elements = extract_elements(&raw, &self.kb, &self.mlm);
        let reps = TableRepresentations::build(&elements, &self.ctx())?;
        let features = table_features(&raw, &self.stats);
        Ok(QueryTable {
            raw,
            elements,
            reps,
            features,
        })
    }

    pub fn query(&self, id: &str) -> Result<QueryTable<S>> {
        self.query_from(self.table(id)?.clone())
    }

    /// Candidate pool of a corpus table, sorted by id.
    pub fn pool(&self, id: &str) -> Result<Vec<String>> {
        let i = self.position(id)?;
        Ok(candidate_pool(
            &self.tables[i],
            &self.elements[i],
            &self.index,
            &self.kb,
            self.settings.pool_depth,
        )
        .into_iter()
        .collect())
    }

    fn view(&self, i: usize) -> TableView<'_> {
        TableView {
            raw: &self.tables[i],
            elements: &self.elements[i],
        }
    }

    pub fn pair_features(&self, q: &QueryTable<S>, candidate: &str, layout: &Arc<FeatureLayout>) -> Result<FeatureVector> {
        let i = self.position(candidate)?;
        let sims: Vec<f64> = if layout.variant().uses_hcf() {
            hcf_features(q.view(), self.view(i), &self.stats, &self.kb, &self.settings.baselines).to_vec()
        } else {
            let keys: Vec<CrabKey> = layout.features().iter().filter_map(|f| f.crab).collect();
            crab_features(&q.reps, self.representations(i)?, &keys, self.settings.normalize_late_sum)
        };
        assemble(&q.features, &self.features[i], &sims, layout)
    }

    pub fn infogather_values(&self, q: &QueryTable<S>, candidate: &str) -> Result<[f64; 4]> {
        let i = self.position(candidate)?;
        Ok(infogather_features(q.view(), self.view(i), &self.stats))
    }

    /// Feature rows for every (query, pooled candidate), labelled from `qrels`.
    /// Also returns each query's pool.
    pub fn dataset(
        &self,
        queries: &[String],
        layout: &Arc<FeatureLayout>,
        qrels: &Qrels,
    ) -> Result<(Dataset, BTreeMap<String, Vec<String>>)> {
        self.collect(queries, qrels, Dataset::for_layout(layout), |q, c| {
            Ok(self.pair_features(q, c, layout)?.values)
        })
    }

    pub fn infogather_dataset(&self, queries: &[String], qrels: &Qrels) -> Result<(Dataset, BTreeMap<String, Vec<String>>)> {
        let data = Dataset::new(INFOGATHER_FEATURES.iter().map(|s| s.to_string()).collect());
        self.collect(queries, qrels, data, |q, c| Ok(self.infogather_values(q, c)?.to_vec()))
    }

    fn collect<F>(
        &self,
        queries: &[String],
        qrels: &Qrels,
        mut data: Dataset,
        values: F,
    ) -> Result<(Dataset, BTreeMap<String, Vec<String>>)>
    where
        F: Fn(&QueryTable<S>, &str) -> Result<Vec<f64>> + Sync,
    {
        let mut pools = BTreeMap::new();
        for qid in queries {
            let q = self.query(qid)?;
            let pool = self.pool(qid)?;
            let rows: Vec<Vec<f64>> = pool.par_iter().map(|c| values(&q, c)).collect::<Result<_>>()?;
            for (c, v) in pool.iter().zip(rows) {
                data.push(Sample {
                    qid: qid.clone(),
                    docid: c.clone(),
                    label: f64::from(qrels.grade(qid, c)),
                    values: v,
                })?;
            }
            pools.insert(qid.clone(), pool);
        }
        Ok((data, pools))
    }

    /// Score `pool` against `q` with a trained model.
    pub fn rank_pool(
        &self,
        q: &QueryTable<S>,
        pool: &[String],
        layout: &Arc<FeatureLayout>,
        model: &dyn Scorer,
    ) -> Result<Vec<(String, f64)>> {
        pool.par_iter()
            .map(|c| Ok((c.clone(), model.score(&self.pair_features(q, c, layout)?.values))))
            .collect()
    }

    /// Scores of one unsupervised baseline. Keyword baselines search the
    /// whole corpus; the others score the query's pool.
    pub fn baseline_scores(&self, q: &QueryTable<S>, pool: &[String], which: Baseline) -> Result<Vec<(String, f64)>> {
        let p = &self.settings.baselines;
        if let Baseline::Keyword(k) = which {
            return Ok(keyword_scores(q.view(), k, &self.index, self.settings.pool_depth));
        }
        pool.par_iter()
            .map(|c| {
                let i = self.position(c)?;
                let cand = self.view(i);
                let s = match which {
                    Baseline::Msje => msje_score(&q.raw, cand.raw, p.edit_threshold),
                    Baseline::SchemaComplement => schema_complement(q.view(), cand, &self.stats).score(),
                    Baseline::EntityComplement => entity_complement_score(&q.elements, cand.elements, &self.kb),
                    Baseline::Nguyen => nguyen_score(&q.raw, cand.raw, p.nguyen_alpha, p.edit_threshold),
                    Baseline::Keyword(_) => unreachable!("handled above"),
                };
                Ok((c.clone(), s))
            })
            .collect()
    }

    pub fn baseline_run(&self, queries: &[String], which: Baseline) -> Result<RunFile> {
        let mut run = RunFile::new(which.tag());
        for qid in queries {
            let q = self.query(qid)?;
            let pool = self.pool(qid)?;
            run.insert(qid.clone(), self.baseline_scores(&q, &pool, which)?)?;
        }
        Ok(run)
    }

    /// Rank the original pool of `qid` using a split of its table.
    pub fn rank_split(
        &self,
        qid: &str,
        pool: &[String],
        axis: SplitAxis,
        fraction: f64,
        layout: &Arc<FeatureLayout>,
        model: &dyn Scorer,
    ) -> Result<Vec<(String, f64)>> {
        let raw = split_table(self.table(qid)?, axis, fraction)?;
        let q = self.query_from(raw)?;
        self.rank_pool(&q, pool, layout, model)
    }
}

pub type Engine32 = Engine<f32>;
pub type Engine64 = Engine<f64>;
