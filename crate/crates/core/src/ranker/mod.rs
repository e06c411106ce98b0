//! Learning to rank candidate tables: datasets, forests, linear models and
//! query-level cross-validation.

mod forest;
mod linear;

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use forest::{train_forest, ForestModel, ForestParams, Node, Tree, DEFAULT_MAX_FEATURES, DEFAULT_TREES};
pub use linear::{linear_objective, train_linear, LinearModel, LinearParams};

use crate::error::{Error, Result};
use crate::eval::{ndcg, Gain, Qrels, RunFile};
use crate::matching::{fingerprint_names, FeatureLayout};

pub const DEFAULT_FOLDS: usize = 5;

pub trait Scorer: Send + Sync {
    fn score(&self, values: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub qid: String,
    pub docid: String,
    /// Graded relevance in {0, 1, 2}.
    pub label: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    fingerprint: String,
    rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        let fingerprint = fingerprint_names(feature_names.iter().map(String::as_str));
        Dataset {
            feature_names,
            fingerprint,
            rows: Vec::new(),
        }
    }

    pub fn for_layout(layout: &FeatureLayout) -> Self {
        Self::new(layout.names().map(str::to_owned).collect())
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.values.len() != self.feature_names.len() {
            return Err(Error::Layout(format!(
                "sample {}/{} has {} values, dataset has {} features",
                sample.qid,
                sample.docid,
                sample.values.len(),
                self.feature_names.len()
            )));
        }
        if ![0.0, 1.0, 2.0].contains(&sample.label) {
            return Err(Error::Invalid(format!(
                "label {} of {}/{} is not a grade in {{0,1,2}}",
                sample.label, sample.qid, sample.docid
            )));
        }
        self.rows.push(sample);
        Ok(())
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Distinct query ids, sorted.
    pub fn query_ids(&self) -> Vec<String> {
        let mut q: Vec<String> = self.rows.iter().map(|r| r.qid.clone()).collect();
        q.sort();
        q.dedup();
        q
    }

    pub fn by_query(&self) -> BTreeMap<&str, Vec<&Sample>> {
        let mut out: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.qid.as_str()).or_default().push(r);
        }
        out
    }

    pub fn filter_queries(&self, keep: impl Fn(&str) -> bool) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            fingerprint: self.fingerprint.clone(),
            rows: self.rows.iter().filter(|r| keep(&r.qid)).cloned().collect(),
        }
    }

    /// Restrict to the named features, in the given order.
    pub fn project(&self, names: &[String]) -> Result<Dataset> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Layout(format!("unknown feature `{n}`")))
            })
            .collect::<Result<_>>()?;
        let mut out = Dataset::new(names.to_vec());
        out.rows = self
            .rows
            .iter()
            .map(|r| Sample {
                values: idx.iter().map(|&i| r.values[i]).collect(),
                ..r.clone()
            })
            .collect();
        Ok(out)
    }

    /// Parse `qid,docid,label,f1..fm` with a header row; `#` lines are skipped.
    pub fn read_csv(input: impl BufRead) -> Result<Dataset> {
        let mut data: Option<Dataset> = None;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<features>", e))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::Format {
                what: "feature csv",
                line: n + 1,
                reason,
            };
            let cols: Vec<&str> = line.split(',').collect();
            match &mut data {
                None => {
                    if cols.len() < 3 || cols[..3] != ["qid", "docid", "label"] {
                        return Err(bad("header must start with qid,docid,label".into()));
                    }
                    data = Some(Dataset::new(cols[3..].iter().map(|s| s.to_string()).collect()));
                }
                Some(d) => {
                    if cols.len() != d.n_features() + 3 {
                        return Err(bad(format!("expected {} columns, found {}", d.n_features() + 3, cols.len())));
                    }
                    let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
                    let values = cols[3..].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
                    d.push(Sample {
                        qid: cols[0].to_owned(),
                        docid: cols[1].to_owned(),
                        label: parse(cols[2])?,
                        values,
                    })
                    .map_err(|e| bad(e.to_string()))?;
                }
            }
        }
        data.ok_or_else(|| Error::Format {
            what: "feature csv",
            line: 0,
            reason: "missing header".into(),
        })
    }
}

/// Shuffle distinct query ids with `seed` and deal them round-robin into
/// `folds` test sets.
pub fn query_folds(query_ids: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if folds < 2 {
        return Err(Error::Invalid("cross-validation needs at least 2 folds".into()));
    }
    let mut q = query_ids.to_vec();
    q.sort();
    q.dedup();
    if q.len() < folds {
        return Err(Error::Invalid(format!("{} queries cannot fill {folds} folds", q.len())));
    }
    q.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (i, id) in q.into_iter().enumerate() {
        out[i % folds].push(id);
    }
    Ok(out)
}

pub struct CrossValidation<M> {
    pub run: RunFile,
    pub models: Vec<M>,
    /// Query id → index into `models` of the model that never saw it.
    pub fold_of: BTreeMap<String, usize>,
}

impl<M: Scorer> CrossValidation<M> {
    pub fn model_for(&self, qid: &str) -> Option<&M> {
        self.fold_of.get(qid).map(|&i| &self.models[i])
    }
}

/// Fit on all-but-one fold, score the held-out queries; every query is
/// scored exactly once. Runs are sorted by query id.
pub fn cross_validate<M, F>(data: &Dataset, folds: usize, seed: u64, tag: &str, fit: F) -> Result<CrossValidation<M>>
where
    M: Scorer,
    F: Fn(&Dataset) -> Result<M>,
{
    let parts = query_folds(&data.query_ids(), folds, seed)?;
    let mut scored: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut models = Vec::with_capacity(parts.len());
    let mut fold_of = BTreeMap::new();
    for (i, test) in parts.iter().enumerate() {
        let train = data.filter_queries(|q| !test.iter().any(|t| t == q));
        let model = fit(&train)?;
        for r in data.rows().iter().filter(|r| test.contains(&r.qid)) {
            scored
                .entry(r.qid.clone())
                .or_default()
                .push((r.docid.clone(), model.score(&r.values)));
        }
        for q in test {
            fold_of.insert(q.clone(), i);
        }
        models.push(model);
    }
    let mut run = RunFile::new(tag);
    for (q, s) in scored {
        run.insert(q, s)?;
    }
    Ok(CrossValidation { run, models, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementalPoint {
    pub features: usize,
    pub ndcg5: f64,
    pub ndcg10: f64,
}

/// Cross-validated NDCG using the top `batch`, `2·batch`, … features of
/// `ranking`; the last point uses all of them.
pub fn incremental_feature_eval(
    data: &Dataset,
    qrels: &Qrels,
    ranking: &[String],
    batch: usize,
    folds: usize,
    params: &ForestParams,
    gain: Gain,
) -> Result<Vec<IncrementalPoint>> {
    if batch == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    let m = ranking.len();
    let mut out = Vec::new();
    let mut count = batch.min(m);
    loop {
        let sub = data.project(&ranking[..count])?;
        let p = ForestParams {
            max_features: params.max_features.min(count),
            ..*params
        };
        let cv = cross_validate(&sub, folds, params.seed, "incremental", |d| train_forest(d, &p))?;
        out.push(IncrementalPoint {
            features: count,
            ndcg5: ndcg(&cv.run, qrels, 5, gain)?.mean,
            ndcg10: ndcg(&cv.run, qrels, 10, gain)?.mean,
        });
        if count == m {
            break;
        }
        count = (count + batch).min(m);
    }
    Ok(out)
}
