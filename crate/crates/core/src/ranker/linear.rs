//! Linear scorer trained by cyclic coordinate ascent on mean NDCG@k.

use std::io::{BufRead, Write};

use super::{Dataset, Scorer};
use crate::error::{Error, Result};
use crate::eval::{ndcg_at, Gain};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    /// Full passes over the coordinates; stops early when a pass finds no gain.
    pub max_passes: usize,
    /// Offsets tried on each coordinate, in order.
    pub steps: Vec<f64>,
    pub k: usize,
    pub gain: Gain,
}

impl Default for LinearParams {
    fn default() -> Self {
        let base = [0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0];
        LinearParams {
            max_passes: 25,
            steps: base.iter().flat_map(|&s| [s, -s]).collect(),
            k: 10,
            gain: Gain::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub feature_names: Vec<String>,
    pub fingerprint: String,
}

impl Scorer for LinearModel {
    fn score(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, x)| w * x).sum()
    }
}

struct Query<'a> {
    docs: Vec<(&'a str, &'a [f64], u8)>,
    judged: Vec<u8>,
}

fn build_queries(data: &Dataset) -> Vec<Query<'_>> {
    data.by_query()
        .into_values()
        .map(|rows| {
            let docs: Vec<_> = rows
                .iter()
                .map(|r| (r.docid.as_str(), r.values.as_slice(), r.label as u8))
                .collect();
            let judged = docs.iter().map(|d| d.2).collect();
            Query { docs, judged }
        })
        .collect()
}

fn objective(queries: &[Query<'_>], w: &[f64], params: &LinearParams) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for q in queries {
        let mut scored: Vec<(f64, &str, u8)> = q
            .docs
            .iter()
            .map(|(d, x, g)| (w.iter().zip(*x).map(|(a, b)| a * b).sum(), *d, *g))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let ids: Vec<String> = scored.iter().map(|s| s.1.to_owned()).collect();
        let grade = |d: &str| scored.iter().find(|s| s.1 == d).map_or(0, |s| s.2);
        total += ndcg_at(&ids, &q.judged, grade, params.k, params.gain);
    }
    total / queries.len() as f64
}

/// Start from uniform weights; for each coordinate in turn keep the step with
/// the largest strict objective gain.
pub fn train_linear(data: &Dataset, params: &LinearParams) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let m = data.n_features();
    let queries = build_queries(data);
    let mut w = vec![1.0 / m as f64; m];
    let mut best = objective(&queries, &w, params);
    for _ in 0..params.max_passes {
        let mut improved = false;
        for j in 0..m {
            let base = w[j];
            let mut best_w = base;
            for &s in &params.steps {
                w[j] = base + s;
                let v = objective(&queries, &w, params);
                if v > best + 1e-12 {
                    best = v;
                    best_w = w[j];
                    improved = true;
                }
            }
            w[j] = best_w;
        }
        if !improved {
            break;
        }
    }
    let norm: f64 = w.iter().map(|x| x.abs()).sum();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(LinearModel {
        weights: w,
        feature_names: data.feature_names().to_vec(),
        fingerprint: data.fingerprint().to_owned(),
    })
}

/// Mean training NDCG of a weight vector, for reporting.
pub fn linear_objective(data: &Dataset, weights: &[f64], params: &LinearParams) -> f64 {
    let queries = build_queries(data);
    objective(&queries, weights, params)
}

const MAGIC: &str = "tablerec-linear 1";

impl LinearModel {
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "fingerprint {}", self.fingerprint)?;
        for (n, w) in self.feature_names.iter().zip(&self.weights) {
            writeln!(out, "weight {w} {n}")?;
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Format {
            what: "linear model",
            line,
            reason,
        };
        let mut model = LinearModel {
            weights: Vec::new(),
            feature_names: Vec::new(),
            fingerprint: String::new(),
        };
        let mut saw_magic = false;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<model>", e))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if line == MAGIC {
                saw_magic = true;
            } else if let Some(f) = line.strip_prefix("fingerprint ") {
                model.fingerprint = f.to_owned();
            } else if let Some(rest) = line.strip_prefix("weight ") {
                let (w, name) = rest.split_once(' ').ok_or_else(|| bad(n + 1, "missing name".into()))?;
                model
                    .weights
                    .push(w.parse().map_err(|_| bad(n + 1, format!("bad weight `{w}`")))?);
                model.feature_names.push(name.to_owned());
            } else {
                return Err(bad(n + 1, format!("unexpected line `{line}`")));
            }
        }
        if !saw_magic {
            return Err(bad(1, "missing header".into()));
        }
        Ok(model)
    }
}
