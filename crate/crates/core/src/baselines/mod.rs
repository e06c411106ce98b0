//! Reference table-recommendation scorers, also used as hand-crafted features.

mod assignment;

use std::collections::{BTreeMap, BTreeSet};

pub use assignment::{max_weight_bipartite_matching, BipartiteMatch};

use crate::index::{heading_set, CorpusIndex, CorpusStats, Field};
use crate::kb::KnowledgeBase;
use crate::table::{RawTable, TableElements};
use crate::text::tokenize;

pub const DEFAULT_EDIT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_NGUYEN_ALPHA: f64 = 0.5;

/// A table together with its extracted elements.
#[derive(Debug, Clone, Copy)]
pub struct TableView<'a> {
    pub raw: &'a RawTable,
    pub elements: &'a TableElements,
}

/// `1 - levenshtein / max(len)` over characters; 1 for two empty strings.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / len as f64
}

fn heading_matching(a: &[String], b: &[String], delta: f64) -> f64 {
    let w: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| edit_similarity(x, y)).collect())
        .collect();
    max_weight_bipartite_matching(&w, delta).total
}

/// Fuzzy Jaccard of the two heading sets: `M / (|A| + |B| - M)` where `M` is
/// the edit-similarity matching total.
pub fn msje_score(input: &RawTable, candidate: &RawTable, delta: f64) -> f64 {
    let a = heading_set(input);
    let b = heading_set(candidate);
    let m = heading_matching(&a, &b, delta);
    let denom = a.len() as f64 + b.len() as f64 - m;
    if denom <= 0.0 {
        0.0
    } else {
        m / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemaComplement {
    pub entity_coverage: f64,
    pub heading_benefit: f64,
}

impl SchemaComplement {
    pub fn score(&self) -> f64 {
        self.entity_coverage * self.heading_benefit
    }
}

/// Entity coverage of the input by the candidate, and the candidate headings'
/// average co-occurrence benefit against the input headings.
pub fn schema_complement(input: TableView<'_>, candidate: TableView<'_>, stats: &CorpusStats) -> SchemaComplement {
    let ea: BTreeSet<&str> = input.elements.entities.iter().map(String::as_str).collect();
    let eb: BTreeSet<&str> = candidate.elements.entities.iter().map(String::as_str).collect();
    let entity_coverage = if ea.is_empty() {
        0.0
    } else {
        ea.intersection(&eb).count() as f64 / ea.len() as f64
    };
    let ha = heading_set(input.raw);
    let hb = heading_set(candidate.raw);
    let heading_benefit = if ha.is_empty() || hb.is_empty() {
        0.0
    } else {
        let benefit = |h: &str| {
            ha.iter()
                .map(|x| {
                    let c = stats.heading_count(x);
                    if c == 0 {
                        0.0
                    } else {
                        stats.heading_pair_count(x, h) as f64 / c as f64
                    }
                })
                .sum::<f64>()
                / ha.len() as f64
        };
        hb.iter().map(|h| benefit(h)).sum::<f64>() / hb.len() as f64
    };
    SchemaComplement {
        entity_coverage,
        heading_benefit,
    }
}

/// Mean pairwise link-based relatedness over the two core-column entity sets.
pub fn entity_complement_score(input: &TableElements, candidate: &TableElements, kb: &KnowledgeBase) -> f64 {
    let a: BTreeSet<&str> = input.entities.iter().map(String::as_str).collect();
    let b: BTreeSet<&str> = candidate.entities.iter().map(String::as_str).collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for x in &a {
        for y in &b {
            total += kb.wlm(x, y).unwrap_or(0.0);
        }
    }
    total / (a.len() * b.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NguyenScore {
    pub headings: f64,
    pub data: f64,
}

impl NguyenScore {
    pub fn combined(&self, alpha: f64) -> f64 {
        alpha * self.headings + (1.0 - alpha) * self.data
    }
}

fn column_words(t: &RawTable) -> Vec<BTreeSet<String>> {
    (0..t.n_cols())
        .map(|j| t.column(j).flat_map(|c| tokenize(&c.text)).collect())
        .collect()
}

fn binary_cosine(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    a.intersection(b).count() as f64 / ((a.len() * b.len()) as f64).sqrt()
}

/// Heading matching normalized by the larger heading set, and the symmetric
/// best-column-match similarity averaged over non-empty columns.
pub fn nguyen(input: &RawTable, candidate: &RawTable, delta: f64) -> NguyenScore {
    let ha = heading_set(input);
    let hb = heading_set(candidate);
    let hmax = ha.len().max(hb.len());
    let headings = if hmax == 0 {
        0.0
    } else {
        heading_matching(&ha, &hb, delta) / hmax as f64
    };
    let ca: Vec<_> = column_words(input).into_iter().filter(|c| !c.is_empty()).collect();
    let cb: Vec<_> = column_words(candidate).into_iter().filter(|c| !c.is_empty()).collect();
    let data = if ca.is_empty() || cb.is_empty() {
        0.0
    } else {
        let best = |x: &BTreeSet<String>, ys: &[BTreeSet<String>]| {
            ys.iter().map(|y| binary_cosine(x, y)).fold(0.0, f64::max)
        };
        let ab = ca.iter().map(|x| best(x, &cb)).sum::<f64>() / ca.len() as f64;
        let ba = cb.iter().map(|y| best(y, &ca)).sum::<f64>() / cb.len() as f64;
        0.5 * (ab + ba)
    };
    NguyenScore { headings, data }
}

pub fn nguyen_score(input: &RawTable, candidate: &RawTable, alpha: f64, delta: f64) -> f64 {
    nguyen(input, candidate, delta).combined(alpha)
}

type TermWeights = BTreeMap<String, f64>;

fn idf_vector<'a>(terms: impl IntoIterator<Item = &'a String>, field: Field, stats: &CorpusStats) -> TermWeights {
    terms
        .into_iter()
        .map(|t| (t.clone(), stats.idf(t, field)))
        .collect()
}

fn tfidf_vector<'a>(terms: impl IntoIterator<Item = &'a String>, field: Field, stats: &CorpusStats) -> TermWeights {
    let mut v = TermWeights::new();
    for t in terms {
        *v.entry(t.clone()).or_default() += 1.0;
    }
    for (t, w) in v.iter_mut() {
        *w *= stats.idf(t, field);
    }
    v
}

fn term_cosine(a: &TermWeights, b: &TermWeights) -> f64 {
    let na = a.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb = b.values().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    dot / (na * nb)
}

/// Four cosines: table data, best column pair, page title, headings.
pub fn infogather_features(input: TableView<'_>, candidate: TableView<'_>, stats: &CorpusStats) -> [f64; 4] {
    let data = term_cosine(
        &idf_vector(&input.elements.data_words, Field::Data, stats),
        &idf_vector(&candidate.elements.data_words, Field::Data, stats),
    );
    let columns = |t: &RawTable| -> Vec<TermWeights> {
        (0..t.n_cols())
            .map(|j| {
                let words: Vec<String> = t.column(j).flat_map(|c| tokenize(&c.text)).collect();
                tfidf_vector(&words, Field::Data, stats)
            })
            .collect()
    };
    let (ca, cb) = (columns(input.raw), columns(candidate.raw));
    let column = ca
        .iter()
        .flat_map(|x| cb.iter().map(move |y| term_cosine(x, y)))
        .fold(0.0, f64::max);
    let title = term_cosine(
        &idf_vector(&tokenize(&input.raw.page_title), Field::PageTitle, stats),
        &idf_vector(&tokenize(&candidate.raw.page_title), Field::PageTitle, stats),
    );
    let headings = term_cosine(
        &tfidf_vector(&input.elements.heading_words, Field::Headings, stats),
        &tfidf_vector(&candidate.elements.heading_words, Field::Headings, stats),
    );
    [data, column, title, headings]
}

pub fn infogather_score(features: &[f64; 4], weights: &[f64; 4]) -> f64 {
    features.iter().zip(weights).map(|(f, w)| f * w).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineParams {
    pub edit_threshold: f64,
    pub nguyen_alpha: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            edit_threshold: DEFAULT_EDIT_THRESHOLD,
            nguyen_alpha: DEFAULT_NGUYEN_ALPHA,
        }
    }
}

/// The ten hand-crafted similarity features, in layout order.
pub fn hcf_features(
    input: TableView<'_>,
    candidate: TableView<'_>,
    stats: &CorpusStats,
    kb: &KnowledgeBase,
    params: &BaselineParams,
) -> [f64; 10] {
    let ig = infogather_features(input, candidate, stats);
    let sc = schema_complement(input, candidate, stats);
    let ng = nguyen(input.raw, candidate.raw, params.edit_threshold);
    [
        ig[2],
        msje_score(input.raw, candidate.raw, params.edit_threshold),
        sc.heading_benefit,
        ig[3],
        ng.headings,
        ig[1],
        ig[0],
        ng.data,
        entity_complement_score(input.elements, candidate.elements, kb),
        sc.entity_coverage,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeywordQuery {
    Entities,
    Headings,
    Caption,
}

impl KeywordQuery {
    pub const ALL: [KeywordQuery; 3] = [KeywordQuery::Entities, KeywordQuery::Headings, KeywordQuery::Caption];

    pub fn tag(self) -> &'static str {
        match self {
            KeywordQuery::Entities => "kw-entities",
            KeywordQuery::Headings => "kw-headings",
            KeywordQuery::Caption => "kw-caption",
        }
    }
}

/// BM25 ranking of the corpus for one keyword-query variant, input excluded.
pub fn keyword_scores(
    input: TableView<'_>,
    which: KeywordQuery,
    index: &CorpusIndex,
    k: usize,
) -> Vec<(String, f64)> {
    let (query, fields): (Vec<String>, &[Field]) = match which {
        KeywordQuery::Entities => (input.elements.entities.clone(), &[Field::Entities]),
        KeywordQuery::Headings => (input.elements.heading_words.clone(), &[Field::Headings]),
        KeywordQuery::Caption => (tokenize(&input.raw.caption), &[Field::Caption, Field::Catchall]),
    };
    if query.is_empty() {
        return Vec::new();
    }
    let mut hits = index.bm25_search_fields(&query, fields, k + 1);
    hits.retain(|(id, _)| *id != input.raw.table_id);
    hits.truncate(k);
    hits
}
