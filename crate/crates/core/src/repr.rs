//! Term-space and semantic-space representations of table elements.
//!
//! An element is first a weighted bag of terms (TF-IDF words or binary
//! entities); each term is then lifted to a vector in one of three spaces:
//! word embeddings, graph embeddings, or the entity link-indicator space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::{CorpusStats, Field};
use crate::kb::{AdjacencyMode, KnowledgeBase};
use crate::scalar::{self, Scalar};
use crate::table::TableElements;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Topic,
    Headings,
    Entities,
    Data,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::Topic, Element::Headings, Element::Entities, Element::Data];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::Topic => "t",
            Element::Headings => "H",
            Element::Entities => "E",
            Element::Data => "D",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Element::Topic => "topic",
            Element::Headings => "headings",
            Element::Entities => "entities",
            Element::Data => "data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Space {
    Word,
    Graph,
    Entity,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Word, Space::Graph, Space::Entity];

    pub fn name(self) -> &'static str {
        match self {
            Space::Word => "word",
            Space::Graph => "graph",
            Space::Entity => "entity",
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which (element, space) pairs have a representation. Headings are words
/// only; core-column entities have no word form.
pub fn admissible(element: Element, space: Space) -> bool {
    !matches!(
        (element, space),
        (Element::Headings, Space::Graph | Space::Entity) | (Element::Entities, Space::Word)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Word,
    Entity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermVector {
    pub kind: TermKind,
    pub weights: BTreeMap<String, f64>,
}

impl TermVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `tf(t) · idf(t)` over the catchall field; zero-weight terms are dropped.
pub fn word_term_vector(terms: &[String], stats: &CorpusStats) -> TermVector {
    let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
    for t in terms {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let weights = tf
        .into_iter()
        .map(|(t, c)| (t.to_owned(), c as f64 * stats.idf(t, Field::Catchall)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    TermVector {
        kind: TermKind::Word,
        weights,
    }
}

/// Binary vector: every distinct entity gets weight 1.
pub fn entity_term_vector(entities: &[String]) -> TermVector {
    TermVector {
        kind: TermKind::Entity,
        weights: entities.iter().map(|e| (e.clone(), 1.0)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<S> {
    /// Strictly increasing.
    pub indices: Vec<u32>,
    pub values: Vec<S>,
}

impl<S: Scalar> SparseVector<S> {
    pub fn indicator(indices: Vec<u32>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let values = vec![S::one(); indices.len()];
        SparseVector { indices, values }
    }

    pub fn dot(&self, other: &Self) -> S {
        let (mut i, mut j) = (0, 0);
        let mut acc = S::zero();
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> S {
        self.values.iter().map(|&v| v * v).sum::<S>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SemanticVector<S> {
    Dense(Vec<S>),
    Sparse(SparseVector<S>),
}

impl<S: Scalar> SemanticVector<S> {
    fn kind(&self) -> &'static str {
        match self {
            SemanticVector::Dense(_) => "dense",
            SemanticVector::Sparse(_) => "sparse",
        }
    }

    /// Cosine similarity; 0 against a zero vector.
    pub fn cosine(&self, other: &Self) -> Result<S> {
        match (self, other) {
            (SemanticVector::Dense(a), SemanticVector::Dense(b)) => {
                if a.len() != b.len() {
                    return Err(Error::Invalid(format!(
                        "dimension mismatch {} vs {}",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(scalar::cosine(a, b))
            }
            (SemanticVector::Sparse(a), SemanticVector::Sparse(b)) => {
                let (na, nb) = (a.norm(), b.norm());
                if na == S::zero() || nb == S::zero() {
                    return Ok(S::zero());
                }
                Ok(a.dot(b) / (na * nb))
            }
            (a, b) => Err(Error::SpaceMismatch(a.kind(), b.kind())),
        }
    }

    /// `Σ w_j v_j / Σ w_j`; `None` for empty input or non-positive total weight.
    pub fn weighted_centroid<'a>(
        terms: impl IntoIterator<Item = (S, &'a SemanticVector<S>)>,
    ) -> Result<Option<SemanticVector<S>>> {
        let mut total = S::zero();
        let mut dense: Option<Vec<S>> = None;
        let mut sparse: Option<BTreeMap<u32, S>> = None;
        for (w, v) in terms {
            total += w;
            match v {
                SemanticVector::Dense(x) => {
                    if sparse.is_some() {
                        return Err(Error::SpaceMismatch("sparse", "dense"));
                    }
                    let acc = dense.get_or_insert_with(|| vec![S::zero(); x.len()]);
                    if acc.len() != x.len() {
                        return Err(Error::Invalid("dimension mismatch in centroid".into()));
                    }
                    for (a, &xi) in acc.iter_mut().zip(x) {
                        *a += w * xi;
                    }
                }
                SemanticVector::Sparse(x) => {
                    if dense.is_some() {
                        return Err(Error::SpaceMismatch("dense", "sparse"));
                    }
                    let acc = sparse.get_or_insert_with(BTreeMap::new);
                    for (&i, &xi) in x.indices.iter().zip(&x.values) {
                        *acc.entry(i).or_insert_with(S::zero) += w * xi;
                    }
                }
            }
        }
        if total <= S::zero() {
            return Ok(None);
        }
        Ok(match (dense, sparse) {
            (Some(mut d), _) => {
                d.iter_mut().for_each(|a| *a /= total);
                Some(SemanticVector::Dense(d))
            }
            (_, Some(s)) => {
                let (indices, values) = s.into_iter().map(|(i, v)| (i, v / total)).unzip();
                Some(SemanticVector::Sparse(SparseVector { indices, values }))
            }
            _ => None,
        })
    }
}

/// Term-keyed dense vectors loaded from the `count dim` / `term v1 .. vd` text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<S> {
    space: Space,
    dim: usize,
    vectors: HashMap<String, Vec<S>>,
}

impl<S: Scalar> EmbeddingStore<S> {
    pub fn new(space: Space, dim: usize) -> Result<Self> {
        if space == Space::Entity {
            return Err(Error::Invalid(
                "the entity space is derived from the KB, not loaded".into(),
            ));
        }
        Ok(EmbeddingStore {
            space,
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, term: impl Into<String>, v: Vec<S>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Invalid(format!(
                "vector length {} != dimension {}",
                v.len(),
                self.dim
            )));
        }
        self.vectors.insert(term.into(), v);
        Ok(())
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `None` for absent terms; a miss is never a zero vector.
    pub fn get(&self, term: &str) -> Option<&[S]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn open(path: &Path, space: Space) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f), space)
    }

    pub fn read(input: impl BufRead, space: Space) -> Result<Self> {
        let fmt_err = |line: usize, reason: String| Error::Format {
            what: "embeddings",
            line,
            reason,
        };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| fmt_err(1, "missing `count dimension` header".into()))?;
        let header = header.map_err(|e| Error::io("<embeddings>", e))?;
        let mut hp = header.split_whitespace();
        let count: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt_err(1, "bad count".into()))?;
        let dim: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt_err(1, "bad dimension".into()))?;
        let mut store = Self::new(space, dim)?;
        for (n, line) in lines {
            let line = line.map_err(|e| Error::io("<embeddings>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let term = parts.next().unwrap_or_default();
            let v: Vec<S> = parts
                .map(|p| S::parse_decimal(p).ok_or_else(|| fmt_err(n + 1, format!("bad number `{p}`"))))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(fmt_err(n + 1, format!("expected {dim} values, got {}", v.len())));
            }
            store.vectors.insert(term.to_owned(), v);
        }
        if store.vectors.len() != count {
            log::warn!(
                "embedding header announces {count} vectors, read {}",
                store.vectors.len()
            );
        }
        Ok(store)
    }

    /// Write in the text interchange format, terms sorted.
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vectors.len(), self.dim)?;
        let mut terms: Vec<&String> = self.vectors.keys().collect();
        terms.sort();
        for t in terms {
            write!(out, "{t}")?;
            for v in &self.vectors[t] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Indicator vector over entity indices linked with `e`.
pub fn entity_adjacency_vector<S: Scalar>(
    kb: &KnowledgeBase,
    e: &str,
    mode: AdjacencyMode,
) -> Result<SparseVector<S>> {
    Ok(SparseVector::indicator(kb.adjacency(e, mode)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementRepresentation<S> {
    pub element: Element,
    pub space: Space,
    /// (term weight, term vector) for every term that had a vector.
    pub terms: Vec<(S, SemanticVector<S>)>,
    /// Terms skipped for lack of a vector.
    pub missing: usize,
}

impl<S> ElementRepresentation<S> {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Shared resources for building representations.
pub struct ReprContext<'a, S> {
    pub word: Option<&'a EmbeddingStore<S>>,
    pub graph: Option<&'a EmbeddingStore<S>>,
    pub kb: &'a KnowledgeBase,
    pub stats: &'a CorpusStats,
    pub adjacency: AdjacencyMode,
}

fn element_words(el: &TableElements, element: Element) -> &[String] {
    match element {
        Element::Topic => &el.topic_words,
        Element::Headings => &el.heading_words,
        Element::Data => &el.data_words,
        Element::Entities => &[],
    }
}

fn element_entities(el: &TableElements, element: Element) -> &[String] {
    match element {
        Element::Topic => &el.topic_entities,
        Element::Entities => &el.entities,
        Element::Data => &el.data_entities,
        Element::Headings => &[],
    }
}

pub fn represent<S: Scalar>(
    elements: &TableElements,
    element: Element,
    space: Space,
    ctx: &ReprContext<'_, S>,
) -> Result<ElementRepresentation<S>> {
    if !admissible(element, space) {
        return Err(Error::Inadmissible {
            element: element.name(),
            space: space.name(),
        });
    }
    let tv = match space {
        Space::Word => word_term_vector(element_words(elements, element), ctx.stats),
        Space::Graph | Space::Entity => entity_term_vector(element_entities(elements, element)),
    };
    let mut terms = Vec::with_capacity(tv.len());
    let mut missing = 0;
    for (term, &w) in &tv.weights {
        let v = match space {
            Space::Word => ctx.word.and_then(|s| s.get(term)).map(|v| SemanticVector::Dense(v.to_vec())),
            Space::Graph => ctx.graph.and_then(|s| s.get(term)).map(|v| SemanticVector::Dense(v.to_vec())),
            Space::Entity => ctx
                .kb
                .contains(term)
                .then(|| entity_adjacency_vector(ctx.kb, term, ctx.adjacency))
                .transpose()?
                .map(SemanticVector::Sparse),
        };
        match v {
            Some(v) => terms.push((S::from_f64_lossy(w), v)),
            None => missing += 1,
        }
    }
    Ok(ElementRepresentation {
        element,
        space,
        terms,
        missing,
    })
}

/// Count of admissible (element, space) pairs, used by layout checks.
pub fn admissible_pairs() -> BTreeSet<(Element, Space)> {
    Element::ALL
        .into_iter()
        .flat_map(|e| Space::ALL.into_iter().map(move |s| (e, s)))
        .filter(|&(e, s)| admissible(e, s))
        .collect()
}
