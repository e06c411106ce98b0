//! Element-level similarity: early fusion (centroid cosine) and late fusion
//! (aggregated pairwise term cosines).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::repr::{ElementRepresentation, SemanticVector, Space, SparseVector};
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    Max,
    Sum,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimilarityMeasure {
    Early,
    Late(Aggregation),
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 4] = [
        SimilarityMeasure::Early,
        SimilarityMeasure::Late(Aggregation::Max),
        SimilarityMeasure::Late(Aggregation::Sum),
        SimilarityMeasure::Late(Aggregation::Avg),
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMeasure::Early => "early",
            SimilarityMeasure::Late(Aggregation::Max) => "late-max",
            SimilarityMeasure::Late(Aggregation::Sum) => "late-sum",
            SimilarityMeasure::Late(Aggregation::Avg) => "late-avg",
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown similarity measure `{s}`")))
    }
}

fn same_space<S>(a: &ElementRepresentation<S>, b: &ElementRepresentation<S>) -> Result<()> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch(a.space.name(), b.space.name()));
    }
    Ok(())
}

/// Cosine of the weighted centroids; 0 for empty elements or zero centroids.
pub fn early_fusion<S: Scalar>(a: &ElementRepresentation<S>, b: &ElementRepresentation<S>) -> Result<S> {
    same_space(a, b)?;
    let ca = SemanticVector::weighted_centroid(a.terms.iter().map(|(w, v)| (*w, v)))?;
    let cb = SemanticVector::weighted_centroid(b.terms.iter().map(|(w, v)| (*w, v)))?;
    match (ca, cb) {
        (Some(ca), Some(cb)) => ca.cosine(&cb),
        _ => Ok(S::zero()),
    }
}

/// Aggregate of all `|a|·|b|` term cosines; 0 if either side is empty.
/// With `normalize`, the sum is divided by `|a|·|b| + 1`.
pub fn late_fusion<S: Scalar>(
    a: &ElementRepresentation<S>,
    b: &ElementRepresentation<S>,
    aggr: Aggregation,
    normalize: bool,
) -> Result<S> {
    same_space(a, b)?;
    let mut cosines = Vec::with_capacity(a.terms.len() * b.terms.len());
    for (_, x) in &a.terms {
        for (_, y) in &b.terms {
            cosines.push(x.cosine(y)?);
        }
    }
    Ok(aggregate(&cosines, aggr, normalize))
}

fn aggregate<S: Scalar>(cosines: &[S], aggr: Aggregation, normalize: bool) -> S {
    if cosines.is_empty() {
        return S::zero();
    }
    let n = S::from_usize_lossy(cosines.len());
    match aggr {
        Aggregation::Max => cosines.iter().copied().fold(S::neg_infinity(), S::max),
        Aggregation::Sum => {
            let s: S = cosines.iter().copied().sum();
            if normalize {
                s / (n + S::one())
            } else {
                s
            }
        }
        Aggregation::Avg => cosines.iter().copied().sum::<S>() / n,
    }
}

pub fn similarity<S: Scalar>(
    a: &ElementRepresentation<S>,
    b: &ElementRepresentation<S>,
    measure: SimilarityMeasure,
    normalize_sum: bool,
) -> Result<S> {
    match measure {
        SimilarityMeasure::Early => early_fusion(a, b),
        SimilarityMeasure::Late(aggr) => late_fusion(a, b, aggr, normalize_sum),
    }
}

/// A representation with unit-normalized term vectors and centroid, so every
/// cosine becomes a dot product. Used for bulk feature extraction.
#[derive(Debug, Clone)]
pub struct PreparedRepresentation<S> {
    pub space: Space,
    units: Vec<SemanticVector<S>>,
    centroid: Option<SemanticVector<S>>,
}

fn unit<S: Scalar>(v: &SemanticVector<S>) -> SemanticVector<S> {
    match v {
        SemanticVector::Dense(x) => {
            let n = scalar::norm(x);
            if n == S::zero() {
                SemanticVector::Dense(x.clone())
            } else {
                SemanticVector::Dense(x.iter().map(|&xi| xi / n).collect())
            }
        }
        SemanticVector::Sparse(x) => {
            let n = x.norm();
            let values = if n == S::zero() {
                x.values.clone()
            } else {
                x.values.iter().map(|&xi| xi / n).collect()
            };
            SemanticVector::Sparse(SparseVector {
                indices: x.indices.clone(),
                values,
            })
        }
    }
}

fn unit_dot<S: Scalar>(a: &SemanticVector<S>, b: &SemanticVector<S>) -> Result<S> {
    match (a, b) {
        (SemanticVector::Dense(x), SemanticVector::Dense(y)) if x.len() == y.len() => Ok(scalar::dot(x, y)),
        (SemanticVector::Sparse(x), SemanticVector::Sparse(y)) => Ok(x.dot(y)),
        (a, b) => a.cosine(b),
    }
}

impl<S: Scalar> PreparedRepresentation<S> {
    pub fn new(rep: &ElementRepresentation<S>) -> Result<Self> {
        let centroid = SemanticVector::weighted_centroid(rep.terms.iter().map(|(w, v)| (*w, v)))?;
        Ok(PreparedRepresentation {
            space: rep.space,
            units: rep.terms.iter().map(|(_, v)| unit(v)).collect(),
            centroid: centroid.as_ref().map(unit),
        })
    }

    pub fn empty(space: Space) -> Self {
        PreparedRepresentation {
            space,
            units: Vec::new(),
            centroid: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// All four measures in [`SimilarityMeasure::ALL`] order.
    pub fn measures(&self, other: &Self, normalize_sum: bool) -> Result<[S; 4]> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(self.space.name(), other.space.name()));
        }
        let early = match (&self.centroid, &other.centroid) {
            (Some(a), Some(b)) => unit_dot(a, b)?,
            _ => S::zero(),
        };
        let mut cosines = Vec::with_capacity(self.units.len() * other.units.len());
        for x in &self.units {
            for y in &other.units {
                cosines.push(unit_dot(x, y)?);
            }
        }
        Ok([
            early,
            aggregate(&cosines, Aggregation::Max, normalize_sum),
            aggregate(&cosines, Aggregation::Sum, normalize_sum),
            aggregate(&cosines, Aggregation::Avg, normalize_sum),
        ])
    }
}
