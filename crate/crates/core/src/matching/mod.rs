//! Table-pair features: semantic element matching, table descriptors and
//! feature-vector assembly.

mod fusion;
mod layout;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

pub use fusion::{early_fusion, late_fusion, similarity, Aggregation, PreparedRepresentation, SimilarityMeasure};
pub use layout::{
    cross_element_keys, element_wise_keys, fingerprint_names, CrabKey, FeatureDescriptor, FeatureGroup, FeatureLayout, Variant,
    CROSS_ELEMENT, ELEMENT_WISE, HCF_FEATURES, TABLE_FEATURES,
};

use crate::error::{Error, Result};
use crate::index::{CorpusStats, Field};
use crate::repr::{admissible_pairs, represent, Element, ReprContext, Space};
use crate::scalar::Scalar;
use crate::table::{RawTable, TableElements};
use crate::text::tokenize;

/// The ten per-table descriptors, in [`TABLE_FEATURES`] order.
pub fn table_features(t: &RawTable, stats: &CorpusStats) -> [f64; 10] {
    let nulls = t.rows.iter().flatten().filter(|c| c.is_empty()).count();
    let idf_sum = |text: &str, field| tokenize(text).iter().map(|w| stats.idf(w, field)).sum::<f64>();
    let s = &t.page_stats;
    [
        t.n_rows() as f64,
        t.n_cols() as f64,
        nulls as f64,
        idf_sum(&t.caption, Field::Caption),
        idf_sum(&t.page_title, Field::PageTitle),
        s.in_links as f64,
        s.out_links as f64,
        s.page_views as f64,
        1.0 / s.tables_on_page as f64,
        s.table_chars as f64 / s.page_chars as f64,
    ]
}

/// All admissible element representations of one table, ready for matching.
#[derive(Debug, Clone)]
pub struct TableRepresentations<S> {
    reps: BTreeMap<(Element, Space), PreparedRepresentation<S>>,
    /// Terms without a vector, summed over all representations.
    pub missing: usize,
}

impl<S: Scalar> TableRepresentations<S> {
    pub fn build(elements: &TableElements, ctx: &ReprContext<'_, S>) -> Result<Self> {
        let mut reps = BTreeMap::new();
        let mut missing = 0;
        for (e, s) in admissible_pairs() {
            let rep = represent(elements, e, s, ctx)?;
            missing += rep.missing;
            reps.insert((e, s), PreparedRepresentation::new(&rep)?);
        }
        Ok(TableRepresentations { reps, missing })
    }

    pub fn get(&self, element: Element, space: Space) -> Option<&PreparedRepresentation<S>> {
        self.reps.get(&(element, space))
    }
}

/// Values for `keys`, computed four measures at a time. Missing or
/// inadmissible representations give 0.
pub fn crab_features<S: Scalar>(
    input: &TableRepresentations<S>,
    candidate: &TableRepresentations<S>,
    keys: &[CrabKey],
    normalize_sum: bool,
) -> Vec<f64> {
    let mut cache: BTreeMap<(Element, Element, Space), [S; 4]> = BTreeMap::new();
    keys.iter()
        .map(|k| {
            let m = cache.entry((k.input, k.candidate, k.space)).or_insert_with(|| {
                match (input.get(k.input, k.space), candidate.get(k.candidate, k.space)) {
                    (Some(a), Some(b)) => a.measures(b, normalize_sum).unwrap_or([S::zero(); 4]),
                    _ => [S::zero(); 4],
                }
            });
            let i = SimilarityMeasure::ALL.iter().position(|&x| x == k.measure).unwrap_or(0);
            m[i].to_f64_lossy()
        })
        .collect()
}

/// The 108 CRAB similarity features: 36 element-wise then 72 cross-element.
pub fn crab_similarity_features<S: Scalar>(
    input: &TableElements,
    candidate: &TableElements,
    ctx: &ReprContext<'_, S>,
) -> Result<Vec<f64>> {
    let a = TableRepresentations::build(input, ctx)?;
    let b = TableRepresentations::build(candidate, ctx)?;
    let mut keys = element_wise_keys();
    keys.extend(cross_element_keys());
    Ok(crab_features(&a, &b, &keys, false))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Arc<FeatureLayout>,
}

/// `[input table features | candidate table features | similarity]`, the
/// table blocks omitted for variants without them.
pub fn assemble(
    input: &[f64; 10],
    candidate: &[f64; 10],
    similarity: &[f64],
    layout: &Arc<FeatureLayout>,
) -> Result<FeatureVector> {
    if similarity.len() != layout.similarity_len() {
        return Err(Error::Layout(format!(
            "{} expects {} similarity features, got {}",
            layout.variant(),
            layout.similarity_len(),
            similarity.len()
        )));
    }
    let mut values = Vec::with_capacity(layout.len());
    if layout.variant().has_table_features() {
        values.extend_from_slice(input);
        values.extend_from_slice(candidate);
    }
    values.extend_from_slice(similarity);
    debug_assert_eq!(values.len(), layout.len());
    Ok(FeatureVector {
        values,
        layout: Arc::clone(layout),
    })
}

pub struct FeatureRow<'a> {
    pub qid: &'a str,
    pub docid: &'a str,
    pub label: f64,
    pub values: &'a [f64],
}

fn check_id(id: &str) -> Result<()> {
    if id.contains([',', '\n', '\r']) {
        return Err(Error::Invalid(format!("id `{id}` cannot be written to CSV")));
    }
    Ok(())
}

/// `qid,docid,label,f1..fm` with a header of feature names. `comments` are
/// written first as `# ` lines.
pub fn write_feature_csv<'a>(
    out: impl Write,
    layout: &FeatureLayout,
    comments: &[String],
    rows: impl IntoIterator<Item = FeatureRow<'a>>,
) -> Result<()> {
    write_named_csv(out, &layout.names().collect::<Vec<_>>(), comments, rows)
}

/// Same format as [`write_feature_csv`] for an arbitrary column list.
pub fn write_named_csv<'a, N: AsRef<str>>(
    mut out: impl Write,
    names: &[N],
    comments: &[String],
    rows: impl IntoIterator<Item = FeatureRow<'a>>,
) -> Result<()> {
    let io = |e| Error::io("<feature csv>", e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    write!(out, "qid,docid,label").map_err(io)?;
    for n in names {
        write!(out, ",{}", n.as_ref()).map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for r in rows {
        check_id(r.qid)?;
        check_id(r.docid)?;
        if r.values.len() != names.len() {
            return Err(Error::Layout(format!(
                "row {}/{} has {} values, expected {}",
                r.qid,
                r.docid,
                r.values.len(),
                names.len()
            )));
        }
        write!(out, "{},{},{}", r.qid, r.docid, r.label).map_err(io)?;
        for v in r.values {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}
