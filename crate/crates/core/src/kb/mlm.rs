//! Mixture-of-language-models entity retrieval over the `label` and
//! `abstract` fields with Dirichlet smoothing per field.

use std::collections::HashMap;

use super::KnowledgeBase;
use crate::text::tokenize;

/// Anything that maps free text to a ranked list of entity ids.
pub trait EntityRetriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmParams {
    pub label_weight: f64,
    pub abstract_weight: f64,
    /// Dirichlet prior per field; `None` uses the average field length.
    pub label_mu: Option<f64>,
    pub abstract_mu: Option<f64>,
}

impl Default for MlmParams {
    fn default() -> Self {
        MlmParams {
            label_weight: 0.2,
            abstract_weight: 0.8,
            label_mu: None,
            abstract_mu: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct FieldModel {
    postings: HashMap<String, Vec<(u32, u32)>>,
    collection_tf: HashMap<String, u64>,
    doc_len: Vec<u32>,
    total_len: u64,
    mu: f64,
    weight: f64,
}

impl FieldModel {
    fn build(docs: impl Iterator<Item = Vec<String>>, weight: f64, mu: Option<f64>) -> Self {
        let mut f = FieldModel {
            weight,
            ..Default::default()
        };
        for (doc, tokens) in docs.enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            let mut terms: Vec<_> = tf.into_iter().collect();
            terms.sort_unstable();
            for (t, c) in terms {
                f.postings.entry(t.to_owned()).or_default().push((doc as u32, c));
                *f.collection_tf.entry(t.to_owned()).or_default() += c as u64;
            }
            f.doc_len.push(tokens.len() as u32);
            f.total_len += tokens.len() as u64;
        }
        f.mu = mu.unwrap_or_else(|| {
            if f.doc_len.is_empty() {
                0.0
            } else {
                f.total_len as f64 / f.doc_len.len() as f64
            }
        });
        f
    }

    fn p_collection(&self, term: &str) -> f64 {
        if self.total_len == 0 {
            return 0.0;
        }
        self.collection_tf.get(term).copied().unwrap_or(0) as f64 / self.total_len as f64
    }

    fn tf(&self, term: &str, doc: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&doc, |&(d, _)| d).ok().map(|i| p[i].1))
            .unwrap_or(0)
    }

    /// Dirichlet-smoothed p(t | θ_{e,f}).
    fn p(&self, term: &str, doc: u32, p_c: f64) -> f64 {
        let denom = self.doc_len[doc as usize] as f64 + self.mu;
        if denom <= 0.0 {
            return 0.0;
        }
        (self.tf(term, doc) as f64 + self.mu * p_c) / denom
    }
}

#[derive(Debug, Clone)]
pub struct MlmIndex {
    ids: Vec<String>,
    fields: [FieldModel; 2],
}

impl MlmIndex {
    pub fn build(kb: &KnowledgeBase, params: &MlmParams) -> Self {
        let label = FieldModel::build(
            kb.records().iter().map(|r| tokenize(&r.label)),
            params.label_weight,
            params.label_mu,
        );
        let abs = FieldModel::build(
            kb.records().iter().map(|r| tokenize(&r.abstract_text)),
            params.abstract_weight,
            params.abstract_mu,
        );
        MlmIndex {
            ids: kb.records().iter().map(|r| r.id.clone()).collect(),
            fields: [label, abs],
        }
    }

    /// Scored top-k: `Σ_t ln Σ_f w_f p(t|θ_{e,f})`, ties broken by id.
    ///
    /// Only entities matching at least one query term in some field are
    /// candidates; terms unseen in every field are ignored.
    pub fn search(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let terms: Vec<String> = tokenize(query);
        let scored_terms: Vec<(&str, [f64; 2])> = terms
            .iter()
            .map(|t| (t.as_str(), [self.fields[0].p_collection(t), self.fields[1].p_collection(t)]))
            .filter(|(_, pc)| pc.iter().any(|&p| p > 0.0))
            .collect();
        if scored_terms.is_empty() {
            return Vec::new();
        }
        let mut candidates: Vec<u32> = scored_terms
            .iter()
            .flat_map(|(t, _)| {
                self.fields
                    .iter()
                    .flat_map(move |f| f.postings.get(*t).into_iter().flatten().map(|&(d, _)| d))
            })
            .collect();
        candidates.sort_unstable();
        candidates.dedup();

        let mut scored: Vec<(u32, f64)> = candidates
            .into_iter()
            .map(|doc| {
                let s = scored_terms
                    .iter()
                    .map(|(t, pc)| {
                        let mix: f64 = self
                            .fields
                            .iter()
                            .zip(pc)
                            .map(|(f, &p_c)| f.weight * f.p(t, doc, p_c))
                            .sum();
                        mix.ln()
                    })
                    .sum();
                (doc, s)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.ids[a.0 as usize].cmp(&self.ids[b.0 as usize]))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(d, s)| (self.ids[d as usize].clone(), s))
            .collect()
    }
}

impl EntityRetriever for MlmIndex {
    fn retrieve(&self, query: &str, k: usize) -> Vec<String> {
        self.search(query, k).into_iter().map(|(id, _)| id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_kb() -> KnowledgeBase {
        let catalog = "e1\tOslo\tcapital city of norway on the fjord\n\
                       e2\tBergen\tcity on the west coast of norway\n\
                       e3\tStockholm\tcapital city of sweden\n\
                       e4\tViking Stadion\tfootball stadium in stavanger norway\n\
                       e5\tUllevaal Stadion\tnational football stadium in oslo\n";
        KnowledgeBase::load(catalog.as_bytes(), "".as_bytes(), "".as_bytes()).unwrap()
    }

    #[test]
    fn exact_label_ranks_first() {
        let kb = micro_kb();
        let idx = MlmIndex::build(&kb, &MlmParams::default());
        assert_eq!(idx.retrieve("Bergen", 3)[0], "e2");
        assert_eq!(idx.retrieve("Ullevaal Stadion", 3)[0], "e5");
    }

    #[test]
    fn boundaries() {
        let kb = micro_kb();
        let idx = MlmIndex::build(&kb, &MlmParams::default());
        assert!(idx.retrieve("oslo", 0).is_empty());
        assert!(idx.retrieve("", 10).is_empty());
        assert!(idx.retrieve("the of", 10).is_empty());
        assert!(idx.retrieve("zzzz", 10).is_empty());
    }

    /// Oracle: evaluate the mixture directly from hand-tokenized fields.
    #[test]
    fn micro_kb_matches_direct_probabilities() {
        let kb = micro_kb();
        let params = MlmParams {
            label_weight: 0.3,
            abstract_weight: 0.7,
            label_mu: None,
            abstract_mu: None,
        };
        let idx = MlmIndex::build(&kb, &params);

        let labels: Vec<Vec<&str>> = vec![
            vec!["oslo"],
            vec!["bergen"],
            vec!["stockholm"],
            vec!["viking", "stadion"],
            vec!["ullevaal", "stadion"],
        ];
        let abstracts: Vec<Vec<&str>> = vec![
            vec!["capital", "city", "norway", "fjord"],
            vec!["city", "west", "coast", "norway"],
            vec!["capital", "city", "sweden"],
            vec!["football", "stadium", "stavanger", "norway"],
            vec!["national", "football", "stadium", "oslo"],
        ];
        let field_p = |docs: &Vec<Vec<&str>>, t: &str, d: usize| {
            let total: usize = docs.iter().map(Vec::len).sum();
            let mu = total as f64 / docs.len() as f64;
            let cf = docs.iter().flatten().filter(|w| **w == t).count() as f64 / total as f64;
            let tf = docs[d].iter().filter(|w| **w == t).count() as f64;
            ((tf + mu * cf) / (docs[d].len() as f64 + mu), cf)
        };
        let query = ["oslo", "norway", "stadion"];
        let mut expected: Vec<(String, f64)> = Vec::new();
        for d in 0..5 {
            let mut s = 0.0;
            let mut matches = false;
            for t in query {
                let (pl, cl) = field_p(&labels, t, d);
                let (pa, ca) = field_p(&abstracts, t, d);
                assert!(cl > 0.0 || ca > 0.0);
                matches |= labels[d].contains(&t) || abstracts[d].contains(&t);
                s += (0.3 * pl + 0.7 * pa).ln();
            }
            if matches {
                expected.push((format!("e{}", d + 1), s));
            }
        }
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let got = idx.search("Oslo Norway stadion", 10);
        assert_eq!(got.len(), expected.len());
        for ((gid, gs), (eid, es)) in got.iter().zip(&expected) {
            assert_eq!(gid, eid);
            assert!((gs - es).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let kb = micro_kb();
        let a = MlmIndex::build(&kb, &MlmParams::default()).search("norway city", 5);
        let b = MlmIndex::build(&kb, &MlmParams::default()).search("norway city", 5);
        assert_eq!(a, b);
    }
}
