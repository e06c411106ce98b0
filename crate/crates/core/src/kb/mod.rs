//! Entity catalog: labels, abstracts, out-links and redirects.
//!
//! Entities are interned to dense `u32` indices on load; the public surface
//! speaks canonical string ids.

mod mlm;

pub use mlm::{EntityRetriever, MlmIndex, MlmParams};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: String,
    pub label: String,
    pub abstract_text: String,
    /// Interned indices of the entities this one links to.
    pub out_links: BTreeSet<u32>,
}

/// How the entity-space indicator vector reads link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjacencyMode {
    /// `e_i` links to `e_j` or `e_j` links to `e_i`.
    #[default]
    Either,
    /// Both directions must be present.
    Mutual,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    records: Vec<EntityRecord>,
    by_id: HashMap<String, u32>,
    by_label: HashMap<String, u32>,
    redirects: HashMap<String, u32>,
    in_links: Vec<BTreeSet<u32>>,
    dropped_links: usize,
    dropped_entities: usize,
}

/// Where the three KB files live.
#[derive(Debug, Clone)]
pub struct KbPaths<'a> {
    pub catalog: &'a Path,
    pub links: &'a Path,
    pub redirects: &'a Path,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

impl KnowledgeBase {
    pub fn load_files(paths: KbPaths<'_>) -> Result<Self> {
        Self::load(
            open(paths.catalog)?,
            open(paths.links)?,
            open(paths.redirects)?,
        )
    }

    /// Load from the three TSV streams: `id label abstract`, `src dst`, `alias canonical`.
    pub fn load(catalog: impl BufRead, links: impl BufRead, redirects: impl BufRead) -> Result<Self> {
        let mut kb = KnowledgeBase::default();

        for (n, line) in catalog.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<catalog>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let id = parts.next().unwrap_or_default().trim();
            let label = parts.next().ok_or_else(|| Error::Format {
                what: "catalog",
                line: n + 1,
                reason: "expected `id<TAB>label<TAB>abstract`".into(),
            })?;
            let abstract_text = parts.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(Error::Format {
                    what: "catalog",
                    line: n + 1,
                    reason: "empty entity id".into(),
                });
            }
            if abstract_text.is_empty() {
                kb.dropped_entities += 1;
                continue;
            }
            if kb.by_id.contains_key(id) {
                return Err(Error::Format {
                    what: "catalog",
                    line: n + 1,
                    reason: format!("duplicate entity id `{id}`"),
                });
            }
            let idx = kb.records.len() as u32;
            kb.by_id.insert(id.to_owned(), idx);
            kb.by_label.entry(label.trim().to_owned()).or_insert(idx);
            kb.records.push(EntityRecord {
                id: id.to_owned(),
                label: label.trim().to_owned(),
                abstract_text: abstract_text.to_owned(),
                out_links: BTreeSet::new(),
            });
        }

        let mut raw_redirects: HashMap<String, String> = HashMap::new();
        for (n, line) in redirects.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<redirects>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (alias, target) = line.split_once('\t').ok_or_else(|| Error::Format {
                what: "redirects",
                line: n + 1,
                reason: "expected `alias<TAB>canonical`".into(),
            })?;
            raw_redirects.insert(alias.trim().to_owned(), target.trim().to_owned());
        }
        kb.resolve_redirects(&raw_redirects)?;

        kb.in_links = vec![BTreeSet::new(); kb.records.len()];
        for (n, line) in links.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<links>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| Error::Format {
                what: "links",
                line: n + 1,
                reason: "expected `src<TAB>dst`".into(),
            })?;
            match (kb.resolve_id(src.trim()), kb.resolve_id(dst.trim())) {
                (Some(s), Some(d)) if s != d => {
                    kb.records[s as usize].out_links.insert(d);
                    kb.in_links[d as usize].insert(s);
                }
                _ => kb.dropped_links += 1,
            }
        }
        if kb.dropped_links > 0 {
            log::warn!(
                "knowledge base: dropped {} dangling or self links",
                kb.dropped_links
            );
        }
        if kb.dropped_entities > 0 {
            log::info!(
                "knowledge base: skipped {} entities without an abstract",
                kb.dropped_entities
            );
        }
        Ok(kb)
    }

    fn resolve_redirects(&mut self, raw: &HashMap<String, String>) -> Result<()> {
        let mut aliases: Vec<&String> = raw.keys().collect();
        aliases.sort();
        for alias in aliases {
            if self.by_id.contains_key(alias.as_str()) {
                continue;
            }
            let mut chain = vec![alias.clone()];
            let mut seen: HashSet<&str> = HashSet::from([alias.as_str()]);
            let mut current = alias.as_str();
            let target = loop {
                if let Some(&idx) = self.by_id.get(current) {
                    break Some(idx);
                }
                match raw.get(current) {
                    Some(next) => {
                        chain.push(next.clone());
                        if !seen.insert(next.as_str()) {
                            return Err(Error::RedirectCycle(chain));
                        }
                        current = next.as_str();
                    }
                    None => break None,
                }
            };
            if let Some(idx) = target {
                self.redirects.insert(alias.clone(), idx);
            }
        }
        Ok(())
    }

    /// Resolve an id, redirect alias, or page title to an interned index.
    pub fn resolve_id(&self, name: &str) -> Option<u32> {
        if let Some(&i) = self.by_id.get(name) {
            return Some(i);
        }
        if let Some(&i) = self.redirects.get(name) {
            return Some(i);
        }
        if name.contains(' ') {
            let underscored = name.replace(' ', "_");
            if let Some(&i) = self
                .by_id
                .get(&underscored)
                .or_else(|| self.redirects.get(&underscored))
            {
                return Some(i);
            }
        }
        self.by_label.get(name).copied()
    }

    /// Canonical id for a link target or page title, if it names a known entity.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        self.resolve_id(name).map(|i| self.records[i as usize].id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn id_of(&self, idx: u32) -> &str {
        &self.records[idx as usize].id
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.index_of(id).map(|i| &self.records[i as usize])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    /// |E|.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dropped_links(&self) -> usize {
        self.dropped_links
    }

    fn require(&self, id: &str) -> Result<u32> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownEntity(id.to_owned()))
    }

    pub fn out_links(&self, id: &str) -> Result<impl Iterator<Item = &str> + '_> {
        let i = self.require(id)?;
        Ok(self.records[i as usize]
            .out_links
            .iter()
            .map(move |&j| self.id_of(j)))
    }

    /// Relatedness from out-link overlap, in `[0, 1]`.
    pub fn wlm(&self, e1: &str, e2: &str) -> Result<f64> {
        let a = &self.records[self.require(e1)? as usize].out_links;
        let b = &self.records[self.require(e2)? as usize].out_links;
        let inter = if a.len() <= b.len() {
            a.iter().filter(|x| b.contains(x)).count()
        } else {
            b.iter().filter(|x| a.contains(x)).count()
        };
        Ok(wlm_from_counts(self.len(), a.len(), b.len(), inter))
    }

    /// Sorted indices of entities linked with `id` (self excluded).
    pub fn adjacency(&self, id: &str, mode: AdjacencyMode) -> Result<Vec<u32>> {
        let i = self.require(id)?;
        let out = &self.records[i as usize].out_links;
        let inc = &self.in_links[i as usize];
        let v: Vec<u32> = match mode {
            AdjacencyMode::Either => out.union(inc).copied().collect(),
            AdjacencyMode::Mutual => out.intersection(inc).copied().collect(),
        };
        Ok(v.into_iter().filter(|&j| j != i).collect())
    }
}

/// Link-overlap relatedness from set sizes.
///
/// `1 - (ln max(|A|,|B|) - ln |A∩B|) / (ln |E| - ln min(|A|,|B|))`, clamped into
/// `[0, 1]`. Zero overlap or an empty link set scores 0.
pub fn wlm_from_counts<S: Scalar>(n_entities: usize, len_a: usize, len_b: usize, inter: usize) -> S {
    if inter == 0 || len_a == 0 || len_b == 0 {
        return S::zero();
    }
    let ln = |v: usize| S::from_usize_lossy(v).ln();
    let num = ln(len_a.max(len_b)) - ln(inter);
    let den = ln(n_entities) - ln(len_a.min(len_b));
    if den <= S::zero() {
        return if num <= S::zero() { S::one() } else { S::zero() };
    }
    let sim = S::one() - num / den;
    sim.max(S::zero()).min(S::one())
}
