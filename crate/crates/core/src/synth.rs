//! Deterministic synthetic micro-corpus: tables, knowledge base, embeddings,
//! queries and entity-overlap judgments.
//!
//! Tables belong to themes. Same-theme tables share caption words, headings
//! and entity pools, so keyword matching finds the theme but not which
//! tables actually overlap. Relevance grows with the number of core-column
//! entities shared with the query, so it is carried by individual rows.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::engine::{Engine, EngineSettings};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::kb::KnowledgeBase;
use crate::repr::{EmbeddingStore, Space};
use crate::scalar::Scalar;
use crate::table::parse_table;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub themes: usize,
    pub tables: usize,
    pub queries: usize,
    pub entities_per_theme: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            themes: 10,
            tables: 300,
            queries: 10,
            entities_per_theme: 80,
            dim: 32,
            seed: 7,
        }
    }
}

/// Overlap needed for grades 1 and 2.
pub const GRADE_THRESHOLDS: [usize; 2] = [2, 4];

pub fn overlap_grade(shared: usize) -> u8 {
    if shared >= GRADE_THRESHOLDS[1] {
        2
    } else if shared >= GRADE_THRESHOLDS[0] {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
pub struct MicroCorpus {
    pub catalog: String,
    pub links: String,
    pub redirects: String,
    /// One table record per line.
    pub corpus: String,
    pub word_embeddings: String,
    pub graph_embeddings: String,
    pub queries: Vec<String>,
    pub qrels: Qrels,
}

#[derive(Debug, Clone)]
pub struct MicroCorpusPaths {
    pub catalog: PathBuf,
    pub links: PathBuf,
    pub redirects: PathBuf,
    pub corpus: PathBuf,
    pub word_embeddings: PathBuf,
    pub graph_embeddings: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub config: PathBuf,
}

const SYLLABLES: [&str; 30] = [
    "ka", "lo", "mi", "ren", "to", "vas", "qui", "bel", "dor", "fen", "gar", "hul", "jis", "kor", "lum", "nar", "pel",
    "ris", "sut", "tav", "ul", "vor", "wex", "yor", "zan", "bri", "cal", "dun", "esk", "fio",
];

struct Words {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Words {
    fn next(&mut self) -> String {
        loop {
            let n = self.rng.gen_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(&mut self.rng).unwrap_or(&"ka")).collect();
            if crate::text::tokenize(&w).len() == 1 && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn many(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.next()).collect()
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct Theme {
    topic: Vec<String>,
    headings: Vec<String>,
    values: Vec<String>,
    entities: Vec<(String, String)>,
}

fn vector(rng: &mut ChaCha8Rng, base: Option<&[f64]>, dim: usize, base_weight: f64) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let noise = rng.gen_range(-1.0..1.0);
            base.map_or(noise, |b| base_weight * b[k] + (1.0 - base_weight) * noise)
        })
        .collect()
}

fn fmt_vec(out: &mut String, term: &str, v: &[f64]) {
    out.push_str(term);
    for x in v {
        let _ = write!(out, " {x:.6}");
    }
    out.push('\n');
}

impl MicroCorpus {
    pub fn generate(p: &SynthParams) -> Result<Self> {
        if p.themes == 0 || p.queries > p.themes || p.tables < p.themes || p.entities_per_theme < 16 {
            return Err(Error::Invalid("inconsistent synthetic corpus parameters".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut words = Words {
            rng: ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed),
            used: BTreeSet::new(),
        };
        let shared_headings = ["name", "year", "notes"];
        let themes: Vec<Theme> = (0..p.themes)
            .map(|_| Theme {
                topic: words.many(6),
                headings: words.many(6),
                values: words.many(20),
                entities: (0..p.entities_per_theme)
                    .map(|_| {
                        let label = format!("{} {}", capitalize(&words.next()), capitalize(&words.next()));
                        (label.replace(' ', "_"), label)
                    })
                    .collect(),
            })
            .collect();
        let filler = words.many(30);

        let mut catalog = String::new();
        let mut links = String::new();
        let mut redirects = String::new();
        for (ti, th) in themes.iter().enumerate() {
            for (i, (id, label)) in th.entities.iter().enumerate() {
                let mut abs: Vec<&str> = th.topic.choose_multiple(&mut rng, 3).map(String::as_str).collect();
                abs.extend(th.values.choose_multiple(&mut rng, 6).map(String::as_str));
                let _ = writeln!(catalog, "{id}\t{label}\t{label} {}", abs.join(" "));
                for (other, _) in th.entities.choose_multiple(&mut rng, 6) {
                    if other != id {
                        let _ = writeln!(links, "{id}\t{other}");
                    }
                }
                let far = &themes[(ti + 1) % p.themes].entities;
                let _ = writeln!(links, "{id}\t{}", far[rng.gen_range(0..far.len())].0);
                if i % 10 == 0 {
                    let _ = writeln!(redirects, "Former_{id}\t{id}");
                }
            }
        }

        // embeddings: theme direction plus term-specific noise
        let mut word_embeddings = String::new();
        let mut graph_embeddings = String::new();
        let mut n_words = 0;
        let mut n_entities = 0;
        let mut wbody = String::new();
        let mut gbody = String::new();
        for th in &themes {
            let centre = vector(&mut rng, None, p.dim, 0.0);
            for w in th.topic.iter().chain(&th.headings).chain(&th.values) {
                fmt_vec(&mut wbody, w, &vector(&mut rng, Some(&centre), p.dim, 0.6));
                n_words += 1;
            }
            for (id, label) in &th.entities {
                fmt_vec(&mut gbody, id, &vector(&mut rng, Some(&centre), p.dim, 0.15));
                n_entities += 1;
                for w in crate::text::tokenize(label) {
                    fmt_vec(&mut wbody, &w, &vector(&mut rng, Some(&centre), p.dim, 0.3));
                    n_words += 1;
                }
            }
        }
        for w in filler.iter().map(String::as_str).chain(shared_headings).chain(["list", "of"]) {
            fmt_vec(&mut wbody, w, &vector(&mut rng, None, p.dim, 0.0));
            n_words += 1;
        }
        let _ = writeln!(word_embeddings, "{n_words} {}", p.dim);
        word_embeddings.push_str(&wbody);
        let _ = writeln!(graph_embeddings, "{n_entities} {}", p.dim);
        graph_embeddings.push_str(&gbody);

        let mut corpus = String::new();
        let mut core_sets: Vec<(usize, BTreeSet<usize>)> = Vec::with_capacity(p.tables);
        for t in 0..p.tables {
            let ti = t % p.themes;
            let th = &themes[ti];
            let n_rows = rng.gen_range(8..=14);
            let n_extra = rng.gen_range(2..=4);
            let mut picks: Vec<usize> = (0..th.entities.len()).collect();
            picks.shuffle(&mut rng);
            picks.truncate(n_rows);
            let mut headers = vec![json!(shared_headings[0])];
            for h in th.headings.choose_multiple(&mut rng, n_extra) {
                headers.push(json!(capitalize(h)));
            }
            if rng.gen_bool(0.3) {
                headers[n_extra] = json!(shared_headings[rng.gen_range(1..3)]);
            }
            let rows: Vec<serde_json::Value> = picks
                .iter()
                .enumerate()
                .map(|(r, &e)| {
                    let (id, label) = &th.entities[e];
                    let link = if r % 5 == 4 && e % 10 == 0 {
                        format!("Former_{id}")
                    } else {
                        id.clone()
                    };
                    let mut cells = vec![json!({"text": label, "link": link})];
                    for _ in 0..n_extra {
                        let text = if rng.gen_bool(0.25) {
                            rng.gen_range(1900..2020).to_string()
                        } else if rng.gen_bool(0.05) {
                            String::new()
                        } else {
                            let k = rng.gen_range(1..=2);
                            th.values.choose_multiple(&mut rng, k).cloned().collect::<Vec<_>>().join(" ")
                        };
                        cells.push(json!({ "text": text }));
                    }
                    json!(cells)
                })
                .collect();
            let caption = format!(
                "List of {} {} {}",
                th.topic[rng.gen_range(0..3)],
                th.topic[rng.gen_range(3..6)],
                filler[rng.gen_range(0..filler.len())]
            );
            let page = format!("{} {}", capitalize(&th.topic[rng.gen_range(0..6)]), capitalize(&th.topic[rng.gen_range(0..6)]));
            let chars = rng.gen_range(400..4000u64);
            let record = json!({
                "id": format!("t{t:03}"),
                "pgTitle": page,
                "caption": caption,
                "headers": headers,
                "rows": rows,
                "inLinks": rng.gen_range(0..500u64),
                "outLinks": rng.gen_range(0..500u64),
                "pageViews": rng.gen_range(0..100_000u64),
                "tablesOnPage": rng.gen_range(1..=4u64),
                "tableChars": chars,
                "pageChars": chars * rng.gen_range(2..=20u64),
            });
            corpus.push_str(&record.to_string());
            corpus.push('\n');
            core_sets.push((ti, picks.into_iter().collect()));
        }

        let queries: Vec<String> = (0..p.queries).map(|t| format!("t{t:03}")).collect();
        let mut qrels = Qrels::new();
        for (qi, q) in queries.iter().enumerate() {
            let (theme, ents) = &core_sets[qi];
            for (t, (ti, other)) in core_sets.iter().enumerate() {
                if t == qi || ti != theme {
                    continue;
                }
                let shared = ents.intersection(other).count();
                qrels.insert(q, &format!("t{t:03}"), overlap_grade(shared))?;
            }
        }

        Ok(MicroCorpus {
            catalog,
            links,
            redirects,
            corpus,
            word_embeddings,
            graph_embeddings,
            queries,
            qrels,
        })
    }

    /// Parse all artifacts into a ready engine.
    pub fn engine<S: Scalar>(&self, settings: EngineSettings) -> Result<Engine<S>> {
        let kb = KnowledgeBase::load(self.catalog.as_bytes(), self.links.as_bytes(), self.redirects.as_bytes())?;
        let tables = self
            .corpus
            .lines()
            .map(|l| parse_table(l, &kb))
            .collect::<Result<Vec<_>>>()?;
        let word = EmbeddingStore::read(self.word_embeddings.as_bytes(), Space::Word)?;
        let graph = EmbeddingStore::read(self.graph_embeddings.as_bytes(), Space::Graph)?;
        Engine::new(kb, tables, Some(word), Some(graph), settings)
    }

    /// Write every artifact plus an `experiment.conf` that points at them.
    pub fn write_dir(&self, dir: &Path) -> Result<MicroCorpusPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = MicroCorpusPaths {
            catalog: dir.join("kb_catalog.tsv"),
            links: dir.join("kb_links.tsv"),
            redirects: dir.join("kb_redirects.tsv"),
            corpus: dir.join("tables.jsonl"),
            word_embeddings: dir.join("word_vectors.txt"),
            graph_embeddings: dir.join("graph_vectors.txt"),
            queries: dir.join("queries.txt"),
            qrels: dir.join("qrels.txt"),
            config: dir.join("experiment.conf"),
        };
        let mut qrels = Vec::new();
        self.qrels.write(&mut qrels).map_err(|e| Error::io(&paths.qrels, e))?;
        let config = "\
corpus = tables.jsonl
kb_catalog = kb_catalog.tsv
kb_links = kb_links.tsv
kb_redirects = kb_redirects.tsv
word_embeddings = word_vectors.txt
graph_embeddings = graph_vectors.txt
queries = queries.txt
qrels = qrels.txt
work_dir = work
variant = crab-2
";
        let query_list = self.queries.join("\n") + "\n";
        let files: [(&PathBuf, &[u8]); 9] = [
            (&paths.catalog, self.catalog.as_bytes()),
            (&paths.links, self.links.as_bytes()),
            (&paths.redirects, self.redirects.as_bytes()),
            (&paths.corpus, self.corpus.as_bytes()),
            (&paths.word_embeddings, self.word_embeddings.as_bytes()),
            (&paths.graph_embeddings, self.graph_embeddings.as_bytes()),
            (&paths.queries, query_list.as_bytes()),
            (&paths.qrels, &qrels),
            (&paths.config, config.as_bytes()),
        ];
        for (path, bytes) in files {
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_parseable() {
        let p = SynthParams {
            tables: 40,
            ..SynthParams::default()
        };
        let a = MicroCorpus::generate(&p).unwrap();
        let b = MicroCorpus::generate(&p).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.word_embeddings, b.word_embeddings);
        let kb = KnowledgeBase::load(a.catalog.as_bytes(), a.links.as_bytes(), a.redirects.as_bytes()).unwrap();
        assert_eq!(kb.len(), 800);
        assert_eq!(kb.dropped_links(), 0);
        let tables: Vec<_> = a.corpus.lines().map(|l| parse_table(l, &kb).unwrap()).collect();
        assert_eq!(tables.len(), 40);
        assert!(tables.iter().all(|t| t.rows.iter().all(|r| r[0].entity.is_some())));
        assert_eq!(a.queries.len(), 10);
        assert!(a.qrels.entries().iter().any(|e| e.2 > 0));
    }

    #[test]
    fn grades_follow_overlap() {
        assert_eq!(
            (0..6).map(overlap_grade).collect::<Vec<_>>(),
            [0, 0, 1, 1, 2, 2]
        );
    }
}
