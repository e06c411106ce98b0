//! Fielded inverted index over the table corpus, heading co-occurrence
//! statistics, BM25 keyword search and candidate pooling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::table::{RawTable, TableElements};
use crate::text::{normalize_heading, tokenize};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
/// Results kept per pooling query.
pub const POOL_DEPTH: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Caption,
    PageTitle,
    Headings,
    Entities,
    Data,
    Catchall,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Caption,
        Field::PageTitle,
        Field::Headings,
        Field::Entities,
        Field::Data,
        Field::Catchall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Caption => "caption",
            Field::PageTitle => "pagetitle",
            Field::Headings => "headings",
            Field::Entities => "entities",
            Field::Data => "data",
            Field::Catchall => "catchall",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownField(s.to_owned()))
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Terms of each field for one table.
pub fn field_terms(t: &RawTable) -> [Vec<String>; 6] {
    let caption = tokenize(&t.caption);
    let page = tokenize(&t.page_title);
    let headings: Vec<String> = t.heading_texts().flat_map(tokenize).collect();
    let entities: Vec<String> = t
        .headings
        .iter()
        .chain(t.rows.iter().flatten())
        .filter_map(|c| c.entity.clone())
        .collect();
    let data: Vec<String> = t.rows.iter().flatten().flat_map(|c| tokenize(&c.text)).collect();
    let catchall: Vec<String> = caption
        .iter()
        .chain(&page)
        .chain(&headings)
        .chain(&data)
        .cloned()
        .collect();
    [caption, page, headings, entities, data, catchall]
}

/// Distinct normalized heading labels of a table, sorted.
pub fn heading_set(t: &RawTable) -> Vec<String> {
    let set: BTreeSet<String> = t
        .heading_texts()
        .map(normalize_heading)
        .filter(|h| !h.is_empty())
        .collect();
    set.into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
struct FieldIndex {
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    total_len: u64,
}

impl FieldIndex {
    fn avg_len(&self) -> f64 {
        if self.doc_len.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.doc_len.len() as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusIndex {
    table_ids: Vec<String>,
    lookup: HashMap<String, u32>,
    fields: [FieldIndex; 6],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub n_docs: u64,
    /// #(h): tables containing heading h.
    pub heading_df: BTreeMap<String, u32>,
    /// #(h1,h2) keyed by the lexicographically ordered pair.
    pub heading_codf: BTreeMap<(String, String), u32>,
    df: [BTreeMap<String, u32>; 6],
}

impl CorpusStats {
    pub fn df(&self, term: &str, field: Field) -> u32 {
        self.df[field.slot()].get(term).copied().unwrap_or(0)
    }

    /// `ln(N / df)` with df clamped to at least 1; 0 on an empty corpus.
    pub fn idf(&self, term: &str, field: Field) -> f64 {
        if self.n_docs == 0 {
            return 0.0;
        }
        let df = self.df(term, field).max(1) as f64;
        (self.n_docs as f64 / df).ln().max(0.0)
    }

    pub fn heading_count(&self, h: &str) -> u32 {
        self.heading_df.get(h).copied().unwrap_or(0)
    }

    /// #(h1,h2); #(h,h) is #(h).
    pub fn heading_pair_count(&self, h1: &str, h2: &str) -> u32 {
        if h1 == h2 {
            return self.heading_count(h1);
        }
        let key = if h1 < h2 {
            (h1.to_owned(), h2.to_owned())
        } else {
            (h2.to_owned(), h1.to_owned())
        };
        self.heading_codf.get(&key).copied().unwrap_or(0)
    }
}

/// Build the index and statistics in one pass.
pub fn build_index<'a>(corpus: impl IntoIterator<Item = &'a RawTable>) -> Result<(CorpusIndex, CorpusStats)> {
    let mut index = CorpusIndex::default();
    let mut stats = CorpusStats::default();
    for t in corpus {
        if index.lookup.contains_key(&t.table_id) {
            return Err(Error::DuplicateTable(t.table_id.clone()));
        }
        let doc = index.table_ids.len() as u32;
        index.lookup.insert(t.table_id.clone(), doc);
        index.table_ids.push(t.table_id.clone());

        for (slot, terms) in field_terms(t).into_iter().enumerate() {
            let fi = &mut index.fields[slot];
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for term in &terms {
                *tf.entry(term.as_str()).or_default() += 1;
            }
            for (term, c) in tf {
                fi.postings.entry(term.to_owned()).or_default().push((doc, c));
                *stats.df[slot].entry(term.to_owned()).or_default() += 1;
            }
            fi.doc_len.push(terms.len() as u32);
            fi.total_len += terms.len() as u64;
        }

        let hs = heading_set(t);
        for (i, h) in hs.iter().enumerate() {
            *stats.heading_df.entry(h.clone()).or_default() += 1;
            for h2 in &hs[i + 1..] {
                *stats.heading_codf.entry((h.clone(), h2.clone())).or_default() += 1;
            }
        }
    }
    stats.n_docs = index.table_ids.len() as u64;
    Ok((index, stats))
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.table_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table_ids.is_empty()
    }

    pub fn contains(&self, table_id: &str) -> bool {
        self.lookup.contains_key(table_id)
    }

    pub fn table_ids(&self) -> &[String] {
        &self.table_ids
    }

    /// BM25 scores of every document matching at least one query term, summed
    /// over `fields`.
    fn accumulate(&self, query: &[String], fields: &[Field]) -> HashMap<u32, f64> {
        let n = self.len() as f64;
        let mut qtf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in query {
            *qtf.entry(t.as_str()).or_default() += 1;
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for &field in fields {
            let fi = &self.fields[field.slot()];
            let avg = fi.avg_len().max(f64::MIN_POSITIVE);
            for (&term, &q) in &qtf {
                let Some(post) = fi.postings.get(term) else {
                    continue;
                };
                let df = post.len() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                for &(doc, tf) in post {
                    let tf = tf as f64;
                    let dl = fi.doc_len[doc as usize] as f64;
                    let norm = tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avg));
                    *acc.entry(doc).or_default() += q as f64 * idf * norm;
                }
            }
        }
        acc
    }

    pub fn bm25_search(&self, query: &[String], field: Field, k: usize) -> Vec<(String, f64)> {
        self.bm25_search_fields(query, &[field], k)
    }

    /// Top-k over the summed per-field BM25; ties broken by table id.
    pub fn bm25_search_fields(&self, query: &[String], fields: &[Field], k: usize) -> Vec<(String, f64)> {
        let mut hits: Vec<(u32, f64)> = self.accumulate(query, fields).into_iter().collect();
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.table_ids[a.0 as usize].cmp(&self.table_ids[b.0 as usize]))
        });
        hits.truncate(k);
        hits.into_iter()
            .map(|(d, s)| (self.table_ids[d as usize].clone(), s))
            .collect()
    }

    /// BM25 score of each named table (0 when it matches nothing or is unknown).
    pub fn bm25_scores_for(&self, query: &[String], fields: &[Field], tables: &[&str]) -> Vec<f64> {
        let acc = self.accumulate(query, fields);
        tables
            .iter()
            .map(|t| {
                self.lookup
                    .get(*t)
                    .and_then(|d| acc.get(d))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Field by name; errors on unknown names.
    pub fn search_named(&self, query: &[String], field: &str, k: usize) -> Result<Vec<(String, f64)>> {
        Ok(self.bm25_search(query, field.parse()?, k))
    }
}

/// The three pooling queries for an input table.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolQueries {
    pub caption: Vec<String>,
    pub entities: Vec<String>,
    pub headings: Vec<String>,
}

impl PoolQueries {
    pub fn new(input: &RawTable, elements: &TableElements, kb: &KnowledgeBase) -> Self {
        let mut entities = elements.entities.clone();
        if let Some(page) = kb.resolve(&input.page_title) {
            entities.push(page.to_owned());
        }
        PoolQueries {
            caption: tokenize(&input.caption),
            entities,
            headings: elements.heading_words.clone(),
        }
    }
}

/// Union of the top-`depth` results of the caption, entity and heading
/// queries, without the input table itself.
pub fn candidate_pool(
    input: &RawTable,
    elements: &TableElements,
    index: &CorpusIndex,
    kb: &KnowledgeBase,
    depth: usize,
) -> BTreeSet<String> {
    let q = PoolQueries::new(input, elements, kb);
    let mut pool = BTreeSet::new();
    let lists = [
        index.bm25_search_fields(&q.caption, &[Field::Caption, Field::Catchall], depth),
        index.bm25_search(&q.entities, Field::Entities, depth),
        index.bm25_search(&q.headings, Field::Headings, depth),
    ];
    for list in lists {
        pool.extend(list.into_iter().map(|(id, _)| id));
    }
    pool.remove(&input.table_id);
    pool
}

// ---------------------------------------------------------------------------
// persistence

const MAGIC: &[u8; 8] = b"TRECIDX\0";
const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.0.write_all(s.as_bytes())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::CorruptIndex(e.to_string()))?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::CorruptIndex(e.to_string()))?;
        Ok(u64::from_le_bytes(b))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::CorruptIndex(e.to_string()))?;
        String::from_utf8(b).map_err(|e| Error::CorruptIndex(e.to_string()))
    }
}

/// Write index and statistics as one versioned little-endian binary blob.
pub fn persist(index: &CorpusIndex, stats: &CorpusStats, out: impl Write) -> std::io::Result<()> {
    let mut w = Writer(out);
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(index.table_ids.len() as u32)?;
    for id in &index.table_ids {
        w.str(id)?;
    }
    for fi in &index.fields {
        for &l in &fi.doc_len {
            w.u32(l)?;
        }
        w.u32(fi.postings.len() as u32)?;
        for (term, post) in &fi.postings {
            w.str(term)?;
            w.u32(post.len() as u32)?;
            for &(d, tf) in post {
                w.u32(d)?;
                w.u32(tf)?;
            }
        }
    }
    w.u64(stats.n_docs)?;
    w.u32(stats.heading_df.len() as u32)?;
    for (h, c) in &stats.heading_df {
        w.str(h)?;
        w.u32(*c)?;
    }
    w.u32(stats.heading_codf.len() as u32)?;
    for ((a, b), c) in &stats.heading_codf {
        w.str(a)?;
        w.str(b)?;
        w.u32(*c)?;
    }
    w.0.flush()
}

pub fn load(input: impl Read) -> Result<(CorpusIndex, CorpusStats)> {
    let mut r = Reader(input);
    let mut magic = [0u8; 8];
    r.0.read_exact(&mut magic)
        .map_err(|e| Error::CorruptIndex(e.to_string()))?;
    if &magic != MAGIC {
        return Err(Error::CorruptIndex("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CorruptIndex(format!("unsupported version {version}")));
    }
    let mut index = CorpusIndex::default();
    let mut stats = CorpusStats::default();
    let n = r.u32()? as usize;
    for d in 0..n {
        let id = r.str()?;
        index.lookup.insert(id.clone(), d as u32);
        index.table_ids.push(id);
    }
    for slot in 0..6 {
        let fi = &mut index.fields[slot];
        for _ in 0..n {
            let l = r.u32()?;
            fi.doc_len.push(l);
            fi.total_len += l as u64;
        }
        let terms = r.u32()?;
        for _ in 0..terms {
            let term = r.str()?;
            let len = r.u32()? as usize;
            let mut post = Vec::with_capacity(len);
            for _ in 0..len {
                let d = r.u32()?;
                if d as usize >= n {
                    return Err(Error::CorruptIndex(format!("posting for doc {d} out of range")));
                }
                post.push((d, r.u32()?));
            }
            stats.df[slot].insert(term.clone(), post.len() as u32);
            fi.postings.insert(term, post);
        }
    }
    stats.n_docs = r.u64()?;
    for _ in 0..r.u32()? {
        let h = r.str()?;
        stats.heading_df.insert(h, r.u32()?);
    }
    for _ in 0..r.u32()? {
        let a = r.str()?;
        let b = r.str()?;
        stats.heading_codf.insert((a, b), r.u32()?);
    }
    Ok((index, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, PageStats};

    pub(crate) fn table(id: &str, caption: &str, headings: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            table_id: id.into(),
            page_title: String::new(),
            caption: caption.into(),
            headings: headings.iter().map(|h| Cell::text(*h)).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|c| Cell::text(*c)).collect())
                .collect(),
            page_stats: PageStats::default(),
        }
    }

    fn terms(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn heading_counts() {
        let a = table("A", "", &["Year", "Team"], &[]);
        let b = table("B", "", &["year", "Rank"], &[]);
        let (_, stats) = build_index([&a, &b]).unwrap();
        assert_eq!(stats.heading_count("year"), 2);
        assert_eq!(stats.heading_pair_count("year", "team"), 1);
        assert_eq!(stats.heading_pair_count("rank", "year"), 1);
        assert_eq!(stats.heading_pair_count("team", "rank"), 0);
    }

    #[test]
    fn duplicate_ids_abort() {
        let a = table("A", "", &[], &[]);
        match build_index([&a, &a]) {
            Err(Error::DuplicateTable(id)) => assert_eq!(id, "A"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_corpus() {
        let (index, stats) = build_index(std::iter::empty()).unwrap();
        assert_eq!(stats.n_docs, 0);
        assert!(index.bm25_search(&terms("anything"), Field::Catchall, 10).is_empty());
        assert_eq!(stats.idf("x", Field::Catchall), 0.0);
    }

    #[test]
    fn dominant_document_first() {
        let docs = [
            table("a", "football stadiums norway", &[], &[]),
            table("b", "football clubs", &[], &[]),
            table("c", "rivers of norway", &[], &[]),
        ];
        let (index, _) = build_index(docs.iter()).unwrap();
        let hits = index.bm25_search(&terms("football stadiums norway"), Field::Caption, 3);
        assert_eq!(hits[0].0, "a");
        assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(index.bm25_search(&terms("zzz"), Field::Caption, 3).is_empty());
        assert!(index.search_named(&terms("x"), "body", 3).is_err());
    }

    /// Direct formula evaluation on a three-document corpus.
    #[test]
    fn bm25_matches_formula() {
        let docs = [
            table("d1", "world cup final", &[], &[]),
            table("d2", "world cup world records", &[], &[]),
            table("d3", "olympic records", &[], &[]),
        ];
        let (index, _) = build_index(docs.iter()).unwrap();
        let lens = [3.0, 4.0, 2.0];
        let avg = 3.0;
        let n = 3.0f64;
        let tfs: [[f64; 3]; 2] = [[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]]; // world, records
        let dfs = [2.0f64, 2.0];
        let mut expect = [0.0f64; 3];
        for (t, row) in tfs.iter().enumerate() {
            let idf = (1.0 + (n - dfs[t] + 0.5) / (dfs[t] + 0.5)).ln();
            for d in 0..3 {
                let tf = row[d];
                if tf > 0.0 {
                    expect[d] += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * lens[d] / avg));
                }
            }
        }
        let hits = index.bm25_search(&terms("world records"), Field::Caption, 10);
        let got: HashMap<_, _> = hits.into_iter().collect();
        for (d, e) in ["d1", "d2", "d3"].iter().zip(expect) {
            assert!((got[*d] - e).abs() < 1e-9, "{d}: {} vs {e}", got[*d]);
        }
    }

    #[test]
    fn idf_rules() {
        let docs: Vec<RawTable> = (0..100)
            .map(|i| table(&format!("t{i}"), if i == 0 { "rare common" } else { "common" }, &[], &[]))
            .collect();
        let (_, stats) = build_index(docs.iter()).unwrap();
        assert_eq!(stats.idf("common", Field::Caption), 0.0);
        assert!((stats.idf("rare", Field::Caption) - 100f64.ln()).abs() < 1e-12);
        assert!((stats.idf("unseen", Field::Caption) - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn catchall_unions_text_fields() {
        let t = table("a", "cap", &["Head"], &[&["cell"]]);
        let mut t = t;
        t.page_title = "page".into();
        let f = field_terms(&t);
        assert_eq!(f[Field::Catchall.slot()], ["cap", "page", "head", "cell"]);
    }

    #[test]
    fn persist_roundtrip_is_byte_identical() {
        let docs = [
            table("a", "football stadiums", &["Name", "City"], &[&["Ullevaal", "Oslo"]]),
            table("b", "rivers", &["River", "Length"], &[&["Glomma", "621"]]),
        ];
        let (index, stats) = build_index(docs.iter()).unwrap();
        let mut bytes = Vec::new();
        persist(&index, &stats, &mut bytes).unwrap();
        let (i2, s2) = load(bytes.as_slice()).unwrap();
        assert_eq!(i2, index);
        assert_eq!(s2, stats);
        let mut again = Vec::new();
        persist(&i2, &s2, &mut again).unwrap();
        assert_eq!(bytes, again);
        assert!(load(&bytes[..10]).is_err());
    }
}
