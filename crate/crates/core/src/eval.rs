//! Relevance judgments, run files, ranking metrics and significance tests.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::table::SplitAxis;

pub const MAX_GRADE: u8 = 2;

/// Graded judgments, kept in file order for lossless rewriting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    entries: Vec<(String, String, u8)>,
    lookup: HashMap<String, HashMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, docid: &str, grade: u8) -> Result<()> {
        if grade > MAX_GRADE {
            return Err(Error::Invalid(format!("grade {grade} outside 0..={MAX_GRADE}")));
        }
        let q = self.lookup.entry(qid.to_owned()).or_default();
        if q.insert(docid.to_owned(), grade).is_some() {
            return Err(Error::Invalid(format!("duplicate judgment {qid}/{docid}")));
        }
        self.entries.push((qid.to_owned(), docid.to_owned(), grade));
        Ok(())
    }

    /// Unjudged pairs are grade 0.
    pub fn grade(&self, qid: &str, docid: &str) -> u8 {
        self.lookup
            .get(qid)
            .and_then(|q| q.get(docid))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.lookup.contains_key(qid)
    }

    pub fn query_grades(&self, qid: &str) -> Vec<u8> {
        self.lookup
            .get(qid)
            .map(|q| q.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn queries(&self) -> Vec<&str> {
        let mut seen = indexmap::IndexSet::new();
        for (q, _, _) in &self.entries {
            seen.insert(q.as_str());
        }
        seen.into_iter().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String, u8)] {
        &self.entries
    }

    /// `qid 0 docid grade`; blank lines and `#` comments are skipped.
    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut q = Qrels::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<qrels>", e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::Format {
                what: "qrels",
                line: n + 1,
                reason,
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let grade: u8 = cols[3].parse().map_err(|_| bad(format!("bad grade `{}`", cols[3])))?;
            q.insert(cols[0], cols[2], grade).map_err(|e| bad(e.to_string()))?;
        }
        Ok(q)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (q, d, g) in &self.entries {
            writeln!(out, "{q} 0 {d} {g}")?;
        }
        Ok(())
    }
}

/// Ranked candidates per query under one method tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub tag: String,
    queries: IndexMap<String, Vec<(String, f64)>>,
}

/// Sort by score descending, ties by candidate id.
pub fn sort_ranking(ranking: &mut [(String, f64)]) {
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        RunFile {
            tag: tag.into(),
            queries: IndexMap::new(),
        }
    }

    /// Add one query's scores; they are sorted into ranking order.
    pub fn insert(&mut self, qid: impl Into<String>, mut scores: Vec<(String, f64)>) -> Result<()> {
        let qid = qid.into();
        let mut seen = std::collections::HashSet::new();
        if let Some((d, _)) = scores.iter().find(|(d, _)| !seen.insert(d.as_str())) {
            return Err(Error::Invalid(format!("candidate `{d}` repeated in query `{qid}`")));
        }
        if scores.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::Invalid(format!("NaN score in query `{qid}`")));
        }
        sort_ranking(&mut scores);
        if self.queries.insert(qid.clone(), scores).is_some() {
            return Err(Error::Invalid(format!("query `{qid}` already in run")));
        }
        Ok(())
    }

    pub fn get(&self, qid: &str) -> Option<&[(String, f64)]> {
        self.queries.get(qid).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> + '_ {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Order queries by id.
    pub fn sort_queries(&mut self) {
        self.queries.sort_keys();
    }

    /// `qid Q0 docid rank score tag`, scores in shortest round-trip form.
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (q, ranking) in &self.queries {
            for (i, (d, s)) in ranking.iter().enumerate() {
                writeln!(out, "{q} Q0 {d} {} {s} {}", i + 1, self.tag)?;
            }
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut tag: Option<String> = None;
        let mut queries: IndexMap<String, Vec<(String, f64)>> = IndexMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<run>", e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::Format {
                what: "run",
                line: n + 1,
                reason,
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err(bad(format!("expected 6 columns, found {}", cols.len())));
            }
            let score: f64 = cols[4].parse().map_err(|_| bad(format!("bad score `{}`", cols[4])))?;
            match &tag {
                None => tag = Some(cols[5].to_owned()),
                Some(t) if t != cols[5] => return Err(bad(format!("mixed tags `{t}` and `{}`", cols[5]))),
                _ => {}
            }
            let ranking = queries.entry(cols[0].to_owned()).or_default();
            if let Some((_, prev)) = ranking.last() {
                if score > *prev {
                    return Err(bad("scores must be non-increasing within a query".into()));
                }
            }
            if ranking.iter().any(|(d, _)| d == cols[2]) {
                return Err(bad(format!("candidate `{}` repeated", cols[2])));
            }
            ranking.push((cols[2].to_owned(), score));
        }
        Ok(RunFile {
            tag: tag.unwrap_or_default(),
            queries,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    #[default]
    Exponential,
    Linear,
}

impl Gain {
    fn of(self, grade: u8) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(i32::from(grade)) - 1.0,
            Gain::Linear => f64::from(grade),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgResult {
    pub k: usize,
    pub per_query: IndexMap<String, f64>,
    pub mean: f64,
}

fn dcg(grades: impl IntoIterator<Item = u8>, k: usize, gain: Gain) -> f64 {
    grades
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| gain.of(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of one ranking against the judged grades of its query.
pub fn ndcg_at(ranking: &[String], judged: &[u8], grade_of: impl Fn(&str) -> u8, k: usize, gain: Gain) -> f64 {
    let mut ideal = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal, k, gain);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(ranking.iter().map(|d| grade_of(d)), k, gain) / idcg
}

pub fn ndcg(run: &RunFile, qrels: &Qrels, k: usize, gain: Gain) -> Result<NdcgResult> {
    if k == 0 {
        return Err(Error::Invalid("NDCG cut-off must be at least 1".into()));
    }
    let mut per_query = IndexMap::new();
    for (q, ranking) in run.queries() {
        if !qrels.contains_query(q) {
            log::warn!("query `{q}` has no judgments; scored 0");
        }
        let ids: Vec<String> = ranking.iter().map(|(d, _)| d.clone()).collect();
        let v = ndcg_at(&ids, &qrels.query_grades(q), |d| qrels.grade(q, d), k, gain);
        per_query.insert(q.to_owned(), v);
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    Ok(NdcgResult { k, per_query, mean })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// Two-tailed.
    pub p: f64,
    /// Constant nonzero differences: the statistic is infinite.
    pub degenerate: bool,
}

pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!("paired lists differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Invalid("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    // Rounding noise around a constant difference counts as zero variance.
    if var.sqrt() <= 1e-12 * mean.abs() || var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                df,
                p: 1.0,
                degenerate: false,
            }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                df,
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let nu = df as f64;
    let p = statrs::function::beta::beta_reg(nu / 2.0, 0.5, nu / (nu + t * t));
    Ok(TTest {
        t,
        df,
        p,
        degenerate: false,
    })
}

/// `‡` for p < 0.01, `†` for p < 0.05.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.01 {
        "‡"
    } else if p < 0.05 {
        "†"
    } else {
        ""
    }
}

/// Agreement over an item-by-category count matrix; every row must sum to
/// the same rater count.
pub fn fleiss_kappa(counts: &[Vec<u32>]) -> Result<f64> {
    let n_items = counts.len();
    if n_items == 0 {
        return Err(Error::Invalid("no items".into()));
    }
    let cats = counts[0].len();
    let raters: u32 = counts[0].iter().sum();
    if raters < 2 {
        return Err(Error::Invalid("need at least 2 raters per item".into()));
    }
    for (i, row) in counts.iter().enumerate() {
        if row.len() != cats {
            return Err(Error::Invalid(format!("item {i} has {} categories, expected {cats}", row.len())));
        }
        let s: u32 = row.iter().sum();
        if s != raters {
            return Err(Error::Invalid(format!("item {i} has {s} ratings, expected {raters}")));
        }
    }
    let n = f64::from(raters);
    let total = n_items as f64 * n;
    let p_bar = counts
        .iter()
        .map(|row| (row.iter().map(|&c| f64::from(c).powi(2)).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / n_items as f64;
    let p_e: f64 = (0..cats)
        .map(|j| (counts.iter().map(|r| f64::from(r[j])).sum::<f64>() / total).powi(2))
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if (1.0 - p_bar).abs() < f64::EPSILON { 1.0 } else { 0.0 });
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// `a - b` per query, sorted by descending delta then query id.
pub fn per_query_delta(a: &NdcgResult, b: &NdcgResult) -> Result<Vec<(String, f64)>> {
    if a.per_query.len() != b.per_query.len() {
        return Err(Error::Invalid("runs cover different query sets".into()));
    }
    let mut out = Vec::with_capacity(a.per_query.len());
    for (q, va) in &a.per_query {
        let vb = b
            .per_query
            .get(q)
            .ok_or_else(|| Error::Invalid(format!("query `{q}` missing from second run")))?;
        out.push((q.clone(), va - vb));
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    Ok(out)
}

pub fn write_delta_csv(mut out: impl Write, deltas: &[(String, f64)]) -> std::io::Result<()> {
    writeln!(out, "position,qid,delta")?;
    for (i, (q, d)) in deltas.iter().enumerate() {
        writeln!(out, "{},{q},{d}", i + 1)?;
    }
    Ok(())
}

/// Query-aligned per-query values of two results, in `a`'s order.
pub fn aligned(a: &NdcgResult, b: &NdcgResult) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (q, v) in &a.per_query {
        let w = b
            .per_query
            .get(q)
            .ok_or_else(|| Error::Invalid(format!("query `{q}` missing from second run")))?;
        xs.push(*v);
        ys.push(*w);
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRow {
    pub axis: SplitAxis,
    pub fraction: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    pub run: RunFile,
}

/// Re-rank every query at each (axis, fraction). `rank` receives the query
/// id, axis and fraction and returns scored candidates from the query's
/// original pool.
pub fn split_experiment<F>(
    queries: &[String],
    axes: &[SplitAxis],
    fractions: &[f64],
    qrels: &Qrels,
    gain: Gain,
    tag: &str,
    rank: F,
) -> Result<Vec<SplitRow>>
where
    F: Fn(&str, SplitAxis, f64) -> Result<Vec<(String, f64)>>,
{
    let mut rows = Vec::new();
    for &axis in axes {
        for &fraction in fractions {
            let mut run = RunFile::new(format!("{tag}-{axis}-{fraction}"));
            for q in queries {
                run.insert(q.clone(), rank(q, axis, fraction)?)?;
            }
            rows.push(SplitRow {
                axis,
                fraction,
                ndcg5: ndcg(&run, qrels, 5, gain)?.mean,
                ndcg10: ndcg(&run, qrels, 10, gain)?.mean,
                run,
            });
        }
    }
    Ok(rows)
}

pub fn write_split_csv(mut out: impl Write, rows: &[SplitRow]) -> std::io::Result<()> {
    writeln!(out, "axis,fraction,ndcg5,ndcg10")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.axis, r.fraction, r.ndcg5, r.ndcg10)?;
    }
    Ok(())
}

/// Graded labels per (query, candidate) as a nested map, for dataset building.
pub fn label_map(qrels: &Qrels) -> BTreeMap<(String, String), u8> {
    qrels
        .entries()
        .iter()
        .map(|(q, d, g)| ((q.clone(), d.clone()), *g))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qrels(lines: &str) -> Qrels {
        Qrels::read(lines.as_bytes()).unwrap()
    }

    #[test]
    fn worked_ndcg() {
        let q = qrels("q 0 d1 2\nq 0 d2 1\nq 0 d3 0\n");
        let mut run = RunFile::new("x");
        run.insert("q", vec![("d2".into(), 3.0), ("d1".into(), 2.0), ("d3".into(), 1.0)])
            .unwrap();
        let dcg = 1.0 + 3.0 / 3f64.log2();
        let idcg = 3.0 + 1.0 / 3f64.log2();
        let r = ndcg(&run, &q, 3, Gain::Exponential).unwrap();
        assert!((r.mean - dcg / idcg).abs() < 1e-12);
        assert!((r.mean - 0.7967).abs() < 1e-4);
        let lin = ndcg(&run, &q, 3, Gain::Linear).unwrap().mean;
        let expect = (1.0 + 2.0 / 3f64.log2()) / (2.0 + 1.0 / 3f64.log2());
        assert!((lin - expect).abs() < 1e-12);
        assert!(ndcg(&run, &q, 0, Gain::Exponential).is_err());
    }

    #[test]
    fn zero_relevance_and_missing_query() {
        let q = qrels("q 0 d1 0\n");
        let mut run = RunFile::new("x");
        run.insert("q", vec![("d1".into(), 1.0)]).unwrap();
        run.insert("other", vec![("d1".into(), 1.0)]).unwrap();
        let r = ndcg(&run, &q, 10, Gain::Exponential).unwrap();
        assert_eq!(r.per_query["q"], 0.0);
        assert_eq!(r.per_query["other"], 0.0);
    }

    #[test]
    fn file_roundtrips_bit_exact() {
        let text = "q1 0 d1 2\nq2 0 d9 0\nq1 0 d3 1\n";
        let mut out = Vec::new();
        qrels(text).write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);

        let run = "q1 Q0 a 1 0.30000000000000004 m\nq1 Q0 b 2 -1e-7 m\nq0 Q0 c 1 5 m\n";
        let parsed = RunFile::read(run.as_bytes()).unwrap();
        let mut out = Vec::new();
        parsed.write(&mut out).unwrap();
        let again = RunFile::read(out.as_slice()).unwrap();
        assert_eq!(again, parsed);
        let mut out2 = Vec::new();
        again.write(&mut out2).unwrap();
        assert_eq!(out, out2);
        assert!(RunFile::read("q Q0 a 1 1 m\nq Q0 b 2 2 m\n".as_bytes()).is_err());
        assert!(RunFile::read("q Q0 a 1 1 m\nq Q0 b 2 0 n\n".as_bytes()).is_err());
        assert!(Qrels::read("q 0 a 3\n".as_bytes()).is_err());
        assert!(Qrels::read("q 0 a 1\nq 0 a 2\n".as_bytes()).is_err());
    }

    #[test]
    fn ttest_fixture() {
        // Student sleep data; reference values from an independent stats package.
        let a = [1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4];
        let b = [0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0];
        let r = paired_ttest(&a, &b).unwrap();
        assert!((r.t - 4.062127683382037).abs() < 1e-9);
        assert_eq!(r.df, 9);
        assert!((r.p - 0.00283289019738427).abs() < 1e-8);
        let back = paired_ttest(&b, &a).unwrap();
        assert_eq!(back.t, -r.t);
        let same = paired_ttest(&a, &a).unwrap();
        assert_eq!((same.t, same.p), (0.0, 1.0));
        let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        let deg = paired_ttest(&shifted, &a).unwrap();
        assert!(deg.degenerate && deg.p == 0.0);
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn kappa_examples() {
        let wiki: Vec<Vec<u32>> = vec![
            vec![0, 0, 0, 0, 14],
            vec![0, 2, 6, 4, 2],
            vec![0, 0, 3, 5, 6],
            vec![0, 3, 9, 2, 0],
            vec![2, 2, 8, 1, 1],
            vec![7, 7, 0, 0, 0],
            vec![3, 2, 6, 3, 0],
            vec![2, 5, 3, 2, 2],
            vec![6, 5, 2, 1, 0],
            vec![0, 2, 2, 3, 7],
        ];
        let k = fleiss_kappa(&wiki).unwrap();
        assert!((k - 0.20993070442195522).abs() < 1e-12, "{k}");
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![0, 3]]).unwrap(), 1.0);
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![3, 0]]).unwrap(), 1.0);
        assert!(fleiss_kappa(&[vec![3, 0], vec![1, 1]]).is_err());
    }

    #[test]
    fn deltas() {
        let q = qrels("a 0 x 1\nb 0 x 1\n");
        let mut r1 = RunFile::new("1");
        r1.insert("a", vec![("x".into(), 1.0)]).unwrap();
        r1.insert("b", vec![("y".into(), 2.0), ("x".into(), 1.0)]).unwrap();
        let mut r2 = RunFile::new("2");
        r2.insert("a", vec![("y".into(), 1.0), ("x".into(), 0.5)]).unwrap();
        r2.insert("b", vec![("x".into(), 1.0)]).unwrap();
        let n1 = ndcg(&r1, &q, 10, Gain::Exponential).unwrap();
        let n2 = ndcg(&r2, &q, 10, Gain::Exponential).unwrap();
        let d = per_query_delta(&n1, &n2).unwrap();
        let mean: f64 = d.iter().map(|x| x.1).sum::<f64>() / 2.0;
        assert!((mean - (n1.mean - n2.mean)).abs() < 1e-12);
        assert!(d[0].1 >= d[1].1);
        assert!(per_query_delta(&n1, &n1).unwrap().iter().all(|x| x.1 == 0.0));
    }
}
