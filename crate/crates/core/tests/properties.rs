use std::collections::BTreeSet;

use proptest::prelude::*;
use tablerec::baselines::{
    entity_complement_score, max_weight_bipartite_matching, msje_score, nguyen, schema_complement, TableView,
};
use tablerec::eval::{ndcg, paired_ttest, Gain, Qrels, RunFile};
use tablerec::index::{build_index, candidate_pool, load, persist, Field};
use tablerec::kb::{AdjacencyMode, EntityRetriever, KnowledgeBase, MlmIndex, MlmParams};
use tablerec::matching::{
    crab_similarity_features, element_wise_keys, cross_element_keys, FeatureLayout, SimilarityMeasure, Variant,
};
use tablerec::ranker::{train_forest, Dataset, ForestModel, ForestParams, Sample};
use tablerec::repr::{represent, EmbeddingStore, Element, ReprContext, Space};
use tablerec::table::{detect_core_column, extract_elements, split_table, Cell, PageStats, RawTable, SplitAxis};

const WORDS: [&str; 12] = [
    "red", "green", "blue", "river", "mountain", "lake", "city", "town", "north", "south", "year", "team",
];
const ENTITIES: [&str; 6] = ["E0", "E1", "E2", "E3", "E4", "E5"];

fn kb() -> KnowledgeBase {
    let catalog: String = ENTITIES
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{e}\t{} {}\t{} {} {}\n", WORDS[i], WORDS[i + 1], WORDS[i + 2], WORDS[i + 3], WORDS[11 - i]))
        .collect();
    let links = "E0\tE1\nE1\tE2\nE2\tE0\nE3\tE4\nE4\tE5\nE0\tE3\nE5\tE1\n";
    KnowledgeBase::load(catalog.as_bytes(), links.as_bytes(), "".as_bytes()).unwrap()
}

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![
        (0..WORDS.len(), 0..WORDS.len()).prop_map(|(a, b)| Cell::text(format!("{} {}", WORDS[a], WORDS[b]))),
        (0..ENTITIES.len()).prop_map(|e| Cell::entity(format!("name {e}"), ENTITIES[e])),
        Just(Cell::text("")),
    ]
}

fn table(id: &'static str) -> impl Strategy<Value = RawTable> {
    (1usize..5, 1usize..6).prop_flat_map(move |(cols, rows)| {
        (
            prop::collection::vec((0..WORDS.len()).prop_map(|w| Cell::text(WORDS[w])), cols),
            prop::collection::vec(prop::collection::vec(cell(), cols), rows),
            (0..WORDS.len(), 0..WORDS.len()),
        )
            .prop_map(move |(headings, rows, (c, p))| RawTable {
                table_id: id.into(),
                page_title: WORDS[p].into(),
                caption: format!("{} {}", WORDS[c], WORDS[(c + 3) % WORDS.len()]),
                headings,
                rows,
                page_stats: PageStats::default(),
            })
    })
}

struct Fixed;
impl EntityRetriever for Fixed {
    fn retrieve(&self, _: &str, _: usize) -> Vec<String> {
        vec!["E0".into(), "E3".into()]
    }
}

fn brute_force(w: &[Vec<f64>], delta: f64) -> f64 {
    let n = w.len();
    let m = w[0].len();
    let k = n.max(m);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0.0f64;
    fn rec(i: usize, perm: &mut Vec<usize>, w: &[Vec<f64>], delta: f64, best: &mut f64) {
        if i == perm.len() {
            let mut s = 0.0;
            for (r, &c) in perm.iter().enumerate() {
                if r < w.len() && c < w[0].len() && w[r][c] >= delta && w[r][c] > 0.0 {
                    s += w[r][c];
                }
            }
            *best = best.max(s);
            return;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            rec(i + 1, perm, w, delta, best);
            perm.swap(i, j);
        }
    }
    rec(0, &mut perm, w, delta, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_deterministic_and_entities_within_data(t in table("t")) {
        let kb = kb();
        let a = extract_elements(&t, &kb, &Fixed);
        let b = extract_elements(&t, &kb, &Fixed);
        prop_assert_eq!(&a, &b);
        let data: BTreeSet<&String> = a.data_entities.iter().collect();
        prop_assert!(a.entities.iter().all(|e| data.contains(e)));
    }

    #[test]
    fn identity_split(t in table("t")) {
        for axis in [SplitAxis::Rows, SplitAxis::Columns] {
            prop_assert_eq!(&split_table(&t, axis, 1.0).unwrap(), &t);
        }
    }

    #[test]
    fn core_column_has_max_entity_rate(t in table("t")) {
        let rate = |j: usize| t.column(j).filter(|c| c.entity.is_some()).count();
        match detect_core_column(&t).unwrap() {
            Some(j) => {
                prop_assert!((0..t.n_cols()).all(|k| rate(k) <= rate(j)));
                prop_assert!((0..j).all(|k| rate(k) < rate(j)), "leftmost on ties");
            }
            None => prop_assert!((0..t.n_cols()).all(|k| rate(k) == 0)),
        }
    }

    #[test]
    fn index_roundtrip_and_bm25_contract(
        a in table("a"), b in table("b"), c in table("c"), d in table("d"),
        queries in prop::collection::vec(prop::collection::vec(0..WORDS.len(), 1..4), 1..10),
    ) {
        let corpus = [a, b, c, d];
        let (index, stats) = build_index(corpus.iter()).unwrap();
        let mut buf = Vec::new();
        persist(&index, &stats, &mut buf).unwrap();
        let (index2, stats2) = load(buf.as_slice()).unwrap();
        prop_assert_eq!(&stats, &stats2);
        for q in queries {
            let q: Vec<String> = q.into_iter().map(|w| WORDS[w].to_owned()).collect();
            for field in Field::ALL {
                let hits = index.bm25_search(&q, field, 10);
                prop_assert_eq!(&hits, &index2.bm25_search(&q, field, 10));
                prop_assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));
                for (id, _) in &hits {
                    let t = corpus.iter().find(|t| &t.table_id == id).unwrap();
                    let terms = &tablerec::index::field_terms(t)[Field::ALL.iter().position(|f| *f == field).unwrap()];
                    prop_assert!(q.iter().any(|w| terms.contains(w)));
                }
            }
        }
        let kb = kb();
        for t in &corpus {
            let el = extract_elements(t, &kb, &Fixed);
            let pool = candidate_pool(t, &el, &index, &kb, 150);
            prop_assert!(!pool.contains(&t.table_id));
            prop_assert!(pool.len() <= 450);
        }
    }

    #[test]
    fn matching_equals_brute_force(
        (n, m) in (1usize..=5, 1usize..=5),
        seed in prop::collection::vec(0u32..=256, 25),
        d in 0u32..=256,
    ) {
        let w: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| f64::from(seed[i * 5 + j]) / 256.0).collect()).collect();
        let delta = f64::from(d) / 256.0;
        let r = max_weight_bipartite_matching(&w, delta);
        prop_assert_eq!(r.total, brute_force(&w, delta));
        let rows: BTreeSet<usize> = r.pairs.iter().map(|p| p.0).collect();
        let cols: BTreeSet<usize> = r.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(rows.len(), r.pairs.len());
        prop_assert_eq!(cols.len(), r.pairs.len());
        prop_assert!(r.pairs.iter().all(|p| p.2 >= delta && p.2 == w[p.0][p.1]));
    }

    #[test]
    fn msje_monotone_under_heading_removal(a in table("a"), b in table("b"), drop in 0usize..4) {
        let full = msje_score(&a, &b, 0.8);
        prop_assert!((0.0..=1.0).contains(&full));
        if b.n_cols() > 1 {
            let j = drop % b.n_cols();
            let mut fewer = b.clone();
            fewer.headings.remove(j);
            for r in &mut fewer.rows { r.remove(j); }
            let total = |x: &RawTable, y: &RawTable| {
                let ha = tablerec::index::heading_set(x);
                let hb = tablerec::index::heading_set(y);
                let w: Vec<Vec<f64>> = ha.iter().map(|p| hb.iter().map(|q| tablerec::baselines::edit_similarity(p, q)).collect()).collect();
                max_weight_bipartite_matching(&w, 0.8).total
            };
            prop_assert!(total(&a, &fewer) <= total(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn baseline_ranges_and_self_scores(a in table("a"), b in table("b")) {
        let kb = kb();
        let (_, stats) = build_index([&a, &b]).unwrap();
        let ea = extract_elements(&a, &kb, &Fixed);
        let eb = extract_elements(&b, &kb, &Fixed);
        let va = TableView { raw: &a, elements: &ea };
        let vb = TableView { raw: &b, elements: &eb };
        let sc = schema_complement(va, vb, &stats);
        prop_assert!((0.0..=1.0).contains(&sc.entity_coverage));
        let ng = nguyen(&a, &b, 0.8);
        prop_assert!((0.0..=1.0).contains(&ng.headings));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ng.data));
        let ec = entity_complement_score(&ea, &eb, &kb);
        prop_assert!((0.0..=1.0).contains(&ec));
        if !tablerec::index::heading_set(&a).is_empty() {
            prop_assert_eq!(msje_score(&a, &a, 0.8), 1.0);
            prop_assert_eq!(nguyen(&a, &a, 0.8).headings, 1.0);
        }
    }

    #[test]
    fn wlm_symmetric_bounded(i in 0usize..6, j in 0usize..6) {
        let kb = kb();
        let (x, y) = (ENTITIES[i], ENTITIES[j]);
        let s = kb.wlm(x, y).unwrap();
        prop_assert_eq!(s, kb.wlm(y, x).unwrap());
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(kb.wlm(x, x).unwrap(), 1.0);
    }

    #[test]
    fn adjacency_symmetric_no_diagonal(i in 0usize..6) {
        let kb = kb();
        for mode in [AdjacencyMode::Either, AdjacencyMode::Mutual] {
            let ai = kb.index_of(ENTITIES[i]).unwrap();
            let adj = kb.adjacency(ENTITIES[i], mode).unwrap();
            prop_assert!(!adj.contains(&ai));
            for j in adj {
                let back = kb.adjacency(kb.id_of(j), mode).unwrap();
                prop_assert!(back.contains(&ai));
            }
        }
    }

    #[test]
    fn mlm_deterministic(q in prop::collection::vec(0..WORDS.len(), 1..4)) {
        let kb = kb();
        let query: Vec<&str> = q.iter().map(|&w| WORDS[w]).collect();
        let query = query.join(" ");
        let a = MlmIndex::build(&kb, &MlmParams::default()).search(&query, 10);
        let b = MlmIndex::build(&kb, &MlmParams::default()).search(&query, 10);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn represent_never_invents_vectors(t in table("t")) {
        let kb = kb();
        let (_, stats) = build_index([&t]).unwrap();
        let mut word = EmbeddingStore::<f64>::new(Space::Word, 2).unwrap();
        for w in &WORDS[..6] {
            word.insert(*w, vec![1.0, w.len() as f64]).unwrap();
        }
        let ctx = ReprContext { word: Some(&word), graph: None, kb: &kb, stats: &stats, adjacency: AdjacencyMode::Either };
        let el = extract_elements(&t, &kb, &Fixed);
        for e in [Element::Topic, Element::Headings, Element::Data] {
            let r = represent(&el, e, Space::Word, &ctx).unwrap();
            for (_, v) in &r.terms {
                match v {
                    tablerec::repr::SemanticVector::Dense(x) => prop_assert!(WORDS[..6].iter().any(|w| word.get(w) == Some(x.as_slice()))),
                    _ => prop_assert!(false),
                }
            }
            let g = represent(&el, e, Space::Graph, &ctx);
            if let Ok(g) = g { prop_assert!(g.terms.is_empty()); }
        }
    }

    #[test]
    fn crab_symmetry_and_ranges(a in table("a"), b in table("b")) {
        let kb = kb();
        let (_, stats) = build_index([&a, &b]).unwrap();
        let mut word = EmbeddingStore::<f64>::new(Space::Word, 3).unwrap();
        for (i, w) in WORDS.iter().enumerate() {
            word.insert(*w, vec![i as f64 % 3.0, 1.0 + (i % 4) as f64, (i * 7 % 5) as f64]).unwrap();
        }
        let mut graph = EmbeddingStore::<f64>::new(Space::Graph, 2).unwrap();
        for (i, e) in ENTITIES.iter().enumerate() {
            graph.insert(*e, vec![1.0 + i as f64, 6.0 - i as f64]).unwrap();
        }
        let ctx = ReprContext { word: Some(&word), graph: Some(&graph), kb: &kb, stats: &stats, adjacency: AdjacencyMode::Either };
        let ea = extract_elements(&a, &kb, &Fixed);
        let eb = extract_elements(&b, &kb, &Fixed);
        let ab = crab_similarity_features(&ea, &eb, &ctx).unwrap();
        let ba = crab_similarity_features(&eb, &ea, &ctx).unwrap();
        let ew = element_wise_keys();
        for i in 0..36 {
            prop_assert!((ab[i] - ba[i]).abs() < 1e-12);
        }
        let cross = cross_element_keys();
        for (i, k) in cross.iter().enumerate() {
            let j = cross.iter().position(|q| q.input == k.candidate && q.candidate == k.input && q.space == k.space && q.measure == k.measure).unwrap();
            prop_assert!((ab[36 + i] - ba[36 + j]).abs() < 1e-12);
        }
        for (k, v) in ew.iter().chain(&cross).zip(&ab) {
            if k.measure != SimilarityMeasure::Late(tablerec::matching::Aggregation::Sum) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(v), "{} = {}", k.name(), v);
            }
        }
        let aa = crab_similarity_features(&ea, &ea, &ctx).unwrap();
        for (k, v) in ew.iter().zip(&aa) {
            if k.measure == SimilarityMeasure::Early && *v != 0.0 {
                prop_assert!((v - 1.0).abs() < 1e-9, "{}", k.name());
            }
        }
    }

    #[test]
    fn ndcg_bounds_and_tail_permutation(
        grades in prop::collection::vec(0u8..=2, 1..25),
        perm_seed in any::<u64>(),
        k in 1usize..12,
    ) {
        let mut q = Qrels::new();
        let mut docs = Vec::new();
        for (i, g) in grades.iter().enumerate() {
            q.insert("q", &format!("d{i:02}"), *g).unwrap();
            docs.push(format!("d{i:02}"));
        }
        let score_run = |order: &[String]| {
            let mut run = RunFile::new("x");
            let n = order.len() as f64;
            run.insert("q", order.iter().enumerate().map(|(i, d)| (d.clone(), n - i as f64)).collect()).unwrap();
            run
        };
        let base = ndcg(&score_run(&docs), &q, k, Gain::Exponential).unwrap().mean;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
        // shuffle grade-0 documents below rank k
        let mut tail: Vec<usize> = (k.min(docs.len())..docs.len()).filter(|&i| grades[i] == 0).collect();
        let mut shuffled = docs.clone();
        let mut s = perm_seed;
        for i in (1..tail.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (s >> 33) as usize % (i + 1);
            let (a, b) = (tail[i], tail[j]);
            shuffled.swap(a, b);
            tail.swap(i, j);
        }
        prop_assert_eq!(ndcg(&score_run(&shuffled), &q, k, Gain::Exponential).unwrap().mean, base);
        let full = ndcg(&score_run(&docs), &q, docs.len(), Gain::Exponential).unwrap().mean;
        prop_assert_eq!(ndcg(&score_run(&docs), &q, docs.len() + 5, Gain::Exponential).unwrap().mean, full);
    }

    #[test]
    fn ttest_antisymmetric(a in prop::collection::vec(-1.0f64..1.0, 2..30), shift in prop::collection::vec(-0.5f64..0.5, 30)) {
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn forest_rankings_invariant_under_positive_scaling(
        rows in prop::collection::vec((0u8..=2, prop::collection::vec(-5.0f64..5.0, 3)), 10..60),
        tests in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 10),
        c in prop::sample::select(vec![0.5, 2.0, 3.0, 10.0]),
    ) {
        let build = |scale: f64| {
            let mut d = Dataset::new(vec!["a".into(), "b".into(), "c".into()]);
            for (i, (y, x)) in rows.iter().enumerate() {
                d.push(Sample { qid: "q".into(), docid: format!("{i}"), label: f64::from(*y), values: x.iter().map(|v| v * scale).collect() }).unwrap();
            }
            train_forest(&d, &ForestParams { trees: 15, max_features: 2, seed: 3 }).unwrap()
        };
        let m1 = build(1.0);
        let mc = build(c);
        let p1: Vec<f64> = tests.iter().map(|x| m1.predict_values(x).unwrap()).collect();
        let pc: Vec<f64> = tests.iter().map(|x| mc.predict_values(&x.iter().map(|v| v * c).collect::<Vec<_>>()).unwrap()).collect();
        let order = |p: &[f64]| { let mut o: Vec<usize> = (0..p.len()).collect(); o.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b))); o };
        prop_assert_eq!(order(&p1), order(&pc));
        let mut buf = Vec::new();
        m1.write(&mut buf).unwrap();
        let back = ForestModel::read(buf.as_slice()).unwrap();
        for x in &tests {
            prop_assert_eq!(back.predict_values(x).unwrap(), m1.predict_values(x).unwrap());
        }
    }
}

#[test]
fn layout_dimension_arithmetic() {
    let dims: Vec<usize> = [Variant::Crab1, Variant::Crab2, Variant::Crab3, Variant::Crab4, Variant::Hcf2]
        .iter()
        .map(|&v| FeatureLayout::new(v).len())
        .collect();
    assert_eq!(dims, [36, 56, 92, 128, 30]);
    let per_pair = |keys: &[tablerec::matching::CrabKey]| {
        let mut counts: Vec<usize> = Vec::new();
        let mut last = None;
        for k in keys {
            let pair = (k.input.min(k.candidate), k.input.max(k.candidate));
            if last != Some(pair) {
                counts.push(0);
                last = Some(pair);
            }
            *counts.last_mut().unwrap() += 1;
        }
        counts
    };
    assert_eq!(per_pair(&element_wise_keys()), [4, 12, 8, 12]);
    assert_eq!(per_pair(&cross_element_keys()), [8, 8, 24, 16, 16]);
}
