use std::sync::Arc;

use tablerec::assets::{self, WorkDir};
use tablerec::config::ExperimentConfig;
use tablerec::baselines::KeywordQuery;
use tablerec::engine::{Baseline, EngineSettings};
use tablerec::eval::{ndcg, Gain};
use tablerec::index::{build_index, persist};
use tablerec::matching::{FeatureLayout, Variant};
use tablerec::ranker::{cross_validate, train_forest, ForestParams};
use tablerec::synth::{MicroCorpus, SynthParams};
use tablerec::{Engine32, Engine64};

fn small() -> MicroCorpus {
    MicroCorpus::generate(&SynthParams {
        tables: 80,
        ..SynthParams::default()
    })
    .unwrap()
}

#[test]
fn config_driven_engine_matches_in_memory_engine() {
    let mc = small();
    let dir = tempfile::tempdir().unwrap();
    let paths = mc.write_dir(dir.path()).unwrap();
    let cfg = ExperimentConfig::load(&paths.config).unwrap();

    let kb = assets::load_kb(&cfg).unwrap();
    let tables = assets::load_corpus(cfg.corpus.as_deref().unwrap(), &kb).unwrap();
    let work = WorkDir::new(&cfg.work_dir);
    std::fs::create_dir_all(work.root()).unwrap();
    let mut corpus = String::new();
    for t in &tables {
        corpus.push_str(&t.to_record());
        corpus.push('\n');
    }
    std::fs::write(work.tables(), corpus).unwrap();
    let (index, stats) = build_index(tables.iter()).unwrap();
    persist(&index, &stats, std::fs::File::create(work.index()).unwrap()).unwrap();

    let loaded: Engine64 = assets::load_engine(&cfg).unwrap();
    let direct: Engine64 = mc.engine(EngineSettings::from(&cfg)).unwrap();
    assert_eq!(assets::load_queries(cfg.queries.as_deref().unwrap()).unwrap(), mc.queries);

    let layout = Arc::new(FeatureLayout::new(Variant::Crab4));
    let q = &mc.queries[0];
    let pool = loaded.pool(q).unwrap();
    assert_eq!(pool, direct.pool(q).unwrap());
    let (a, b) = (loaded.query(q).unwrap(), direct.query(q).unwrap());
    for c in pool.iter().take(10) {
        assert_eq!(
            loaded.pair_features(&a, c, &layout).unwrap().values,
            direct.pair_features(&b, c, &layout).unwrap().values
        );
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let mc = small();
    let e64: Engine64 = mc.engine(EngineSettings::default()).unwrap();
    let e32: Engine32 = mc.engine(EngineSettings::default()).unwrap();
    let layout = Arc::new(FeatureLayout::new(Variant::Crab1));
    let q = &mc.queries[1];
    let (a, b) = (e64.query(q).unwrap(), e32.query(q).unwrap());
    for c in e64.pool(q).unwrap().iter().take(10) {
        let x = e64.pair_features(&a, c, &layout).unwrap().values;
        let y = e32.pair_features(&b, c, &layout).unwrap().values;
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() <= 1e-4 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }
}

#[test]
fn learned_ranker_beats_caption_keywords_on_small_corpus() {
    let mc = small();
    let engine: Engine64 = mc.engine(EngineSettings::default()).unwrap();
    let layout = Arc::new(FeatureLayout::new(Variant::Crab2));
    let (data, pools) = engine.dataset(&mc.queries, &layout, &mc.qrels).unwrap();
    assert_eq!(data.n_features(), 56);
    assert!(pools.values().all(|p| p.len() <= 450));
    let params = ForestParams { trees: 100, max_features: 3, seed: 1 };
    let cv = cross_validate(&data, 5, 1, "crab-2", |d| train_forest(d, &params)).unwrap();
    let learned = ndcg(&cv.run, &mc.qrels, 10, Gain::Exponential).unwrap().mean;
    let kw = engine.baseline_run(&mc.queries, Baseline::Keyword(KeywordQuery::Caption)).unwrap();
    let kw = ndcg(&kw, &mc.qrels, 10, Gain::Exponential).unwrap().mean;
    assert!(learned > kw, "{learned} vs {kw}");
}
