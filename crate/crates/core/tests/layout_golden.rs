use tablerec::matching::{FeatureLayout, Variant};

fn manifest(v: Variant) -> String {
    let mut out = Vec::new();
    FeatureLayout::new(v).write_manifest(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn crab4_layout_matches_golden_file() {
    let golden = include_str!("golden/crab-4.layout");
    let got = manifest(Variant::Crab4);
    if std::env::var_os("TABLEREC_BLESS").is_some() {
        std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/crab-4.layout"), &got).unwrap();
        return;
    }
    assert_eq!(got, golden, "layout changed; rerun with TABLEREC_BLESS=1 if intended");
    let parsed = FeatureLayout::read_manifest(golden.as_bytes()).unwrap();
    assert_eq!(parsed.fingerprint(), FeatureLayout::new(Variant::Crab4).fingerprint());
}

#[test]
fn smaller_variants_are_subsequences_of_crab4() {
    let full: Vec<String> = FeatureLayout::new(Variant::Crab4).names().map(String::from).collect();
    for v in [Variant::Crab1, Variant::Crab2, Variant::Crab3] {
        let names: Vec<String> = FeatureLayout::new(v).names().map(String::from).collect();
        let mut it = full.iter();
        assert!(names.iter().all(|n| it.any(|f| f == n)), "{v}");
    }
}
