//! Named, ordered feature layouts and their on-disk manifest.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::fusion::SimilarityMeasure;
use crate::error::{Error, Result};
use crate::repr::{Element, Space};

pub const TABLE_FEATURES: [&str; 10] = [
    "rows",
    "cols",
    "nulls",
    "idf_caption",
    "idf_page_title",
    "in_links",
    "out_links",
    "page_views",
    "table_importance",
    "table_page_ratio",
];

pub const HCF_FEATURES: [&str; 10] = [
    "infogather_page_title",
    "msje_headings",
    "schema_heading_benefit",
    "infogather_headings",
    "nguyen_headings",
    "infogather_column",
    "infogather_table",
    "nguyen_data",
    "entity_complement",
    "schema_entity_coverage",
];

/// Element pairs compared within the same element type, with their spaces.
pub const ELEMENT_WISE: [(Element, &[Space]); 4] = [
    (Element::Headings, &[Space::Word]),
    (Element::Data, &[Space::Word, Space::Graph, Space::Entity]),
    (Element::Entities, &[Space::Graph, Space::Entity]),
    (Element::Topic, &[Space::Word, Space::Graph, Space::Entity]),
];

/// Unordered cross-element pairs; each is emitted in both directions.
pub const CROSS_ELEMENT: [(Element, Element, &[Space]); 5] = [
    (Element::Headings, Element::Topic, &[Space::Word]),
    (Element::Headings, Element::Data, &[Space::Word]),
    (Element::Data, Element::Topic, &[Space::Word, Space::Graph, Space::Entity]),
    (Element::Data, Element::Entities, &[Space::Graph, Space::Entity]),
    (Element::Topic, Element::Entities, &[Space::Graph, Space::Entity]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureGroup {
    InputTable,
    CandidateTable,
    Similarity,
}

impl FeatureGroup {
    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::InputTable => "input",
            FeatureGroup::CandidateTable => "candidate",
            FeatureGroup::Similarity => "similarity",
        }
    }
}

/// Which input element is compared against which candidate element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrabKey {
    pub input: Element,
    pub candidate: Element,
    pub space: Space,
    pub measure: SimilarityMeasure,
}

impl CrabKey {
    pub fn name(&self) -> String {
        format!(
            "sim:{}>{}:{}:{}",
            self.input.symbol(),
            self.candidate.symbol(),
            self.space,
            self.measure
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub name: String,
    pub group: FeatureGroup,
    pub crab: Option<CrabKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Hcf1,
    Hcf2,
    Crab1,
    Crab2,
    Crab3,
    Crab4,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Hcf1,
        Variant::Hcf2,
        Variant::Crab1,
        Variant::Crab2,
        Variant::Crab3,
        Variant::Crab4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hcf1 => "hcf-1",
            Variant::Hcf2 => "hcf-2",
            Variant::Crab1 => "crab-1",
            Variant::Crab2 => "crab-2",
            Variant::Crab3 => "crab-3",
            Variant::Crab4 => "crab-4",
        }
    }

    pub fn has_table_features(self) -> bool {
        !matches!(self, Variant::Hcf1 | Variant::Crab1)
    }

    pub fn uses_hcf(self) -> bool {
        matches!(self, Variant::Hcf1 | Variant::Hcf2)
    }

    pub fn uses_element_wise(self) -> bool {
        matches!(self, Variant::Crab1 | Variant::Crab2 | Variant::Crab4)
    }

    pub fn uses_cross_element(self) -> bool {
        matches!(self, Variant::Crab3 | Variant::Crab4)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == norm || v.name().replace('-', "") == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown feature variant `{s}`")))
    }
}

fn crab_keys(pairs: impl IntoIterator<Item = (Element, Element, &'static [Space])>) -> Vec<CrabKey> {
    let mut keys = Vec::new();
    for (input, candidate, spaces) in pairs {
        for &space in spaces {
            for measure in SimilarityMeasure::ALL {
                keys.push(CrabKey {
                    input,
                    candidate,
                    space,
                    measure,
                });
            }
        }
    }
    keys
}

/// The 36 element-wise keys in canonical order.
pub fn element_wise_keys() -> Vec<CrabKey> {
    crab_keys(ELEMENT_WISE.iter().map(|&(e, s)| (e, e, s)))
}

/// The 72 cross-element keys: pair, then direction, then space, then measure.
pub fn cross_element_keys() -> Vec<CrabKey> {
    crab_keys(
        CROSS_ELEMENT
            .iter()
            .flat_map(|&(a, b, s)| [(a, b, s), (b, a, s)]),
    )
}

/// Hex SHA-256 over newline-separated names; identifies a feature order.
pub fn fingerprint_names<'a>(names: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for (i, n) in names.into_iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(n.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    variant: Variant,
    features: Vec<FeatureDescriptor>,
}

impl FeatureLayout {
    pub fn new(variant: Variant) -> Self {
        let mut features = Vec::new();
        if variant.has_table_features() {
            for (group, prefix) in [(FeatureGroup::InputTable, "input"), (FeatureGroup::CandidateTable, "cand")] {
                features.extend(TABLE_FEATURES.iter().map(|n| FeatureDescriptor {
                    name: format!("{prefix}:{n}"),
                    group,
                    crab: None,
                }));
            }
        }
        if variant.uses_hcf() {
            features.extend(HCF_FEATURES.iter().map(|n| FeatureDescriptor {
                name: format!("hcf:{n}"),
                group: FeatureGroup::Similarity,
                crab: None,
            }));
        }
        let mut keys = Vec::new();
        if variant.uses_element_wise() {
            keys.extend(element_wise_keys());
        }
        if variant.uses_cross_element() {
            keys.extend(cross_element_keys());
        }
        features.extend(keys.into_iter().map(|k| FeatureDescriptor {
            name: k.name(),
            group: FeatureGroup::Similarity,
            crab: Some(k),
        }));
        FeatureLayout { variant, features }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn similarity_len(&self) -> usize {
        self.features
            .iter()
            .filter(|f| f.group == FeatureGroup::Similarity)
            .count()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Hex SHA-256 over the ordered feature names.
    pub fn fingerprint(&self) -> String {
        fingerprint_names(self.names())
    }

    pub fn write_manifest(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# feature layout v1")?;
        writeln!(out, "variant {}", self.variant)?;
        writeln!(out, "count {}", self.len())?;
        writeln!(out, "fingerprint {}", self.fingerprint())?;
        for (i, f) in self.features.iter().enumerate() {
            writeln!(out, "{i}\t{}\t{}", f.group.name(), f.name)?;
        }
        Ok(())
    }

    /// Parse a manifest and check it against the layout this build produces
    /// for the same variant.
    pub fn read_manifest(input: impl BufRead) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Format {
            what: "layout manifest",
            line,
            reason,
        };
        let mut variant = None;
        let mut count = None;
        let mut fingerprint = None;
        let mut names = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<layout>", e))?;
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("variant ") {
                variant = Some(v.parse::<Variant>()?);
            } else if let Some(c) = line.strip_prefix("count ") {
                count = Some(c.parse::<usize>().map_err(|e| bad(n + 1, e.to_string()))?);
            } else if let Some(f) = line.strip_prefix("fingerprint ") {
                fingerprint = Some(f.to_owned());
            } else {
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 3 || cols[0].parse::<usize>().ok() != Some(names.len()) {
                    return Err(bad(n + 1, format!("bad feature line `{line}`")));
                }
                names.push(cols[2].to_owned());
            }
        }
        let variant = variant.ok_or_else(|| bad(0, "missing variant".into()))?;
        let layout = FeatureLayout::new(variant);
        if count != Some(layout.len()) || names.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{variant} expects {} features, manifest lists {}",
                layout.len(),
                names.len()
            )));
        }
        if let Some((i, (a, b))) = layout.names().zip(&names).enumerate().find(|(_, (a, b))| a != b) {
            return Err(Error::Layout(format!("feature {i}: expected `{a}`, found `{b}`")));
        }
        if fingerprint.as_deref() != Some(layout.fingerprint().as_str()) {
            return Err(Error::Layout("fingerprint mismatch".into()));
        }
        Ok(layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_dimensions() {
        let dims: Vec<usize> = Variant::ALL.iter().map(|&v| FeatureLayout::new(v).len()).collect();
        assert_eq!(dims, [10, 30, 36, 56, 92, 128]);
        assert_eq!(element_wise_keys().len(), 36);
        assert_eq!(cross_element_keys().len(), 72);
    }

    #[test]
    fn names_unique_and_directions_paired() {
        let l = FeatureLayout::new(Variant::Crab4);
        let set: std::collections::BTreeSet<&str> = l.names().collect();
        assert_eq!(set.len(), l.len());
        let cross = cross_element_keys();
        for chunk in cross.chunks(8).take(2) {
            assert_eq!(chunk[0].input, chunk[4].candidate);
        }
        for k in &cross {
            let swapped = CrabKey {
                input: k.candidate,
                candidate: k.input,
                ..*k
            };
            assert!(cross.contains(&swapped));
        }
        assert_eq!(l.features()[20].name, "sim:H>H:word:early");
    }

    #[test]
    fn manifest_roundtrip_and_rejects() {
        for v in Variant::ALL {
            let l = FeatureLayout::new(v);
            let mut buf = Vec::new();
            l.write_manifest(&mut buf).unwrap();
            assert_eq!(FeatureLayout::read_manifest(buf.as_slice()).unwrap(), l);
        }
        let mut buf = Vec::new();
        FeatureLayout::new(Variant::Crab2).write_manifest(&mut buf).unwrap();
        let tampered = String::from_utf8(buf).unwrap().replace("sim:D>D:word:late-max", "sim:D>D:word:late-min");
        assert!(matches!(
            FeatureLayout::read_manifest(tampered.as_bytes()),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("CRAB-2".parse::<Variant>().unwrap(), Variant::Crab2);
        assert_eq!("crab2".parse::<Variant>().unwrap(), Variant::Crab2);
        assert!("crab-9".parse::<Variant>().is_err());
    }
}
