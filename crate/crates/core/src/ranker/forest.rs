//! Random-forest regression: bootstrap trees with variance-reduction splits.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dataset, Scorer};
use crate::error::{Error, Result};
use crate::matching::FeatureVector;

pub const DEFAULT_TREES: usize = 1000;
pub const DEFAULT_MAX_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    /// Non-constant features examined per split.
    pub max_features: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: DEFAULT_TREES,
            max_features: DEFAULT_MAX_FEATURES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub fingerprint: String,
    /// Summed squared-error reduction per feature, unnormalized.
    pub split_gain: Vec<f64>,
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [f64],
    n_features: usize,
    max_features: usize,
}

impl Builder<'_> {
    fn build(&self, sample: Vec<usize>, rng: &mut ChaCha8Rng, gain: &mut [f64]) -> Tree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, sample)];
        let mut features: Vec<usize> = (0..self.n_features).collect();
        while let Some((slot, idx)) = stack.pop() {
            let n = idx.len();
            let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
            let mean = sum / n as f64;
            let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
            if n < 2 || pure {
                nodes[slot] = Node::Leaf { value: mean };
                continue;
            }
            let Some((feature, threshold, proxy)) = self.best_split(&idx, sum, rng, &mut features) else {
                nodes[slot] = Node::Leaf { value: mean };
                continue;
            };
            gain[feature] += proxy - sum * sum / n as f64;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[slot] = Node::Split {
                feature: feature as u32,
                threshold,
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, r));
            stack.push((left, l));
        }
        Tree { nodes }
    }

    /// Draw features without replacement until `max_features` non-constant
    /// ones have been scanned. Returns (feature, threshold, Σl²/nl + Σr²/nr).
    fn best_split(
        &self,
        idx: &[usize],
        sum: f64,
        rng: &mut ChaCha8Rng,
        features: &mut [usize],
    ) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let m = features.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut scanned = 0;
        let mut order = idx.to_vec();
        let mut drawn = 0;
        while drawn < m && scanned < self.max_features {
            let j = rng.gen_range(drawn..m);
            features.swap(drawn, j);
            let f = features[drawn];
            drawn += 1;
            order.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let lo = self.x[order[0]][f];
            let hi = self.x[order[n - 1]][f];
            if lo == hi {
                continue;
            }
            scanned += 1;
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.y[order[k - 1]];
                let a = self.x[order[k - 1]][f];
                let b = self.x[order[k]][f];
                if a == b {
                    continue;
                }
                let right_sum = sum - left_sum;
                let proxy = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                if best.is_none_or(|(_, _, p)| proxy > p) {
                    let mut t = a + (b - a) / 2.0;
                    if t >= b || !t.is_finite() {
                        t = a;
                    }
                    best = Some((f, t, proxy));
                }
            }
        }
        best
    }
}

pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let m = data.n_features();
    if params.trees == 0 {
        return Err(Error::Invalid("forest needs at least one tree".into()));
    }
    if params.max_features == 0 || params.max_features > m {
        return Err(Error::Invalid(format!(
            "max_features {} outside 1..={m}",
            params.max_features
        )));
    }
    let x: Vec<&[f64]> = data.rows().iter().map(|r| r.values.as_slice()).collect();
    let y: Vec<f64> = data.rows().iter().map(|r| r.label).collect();
    let builder = Builder {
        x: &x,
        y: &y,
        n_features: m,
        max_features: params.max_features,
    };
    let built: Vec<(Tree, Vec<f64>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut gain = vec![0.0; m];
            let tree = builder.build(sample, &mut rng, &mut gain);
            (tree, gain)
        })
        .collect();
    let mut split_gain = vec![0.0; m];
    let mut trees = Vec::with_capacity(built.len());
    for (tree, gain) in built {
        for (a, g) in split_gain.iter_mut().zip(gain) {
            *a += g;
        }
        trees.push(tree);
    }
    Ok(ForestModel {
        trees,
        params: *params,
        feature_names: data.feature_names().to_vec(),
        fingerprint: data.fingerprint().to_owned(),
        split_gain,
    })
}

const MAGIC: &str = "tablerec-forest 1";

impl ForestModel {
    pub fn predict_values(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Layout(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.len()
            )));
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<f64> {
        let fp = fv.layout.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::Layout(format!(
                "feature vector layout {fp} does not match model layout {}",
                self.fingerprint
            )));
        }
        self.predict_values(&fv.values)
    }

    /// Normalized split-gain importance, descending; ties keep layout order.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let total: f64 = self.split_gain.iter().sum();
        let mut out: Vec<(usize, f64)> = self
            .split_gain
            .iter()
            .map(|&g| if total > 0.0 { g / total } else { 0.0 })
            .enumerate()
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.into_iter()
            .map(|(i, v)| (self.feature_names[i].clone(), v))
            .collect()
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "fingerprint {}", self.fingerprint)?;
        writeln!(out, "max_features {}", self.params.max_features)?;
        writeln!(out, "seed {}", self.params.seed)?;
        writeln!(out, "features {}", self.feature_names.len())?;
        for n in &self.feature_names {
            writeln!(out, "feature {n}")?;
        }
        write!(out, "gain")?;
        for g in &self.split_gain {
            write!(out, " {g}")?;
        }
        writeln!(out)?;
        writeln!(out, "trees {}", self.trees.len())?;
        for t in &self.trees {
            writeln!(out, "tree {}", t.nodes.len())?;
            for node in &t.nodes {
                match node {
                    Node::Leaf { value } => writeln!(out, "L {value}")?,
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(out, "S {feature} {threshold} {left} {right}")?,
                }
            }
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.starts_with('#') && !l.trim().is_empty()));
        let mut line_no = 0;
        let mut next = |expect: &str| -> Result<String> {
            let (n, l) = lines.next().ok_or_else(|| Error::Format {
                what: "forest model",
                line: line_no + 1,
                reason: format!("unexpected end of file, expected {expect}"),
            })?;
            line_no = n + 1;
            l.map_err(|e| Error::io("<model>", e))
        };
        let bad = |line: &str, what: &str| Error::Format {
            what: "forest model",
            line: 0,
            reason: format!("expected {what}, found `{line}`"),
        };
        let keyed = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(&line, key))
        };
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Format {
                what: "forest model",
                line: 0,
                reason: format!("bad {what} `{s}`"),
            })
        }
        let magic = next("header")?;
        if magic != MAGIC {
            return Err(bad(&magic, MAGIC));
        }
        let fingerprint = keyed(next("fingerprint")?, "fingerprint")?;
        let max_features = num(&keyed(next("max_features")?, "max_features")?, "max_features")?;
        let seed = num(&keyed(next("seed")?, "seed")?, "seed")?;
        let m: usize = num(&keyed(next("features")?, "features")?, "feature count")?;
        let mut feature_names = Vec::with_capacity(m);
        for _ in 0..m {
            feature_names.push(keyed(next("feature")?, "feature")?);
        }
        let gain_line = next("gain")?;
        let split_gain: Vec<f64> = gain_line
            .split_whitespace()
            .skip(1)
            .map(|v| num(v, "gain"))
            .collect::<Result<_>>()?;
        if split_gain.len() != m {
            return Err(bad(&gain_line, "one gain per feature"));
        }
        let n_trees: usize = num(&keyed(next("trees")?, "trees")?, "tree count")?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let k: usize = num(&keyed(next("tree")?, "tree")?, "node count")?;
            let mut nodes = Vec::with_capacity(k);
            for _ in 0..k {
                let l = next("node")?;
                let parts: Vec<&str> = l.split_whitespace().collect();
                let node = match parts.as_slice() {
                    ["L", v] => Node::Leaf { value: num(v, "leaf")? },
                    ["S", f, t, a, b] => {
                        let (feature, left, right): (u32, u32, u32) = (num(f, "feature")?, num(a, "child")?, num(b, "child")?);
                        let here = nodes.len();
                        // children always follow their parent, so traversal terminates
                        if feature as usize >= m || left as usize >= k || right as usize >= k || left as usize <= here || right as usize <= here {
                            return Err(bad(&l, "in-range split"));
                        }
                        Node::Split {
                            feature,
                            threshold: num(t, "threshold")?,
                            left,
                            right,
                        }
                    }
                    _ => return Err(bad(&l, "node")),
                };
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        Ok(ForestModel {
            trees,
            params: ForestParams {
                trees: n_trees,
                max_features,
                seed,
            },
            feature_names,
            fingerprint,
            split_gain,
        })
    }
}

impl Scorer for ForestModel {
    fn score(&self, values: &[f64]) -> f64 {
        self.predict_values(values).unwrap_or(f64::NAN)
    }
}
