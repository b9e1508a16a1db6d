//! Dataset directories, split construction and a synthetic homophilic
//! graph generator.
//!
//! A dataset directory holds:
//!
//! - `edges.tsv`: one `u<TAB>v` pair of decimal node ids per line
//! - `labels.tsv`: one `node<TAB>class` pair per line, covering every node
//! - `features.bin`: `b"COHF1"`, little-endian `u32` n, `u32` d, then
//!   `n·d` row-major `f32`
//! - `split.json` (optional): `{"train": [...], "val": [...], "unseen": [...]}`

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeRemap};
use crate::labels::{LabelSet, NodeRole};
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: &[u8; 5] = b"COHF1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Array2<f32>,
    pub classes: Vec<u16>,
    pub num_classes: usize,
    pub split: Option<SplitSpec>,
}

impl Dataset {
    pub fn new(graph: Graph, features: Array2<f32>, classes: Vec<u16>, num_classes: usize) -> Result<Self> {
        let n = graph.num_nodes();
        for (what, found) in [("feature rows", features.nrows()), ("label count", classes.len())] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: n,
                    found,
                });
            }
        }
        if let Some(&c) = classes.iter().find(|&&c| c as usize >= num_classes) {
            return Err(Error::Config(format!(
                "class id {c} not below class count {num_classes}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite feature value".into()));
        }
        Ok(Self {
            graph,
            features,
            classes,
            num_classes,
            split: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features_as<T: Scalar>(&self) -> Array2<T> {
        self.features.mapv(T::from_f32_exact)
    }

    pub fn class_members(&self, class: usize) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| self.classes[i] as usize == class)
            .collect()
    }

    /// Labels with split roles attached.
    pub fn label_set(&self, split: &SplitSpec) -> Result<LabelSet> {
        LabelSet::new(self.num_classes, self.classes.clone(), split.roles(self.num_nodes()))
    }

    /// Fraction of edges whose endpoints share a class.
    pub fn edge_homophily(&self) -> f64 {
        let (same, total) = self.graph.edges().fold((0usize, 0usize), |(s, t), (u, v)| {
            (s + usize::from(self.classes[u] == self.classes[v]), t + 1)
        });
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let features = read_features(&dir.join("features.bin"))?;
        let n = features.nrows();
        let classes = read_labels(&dir.join("labels.tsv"), n)?;
        let num_classes = classes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let edges = read_edges(&dir.join("edges.tsv"), n)?;
        let graph = Graph::from_edges(n, &edges)?;
        let mut ds = Dataset::new(graph, features, classes, num_classes)?;
        let split_path = dir.join("split.json");
        if split_path.exists() {
            let file: SplitFile = serde_json::from_str(&fs::read_to_string(&split_path)?)?;
            ds.split = Some(SplitSpec::from_file(file, n)?);
        }
        Ok(ds)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut edges = String::new();
        for (u, v) in self.graph.edges() {
            edges.push_str(&format!("{u}\t{v}\n"));
        }
        fs::write(dir.join("edges.tsv"), edges)?;
        let mut labels = String::new();
        for (i, c) in self.classes.iter().enumerate() {
            labels.push_str(&format!("{i}\t{c}\n"));
        }
        fs::write(dir.join("labels.tsv"), labels)?;
        write_features(&self.features, &dir.join("features.bin"))?;
        if let Some(split) = &self.split {
            fs::write(dir.join("split.json"), serde_json::to_string(&split.to_file())?)?;
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_pair(path: &Path, lineno: usize, line: &str) -> Result<(usize, usize)> {
    let mut parts = line.split('\t');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(malformed(
            path,
            lineno,
            format!("expected two tab-separated fields, got {line:?}"),
        ));
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| malformed(path, lineno, format!("not a non-negative integer: {s:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in data_lines(&text) {
        let (u, v) = parse_pair(path, lineno, line)?;
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::NodeOutOfRange {
                    context: format!("{}:{}", path.display(), lineno),
                    index: idx,
                    n,
                });
            }
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<u16>> {
    let text = read_text(path)?;
    let mut classes: Vec<Option<u16>> = vec![None; n];
    let mut seen = 0usize;
    for (lineno, line) in data_lines(&text) {
        let (node, class) = parse_pair(path, lineno, line)?;
        if node >= n {
            return Err(Error::NodeOutOfRange {
                context: format!("{}:{}", path.display(), lineno),
                index: node,
                n,
            });
        }
        let class = u16::try_from(class).map_err(|_| malformed(path, lineno, format!("class {class} exceeds u16")))?;
        if classes[node].replace(class).is_some() {
            return Err(malformed(path, lineno, format!("duplicate label for node {node}")));
        }
        seen += 1;
    }
    if seen != n {
        return Err(Error::DimensionMismatch {
            what: format!("labeled nodes in {}", path.display()),
            expected: n,
            found: seen,
        });
    }
    Ok(classes.into_iter().map(|c| c.expect("all nodes labeled")).collect())
}

pub fn write_features(x: &Array2<f32>, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(13 + 4 * x.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(x.nrows() as u32).to_le_bytes());
    buf.extend_from_slice(&(x.ncols() as u32).to_le_bytes());
    for v in x.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    if bytes.len() < 13 || &bytes[..5] != FEATURE_MAGIC {
        return Err(malformed(path, 0, "missing COHF1 header"));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = &bytes[13..];
    if body.len() != 4 * n * d {
        return Err(Error::DimensionMismatch {
            what: format!("float32 payload of {}", path.display()),
            expected: n * d,
            found: body.len() / 4,
        });
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("length checked"))
}

/// Dumps any dense matrix in the float32 feature format.
pub fn write_matrix<T: Scalar>(x: &Array2<T>, path: &Path) -> Result<()> {
    write_features(&x.mapv(Scalar::to_f32_lossy), path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Transductive,
    Inductive,
}

/// Train/val/test partition; in inductive mode part of the test set is
/// held out of the training graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub unseen: Vec<usize>,
    pub unseen_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unseen: Option<Vec<usize>>,
}

impl SplitSpec {
    /// Builds a split from explicit train/val lists; everything else is test.
    pub fn transductive(n: usize, mut train: Vec<usize>, mut val: Vec<usize>) -> Result<Self> {
        train.sort_unstable();
        val.sort_unstable();
        let mut taken = vec![false; n];
        for (name, list) in [("train", &train), ("val", &val)] {
            for &i in list.iter() {
                if i >= n {
                    return Err(Error::NodeOutOfRange {
                        context: format!("{name} split"),
                        index: i,
                        n,
                    });
                }
                if std::mem::replace(&mut taken[i], true) {
                    return Err(Error::Split(format!("node {i} listed twice")));
                }
            }
        }
        let test = (0..n).filter(|&i| !taken[i]).collect();
        Ok(Self {
            mode: SplitMode::Transductive,
            train,
            val,
            test,
            unseen: Vec::new(),
            unseen_fraction: None,
        })
    }

    fn from_file(file: SplitFile, n: usize) -> Result<Self> {
        let mut split = Self::transductive(n, file.train, file.val)?;
        if let Some(mut unseen) = file.unseen.filter(|u| !u.is_empty()) {
            unseen.sort_unstable();
            unseen.dedup();
            let test: BTreeSet<usize> = split.test.iter().copied().collect();
            if let Some(bad) = unseen.iter().find(|i| !test.contains(i)) {
                return Err(Error::Split(format!("unseen node {bad} is not a test node")));
            }
            split.unseen_fraction = Some(unseen.len() as f64 / split.test.len() as f64);
            split.unseen = unseen;
            split.mode = SplitMode::Inductive;
        }
        split.validate(n)?;
        Ok(split)
    }

    pub fn to_file(&self) -> SplitFile {
        SplitFile {
            train: self.train.clone(),
            val: self.val.clone(),
            unseen: (self.mode == SplitMode::Inductive).then(|| self.unseen.clone()),
        }
    }

    /// Test nodes present at training time.
    pub fn seen(&self) -> Vec<usize> {
        let unseen: BTreeSet<usize> = self.unseen.iter().copied().collect();
        self.test.iter().copied().filter(|i| !unseen.contains(i)).collect()
    }

    pub fn roles(&self, n: usize) -> Vec<NodeRole> {
        let mut roles = vec![NodeRole::Test; n];
        for &i in &self.train {
            roles[i] = NodeRole::Train;
        }
        for &i in &self.val {
            roles[i] = NodeRole::Val;
        }
        for &i in &self.unseen {
            roles[i] = NodeRole::Unseen;
        }
        roles
    }

    /// Checks disjointness and coverage of `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut count = vec![0u8; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::NodeOutOfRange {
                    context: "split".into(),
                    index: i,
                    n,
                });
            }
            count[i] += 1;
        }
        if let Some(i) = count.iter().position(|&c| c != 1) {
            return Err(Error::Split(format!(
                "node {i} appears {} times across train/val/test",
                count[i]
            )));
        }
        let test: BTreeSet<usize> = self.test.iter().copied().collect();
        if self.unseen.iter().any(|i| !test.contains(i)) {
            return Err(Error::Split("unseen nodes must be test nodes".into()));
        }
        Ok(())
    }

    /// Training graph: induced on every node except the unseen ones.
    pub fn training_graph(&self, g: &Graph) -> Result<(Graph, NodeRemap)> {
        let mut keep = vec![true; g.num_nodes()];
        for &i in &self.unseen {
            keep[i] = false;
        }
        g.induced_subgraph(&keep)
    }
}

/// Samples `per_class_train` training and `per_class_val` validation nodes
/// from every class; the remainder is test.
///
/// A class smaller than `per_class_train + per_class_val` falls back to 20%
/// train and 30% validation of its members (at least one training node).
pub fn make_transductive_split(
    ds: &Dataset,
    per_class_train: usize,
    per_class_val: usize,
    seed: u64,
) -> Result<SplitSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..ds.num_classes {
        let mut members = ds.class_members(class);
        if members.is_empty() {
            return Err(Error::Split(format!("class {class} has no members")));
        }
        members.shuffle(&mut rng);
        let (n_train, n_val) = if members.len() >= per_class_train + per_class_val {
            (per_class_train, per_class_val)
        } else {
            let m = members.len() as f64;
            let n_train = ((0.2 * m).round() as usize).max(1);
            let n_val = ((0.3 * m).round() as usize).min(members.len() - n_train);
            log::warn!(
                "class {class} has only {} members; using {n_train} train / {n_val} val",
                members.len()
            );
            (n_train, n_val)
        };
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
    }
    SplitSpec::transductive(ds.num_nodes(), train, val)
}

/// Holds out a uniformly random `unseen_fraction` of the test nodes.
pub fn make_inductive_split(base: &SplitSpec, unseen_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if base.mode != SplitMode::Transductive {
        return Err(Error::Split("inductive split needs a transductive base".into()));
    }
    if !(unseen_fraction > 0.0 && unseen_fraction < 1.0) {
        return Err(Error::Config(format!(
            "unseen fraction {unseen_fraction} outside (0, 1)"
        )));
    }
    let count = (unseen_fraction * base.test.len() as f64).round() as usize;
    if count == 0 || count == base.test.len() {
        return Err(Error::Config(format!(
            "unseen fraction {unseen_fraction} leaves {count} of {} test nodes unseen",
            base.test.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = base.test.clone();
    pool.shuffle(&mut rng);
    let mut unseen = pool[..count].to_vec();
    unseen.sort_unstable();
    Ok(SplitSpec {
        mode: SplitMode::Inductive,
        unseen,
        unseen_fraction: Some(unseen_fraction),
        ..base.clone()
    })
}

/// Stochastic block model with balanced classes and Gaussian features
/// around orthogonal class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub nodes: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    /// Length of each class-mean vector.
    pub mean_scale: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            nodes: 1000,
            classes: 4,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 16,
            noise_sigma: 1.0,
            mean_scale: 1.0,
            seed: 0,
        }
    }
}

pub fn generate_sbm(cfg: &SbmConfig) -> Result<Dataset> {
    if !(cfg.p_in > cfg.p_out && cfg.p_out >= 0.0 && cfg.p_in <= 1.0) {
        return Err(Error::Config(format!(
            "need 1 >= p_in > p_out >= 0, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        )));
    }
    if cfg.classes == 0 || cfg.classes > cfg.feature_dim || cfg.classes > u16::MAX as usize {
        return Err(Error::Config(format!(
            "{} classes need 1..=feature_dim ({}) orthogonal means",
            cfg.classes, cfg.feature_dim
        )));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma {}", cfg.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let classes: Vec<u16> = (0..cfg.nodes).map(|i| (i % cfg.classes) as u16).collect();

    let mut edges = Vec::new();
    for u in 0..cfg.nodes {
        for v in u + 1..cfg.nodes {
            let p = if classes[u] == classes[v] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(cfg.nodes, &edges)?;

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma checked");
    let mut features = Array2::<f32>::zeros((cfg.nodes, cfg.feature_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = noise.sample(&mut rng) as f32;
        }
        row[classes[i] as usize] += cfg.mean_scale as f32;
    }
    Dataset::new(graph, features, classes, cfg.classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let x = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        Dataset::new(g, x, vec![0, 1, 1], 2).unwrap()
    }

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        let n = per_class * classes;
        let labels = (0..n).map(|i| (i % classes) as u16).collect();
        Dataset::new(Graph::empty(n), Array2::zeros((n, 1)), labels, classes).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = tiny();
        ds.split = Some(SplitSpec::transductive(3, vec![0], vec![2]).unwrap());
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.num_nodes(), 3);
        let raw = std::fs::read(dir.path().join("features.bin")).unwrap();
        let again = tempfile::tempdir().unwrap();
        back.save(again.path()).unwrap();
        assert_eq!(std::fs::read(again.path().join("features.bin")).unwrap(), raw);
    }

    #[test]
    fn load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny();
        ds.save(dir.path()).unwrap();

        std::fs::remove_file(dir.path().join("edges.tsv")).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::MissingFile(_))));

        std::fs::write(dir.path().join("edges.tsv"), "0\t1\n1 2\n").unwrap();
        match Dataset::load(dir.path()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }

        std::fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t7\n").unwrap();
        assert!(matches!(
            Dataset::load(dir.path()),
            Err(Error::NodeOutOfRange { index: 7, .. })
        ));

        std::fs::write(dir.path().join("edges.tsv"), "0\t1\n").unwrap();
        write_features(&Array2::zeros((4, 2)), &dir.path().join("features.bin")).unwrap();
        match Dataset::load(dir.path()) {
            Err(Error::DimensionMismatch { expected, found, .. }) => {
                assert_eq!((expected, found), (4, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transductive_counts() {
        let ds = balanced(100, 3);
        let s = make_transductive_split(&ds, 20, 30, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 90, 150));
        s.validate(ds.num_nodes()).unwrap();
        assert_eq!(s, make_transductive_split(&ds, 20, 30, 1).unwrap());
        assert_ne!(s, make_transductive_split(&ds, 20, 30, 2).unwrap());
        for c in 0..3 {
            assert_eq!(s.train.iter().filter(|&&i| ds.classes[i] == c).count(), 20);
        }
    }

    #[test]
    fn cora_shaped_split_sizes() {
        // 2485 nodes over 7 classes, every class comfortably above 50.
        let n = 2485;
        let labels = (0..n).map(|i| (i % 7) as u16).collect();
        let ds = Dataset::new(Graph::empty(n), Array2::zeros((n, 1)), labels, 7).unwrap();
        let s = make_transductive_split(&ds, 20, 30, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (140, 210, 2135));
    }

    #[test]
    fn small_and_empty_classes() {
        let ds = Dataset::new(
            Graph::empty(12),
            Array2::zeros((12, 1)),
            vec![0; 10].into_iter().chain([1, 1]).collect(),
            3,
        )
        .unwrap();
        assert!(matches!(make_transductive_split(&ds, 20, 30, 0), Err(Error::Split(_))));
        let ds = Dataset::new(
            Graph::empty(12),
            Array2::zeros((12, 1)),
            vec![0; 10].into_iter().chain([1, 1]).collect(),
            2,
        )
        .unwrap();
        let s = make_transductive_split(&ds, 20, 30, 0).unwrap();
        assert_eq!(s.train.len(), 2 + 1);
        s.validate(12).unwrap();
    }

    #[test]
    fn inductive_partition() {
        let ds = balanced(50, 2);
        let base = make_transductive_split(&ds, 0, 0, 0).unwrap();
        assert_eq!(base.test.len(), 100);
        let s = make_inductive_split(&base, 0.2, 9).unwrap();
        assert_eq!(s.unseen.len(), 20);
        assert_eq!(s.seen().len(), 80);
        s.validate(100).unwrap();
        assert!(make_inductive_split(&base, 0.0, 9).is_err());
        assert!(make_inductive_split(&base, 1e-6, 9).is_err());
        assert!(make_inductive_split(&base, 1.0, 9).is_err());
        assert!(make_inductive_split(&s, 0.2, 9).is_err());
    }

    #[test]
    fn inductive_training_graph_excludes_unseen() {
        let ds = generate_sbm(&SbmConfig {
            nodes: 200,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let base = make_transductive_split(&ds, 5, 5, 0).unwrap();
        let s = make_inductive_split(&base, 0.2, 1).unwrap();
        let (g, remap) = s.training_graph(&ds.graph).unwrap();
        assert_eq!(g.num_nodes(), 200 - s.unseen.len());
        for &u in &s.unseen {
            assert_eq!(remap.new_id(u), None);
        }
        for (a, b) in g.edges() {
            let (a, b) = (remap.old_id(a), remap.old_id(b));
            assert!(!s.unseen.contains(&a) && !s.unseen.contains(&b));
            assert!(ds.graph.has_edge(a, b));
        }
    }

    #[test]
    fn split_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = balanced(10, 2);
        let base = SplitSpec::transductive(20, vec![0, 1], vec![2, 3]).unwrap();
        ds.split = Some(make_inductive_split(&base, 0.25, 4).unwrap());
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        let (a, b) = (back.split.unwrap(), ds.split.unwrap());
        assert_eq!(a.unseen, b.unseen);
        assert_eq!(a.mode, SplitMode::Inductive);
    }

    #[test]
    fn sbm_properties() {
        let base = SbmConfig {
            nodes: 300,
            classes: 3,
            p_in: 0.1,
            p_out: 0.0,
            feature_dim: 4,
            noise_sigma: 0.0,
            mean_scale: 1.0,
            seed: 5,
        };
        let ds = generate_sbm(&base).unwrap();
        assert!(ds.graph.edges().all(|(u, v)| ds.classes[u] == ds.classes[v]));
        // Zero noise: the class-mean coordinate alone separates classes.
        for i in 0..ds.num_nodes() {
            let row = ds.features.row(i);
            let best = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, ds.classes[i] as usize);
        }
        assert_eq!(generate_sbm(&base).unwrap(), ds);
        assert!(generate_sbm(&SbmConfig {
            p_in: 0.1,
            p_out: 0.2,
            ..base.clone()
        })
        .is_err());
    }

    #[test]
    fn sbm_homophily() {
        let ds = generate_sbm(&SbmConfig::default()).unwrap();
        let h = ds.edge_homophily();
        // Expected ratio p_in/(p_in + (C-1) p_out) is about 0.77.
        assert!(h > 0.6, "homophily {h}");
        assert_eq!(ds.num_classes, 4);
        assert_eq!(
            (0..4).map(|c| ds.class_members(c).len()).collect::<Vec<_>>(),
            vec![250; 4]
        );
    }
}
