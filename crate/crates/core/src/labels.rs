use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which part of the split a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Train,
    Val,
    /// Test node visible at training time.
    Test,
    /// Test node held out of the training graph (inductive mode).
    Unseen,
}

/// Class ids plus split membership for every node of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    num_classes: usize,
    classes: Vec<u16>,
    roles: Vec<NodeRole>,
}

impl LabelSet {
    pub fn new(num_classes: usize, classes: Vec<u16>, roles: Vec<NodeRole>) -> Result<Self> {
        if classes.len() != roles.len() {
            return Err(Error::DimensionMismatch {
                what: "label roles".into(),
                expected: classes.len(),
                found: roles.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        if let Some((i, &c)) = classes.iter().enumerate().find(|(_, &c)| c as usize >= num_classes) {
            return Err(Error::Config(format!(
                "node {i} has class {c}, but only {num_classes} classes exist"
            )));
        }
        Ok(Self {
            num_classes,
            classes,
            roles,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class(&self, node: usize) -> usize {
        self.classes[node] as usize
    }

    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    /// Nodes with `role`, ascending.
    pub fn nodes_with(&self, role: NodeRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_with(NodeRole::Train)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        self.nodes_with(NodeRole::Val)
    }

    pub fn is_train(&self, node: usize) -> bool {
        self.roles[node] == NodeRole::Train
    }

    pub fn one_hot<T: Scalar>(&self, node: usize) -> Array1<T> {
        let mut v = Array1::zeros(self.num_classes);
        v[self.class(node)] = T::one();
        v
    }

    /// Copy with one node's class replaced. Used by leakage tests.
    pub fn with_class(&self, node: usize, class: u16) -> Self {
        let mut out = self.clone();
        out.classes[node] = class;
        out
    }
}
