//! Labeled real datasets.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Feature matrix (one record per row) with integer class labels in
/// `0..num_classes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    /// `num_classes` is taken as one past the largest label.
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::with_num_classes(features, labels, num_classes)
    }

    pub fn with_num_classes(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "LabeledDataset::new",
                expected: (labels.len(), features.cols()),
                found: features.shape(),
            });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        Ok(LabeledDataset { features, labels, num_classes })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == class).then_some(i))
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows of one class as a matrix.
    pub fn class_features(&self, class: usize) -> Matrix {
        self.features.select_rows(&self.class_indices(class))
    }

    /// Classes that have at least one record, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter_map(|(c, &n)| (n > 0).then_some(c))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Appends `other`'s records. Both must share a feature width.
    pub fn extend(&mut self, other: &LabeledDataset) -> Result<()> {
        if !other.is_empty() {
            if self.is_empty() && self.features.cols() == 0 {
                self.features = Matrix::zeros(0, other.dim());
            }
            self.features.append_rows(&other.features)?;
            self.labels.extend_from_slice(&other.labels);
        }
        self.num_classes = self.num_classes.max(other.num_classes);
        Ok(())
    }

    pub fn empty(dim: usize, num_classes: usize) -> LabeledDataset {
        LabeledDataset { features: Matrix::zeros(0, dim), labels: Vec::new(), num_classes }
    }
}
