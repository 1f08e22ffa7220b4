use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Neutral face geometry with the vertex subsets the losses and metrics use.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMesh {
    /// `N×3`.
    pub positions: Tensor,
    pub lip_indices: Vec<usize>,
    pub upper_indices: Vec<usize>,
}

impl TemplateMesh {
    pub fn new(positions: Tensor, lip_indices: Vec<usize>, upper_indices: Vec<usize>) -> Result<Self> {
        if positions.shape().len() != 2 || positions.cols() != 3 || positions.rows() == 0 {
            return Err(Error::Topology(format!("template must be N×3, got {:?}", positions.shape())));
        }
        if !positions.is_finite() {
            return Err(Error::NonFinite("template positions".into()));
        }
        let n = positions.rows();
        let check = |idx: &[usize], what: &str| -> Result<BTreeSet<usize>> {
            let set: BTreeSet<usize> = idx.iter().copied().collect();
            if set.len() != idx.len() {
                return Err(Error::Topology(format!("{what} index set has duplicates")));
            }
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(Error::Topology(format!("{what} index {bad} out of range for {n} vertices")));
            }
            Ok(set)
        };
        let lip = check(&lip_indices, "lip")?;
        let upper = check(&upper_indices, "upper-face")?;
        if lip.is_empty() {
            return Err(Error::Topology("lip index set is empty".into()));
        }
        if let Some(i) = lip.intersection(&upper).next() {
            return Err(Error::Topology(format!("vertex {i} is in both the lip and upper-face sets")));
        }
        Ok(Self { positions, lip_indices, upper_indices })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.rows()
    }

    /// Positions flattened to `3N`.
    pub fn flat(&self) -> &[f64] {
        self.positions.data()
    }
}

/// Per-frame vertex positions, stored as a `T×N×3` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSequence {
    pub fps: f64,
    pub frames: Tensor,
}

impl VertexSequence {
    pub fn new(fps: f64, frames: Tensor) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Input(format!("fps must be positive, got {fps}")));
        }
        if frames.shape().len() != 3 || frames.shape()[2] != 3 {
            return Err(Error::Topology(format!("vertex sequence must be T×N×3, got {:?}", frames.shape())));
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite("vertex sequence".into()));
        }
        Ok(Self { fps, frames })
    }

    /// From a `T×3N` matrix.
    pub fn from_flat(fps: f64, flat: Tensor) -> Result<Self> {
        let (t, c) = (flat.rows(), flat.cols());
        if c % 3 != 0 {
            return Err(Error::Topology(format!("row width {c} is not a multiple of 3")));
        }
        Self::new(fps, flat.reshape(vec![t, c / 3, 3])?)
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertex_count(&self) -> usize {
        self.frames.shape()[1]
    }

    /// Frame `t` as a flat `3N` slice.
    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn vertex(&self, t: usize, n: usize) -> [f64; 3] {
        let r = &self.frames.row(t)[3 * n..3 * n + 3];
        [r[0], r[1], r[2]]
    }

    pub fn check_template(&self, template: &TemplateMesh) -> Result<()> {
        if self.vertex_count() != template.vertex_count() {
            return Err(Error::Topology(format!(
                "sequence has {} vertices, template has {}",
                self.vertex_count(),
                template.vertex_count()
            )));
        }
        Ok(())
    }
}
