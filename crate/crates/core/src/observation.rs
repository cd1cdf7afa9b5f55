use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed entry `(row, col)` with its target value. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub target: f64,
}

/// A set of observed entries of a square `dim x dim` matrix.
///
/// Entries are kept in row-major order, so the position of an entry in
/// [`ObservationSet::entries`] is a stable index that other modules use to
/// refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    dim: usize,
    entries: Vec<Observation>,
}

impl ObservationSet {
    /// Validates indices and duplicates, then sorts row-major.
    pub fn new(dim: usize, mut entries: Vec<Observation>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.row >= dim || e.col >= dim {
                return Err(Error::IndexOutOfRange { row: e.row, col: e.col, dim });
            }
            if !e.target.is_finite() {
                return Err(Error::InvalidParameter(format!("target at ({}, {}) is not finite", e.row, e.col)));
            }
            if !seen.insert((e.row, e.col)) {
                return Err(Error::DuplicateEntry { row: e.row, col: e.col });
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        Ok(Self { dim, entries })
    }

    /// Builds a set from `(row, col)` positions, reading targets from `truth`.
    pub fn from_positions(truth: &DMatrix<f64>, positions: &[(usize, usize)]) -> Result<Self> {
        if !truth.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "ground truth must be square, got {}x{}",
                truth.nrows(),
                truth.ncols()
            )));
        }
        let dim = truth.nrows();
        let mut entries = Vec::with_capacity(positions.len());
        for &(row, col) in positions {
            if row >= dim || col >= dim {
                return Err(Error::IndexOutOfRange { row, col, dim });
            }
            entries.push(Observation { row, col, target: truth[(row, col)] });
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.entries.iter()
    }

    /// Index of `(row, col)` in the row-major entry list, if observed.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        self.entries.binary_search_by_key(&(row, col), |e| (e.row, e.col)).ok()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.position(row, col).is_some()
    }

    /// 0/1 indicator matrix of the observed positions.
    pub fn mask(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            m[(e.row, e.col)] = 1.0;
        }
        m
    }

    /// Matrix holding the targets on observed positions and zero elsewhere.
    pub fn target_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            m[(e.row, e.col)] = e.target;
        }
        m
    }

    /// Masked residual `P_Omega(x - targets)`.
    pub fn residual(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            r[(e.row, e.col)] = x[(e.row, e.col)] - e.target;
        }
        r
    }

    /// Same positions with targets replaced by the entries of `truth`.
    pub fn with_targets_from(&self, truth: &DMatrix<f64>) -> Result<Self> {
        let positions: Vec<_> = self.entries.iter().map(|e| (e.row, e.col)).collect();
        Self::from_positions(truth, &positions)
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.entries.is_empty() {
            Err(Error::EmptyObservations)
        } else {
            Ok(())
        }
    }
}

/// Block-diagonal observation layout: `n` diagonal blocks of size `s x s`,
/// every observed entry carrying the same positive target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub block_size: usize,
    pub blocks: usize,
    pub target: f64,
}

impl BlockSpec {
    pub fn new(block_size: usize, blocks: usize, target: f64) -> Result<Self> {
        let spec = Self { block_size, blocks, target };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.block_size * self.blocks
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.blocks == 0 {
            return Err(Error::InvalidParameter("block size and block count must be positive".into()));
        }
        if !(self.target.is_finite() && self.target > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "block target must be positive and finite, got {}",
                self.target
            )));
        }
        Ok(())
    }

    /// Block that index `i` belongs to.
    pub fn block_of(&self, i: usize) -> usize {
        i / self.block_size
    }
}

/// Observation set covering every entry of the diagonal blocks of `spec`.
pub fn build_observation_block(spec: &BlockSpec) -> Result<ObservationSet> {
    spec.validate()?;
    let s = spec.block_size;
    let mut entries = Vec::with_capacity(spec.blocks * s * s);
    for k in 0..spec.blocks {
        for i in 0..s {
            for j in 0..s {
                entries.push(Observation { row: k * s + i, col: k * s + j, target: spec.target });
            }
        }
    }
    ObservationSet::new(spec.dim(), entries)
}
