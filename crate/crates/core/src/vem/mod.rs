//! Per-cell virtual element computations for orders one and two.

mod element;
pub mod poly;

pub use element::{local_element, EdgeTrace, ElementDebugDump, LocalElement};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabMode {
    /// Identity-weighted DoFi-DoFi form multiplied by `2μ`.
    Scaled,
    /// Identity-weighted DoFi-DoFi form without a material factor.
    Literal,
}

impl std::str::FromStr for StabMode {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scaled" => Ok(StabMode::Scaled),
            "literal" => Ok(StabMode::Literal),
            _ => Err(VemError::InvalidArgument(format!("unknown stabilization mode `{s}`"))),
        }
    }
}

/// Local DOF ordering of one cell with `n_vertices` vertices.
///
/// k = 1: `[u_x, u_y]` per vertex, then one normal value per edge midpoint
/// (local outward normal).
/// k = 2: `[u_x, u_y]` per vertex, `[u_x, u_y]` per edge midpoint, then the two
/// interior divergence moments `(h_K/|K|) ∫ div v m_j`, `j = 2, 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub k: usize,
    pub n_vertices: usize,
}

impl DofLayout {
    pub fn new(k: usize, n_vertices: usize) -> Result<Self> {
        if k != 1 && k != 2 {
            return Err(VemError::InvalidArgument(format!("unsupported order k = {k}")));
        }
        if n_vertices < 3 {
            return Err(VemError::InvalidArgument(format!("cell with {n_vertices} vertices")));
        }
        Ok(DofLayout { k, n_vertices })
    }

    pub fn n_displacement(&self) -> usize {
        match self.k {
            1 => 3 * self.n_vertices,
            _ => 4 * self.n_vertices + 2,
        }
    }

    pub fn n_pressure(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    pub fn vertex(&self, i: usize, comp: usize) -> usize {
        2 * i + comp
    }

    /// k = 1 only: normal value at the midpoint of local edge `i`.
    pub fn midpoint_normal(&self, i: usize) -> usize {
        debug_assert_eq!(self.k, 1);
        2 * self.n_vertices + i
    }

    /// k = 2 only: component `comp` at the midpoint of local edge `i`.
    pub fn midpoint(&self, i: usize, comp: usize) -> usize {
        debug_assert_eq!(self.k, 2);
        2 * self.n_vertices + 2 * i + comp
    }

    /// k = 2 only: interior moment `j ∈ {0, 1}` (against `m_2`, `m_3`).
    pub fn interior(&self, j: usize) -> usize {
        debug_assert_eq!(self.k, 2);
        4 * self.n_vertices + j
    }
}
