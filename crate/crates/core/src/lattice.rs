//! Torus lattice geometry shared by the transfer and oracle sides.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    /// Square lattice with one fixed-orientation diagonal per plaquette,
    /// from `(x, y)` to `(x+1, y+1)`. The diagonal breaks the mirror
    /// symmetry about the transfer axis, making the lattice generic.
    Triangular,
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeKind::Square => write!(f, "square"),
            LatticeKind::Triangular => write!(f, "triangular"),
        }
    }
}

impl FromStr for LatticeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" => Ok(LatticeKind::Square),
            "triangular" => Ok(LatticeKind::Triangular),
            other => Err(format!("unknown lattice kind {other:?} (expected square|triangular)")),
        }
    }
}

/// An `L x N` torus: width `L` (periodic, transverse) and length `N`
/// (periodic, the transfer direction).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub width: usize,
    pub length: usize,
}

impl LatticeSpec {
    pub fn new(kind: LatticeKind, width: usize, length: usize) -> Self {
        assert!(width >= 2, "width must be at least 2");
        assert!(length >= 1, "length must be at least 1");
        Self { kind, width, length }
    }

    pub fn square(width: usize, length: usize) -> Self {
        Self::new(LatticeKind::Square, width, length)
    }

    pub fn triangular(width: usize, length: usize) -> Self {
        Self::new(LatticeKind::Triangular, width, length)
    }

    pub fn num_vertices(&self) -> usize {
        self.width * self.length
    }

    /// 2LN for square, 3LN for triangular.
    pub fn num_edges(&self) -> usize {
        let per_column = match self.kind {
            LatticeKind::Square => 2 * self.width,
            LatticeKind::Triangular => 3 * self.width,
        };
        per_column * self.length
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}x{}", self.kind, self.width, self.length)
    }
}
