//! The biparameter grid: a product of two dyadic axes on the unit square
//! `[0,1)^{n1} x [0,1)^{n2}`.

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::error::{Error, Result};

/// Which parameter (tensor factor) an operation acts in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    One,
    Two,
}

impl Param {
    pub fn other(self) -> Param {
        match self {
            Param::One => Param::Two,
            Param::Two => Param::One,
        }
    }
}

/// Finite biparameter dyadic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub axis1: Axis,
    pub axis2: Axis,
}

/// A dyadic cube of one parameter, addressed by level and lattice position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CubeId {
    pub param: Param,
    pub level: usize,
    pub pos: usize,
}

/// A dyadic rectangle `Q1 x Q2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RectId {
    pub k1: usize,
    pub p1: usize,
    pub k2: usize,
    pub p2: usize,
}

impl DyadicGrid {
    pub fn new(n1: usize, n2: usize, k1: usize, k2: usize) -> Result<Self> {
        Ok(DyadicGrid {
            axis1: Axis::new(n1, k1)?,
            axis2: Axis::new(n2, k2)?,
        })
    }

    pub fn axis(&self, p: Param) -> Axis {
        match p {
            Param::One => self.axis1,
            Param::Two => self.axis2,
        }
    }

    /// Total number of finest cells.
    #[inline]
    pub fn cells(&self) -> usize {
        self.axis1.cells() * self.axis2.cells()
    }

    /// Measure of one finest cell.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        self.axis1.cube_measure(self.axis1.levels) * self.axis2.cube_measure(self.axis2.levels)
    }

    /// Flat index of the cell `(c1, c2)`, row-major in parameter 1.
    #[inline]
    pub fn cell_index(&self, c1: usize, c2: usize) -> usize {
        c1 * self.axis2.cells() + c2
    }

    /// Validate a cube id against this grid.
    pub fn check_cube(&self, q: CubeId) -> Result<()> {
        let axis = self.axis(q.param);
        if q.level > axis.levels || q.pos >= axis.cubes_at(q.level) {
            return Err(Error::InvalidCube {
                level: q.level,
                pos: q.pos,
            });
        }
        Ok(())
    }

    /// Validate a rectangle id against this grid.
    pub fn check_rect(&self, r: RectId) -> Result<()> {
        self.check_cube(CubeId {
            param: Param::One,
            level: r.k1,
            pos: r.p1,
        })?;
        self.check_cube(CubeId {
            param: Param::Two,
            level: r.k2,
            pos: r.p2,
        })
    }

    /// Measure of a rectangle `|Q1||Q2|`.
    #[inline]
    pub fn rect_measure(&self, r: RectId) -> f64 {
        self.axis1.cube_measure(r.k1) * self.axis2.cube_measure(r.k2)
    }

    /// All dyadic rectangles, including level-`K` cells as degenerate cubes.
    pub fn all_rects(&self) -> Vec<RectId> {
        let mut out = Vec::new();
        for k1 in 0..=self.axis1.levels {
            for p1 in 0..self.axis1.cubes_at(k1) {
                for k2 in 0..=self.axis2.levels {
                    for p2 in 0..self.axis2.cubes_at(k2) {
                        out.push(RectId { k1, p1, k2, p2 });
                    }
                }
            }
        }
        out
    }

    /// Rectangles that carry cancellative Haar coefficients (both levels < K).
    pub fn coefficient_rects(&self) -> Vec<RectId> {
        let mut out = Vec::new();
        for k1 in 0..self.axis1.levels {
            for p1 in 0..self.axis1.cubes_at(k1) {
                for k2 in 0..self.axis2.levels {
                    for p2 in 0..self.axis2.cubes_at(k2) {
                        out.push(RectId { k1, p1, k2, p2 });
                    }
                }
            }
        }
        out
    }

    /// Grid with the two parameters swapped.
    pub fn transposed(&self) -> DyadicGrid {
        DyadicGrid {
            axis1: self.axis2,
            axis2: self.axis1,
        }
    }
}
