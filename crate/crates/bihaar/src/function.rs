//! Grid functions: real-valued, constant on the finest cells of a
//! [`DyadicGrid`]. Values are stored row-major in parameter 1.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, Param};

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: DyadicGrid,
    pub values: Vec<f64>,
}

/// JSON envelope mirroring the on-disk format.
#[derive(Serialize, Deserialize)]
struct GridFunctionEnvelope {
    n1: usize,
    n2: usize,
    #[serde(rename = "K1")]
    k1: usize,
    #[serde(rename = "K2")]
    k2: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::ShapeMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zero(grid: DyadicGrid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn constant(grid: DyadicGrid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    pub fn from_fn(grid: DyadicGrid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; grid.cells()];
        for c1 in 0..grid.axis1.cells() {
            for c2 in 0..grid.axis2.cells() {
                values[grid.cell_index(c1, c2)] = f(c1, c2);
            }
        }
        GridFunction { grid, values }
    }

    /// Tensor Haar function `h_{Q1}^{s1} x h_{Q2}^{s2}`.
    pub fn haar_tensor(
        grid: DyadicGrid,
        (k1, p1, s1): (usize, usize, usize),
        (k2, p2, s2): (usize, usize, usize),
    ) -> Self {
        GridFunction::from_fn(grid, |c1, c2| {
            grid.axis1.haar_value(k1, p1, s1, c1) * grid.axis2.haar_value(k2, p2, s2, c2)
        })
    }

    /// Independent uniform values in `[-amp, amp]`.
    pub fn random(grid: DyadicGrid, rng: &mut impl Rng, amp: f64) -> Self {
        GridFunction {
            grid,
            values: (0..grid.cells()).map(|_| rng.gen_range(-amp..amp)).collect(),
        }
    }

    #[inline]
    pub fn value(&self, c1: usize, c2: usize) -> f64 {
        self.values[self.grid.cell_index(c1, c2)]
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GridFunction) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Unweighted `L^2` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_measure()).sqrt()
    }

    /// Unweighted pairing `<f, g> = int f g dx`.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_measure()
    }

    /// Swap the two parameters.
    pub fn transposed(&self) -> GridFunction {
        let tg = self.grid.transposed();
        let mut values = vec![0.0; tg.cells()];
        for c1 in 0..self.grid.axis1.cells() {
            for c2 in 0..self.grid.axis2.cells() {
                values[tg.cell_index(c2, c1)] = self.value(c1, c2);
            }
        }
        GridFunction { grid: tg, values }
    }

    /// Restrict to the transform in one parameter being applied per slice:
    /// extract the slice along `param` at fixed other-coordinate `other_cell`.
    pub fn slice(&self, param: Param, other_cell: usize) -> Vec<f64> {
        match param {
            Param::One => (0..self.grid.axis1.cells())
                .map(|c1| self.value(c1, other_cell))
                .collect(),
            Param::Two => (0..self.grid.axis2.cells())
                .map(|c2| self.value(other_cell, c2))
                .collect(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for c1 in 0..self.grid.axis1.cells() {
            let row: Vec<String> = (0..self.grid.axis2.cells())
                .map(|c2| format!("{}", self.value(c1, c2)))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Read a flat row-major CSV for the given grid shape.
    pub fn read_csv(grid: DyadicGrid, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut values = Vec::with_capacity(grid.cells());
        for line in file.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                values.push(
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad float {tok:?}: {e}")))?,
                );
            }
        }
        GridFunction::new(grid, values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&GridFunctionEnvelope {
            n1: self.grid.axis1.dim,
            n2: self.grid.axis2.dim,
            k1: self.grid.axis1.levels,
            k2: self.grid.axis2.levels,
            values: self.values.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: GridFunctionEnvelope = serde_json::from_str(s)?;
        let grid = DyadicGrid::new(env.n1, env.n2, env.k1, env.k2)?;
        GridFunction::new(grid, env.values)
    }
}
