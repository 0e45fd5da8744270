//! Maximal and square functions: dyadic and strong maximal functions, the
//! biparameter and per-variable square functions, their shifted variants and
//! the mixed square-maximal operators.
//!
//! Square functions aggregate only cancellative rectangle coefficients;
//! hybrid and mean components of a general function are excluded by
//! definition (norm-equivalence experiments run on the fully cancellative
//! family, where the expansion is complete).

use serde::{Deserialize, Serialize};

use crate::axis::{average_pyramid, AxisFunction};
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{DyadicGrid, Param};
use crate::haar::{haar_forward, rectangle_average_pyramid, HaarSpectrum};

/// Scope of a maximal function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaximalScope {
    /// One-parameter dyadic maximal in the given parameter, slice by slice.
    Param(Param),
    /// Strong maximal function: supremum over dyadic rectangles.
    Strong,
}

/// Scope of a square function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SquareScope {
    Biparameter,
    Param(Param),
}

/// Order of the mixed square-maximal operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedOrder {
    /// Square in parameter 1, maximal in parameter 2.
    SquareMaximal,
    /// Maximal in parameter 1, square in parameter 2.
    MaximalSquare,
}

/// Shift complexity `(i1, i2), (j1, j2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftComplexity {
    pub i1: usize,
    pub i2: usize,
    pub j1: usize,
    pub j2: usize,
}

impl ShiftComplexity {
    pub fn new(i: (usize, usize), j: (usize, usize)) -> Self {
        ShiftComplexity { i1: i.0, i2: i.1, j1: j.0, j2: j.1 }
    }

    pub fn zero() -> Self {
        ShiftComplexity::new((0, 0), (0, 0))
    }

    pub fn total(&self) -> usize {
        self.i1 + self.i2 + self.j1 + self.j2
    }

    /// Admissible iff some root level exists in each parameter.
    pub fn admissible_on(&self, grid: DyadicGrid) -> bool {
        self.i1.max(self.j1) <= grid.axis1.levels && self.i2.max(self.j2) <= grid.axis2.levels
    }

    pub fn check(&self, grid: DyadicGrid) -> Result<()> {
        if !self.admissible_on(grid) {
            return Err(Error::InadmissibleComplexity {
                i1: self.i1,
                i2: self.i2,
                j1: self.j1,
                j2: self.j2,
                k1: grid.axis1.levels,
                k2: grid.axis2.levels,
            });
        }
        Ok(())
    }

    /// Root levels in parameter 1 for which both the source and target cubes
    /// carry Haar coefficients.
    pub fn roots1(&self, grid: DyadicGrid) -> std::ops::Range<usize> {
        let cap = self.i1.max(self.j1);
        if grid.axis1.levels > cap {
            0..(grid.axis1.levels - cap)
        } else {
            0..0
        }
    }

    pub fn roots2(&self, grid: DyadicGrid) -> std::ops::Range<usize> {
        let cap = self.i2.max(self.j2);
        if grid.axis2.levels > cap {
            0..(grid.axis2.levels - cap)
        } else {
            0..0
        }
    }

    /// The one-weight growth envelope `2^{(n1/2)(i1+j1)} 2^{(n2/2)(i2+j2)}`.
    pub fn growth_envelope(&self, grid: DyadicGrid) -> f64 {
        let e1 = grid.axis1.dim as f64 / 2.0 * (self.i1 + self.j1) as f64;
        let e2 = grid.axis2.dim as f64 / 2.0 * (self.i2 + self.j2) as f64;
        2f64.powf(e1 + e2)
    }
}

/// One-parameter dyadic maximal function on an axis, including the finest
/// cells (so the output dominates `|u|` pointwise).
pub fn axis_maximal(u: &AxisFunction) -> AxisFunction {
    let axis = u.axis;
    let abs: Vec<f64> = u.values.iter().map(|v| v.abs()).collect();
    let pyr = average_pyramid(axis, &abs);
    let mut out = vec![0.0; axis.cells()];
    for (cell, o) in out.iter_mut().enumerate() {
        let mut best = 0.0f64;
        for k in 0..=axis.levels {
            best = best.max(pyr[k][axis.ancestor(axis.levels, cell, axis.levels - k)]);
        }
        *o = best;
    }
    AxisFunction { axis, values: out }
}

/// One-parameter dyadic square function from cancellative Haar coefficients.
pub fn axis_square_function(u: &AxisFunction) -> AxisFunction {
    let axis = u.axis;
    let (coef, _) = u.haar_coefficients();
    let ns = axis.n_sigs();
    let mut sq = vec![0.0; axis.cells()];
    for (k, lvl) in coef.iter().enumerate() {
        let inv_meas = axis.cubes_at(k) as f64;
        for pos in 0..axis.cubes_at(k) {
            let mut s = 0.0;
            for sig in 0..ns {
                let c = lvl[pos * ns + sig];
                s += c * c;
            }
            if s != 0.0 {
                for c in axis.cells_of(k, pos) {
                    sq[c] += s * inv_meas;
                }
            }
        }
    }
    AxisFunction { axis, values: sq.into_iter().map(f64::sqrt).collect() }
}

/// One-parameter shifted square function `S^{i,j}` on an axis.
pub fn axis_shifted_square(u: &AxisFunction, i: usize, j: usize) -> Result<AxisFunction> {
    let axis = u.axis;
    if i.max(j) > axis.levels {
        return Err(Error::BadParameter(format!(
            "shift complexity ({i},{j}) exceeds axis depth {}",
            axis.levels
        )));
    }
    let (coef, _) = u.haar_coefficients();
    let ns = axis.n_sigs();
    let mut sq = vec![0.0; axis.cells()];
    let cap = i.max(j);
    for r in 0..axis.levels.saturating_sub(cap) {
        let amp_meas = axis.cubes_at(r + j) as f64;
        for pos in 0..axis.cubes_at(r) {
            let mut a = 0.0;
            for off in 0..(1usize << (axis.dim * i)) {
                let p = axis.descendant(r, pos, i, off);
                for sig in 0..ns {
                    a += coef[r + i][p * ns + sig].abs();
                }
            }
            if a != 0.0 {
                let contrib = a * a * amp_meas;
                for c in axis.cells_of(r, pos) {
                    sq[c] += contrib;
                }
            }
        }
    }
    Ok(AxisFunction { axis, values: sq.into_iter().map(f64::sqrt).collect() })
}

/// Dyadic or strong maximal function of a grid function.
pub fn maximal_dyadic(f: &GridFunction, scope: MaximalScope) -> GridFunction {
    let grid = f.grid;
    match scope {
        MaximalScope::Param(param) => {
            let other = grid.axis(param.other());
            let mut out = GridFunction::zero(grid);
            for oc in 0..other.cells() {
                let slice = AxisFunction {
                    axis: grid.axis(param),
                    values: f.slice(param, oc),
                };
                let m = axis_maximal(&slice);
                for (c, v) in m.values.into_iter().enumerate() {
                    let idx = match param {
                        Param::One => grid.cell_index(c, oc),
                        Param::Two => grid.cell_index(oc, c),
                    };
                    out.values[idx] = v;
                }
            }
            out
        }
        MaximalScope::Strong => {
            let abs: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
            let pyr = rectangle_average_pyramid(grid, &abs);
            let (a1, a2) = (grid.axis1, grid.axis2);
            let mut out = GridFunction::zero(grid);
            for c1 in 0..a1.cells() {
                for c2 in 0..a2.cells() {
                    let mut best = 0.0f64;
                    for k1 in 0..=a1.levels {
                        let p1 = a1.ancestor(a1.levels, c1, a1.levels - k1);
                        for k2 in 0..=a2.levels {
                            let p2 = a2.ancestor(a2.levels, c2, a2.levels - k2);
                            best = best.max(pyr[k1][k2][p1 * a2.cubes_at(k2) + p2]);
                        }
                    }
                    out.values[grid.cell_index(c1, c2)] = best;
                }
            }
            out
        }
    }
}

/// `H_{Q1}^{s1} f` as a function of the second variable, synthesized from the
/// spectrum. With `full = false` the hybrid (mean-in-x2) component is
/// dropped, which is the square-function convention; the mixed operators use
/// the full slice.
fn h1_slice(spec: &HaarSpectrum, k1: usize, p1: usize, s1: usize, full: bool) -> AxisFunction {
    let a2 = spec.grid.axis2;
    let ns2 = a2.n_sigs();
    let coef: Vec<Vec<f64>> = (0..a2.levels)
        .map(|k2| {
            (0..a2.cubes_at(k2) * ns2)
                .map(|idx2| spec.cc_at(k1, p1, s1, k2, idx2 / ns2, idx2 % ns2))
                .collect()
        })
        .collect();
    let mean = if full {
        spec.hyb1[k1][p1 * spec.grid.axis1.n_sigs() + s1]
    } else {
        0.0
    };
    AxisFunction {
        axis: a2,
        values: crate::axis::haar_synthesis(a2, &coef, mean),
    }
}

fn h2_slice(spec: &HaarSpectrum, k2: usize, p2: usize, s2: usize, full: bool) -> AxisFunction {
    let a1 = spec.grid.axis1;
    let ns1 = a1.n_sigs();
    let coef: Vec<Vec<f64>> = (0..a1.levels)
        .map(|k1| {
            (0..a1.cubes_at(k1) * ns1)
                .map(|idx1| spec.cc_at(k1, idx1 / ns1, idx1 % ns1, k2, p2, s2))
                .collect()
        })
        .collect();
    let mean = if full {
        spec.hyb2[k2][p2 * spec.grid.axis2.n_sigs() + s2]
    } else {
        0.0
    };
    AxisFunction {
        axis: a1,
        values: crate::axis::haar_synthesis(a1, &coef, mean),
    }
}

/// Square function for the requested scope.
pub fn square_function(f: &GridFunction, scope: SquareScope) -> GridFunction {
    let grid = f.grid;
    let spec = haar_forward(f);
    square_function_of_spectrum(&spec, scope, grid)
}

pub(crate) fn square_function_of_spectrum(
    spec: &HaarSpectrum,
    scope: SquareScope,
    grid: DyadicGrid,
) -> GridFunction {
    let (a1, a2) = (grid.axis1, grid.axis2);
    let mut sq = vec![0.0; grid.cells()];
    match scope {
        SquareScope::Biparameter => {
            for k1 in 0..a1.levels {
                for k2 in 0..a2.levels {
                    let inv_meas = (a1.cubes_at(k1) * a2.cubes_at(k2)) as f64;
                    for p1 in 0..a1.cubes_at(k1) {
                        for p2 in 0..a2.cubes_at(k2) {
                            let mut s = 0.0;
                            for s1 in 0..a1.n_sigs() {
                                for s2 in 0..a2.n_sigs() {
                                    let c = spec.cc_at(k1, p1, s1, k2, p2, s2);
                                    s += c * c;
                                }
                            }
                            if s == 0.0 {
                                continue;
                            }
                            let contrib = s * inv_meas;
                            for c1 in a1.cells_of(k1, p1) {
                                for &c2 in &a2.cells_of(k2, p2) {
                                    sq[grid.cell_index(c1, c2)] += contrib;
                                }
                            }
                        }
                    }
                }
            }
        }
        SquareScope::Param(Param::One) => {
            for k1 in 0..a1.levels {
                let inv_meas = a1.cubes_at(k1) as f64;
                for p1 in 0..a1.cubes_at(k1) {
                    for s1 in 0..a1.n_sigs() {
                        let h = h1_slice(spec, k1, p1, s1, false);
                        for c1 in a1.cells_of(k1, p1) {
                            for (c2, hv) in h.values.iter().enumerate() {
                                sq[grid.cell_index(c1, c2)] += hv * hv * inv_meas;
                            }
                        }
                    }
                }
            }
        }
        SquareScope::Param(Param::Two) => {
            for k2 in 0..a2.levels {
                let inv_meas = a2.cubes_at(k2) as f64;
                for p2 in 0..a2.cubes_at(k2) {
                    for s2 in 0..a2.n_sigs() {
                        let h = h2_slice(spec, k2, p2, s2, false);
                        for c2 in a2.cells_of(k2, p2) {
                            for (c1, hv) in h.values.iter().enumerate() {
                                sq[grid.cell_index(c1, c2)] += hv * hv * inv_meas;
                            }
                        }
                    }
                }
            }
        }
    }
    GridFunction {
        grid,
        values: sq.into_iter().map(f64::sqrt).collect(),
    }
}

/// Shifted biparameter square function: outer sum over root rectangles, inner
/// absolute-coefficient sums over `i`-descendants and indicator spread over
/// `j`-descendants.
pub fn shifted_square_function(f: &GridFunction, c: ShiftComplexity) -> Result<GridFunction> {
    let grid = f.grid;
    c.check(grid)?;
    let spec = haar_forward(f);
    let (a1, a2) = (grid.axis1, grid.axis2);
    let mut sq = vec![0.0; grid.cells()];
    for r1 in c.roots1(grid) {
        for r2 in c.roots2(grid) {
            // sum of indicators over the j-descendants is constant on the root
            let amp = (a1.cubes_at(r1 + c.j1) * a2.cubes_at(r2 + c.j2)) as f64;
            for p1 in 0..a1.cubes_at(r1) {
                for p2 in 0..a2.cubes_at(r2) {
                    let mut a = 0.0;
                    for o1 in 0..(1usize << (a1.dim * c.i1)) {
                        let q1 = a1.descendant(r1, p1, c.i1, o1);
                        for o2 in 0..(1usize << (a2.dim * c.i2)) {
                            let q2 = a2.descendant(r2, p2, c.i2, o2);
                            for s1 in 0..a1.n_sigs() {
                                for s2 in 0..a2.n_sigs() {
                                    a += spec.cc_at(r1 + c.i1, q1, s1, r2 + c.i2, q2, s2).abs();
                                }
                            }
                        }
                    }
                    if a == 0.0 {
                        continue;
                    }
                    let contrib = a * a * amp;
                    for c1 in a1.cells_of(r1, p1) {
                        for &c2 in &a2.cells_of(r2, p2) {
                            sq[grid.cell_index(c1, c2)] += contrib;
                        }
                    }
                }
            }
        }
    }
    Ok(GridFunction {
        grid,
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

/// Mixed square-maximal operators `[SM]` / `[MS]`, optionally shifted in the
/// square parameter.
pub fn mixed_square_maximal(
    f: &GridFunction,
    order: MixedOrder,
    shift: Option<(usize, usize)>,
) -> Result<GridFunction> {
    let grid = f.grid;
    let spec = haar_forward(f);
    let (i, j) = shift.unwrap_or((0, 0));
    let mut sq = vec![0.0; grid.cells()];
    match order {
        MixedOrder::SquareMaximal => {
            let a1 = grid.axis1;
            if i.max(j) > a1.levels {
                return Err(Error::BadParameter(format!(
                    "mixed shift ({i},{j}) exceeds depth {}",
                    a1.levels
                )));
            }
            let cap = i.max(j);
            for r1 in 0..a1.levels.saturating_sub(cap) {
                let amp = a1.cubes_at(r1 + j) as f64;
                for p1 in 0..a1.cubes_at(r1) {
                    // sum of M_{D2}(H_{P1} f) over the i-descendants
                    let mut msum = vec![0.0; grid.axis2.cells()];
                    for off in 0..(1usize << (a1.dim * i)) {
                        let q1 = a1.descendant(r1, p1, i, off);
                        for s1 in 0..a1.n_sigs() {
                            let h = h1_slice(&spec, r1 + i, q1, s1, true);
                            let m = axis_maximal(&h);
                            for (c2, v) in m.values.into_iter().enumerate() {
                                msum[c2] += v;
                            }
                        }
                    }
                    for c1 in a1.cells_of(r1, p1) {
                        for (c2, v) in msum.iter().enumerate() {
                            sq[grid.cell_index(c1, c2)] += v * v * amp;
                        }
                    }
                }
            }
        }
        MixedOrder::MaximalSquare => {
            let a2 = grid.axis2;
            if i.max(j) > a2.levels {
                return Err(Error::BadParameter(format!(
                    "mixed shift ({i},{j}) exceeds depth {}",
                    a2.levels
                )));
            }
            let cap = i.max(j);
            for r2 in 0..a2.levels.saturating_sub(cap) {
                let amp = a2.cubes_at(r2 + j) as f64;
                for p2 in 0..a2.cubes_at(r2) {
                    let mut msum = vec![0.0; grid.axis1.cells()];
                    for off in 0..(1usize << (a2.dim * i)) {
                        let q2 = a2.descendant(r2, p2, i, off);
                        for s2 in 0..a2.n_sigs() {
                            let h = h2_slice(&spec, r2 + i, q2, s2, true);
                            let m = axis_maximal(&h);
                            for (c1, v) in m.values.into_iter().enumerate() {
                                msum[c1] += v;
                            }
                        }
                    }
                    for c2 in a2.cells_of(r2, p2) {
                        for (c1, v) in msum.iter().enumerate() {
                            sq[grid.cell_index(c1, c2)] += v * v * amp;
                        }
                    }
                }
            }
        }
    }
    Ok(GridFunction {
        grid,
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}
