//! Biparameter Haar analysis: tensor Haar spectra, averaging formulas, the
//! local mean-oscillation split and martingale transforms.
//!
//! Coefficient layout is dense and level-indexed: grids are tiny (`K <= 8`),
//! so predictable indexing beats sparse maps everywhere.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::axis::{average_pyramid, haar_from_pyramid, haar_synthesis, AxisFunction};
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{CubeId, DyadicGrid, Param, RectId};

/// Full tensor Haar data of a grid function: cancellative rectangle
/// coefficients for all level pairs below `(K1, K2)`, the two hybrid families
/// (Haar in one parameter, global mean in the other) and the global mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarSpectrum {
    pub grid: DyadicGrid,
    /// `cc[k1][k2]` flat over `[pos1][sig1][pos2][sig2]`.
    pub cc: Vec<Vec<Vec<f64>>>,
    /// `hyb1[k1]` flat over `[pos1][sig1]`: `<f, h_{Q1} x 1/|U2|>`.
    pub hyb1: Vec<Vec<f64>>,
    /// `hyb2[k2]` flat over `[pos2][sig2]`: `<f, 1/|U1| x h_{Q2}>`.
    pub hyb2: Vec<Vec<f64>>,
    pub mean: f64,
}

impl HaarSpectrum {
    pub fn zero(grid: DyadicGrid) -> Self {
        let (a1, a2) = (grid.axis1, grid.axis2);
        HaarSpectrum {
            grid,
            cc: (0..a1.levels)
                .map(|k1| {
                    (0..a2.levels)
                        .map(|k2| {
                            vec![0.0; a1.cubes_at(k1) * a1.n_sigs() * a2.cubes_at(k2) * a2.n_sigs()]
                        })
                        .collect()
                })
                .collect(),
            hyb1: (0..a1.levels)
                .map(|k1| vec![0.0; a1.cubes_at(k1) * a1.n_sigs()])
                .collect(),
            hyb2: (0..a2.levels)
                .map(|k2| vec![0.0; a2.cubes_at(k2) * a2.n_sigs()])
                .collect(),
            mean: 0.0,
        }
    }

    #[inline]
    pub fn cc_index(&self, k2: usize, p1: usize, s1: usize, p2: usize, s2: usize) -> usize {
        let (a1, a2) = (self.grid.axis1, self.grid.axis2);
        ((p1 * a1.n_sigs() + s1) * a2.cubes_at(k2) + p2) * a2.n_sigs() + s2
    }

    #[inline]
    pub fn cc_at(&self, k1: usize, p1: usize, s1: usize, k2: usize, p2: usize, s2: usize) -> f64 {
        self.cc[k1][k2][self.cc_index(k2, p1, s1, p2, s2)]
    }

    #[inline]
    pub fn cc_at_mut(
        &mut self,
        k1: usize,
        p1: usize,
        s1: usize,
        k2: usize,
        p2: usize,
        s2: usize,
    ) -> &mut f64 {
        let idx = self.cc_index(k2, p1, s1, p2, s2);
        &mut self.cc[k1][k2][idx]
    }

    /// Sum of squares of every stored component; equals `||f||_2^2` by
    /// orthonormality of the tensor system on the unit square.
    pub fn energy(&self) -> f64 {
        let cc: f64 = self.cc.iter().flatten().flatten().map(|c| c * c).sum();
        let h1: f64 = self.hyb1.iter().flatten().map(|c| c * c).sum();
        let h2: f64 = self.hyb2.iter().flatten().map(|c| c * c).sum();
        cc + h1 + h2 + self.mean * self.mean
    }

    /// Largest non-cancellative component, used to test full cancellativity.
    pub fn stray_component(&self) -> f64 {
        let h1 = self.hyb1.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
        let h2 = self.hyb2.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
        h1.max(h2).max(self.mean.abs())
    }

    pub fn map_coefficients(&mut self, mut f: impl FnMut(f64) -> f64) {
        for block in self.cc.iter_mut().flatten() {
            for c in block.iter_mut() {
                *c = f(*c);
            }
        }
        for lvl in self.hyb1.iter_mut().chain(self.hyb2.iter_mut()) {
            for c in lvl.iter_mut() {
                *c = f(*c);
            }
        }
        self.mean = f(self.mean);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Forward tensor Haar transform, exact as a finite sum over cells.
pub fn haar_forward(f: &GridFunction) -> HaarSpectrum {
    let grid = f.grid;
    let (a1, a2) = (grid.axis1, grid.axis2);
    let mut spec = HaarSpectrum::zero(grid);

    // Analyze each parameter-1 row in parameter 2.
    let n1 = a1.cells();
    let mut row_coef: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n1);
    let mut row_mean: Vec<f64> = Vec::with_capacity(n1);
    for c1 in 0..n1 {
        let row = f.slice(Param::Two, c1);
        let pyr = average_pyramid(a2, &row);
        row_coef.push(haar_from_pyramid(a2, &pyr));
        row_mean.push(pyr[0][0]);
    }

    // Analyze each parameter-2 Haar coefficient column in parameter 1.
    for k2 in 0..a2.levels {
        for idx2 in 0..a2.cubes_at(k2) * a2.n_sigs() {
            let col: Vec<f64> = (0..n1).map(|c1| row_coef[c1][k2][idx2]).collect();
            let pyr = average_pyramid(a1, &col);
            let coef1 = haar_from_pyramid(a1, &pyr);
            for (k1, lvl) in coef1.iter().enumerate() {
                for (idx1, &c) in lvl.iter().enumerate() {
                    let ns2 = a2.n_sigs();
                    let (p2, s2) = (idx2 / ns2, idx2 % ns2);
                    let (p1, s1) = (idx1 / a1.n_sigs(), idx1 % a1.n_sigs());
                    *spec.cc_at_mut(k1, p1, s1, k2, p2, s2) = c;
                }
            }
            spec.hyb2[k2][idx2] = pyr[0][0];
        }
    }

    // The per-row means form a function of x1 whose Haar data is the first
    // hybrid family plus the global mean.
    let pyr = average_pyramid(a1, &row_mean);
    spec.hyb1 = haar_from_pyramid(a1, &pyr);
    spec.mean = pyr[0][0];
    spec
}

/// Inverse tensor Haar transform; `haar_forward(haar_inverse(s)) == s` up to
/// floating round-off.
pub fn haar_inverse(spec: &HaarSpectrum) -> GridFunction {
    let grid = spec.grid;
    let (a1, a2) = (grid.axis1, grid.axis2);
    let n1 = a1.cells();
    let ns1 = a1.n_sigs();
    let ns2 = a2.n_sigs();

    // Synthesize parameter-1 columns for every parameter-2 coefficient slot.
    let mut row_coef: Vec<Vec<Vec<f64>>> =
        vec![
            (0..a2.levels)
                .map(|k2| vec![0.0; a2.cubes_at(k2) * ns2])
                .collect();
            n1
        ];
    for k2 in 0..a2.levels {
        for idx2 in 0..a2.cubes_at(k2) * ns2 {
            let coef1: Vec<Vec<f64>> = (0..a1.levels)
                .map(|k1| {
                    (0..a1.cubes_at(k1) * ns1)
                        .map(|idx1| {
                            let (p1, s1) = (idx1 / ns1, idx1 % ns1);
                            let (p2, s2) = (idx2 / ns2, idx2 % ns2);
                            spec.cc_at(k1, p1, s1, k2, p2, s2)
                        })
                        .collect()
                })
                .collect();
            let col = haar_synthesis(a1, &coef1, spec.hyb2[k2][idx2]);
            for (c1, v) in col.into_iter().enumerate() {
                row_coef[c1][k2][idx2] = v;
            }
        }
    }
    let row_mean = haar_synthesis(a1, &spec.hyb1, spec.mean);

    let mut values = vec![0.0; grid.cells()];
    for c1 in 0..n1 {
        let row = haar_synthesis(a2, &row_coef[c1], row_mean[c1]);
        for (c2, v) in row.into_iter().enumerate() {
            values[grid.cell_index(c1, c2)] = v;
        }
    }
    GridFunction { grid, values }
}

/// Read-only caches derived from one grid function: rectangle averages, the
/// Haar spectrum, slice averages and per-rectangle hybrid coefficients.
/// Everything is computed once at construction; queries never mutate.
pub struct Analysis {
    pub grid: DyadicGrid,
    pub spec: HaarSpectrum,
    /// `avg[k1][k2]` flat over `[pos1][pos2]`, levels `0..=K`.
    avg: Vec<Vec<Vec<f64>>>,
    /// `slice1[k1]` flat over `[pos1][cell2]`: the functions `m_{Q1} f`.
    slice1: Vec<Vec<f64>>,
    /// `slice2[k2]` flat over `[pos2][cell1]`: the functions `m_{Q2} f`.
    slice2: Vec<Vec<f64>>,
    /// `hyb01[k1][k2]` flat over `[pos1][sig1][pos2]`:
    /// `<f, h_{Q1} x 1_{Q2}/|Q2|>`, `k1 < K1`, `k2 <= K2`.
    hyb01: Vec<Vec<Vec<f64>>>,
    /// `hyb10[k1][k2]` flat over `[pos1][pos2][sig2]`, `k1 <= K1`, `k2 < K2`.
    hyb10: Vec<Vec<Vec<f64>>>,
}

impl Analysis {
    pub fn new(f: &GridFunction) -> Self {
        let grid = f.grid;
        let (a1, a2) = (grid.axis1, grid.axis2);
        let (n1, n2) = (a1.cells(), a2.cells());
        let spec = haar_forward(f);

        // Slice averages m_{Q1} f over parameter 1, per level.
        let mut slice1: Vec<Vec<f64>> = vec![Vec::new(); a1.levels + 1];
        slice1[a1.levels] = f.values.clone();
        for k1 in (0..a1.levels).rev() {
            let mut lvl = vec![0.0; a1.cubes_at(k1) * n2];
            let b = a1.branching();
            for p1 in 0..a1.cubes_at(k1) {
                for c2 in 0..n2 {
                    let mut s = 0.0;
                    for off in 0..b {
                        s += slice1[k1 + 1][a1.descendant(k1, p1, 1, off) * n2 + c2];
                    }
                    lvl[p1 * n2 + c2] = s / b as f64;
                }
            }
            slice1[k1] = lvl;
        }

        // Symmetric slice averages over parameter 2.
        let mut slice2: Vec<Vec<f64>> = vec![Vec::new(); a2.levels + 1];
        slice2[a2.levels] = {
            let mut t = vec![0.0; grid.cells()];
            for c1 in 0..n1 {
                for c2 in 0..n2 {
                    t[c2 * n1 + c1] = f.values[grid.cell_index(c1, c2)];
                }
            }
            t
        };
        for k2 in (0..a2.levels).rev() {
            let mut lvl = vec![0.0; a2.cubes_at(k2) * n1];
            let b = a2.branching();
            for p2 in 0..a2.cubes_at(k2) {
                for c1 in 0..n1 {
                    let mut s = 0.0;
                    for off in 0..b {
                        s += slice2[k2 + 1][a2.descendant(k2, p2, 1, off) * n1 + c1];
                    }
                    lvl[p2 * n1 + c1] = s / b as f64;
                }
            }
            slice2[k2] = lvl;
        }

        // Rectangle averages: average the slice functions over parameter 2.
        let mut avg: Vec<Vec<Vec<f64>>> = Vec::with_capacity(a1.levels + 1);
        for k1 in 0..=a1.levels {
            let mut per_k2: Vec<Vec<f64>> = vec![Vec::new(); a2.levels + 1];
            per_k2[a2.levels] = slice1[k1].clone();
            for k2 in (0..a2.levels).rev() {
                let mut lvl = vec![0.0; a1.cubes_at(k1) * a2.cubes_at(k2)];
                let b = a2.branching();
                for p1 in 0..a1.cubes_at(k1) {
                    for p2 in 0..a2.cubes_at(k2) {
                        let mut s = 0.0;
                        for off in 0..b {
                            s += per_k2[k2 + 1]
                                [p1 * a2.cubes_at(k2 + 1) + a2.descendant(k2, p2, 1, off)];
                        }
                        lvl[p1 * a2.cubes_at(k2) + p2] = s / b as f64;
                    }
                }
                per_k2[k2] = lvl;
            }
            avg.push(per_k2);
        }

        // Hybrid coefficients <f, h_{Q1} x 1_{Q2}/|Q2|> for every rectangle:
        // Haar-analyze the slice pyramid in parameter 1, then average in
        // parameter 2.
        let ns1 = a1.n_sigs();
        let mut hyb01: Vec<Vec<Vec<f64>>> = Vec::with_capacity(a1.levels);
        for k1 in 0..a1.levels {
            // H_{Q1}^{s1} f as a function of cell2.
            let scale = a1.cube_measure(k1).sqrt() / a1.branching() as f64;
            let mut hfun = vec![0.0; a1.cubes_at(k1) * ns1 * n2];
            for p1 in 0..a1.cubes_at(k1) {
                for s1 in 0..ns1 {
                    for c2 in 0..n2 {
                        let mut s = 0.0;
                        for child in 0..a1.branching() {
                            s += a1.haar_sign(s1, child)
                                * slice1[k1 + 1][a1.descendant(k1, p1, 1, child) * n2 + c2];
                        }
                        hfun[(p1 * ns1 + s1) * n2 + c2] = scale * s;
                    }
                }
            }
            // Average over parameter-2 cubes of each H-function.
            let mut per_k2: Vec<Vec<f64>> = vec![Vec::new(); a2.levels + 1];
            per_k2[a2.levels] = hfun;
            for k2 in (0..a2.levels).rev() {
                let rows = a1.cubes_at(k1) * ns1;
                let mut lvl = vec![0.0; rows * a2.cubes_at(k2)];
                let b = a2.branching();
                for r in 0..rows {
                    for p2 in 0..a2.cubes_at(k2) {
                        let mut s = 0.0;
                        for off in 0..b {
                            s += per_k2[k2 + 1]
                                [r * a2.cubes_at(k2 + 1) + a2.descendant(k2, p2, 1, off)];
                        }
                        lvl[r * a2.cubes_at(k2) + p2] = s / b as f64;
                    }
                }
                per_k2[k2] = lvl;
            }
            hyb01.push(per_k2);
        }

        // Symmetric hybrid family.
        let ns2 = a2.n_sigs();
        let mut hyb10: Vec<Vec<Vec<f64>>> = vec![Vec::new(); a1.levels + 1];
        for k2 in 0..a2.levels {
            let scale = a2.cube_measure(k2).sqrt() / a2.branching() as f64;
            let mut hfun = vec![0.0; a2.cubes_at(k2) * ns2 * n1];
            for p2 in 0..a2.cubes_at(k2) {
                for s2 in 0..ns2 {
                    for c1 in 0..n1 {
                        let mut s = 0.0;
                        for child in 0..a2.branching() {
                            s += a2.haar_sign(s2, child)
                                * slice2[k2 + 1][a2.descendant(k2, p2, 1, child) * n1 + c1];
                        }
                        hfun[(p2 * ns2 + s2) * n1 + c1] = scale * s;
                    }
                }
            }
            let mut per_k1: Vec<Vec<f64>> = vec![Vec::new(); a1.levels + 1];
            per_k1[a1.levels] = hfun;
            for k1 in (0..a1.levels).rev() {
                let rows = a2.cubes_at(k2) * ns2;
                let mut lvl = vec![0.0; rows * a1.cubes_at(k1)];
                let b = a1.branching();
                for r in 0..rows {
                    for p1 in 0..a1.cubes_at(k1) {
                        let mut s = 0.0;
                        for off in 0..b {
                            s += per_k1[k1 + 1]
                                [r * a1.cubes_at(k1 + 1) + a1.descendant(k1, p1, 1, off)];
                        }
                        lvl[r * a1.cubes_at(k1) + p1] = s / b as f64;
                    }
                }
                per_k1[k1] = lvl;
            }
            // Re-index [k1][k2][pos1][pos2][sig2].
            for (k1, lvl) in per_k1.into_iter().enumerate() {
                if hyb10[k1].is_empty() {
                    hyb10[k1] = vec![Vec::new(); a2.levels];
                }
                let mut out = vec![0.0; a1.cubes_at(k1) * a2.cubes_at(k2) * ns2];
                for p2 in 0..a2.cubes_at(k2) {
                    for s2 in 0..ns2 {
                        let r = p2 * ns2 + s2;
                        for p1 in 0..a1.cubes_at(k1) {
                            out[(p1 * a2.cubes_at(k2) + p2) * ns2 + s2] =
                                lvl[r * a1.cubes_at(k1) + p1];
                        }
                    }
                }
                hyb10[k1][k2] = out;
            }
        }
        Analysis {
            grid,
            spec,
            avg,
            slice1,
            slice2,
            hyb01,
            hyb10,
        }
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.avg[0][0][0]
    }

    #[inline]
    pub fn rect_avg(&self, r: RectId) -> f64 {
        self.avg[r.k1][r.k2][r.p1 * self.grid.axis2.cubes_at(r.k2) + r.p2]
    }

    #[inline]
    pub fn cc(&self, k1: usize, p1: usize, s1: usize, k2: usize, p2: usize, s2: usize) -> f64 {
        self.spec.cc_at(k1, p1, s1, k2, p2, s2)
    }

    /// `<f, h_{Q1}^{s1} x 1_{Q2}/|Q2|>` for any rectangle (`k2` up to `K2`).
    #[inline]
    pub fn hyb01(&self, k1: usize, p1: usize, s1: usize, k2: usize, p2: usize) -> f64 {
        let a2c = self.grid.axis2.cubes_at(k2);
        self.hyb01[k1][k2][(p1 * self.grid.axis1.n_sigs() + s1) * a2c + p2]
    }

    /// `<f, 1_{Q1}/|Q1| x h_{Q2}^{s2}>` for any rectangle (`k1` up to `K1`).
    #[inline]
    pub fn hyb10(&self, k1: usize, p1: usize, k2: usize, p2: usize, s2: usize) -> f64 {
        let a2c = self.grid.axis2.cubes_at(k2);
        let ns2 = self.grid.axis2.n_sigs();
        self.hyb10[k1][k2][(p1 * a2c + p2) * ns2 + s2]
    }

    /// Slice average `m_Q f` as a function of the other variable.
    pub fn slice_average(&self, q: CubeId) -> AxisFunction {
        match q.param {
            Param::One => {
                let n2 = self.grid.axis2.cells();
                AxisFunction {
                    axis: self.grid.axis2,
                    values: self.slice1[q.level][q.pos * n2..(q.pos + 1) * n2].to_vec(),
                }
            }
            Param::Two => {
                let n1 = self.grid.axis1.cells();
                AxisFunction {
                    axis: self.grid.axis1,
                    values: self.slice2[q.level][q.pos * n1..(q.pos + 1) * n1].to_vec(),
                }
            }
        }
    }

    /// `H_Q^sig f`, the Haar slice integral in one parameter, as a function of
    /// the other variable. Includes every component of `f`.
    pub fn haar_slice(&self, q: CubeId, sig: usize) -> AxisFunction {
        let axis = self.grid.axis(q.param);
        let other = self.grid.axis(q.param.other());
        let scale = axis.cube_measure(q.level).sqrt() / axis.branching() as f64;
        let slices = match q.param {
            Param::One => &self.slice1,
            Param::Two => &self.slice2,
        };
        let n = other.cells();
        let mut vals = vec![0.0; n];
        for child in 0..axis.branching() {
            let sgn = axis.haar_sign(sig, child);
            let row = axis.descendant(q.level, q.pos, 1, child);
            for (c, v) in vals.iter_mut().enumerate() {
                *v += sgn * slices[q.level + 1][row * n + c];
            }
        }
        for v in vals.iter_mut() {
            *v *= scale;
        }
        AxisFunction { axis: other, values: vals }
    }
}

/// Averages over every dyadic rectangle of the grid: `out[k1][k2]` flat over
/// `[pos1][pos2]`, levels `0..=K` in both parameters.
pub fn rectangle_average_pyramid(grid: DyadicGrid, values: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let (a1, a2) = (grid.axis1, grid.axis2);
    let n2 = a2.cells();
    let mut slice1: Vec<Vec<f64>> = vec![Vec::new(); a1.levels + 1];
    slice1[a1.levels] = values.to_vec();
    for k1 in (0..a1.levels).rev() {
        let mut lvl = vec![0.0; a1.cubes_at(k1) * n2];
        let b = a1.branching();
        for p1 in 0..a1.cubes_at(k1) {
            for c2 in 0..n2 {
                let mut s = 0.0;
                for off in 0..b {
                    s += slice1[k1 + 1][a1.descendant(k1, p1, 1, off) * n2 + c2];
                }
                lvl[p1 * n2 + c2] = s / b as f64;
            }
        }
        slice1[k1] = lvl;
    }
    let mut avg: Vec<Vec<Vec<f64>>> = Vec::with_capacity(a1.levels + 1);
    for k1 in 0..=a1.levels {
        let mut per_k2: Vec<Vec<f64>> = vec![Vec::new(); a2.levels + 1];
        per_k2[a2.levels] = slice1[k1].clone();
        for k2 in (0..a2.levels).rev() {
            let mut lvl = vec![0.0; a1.cubes_at(k1) * a2.cubes_at(k2)];
            let b = a2.branching();
            for p1 in 0..a1.cubes_at(k1) {
                for p2 in 0..a2.cubes_at(k2) {
                    let mut s = 0.0;
                    for off in 0..b {
                        s += per_k2[k2 + 1]
                            [p1 * a2.cubes_at(k2 + 1) + a2.descendant(k2, p2, 1, off)];
                    }
                    lvl[p1 * a2.cubes_at(k2) + p2] = s / b as f64;
                }
            }
            per_k2[k2] = lvl;
        }
        avg.push(per_k2);
    }
    avg
}

/// Average of `f` over a dyadic rectangle.
pub fn rectangle_average(f: &GridFunction, r: RectId) -> Result<f64> {
    f.grid.check_rect(r)?;
    let b1 = f.grid.axis1.cell_box(r.k1, r.p1);
    let b2 = f.grid.axis2.cell_box(r.k2, r.p2);
    let mut s = 0.0;
    for c1 in b1[0].0..b1[0].1 {
        for d1 in b1[1].0..b1[1].1 {
            let cell1 = f.grid.axis1.pack(f.grid.axis1.levels, [c1, d1]);
            for c2 in b2[0].0..b2[0].1 {
                for d2 in b2[1].0..b2[1].1 {
                    let cell2 = f.grid.axis2.pack(f.grid.axis2.levels, [c2, d2]);
                    s += f.value(cell1, cell2);
                }
            }
        }
    }
    let cells = ((b1[0].1 - b1[0].0) * (b1[1].1 - b1[1].0) * (b2[0].1 - b2[0].0)
        * (b2[1].1 - b2[1].0)) as f64;
    Ok(s / cells)
}

/// Slice average `m_Q f` of `f` over a cube of one parameter.
pub fn slice_average(f: &GridFunction, q: CubeId) -> Result<AxisFunction> {
    f.grid.check_cube(q)?;
    let axis = f.grid.axis(q.param);
    let other = f.grid.axis(q.param.other());
    let cells = axis.cells_of(q.level, q.pos);
    let mut vals = vec![0.0; other.cells()];
    for &c in &cells {
        for (o, v) in vals.iter_mut().enumerate() {
            *v += match q.param {
                Param::One => f.value(c, o),
                Param::Two => f.value(o, c),
            };
        }
    }
    let n = cells.len() as f64;
    for v in vals.iter_mut() {
        *v /= n;
    }
    AxisFunction::new(other, vals)
}

/// The three addends of `1_R (f - <f>_R)`: the doubly-cancellative Haar block
/// over sub-rectangles of `R`, and the two slice-average correction terms.
/// Their pointwise sum reproduces `1_R (f - <f>_R)` exactly.
pub fn local_mean_oscillation_expansion(
    f: &GridFunction,
    r: RectId,
) -> Result<[GridFunction; 3]> {
    f.grid.check_rect(r)?;
    let grid = f.grid;
    let an = Analysis::new(f);
    let (a1, a2) = (grid.axis1, grid.axis2);
    let fr = an.rect_avg(r);

    // Doubly-cancellative block: sum of coefficient * Haar over P1 in Q1,
    // P2 in Q2 (coefficient levels only).
    let mut block = GridFunction::zero(grid);
    let cells1 = a1.cells_of(r.k1, r.p1);
    let cells2 = a2.cells_of(r.k2, r.p2);
    for k1 in r.k1..a1.levels {
        for k2 in r.k2..a2.levels {
            for p1 in 0..a1.cubes_at(k1) {
                if !a1.contains(r.k1, r.p1, k1, p1) {
                    continue;
                }
                for p2 in 0..a2.cubes_at(k2) {
                    if !a2.contains(r.k2, r.p2, k2, p2) {
                        continue;
                    }
                    for s1 in 0..a1.n_sigs() {
                        for s2 in 0..a2.n_sigs() {
                            let c = an.cc(k1, p1, s1, k2, p2, s2);
                            if c == 0.0 {
                                continue;
                            }
                            for &c1 in &a1.cells_of(k1, p1) {
                                let h1 = a1.haar_value(k1, p1, s1, c1);
                                for &c2 in &a2.cells_of(k2, p2) {
                                    let h2 = a2.haar_value(k2, p2, s2, c2);
                                    block.values[grid.cell_index(c1, c2)] += c * h1 * h2;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // 1_R [ m_{Q1} f (x2) - <f>_R ]
    let m1 = an.slice_average(CubeId {
        param: Param::One,
        level: r.k1,
        pos: r.p1,
    });
    let mut t1 = GridFunction::zero(grid);
    for &c1 in &cells1 {
        for &c2 in &cells2 {
            t1.values[grid.cell_index(c1, c2)] = m1.values[c2] - fr;
        }
    }

    // 1_R [ m_{Q2} f (x1) - <f>_R ]
    let m2 = an.slice_average(CubeId {
        param: Param::Two,
        level: r.k2,
        pos: r.p2,
    });
    let mut t2 = GridFunction::zero(grid);
    for &c1 in &cells1 {
        for &c2 in &cells2 {
            t2.values[grid.cell_index(c1, c2)] = m2.values[c1] - fr;
        }
    }

    Ok([block, t1, t2])
}

/// Which coefficients a martingale mask flips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskScope {
    /// Independent sign per rectangle/signature pair.
    Joint,
    /// Sign per parameter-1 cube/signature; flips that cube's cancellative
    /// and hybrid coefficients alike (a one-parameter transform per slice).
    Param1,
    /// Symmetric in parameter 2.
    Param2,
}

/// Signs in `{+1, -1}` per (cube, signature) pair, per parameter or jointly.
#[derive(Clone, Debug)]
pub struct MartingaleMask {
    pub scope: MaskScope,
    grid: DyadicGrid,
    /// Joint: per `[k1][k2]` cc-shaped blocks. Param1: `signs1[k1]` only.
    joint: Vec<Vec<Vec<f64>>>,
    signs1: Vec<Vec<f64>>,
    signs2: Vec<Vec<f64>>,
}

impl MartingaleMask {
    pub fn all_plus(grid: DyadicGrid) -> Self {
        let spec = HaarSpectrum::zero(grid);
        MartingaleMask {
            scope: MaskScope::Joint,
            grid,
            joint: spec
                .cc
                .iter()
                .map(|by_k2| by_k2.iter().map(|b| vec![1.0; b.len()]).collect())
                .collect(),
            signs1: Vec::new(),
            signs2: Vec::new(),
        }
    }

    pub fn random(grid: DyadicGrid, scope: MaskScope, rng: &mut impl Rng) -> Self {
        let mut sign = |_: usize| if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let spec = HaarSpectrum::zero(grid);
        match scope {
            MaskScope::Joint => MartingaleMask {
                scope,
                grid,
                joint: spec
                    .cc
                    .iter()
                    .map(|by_k2| {
                        by_k2
                            .iter()
                            .map(|b| (0..b.len()).map(&mut sign).collect())
                            .collect()
                    })
                    .collect(),
                signs1: Vec::new(),
                signs2: Vec::new(),
            },
            MaskScope::Param1 => MartingaleMask {
                scope,
                grid,
                joint: Vec::new(),
                signs1: spec
                    .hyb1
                    .iter()
                    .map(|l| (0..l.len()).map(&mut sign).collect())
                    .collect(),
                signs2: Vec::new(),
            },
            MaskScope::Param2 => MartingaleMask {
                scope,
                grid,
                joint: Vec::new(),
                signs1: Vec::new(),
                signs2: spec
                    .hyb2
                    .iter()
                    .map(|l| (0..l.len()).map(&mut sign).collect())
                    .collect(),
            },
        }
    }

    /// Joint mask equal to the signs of `f`'s own cancellative coefficients,
    /// so that `f_tau` has all non-negative coefficients.
    pub fn signs_of(f: &GridFunction) -> Self {
        let spec = haar_forward(f);
        MartingaleMask {
            scope: MaskScope::Joint,
            grid: f.grid,
            joint: spec
                .cc
                .iter()
                .map(|by_k2| {
                    by_k2
                        .iter()
                        .map(|b| b.iter().map(|&c| if c < 0.0 { -1.0 } else { 1.0 }).collect())
                        .collect()
                })
                .collect(),
            signs1: Vec::new(),
            signs2: Vec::new(),
        }
    }

    /// Apply the transform: `f_tau = sum tau * coef * haar`, mean and
    /// unmasked components unchanged.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut spec = haar_forward(f);
        let (a1, a2) = (self.grid.axis1, self.grid.axis2);
        match self.scope {
            MaskScope::Joint => {
                for (blocks, masks) in spec.cc.iter_mut().zip(&self.joint) {
                    for (b, m) in blocks.iter_mut().zip(masks) {
                        for (c, s) in b.iter_mut().zip(m) {
                            *c *= s;
                        }
                    }
                }
            }
            MaskScope::Param1 => {
                for k1 in 0..a1.levels {
                    for idx1 in 0..a1.cubes_at(k1) * a1.n_sigs() {
                        let s = self.signs1[k1][idx1];
                        spec.hyb1[k1][idx1] *= s;
                        let (p1, s1) = (idx1 / a1.n_sigs(), idx1 % a1.n_sigs());
                        for k2 in 0..a2.levels {
                            for p2 in 0..a2.cubes_at(k2) {
                                for s2 in 0..a2.n_sigs() {
                                    *spec.cc_at_mut(k1, p1, s1, k2, p2, s2) *= s;
                                }
                            }
                        }
                    }
                }
            }
            MaskScope::Param2 => {
                for k2 in 0..a2.levels {
                    for idx2 in 0..a2.cubes_at(k2) * a2.n_sigs() {
                        let s = self.signs2[k2][idx2];
                        spec.hyb2[k2][idx2] *= s;
                        let (p2, s2) = (idx2 / a2.n_sigs(), idx2 % a2.n_sigs());
                        for k1 in 0..a1.levels {
                            for p1 in 0..a1.cubes_at(k1) {
                                for s1 in 0..a1.n_sigs() {
                                    *spec.cc_at_mut(k1, p1, s1, k2, p2, s2) *= s;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(haar_inverse(&spec))
    }
}

/// Largest hybrid/mean component of `f` (zero means fully cancellative).
pub fn cancellativity_defect(f: &GridFunction) -> f64 {
    haar_forward(f).stray_component()
}

/// Projection onto the fully cancellative family: drop hybrid and mean
/// components, keep every cancellative rectangle coefficient.
pub fn project_fully_cancellative(f: &GridFunction) -> GridFunction {
    let mut spec = haar_forward(f);
    for lvl in spec.hyb1.iter_mut().chain(spec.hyb2.iter_mut()) {
        for c in lvl.iter_mut() {
            *c = 0.0;
        }
    }
    spec.mean = 0.0;
    haar_inverse(&spec)
}

/// Random fully cancellative function with values of order `amp`.
pub fn random_fully_cancellative(grid: DyadicGrid, rng: &mut impl Rng, amp: f64) -> GridFunction {
    project_fully_cancellative(&GridFunction::random(grid, rng, amp))
}

/// Verify `f` is fully cancellative relative to its own scale.
pub fn require_fully_cancellative(f: &GridFunction) -> Result<()> {
    let defect = cancellativity_defect(f);
    let scale = f.max_abs().max(1e-300);
    if defect > 1e-10 * scale {
        return Err(Error::NotFullyCancellative(defect));
    }
    Ok(())
}
