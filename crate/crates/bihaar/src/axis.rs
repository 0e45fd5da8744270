//! One-parameter dyadic machinery on `[0,1)^n`: cubes, Haar functions,
//! transforms and average pyramids. Everything biparameter is built as a
//! tensor product of two of these axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum spatial dimension per parameter. Larger `n` adds no new signature
/// behavior and blows up the combinatorics.
pub const MAX_DIM: usize = 2;

/// One parameter of the product domain: the unit cube `[0,1)^n` subdivided
/// dyadically `levels` times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    /// Spatial dimension `n` of this parameter (1 or 2).
    pub dim: usize,
    /// Number of dyadic refinements `K`; cells live at level `K`.
    pub levels: usize,
}

impl Axis {
    pub fn new(dim: usize, levels: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::BadParameter(format!(
                "axis dimension must be 1..={MAX_DIM}, got {dim}"
            )));
        }
        if levels == 0 || dim * levels > 20 {
            return Err(Error::BadParameter(format!(
                "axis levels {levels} out of range for dimension {dim}"
            )));
        }
        Ok(Axis { dim, levels })
    }

    /// Number of cubes at level `k` (they partition the unit cube).
    #[inline]
    pub fn cubes_at(&self, k: usize) -> usize {
        1 << (self.dim * k)
    }

    /// Number of finest cells, `2^{n K}`.
    #[inline]
    pub fn cells(&self) -> usize {
        self.cubes_at(self.levels)
    }

    /// Lebesgue measure of a level-`k` cube.
    #[inline]
    pub fn cube_measure(&self, k: usize) -> f64 {
        1.0 / self.cubes_at(k) as f64
    }

    /// Number of children of one cube, `2^n`.
    #[inline]
    pub fn branching(&self) -> usize {
        1 << self.dim
    }

    /// Number of cancellative signatures per cube, `2^n - 1`.
    #[inline]
    pub fn n_sigs(&self) -> usize {
        (1 << self.dim) - 1
    }

    /// Total dyadic cubes over all levels `0..=K`.
    pub fn total_cubes(&self) -> usize {
        (0..=self.levels).map(|k| self.cubes_at(k)).sum()
    }

    /// Unpack a cube position at level `k` into per-dimension coordinates.
    #[inline]
    pub fn coords(&self, k: usize, pos: usize) -> [usize; MAX_DIM] {
        let mask = (1usize << k) - 1;
        match self.dim {
            1 => [pos, 0],
            _ => [pos & mask, pos >> k],
        }
    }

    /// Inverse of [`Axis::coords`].
    #[inline]
    pub fn pack(&self, k: usize, c: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => c[0],
            _ => c[0] | (c[1] << k),
        }
    }

    /// Position of the `j`-th generation ancestor of `(k, pos)`.
    #[inline]
    pub fn ancestor(&self, k: usize, pos: usize, j: usize) -> usize {
        let c = self.coords(k, pos);
        self.pack(k - j, [c[0] >> j, c[1] >> j])
    }

    /// Position of the descendant of `(k, pos)` at level `k + j` with offset
    /// `off` in `0..2^{n j}` (offset coordinates are per-dimension).
    #[inline]
    pub fn descendant(&self, k: usize, pos: usize, j: usize, off: usize) -> usize {
        let c = self.coords(k, pos);
        let omask = (1usize << j) - 1;
        let (o0, o1) = match self.dim {
            1 => (off, 0),
            _ => (off & omask, off >> j),
        };
        self.pack(k + j, [(c[0] << j) | o0, (c[1] << j) | o1])
    }

    /// Range of finest-cell indices covered by cube `(k, pos)`, expressed as
    /// per-dimension half-open coordinate ranges.
    #[inline]
    pub fn cell_box(&self, k: usize, pos: usize) -> [(usize, usize); MAX_DIM] {
        let c = self.coords(k, pos);
        let span = 1usize << (self.levels - k);
        [
            (c[0] * span, (c[0] + 1) * span),
            (c[1] * span, (c[1] + 1) * span),
        ]
    }

    /// Iterate the finest cells inside cube `(k, pos)`.
    pub fn cells_of(&self, k: usize, pos: usize) -> Vec<usize> {
        let bx = self.cell_box(k, pos);
        let mut out = Vec::with_capacity(1 << (self.dim * (self.levels - k)));
        if self.dim == 1 {
            out.extend(bx[0].0..bx[0].1);
        } else {
            for c1 in bx[1].0..bx[1].1 {
                for c0 in bx[0].0..bx[0].1 {
                    out.push(self.pack(self.levels, [c0, c1]));
                }
            }
        }
        out
    }

    /// Does cube `(ka, pa)` contain cube `(kb, pb)`? Requires `ka <= kb`.
    #[inline]
    pub fn contains(&self, ka: usize, pa: usize, kb: usize, pb: usize) -> bool {
        ka <= kb && self.ancestor(kb, pb, kb - ka) == pa
    }

    /// Sign of the Haar factor with signature `sig` on the child with offset
    /// bits `child`: `-1` exactly on the right half of every cancellative
    /// dimension the child sits in.
    #[inline]
    pub fn haar_sign(&self, sig: usize, child: usize) -> f64 {
        // bit d of `sig` = 1 means the non-cancellative factor 1/sqrt|I| in
        // dimension d; bit 0 means the cancellative factor, positive on the
        // left half.
        let neg = !sig & child & ((1 << self.dim) - 1);
        if (neg.count_ones() & 1) == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// Value of `h_Q^sig` on a finest cell inside `Q = (k, pos)`; zero outside.
    pub fn haar_value(&self, k: usize, pos: usize, sig: usize, cell: usize) -> f64 {
        if !self.contains(k, pos, self.levels, cell) {
            return 0.0;
        }
        let cc = self.coords(self.levels, cell);
        let shift = self.levels - k - 1;
        let mut child = 0usize;
        for d in 0..self.dim {
            child |= ((cc[d] >> shift) & 1) << d;
        }
        self.haar_sign(sig, child) * (self.cube_measure(k)).sqrt().recip()
    }

    /// Combined signature `eps + delta` (1 where the bits agree). Only defined
    /// for distinct cancellative signatures; the result is again cancellative
    /// and distinct from both.
    #[inline]
    pub fn combine_sigs(&self, a: usize, b: usize) -> usize {
        debug_assert!(a != b);
        !(a ^ b) & ((1 << self.dim) - 1)
    }
}

/// Real function constant on the finest cells of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisFunction {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl AxisFunction {
    pub fn new(axis: Axis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.cells() {
            return Err(Error::ShapeMismatch {
                expected: axis.cells(),
                got: values.len(),
            });
        }
        Ok(AxisFunction { axis, values })
    }

    pub fn zero(axis: Axis) -> Self {
        AxisFunction {
            axis,
            values: vec![0.0; axis.cells()],
        }
    }

    pub fn constant(axis: Axis, c: f64) -> Self {
        AxisFunction {
            axis,
            values: vec![c; axis.cells()],
        }
    }

    /// `int f dx` over the unit cube.
    pub fn integral(&self) -> f64 {
        let meas = self.axis.cube_measure(self.axis.levels);
        self.values.iter().sum::<f64>() * meas
    }

    /// Pyramid of cube averages, `avg[k][pos]`.
    pub fn average_pyramid(&self) -> Vec<Vec<f64>> {
        average_pyramid(self.axis, &self.values)
    }

    /// One-parameter Haar coefficients `coef[k][pos * n_sigs + sig]` for all
    /// levels `k < K`, plus the mean.
    pub fn haar_coefficients(&self) -> (Vec<Vec<f64>>, f64) {
        let avg = self.average_pyramid();
        (haar_from_pyramid(self.axis, &avg), avg[0][0])
    }
}

/// Averages over all dyadic cubes, built bottom-up from cell values.
pub fn average_pyramid(axis: Axis, cells: &[f64]) -> Vec<Vec<f64>> {
    let branching = axis.branching() as f64;
    let mut avg = vec![Vec::new(); axis.levels + 1];
    avg[axis.levels] = cells.to_vec();
    for k in (0..axis.levels).rev() {
        let mut up = vec![0.0; axis.cubes_at(k)];
        for (pos, v) in up.iter_mut().enumerate() {
            let mut s = 0.0;
            for off in 0..axis.branching() {
                s += avg[k + 1][axis.descendant(k, pos, 1, off)];
            }
            *v = s / branching;
        }
        avg[k] = up;
    }
    avg
}

/// Haar coefficients from an average pyramid: for a level-`k` cube `Q`,
/// `<f, h_Q^sig> = |Q|^{1/2} 2^{-n} sum_child sign(sig, child) avg(child)`.
pub fn haar_from_pyramid(axis: Axis, avg: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let ns = axis.n_sigs();
    let mut coef = Vec::with_capacity(axis.levels);
    for k in 0..axis.levels {
        let mut lvl = vec![0.0; axis.cubes_at(k) * ns];
        let scale = axis.cube_measure(k).sqrt() / axis.branching() as f64;
        for pos in 0..axis.cubes_at(k) {
            for sig in 0..ns {
                let mut s = 0.0;
                for child in 0..axis.branching() {
                    s += axis.haar_sign(sig, child) * avg[k + 1][axis.descendant(k, pos, 1, child)];
                }
                lvl[pos * ns + sig] = scale * s;
            }
        }
        coef.push(lvl);
    }
    coef
}

/// Synthesize cell values from Haar coefficients and the mean (inverse of
/// [`AxisFunction::haar_coefficients`]).
pub fn haar_synthesis(axis: Axis, coef: &[Vec<f64>], mean: f64) -> Vec<f64> {
    let ns = axis.n_sigs();
    let mut level = vec![mean];
    for k in 0..axis.levels {
        let mut next = vec![0.0; axis.cubes_at(k + 1)];
        let scale = axis.cube_measure(k).sqrt().recip();
        for pos in 0..axis.cubes_at(k) {
            for child in 0..axis.branching() {
                let mut v = level[pos];
                for sig in 0..ns {
                    v += coef[k][pos * ns + sig] * axis.haar_sign(sig, child) * scale;
                }
                next[axis.descendant(k, pos, 1, child)] = v;
            }
        }
        level = next;
    }
    level
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_nesting_and_partition() {
        let axis = Axis::new(2, 3).unwrap();
        // level-k cubes partition the cells
        for k in 0..=3 {
            let mut seen = vec![false; axis.cells()];
            for pos in 0..axis.cubes_at(k) {
                for c in axis.cells_of(k, pos) {
                    assert!(!seen[c]);
                    seen[c] = true;
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
        // nested or disjoint
        for pa in 0..axis.cubes_at(1) {
            for pb in 0..axis.cubes_at(2) {
                let ca = axis.cells_of(1, pa);
                let cb = axis.cells_of(2, pb);
                let inter = cb.iter().filter(|c| ca.contains(c)).count();
                assert!(inter == 0 || inter == cb.len());
                assert_eq!(inter == cb.len(), axis.contains(1, pa, 2, pb));
            }
        }
    }

    #[test]
    fn ancestors_descendants() {
        let axis = Axis::new(2, 3).unwrap();
        for pos in 0..axis.cubes_at(3) {
            let anc = axis.ancestor(3, pos, 2);
            assert!(axis.contains(1, anc, 3, pos));
        }
        // descendants enumerate exactly the 2^{j n} sub-cubes
        let descs: Vec<usize> = (0..(1 << (2 * 2)))
            .map(|off| axis.descendant(1, 2, 2, off))
            .collect();
        assert_eq!(descs.len(), 16);
        for &d in &descs {
            assert_eq!(axis.ancestor(3, d, 2), 2);
        }
        let mut uniq = descs.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
    }

    #[test]
    fn haar_orthonormal_on_axis() {
        for dim in 1..=2 {
            let axis = Axis::new(dim, 2).unwrap();
            let meas = axis.cube_measure(axis.levels);
            let mut fns: Vec<Vec<f64>> = vec![vec![1.0; axis.cells()]];
            for k in 0..axis.levels {
                for pos in 0..axis.cubes_at(k) {
                    for sig in 0..axis.n_sigs() {
                        fns.push(
                            (0..axis.cells())
                                .map(|c| axis.haar_value(k, pos, sig, c))
                                .collect(),
                        );
                    }
                }
            }
            for (i, a) in fns.iter().enumerate() {
                for (j, b) in fns.iter().enumerate() {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * meas;
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12, "gram({i},{j}) = {dot}");
                }
            }
        }
    }

    #[test]
    fn haar_product_rule_all_signatures_dim2() {
        let axis = Axis::new(2, 2).unwrap();
        let (k, pos) = (0usize, 0usize);
        let q_meas = axis.cube_measure(k);
        for e in 0..axis.n_sigs() {
            for d in 0..axis.n_sigs() {
                for cell in 0..axis.cells() {
                    let lhs = axis.haar_value(k, pos, e, cell) * axis.haar_value(k, pos, d, cell);
                    let rhs = if e == d {
                        // 1_Q / |Q|
                        1.0 / q_meas
                    } else {
                        axis.haar_value(k, pos, axis.combine_sigs(e, d), cell) / q_meas.sqrt()
                    };
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn combined_signature_is_cancellative_and_distinct() {
        let axis = Axis::new(2, 1).unwrap();
        for e in 0..axis.n_sigs() {
            for d in 0..axis.n_sigs() {
                if e == d {
                    continue;
                }
                let s = axis.combine_sigs(e, d);
                assert!(s < axis.n_sigs() + 1 && s != 0b11);
                assert!(s != e && s != d);
                // involution: e + (e + d) = d
                assert_eq!(axis.combine_sigs(e, s), d);
            }
        }
    }

    #[test]
    fn transform_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=2 {
            let axis = Axis::new(dim, 3).unwrap();
            let f = AxisFunction::new(
                axis,
                (0..axis.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (coef, mean) = f.haar_coefficients();
            let back = haar_synthesis(axis, &coef, mean);
            for (a, b) in f.values.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
            let l2sq: f64 = f.values.iter().map(|v| v * v).sum::<f64>()
                * axis.cube_measure(axis.levels);
            let coefsq: f64 =
                coef.iter().flatten().map(|c| c * c).sum::<f64>() + mean * mean;
            assert!((l2sq - coefsq).abs() < 1e-12);
        }
    }

    #[test]
    fn one_parameter_average_difference_formula() {
        // <f>_Q - <f>_R = sum over Q strictly inside P subset R of coef * h_P(Q),
        // checked exhaustively at K = 3.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let axis = Axis::new(1, 3).unwrap();
        let f = AxisFunction::new(
            axis,
            (0..axis.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let avg = f.average_pyramid();
        let (coef, _) = f.haar_coefficients();
        for kq in 1..=axis.levels {
            for pq in 0..axis.cubes_at(kq) {
                for kr in 0..kq {
                    let pr = axis.ancestor(kq, pq, kq - kr);
                    let mut sum = 0.0;
                    for kp in kr..kq {
                        let pp = axis.ancestor(kq, pq, kq - kp);
                        // value of h_P on Q = value on any cell of Q
                        let cell = axis.cells_of(kq, pq)[0];
                        for sig in 0..axis.n_sigs() {
                            sum += coef[kp][pp * axis.n_sigs() + sig]
                                * axis.haar_value(kp, pp, sig, cell);
                        }
                    }
                    assert!((avg[kq][pq] - avg[kr][pr] - sum).abs() < 1e-12);
                }
            }
        }
    }
}
