//! Muckenhoupt weights over dyadic rectangles: construction, `A_p`
//! characteristics, conjugate and Bloom weights, reverse Hölder probing and
//! weighted norms. All suprema run over dyadic rectangles only; that is the
//! class every implemented operator lives on.

use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::axis::{average_pyramid, Axis, AxisFunction};
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{CubeId, DyadicGrid, Param, RectId};
use crate::haar::rectangle_average_pyramid;

/// Hölder conjugate exponent.
#[inline]
pub fn holder_conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::BadParameter(format!("exponent p must be in (1, inf), got {p}")));
    }
    Ok(())
}

/// How a weight was generated; serialized for exact reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Multiplicative cascade: every child cell multiplies its parent value
    /// by an independent factor in `[1/(1+ratio), 1+ratio]`.
    Cascade { ratio: f64 },
    /// Discretized `|x - 1/2|^alpha` tensor power weight, one exponent per
    /// parameter, with exact cell averages.
    Power { alpha1: f64, alpha2: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFamilyConfig {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub seed: u64,
}

/// Scope of an `A_p` characteristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApScope {
    /// Supremum over all dyadic rectangles.
    Biparameter,
    /// Supremum of one-parameter characteristics in the given parameter,
    /// over every finest slice of the other variable.
    Slices(Param),
}

/// A strictly positive grid function with cached rectangle averages and
/// per-exponent conjugate averages. Immutable after construction; the
/// conjugate cache sits behind a mutex and is filled on first use.
pub struct Weight {
    pub values: GridFunction,
    avg: Vec<Vec<Vec<f64>>>,
    conj_cache: Mutex<Vec<(u64, Arc<Vec<Vec<Vec<f64>>>>)>>,
    pub config: Option<WeightFamilyConfig>,
}

impl Clone for Weight {
    fn clone(&self) -> Self {
        Weight {
            values: self.values.clone(),
            avg: self.avg.clone(),
            conj_cache: Mutex::new(self.conj_cache.lock().unwrap().clone()),
            config: self.config.clone(),
        }
    }
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        let min = values.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::BadParameter(format!(
                "weight must be strictly positive (min value {min})"
            )));
        }
        let avg = rectangle_average_pyramid(values.grid, &values.values);
        Ok(Weight {
            values,
            avg,
            conj_cache: Mutex::new(Vec::new()),
            config: None,
        })
    }

    pub fn one(grid: DyadicGrid) -> Self {
        Weight::new(GridFunction::constant(grid, 1.0)).unwrap()
    }

    pub fn grid(&self) -> DyadicGrid {
        self.values.grid
    }

    /// `<w>_R`.
    #[inline]
    pub fn avg(&self, r: RectId) -> f64 {
        self.avg[r.k1][r.k2][r.p1 * self.grid().axis2.cubes_at(r.k2) + r.p2]
    }

    /// `w(R) = int_R w dx`.
    #[inline]
    pub fn mass(&self, r: RectId) -> f64 {
        self.avg(r) * self.grid().rect_measure(r)
    }

    /// Pointwise power `w^e` as a weight.
    pub fn pow(&self, e: f64) -> Weight {
        let values = GridFunction {
            grid: self.grid(),
            values: self.values.values.iter().map(|v| v.powf(e)).collect(),
        };
        Weight::new(values).expect("power of a positive weight is positive")
    }

    /// Conjugate weight `w' = w^{1-p'}`.
    pub fn conjugate(&self, p: f64) -> Result<Weight> {
        check_exponent(p)?;
        Ok(self.pow(1.0 - holder_conjugate(p)))
    }

    /// Cached averages of `w^{1-p'}` for a given `p`.
    fn conj_avg(&self, p: f64) -> Arc<Vec<Vec<Vec<f64>>>> {
        let key = p.to_bits();
        {
            let cache = self.conj_cache.lock().unwrap();
            if let Some((_, pyr)) = cache.iter().find(|(k, _)| *k == key) {
                return pyr.clone();
            }
        }
        let e = 1.0 - holder_conjugate(p);
        let conj_vals: Vec<f64> = self.values.values.iter().map(|v| v.powf(e)).collect();
        let pyr = Arc::new(rectangle_average_pyramid(self.grid(), &conj_vals));
        let mut cache = self.conj_cache.lock().unwrap();
        if let Some((_, existing)) = cache.iter().find(|(k, _)| *k == key) {
            return existing.clone();
        }
        cache.push((key, pyr.clone()));
        pyr
    }

    /// Slice of the weight along `param` at a fixed finest cell of the other
    /// variable, as a one-parameter weight.
    pub fn slice(&self, param: Param, other_cell: usize) -> AxisWeight {
        let vals = self.values.slice(param, other_cell);
        AxisWeight::new(AxisFunction {
            axis: self.grid().axis(param),
            values: vals,
        })
        .expect("slice of positive weight is positive")
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            n1: usize,
            n2: usize,
            #[serde(rename = "K1")]
            k1: usize,
            #[serde(rename = "K2")]
            k2: usize,
            generator: &'a Option<WeightFamilyConfig>,
            values: &'a [f64],
        }
        Ok(serde_json::to_string(&Envelope {
            n1: self.grid().axis1.dim,
            n2: self.grid().axis2.dim,
            k1: self.grid().axis1.levels,
            k2: self.grid().axis2.levels,
            generator: &self.config,
            values: &self.values.values,
        })?)
    }
}

/// One-parameter weight with a cube-average pyramid.
pub struct AxisWeight {
    pub values: AxisFunction,
    avg: Vec<Vec<f64>>,
}

impl AxisWeight {
    pub fn new(values: AxisFunction) -> Result<Self> {
        let min = values.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::BadParameter("one-parameter weight must be positive".into()));
        }
        let avg = average_pyramid(values.axis, &values.values);
        Ok(AxisWeight { values, avg })
    }

    #[inline]
    pub fn avg(&self, k: usize, pos: usize) -> f64 {
        self.avg[k][pos]
    }

    /// One-parameter dyadic `A_p` characteristic.
    pub fn ap_characteristic(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let e = 1.0 - holder_conjugate(p);
        let conj: Vec<f64> = self.values.values.iter().map(|v| v.powf(e)).collect();
        let conj_avg = average_pyramid(self.values.axis, &conj);
        let mut best = 0.0f64;
        for k in 0..=self.values.axis.levels {
            for pos in 0..self.values.axis.cubes_at(k) {
                best = best.max(self.avg[k][pos] * conj_avg[k][pos].powf(p - 1.0));
            }
        }
        Ok(best)
    }
}

/// `A_p` characteristic of a biparameter weight for the requested scope.
pub fn ap_characteristic(w: &Weight, p: f64, scope: ApScope) -> Result<f64> {
    check_exponent(p)?;
    match scope {
        ApScope::Biparameter => {
            let conj = w.conj_avg(p);
            let grid = w.grid();
            let mut best = 0.0f64;
            for k1 in 0..=grid.axis1.levels {
                for k2 in 0..=grid.axis2.levels {
                    for idx in 0..conj[k1][k2].len() {
                        best = best.max(w.avg[k1][k2][idx] * conj[k1][k2][idx].powf(p - 1.0));
                    }
                }
            }
            Ok(best)
        }
        ApScope::Slices(param) => {
            let other = param.other();
            let mut best = 0.0f64;
            for cell in 0..w.grid().axis(other).cells() {
                best = best.max(w.slice(param, cell).ap_characteristic(p)?);
            }
            Ok(best)
        }
    }
}

/// Conjugate weight `w' = w^{1-p'}` (as a standalone operation).
pub fn conjugate_weight(w: &Weight, p: f64) -> Result<Weight> {
    w.conjugate(p)
}

/// `m_Q w` as a one-parameter weight on the other variable.
pub fn averaged_weight(w: &Weight, q: CubeId) -> Result<AxisWeight> {
    w.grid().check_cube(q)?;
    let an_slice = match q.param {
        Param::One => {
            let n2 = w.grid().axis2.cells();
            let mut vals = vec![0.0; n2];
            let cells = w.grid().axis1.cells_of(q.level, q.pos);
            for &c1 in &cells {
                for (c2, v) in vals.iter_mut().enumerate() {
                    *v += w.values.value(c1, c2);
                }
            }
            for v in vals.iter_mut() {
                *v /= cells.len() as f64;
            }
            AxisFunction {
                axis: w.grid().axis2,
                values: vals,
            }
        }
        Param::Two => {
            let n1 = w.grid().axis1.cells();
            let mut vals = vec![0.0; n1];
            let cells = w.grid().axis2.cells_of(q.level, q.pos);
            for &c2 in &cells {
                for (c1, v) in vals.iter_mut().enumerate() {
                    *v += w.values.value(c1, c2);
                }
            }
            for v in vals.iter_mut() {
                *v /= cells.len() as f64;
            }
            AxisFunction {
                axis: w.grid().axis1,
                values: vals,
            }
        }
    };
    AxisWeight::new(an_slice)
}

/// Bloom setup: two `A_p` weights and the exponent.
pub struct BloomTriple {
    pub mu: Weight,
    pub lambda: Weight,
    pub p: f64,
}

impl BloomTriple {
    pub fn new(mu: Weight, lambda: Weight, p: f64) -> Result<Self> {
        check_exponent(p)?;
        if mu.grid() != lambda.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(BloomTriple { mu, lambda, p })
    }

    /// The Bloom weight `nu = mu^{1/p} lambda^{-1/p}`.
    pub fn bloom_weight(&self) -> Weight {
        let inv_p = 1.0 / self.p;
        let values = GridFunction {
            grid: self.mu.grid(),
            values: self
                .mu
                .values
                .values
                .iter()
                .zip(&self.lambda.values.values)
                .map(|(m, l)| m.powf(inv_p) * l.powf(-inv_p))
                .collect(),
        };
        Weight::new(values).expect("bloom weight is positive")
    }
}

/// `(sum_cells |f|^p w * cell_measure)^{1/p}`.
pub fn weighted_lp_norm(f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::BadParameter(format!("L^p norm needs p >= 1, got {p}")));
    }
    f.check_same_grid(&w.values)?;
    let s: f64 = f
        .values
        .iter()
        .zip(&w.values.values)
        .map(|(v, wv)| v.abs().powf(p) * wv)
        .sum();
    Ok((s * f.grid.cell_measure()).powf(1.0 / p))
}

/// Duality gap for the pairing `L^p(w)^* = L^{p'}(w')`: the difference
/// between `||f||_{L^p(w)}` and the best `|<f, g>|` over sampled unit-norm
/// `g` in `L^{p'}(w')`, always including the analytic extremizer
/// `g* = sign(f) |f|^{p-1} w / ||f||^{p-1}`. Non-negative, and at most
/// round-off because of the extremizer.
pub fn duality_gap(f: &GridFunction, w: &Weight, p: f64, trials: usize, seed: u64) -> Result<f64> {
    check_exponent(p)?;
    f.check_same_grid(&w.values)?;
    let pp = holder_conjugate(p);
    let norm = weighted_lp_norm(f, w, p)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let wconj = w.conjugate(p)?;
    let mut best = 0.0f64;
    let mut consider = |g: &GridFunction| -> Result<()> {
        let gn = weighted_lp_norm(g, &wconj, pp)?;
        if gn > 0.0 {
            best = best.max(f.dot(&g.scaled(1.0 / gn)).abs());
        }
        Ok(())
    };
    let extremizer = GridFunction {
        grid: f.grid,
        values: f
            .values
            .iter()
            .zip(&w.values.values)
            .map(|(v, wv)| v.signum() * v.abs().powf(p - 1.0) * wv)
            .collect(),
    };
    consider(&extremizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        consider(&GridFunction::random(f.grid, &mut rng, 1.0))?;
    }
    Ok(norm - best)
}

/// One row of the reverse Hölder table: the smallest constant that works for
/// the given exponent bump.
#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderRow {
    pub eps: f64,
    pub best_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsetDecayFit {
    /// Fitted exponent of `w(E)/w(R) <= C (|E|/|R|)^delta`.
    pub delta: f64,
    /// Smallest constant making the inequality hold on every sample.
    pub c: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderReport {
    pub rows: Vec<ReverseHolderRow>,
    pub subset_fit: SubsetDecayFit,
}

/// Probe the reverse Hölder inequality over all dyadic rectangles, and fit
/// the measure-decay exponent on random cell subsets.
pub fn reverse_holder_probe(
    w: &Weight,
    eps_grid: &[f64],
    subset_samples: usize,
    seed: u64,
) -> Result<ReverseHolderReport> {
    if eps_grid.is_empty() {
        return Err(Error::BadParameter("empty epsilon grid".into()));
    }
    let grid = w.grid();
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0) {
            return Err(Error::BadParameter(format!("epsilon must be positive, got {eps}")));
        }
        let powered: Vec<f64> = w.values.values.iter().map(|v| v.powf(1.0 + eps)).collect();
        let pyr = rectangle_average_pyramid(grid, &powered);
        let mut best_c = 0.0f64;
        for r in grid.all_rects() {
            let lhs = pyr[r.k1][r.k2][r.p1 * grid.axis2.cubes_at(r.k2) + r.p2]
                .powf(1.0 / (1.0 + eps));
            best_c = best_c.max(lhs / w.avg(r));
        }
        rows.push(ReverseHolderRow { eps, best_c });
    }

    // Part (ii): sample subsets E of rectangles R and fit the decay exponent.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rects: Vec<RectId> = grid
        .all_rects()
        .into_iter()
        .filter(|r| grid.rect_measure(*r) > grid.cell_measure() * 1.5)
        .collect();
    let mut points = Vec::new();
    for _ in 0..subset_samples {
        let r = rects[rng.gen_range(0..rects.len())];
        let cells1 = grid.axis1.cells_of(r.k1, r.p1);
        let cells2 = grid.axis2.cells_of(r.k2, r.p2);
        let total = cells1.len() * cells2.len();
        let mut chosen = Vec::new();
        for &c1 in &cells1 {
            for &c2 in &cells2 {
                if rng.gen::<bool>() {
                    chosen.push((c1, c2));
                }
            }
        }
        if chosen.is_empty() || chosen.len() == total {
            continue;
        }
        let we: f64 = chosen.iter().map(|&(c1, c2)| w.values.value(c1, c2)).sum();
        let wr: f64 = cells1
            .iter()
            .flat_map(|&c1| cells2.iter().map(move |&c2| (c1, c2)))
            .map(|(c1, c2)| w.values.value(c1, c2))
            .sum();
        let t = chosen.len() as f64 / total as f64;
        let ratio = we / wr;
        points.push((t.ln(), ratio.ln()));
    }
    let subset_fit = if points.len() >= 2 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        let slope = if denom.abs() > 1e-12 { (n * sxy - sx * sy) / denom } else { 1.0 };
        let delta = slope.max(1e-6);
        let c = points
            .iter()
            .map(|&(lt, lr)| (lr - delta * lt).exp())
            .fold(0.0f64, f64::max);
        SubsetDecayFit { delta, c, samples: points.len() }
    } else {
        SubsetDecayFit { delta: 1.0, c: 1.0, samples: 0 }
    };
    Ok(ReverseHolderReport { rows, subset_fit })
}

/// Generate a weight from a family configuration, reproducibly.
pub fn generate_weight(grid: DyadicGrid, config: &WeightFamilyConfig) -> Result<Weight> {
    let values = match &config.kind {
        GeneratorKind::Constant { value } => {
            if !(*value > 0.0) {
                return Err(Error::BadParameter("constant weight must be positive".into()));
            }
            GridFunction::constant(grid, *value)
        }
        GeneratorKind::Cascade { ratio } => {
            if !(*ratio >= 0.0 && ratio.is_finite()) {
                return Err(Error::BadParameter("cascade ratio must be non-negative".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            cascade_values(grid, *ratio, &mut rng)
        }
        GeneratorKind::Power { alpha1, alpha2 } => {
            for a in [*alpha1, *alpha2] {
                if !(a > -1.0 + 1e-3) {
                    return Err(Error::BadParameter(format!(
                        "power exponent {a} too singular (need > -1 + 1e-3)"
                    )));
                }
            }
            power_values(grid, *alpha1, *alpha2)
        }
    };
    let mut w = Weight::new(values)?;
    w.config = Some(config.clone());
    Ok(w)
}

fn cascade_values(grid: DyadicGrid, ratio: f64, rng: &mut impl Rng) -> GridFunction {
    let (a1, a2) = (grid.axis1, grid.axis2);
    let (mut l1, mut l2) = (0usize, 0usize);
    let mut vals = vec![1.0f64];
    let lo = 1.0 / (1.0 + ratio);
    let hi = 1.0 + ratio;
    while l1 < a1.levels || l2 < a2.levels {
        // refine the parameter with more remaining depth; ties go to 1
        let split_one = (a1.levels - l1) >= (a2.levels - l2) && l1 < a1.levels;
        let (c1, c2) = (a1.cubes_at(l1), a2.cubes_at(l2));
        if split_one {
            let nc1 = a1.cubes_at(l1 + 1);
            let mut next = vec![0.0; nc1 * c2];
            for p1 in 0..c1 {
                for p2 in 0..c2 {
                    let parent = vals[p1 * c2 + p2];
                    for off in 0..a1.branching() {
                        let child = a1.descendant(l1, p1, 1, off);
                        next[child * c2 + p2] = parent * rng.gen_range(lo..=hi);
                    }
                }
            }
            vals = next;
            l1 += 1;
        } else {
            let nc2 = a2.cubes_at(l2 + 1);
            let mut next = vec![0.0; c1 * nc2];
            for p1 in 0..c1 {
                for p2 in 0..c2 {
                    let parent = vals[p1 * c2 + p2];
                    for off in 0..a2.branching() {
                        let child = a2.descendant(l2, p2, 1, off);
                        next[p1 * nc2 + child] = parent * rng.gen_range(lo..=hi);
                    }
                }
            }
            vals = next;
            l2 += 1;
        }
    }
    GridFunction::new(grid, vals).expect("cascade fills every cell")
}

fn power_axis_values(axis: Axis, alpha: f64) -> Vec<f64> {
    // exact averages of |x - 1/2|^alpha per 1-d cell, tensorized over the
    // axis dimensions
    let m = 1usize << axis.levels;
    let anti = |x: f64| {
        let u = x - 0.5;
        u.signum() * u.abs().powf(alpha + 1.0) / (alpha + 1.0)
    };
    let one_d: Vec<f64> = (0..m)
        .map(|i| {
            let a = i as f64 / m as f64;
            let b = (i + 1) as f64 / m as f64;
            (anti(b) - anti(a)) / (b - a)
        })
        .collect();
    (0..axis.cells())
        .map(|cell| {
            let c = axis.coords(axis.levels, cell);
            (0..axis.dim).map(|d| one_d[c[d]]).product()
        })
        .collect()
}

fn power_values(grid: DyadicGrid, alpha1: f64, alpha2: f64) -> GridFunction {
    let v1 = power_axis_values(grid.axis1, alpha1);
    let v2 = power_axis_values(grid.axis2, alpha2);
    GridFunction::from_fn(grid, |c1, c2| v1[c1] * v2[c2])
}

/// Cascade weight regenerated with shrinking ratio until `[w]_{A_2}` fits
/// under the cap. Deterministic in the seed.
pub fn cascade_weight_with_cap(grid: DyadicGrid, ratio: f64, cap: f64, seed: u64) -> Result<Weight> {
    let mut r = ratio;
    for _ in 0..40 {
        let w = generate_weight(grid, &WeightFamilyConfig { kind: GeneratorKind::Cascade { ratio: r }, seed })?;
        if ap_characteristic(&w, 2.0, ApScope::Biparameter)? <= cap {
            return Ok(w);
        }
        r *= 0.7;
    }
    Err(Error::Degenerate(format!("could not fit cascade under A_2 cap {cap}")))
}
