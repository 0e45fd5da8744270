//! Biparameter paraproducts: the three pure kinds, six mixed product-BMO
//! kinds and six little-bmo kinds, plus the exact 16-term product
//! decomposition.
//!
//! Every kind is an instance of one tensor kernel. Per parameter, a
//! paraproduct does one of four things with the summation cube:
//!
//! * `SymbolAvg`   — the symbol enters through an average / hybrid pairing,
//!                   the function's Haar coefficient survives;
//! * `SymbolHaar`  — the symbol's Haar coefficient survives, the function is
//!                   averaged;
//! * `Diagonal`    — both carry the same signature, the output is the
//!                   normalized indicator;
//! * `Cross`       — distinct signatures, the output is the combined-
//!                   signature Haar function.
//!
//! The sixteenth combination (symbol averaged in both slots) is the swapped
//! term `Pi_f b` completing the product decomposition.

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{DyadicGrid, RectId};
use crate::haar::{require_fully_cancellative, Analysis, project_fully_cancellative};

/// The fifteen biparameter paraproduct kinds. Serialized names follow the
/// operator catalog (`Pi01`, `PiStar`, `gamma10`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParaproductKind {
    #[serde(rename = "Pi")]
    Pi,
    #[serde(rename = "PiStar")]
    PiStar,
    #[serde(rename = "Gamma")]
    Gamma,
    #[serde(rename = "Pi01")]
    Pi01,
    #[serde(rename = "Pi10")]
    Pi10,
    #[serde(rename = "Gamma01")]
    Gamma01,
    #[serde(rename = "Gamma01Star")]
    Gamma01Star,
    #[serde(rename = "Gamma10")]
    Gamma10,
    #[serde(rename = "Gamma10Star")]
    Gamma10Star,
    #[serde(rename = "pi01")]
    LittlePi01,
    #[serde(rename = "pi01Star")]
    LittlePi01Star,
    #[serde(rename = "pi10")]
    LittlePi10,
    #[serde(rename = "pi10Star")]
    LittlePi10Star,
    #[serde(rename = "gamma01")]
    LittleGamma01,
    #[serde(rename = "gamma10")]
    LittleGamma10,
}

/// Per-parameter behaviour of a paraproduct.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotCase {
    SymbolAvg,
    SymbolHaar,
    Diagonal,
    Cross,
}

use SlotCase::*;

pub const ALL_KINDS: [ParaproductKind; 15] = [
    ParaproductKind::Pi,
    ParaproductKind::PiStar,
    ParaproductKind::Gamma,
    ParaproductKind::Pi01,
    ParaproductKind::Pi10,
    ParaproductKind::Gamma01,
    ParaproductKind::Gamma01Star,
    ParaproductKind::Gamma10,
    ParaproductKind::Gamma10Star,
    ParaproductKind::LittlePi01,
    ParaproductKind::LittlePi01Star,
    ParaproductKind::LittlePi10,
    ParaproductKind::LittlePi10Star,
    ParaproductKind::LittleGamma01,
    ParaproductKind::LittleGamma10,
];

pub const PRODUCT_BMO_KINDS: [ParaproductKind; 9] = [
    ParaproductKind::Pi,
    ParaproductKind::PiStar,
    ParaproductKind::Gamma,
    ParaproductKind::Pi01,
    ParaproductKind::Pi10,
    ParaproductKind::Gamma01,
    ParaproductKind::Gamma01Star,
    ParaproductKind::Gamma10,
    ParaproductKind::Gamma10Star,
];

pub const LITTLE_BMO_KINDS: [ParaproductKind; 6] = [
    ParaproductKind::LittlePi01,
    ParaproductKind::LittlePi01Star,
    ParaproductKind::LittlePi10,
    ParaproductKind::LittlePi10Star,
    ParaproductKind::LittleGamma01,
    ParaproductKind::LittleGamma10,
];

impl ParaproductKind {
    pub fn cases(self) -> (SlotCase, SlotCase) {
        match self {
            ParaproductKind::Pi => (SymbolHaar, SymbolHaar),
            ParaproductKind::PiStar => (Diagonal, Diagonal),
            ParaproductKind::Gamma => (Cross, Cross),
            ParaproductKind::Pi01 => (Diagonal, SymbolHaar),
            ParaproductKind::Pi10 => (SymbolHaar, Diagonal),
            ParaproductKind::Gamma01 => (Cross, SymbolHaar),
            ParaproductKind::Gamma01Star => (Cross, Diagonal),
            ParaproductKind::Gamma10 => (SymbolHaar, Cross),
            ParaproductKind::Gamma10Star => (Diagonal, Cross),
            ParaproductKind::LittlePi01 => (SymbolHaar, SymbolAvg),
            ParaproductKind::LittlePi01Star => (Diagonal, SymbolAvg),
            ParaproductKind::LittlePi10 => (SymbolAvg, SymbolHaar),
            ParaproductKind::LittlePi10Star => (SymbolAvg, Diagonal),
            ParaproductKind::LittleGamma01 => (Cross, SymbolAvg),
            ParaproductKind::LittleGamma10 => (SymbolAvg, Cross),
        }
    }

    /// Adjoint under the unweighted `L^2` pairing: swap `SymbolHaar` and
    /// `Diagonal` in each slot. `Gamma` and the little `gamma` kinds are
    /// self-adjoint.
    pub fn adjoint(self) -> ParaproductKind {
        fn swap(c: SlotCase) -> SlotCase {
            match c {
                SymbolHaar => Diagonal,
                Diagonal => SymbolHaar,
                other => other,
            }
        }
        let (c1, c2) = self.cases();
        let target = (swap(c1), swap(c2));
        *ALL_KINDS
            .iter()
            .find(|k| k.cases() == target)
            .expect("case table is closed under adjoints")
    }

    pub fn is_little_bmo(self) -> bool {
        let (c1, c2) = self.cases();
        c1 == SymbolAvg || c2 == SymbolAvg
    }

    pub fn tag(self) -> &'static str {
        match self {
            ParaproductKind::Pi => "Pi",
            ParaproductKind::PiStar => "PiStar",
            ParaproductKind::Gamma => "Gamma",
            ParaproductKind::Pi01 => "Pi01",
            ParaproductKind::Pi10 => "Pi10",
            ParaproductKind::Gamma01 => "Gamma01",
            ParaproductKind::Gamma01Star => "Gamma01Star",
            ParaproductKind::Gamma10 => "Gamma10",
            ParaproductKind::Gamma10Star => "Gamma10Star",
            ParaproductKind::LittlePi01 => "pi01",
            ParaproductKind::LittlePi01Star => "pi01Star",
            ParaproductKind::LittlePi10 => "pi10",
            ParaproductKind::LittlePi10Star => "pi10Star",
            ParaproductKind::LittleGamma01 => "gamma01",
            ParaproductKind::LittleGamma10 => "gamma10",
        }
    }
}

/// A paraproduct symbol: a fully cancellative grid function with its cached
/// spectrum, rectangle averages and hybrid coefficients.
pub struct Symbol {
    pub func: GridFunction,
    pub analysis: Analysis,
}

impl Symbol {
    /// Wrap a fully cancellative function; errors otherwise.
    pub fn new(b: GridFunction) -> Result<Self> {
        require_fully_cancellative(&b)?;
        let analysis = Analysis::new(&b);
        Ok(Symbol { func: b, analysis })
    }

    /// Project onto the fully cancellative family, then wrap.
    pub fn project(b: &GridFunction) -> Self {
        let p = project_fully_cancellative(b);
        let analysis = Analysis::new(&p);
        Symbol { func: p, analysis }
    }

    pub fn grid(&self) -> DyadicGrid {
        self.func.grid
    }
}

#[derive(Clone, Copy)]
enum Part {
    Avg,
    Coef(usize),
}

#[derive(Clone, Copy)]
enum OutPat {
    Haar(usize),
    Indicator,
}

struct SlotEntry {
    b: Part,
    f: Part,
    out: OutPat,
    /// `Cross` carries the extra `|Q|^{-1/2}` from the Haar product rule.
    cross_scale: bool,
}

fn slot_entries(axis: Axis, case: SlotCase) -> Vec<SlotEntry> {
    let ns = axis.n_sigs();
    let mut out = Vec::new();
    match case {
        SymbolAvg => {
            for d in 0..ns {
                out.push(SlotEntry { b: Part::Avg, f: Part::Coef(d), out: OutPat::Haar(d), cross_scale: false });
            }
        }
        SymbolHaar => {
            for e in 0..ns {
                out.push(SlotEntry { b: Part::Coef(e), f: Part::Avg, out: OutPat::Haar(e), cross_scale: false });
            }
        }
        Diagonal => {
            for e in 0..ns {
                out.push(SlotEntry { b: Part::Coef(e), f: Part::Coef(e), out: OutPat::Indicator, cross_scale: false });
            }
        }
        Cross => {
            for e in 0..ns {
                for d in 0..ns {
                    if d != e {
                        out.push(SlotEntry {
                            b: Part::Coef(e),
                            f: Part::Coef(d),
                            out: OutPat::Haar(axis.combine_sigs(e, d)),
                            cross_scale: true,
                        });
                    }
                }
            }
        }
    }
    out
}

fn joint_value(an: &Analysis, k1: usize, p1: usize, b1: Part, k2: usize, p2: usize, b2: Part) -> f64 {
    match (b1, b2) {
        (Part::Coef(s1), Part::Coef(s2)) => an.cc(k1, p1, s1, k2, p2, s2),
        (Part::Coef(s1), Part::Avg) => an.hyb01(k1, p1, s1, k2, p2),
        (Part::Avg, Part::Coef(s2)) => an.hyb10(k1, p1, k2, p2, s2),
        (Part::Avg, Part::Avg) => an.rect_avg(RectId { k1, p1, k2, p2 }),
    }
}

/// Cells of a cube together with the output-pattern value on each cell.
fn pattern(axis: Axis, k: usize, pos: usize, out: &OutPat, cross_scale: bool) -> Vec<(usize, f64)> {
    let cells = axis.cells_of(k, pos);
    let mut scale = 1.0;
    if cross_scale {
        scale *= (axis.cubes_at(k) as f64).sqrt(); // |Q|^{-1/2}
    }
    match out {
        OutPat::Haar(sig) => cells
            .into_iter()
            .map(|c| (c, scale * axis.haar_value(k, pos, *sig, c)))
            .collect(),
        OutPat::Indicator => {
            let v = scale * axis.cubes_at(k) as f64; // 1/|Q|
            cells.into_iter().map(|c| (c, v)).collect()
        }
    }
}

/// The tensor kernel: apply the paraproduct defined by a per-parameter case
/// pair, reading the symbol from `b` and the function data from `f`.
pub fn apply_cases(b: &Analysis, f: &Analysis, case1: SlotCase, case2: SlotCase) -> GridFunction {
    debug_assert_eq!(b.grid, f.grid);
    let grid = b.grid;
    let (a1, a2) = (grid.axis1, grid.axis2);
    let entries1 = slot_entries(a1, case1);
    let entries2 = slot_entries(a2, case2);
    let mut out = vec![0.0; grid.cells()];
    for k1 in 0..a1.levels {
        for p1 in 0..a1.cubes_at(k1) {
            for e1 in &entries1 {
                let pat1 = pattern(a1, k1, p1, &e1.out, e1.cross_scale);
                for k2 in 0..a2.levels {
                    for p2 in 0..a2.cubes_at(k2) {
                        for e2 in &entries2 {
                            let bv = joint_value(b, k1, p1, e1.b, k2, p2, e2.b);
                            if bv == 0.0 {
                                continue;
                            }
                            let fv = joint_value(f, k1, p1, e1.f, k2, p2, e2.f);
                            if fv == 0.0 {
                                continue;
                            }
                            let c = bv * fv;
                            let pat2 = pattern(a2, k2, p2, &e2.out, e2.cross_scale);
                            for &(c1, v1) in &pat1 {
                                let row = c1 * a2.cells();
                                let cv1 = c * v1;
                                for &(c2, v2) in &pat2 {
                                    out[row + c2] += cv1 * v2;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    GridFunction { grid, values: out }
}

/// Apply one of the fifteen paraproducts with symbol `b` to `f`.
pub fn apply_paraproduct(kind: ParaproductKind, b: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    if b.grid() != f.grid {
        return Err(Error::GridMismatch);
    }
    let fa = Analysis::new(f);
    let (c1, c2) = kind.cases();
    Ok(apply_cases(&b.analysis, &fa, c1, c2))
}

/// Same, reusing a precomputed analysis of `f`.
pub fn apply_paraproduct_analyzed(kind: ParaproductKind, b: &Symbol, fa: &Analysis) -> GridFunction {
    let (c1, c2) = kind.cases();
    apply_cases(&b.analysis, fa, c1, c2)
}

/// The sixteenth term of the product decomposition: `Pi_f b`, the pure
/// paraproduct with the roles of symbol and function swapped.
pub fn symbol_swap_term(b: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    if b.grid() != f.grid {
        return Err(Error::GridMismatch);
    }
    let fa = Analysis::new(f);
    Ok(apply_cases(&b.analysis, &fa, SymbolAvg, SymbolAvg))
}

/// All sixteen terms of the exact product decomposition of `b * f`,
/// labeled by catalog tag. Requires both inputs fully cancellative; the sum
/// of the terms then reproduces the pointwise product exactly.
pub fn product_decomposition(
    b: &Symbol,
    f: &GridFunction,
) -> Result<Vec<(&'static str, GridFunction)>> {
    if b.grid() != f.grid {
        return Err(Error::GridMismatch);
    }
    require_fully_cancellative(f)?;
    let fa = Analysis::new(f);
    let mut terms: Vec<(&'static str, GridFunction)> = Vec::with_capacity(16);
    for kind in ALL_KINDS {
        let (c1, c2) = kind.cases();
        terms.push((kind.tag(), apply_cases(&b.analysis, &fa, c1, c2)));
    }
    terms.push(("PiSwap", apply_cases(&b.analysis, &fa, SymbolAvg, SymbolAvg)));
    Ok(terms)
}
