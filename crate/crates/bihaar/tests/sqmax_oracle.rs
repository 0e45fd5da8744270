//! Oracles for maximal and square functions: exhaustive suprema over
//! rectangles, explicit slice integrals and hand-expanded shifted sums.

use bihaar::haar::{haar_forward, random_fully_cancellative};
use bihaar::sqmax::{
    axis_maximal, axis_square_function, maximal_dyadic, mixed_square_maximal,
    shifted_square_function, square_function, MaximalScope, MixedOrder, ShiftComplexity,
    SquareScope,
};
use bihaar::weight::cascade_weight_with_cap;
use bihaar::{
    weighted_lp_norm, AxisFunction, DyadicGrid, GridFunction, MartingaleMask, MaskScope, Param,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn maximal_of_constant() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let f = GridFunction::constant(grid, -2.0);
    for scope in [
        MaximalScope::Strong,
        MaximalScope::Param(Param::One),
        MaximalScope::Param(Param::Two),
    ] {
        let m = maximal_dyadic(&f, scope);
        assert!(m.values.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }
}

#[test]
fn strong_maximal_of_cell_indicator_matches_exhaustive_oracle() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut f = GridFunction::zero(grid);
    let target = grid.cell_index(3, 5);
    f.values[target] = 1.0;
    let m = maximal_dyadic(&f, MaximalScope::Strong);
    // oracle: sup over all rectangles containing x of |R ∩ cell| / |R|
    for c1 in 0..8 {
        for c2 in 0..8 {
            let mut want = 0.0f64;
            for r in grid.all_rects() {
                let cells1 = grid.axis1.cells_of(r.k1, r.p1);
                let cells2 = grid.axis2.cells_of(r.k2, r.p2);
                if !cells1.contains(&c1) || !cells2.contains(&c2) {
                    continue;
                }
                if cells1.contains(&3) && cells2.contains(&5) {
                    want = want.max(1.0 / (cells1.len() * cells2.len()) as f64);
                }
            }
            assert!((m.value(c1, c2) - want).abs() < 1e-13);
        }
    }
    // output dominates |f| pointwise
    for (a, b) in m.values.iter().zip(&f.values) {
        assert!(a + 1e-15 >= b.abs());
    }
}

#[test]
fn strong_maximal_below_iterated_maximal() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = GridFunction::random(grid, &mut rng, 1.0);
    let ms = maximal_dyadic(&f, MaximalScope::Strong);
    let iterated = maximal_dyadic(&maximal_dyadic(&f, MaximalScope::Param(Param::Two)), MaximalScope::Param(Param::One));
    for (a, b) in ms.values.iter().zip(&iterated.values) {
        assert!(*a <= b * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn square_function_of_single_tensor() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let (k1, p1, k2, p2) = (1, 1, 2, 3);
    let f = GridFunction::haar_tensor(grid, (k1, p1, 0), (k2, p2, 0));
    let s = square_function(&f, SquareScope::Biparameter);
    let inv_sqrt_meas = ((1 << k1) * (1 << k2)) as f64;
    let inv_sqrt_meas = inv_sqrt_meas.sqrt();
    for c1 in 0..8 {
        for c2 in 0..8 {
            let inside = grid.axis1.cells_of(k1, p1).contains(&c1)
                && grid.axis2.cells_of(k2, p2).contains(&c2);
            let want = if inside { inv_sqrt_meas } else { 0.0 };
            assert!((s.value(c1, c2) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn square_function_parseval_on_cancellative_family() {
    let grid = DyadicGrid::new(2, 1, 2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_fully_cancellative(grid, &mut rng, 1.0);
    for scope in [
        SquareScope::Biparameter,
        SquareScope::Param(Param::One),
        SquareScope::Param(Param::Two),
    ] {
        let s = square_function(&f, scope);
        assert!(
            (s.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm(),
            "{scope:?}"
        );
    }
}

#[test]
fn per_variable_square_matches_slice_integral_oracle() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let f = random_fully_cancellative(grid, &mut rng, 1.0);
    let s1 = square_function(&f, SquareScope::Param(Param::One));
    // oracle: H_{Q1} f by direct slice integration, then assemble the sum
    let a1 = grid.axis1;
    let meas1 = a1.cube_measure(a1.levels);
    let mut want_sq = vec![0.0; grid.cells()];
    for k1 in 0..a1.levels {
        for p1 in 0..a1.cubes_at(k1) {
            for c2 in 0..grid.axis2.cells() {
                let mut h = 0.0;
                for c1 in 0..a1.cells() {
                    h += f.value(c1, c2) * a1.haar_value(k1, p1, 0, c1);
                }
                h *= meas1;
                let contrib = h * h * a1.cubes_at(k1) as f64;
                for c1 in a1.cells_of(k1, p1) {
                    want_sq[grid.cell_index(c1, c2)] += contrib;
                }
            }
        }
    }
    for (got, want) in s1.values.iter().zip(want_sq.iter().map(|v| v.sqrt())) {
        assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn shifted_square_degenerate_complexity_is_plain_square() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let f = GridFunction::random(grid, &mut rng, 1.0);
    let s0 = shifted_square_function(&f, ShiftComplexity::zero()).unwrap();
    let s = square_function(&f, SquareScope::Biparameter);
    assert!(s0.sub(&s).max_abs() <= 1e-12);
}

#[test]
fn shifted_square_single_tensor_hand_expansion() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let (l1, l2) = (2usize, 1usize);
    let f = GridFunction::haar_tensor(grid, (l1, 2, 0), (l2, 1, 0));
    let c = ShiftComplexity::new((1, 0), (0, 0));
    let s = shifted_square_function(&f, c).unwrap();
    // only root rectangle: R1 = parent of the level-2 cube, R2 = the cube
    // itself; the squared sum is 1, spread as indicator over R1 x R2 with
    // amplitude 2^{r1} * 2^{r2} = 2^{1} * 2^{1}.
    let want_val = (2.0f64 * 2.0).sqrt();
    for c1 in 0..8 {
        for c2 in 0..8 {
            let inside =
                grid.axis1.cells_of(1, 1).contains(&c1) && grid.axis2.cells_of(1, 1).contains(&c2);
            let want = if inside { want_val } else { 0.0 };
            assert!((s.value(c1, c2) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn shifted_square_inadmissible_complexity_errors() {
    let grid = DyadicGrid::new(1, 1, 2, 2).unwrap();
    let f = GridFunction::zero(grid);
    assert!(shifted_square_function(&f, ShiftComplexity::new((3, 0), (0, 0))).is_err());
    // max(i,j) = K is admissible but acts as zero (no root levels)
    let s = shifted_square_function(
        &GridFunction::constant(grid, 1.0),
        ShiftComplexity::new((2, 0), (0, 0)),
    )
    .unwrap();
    assert_eq!(s.max_abs(), 0.0);
}

#[test]
fn mixed_operator_tensor_factorization() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    // u fully cancellative in x1, v arbitrary in x2
    let u_raw = AxisFunction::new(
        grid.axis1,
        (0..grid.axis1.cells()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect(),
    )
    .unwrap();
    let (ucoef, _) = u_raw.haar_coefficients();
    let u = AxisFunction::new(
        grid.axis1,
        bihaar::axis::haar_synthesis(grid.axis1, &ucoef, 0.0),
    )
    .unwrap();
    let v = AxisFunction::new(
        grid.axis2,
        (0..grid.axis2.cells()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect(),
    )
    .unwrap();
    let f = GridFunction::from_fn(grid, |c1, c2| u.values[c1] * v.values[c2]);
    let sm = mixed_square_maximal(&f, MixedOrder::SquareMaximal, None).unwrap();
    let su = axis_square_function(&u);
    let mv = axis_maximal(&v);
    for c1 in 0..8 {
        for c2 in 0..8 {
            let want = su.values[c1] * mv.values[c2];
            assert!((sm.value(c1, c2) - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn mixed_operator_single_tensor_and_brute_force() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    // f = h_{Q1} x h_{Q2} -> [SM] f = |Q1|^{-1/2} 1_{Q1} x M_{D2}(h_{Q2})
    let (k1, p1, k2, p2) = (1usize, 0usize, 2usize, 5usize);
    let f = GridFunction::haar_tensor(grid, (k1, p1, 0), (k2, p2, 0));
    let sm = mixed_square_maximal(&f, MixedOrder::SquareMaximal, None).unwrap();
    let h2 = AxisFunction::new(
        grid.axis2,
        (0..8).map(|c| grid.axis2.haar_value(k2, p2, 0, c)).collect(),
    )
    .unwrap();
    let m2 = axis_maximal(&h2);
    let scale = (1u32 << k1) as f64;
    let scale = scale.sqrt();
    for c1 in 0..8 {
        for c2 in 0..8 {
            let want = if grid.axis1.cells_of(k1, p1).contains(&c1) {
                scale * m2.values[c2]
            } else {
                0.0
            };
            assert!((sm.value(c1, c2) - want).abs() <= 1e-12);
        }
    }

    // random f: brute-force oracle assembling M_{D2} H_{Q1} f slice by slice
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let f = random_fully_cancellative(grid, &mut rng, 1.0);
    let sm = mixed_square_maximal(&f, MixedOrder::SquareMaximal, None).unwrap();
    let a1 = grid.axis1;
    let meas1 = a1.cube_measure(a1.levels);
    let mut want_sq = vec![0.0; grid.cells()];
    for k1 in 0..3 {
        for p1 in 0..a1.cubes_at(k1) {
            let mut h = vec![0.0; 8];
            for (c2, hv) in h.iter_mut().enumerate() {
                for c1 in 0..8 {
                    *hv += f.value(c1, c2) * a1.haar_value(k1, p1, 0, c1);
                }
                *hv *= meas1;
            }
            let m = axis_maximal(&AxisFunction::new(grid.axis2, h).unwrap());
            for c1 in a1.cells_of(k1, p1) {
                for (c2, mv) in m.values.iter().enumerate() {
                    want_sq[grid.cell_index(c1, c2)] += mv * mv * a1.cubes_at(k1) as f64;
                }
            }
        }
    }
    for (got, want) in sm.values.iter().zip(want_sq.iter().map(|v| v.sqrt())) {
        assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn martingale_transforms_leave_square_functions_unchanged() {
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let f = random_fully_cancellative(grid, &mut rng, 1.0);
    let s = square_function(&f, SquareScope::Biparameter);
    for scope in [MaskScope::Joint, MaskScope::Param1, MaskScope::Param2] {
        let mask = MartingaleMask::random(grid, scope, &mut rng);
        let ft = mask.apply(&f).unwrap();
        let st = square_function(&ft, SquareScope::Biparameter);
        assert!(st.sub(&s).max_abs() <= 1e-12);
    }
    // [SM] is invariant under parameter-1 masks, [MS] under parameter-2 masks
    let sm = mixed_square_maximal(&f, MixedOrder::SquareMaximal, None).unwrap();
    let mask1 = MartingaleMask::random(grid, MaskScope::Param1, &mut rng);
    let smt = mixed_square_maximal(&mask1.apply(&f).unwrap(), MixedOrder::SquareMaximal, None).unwrap();
    assert!(smt.sub(&sm).max_abs() <= 1e-12);
    let ms = mixed_square_maximal(&f, MixedOrder::MaximalSquare, None).unwrap();
    let mask2 = MartingaleMask::random(grid, MaskScope::Param2, &mut rng);
    let mst = mixed_square_maximal(&mask2.apply(&f).unwrap(), MixedOrder::MaximalSquare, None).unwrap();
    assert!(mst.sub(&ms).max_abs() <= 1e-12);
}

#[test]
fn weighted_norm_equivalence_band_is_narrow() {
    // ||f||_{L^p(w)} vs ||S_D f||_{L^p(w)} across a random cancellative
    // ensemble: the ratio interval [c, C] must satisfy C/c < 50
    let grid = DyadicGrid::new(1, 1, 3, 3).unwrap();
    let w = cascade_weight_with_cap(grid, 0.5, 8.0, 77).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for p in [2.0, 3.0] {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..60 {
            let f = random_fully_cancellative(grid, &mut rng, 1.0);
            let nf = weighted_lp_norm(&f, &w, p).unwrap();
            if nf < 1e-12 {
                continue;
            }
            let ns = weighted_lp_norm(&square_function(&f, SquareScope::Biparameter), &w, p).unwrap();
            let ratio = ns / nf;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        assert!(hi / lo < 50.0, "p={p}: band [{lo}, {hi}]");
    }
}

#[test]
fn shifted_mixed_growth_stays_inside_envelope_band() {
    // ratio ||[SM]^{i,j} f|| / (2^{(i+j)/2} ||f||) drifts by less than 4x
    // across i + j <= 4
    let grid = DyadicGrid::new(1, 1, 5, 3).unwrap();
    let w = cascade_weight_with_cap(grid, 0.4, 8.0, 91).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    let fs: Vec<GridFunction> = (0..12).map(|_| random_fully_cancellative(grid, &mut rng, 1.0)).collect();
    let mut normalized = Vec::new();
    for total in 0..=4usize {
        for i in 0..=total {
            let j = total - i;
            if i.max(j) > grid.axis1.levels {
                continue;
            }
            let mut worst = 0.0f64;
            for f in &fs {
                let nf = weighted_lp_norm(f, &w, 2.0).unwrap();
                let sm = mixed_square_maximal(f, MixedOrder::SquareMaximal, Some((i, j))).unwrap();
                let nm = weighted_lp_norm(&sm, &w, 2.0).unwrap();
                worst = worst.max(nm / nf);
            }
            if worst > 0.0 {
                normalized.push(worst / 2f64.powf((i + j) as f64 / 2.0));
            }
        }
    }
    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi / lo < 4.0, "normalized band [{lo}, {hi}]");
}
