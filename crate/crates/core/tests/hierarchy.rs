use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rectiling::geom;
use rectiling::hierarchy::*;
use rectiling::regions::*;
use rectiling::spectral::build_matrix;
use rectiling::subst::*;
use rectiling::Error;

const BLOCK3: &str = "3:010,101,010/101,010,101";

fn block3(depth: u32) -> HierarchicalPatch {
    generate(&block_rule(BLOCK3).unwrap(), "0", depth).unwrap()
}

fn cell_at(poly: &[geom::Pt]) -> Cell {
    let (lo, _) = geom::bbox(poly);
    [lo[0].round() as i64, lo[1].round() as i64]
}

// U_l recomputed from geometric containment at every level separately
fn oracle_parts(p: &HierarchicalPatch, u: &GridRegion) -> Vec<Vec<usize>> {
    let inside: Vec<Vec<usize>> = (0..=p.depth).map(|l| tiles_inside(p, l, u)).collect();
    let m = inside.iter().position(|v| v.is_empty()).unwrap_or(inside.len());
    (0..m)
        .map(|l| {
            inside[l]
                .iter()
                .copied()
                .filter(|&i| match p.tiles(l as u32)[i].parent {
                    Some(q) if l + 1 <= p.depth as usize => !inside[l + 1].contains(&(q as usize)),
                    _ => true,
                })
                .collect()
        })
        .collect()
}

#[test]
fn supertile_support_gives_one_part() {
    let p = block3(4);
    let t = 10;
    let poly = p.poly(2, t);
    let u = GridRegion::rect(1.0, cell_at(poly), 9, 9);
    let dec = decompose(&p, &u, true).unwrap();
    assert_eq!(dec.m, 3);
    assert_eq!(dec.parts[2].tiles, vec![t]);
    assert!(dec.parts[0].tiles.is_empty() && dec.parts[1].tiles.is_empty());
    assert!(dec.invariants.ok());
}

#[test]
fn single_and_paired_tiles() {
    let p = block3(3);
    let one = GridRegion::new(1.0, [cell_at(p.poly(0, 4))]);
    let dec = decompose(&p, &one, true).unwrap();
    assert_eq!(dec.m, 1);
    assert_eq!(dec.parts[0].tiles, vec![4]);
    assert!(!dec.fitted);
    let rep = verify_bounds(&p, &dec, &build_matrix(&p.rule));
    assert_eq!(rep.levels.len(), 1);
    assert_eq!(rep.violations, 0);

    // neighbours across two level-1 supertiles
    let a = p.tiles(0).iter().position(|t| t.parent == Some(0)).unwrap();
    let ca = cell_at(p.poly(0, a));
    let (pa, _) = geom::bbox(p.poly(1, 0));
    let right = [pa[0].round() as i64 + 3, ca[1]];
    let left = [right[0] - 1, ca[1]];
    let u = GridRegion::new(1.0, [left, right]);
    let dec = decompose(&p, &u, true).unwrap();
    assert_eq!(dec.m, 1);
    assert_eq!(dec.parts[0].count, 2);
    let parents: Vec<_> = dec.parts[0].tiles.iter().map(|&i| p.tiles(0)[i].parent).collect();
    assert_ne!(parents[0], parents[1]);
}

#[test]
fn decompose_errors() {
    let p = generate(&chair(), "L", 5).unwrap();
    let tiny = GridRegion::new(1.0, [[3, 3]]);
    assert!(matches!(decompose(&p, &tiny, true), Err(Error::DeltaTooSmall)));
    assert!(matches!(decompose(&p, &tiny, false), Err(Error::NotFitted)));
    let far = GridRegion::rect(4.0, [100, 100], 2, 2);
    assert!(matches!(decompose(&p, &far, true), Err(Error::RegionOutsidePatch)));
}

#[test]
fn decomposition_matches_levelwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (p, n) in [(generate(&chair(), "L", 6).unwrap(), 40), (block3(3), 60)] {
        let d = auto_delta(&p);
        for _ in 0..8 {
            let u = random_fitted_region(&mut rng, &p, d, n, 200).unwrap();
            let dec = decompose(&p, &u, false).unwrap();
            assert!(dec.invariants.ok(), "{:?}", dec.invariants);
            let parts: Vec<Vec<usize>> = dec.parts.iter().map(|q| q.tiles.clone()).collect();
            assert_eq!(parts, oracle_parts(&p, &u));
        }
    }
}

#[test]
fn auto_delta_values() {
    assert_eq!(auto_delta(&generate(&chair(), "L", 6).unwrap()), 4.0);
    assert_eq!(auto_delta(&block3(3)), 2.0);
}

#[test]
fn bounds_on_fitted_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (p, n) in [(generate(&chair(), "L", 7).unwrap(), 80), (block3(4), 100)] {
        let mat = build_matrix(&p.rule);
        let d = auto_delta(&p);
        for _ in 0..10 {
            let u = random_fitted_region(&mut rng, &p, d, n, 200).unwrap();
            let dec = decompose(&p, &u, false).unwrap();
            let rep = verify_bounds(&p, &dec, &mat);
            assert_eq!(rep.violations, 0, "{rep:?}");
            let ds = discrepancy_via_hierarchy(&p, &mat, &dec).unwrap();
            assert!(ds.ok, "{ds:?}");
        }
    }
}

#[test]
fn n_t_closed_form() {
    // unit squares, lambda 3: 32 * sqrt2 * 3/2
    assert!((n_t(32, 2f64.sqrt(), 3.0) - 48.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn penrose_chain_and_negative_control() {
    let p = generate(&penrose_triangles(), "A", 13).unwrap();
    let mat = build_matrix(&p.rule);
    let d = auto_delta(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..4 {
        let u = random_fitted_region(&mut rng, &p, d, 60, 200).unwrap();
        let dec = decompose(&p, &u, false).unwrap();
        assert!(dec.invariants.ok());
        assert_eq!(verify_bounds(&p, &dec, &mat).violations, 0);
        let ds = discrepancy_via_hierarchy(&p, &mat, &dec).unwrap();
        assert!(ds.k0 > 0.0 && ds.ok, "{ds:?}");
        assert!(ds.empirical_k * ds.boundary as f64 <= ds.rhs);
        let neg = discrepancy_with(&p, &mat, &dec, 1.1).unwrap();
        assert!(!neg.syn3_ok);
    }
}

#[test]
fn chair_negative_control() {
    let p = generate(&chair(), "L", 6).unwrap();
    let mat = build_matrix(&p.rule);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_fitted_region(&mut rng, &p, 4.0, 60, 200).unwrap();
    let dec = decompose(&p, &u, false).unwrap();
    assert!(discrepancy_with(&p, &mat, &dec, 1.0).unwrap().ok);
    assert!(!discrepancy_with(&p, &mat, &dec, 1.1).unwrap().ok);
}

#[test]
fn alpha_matches_fitted_density() {
    for (rule, seed, depth) in [(chair(), "L", 7), (penrose_triangles(), "A", 13)] {
        let p = generate(&rule, seed, depth).unwrap();
        let mat = build_matrix(&rule);
        let rep = rectiling::spectral::spectral_report(&mat).unwrap();
        let (_, alpha) = tile_pf_constant(&mat, default_rho(rep.r, rep.lambda), 40).unwrap();
        let fit = fit_deviation(&delone_set(&p)).unwrap();
        assert!((fit.rho_hat / alpha - 1.0).abs() < 0.02, "{} {alpha} {}", rule.name, fit.rho_hat);
    }
    let (_, alpha) = tile_pf_constant(&build_matrix(&chair()), 1.0, 10).unwrap();
    assert!((alpha - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn not_applicable_when_r_reaches_lambda() {
    // M = [[3,1],[1,3]]: r = 2 = lambda
    let rule = block_rule("2:00,01/11,01").unwrap();
    let p = generate(&rule, "0", 3).unwrap();
    let mat = build_matrix(&rule);
    let dec = decompose(&p, &GridRegion::rect(1.0, [2, 2], 2, 2), true).unwrap();
    assert!(matches!(discrepancy_via_hierarchy(&p, &mat, &dec), Err(Error::NotApplicable { .. })));
}

#[test]
fn ball_checks() {
    let sq = generate(&block_rule("2:00,00").unwrap(), "0", 4).unwrap();
    assert_eq!(tiles_meeting_disc(&sq, 0, [6.0, 6.0], 2f64.sqrt()), 16);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = ball_meet_check(&sq, 0, 0, &mut rng);
    assert_eq!((b.max_met, b.trials, b.ok), (0, 0, true));
    let ch = generate(&chair(), "L", 6).unwrap();
    let b = ball_meet_check(&ch, 0, 300, &mut rng);
    assert!(b.ok && b.max_met <= 93 && b.trials == 300, "{b:?}");
}

#[test]
fn curve_checks() {
    let sq = generate(&block_rule("2:00,00").unwrap(), "0", 4).unwrap();
    let c = curve_diam_check(&sq, 0, &[[3.5, 3.5]]);
    assert_eq!((c.diam, c.l, c.ok), (0.0, 1, true));
    let c = curve_diam_check(&sq, 0, &[[2.5, 2.5], [12.5, 2.5]]);
    assert!(c.l as f64 >= 10.0 / 2f64.sqrt() && c.ok);
    let ch = generate(&chair(), "L", 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let u = random_connected_region(&mut rng, 4.0, 30, [8, 8], [1, 1], [14, 14]);
        for comp in u.boundary_components() {
            assert!(component_diam_check(&ch, 0, &comp, 4.0).ok);
        }
    }
}

#[test]
fn level_ratio_checks() {
    let ch = generate(&chair(), "L", 7).unwrap();
    let tiny = GridRegion::rect(4.0, [5, 5], 1, 1);
    let r = level_ratio_check(&ch, &tiny.boundary_facets().to_vec(), 4.0, 0, 1);
    assert!(!r.applicable && r.ok);
    let sq = GridRegion::rect(4.0, [4, 4], 8, 8);
    let r = level_ratio_check(&ch, &sq.boundary_facets().to_vec(), 4.0, 0, 1);
    assert!(r.ok, "{r:?}");
    let b = block3(4);
    let sq = GridRegion::rect(2.0, [5, 5], 20, 20);
    let r = level_ratio_check(&b, &sq.boundary_facets().to_vec(), 2.0, 0, 2);
    assert!(r.ok, "{r:?}");
}
