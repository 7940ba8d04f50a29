//! Hierarchical decomposition of grid regions into supertiles and the
//! discrepancy bound chain built on it.

use rand::Rng;
use serde::Serialize;

use crate::geom::{self, Pt, SNAP};
use crate::regions::{
    check_fits, patch_covers, random_simple_region, tiles_inside, tiles_meeting, Cell, Facet, GridRegion,
};
use crate::spectral::{dot, spectral_report, SubstitutionMatrix};
use crate::subst::{geometry_stats, HierarchicalPatch, Window};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct HierPart {
    pub level: u32,
    /// Tile indices at `level`, sorted.
    pub tiles: Vec<usize>,
    /// `N(T^l, U_l)`.
    pub count: u64,
    /// `L(T^{l+1}, dU)`; `None` above the top of the patch.
    pub boundary_above: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    /// (i) the parts cover exactly the level-0 tiles inside `U`.
    pub covers_inside: bool,
    /// (ii) no level-0 tile is counted twice.
    pub disjoint: bool,
    /// (iii) no part contains a tile of the next level.
    pub maximal: bool,
    /// (iv) `U` contains no tile of level `m`.
    pub top_empty: bool,
    /// Combinatorial containment agrees with the geometric test at every level.
    pub geometric_agrees: bool,
    /// `sum_l sum_{t in U_l} N(T, t) = N(T, U_T)`.
    pub partition_identity: bool,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.covers_inside
            && self.disjoint
            && self.maximal
            && self.top_empty
            && self.geometric_agrees
            && self.partition_identity
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HierDecomposition {
    #[serde(skip)]
    pub region: GridRegion,
    /// Least level with no tile inside `U`.
    pub m: u32,
    pub parts: Vec<HierPart>,
    /// `L(T^l, dU)` for `l = 0..=min(m, depth)`.
    pub boundary: Vec<u64>,
    /// Level-0 tiles meeting `dU`, sorted.
    pub residual: Vec<usize>,
    /// Level-0 tiles inside `U`, sorted.
    pub inside: Vec<usize>,
    /// `false` when decomposed with `force` although the fitting check failed.
    pub fitted: bool,
    pub invariants: InvariantReport,
}

impl HierDecomposition {
    pub fn addresses(&self, patch: &HierarchicalPatch) -> Vec<Vec<Vec<u32>>> {
        self.parts
            .iter()
            .map(|p| p.tiles.iter().map(|&i| patch.address(p.level, i)).collect())
            .collect()
    }
}

/// Decomposition `U_l = { s in T^l : s in U, parent(s) not in U }`.
///
/// Without `force` the region must pass [`check_fits`] at level 0.
pub fn decompose(patch: &HierarchicalPatch, u: &GridRegion, force: bool) -> Result<HierDecomposition> {
    if !patch_covers(patch, u) {
        return Err(Error::RegionOutsidePatch);
    }
    let g = geometry_stats(patch, 0);
    let fitted = check_fits(patch, 0, &g, u).ok;
    if !fitted && !force {
        return Err(Error::NotFitted);
    }
    let inside0 = tiles_inside(patch, 0, u);
    if inside0.is_empty() {
        return Err(Error::DeltaTooSmall);
    }
    // inside[l]: tiles of level l contained in U, from "all children inside"
    let mut inside: Vec<Vec<usize>> = vec![inside0.clone()];
    let mut geometric_agrees = true;
    let depth = patch.depth;
    while (inside.len() as u32) <= depth {
        let l = inside.len() as u32;
        let below = inside.last().unwrap();
        let kids = patch.tiles(l - 1);
        let mut parents: Vec<usize> = below.iter().filter_map(|&i| kids[i].parent.map(|p| p as usize)).collect();
        parents.sort_unstable();
        parents.dedup();
        let next: Vec<usize> = parents
            .into_iter()
            .filter(|&p| {
                let (a, b) = patch.tiles(l)[p].children;
                (a as usize..b as usize).all(|c| below.binary_search(&c).is_ok())
            })
            .collect();
        if next != tiles_inside(patch, l, u) {
            geometric_agrees = false;
        }
        if next.is_empty() {
            break;
        }
        inside.push(next);
    }
    let m = inside.len() as u32;
    let mut parts = Vec::with_capacity(m as usize);
    let boundary: Vec<u64> = (0..=m.min(depth))
        .map(|l| tiles_meeting(patch, l, u.boundary_facets(), u.delta).len() as u64)
        .collect();
    for l in 0..m {
        let above = inside.get(l as usize + 1);
        let tiles: Vec<usize> = inside[l as usize]
            .iter()
            .copied()
            .filter(|&i| match (patch.tiles(l)[i].parent, above) {
                (Some(p), Some(a)) => a.binary_search(&(p as usize)).is_err(),
                _ => true,
            })
            .collect();
        parts.push(HierPart {
            level: l,
            count: tiles.len() as u64,
            tiles,
            boundary_above: boundary.get(l as usize + 1).copied(),
        });
    }
    let residual: Vec<usize> = tiles_meeting(patch, 0, u.boundary_facets(), u.delta).into_iter().collect();
    let invariants = verify_decomposition(patch, u, &parts, &inside0, m);
    Ok(HierDecomposition {
        region: u.clone(),
        m,
        parts,
        boundary,
        residual,
        inside: inside0,
        fitted,
        invariants: InvariantReport { geometric_agrees, ..invariants },
    })
}

/// Structural re-check of the decomposition from leaf ranges and a fresh
/// geometric containment test at level `m`.
pub fn verify_decomposition(
    patch: &HierarchicalPatch,
    u: &GridRegion,
    parts: &[HierPart],
    inside0: &[usize],
    m: u32,
) -> InvariantReport {
    let mut leaves: Vec<usize> = Vec::new();
    let mut leaf_total = 0usize;
    let mut maximal = true;
    for p in parts {
        for &t in &p.tiles {
            let (a, b) = patch.leaf_range(p.level, t);
            leaf_total += b - a;
            leaves.extend(a..b);
        }
        // no tile of level l+1 has all its children in U_l
        if p.level < patch.depth {
            let mut parents: Vec<usize> =
                p.tiles.iter().filter_map(|&t| patch.tiles(p.level)[t].parent.map(|x| x as usize)).collect();
            parents.sort_unstable();
            parents.dedup();
            for q in parents {
                let (a, b) = patch.tiles(p.level + 1)[q].children;
                if (a as usize..b as usize).all(|c| p.tiles.binary_search(&c).is_ok()) {
                    maximal = false;
                }
            }
        }
    }
    leaves.sort_unstable();
    let unique = {
        let mut v = leaves.clone();
        v.dedup();
        v
    };
    let disjoint = unique.len() == leaves.len();
    let covers_inside = unique == inside0;
    let top_empty = m > patch.depth || tiles_inside(patch, m, u).is_empty();
    InvariantReport {
        covers_inside,
        disjoint,
        maximal,
        top_empty,
        geometric_agrees: true,
        partition_identity: leaf_total == inside0.len(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelBound {
    pub level: u32,
    pub n: u64,
    /// `max_children * L(T^{l+1}, dU)`.
    pub borde_rhs: Option<f64>,
    pub borde_ok: bool,
    /// `lambda^{m-l-1}`.
    pub lambda_lhs: f64,
    /// `(R/r) L(T^l, dU)`.
    pub lambda_rhs: f64,
    pub lambda_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub m: u32,
    pub levels: Vec<LevelBound>,
    pub max_children: u64,
    pub k: u64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Largest `l` in `1..=m` with `L(T^l, dU) > K` (0 if none).
    pub l0: u32,
    #[serde(rename = "N_T")]
    pub n_t: f64,
    pub violations: usize,
}

pub fn verify_bounds(patch: &HierarchicalPatch, dec: &HierDecomposition, mat: &SubstitutionMatrix) -> BoundReport {
    let g = geometry_stats(patch, 0);
    let lambda = patch.rule.lambda_f64();
    let mc = mat.max_children();
    let ratio = g.big_r / g.r;
    let mut levels = Vec::new();
    let mut violations = 0;
    for l in 0..dec.m {
        let n = dec.parts[l as usize].count;
        let borde_rhs = dec.parts[l as usize].boundary_above.map(|b| (mc * b) as f64);
        let borde_ok = borde_rhs.map_or(true, |r| n as f64 <= r);
        let lambda_lhs = lambda.powi((dec.m - l - 1) as i32);
        let lambda_rhs = ratio * dec.boundary[l as usize] as f64;
        let lambda_ok = lambda_lhs <= lambda_rhs * (1.0 + 1e-12);
        violations += usize::from(!borde_ok) + usize::from(!lambda_ok);
        levels.push(LevelBound { level: l, n, borde_rhs, borde_ok, lambda_lhs, lambda_rhs, lambda_ok });
    }
    let l0 = (1..dec.boundary.len() as u32)
        .rev()
        .find(|&l| dec.boundary[l as usize] > g.k)
        .unwrap_or(0);
    BoundReport {
        m: dec.m,
        levels,
        max_children: mc,
        k: g.k,
        r: g.r,
        big_r: g.big_r,
        l0,
        n_t: n_t(g.k, ratio, lambda),
        violations,
    }
}

/// `N_T = (K R / r) lambda / (lambda - 1)`.
pub fn n_t(k: u64, r_ratio: f64, lambda: f64) -> f64 {
    k as f64 * r_ratio * lambda / (lambda - 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct BallCheck {
    pub radius: f64,
    pub trials: usize,
    pub max_met: u64,
    pub k: u64,
    pub ok: bool,
}

/// Tiles of `level` meeting the closed disc of radius `radius` about `c`.
pub fn tiles_meeting_disc(patch: &HierarchicalPatch, level: u32, c: Pt, radius: f64) -> usize {
    let idx = patch.index(level);
    idx.query([c[0] - radius, c[1] - radius], [c[0] + radius, c[1] + radius])
        .into_iter()
        .filter(|&i| geom::polygon_point_dist(patch.poly(level, i), c) <= radius + SNAP)
        .count()
}

/// Largest number of tiles met by a disc of radius `2R` over random centres
/// whose disc stays inside the patch.
pub fn ball_meet_check<R: Rng>(patch: &HierarchicalPatch, level: u32, trials: usize, rng: &mut R) -> BallCheck {
    let g = geometry_stats(patch, level);
    let radius = 2.0 * g.big_r;
    let w = Window::Polygon(patch.window_polygon().to_vec());
    let (lo, hi) = w.bbox();
    let mut max_met = 0u64;
    let mut done = 0;
    let mut attempts = 0;
    while done < trials && attempts < trials * 1000 {
        attempts += 1;
        let c = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if w.margin(c) < radius + g.big_r {
            continue;
        }
        done += 1;
        max_met = max_met.max(tiles_meeting_disc(patch, level, c, radius) as u64);
    }
    BallCheck { radius, trials: done, max_met, k: g.k, ok: max_met <= g.k }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveCheck {
    pub diam: f64,
    #[serde(rename = "L")]
    pub l: u64,
    pub ok: bool,
}

/// Tiles of `level` meeting a polyline (a single vertex is a point).
pub fn tiles_meeting_polyline(patch: &HierarchicalPatch, level: u32, curve: &[Pt]) -> usize {
    let idx = patch.index(level);
    let mut hit: Vec<usize> = Vec::new();
    if curve.len() == 1 {
        let p = curve[0];
        hit.extend(idx.query(p, p).into_iter().filter(|&i| geom::contains_closed(patch.poly(level, i), p)));
    }
    for s in curve.windows(2) {
        let (a, b) = (s[0], s[1]);
        let lo = [a[0].min(b[0]), a[1].min(b[1])];
        let hi = [a[0].max(b[0]), a[1].max(b[1])];
        hit.extend(
            idx.query(lo, hi)
                .into_iter()
                .filter(|&i| geom::polygon_meets_segment(patch.poly(level, i), a, b, SNAP)),
        );
    }
    hit.sort_unstable();
    hit.dedup();
    hit.len()
}

/// `diam(curve) <= 2 R L(T^level, curve)`.
pub fn curve_diam_check(patch: &HierarchicalPatch, level: u32, curve: &[Pt]) -> CurveCheck {
    let g = geometry_stats(patch, level);
    let diam = geom::diameter(curve);
    let l = tiles_meeting_polyline(patch, level, curve) as u64;
    CurveCheck { diam, l, ok: diam <= 2.0 * g.big_r * l as f64 + SNAP }
}

/// A boundary component as a polyline-free facet set.
pub fn component_diam_check(patch: &HierarchicalPatch, level: u32, comp: &[Facet], delta: f64) -> CurveCheck {
    let g = geometry_stats(patch, level);
    let pts: Vec<Pt> = comp.iter().flat_map(|f| {
        let (a, b) = f.segment(delta);
        [a, b]
    }).collect();
    let diam = geom::diameter(&pts);
    let l = tiles_meeting(patch, level, comp, delta).len() as u64;
    CurveCheck { diam, l, ok: diam <= 2.0 * g.big_r * l as f64 + SNAP }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelRatioCheck {
    pub applicable: bool,
    pub l_fine: u64,
    pub l_coarse: u64,
    /// `(2K+1)(R_l / R_l') L_l`.
    pub bound: f64,
    pub ok: bool,
}

/// Compares the tiles of levels `l < l2` meeting one boundary component.
pub fn level_ratio_check(
    patch: &HierarchicalPatch,
    comp: &[Facet],
    delta: f64,
    l: u32,
    l2: u32,
) -> LevelRatioCheck {
    let g = geometry_stats(patch, l);
    let g2 = geometry_stats(patch, l2);
    let l_fine = tiles_meeting(patch, l, comp, delta).len() as u64;
    let l_coarse = tiles_meeting(patch, l2, comp, delta).len() as u64;
    let bound = (2 * g2.k + 1) as f64 * g.big_r / g2.big_r * l_fine as f64;
    let applicable = l2 > l && g2.big_r > g.big_r && g2.k < l_coarse && l_coarse <= l_fine;
    LevelRatioCheck { applicable, l_fine, l_coarse, bound, ok: !applicable || l_coarse as f64 <= bound }
}

/// Per-type constant `K0 = max_{l, i} |(M^l 1)_i - alpha mu^l w_i| / rho^l`
/// with `w` the type volumes, together with `alpha = <u,1>/<u,w>`.
pub fn tile_pf_constant(mat: &SubstitutionMatrix, rho: f64, l_max: u32) -> Result<(f64, f64)> {
    let rep = spectral_report(mat)?;
    if rho <= rep.r {
        return Err(Error::RhoTooSmall { rho, r: rep.r });
    }
    let n = mat.n;
    let w = &mat.volumes;
    let uw = dot(&rep.u, w);
    let alpha = rep.u.iter().sum::<f64>() / uw;
    let mut x: Vec<f64> = w.iter().map(|wi| 1.0 - alpha * wi).collect();
    let sup = |x: &[f64]| x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut k0 = sup(&x);
    for l in 1..=l_max {
        x = mat.mul_vec(&x);
        let c = dot(&rep.u, &x) / uw;
        x.iter_mut().zip(w).for_each(|(a, b)| *a -= c * b);
        k0 = k0.max(sup(&x) / rho.powi(l as i32));
    }
    debug_assert_eq!(x.len(), n);
    Ok((k0, alpha))
}

#[derive(Clone, Debug, Serialize)]
pub struct Discrepancy {
    /// `N(T, U)`: level-0 tiles inside `U`.
    pub n: u64,
    pub mu_u: f64,
    /// Volume of the union of level-0 tiles inside `U`.
    pub mu_ut: f64,
    pub alpha: f64,
    /// Density used on the left-hand sides (differs from `alpha` in controls).
    pub alpha_used: f64,
    pub rho: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    /// `L(T, dU)`.
    pub boundary: u64,
    /// `|N - alpha mu(U_T)|`.
    pub lhs_t: f64,
    /// `sum_l N(T^l, U_l) K0 rho^l`.
    pub syn3: f64,
    /// `K0 max_children sum_l L(T^{l+1}, dU) rho^l`.
    pub syn4: f64,
    pub k_hat: f64,
    /// `|mu(U) - mu(U_T)|` and its bound `(2R)^d L`.
    pub vol_gap: f64,
    pub vol_bound: f64,
    /// `|N - alpha mu(U)|`.
    pub lhs: f64,
    /// `(K_hat + alpha (2R)^d) L`.
    pub rhs: f64,
    /// `lhs / L`.
    pub empirical_k: f64,
    pub syn3_ok: bool,
    pub syn4_ok: bool,
    pub k_hat_ok: bool,
    pub vol_ok: bool,
    pub ok: bool,
}

/// Default `rho` halfway between `r(M)` and `lambda`.
pub fn default_rho(r: f64, lambda: f64) -> f64 {
    (r.max(0.0) + lambda) / 2.0
}

pub fn discrepancy_via_hierarchy(
    patch: &HierarchicalPatch,
    mat: &SubstitutionMatrix,
    dec: &HierDecomposition,
) -> Result<Discrepancy> {
    discrepancy_with(patch, mat, dec, 1.0)
}

/// As [`discrepancy_via_hierarchy`], evaluating the left-hand sides with
/// `alpha * alpha_scale` while every constant keeps the true `alpha`.
pub fn discrepancy_with(
    patch: &HierarchicalPatch,
    mat: &SubstitutionMatrix,
    dec: &HierDecomposition,
    alpha_scale: f64,
) -> Result<Discrepancy> {
    let rep = spectral_report(mat)?;
    if !rep.thm2_applicable {
        return Err(Error::NotApplicable { r: rep.r, lambda: rep.lambda });
    }
    let lambda = patch.rule.lambda_f64();
    let rho = default_rho(rep.r, lambda);
    let (k0, alpha) = tile_pf_constant(mat, rho, patch.depth.max(60))?;
    let g = geometry_stats(patch, 0);
    let d = patch.rule.dim() as i32;
    let a = alpha * alpha_scale;

    let n = dec.inside.len() as u64;
    let mu_u = dec.region.measure();
    let mu_ut: f64 = dec.inside.iter().map(|&i| geom::signed_area(patch.poly(0, i)).abs()).sum();
    let bl = dec.boundary[0];
    let lhs_t = (n as f64 - a * mu_ut).abs();
    let syn3: f64 = dec.parts.iter().map(|p| p.count as f64 * k0 * rho.powi(p.level as i32)).sum();
    let mc = mat.max_children() as f64;
    let syn4: f64 = k0
        * mc
        * dec
            .parts
            .iter()
            .map(|p| p.boundary_above.unwrap_or(u64::MAX) as f64 * rho.powi(p.level as i32))
            .sum::<f64>();
    let kk = (2 * g.k + 1) as f64;
    let bound = bound_report_l0(dec, g.k);
    let geo: f64 = (0..bound).map(|l| (rho / lambda).powi(l as i32)).sum();
    let k_hat = k0 * mc * kk * (kk * geo + n_t(g.k, g.big_r / g.r, lambda));
    let vol_gap = (mu_u - mu_ut).abs();
    let vol_bound = (2.0 * g.big_r).powi(d) * bl as f64;
    let lhs = (n as f64 - a * mu_u).abs();
    let rhs = (k_hat + alpha * (2.0 * g.big_r).powi(d)) * bl as f64;
    let tol = 1e-9 * (1.0 + n as f64);
    let syn3_ok = lhs_t <= syn3 + tol;
    let syn4_ok = syn3 <= syn4 + tol;
    let k_hat_ok = syn4 <= k_hat * bl as f64 + tol;
    let vol_ok = vol_gap <= vol_bound + tol;
    let ok = syn3_ok && syn4_ok && k_hat_ok && vol_ok && lhs <= rhs + tol;
    Ok(Discrepancy {
        n,
        mu_u,
        mu_ut,
        alpha,
        alpha_used: a,
        rho,
        k0,
        boundary: bl,
        lhs_t,
        syn3,
        syn4,
        k_hat,
        vol_gap,
        vol_bound,
        lhs,
        rhs,
        empirical_k: if bl > 0 { lhs / bl as f64 } else { 0.0 },
        syn3_ok,
        syn4_ok,
        k_hat_ok,
        vol_ok,
        ok,
    })
}

fn bound_report_l0(dec: &HierDecomposition, k: u64) -> u32 {
    (1..dec.boundary.len() as u32).rev().find(|&l| dec.boundary[l as usize] > k).unwrap_or(0)
}

/// Smallest power-of-two multiple of the unit at least `2R` such that every
/// grid cell inside the patch window contains a whole level-0 tile.
pub fn auto_delta(patch: &HierarchicalPatch) -> f64 {
    let g = geometry_stats(patch, 0);
    let w = Window::Polygon(patch.window_polygon().to_vec());
    let (lo, hi) = w.bbox();
    let mut delta = 1.0f64;
    while delta < 2.0 * g.big_r - SNAP {
        delta *= 2.0;
    }
    loop {
        let c0 = [(lo[0] / delta).floor() as i64, (lo[1] / delta).floor() as i64];
        let c1 = [(hi[0] / delta).ceil() as i64, (hi[1] / delta).ceil() as i64];
        let mut all = true;
        let mut any = false;
        'scan: for y in c0[1]..c1[1] {
            for x in c0[0]..c1[0] {
                let a = [x as f64 * delta, y as f64 * delta];
                let b = [a[0] + delta, a[1] + delta];
                if !w.contains_box(a, b) {
                    continue;
                }
                any = true;
                if tiles_inside(patch, 0, &GridRegion::new(delta, [[x, y]])).is_empty() {
                    all = false;
                    break 'scan;
                }
            }
        }
        if (all && any) || delta > hi[0] - lo[0] {
            return delta;
        }
        delta *= 2.0;
    }
}

/// Cells whose closed box lies in the patch window.
pub fn window_cells(patch: &HierarchicalPatch, delta: f64) -> Vec<Cell> {
    let w = Window::Polygon(patch.window_polygon().to_vec());
    let (lo, hi) = w.bbox();
    let c0 = [(lo[0] / delta).floor() as i64, (lo[1] / delta).floor() as i64];
    let c1 = [(hi[0] / delta).ceil() as i64, (hi[1] / delta).ceil() as i64];
    let mut out = Vec::new();
    for y in c0[1]..c1[1] {
        for x in c0[0]..c1[0] {
            let a = [x as f64 * delta, y as f64 * delta];
            if w.contains_box(a, [a[0] + delta, a[1] + delta]) {
                out.push([x, y]);
            }
        }
    }
    out
}

/// Random simply connected region of `cells` cells that lies in the patch
/// and passes the fitting check; `None` after `tries` rejections.
pub fn random_fitted_region<R: Rng>(
    rng: &mut R,
    patch: &HierarchicalPatch,
    delta: f64,
    cells: usize,
    tries: usize,
) -> Option<GridRegion> {
    let avail = window_cells(patch, delta);
    if avail.is_empty() {
        return None;
    }
    let lo = [avail.iter().map(|c| c[0]).min()?, avail.iter().map(|c| c[1]).min()?];
    let hi = [avail.iter().map(|c| c[0]).max()?, avail.iter().map(|c| c[1]).max()?];
    let g = geometry_stats(patch, 0);
    for _ in 0..tries {
        let origin = avail[rng.gen_range(0..avail.len())];
        let u = random_simple_region(rng, delta, cells, origin, lo, hi);
        if !patch_covers(patch, &u) {
            continue;
        }
        if check_fits(patch, 0, &g, &u).ok {
            return Some(u);
        }
    }
    None
}
