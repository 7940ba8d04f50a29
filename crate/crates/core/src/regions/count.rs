use std::collections::BTreeSet;

use serde::Serialize;

use super::region::{Cell, Facet, GridRegion};
use crate::error::{Error, Result};
use crate::geom::{self, Pt, SNAP};
use crate::subst::{DeloneSetWindow, HierarchicalPatch, PointGrid, Window};

/// Grid index of a coordinate: `floor(x / delta)` with values within
/// [`SNAP`] of a grid line snapped onto it (lower-closed cells).
#[inline]
pub fn cell_index(x: f64, delta: f64) -> i64 {
    let q = x / delta;
    let r = q.round();
    if (q - r).abs() * delta < SNAP {
        r as i64
    } else {
        q.floor() as i64
    }
}

pub fn cell_of(p: Pt, delta: f64) -> Cell {
    [cell_index(p[0], delta), cell_index(p[1], delta)]
}

pub fn region_in_window(window: &Window, u: &GridRegion) -> bool {
    if let Window::Rect { .. } = window {
        let (lo, hi) = u.bbox();
        return window.contains_box(lo, hi);
    }
    let (lo, hi) = u.bbox();
    if window.contains_box(lo, hi) {
        return true;
    }
    u.cells().iter().all(|&c| {
        let (a, b) = u.cell_box(c);
        window.contains_box(a, b)
    })
}

/// Point set prepared for repeated counting queries.
pub struct PointCounter<'a> {
    pub x: &'a DeloneSetWindow,
    grid: PointGrid,
}

impl<'a> PointCounter<'a> {
    pub fn new(x: &'a DeloneSetWindow) -> Self {
        let (lo, hi) = x.window.bbox();
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        let n = x.points.len().max(1) as f64;
        let cell = (side / n.sqrt()).max(0.5);
        PointCounter { x, grid: PointGrid::new(&x.points, cell) }
    }

    /// Points in the half-open cell `c` of size `delta`.
    pub fn count_cell(&self, c: Cell, delta: f64) -> u64 {
        let lo = [c[0] as f64 * delta - SNAP, c[1] as f64 * delta - SNAP];
        let hi = [(c[0] + 1) as f64 * delta + SNAP, (c[1] + 1) as f64 * delta + SNAP];
        self.grid
            .in_box(lo, hi)
            .into_iter()
            .filter(|&i| cell_of(self.x.points[i], delta) == c)
            .count() as u64
    }

    /// Points in the half-open box `[lo, lo + side)^2` (snapped).
    pub fn count_box(&self, lo: Pt, side: f64) -> u64 {
        let inside = |v: f64, a: f64| {
            let s = v - a;
            let below = s < 0.0 && s.abs() >= SNAP;
            let above = s >= side || (side - s).abs() < SNAP;
            !below && !above
        };
        self.grid
            .in_box([lo[0] - SNAP, lo[1] - SNAP], [lo[0] + side + SNAP, lo[1] + side + SNAP])
            .into_iter()
            .filter(|&i| {
                let p = self.x.points[i];
                inside(p[0], lo[0]) && inside(p[1], lo[1])
            })
            .count() as u64
    }

    /// `N(X, U)` over the half-open union of cells.
    pub fn count(&self, u: &GridRegion) -> Result<u64> {
        if !region_in_window(&self.x.window, u) {
            return Err(Error::RegionOutsideWindow);
        }
        Ok(self.count_unchecked(u))
    }

    pub fn count_unchecked(&self, u: &GridRegion) -> u64 {
        let (lo, hi) = u.bbox();
        let cand = self.grid.in_box([lo[0] - SNAP, lo[1] - SNAP], [hi[0] + SNAP, hi[1] + SNAP]);
        if cand.len() < u.len() * 4 {
            cand.into_iter().filter(|&i| u.contains(cell_of(self.x.points[i], u.delta))).count() as u64
        } else {
            u.cells().iter().map(|&c| self.count_cell(c, u.delta)).sum()
        }
    }
}

pub fn count_points(x: &DeloneSetWindow, u: &GridRegion) -> Result<u64> {
    PointCounter::new(x).count(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TileCounts {
    /// `N(T^l, U)`: tiles contained in the closed region.
    pub inside: u64,
    /// `L(T^l, dU)`: tiles meeting the boundary.
    pub boundary: u64,
}

/// Whether a polygon lies in the closed union of the cells of `u`: every
/// cell it overlaps with positive area must belong to `u`.
pub fn polygon_in_region(poly: &[Pt], u: &GridRegion) -> bool {
    let d = u.delta;
    let (lo, hi) = geom::bbox(poly);
    let (ulo, uhi) = u.bbox();
    if lo[0] < ulo[0] - SNAP || lo[1] < ulo[1] - SNAP || hi[0] > uhi[0] + SNAP || hi[1] > uhi[1] + SNAP {
        return false;
    }
    let c0 = cell_of([lo[0] + SNAP, lo[1] + SNAP], d);
    let c1 = cell_of([hi[0] - SNAP, hi[1] - SNAP], d);
    let eps = 1e-9 * d * d;
    for y in c0[1]..=c1[1] {
        for x in c0[0]..=c1[0] {
            if u.contains([x, y]) {
                continue;
            }
            let (a, b) = u.cell_box([x, y]);
            if geom::signed_area(&geom::clip_rect(poly, a, b)).abs() > eps {
                return false;
            }
        }
    }
    true
}

/// Whether a closed polygon meets a facet segment.
pub fn polygon_meets_facet(poly: &[Pt], f: &Facet, delta: f64) -> bool {
    let (a, b) = f.segment(delta);
    geom::polygon_meets_segment(poly, a, b, SNAP)
}

/// Tiles of one level meeting the given facets, as sorted indices.
pub fn tiles_meeting(patch: &HierarchicalPatch, level: u32, facets: &[Facet], delta: f64) -> BTreeSet<usize> {
    let idx = patch.index(level);
    let mut out = BTreeSet::new();
    for f in facets {
        let (a, b) = f.segment(delta);
        let lo = [a[0].min(b[0]), a[1].min(b[1])];
        let hi = [a[0].max(b[0]), a[1].max(b[1])];
        for i in idx.query(lo, hi) {
            if !out.contains(&i) && geom::polygon_meets_segment(patch.poly(level, i), a, b, SNAP) {
                out.insert(i);
            }
        }
    }
    out
}

/// Tiles of one level contained in the closed region, as sorted indices.
pub fn tiles_inside(patch: &HierarchicalPatch, level: u32, u: &GridRegion) -> Vec<usize> {
    let (lo, hi) = u.bbox();
    let idx = patch.index(level);
    idx.query(lo, hi)
        .into_iter()
        .filter(|&i| {
            let (a, b) = idx.bbox_of(i);
            a[0] >= lo[0] - SNAP && a[1] >= lo[1] - SNAP && b[0] <= hi[0] + SNAP && b[1] <= hi[1] + SNAP
        })
        .filter(|&i| polygon_in_region(patch.poly(level, i), u))
        .collect()
}

pub fn patch_covers(patch: &HierarchicalPatch, u: &GridRegion) -> bool {
    region_in_window(&Window::Polygon(patch.window_polygon().to_vec()), u)
}

pub fn count_tiles(patch: &HierarchicalPatch, level: u32, u: &GridRegion) -> Result<TileCounts> {
    if !patch_covers(patch, u) {
        return Err(Error::RegionOutsidePatch);
    }
    Ok(TileCounts {
        inside: tiles_inside(patch, level, u).len() as u64,
        boundary: tiles_meeting(patch, level, u.boundary_facets(), u.delta).len() as u64,
    })
}

/// Point/tile sandwich and the facet bound on one region.
#[derive(Clone, Debug, Serialize)]
pub struct CountChecks {
    pub points: u64,
    pub tiles_inside: u64,
    pub boundary: u64,
    /// `0 <= N(X, U) - N(T, U) <= L(T, dU)`.
    pub sandwich_ok: bool,
    pub facets: usize,
    /// `K (1/(2R) + 1) * #facets`.
    pub facet_bound: f64,
    pub facet_ok: bool,
}

impl CountChecks {
    pub fn ok(&self) -> bool {
        self.sandwich_ok && self.facet_ok
    }
}

pub fn count_checks(
    patch: &HierarchicalPatch,
    counter: &PointCounter,
    g: &crate::subst::GeometryStats,
    u: &GridRegion,
) -> Result<CountChecks> {
    let t = count_tiles(patch, 0, u)?;
    let points = counter.count(u)?;
    let facets = u.boundary_facets().len();
    let facet_bound = g.k as f64 * (1.0 / (2.0 * g.big_r) + 1.0) * facets as f64;
    Ok(CountChecks {
        points,
        tiles_inside: t.inside,
        boundary: t.boundary,
        sandwich_ok: points >= t.inside && points - t.inside <= t.boundary,
        facets,
        facet_bound,
        facet_ok: t.boundary as f64 <= facet_bound,
    })
}
