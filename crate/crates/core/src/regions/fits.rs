use serde::Serialize;

use super::count::{tiles_inside, tiles_meeting};
use super::region::{Facet, GridRegion};
use crate::geom;
use crate::subst::{GeometryStats, HierarchicalPatch};

/// Sufficient grid size `2 R (K + 1)` for the fitting conditions.
pub fn fitting_delta(g: &GeometryStats) -> f64 {
    2.0 * g.big_r * (g.k as f64 + 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentFit {
    pub facets: usize,
    /// Tiles meeting the component.
    pub meeting: u64,
    /// Tiles contained in the component (always 0 for a curve; reported
    /// for completeness).
    pub contained: u64,
    pub exceeds_k: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitsReport {
    pub delta: f64,
    pub k: u64,
    /// Every cell of the region contains a whole tile.
    pub cells_contain_tile: bool,
    pub min_tiles_per_cell: u64,
    pub components: Vec<ComponentFit>,
    /// Every boundary component meets more than `K` tiles.
    pub components_exceed_k: bool,
    /// No tile meets two distinct boundary components.
    pub components_separated: bool,
    pub min_component_distance: f64,
    pub ok: bool,
}

fn facet_dist(a: &Facet, b: &Facet, d: f64) -> f64 {
    let (p, q) = a.segment(d);
    let (r, s) = b.segment(d);
    geom::point_segment_dist(p, r, s)
        .min(geom::point_segment_dist(q, r, s))
        .min(geom::point_segment_dist(r, p, q))
        .min(geom::point_segment_dist(s, p, q))
}

/// Direct check of the three fitting conditions for one region.
pub fn check_fits(patch: &HierarchicalPatch, level: u32, g: &GeometryStats, u: &GridRegion) -> FitsReport {
    let d = u.delta;
    let min_tiles_per_cell = u
        .cells()
        .iter()
        .map(|&c| tiles_inside(patch, level, &GridRegion::new(d, [c])).len() as u64)
        .min()
        .unwrap_or(0);
    let comps = u.boundary_components();
    let sets: Vec<_> = comps.iter().map(|c| tiles_meeting(patch, level, c, d)).collect();
    let components: Vec<ComponentFit> = comps
        .iter()
        .zip(&sets)
        .map(|(c, s)| ComponentFit {
            facets: c.len(),
            meeting: s.len() as u64,
            contained: 0,
            exceeds_k: s.len() as u64 > g.k,
        })
        .collect();
    let mut separated = true;
    let mut min_dist = f64::INFINITY;
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if sets[i].intersection(&sets[j]).next().is_some() {
                separated = false;
            }
            for a in &comps[i] {
                for b in &comps[j] {
                    min_dist = min_dist.min(facet_dist(a, b, d));
                }
            }
        }
    }
    let cells_contain_tile = min_tiles_per_cell >= 1;
    let components_exceed_k = components.iter().all(|c| c.exceeds_k);
    FitsReport {
        delta: d,
        k: g.k,
        cells_contain_tile,
        min_tiles_per_cell,
        components,
        components_exceed_k,
        components_separated: separated,
        min_component_distance: min_dist,
        ok: cells_contain_tile && components_exceed_k && separated,
    }
}
