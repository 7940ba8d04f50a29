use serde::Serialize;

use super::patch::HierarchicalPatch;
use super::rule::SubstitutionRule;
use crate::geom;

/// `r`, `R` and `K = floor(4^d R^d / r^d)` of the tiling `T^level`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometryStats {
    pub level: u32,
    /// Smallest inradius over the prototiles.
    pub r: f64,
    /// Largest half-diameter over the prototiles.
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "K")]
    pub k: u64,
}

fn k_of(r: f64, big_r: f64, d: i32) -> u64 {
    let x = (4.0 * big_r / r).powi(d);
    (x + 1e-9).floor() as u64
}

pub fn rule_geometry(rule: &SubstitutionRule, level: u32) -> GeometryStats {
    let mut r = f64::INFINITY;
    let mut big_r: f64 = 0.0;
    for i in 0..rule.prototiles.len() {
        let poly = rule.prototile_polygon(i);
        r = r.min(geom::inradius(&poly, 1e-12).0);
        big_r = big_r.max(geom::diameter(&poly) / 2.0);
    }
    // K is evaluated at level 0 so that it is identical across levels
    let k = k_of(r, big_r, rule.dim() as i32);
    let s = rule.lambda_f64().powi(level as i32);
    GeometryStats { level, r: r * s, big_r: big_r * s, k }
}

pub fn geometry_stats(patch: &HierarchicalPatch, level: u32) -> GeometryStats {
    rule_geometry(&patch.rule, level)
}
