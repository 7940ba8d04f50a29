use serde::Serialize;

use super::cyclo::{ring_order, FieldCoord, Isometry};
use crate::error::{Error, Result};
use crate::geom::{self, Pt};

/// A prototile: simple CCW polygon with exact vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prototile {
    pub id: String,
    pub vertices: Vec<FieldCoord>,
    pub color: Option<String>,
}

/// Placement of a child, with the rotation expressed in units of
/// `2 pi / field order` of the rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsometrySpec {
    pub rotation_index: u32,
    pub reflect: bool,
    pub translation: FieldCoord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChildSpec {
    pub prototile: usize,
    pub placement: IsometrySpec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionRule {
    pub name: String,
    /// Declared cyclotomic order (1, 4, 5, 10 or 12).
    pub field: u32,
    pub lambda: FieldCoord,
    pub prototiles: Vec<Prototile>,
    /// `children[i]` decomposes `lambda * prototiles[i]`.
    pub children: Vec<Vec<ChildSpec>>,
}

impl SubstitutionRule {
    pub fn ring(&self) -> u8 {
        self.lambda.order()
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.to_f64()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.prototiles
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPrototile(id.to_string()))
    }

    /// Point group of the rule: rotations by `2 pi k / field`, reflections
    /// unless the field order is 1 (translations only).
    pub fn allows_reflection(&self) -> bool {
        self.field > 1
    }

    pub fn rotation_count(&self) -> u32 {
        self.field.max(1)
    }

    pub fn isometry(&self, spec: &IsometrySpec) -> Isometry {
        let ring = self.ring() as u32;
        let step = ring / self.rotation_count().max(1);
        Isometry {
            rot: ((spec.rotation_index % self.rotation_count()) * step % ring) as u8,
            refl: spec.reflect,
            t: spec.translation,
        }
    }

    /// Exact vertices of `g(lambda^scale * p)`, kept counter-clockwise.
    pub fn placed_vertices(&self, proto: usize, g: &Isometry, scale: &FieldCoord) -> Vec<FieldCoord> {
        let mut v: Vec<FieldCoord> =
            self.prototiles[proto].vertices.iter().map(|&z| g.apply(*scale * z)).collect();
        if g.refl {
            v.reverse();
        }
        v
    }

    pub fn prototile_polygon(&self, proto: usize) -> Vec<Pt> {
        self.prototiles[proto].vertices.iter().map(|z| z.to_point()).collect()
    }

    pub fn prototile_area(&self, proto: usize) -> f64 {
        geom::signed_area(&self.prototile_polygon(proto))
    }

    pub fn lambda_pow(&self, e: u32) -> FieldCoord {
        self.lambda.pow(e)
    }
}

/// `4 i * (signed area)` of an exact polygon, as a ring element.
pub fn exact_area_form(v: &[FieldCoord]) -> FieldCoord {
    let n = v.len();
    let mut s = FieldCoord::zero(v[0].order());
    for i in 0..n {
        s = s + v[i].conj() * v[(i + 1) % n];
    }
    s - s.conj()
}

#[derive(Clone, Debug, Serialize)]
pub struct PrototileReport {
    pub id: String,
    pub simple: bool,
    pub positive_area: bool,
    /// Exact identity: sum of child areas = lambda^d * area.
    pub area_identity: bool,
    pub expected_area: f64,
    pub child_area_sum: f64,
    pub area_deficit: f64,
    /// Child pairs `(a, b, overlap area)` with overlapping interiors.
    pub overlaps: Vec<(usize, usize, f64)>,
    /// Children not contained in the inflated prototile.
    pub containment_failures: Vec<usize>,
}

impl PrototileReport {
    pub fn ok(&self) -> bool {
        self.simple
            && self.positive_area
            && self.area_identity
            && self.overlaps.is_empty()
            && self.containment_failures.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub lambda_ok: bool,
    pub placements_ok: bool,
    pub prototiles: Vec<PrototileReport>,
    pub valid: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut out = Vec::new();
        if !self.lambda_ok {
            out.push("dilation factor must be real and > 1".to_string());
        }
        if !self.placements_ok {
            out.push("child placement outside the rule's point group".to_string());
        }
        for p in &self.prototiles {
            if !p.ok() {
                out.push(format!(
                    "prototile `{}`: simple={} positive_area={} area_identity={} deficit={:.3e} overlaps={} containment_failures={}",
                    p.id,
                    p.simple,
                    p.positive_area,
                    p.area_identity,
                    p.area_deficit,
                    p.overlaps.len(),
                    p.containment_failures.len()
                ));
            }
        }
        if out.is_empty() {
            "valid".into()
        } else {
            out.join("; ")
        }
    }
}

pub fn validate_rule(rule: &SubstitutionRule) -> ValidationReport {
    let lam = rule.lambda;
    let lambda_ok = lam == lam.conj() && lam.to_f64() > 1.0;
    let placements_ok = ring_order(rule.field).is_ok_and(|r| r == rule.ring())
        && rule.children.len() == rule.prototiles.len()
        && rule.children.iter().flatten().all(|c| {
            c.prototile < rule.prototiles.len()
                && (rule.allows_reflection() || !c.placement.reflect)
                && (rule.field > 1 || c.placement.rotation_index == 0)
        });
    let one = FieldCoord::integer(rule.ring(), 1);
    let mut prototiles = Vec::new();
    for (i, proto) in rule.prototiles.iter().enumerate() {
        let poly = rule.prototile_polygon(i);
        let simple = geom::is_simple(&poly);
        let area = geom::signed_area(&poly);
        let positive_area = area > 0.0;
        let lam2 = lam * lam;
        let expected_form = lam2 * exact_area_form(&proto.vertices);
        let big: Vec<Pt> = rule
            .placed_vertices(i, &Isometry::identity(rule.ring()), &lam)
            .iter()
            .map(|z| z.to_point())
            .collect();
        let scale2 = {
            let (lo, hi) = geom::bbox(&big);
            ((hi[0] - lo[0]).max(hi[1] - lo[1])).powi(2).max(1.0)
        };
        let tol = 1e-9 * scale2;
        let kids = rule.children.get(i).cloned().unwrap_or_default();
        let mut child_form = FieldCoord::zero(rule.ring());
        let mut polys = Vec::new();
        let mut child_area_sum = 0.0;
        for c in &kids {
            if c.prototile >= rule.prototiles.len() {
                continue;
            }
            let g = rule.isometry(&c.placement);
            let v = rule.placed_vertices(c.prototile, &g, &one);
            child_form = child_form + exact_area_form(&v);
            let p: Vec<Pt> = v.iter().map(|z| z.to_point()).collect();
            child_area_sum += geom::signed_area(&p);
            polys.push(p);
        }
        let mut overlaps = Vec::new();
        for a in 0..polys.len() {
            for b in a + 1..polys.len() {
                let ov = geom::intersection_area(&polys[a], &polys[b]);
                if ov > tol {
                    overlaps.push((a, b, ov));
                }
            }
        }
        let containment_failures = polys
            .iter()
            .enumerate()
            .filter(|(_, p)| geom::signed_area(p) - geom::intersection_area(p, &big) > tol)
            .map(|(k, _)| k)
            .collect();
        let expected_area = geom::signed_area(&big);
        prototiles.push(PrototileReport {
            id: proto.id.clone(),
            simple,
            positive_area,
            area_identity: child_form == expected_form,
            expected_area,
            child_area_sum,
            area_deficit: expected_area - child_area_sum,
            overlaps,
            containment_failures,
        });
    }
    let valid = lambda_ok && placements_ok && prototiles.iter().all(|p| p.ok());
    ValidationReport { lambda_ok, placements_ok, prototiles, valid }
}
