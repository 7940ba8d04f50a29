//! Floating-point planar geometry on evaluated tile coordinates.
//!
//! Polygons are vertex lists, counter-clockwise, without repeated closing
//! vertex. All closed-set predicates use the absolute snapping tolerance
//! [`SNAP`]: tangential contact counts as intersection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub type Pt = [f64; 2];

/// Absolute tolerance for point/segment predicates on evaluated coordinates.
pub const SNAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

#[inline]
pub fn sub(a: Pt, b: Pt) -> Pt {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
/// Euclidean distance in any dimension.
pub fn dist_n(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

pub fn signed_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

/// Area centroid (shoelace formula).
pub fn centroid(poly: &[Pt]) -> Pt {
    let n = poly.len();
    // shift to the first vertex to limit cancellation far from the origin
    let o = poly[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = sub(poly[i], o);
        let q = sub(poly[(i + 1) % n], o);
        let c = p[0] * q[1] - q[0] * p[1];
        a2 += c;
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
}

pub fn bbox(poly: &[Pt]) -> (Pt, Pt) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

pub fn diameter(poly: &[Pt]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in poly.iter().enumerate() {
        for b in &poly[i + 1..] {
            d = d.max(dist(*a, *b));
        }
    }
    d
}

pub fn point_segment_dist(p: Pt, a: Pt, b: Pt) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

pub fn locate(p: Pt, poly: &[Pt], eps: f64) -> Location {
    let n = poly.len();
    for i in 0..n {
        if point_segment_dist(p, poly[i], poly[(i + 1) % n]) <= eps {
            return Location::Boundary;
        }
    }
    // crossing number
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

pub fn contains_closed(poly: &[Pt], p: Pt) -> bool {
    locate(p, poly, SNAP) != Location::Outside
}

/// Distance from `p` to the closed polygon (zero inside).
pub fn polygon_point_dist(poly: &[Pt], p: Pt) -> f64 {
    if locate(p, poly, 0.0) != Location::Outside {
        return 0.0;
    }
    boundary_dist(poly, p)
}

pub fn boundary_dist(poly: &[Pt], p: Pt) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| point_segment_dist(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Whether segment `pq` meets the closed box `[lo, hi]` (Liang-Barsky).
pub fn segment_meets_box(p: Pt, q: Pt, lo: Pt, hi: Pt) -> bool {
    if hi[0] < lo[0] || hi[1] < lo[1] {
        return false;
    }
    let d = sub(q, p);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        if d[k] == 0.0 {
            if p[k] < lo[k] || p[k] > hi[k] {
                return false;
            }
            continue;
        }
        let (mut a, mut b) = ((lo[k] - p[k]) / d[k], (hi[k] - p[k]) / d[k]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Closed segment intersection with tolerance `eps`.
pub fn segments_meet(a: Pt, b: Pt, c: Pt, d: Pt, eps: f64) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    point_segment_dist(a, c, d) <= eps
        || point_segment_dist(b, c, d) <= eps
        || point_segment_dist(c, a, b) <= eps
        || point_segment_dist(d, a, b) <= eps
}

/// Does the closed polygon meet the closed segment `[a, b]`?
pub fn polygon_meets_segment(poly: &[Pt], a: Pt, b: Pt, eps: f64) -> bool {
    if locate(a, poly, eps) != Location::Outside || locate(b, poly, eps) != Location::Outside {
        return true;
    }
    let n = poly.len();
    (0..n).any(|i| segments_meet(poly[i], poly[(i + 1) % n], a, b, eps))
}

/// Sutherland–Hodgman clipping of an arbitrary polygon by a convex CCW one.
pub fn clip_convex(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    let mut out: Vec<Pt> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % m];
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let p = input[j];
            let q = input[(j + 1) % k];
            let cp = cross(a, b, p);
            let cq = cross(a, b, q);
            if cp >= 0.0 {
                out.push(p);
            }
            if (cp >= 0.0) != (cq >= 0.0) {
                let t = cp / (cp - cq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

pub fn clip_rect(subject: &[Pt], lo: Pt, hi: Pt) -> Vec<Pt> {
    let rect = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    clip_convex(subject, &rect)
}

/// Ear-clipping triangulation of a simple CCW polygon.
pub fn triangulate(poly: &[Pt]) -> Vec<[Pt; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len().saturating_sub(2));
    let scale = {
        let (lo, hi) = bbox(poly);
        (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0)
    };
    let eps = 1e-12 * scale * scale;
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            let turn = cross(a, b, c);
            if turn < -eps {
                continue;
            }
            if turn.abs() <= eps {
                // collinear vertex: drop it
                idx.remove(i);
                clipped = true;
                break;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                cross(a, b, p) >= -eps && cross(b, c, p) >= -eps && cross(c, a, p) >= -eps
            });
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        let t = [poly[idx[0]], poly[idx[1]], poly[idx[2]]];
        if cross(t[0], t[1], t[2]).abs() > eps {
            tris.push(t);
        }
    }
    tris
}

/// Area of the intersection of two simple polygons.
pub fn intersection_area(p: &[Pt], q: &[Pt]) -> f64 {
    let (plo, phi) = bbox(p);
    let (qlo, qhi) = bbox(q);
    if plo[0] > qhi[0] || qlo[0] > phi[0] || plo[1] > qhi[1] || qlo[1] > phi[1] {
        return 0.0;
    }
    let tp = triangulate(p);
    let tq = triangulate(q);
    let mut s = 0.0;
    for a in &tp {
        for b in &tq {
            let c = clip_convex(a, b);
            if c.len() >= 3 {
                s += signed_area(&c);
            }
        }
    }
    s
}

/// True iff no two non-adjacent edges meet.
pub fn is_simple(poly: &[Pt]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_meet(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n], 0.0) {
                return false;
            }
        }
    }
    true
}

struct Cell {
    c: Pt,
    h: f64,
    d: f64,
    max: f64,
}

impl Cell {
    fn new(c: Pt, h: f64, poly: &[Pt]) -> Self {
        let b = boundary_dist(poly, c);
        let d = if locate(c, poly, 0.0) == Location::Outside { -b } else { b };
        Cell { c, h, d, max: d + h * std::f64::consts::SQRT_2 }
    }
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.max == o.max
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.max.total_cmp(&o.max)
    }
}

/// Radius of the largest disc inside the polygon, with its centre
/// (pole of inaccessibility, branch-and-bound over a quadtree).
pub fn inradius(poly: &[Pt], precision: f64) -> (f64, Pt) {
    convex_inradius(poly).unwrap_or_else(|| inradius_bb(poly, precision))
}

fn inradius_bb(poly: &[Pt], precision: f64) -> (f64, Pt) {
    let (lo, hi) = bbox(poly);
    let size = (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let mut h = size / 2.0;
    let mut heap = BinaryHeap::new();
    let mut x = lo[0];
    while x < hi[0] {
        let mut y = lo[1];
        while y < hi[1] {
            heap.push(Cell::new([x + h, y + h], h, poly));
            y += 2.0 * h;
        }
        x += 2.0 * h;
    }
    let mut best = Cell::new(centroid(poly), 0.0, poly);
    while let Some(cell) = heap.pop() {
        if cell.d > best.d {
            best = Cell { c: cell.c, h: 0.0, d: cell.d, max: cell.d };
        }
        if cell.max - best.d <= precision {
            continue;
        }
        h = cell.h / 2.0;
        for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            heap.push(Cell::new([cell.c[0] + dx * h, cell.c[1] + dy * h], h, poly));
        }
    }
    (best.d, best.c)
}

fn is_convex(poly: &[Pt]) -> bool {
    let n = poly.len();
    let s = signed_area(poly).signum();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) * s >= -1e-12)
}

// maximize t subject to dist(x, edge line) >= t; the optimum sits at a vertex
// of the (x, t) polytope, so every triple of edge constraints is tried
fn convex_inradius(poly: &[Pt]) -> Option<(f64, Pt)> {
    let n = poly.len();
    if n < 3 || !is_convex(poly) {
        return None;
    }
    let s = signed_area(poly).signum();
    let rows: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let l = dist(a, b);
            // inward unit normal: n.x - c >= 0 inside
            let nx = -s * (b[1] - a[1]) / l;
            let ny = s * (b[0] - a[0]) / l;
            [nx, ny, nx * a[0] + ny * a[1]]
        })
        .collect();
    let mut best: Option<(f64, Pt)> = None;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (rows[i], rows[j], rows[k]);
                // n.x - t = c for the three rows
                let m = [[a[0], a[1], -1.0], [b[0], b[1], -1.0], [c[0], c[1], -1.0]];
                let det = det3(m);
                if det.abs() < 1e-12 {
                    continue;
                }
                let r = [a[2], b[2], c[2]];
                let col = |q: usize| {
                    let mut mm = m;
                    for (row, v) in mm.iter_mut().zip(r) {
                        row[q] = v;
                    }
                    det3(mm) / det
                };
                let (x, t) = ([col(0), col(1)], col(2));
                let feasible = rows.iter().all(|e| e[0] * x[0] + e[1] * x[1] - e[2] >= t - 1e-12 * (1.0 + t.abs()));
                if feasible && t > 0.0 && best.is_none_or(|(bt, _)| t > bt) {
                    best = Some((t, x));
                }
            }
        }
    }
    best
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
