use rand::Rng;
use serde::Serialize;

use super::patch::HierarchicalPatch;
use super::rule::exact_area_form;
use super::stats::geometry_stats;
use crate::geom::{self, Pt};

/// Region in which a finite point set is known completely.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Window {
    Rect { lo: Pt, hi: Pt },
    Polygon(Vec<Pt>),
}

impl Window {
    pub fn bbox(&self) -> (Pt, Pt) {
        match self {
            Window::Rect { lo, hi } => (*lo, *hi),
            Window::Polygon(p) => geom::bbox(p),
        }
    }

    /// Whether the closed box `[lo, hi]` lies in the window.
    pub fn contains_box(&self, lo: Pt, hi: Pt) -> bool {
        let e = geom::SNAP;
        match self {
            Window::Rect { lo: a, hi: b } => {
                lo[0] >= a[0] - e && lo[1] >= a[1] - e && hi[0] <= b[0] + e && hi[1] <= b[1] + e
            }
            Window::Polygon(p) => {
                let (a, b) = geom::bbox(p);
                if lo[0] < a[0] - e || lo[1] < a[1] - e || hi[0] > b[0] + e || hi[1] > b[1] + e {
                    return false;
                }
                let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
                if !corners.iter().all(|&c| geom::contains_closed(p, c)) {
                    return false;
                }
                // corners inside a simple polygon: the box is inside unless
                // an edge enters its interior
                let (a, b) = ([lo[0] + e, lo[1] + e], [hi[0] - e, hi[1] - e]);
                let n = p.len();
                !(0..n).any(|i| geom::segment_meets_box(p[i], p[(i + 1) % n], a, b))
            }
        }
    }

    pub fn contains(&self, p: Pt) -> bool {
        match self {
            Window::Rect { lo, hi } => p[0] >= lo[0] && p[1] >= lo[1] && p[0] <= hi[0] && p[1] <= hi[1],
            Window::Polygon(poly) => geom::contains_closed(poly, p),
        }
    }

    /// Radius of the largest closed disc centred at `p` inside the window
    /// (negative outside).
    pub fn margin(&self, p: Pt) -> f64 {
        match self {
            Window::Rect { lo, hi } => (p[0] - lo[0]).min(p[1] - lo[1]).min(hi[0] - p[0]).min(hi[1] - p[1]),
            Window::Polygon(poly) => {
                let d = geom::boundary_dist(poly, p);
                if geom::contains_closed(poly, p) {
                    d
                } else {
                    -d
                }
            }
        }
    }

    pub fn translated(&self, v: Pt) -> Window {
        let t = |p: &Pt| [p[0] + v[0], p[1] + v[1]];
        match self {
            Window::Rect { lo, hi } => Window::Rect { lo: t(lo), hi: t(hi) },
            Window::Polygon(p) => Window::Polygon(p.iter().map(t).collect()),
        }
    }
}

/// Finite piece of a Delone set together with the window it is complete in.
#[derive(Clone, Debug, Serialize)]
pub struct DeloneSetWindow {
    pub points: Vec<Pt>,
    pub window: Window,
    /// Packing radius of the underlying tiling, when known.
    pub r: Option<f64>,
    /// Covering radius of the underlying tiling, when known.
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
}

/// Area centroid of an exact polygon: the shoelace sums are formed in the
/// ring and only the final quotient is evaluated.
pub fn exact_centroid(v: &[super::cyclo::FieldCoord]) -> Pt {
    let n = v.len();
    let mut num = super::cyclo::FieldCoord::zero(v[0].order());
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let w = a.conj() * b;
        num = num + (a + b) * (w - w.conj());
    }
    let den = exact_area_form(v);
    // num = 2i * sum (a + b) cross(a, b), den = 2i * sum cross(a, b)
    let p = num.to_point();
    let d = 3.0 * den.to_point()[1];
    [p[1] / d, -p[0] / d]
}

/// One point per level-0 tile, at its area centroid.
pub fn delone_set(patch: &HierarchicalPatch) -> DeloneSetWindow {
    let n = patch.tiles(0).len();
    let points = crate::par::Exec::default().map_range(n, |i| exact_centroid(&patch.exact_vertices(0, i)));
    let g = geometry_stats(patch, 0);
    DeloneSetWindow {
        points,
        window: Window::Polygon(patch.window_polygon().to_vec()),
        r: Some(g.r),
        big_r: Some(g.big_r),
    }
}

impl DeloneSetWindow {
    pub fn from_points(points: Vec<Pt>, window: Window) -> Self {
        DeloneSetWindow { points, window, r: None, big_r: None }
    }

    /// `spacing * Z^2 + offset` restricted to the closed box `[lo, hi]`.
    pub fn lattice(spacing: f64, offset: Pt, lo: Pt, hi: Pt) -> Self {
        let mut points = Vec::new();
        let i0 = ((lo[0] - offset[0]) / spacing).ceil() as i64;
        let i1 = ((hi[0] - offset[0]) / spacing).floor() as i64;
        let j0 = ((lo[1] - offset[1]) / spacing).ceil() as i64;
        let j1 = ((hi[1] - offset[1]) / spacing).floor() as i64;
        for j in j0..=j1 {
            for i in i0..=i1 {
                points.push([offset[0] + i as f64 * spacing, offset[1] + j as f64 * spacing]);
            }
        }
        DeloneSetWindow {
            points,
            window: Window::Rect { lo, hi },
            r: Some(spacing / 2.0),
            big_r: Some(spacing * std::f64::consts::FRAC_1_SQRT_2),
        }
    }

    /// Each point moved by an independent uniform offset in `[0, amp]^2`.
    pub fn jittered<R: Rng>(&self, amp: f64, rng: &mut R) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| [p[0] + rng.gen::<f64>() * amp, p[1] + rng.gen::<f64>() * amp])
            .collect();
        DeloneSetWindow { points, window: self.window.clone(), r: None, big_r: None }
    }

    pub fn translated(&self, v: Pt) -> Self {
        DeloneSetWindow {
            points: self.points.iter().map(|p| [p[0] + v[0], p[1] + v[1]]).collect(),
            window: self.window.translated(v),
            r: self.r,
            big_r: self.big_r,
        }
    }

    /// Points inside the closed box, with the box as the new window. The box
    /// must lie in the current window.
    pub fn restrict(&self, lo: Pt, hi: Pt) -> Self {
        let points = self
            .points
            .iter()
            .copied()
            .filter(|p| p[0] >= lo[0] && p[1] >= lo[1] && p[0] <= hi[0] && p[1] <= hi[1])
            .collect();
        DeloneSetWindow { points, window: Window::Rect { lo, hi }, r: self.r, big_r: self.big_r }
    }

    /// Smallest pairwise distance (infinity for fewer than two points).
    pub fn min_distance(&self) -> f64 {
        let grid = PointGrid::new(&self.points, 1.0);
        let mut best = f64::INFINITY;
        let mut radius = grid.cell();
        // grow the search radius until some pair is found
        loop {
            for (i, p) in self.points.iter().enumerate() {
                for j in grid.within(*p, radius.min(best)) {
                    if j != i {
                        best = best.min(geom::dist(*p, self.points[j]));
                    }
                }
            }
            if best.is_finite() || self.points.len() < 2 || radius > 1e9 {
                return best;
            }
            radius *= 4.0;
        }
    }

    /// Largest empty-ball radius found at `samples` random centres whose
    /// ball of radius `probe` lies inside the window.
    pub fn sampled_covering_radius<R: Rng>(&self, samples: usize, probe: f64, rng: &mut R) -> f64 {
        let grid = PointGrid::new(&self.points, probe.max(1e-6));
        let (lo, hi) = self.window.bbox();
        let mut worst: f64 = 0.0;
        let mut taken = 0;
        let mut tries = 0;
        while taken < samples && tries < samples * 50 {
            tries += 1;
            let c = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
            if !self.window.contains_box([c[0] - probe, c[1] - probe], [c[0] + probe, c[1] + probe]) {
                continue;
            }
            taken += 1;
            let near = grid
                .within(c, probe)
                .into_iter()
                .map(|j| geom::dist(c, self.points[j]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(near.min(probe));
        }
        worst
    }
}

/// Bucket grid over a point set for radius and box queries.
#[derive(Clone, Debug)]
pub struct PointGrid {
    origin: Pt,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    items: Vec<u32>,
    pts: Vec<Pt>,
}

impl PointGrid {
    pub fn new(points: &[Pt], cell: f64) -> Self {
        let (lo, hi) = if points.is_empty() { ([0.0; 2], [1.0; 2]) } else { geom::bbox(points) };
        let nx = (((hi[0] - lo[0]) / cell).floor() as usize + 1).clamp(1, 1 << 12);
        let ny = (((hi[1] - lo[1]) / cell).floor() as usize + 1).clamp(1, 1 << 12);
        let cell = cell.max((hi[0] - lo[0]) / nx as f64).max((hi[1] - lo[1]) / ny as f64);
        let mut g = PointGrid {
            origin: lo,
            cell,
            nx,
            ny,
            start: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
            pts: points.to_vec(),
        };
        let keys: Vec<usize> = points.iter().map(|p| g.key(*p)).collect();
        for &k in &keys {
            g.start[k + 1] += 1;
        }
        for k in 0..nx * ny {
            g.start[k + 1] += g.start[k];
        }
        let mut fill = g.start.clone();
        for (i, &k) in keys.iter().enumerate() {
            g.items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        g
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    fn coord(&self, v: f64, o: f64, n: usize) -> usize {
        (((v - o) / self.cell).floor().max(0.0) as usize).min(n - 1)
    }

    fn key(&self, p: Pt) -> usize {
        self.coord(p[1], self.origin[1], self.ny) * self.nx + self.coord(p[0], self.origin[0], self.nx)
    }

    /// Indices of points within closed distance `r` of `c`.
    pub fn within(&self, c: Pt, r: f64) -> Vec<usize> {
        let mut out = self.candidates([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]);
        out.retain(|&i| geom::dist(c, self.pts[i]) <= r);
        out
    }

    /// Indices of points in the closed box `[lo, hi]`.
    pub fn in_box(&self, lo: Pt, hi: Pt) -> Vec<usize> {
        let mut out = self.candidates(lo, hi);
        out.retain(|&i| {
            let p = self.pts[i];
            p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
        });
        out
    }

    fn candidates(&self, lo: Pt, hi: Pt) -> Vec<usize> {
        let mut out = Vec::new();
        if hi[0] < lo[0] || hi[1] < lo[1] || self.pts.is_empty() {
            return out;
        }
        let x0 = self.coord(lo[0], self.origin[0], self.nx);
        let x1 = self.coord(hi[0], self.origin[0], self.nx);
        let y0 = self.coord(lo[1], self.origin[1], self.ny);
        let y1 = self.coord(hi[1], self.origin[1], self.ny);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let k = y * self.nx + x;
                out.extend(self.items[self.start[k] as usize..self.start[k + 1] as usize].iter().map(|&i| i as usize));
            }
        }
        out
    }
}
