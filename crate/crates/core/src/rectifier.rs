//! Bounded-displacement matchings to a lattice and the full rectifying
//! pipeline (flatten, rescale, match).

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::flattener::{
    build_flatmap, eta_star_bound, quadrature_volumes, volume_report, DensityField, EtaStar, FlatMap, VolumeReport,
};
use crate::geom::{self, Pt};
use crate::regions::{fit_deviation, PointCounter};
use crate::subst::{DeloneSetWindow, PointGrid, Window};
use crate::{Error, Exec, Result};

const NONE: u32 = u32::MAX;

/// Largest cube `c * [o, o + 2^m]^2` with integer `o` inside the window.
pub fn aligned_cube(window: &Window, c: f64) -> Option<([i64; 2], u32)> {
    let (lo, hi) = window.bbox();
    let i0 = [(lo[0] / c - 1e-9).ceil() as i64, (lo[1] / c - 1e-9).ceil() as i64];
    let i1 = [(hi[0] / c + 1e-9).floor() as i64, (hi[1] / c + 1e-9).floor() as i64];
    let span = (i1[0] - i0[0]).min(i1[1] - i0[1]);
    if span < 1 {
        return None;
    }
    let mut m = (span as u64).ilog2();
    loop {
        let s = 1i64 << m;
        for oy in i0[1]..=i1[1] - s {
            for ox in i0[0]..=i1[0] - s {
                let a = [ox as f64 * c, oy as f64 * c];
                let b = [(ox + s) as f64 * c, (oy + s) as f64 * c];
                if window.contains_box(a, b) {
                    return Some(([ox, oy], m));
                }
            }
        }
        if m == 0 {
            return None;
        }
        m -= 1;
    }
}

/// Covering radius of the set: the stored one, else a sampled estimate.
pub fn covering_radius(x: &DeloneSetWindow) -> f64 {
    if let Some(r) = x.big_r {
        return r;
    }
    let area = crate::regions::window_area(&x.window);
    let probe = 8.0 * (area / x.points.len().max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    x.sampled_covering_radius(4000, probe, &mut rng)
}

/// Smallest power of two at least twice the covering radius.
pub fn auto_cell(x: &DeloneSetWindow) -> f64 {
    let c0 = 2.0 * covering_radius(x);
    let mut c = 1.0;
    while c < c0 - 1e-12 {
        c *= 2.0;
    }
    while c / 2.0 >= c0 && c > 1.0 / 64.0 {
        c /= 2.0;
    }
    c
}

/// Point density per cell of the largest aligned cube in the window.
pub fn density_from_points(x: &DeloneSetWindow, c: f64) -> Result<DensityField> {
    if !(c > 0.0) {
        return Err(Error::Degenerate(format!("cell size {c} must be positive")));
    }
    let (o, m) = aligned_cube(&x.window, c)
        .ok_or_else(|| Error::Degenerate(format!("no aligned cube of cell size {c} fits in the window")))?;
    density_on_cube(x, c, o, m)
}

/// `u(Q) = N(X, Q) / c^2` on the cells of `c * [o, o + 2^m]^2`.
pub fn density_on_cube(x: &DeloneSetWindow, c: f64, o: [i64; 2], m: u32) -> Result<DensityField> {
    let counter = PointCounter::new(x);
    let n = 1usize << m;
    let counts = Exec::default().map_range(n * n, |k| {
        let (i, j) = ((k % n) as i64, (k / n) as i64);
        counter.count_box([(o[0] + i) as f64 * c, (o[1] + j) as f64 * c], c)
    });
    if counts.contains(&0) {
        return Err(Error::EmptyCell { cell: c, min_required: 2.0 * covering_radius(x) });
    }
    let values = counts.iter().map(|&k| k as f64 / (c * c)).collect();
    DensityField::new(2, m, vec![o[0], o[1]], values)
}

/// Bi-Lipschitz constant of the correspondence `x_i -> z_i` over all pairs.
/// Coincident points on either side give infinity.
pub fn measure_bilipschitz(pairs: &[(Pt, Pt)]) -> f64 {
    measure_bilipschitz_with(pairs, Exec::default())
}

pub fn measure_bilipschitz_with(pairs: &[(Pt, Pt)], exec: Exec) -> f64 {
    let rows = exec.map_range(pairs.len(), |i| {
        let (xi, zi) = pairs[i];
        let mut k: f64 = 1.0;
        for &(xj, zj) in &pairs[i + 1..] {
            let a = geom::dist(xi, xj);
            let b = geom::dist(zi, zj);
            if a == 0.0 || b == 0.0 {
                return f64::INFINITY;
            }
            k = k.max(b / a).max(a / b);
        }
        k
    });
    rows.into_iter().fold(1.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Points,
    Lattice,
}

/// A set violating the marriage condition: core vertices reachable by
/// alternating paths from the unmatched ones, and their neighbourhood.
#[derive(Clone, Debug, Serialize)]
pub struct HallCertificate {
    pub side: Side,
    pub radius: f64,
    pub set_size: usize,
    pub neighbourhood: usize,
    pub deficiency: usize,
    pub bbox: (Pt, Pt),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MatchPair {
    /// Index into the input point list.
    pub index: usize,
    pub x: Pt,
    pub z: Pt,
    pub dist: f64,
    /// Whether `x` lies in the core window.
    pub core: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Attempt {
    pub radius: f64,
    pub perfect: bool,
    pub deficiency: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Matching {
    pub beta: f64,
    /// Smallest radius found with a perfect core matching (the cap on failure).
    pub radius: f64,
    pub perfect: bool,
    /// Width of the excluded boundary zone (equal to `radius`).
    pub core_margin: f64,
    pub core_points: usize,
    pub core_lattice: usize,
    pub pairs: Vec<MatchPair>,
    pub unmatched_points: Vec<Pt>,
    pub unmatched_lattice: Vec<Pt>,
    pub max_displacement: f64,
    pub mean_displacement: f64,
    /// Over the core pairs.
    pub k_bilip: f64,
    pub deficiency: usize,
    pub certificates: Vec<HallCertificate>,
    pub attempts: Vec<Attempt>,
}

impl Matching {
    pub fn require_perfect(&self) -> Result<&Self> {
        if self.perfect {
            Ok(self)
        } else {
            Err(Error::NoMatching { cap: self.radius, deficiency: self.deficiency })
        }
    }

    /// Injective on both sides and every pair within the radius.
    pub fn is_valid(&self) -> bool {
        let mut xs: Vec<usize> = self.pairs.iter().map(|p| p.index).collect();
        let mut zs: Vec<(i64, i64)> = self
            .pairs
            .iter()
            .map(|p| ((p.z[0] / self.beta * 4.0).round() as i64, (p.z[1] / self.beta * 4.0).round() as i64))
            .collect();
        xs.sort_unstable();
        zs.sort_unstable();
        let inj = xs.windows(2).all(|w| w[0] != w[1]) && zs.windows(2).all(|w| w[0] != w[1]);
        inj && self.pairs.iter().all(|p| geom::dist(p.x, p.z) <= self.radius + 1e-12 && p.dist <= self.radius + 1e-12)
    }

    pub fn core_pairs(&self) -> Vec<(Pt, Pt)> {
        self.pairs.iter().filter(|p| p.core).map(|p| (p.x, p.z)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MatchOptions {
    pub d_init: f64,
    /// Largest radius tried; `None` uses one eighth of the window's smaller side.
    pub d_cap: Option<f64>,
    /// Bisection stops at `resolution * beta`.
    pub resolution: f64,
    pub offset: Pt,
    /// Bi-Lipschitz estimates use at most this many core pairs (strided).
    pub max_bilip_points: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { d_init: 0.5, d_cap: None, resolution: 1e-3, offset: [0.0, 0.0], max_bilip_points: 8000 }
    }
}

struct Bipartite {
    start: Vec<usize>,
    adj: Vec<u32>,
}

impl Bipartite {
    fn nl(&self) -> usize {
        self.start.len() - 1
    }

    fn nbrs(&self, u: usize) -> &[u32] {
        &self.adj[self.start[u]..self.start[u + 1]]
    }
}

/// Maximum matching; returns partners of left and right vertices.
fn hopcroft_karp(g: &Bipartite, nr: usize) -> (Vec<u32>, Vec<u32>) {
    let nl = g.nl();
    let mut ml = vec![NONE; nl];
    let mut mr = vec![NONE; nr];
    let inf = u32::MAX;
    let mut dist = vec![inf; nl];
    let mut it = vec![0usize; nl];
    let mut queue = VecDeque::new();
    let mut stack: Vec<usize> = Vec::new();
    loop {
        queue.clear();
        for u in 0..nl {
            if ml[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = inf;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in g.nbrs(u) {
                let w = mr[v as usize];
                if w == NONE {
                    found = true;
                } else if dist[w as usize] == inf {
                    dist[w as usize] = dist[u] + 1;
                    queue.push_back(w as usize);
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..nl {
            it[u] = g.start[u];
        }
        for root in 0..nl {
            if ml[root] != NONE {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if it[u] == g.start[u + 1] {
                    dist[u] = inf;
                    stack.pop();
                    continue;
                }
                let v = g.adj[it[u]] as usize;
                it[u] += 1;
                let w = mr[v];
                if w == NONE {
                    for &a in &stack {
                        let b = g.adj[it[a] - 1];
                        ml[a] = b;
                        mr[b as usize] = a as u32;
                    }
                    break;
                } else if dist[w as usize] == dist[u] + 1 {
                    stack.push(w as usize);
                }
            }
        }
    }
    (ml, mr)
}

/// Alternating reachability from the unmatched left vertices:
/// `(left set, right set)`.
fn hall_set(g: &Bipartite, ml: &[u32], mr: &[u32]) -> (Vec<usize>, Vec<usize>) {
    let mut seen_l = vec![false; g.nl()];
    let mut seen_r = vec![false; mr.len()];
    let mut queue: VecDeque<usize> = (0..g.nl()).filter(|&u| ml[u] == NONE).collect();
    for &u in &queue {
        seen_l[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in g.nbrs(u) {
            let v = v as usize;
            if !seen_r[v] {
                seen_r[v] = true;
                let w = mr[v];
                if w != NONE && !seen_l[w as usize] {
                    seen_l[w as usize] = true;
                    queue.push_back(w as usize);
                }
            }
        }
    }
    let left = (0..g.nl()).filter(|&u| seen_l[u]).collect();
    let right = (0..mr.len()).filter(|&v| seen_r[v]).collect();
    (left, right)
}

struct Instance {
    xs: Vec<Pt>,
    /// Position of each of `xs` in the caller's list.
    xi: Vec<usize>,
    zs: Vec<Pt>,
    xm: Vec<f64>,
    zm: Vec<f64>,
    xg: PointGrid,
    zg: PointGrid,
}

struct Outcome {
    radius: f64,
    pairs: Vec<(usize, usize)>,
    core_x: usize,
    core_z: usize,
    unmatched_x: Vec<usize>,
    unmatched_z: Vec<usize>,
    certificates: Vec<HallCertificate>,
}

impl Outcome {
    fn perfect(&self) -> bool {
        self.unmatched_x.is_empty() && self.unmatched_z.is_empty()
    }

    fn deficiency(&self) -> usize {
        self.unmatched_x.len().max(self.unmatched_z.len())
    }
}

fn bbox_of(pts: impl Iterator<Item = Pt>) -> (Pt, Pt) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

impl Instance {
    fn new(points: &[Pt], window: &Window, beta: f64, offset: Pt) -> Self {
        let (xi, xs): (Vec<usize>, Vec<Pt>) =
            points.iter().copied().enumerate().filter(|(_, p)| window.contains(*p)).unzip();
        let (lo, hi) = window.bbox();
        let zs: Vec<Pt> = DeloneSetWindow::lattice(beta, offset, lo, hi)
            .points
            .into_iter()
            .filter(|p| window.contains(*p))
            .collect();
        let xm = xs.iter().map(|p| window.margin(*p)).collect();
        let zm = zs.iter().map(|p| window.margin(*p)).collect();
        let cell = beta.max(1e-6);
        Instance { xg: PointGrid::new(&xs, cell), zg: PointGrid::new(&zs, cell), xs, xi, zs, xm, zm }
    }

    fn graph(&self, left: &[usize], from: &[Pt], grid: &PointGrid, to: &[Pt], d: f64) -> Bipartite {
        let mut start = vec![0usize];
        let mut adj = Vec::new();
        for &u in left {
            let mut nb = grid.within(from[u], d);
            nb.sort_by(|&a, &b| geom::dist(from[u], to[a]).total_cmp(&geom::dist(from[u], to[b])));
            adj.extend(nb.into_iter().map(|v| v as u32));
            start.push(adj.len());
        }
        Bipartite { start, adj }
    }

    fn certificate(&self, side: Side, d: f64, left: &[usize], g: &Bipartite, ml: &[u32], mr: &[u32]) -> HallCertificate {
        let (s, n) = hall_set(g, ml, mr);
        let pts = match side {
            Side::Points => &self.xs,
            Side::Lattice => &self.zs,
        };
        HallCertificate {
            side,
            radius: d,
            set_size: s.len(),
            neighbourhood: n.len(),
            deficiency: s.len() - n.len(),
            bbox: bbox_of(s.iter().map(|&u| pts[left[u]])),
        }
    }

    /// Core matching at radius `d`: one maximum matching per side, merged.
    fn attempt(&self, d: f64) -> Outcome {
        let core_x: Vec<usize> = (0..self.xs.len()).filter(|&i| self.xm[i] >= d).collect();
        let core_z: Vec<usize> = (0..self.zs.len()).filter(|&j| self.zm[j] >= d).collect();
        let g1 = self.graph(&core_x, &self.xs, &self.zg, &self.zs, d);
        let (ml1, mr1) = hopcroft_karp(&g1, self.zs.len());
        let g2 = self.graph(&core_z, &self.zs, &self.xg, &self.xs, d);
        let (ml2, mr2) = hopcroft_karp(&g2, self.xs.len());

        let mut certificates = Vec::new();
        let unmatched_x: Vec<usize> = (0..core_x.len()).filter(|&u| ml1[u] == NONE).map(|u| core_x[u]).collect();
        let unmatched_z: Vec<usize> = (0..core_z.len()).filter(|&u| ml2[u] == NONE).map(|u| core_z[u]).collect();
        if !unmatched_x.is_empty() {
            certificates.push(self.certificate(Side::Points, d, &core_x, &g1, &ml1, &mr1));
        }
        if !unmatched_z.is_empty() {
            certificates.push(self.certificate(Side::Lattice, d, &core_z, &g2, &ml2, &mr2));
        }

        // a: x -> z from the point side, b: z -> x from the lattice side
        let nx = self.xs.len();
        let nz = self.zs.len();
        let mut a_x = vec![NONE; nx];
        let mut a_z = vec![NONE; nz];
        for (u, &v) in ml1.iter().enumerate() {
            if v != NONE {
                a_x[core_x[u]] = v;
                a_z[v as usize] = core_x[u] as u32;
            }
        }
        let mut b_x = vec![NONE; nx];
        let mut b_z = vec![NONE; nz];
        for (u, &v) in ml2.iter().enumerate() {
            if v != NONE {
                b_z[core_z[u]] = v;
                b_x[v as usize] = core_z[u] as u32;
            }
        }
        let pairs = merge(&a_x, &a_z, &b_x, &b_z);
        Outcome {
            radius: d,
            pairs,
            core_x: core_x.len(),
            core_z: core_z.len(),
            unmatched_x,
            unmatched_z,
            certificates,
        }
    }
}

/// Combines a matching `a` saturating one side's core with a matching `b`
/// saturating the other's into one matching saturating both. Each component
/// of `a ∪ b` is a path or an even cycle; the choice per component keeps
/// every required vertex covered.
fn merge(a_x: &[u32], a_z: &[u32], b_x: &[u32], b_z: &[u32]) -> Vec<(usize, usize)> {
    let nx = a_x.len();
    let nz = a_z.len();
    // vertex ids: x -> i, z -> nx + j
    let other = |v: usize, use_a: bool| -> Option<usize> {
        let p = if v < nx {
            if use_a { a_x[v] } else { b_x[v] }
        } else if use_a {
            a_z[v - nx]
        } else {
            b_z[v - nx]
        };
        if p == NONE {
            None
        } else if v < nx {
            Some(nx + p as usize)
        } else {
            Some(p as usize)
        }
    };
    let deg = |v: usize| usize::from(other(v, true).is_some()) + usize::from(other(v, false).is_some());
    let mut seen = vec![false; nx + nz];
    let mut out = Vec::new();
    let take = |edges: &[(usize, usize, bool)], use_a: bool, out: &mut Vec<(usize, usize)>| {
        for &(u, v, lab) in edges {
            if lab == use_a {
                let (x, z) = if u < nx { (u, v - nx) } else { (v, u - nx) };
                out.push((x, z));
            }
        }
    };
    // paths first, from an endpoint
    for s in 0..nx + nz {
        if seen[s] || deg(s) != 1 {
            continue;
        }
        let mut edges = Vec::new();
        let mut v = s;
        seen[v] = true;
        let mut lab = other(v, true).is_some();
        while let Some(w) = other(v, lab) {
            edges.push((v, w, lab));
            seen[w] = true;
            v = w;
            lab = !lab;
        }
        let first = edges[0].2;
        let use_a = if edges.len() % 2 == 1 {
            first
        } else {
            // both ends on one side; the uncovered end must be optional there
            s < nx
        };
        take(&edges, use_a, &mut out);
    }
    // cycles
    for s in 0..nx + nz {
        if seen[s] || deg(s) == 0 {
            continue;
        }
        let mut edges = Vec::new();
        let mut v = s;
        let mut lab = true;
        loop {
            seen[v] = true;
            let w = other(v, lab).expect("cycle vertex has both partners");
            edges.push((v, w, lab));
            v = w;
            lab = !lab;
            if v == s {
                break;
            }
        }
        take(&edges, true, &mut out);
    }
    out.sort_unstable();
    out
}

/// Builds the reported matching from an outcome.
fn finish(inst: &Instance, beta: f64, o: Outcome, extra: Vec<HallCertificate>, attempts: Vec<Attempt>, opts: &MatchOptions) -> Matching {
    let pairs: Vec<MatchPair> = o
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (x, z) = (inst.xs[i], inst.zs[j]);
            MatchPair { index: inst.xi[i], x, z, dist: geom::dist(x, z), core: inst.xm[i] >= o.radius }
        })
        .collect();
    let max_displacement = pairs.iter().map(|p| p.dist).fold(0.0, f64::max);
    let mean_displacement =
        if pairs.is_empty() { 0.0 } else { pairs.iter().map(|p| p.dist).sum::<f64>() / pairs.len() as f64 };
    let core: Vec<(Pt, Pt)> = pairs.iter().filter(|p| p.core).map(|p| (p.x, p.z)).collect();
    let k_bilip = measure_bilipschitz(&stride_sample(&core, opts.max_bilip_points));
    let mut certificates = o.certificates.clone();
    certificates.extend(extra);
    Matching {
        beta,
        radius: o.radius,
        perfect: o.perfect(),
        core_margin: o.radius,
        core_points: o.core_x,
        core_lattice: o.core_z,
        deficiency: o.deficiency(),
        unmatched_points: o.unmatched_x.iter().map(|&i| inst.xs[i]).collect(),
        unmatched_lattice: o.unmatched_z.iter().map(|&j| inst.zs[j]).collect(),
        pairs,
        max_displacement,
        mean_displacement,
        k_bilip,
        certificates,
        attempts,
    }
}

fn stride_sample<T: Copy>(v: &[T], cap: usize) -> Vec<T> {
    if v.len() <= cap || cap == 0 {
        return v.to_vec();
    }
    let step = v.len().div_ceil(cap);
    v.iter().step_by(step).copied().collect()
}

/// Core matching at one fixed radius (no search).
pub fn match_at_radius(x: &DeloneSetWindow, beta: f64, window: &Window, d: f64, opts: &MatchOptions) -> Result<Matching> {
    if !(beta > 0.0) || !(d >= 0.0) {
        return Err(Error::Degenerate(format!("need beta > 0 and D >= 0 (got {beta}, {d})")));
    }
    let inst = Instance::new(&x.points, window, beta, opts.offset);
    let o = inst.attempt(d);
    let att = vec![Attempt { radius: d, perfect: o.perfect(), deficiency: o.deficiency() }];
    Ok(finish(&inst, beta, o, Vec::new(), att, opts))
}

/// Smallest core radius `D` (up to `1e-3 beta`) at which the points of `x`
/// in the window and `beta Z^2` in the window admit a matching covering both
/// core sets with all distances at most `D`.
pub fn bounded_displacement_match(x: &DeloneSetWindow, beta: f64, window: &Window, d_init: f64) -> Result<Matching> {
    bounded_displacement_match_with(x, beta, window, &MatchOptions { d_init, ..MatchOptions::default() })
}

pub fn bounded_displacement_match_with(
    x: &DeloneSetWindow,
    beta: f64,
    window: &Window,
    opts: &MatchOptions,
) -> Result<Matching> {
    if !(beta > 0.0) || !(opts.d_init > 0.0) {
        return Err(Error::Degenerate(format!("need beta > 0 and D_init > 0 (got {beta}, {})", opts.d_init)));
    }
    let (lo, hi) = window.bbox();
    let cap = opts.d_cap.unwrap_or(((hi[0] - lo[0]).min(hi[1] - lo[1]) / 8.0).max(opts.d_init));
    let inst = Instance::new(&x.points, window, beta, opts.offset);
    let mut attempts = Vec::new();
    let run = |d: f64, attempts: &mut Vec<Attempt>| {
        let o = inst.attempt(d);
        attempts.push(Attempt { radius: d, perfect: o.perfect(), deficiency: o.deficiency() });
        o
    };
    let mut lo_d = 0.0;
    let mut fail_certs = Vec::new();
    let mut d = opts.d_init.min(cap);
    let mut best = loop {
        let o = run(d, &mut attempts);
        if o.perfect() {
            break o;
        }
        lo_d = d;
        if d >= cap {
            return Ok(finish(&inst, beta, o, Vec::new(), attempts, opts));
        }
        fail_certs = o.certificates;
        d = (d * 2.0).min(cap);
    };
    let tol = opts.resolution * beta;
    while best.radius - lo_d > tol {
        let mid = 0.5 * (lo_d + best.radius);
        let o = run(mid, &mut attempts);
        if o.perfect() {
            best = o;
        } else {
            lo_d = mid;
            fail_certs = o.certificates;
        }
    }
    Ok(finish(&inst, beta, best, fail_certs, attempts, opts))
}

/// Independent matchings of `x` restricted to the squares `[lo, lo + s]^2`.
pub fn match_sweep(
    x: &DeloneSetWindow,
    beta: f64,
    lo: Pt,
    sizes: &[f64],
    opts: &MatchOptions,
    exec: Exec,
) -> Vec<Result<Matching>> {
    exec.map(sizes, |&s| {
        let sub = x.restrict(lo, [lo[0] + s, lo[1] + s]);
        bounded_displacement_match_with(&sub, beta, &sub.window, opts)
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RectifyOptions {
    /// Density cell size; `None` picks the smallest power of two at least
    /// twice the covering radius.
    pub cell: Option<f64>,
    pub blend_width: f64,
    pub matching: MatchOptions,
    /// Quadrature nodes per axis and cell for the volume diagnostic.
    pub quadrature: usize,
    pub exec: Exec,
}

impl Default for RectifyOptions {
    fn default() -> Self {
        RectifyOptions { cell: None, blend_width: 0.125, matching: MatchOptions::default(), quadrature: 8, exec: Exec::default() }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RectSample {
    pub x: Pt,
    /// Image under the flattening map and the homothety.
    pub pushed: Pt,
    pub z: Pt,
}

#[derive(Clone, Debug, Serialize)]
pub struct Rectification {
    pub rho_hat: f64,
    /// `"fit"` when taken from the deviation fit, `"cube"` for small windows.
    pub rho_source: String,
    pub cell: f64,
    pub m: u32,
    pub cube_lo: Pt,
    pub cube_side: f64,
    /// Mean cell density over `rho_hat`.
    pub density_ratio: f64,
    pub scale: f64,
    pub eta: EtaStar,
    pub volumes: VolumeReport,
    /// Largest `|Psi(x) - x|` over the points, before rescaling.
    pub map_shift: f64,
    pub matching: Matching,
    pub samples: Vec<RectSample>,
    pub k_bilip: f64,
    /// Largest matching distance, in lattice units.
    pub displacement: f64,
}

/// Flattens the cell density of `x`, rescales to unit density and matches
/// the pushed core points to `Z^2`.
pub fn rectify(x: &DeloneSetWindow, opts: &RectifyOptions) -> Result<(Rectification, FlatMap)> {
    let c = opts.cell.unwrap_or_else(|| auto_cell(x));
    let u = density_from_points(x, c)?;
    let (rho_hat, rho_source) = match fit_deviation(x) {
        Ok(f) => (f.rho_hat, "fit"),
        Err(_) => (u.mean(), "cube"),
    };
    let density_ratio = u.mean() / rho_hat;
    if (density_ratio - 1.0).abs() > 0.02 {
        return Err(Error::DensityMismatch { ratio: density_ratio });
    }
    let map = build_flatmap(&u, opts.blend_width)?;
    let eta = eta_star_bound(&u);
    let volumes = volume_report(&map, "grid", quadrature_volumes(&map, u.m, opts.quadrature, opts.exec));
    if !eta.ok || !volumes.ok {
        return Err(Error::Diagnostics(format!(
            "eta ok {} (measured {:.4}, analytic {:.4}); volume error {:.3e} vs tolerance {:.3e}",
            eta.ok, eta.measured, eta.analytic, volumes.max_abs_err, volumes.tol_vol
        )));
    }
    let side = c * u.side() as f64;
    let lo = [u.origin[0] as f64 * c, u.origin[1] as f64 * c];
    let scale = rho_hat.sqrt();
    let inside: Vec<usize> = (0..x.points.len())
        .filter(|&i| {
            let p = x.points[i];
            (0..2).all(|k| p[k] >= lo[k] && p[k] < lo[k] + side)
        })
        .collect();
    let psi: Vec<Pt> = opts.exec.map(&inside, |&i| {
        let p = x.points[i];
        let y = map.eval(&[p[0] / c, p[1] / c]);
        [y[0] * c, y[1] * c]
    });
    let map_shift = inside.iter().zip(&psi).map(|(&i, y)| geom::dist(x.points[i], *y)).fold(0.0, f64::max);
    let pushed: Vec<Pt> = psi.iter().map(|y| [y[0] * scale, y[1] * scale]).collect();
    let window = Window::Rect { lo: [lo[0] * scale, lo[1] * scale], hi: [(lo[0] + side) * scale, (lo[1] + side) * scale] };
    let px = DeloneSetWindow::from_points(pushed.clone(), window.clone());
    let matching = bounded_displacement_match_with(&px, 1.0, &window, &opts.matching)?;
    let samples: Vec<RectSample> = matching
        .pairs
        .iter()
        .filter(|p| p.core)
        .map(|p| RectSample { x: x.points[inside[p.index]], pushed: p.x, z: p.z })
        .collect();
    let corr: Vec<(Pt, Pt)> = samples.iter().map(|s| (s.x, s.z)).collect();
    let k_bilip = measure_bilipschitz_with(&stride_sample(&corr, opts.matching.max_bilip_points), opts.exec);
    let displacement = matching.max_displacement;
    Ok((
        Rectification {
            rho_hat,
            rho_source: rho_source.to_string(),
            cell: c,
            m: u.m,
            cube_lo: lo,
            cube_side: side,
            density_ratio,
            scale,
            eta,
            volumes,
            map_shift,
            matching,
            samples,
            k_bilip,
            displacement,
        },
        map,
    ))
}
