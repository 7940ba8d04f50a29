use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Pt;

pub type Cell = [i64; 2];

const NEIGH: [[i64; 2]; 4] = [[-1, 0], [1, 0], [0, -1], [0, 1]];

/// Unit facet of the grid between integer vertices `a` and `b`, oriented
/// with the region on its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub a: [i64; 2],
    pub b: [i64; 2],
}

impl Facet {
    pub fn segment(&self, delta: f64) -> (Pt, Pt) {
        (
            [self.a[0] as f64 * delta, self.a[1] as f64 * delta],
            [self.b[0] as f64 * delta, self.b[1] as f64 * delta],
        )
    }
}

/// Finite union of half-open cells `delta * (c + [0,1)^2)`.
#[derive(Clone, Debug)]
pub struct GridRegion {
    pub delta: f64,
    cells: Vec<Cell>,
    set: HashSet<Cell>,
    facets: OnceLock<Vec<Facet>>,
}

impl PartialEq for GridRegion {
    fn eq(&self, other: &Self) -> bool {
        self.delta == other.delta && self.cells == other.cells
    }
}

impl GridRegion {
    pub fn new(delta: f64, cells: impl IntoIterator<Item = Cell>) -> Self {
        let mut v: Vec<Cell> = cells.into_iter().collect();
        v.sort_unstable_by_key(|c| (c[1], c[0]));
        v.dedup();
        let set = v.iter().copied().collect();
        GridRegion { delta, cells: v, set, facets: OnceLock::new() }
    }

    /// `w x h` block of cells with lower-left cell `origin`.
    pub fn rect(delta: f64, origin: Cell, w: i64, h: i64) -> Self {
        Self::new(delta, (0..h).flat_map(|y| (0..w).map(move |x| [origin[0] + x, origin[1] + y])))
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.set.contains(&c)
    }

    pub fn cell_box(&self, c: Cell) -> (Pt, Pt) {
        let d = self.delta;
        ([c[0] as f64 * d, c[1] as f64 * d], [(c[0] + 1) as f64 * d, (c[1] + 1) as f64 * d])
    }

    /// Lebesgue measure `|cells| delta^2`.
    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.delta * self.delta
    }

    /// Boundary length `#facets * delta`.
    pub fn boundary_measure(&self) -> f64 {
        self.boundary_facets().len() as f64 * self.delta
    }

    /// Closed bounding box in world coordinates.
    pub fn bbox(&self) -> (Pt, Pt) {
        let (lo, hi) = self.cell_bounds();
        let d = self.delta;
        ([lo[0] as f64 * d, lo[1] as f64 * d], [(hi[0] + 1) as f64 * d, (hi[1] + 1) as f64 * d])
    }

    /// Inclusive range of cell indices.
    pub fn cell_bounds(&self) -> (Cell, Cell) {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for c in &self.cells {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    pub fn boundary_facets(&self) -> &[Facet] {
        self.facets.get_or_init(|| {
            let mut out = Vec::new();
            for &[x, y] in &self.cells {
                if !self.contains([x, y - 1]) {
                    out.push(Facet { a: [x, y], b: [x + 1, y] });
                }
                if !self.contains([x + 1, y]) {
                    out.push(Facet { a: [x + 1, y], b: [x + 1, y + 1] });
                }
                if !self.contains([x, y + 1]) {
                    out.push(Facet { a: [x + 1, y + 1], b: [x, y + 1] });
                }
                if !self.contains([x - 1, y]) {
                    out.push(Facet { a: [x, y + 1], b: [x, y] });
                }
            }
            out
        })
    }

    /// Face-connected components, ordered by their smallest cell.
    pub fn components(&self) -> Vec<GridRegion> {
        let mut seen: HashSet<Cell> = HashSet::new();
        let mut out = Vec::new();
        for &c in &self.cells {
            if seen.contains(&c) {
                continue;
            }
            let comp = flood(c, |n| self.contains(n), &mut seen, None);
            out.push(GridRegion::new(self.delta, comp));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Boundary facets grouped into components; facets sharing an endpoint
    /// are adjacent.
    pub fn boundary_components(&self) -> Vec<Vec<Facet>> {
        let f = self.boundary_facets();
        let mut uf: Vec<usize> = (0..f.len()).collect();
        fn find(uf: &mut [usize], mut i: usize) -> usize {
            while uf[i] != i {
                uf[i] = uf[uf[i]];
                i = uf[i];
            }
            i
        }
        let mut by_vertex: HashMap<[i64; 2], usize> = HashMap::new();
        for (i, fa) in f.iter().enumerate() {
            for v in [fa.a, fa.b] {
                if let Some(&j) = by_vertex.get(&v) {
                    let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
                    if ri != rj {
                        uf[ri.max(rj)] = ri.min(rj);
                    }
                } else {
                    by_vertex.insert(v, i);
                }
            }
        }
        let mut groups: Vec<Vec<Facet>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (i, fa) in f.iter().enumerate() {
            let r = find(&mut uf, i);
            let k = *slot.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[k].push(*fa);
        }
        groups
    }

    pub fn union(&self, other: &GridRegion) -> GridRegion {
        GridRegion::new(self.delta, self.cells.iter().chain(other.cells.iter()).copied())
    }

    pub fn difference(&self, other: &GridRegion) -> GridRegion {
        GridRegion::new(self.delta, self.cells.iter().copied().filter(|c| !other.contains(*c)))
    }

    pub fn translated(&self, by: Cell) -> GridRegion {
        GridRegion::new(self.delta, self.cells.iter().map(|c| [c[0] + by[0], c[1] + by[1]]))
    }

    /// Text form: `delta <v>` followed by one `i j` cell per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("delta {}\n", self.delta);
        for c in &self.cells {
            let _ = writeln!(s, "{} {}", c[0], c[1]);
        }
        s
    }

    pub fn parse(src: &str) -> Result<GridRegion> {
        let mut delta = None;
        let mut cells = Vec::new();
        for (ln, line) in src.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let first = it.next().unwrap_or_default();
            if first == "delta" {
                let v: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("expected `delta <value>`"))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err("delta must be positive"));
                }
                delta = Some(v);
                continue;
            }
            if delta.is_none() {
                return Err(err("`delta` must come first"));
            }
            let x: i64 = first.parse().map_err(|_| err("expected integer cell coordinates"))?;
            let y: i64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("expected two integers"))?;
            if it.next().is_some() {
                return Err(err("expected two integers"));
            }
            cells.push([x, y]);
        }
        let delta = delta.ok_or(Error::Parse { line: 1, msg: "missing `delta` line".into() })?;
        Ok(GridRegion::new(delta, cells))
    }
}

fn flood(
    start: Cell,
    member: impl Fn(Cell) -> bool,
    seen: &mut HashSet<Cell>,
    frame: Option<(Cell, Cell)>,
) -> Vec<Cell> {
    let mut out = vec![start];
    seen.insert(start);
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        for d in NEIGH {
            let n = [c[0] + d[0], c[1] + d[1]];
            if let Some((lo, hi)) = frame {
                if n[0] < lo[0] || n[1] < lo[1] || n[0] > hi[0] || n[1] > hi[1] {
                    continue;
                }
            }
            if member(n) && seen.insert(n) {
                out.push(n);
                q.push_back(n);
            }
        }
    }
    out
}

/// A connected component together with its holes and its filled version.
#[derive(Clone, Debug)]
pub struct HatPiece {
    pub component: GridRegion,
    pub holes: Vec<GridRegion>,
    pub filled: GridRegion,
}

/// Split `U` into components `V_i`, find the bounded complementary
/// components `V_{i,j}` of each and fill them in.
pub fn hat_completion(u: &GridRegion) -> Vec<HatPiece> {
    u.components()
        .into_iter()
        .map(|v| {
            let (lo, hi) = v.cell_bounds();
            let frame = ([lo[0] - 1, lo[1] - 1], [hi[0] + 1, hi[1] + 1]);
            let mut seen = HashSet::new();
            // the unbounded complement touches the frame corner
            flood(frame.0, |c| !v.contains(c), &mut seen, Some(frame));
            let mut holes = Vec::new();
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = [x, y];
                    if !v.contains(c) && !seen.contains(&c) {
                        let h = flood(c, |n| !v.contains(n), &mut seen, Some(frame));
                        holes.push(GridRegion::new(v.delta, h));
                    }
                }
            }
            let filled = holes.iter().fold(v.clone(), |acc, h| acc.union(h));
            HatPiece { component: v, holes, filled }
        })
        .collect()
}

/// Random face-connected region of `n` cells grown from `origin` inside the
/// inclusive cell box `[lo, hi]`.
pub fn random_connected_region<R: Rng>(rng: &mut R, delta: f64, n: usize, origin: Cell, lo: Cell, hi: Cell) -> GridRegion {
    let inside = |c: Cell| c[0] >= lo[0] && c[1] >= lo[1] && c[0] <= hi[0] && c[1] <= hi[1];
    let mut cells = vec![origin];
    let mut set: HashSet<Cell> = HashSet::from([origin]);
    let mut frontier: Vec<Cell> = Vec::new();
    let push = |c: Cell, set: &HashSet<Cell>, frontier: &mut Vec<Cell>| {
        for d in NEIGH {
            let m = [c[0] + d[0], c[1] + d[1]];
            if inside(m) && !set.contains(&m) {
                frontier.push(m);
            }
        }
    };
    push(origin, &set, &mut frontier);
    while cells.len() < n && !frontier.is_empty() {
        let k = rng.gen_range(0..frontier.len());
        let c = frontier.swap_remove(k);
        if set.insert(c) {
            cells.push(c);
            push(c, &set, &mut frontier);
        }
    }
    GridRegion::new(delta, cells)
}

/// Random connected region with connected boundary: a grown blob with its
/// holes filled.
pub fn random_simple_region<R: Rng>(rng: &mut R, delta: f64, n: usize, origin: Cell, lo: Cell, hi: Cell) -> GridRegion {
    let u = random_connected_region(rng, delta, n, origin, lo, hi);
    hat_completion(&u).remove(0).filled
}

/// Union of a few random axis-aligned rectangles inside `[lo, hi]`, chained
/// so that the result is connected.
pub fn random_rect_union<R: Rng>(rng: &mut R, delta: f64, pieces: usize, max_side: i64, lo: Cell, hi: Cell) -> GridRegion {
    let mut cells: Vec<Cell> = Vec::new();
    let span = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1];
    let mut anchor = [lo[0] + span[0] / 2, lo[1] + span[1] / 2];
    for _ in 0..pieces.max(1) {
        let w = rng.gen_range(1..=max_side.min(span[0]));
        let h = rng.gen_range(1..=max_side.min(span[1]));
        let x0 = (anchor[0] - rng.gen_range(0..w)).clamp(lo[0], hi[0] + 1 - w);
        let y0 = (anchor[1] - rng.gen_range(0..h)).clamp(lo[1], hi[1] + 1 - h);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                cells.push([x, y]);
            }
        }
        anchor = *cells.choose(rng).expect("nonempty");
    }
    GridRegion::new(delta, cells)
}
