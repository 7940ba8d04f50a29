use std::sync::OnceLock;

use super::cyclo::{FieldCoord, Isometry};
use super::rule::{exact_area_form, validate_rule, SubstitutionRule};
use crate::error::{Error, Result};
use crate::geom::{self, Pt};
use crate::par::Exec;

/// Default cap on the number of level-0 tiles of a generated patch.
pub const DEFAULT_TILE_CAP: u128 = 8_000_000;

/// A tile of `T^level`: `placement` applied to `lambda^level * prototile`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileInstance {
    pub prototile: usize,
    pub placement: Isometry,
    pub level: u32,
    /// Index into `levels[level + 1]`.
    pub parent: Option<u32>,
    /// Position among the parent's children.
    pub child_index: u32,
    /// Index range into `levels[level - 1]`.
    pub children: (u32, u32),
}

/// Finite patch of an admissible tiling with its full supertile ancestry.
/// `levels[l]` holds the tiles of `T^l`; `levels[depth]` is the seed.
pub struct HierarchicalPatch {
    pub rule: SubstitutionRule,
    pub seed: usize,
    pub depth: u32,
    pub levels: Vec<Vec<TileInstance>>,
    polys: Vec<Vec<Vec<Pt>>>,
    index: Vec<OnceLock<TileIndex>>,
}

impl std::fmt::Debug for HierarchicalPatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HierarchicalPatch")
            .field("rule", &self.rule.name)
            .field("seed", &self.seed)
            .field("depth", &self.depth)
            .field("tiles", &self.levels.first().map_or(0, Vec::len))
            .finish()
    }
}

/// Number of level-0 tiles produced from `seed` after `depth` steps.
pub fn tile_count(rule: &SubstitutionRule, seed: usize, depth: u32) -> u128 {
    let n = rule.prototiles.len();
    let mut v = vec![0u128; n];
    v[seed] = 1;
    for _ in 0..depth {
        let mut next = vec![0u128; n];
        for (i, &c) in v.iter().enumerate() {
            for ch in &rule.children[i] {
                next[ch.prototile] = next[ch.prototile].saturating_add(c);
            }
        }
        v = next;
    }
    v.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

pub fn generate(rule: &SubstitutionRule, seed: &str, depth: u32) -> Result<HierarchicalPatch> {
    generate_with(rule, seed, depth, Isometry::identity(rule.ring()), DEFAULT_TILE_CAP, Exec::default())
}

/// Generate the seed supertile `root(lambda^depth * seed)` and all its
/// descendants.
pub fn generate_with(
    rule: &SubstitutionRule,
    seed: &str,
    depth: u32,
    root: Isometry,
    cap: u128,
    exec: Exec,
) -> Result<HierarchicalPatch> {
    let report = validate_rule(rule);
    if !report.valid {
        return Err(Error::InvalidRule(report.summary()));
    }
    let seed = rule.index_of(seed)?;
    let tiles = tile_count(rule, seed, depth);
    if tiles > cap {
        return Err(Error::DepthTooLarge { tiles, cap });
    }
    let top = TileInstance {
        prototile: seed,
        placement: root,
        level: depth,
        parent: None,
        child_index: 0,
        children: (0, 0),
    };
    let mut levels: Vec<Vec<TileInstance>> = vec![Vec::new(); depth as usize + 1];
    levels[depth as usize].push(top);
    let child_isos: Vec<Vec<Isometry>> = rule
        .children
        .iter()
        .map(|kids| kids.iter().map(|c| rule.isometry(&c.placement)).collect())
        .collect();
    for l in (1..=depth as usize).rev() {
        let scale = rule.lambda_pow(l as u32 - 1);
        let parents = &mut levels[l];
        let mut start = 0u32;
        for t in parents.iter_mut() {
            let n = rule.children[t.prototile].len() as u32;
            t.children = (start, start + n);
            start += n;
        }
        let parents = &levels[l];
        let blocks = exec.map_range(parents.len(), |pi| {
            let t = &parents[pi];
            rule.children[t.prototile]
                .iter()
                .zip(&child_isos[t.prototile])
                .enumerate()
                .map(|(k, (c, iso))| {
                    let local = Isometry { rot: iso.rot, refl: iso.refl, t: scale * iso.t };
                    TileInstance {
                        prototile: c.prototile,
                        placement: t.placement.compose(&local),
                        level: l as u32 - 1,
                        parent: Some(pi as u32),
                        child_index: k as u32,
                        children: (0, 0),
                    }
                })
                .collect::<Vec<_>>()
        });
        levels[l - 1] = blocks.into_iter().flatten().collect();
    }
    let polys = levels
        .iter()
        .enumerate()
        .map(|(l, tiles)| {
            let scale = rule.lambda_pow(l as u32);
            exec.map(tiles, |t| {
                rule.placed_vertices(t.prototile, &t.placement, &scale)
                    .iter()
                    .map(|z| z.to_point())
                    .collect()
            })
        })
        .collect();
    let index = (0..=depth).map(|_| OnceLock::new()).collect();
    Ok(HierarchicalPatch { rule: rule.clone(), seed, depth, levels, polys, index })
}

impl HierarchicalPatch {
    pub fn tiles(&self, level: u32) -> &[TileInstance] {
        &self.levels[level as usize]
    }

    pub fn poly(&self, level: u32, idx: usize) -> &[Pt] {
        &self.polys[level as usize][idx]
    }

    pub fn polys(&self, level: u32) -> &[Vec<Pt>] {
        &self.polys[level as usize]
    }

    pub fn exact_vertices(&self, level: u32, idx: usize) -> Vec<FieldCoord> {
        let t = &self.levels[level as usize][idx];
        self.rule.placed_vertices(t.prototile, &t.placement, &self.rule.lambda_pow(level))
    }

    /// Child-index path from the seed down to the tile.
    pub fn address(&self, level: u32, idx: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let (mut l, mut i) = (level as usize, idx);
        while let Some(p) = self.levels[l][i].parent {
            out.push(self.levels[l][i].child_index);
            l += 1;
            i = p as usize;
        }
        out.reverse();
        out
    }

    /// Ancestor of a tile at a higher level.
    pub fn ancestor(&self, level: u32, idx: usize, at: u32) -> usize {
        let mut i = idx;
        for l in level..at {
            i = self.levels[l as usize][i].parent.expect("ancestor above seed") as usize;
        }
        i
    }

    /// Level-0 descendants of a tile, as an index range.
    pub fn leaf_range(&self, level: u32, idx: usize) -> (usize, usize) {
        let (mut lo, mut hi) = (idx, idx + 1);
        for l in (1..=level as usize).rev() {
            lo = self.levels[l][lo].children.0 as usize;
            hi = self.levels[l][hi - 1].children.1 as usize;
        }
        (lo, hi)
    }

    pub fn type_counts(&self, level: u32) -> Vec<u64> {
        let mut c = vec![0u64; self.rule.prototiles.len()];
        for t in self.tiles(level) {
            c[t.prototile] += 1;
        }
        c
    }

    /// Support of the seed supertile.
    pub fn window_polygon(&self) -> &[Pt] {
        self.poly(self.depth, 0)
    }

    pub fn bbox(&self) -> (Pt, Pt) {
        geom::bbox(self.window_polygon())
    }

    /// Spatial bucket index over the tiles of one level (built on first use).
    pub fn index(&self, level: u32) -> &TileIndex {
        self.index[level as usize].get_or_init(|| TileIndex::new(self.polys(level)))
    }

    /// Exact check that every supertile's area equals the sum of its
    /// children's and that level 0 conserves `lambda^(2 depth)` times the
    /// seed area. Returns the first failing level.
    pub fn verify_exact(&self) -> std::result::Result<(), u32> {
        let forms: Vec<Vec<FieldCoord>> = (0..=self.depth)
            .map(|l| (0..self.tiles(l).len()).map(|i| exact_area_form(&self.exact_vertices(l, i))).collect())
            .collect();
        for l in 1..=self.depth as usize {
            for (i, t) in self.levels[l].iter().enumerate() {
                let mut s = FieldCoord::zero(self.rule.ring());
                for c in t.children.0..t.children.1 {
                    s = s + forms[l - 1][c as usize];
                }
                if s != forms[l][i] {
                    return Err(l as u32);
                }
            }
        }
        let total = forms[0].iter().fold(FieldCoord::zero(self.rule.ring()), |a, &b| a + b);
        let seed = exact_area_form(&self.rule.prototiles[self.seed].vertices);
        let lam2 = self.rule.lambda_pow(2 * self.depth);
        if total != lam2 * seed {
            return Err(0);
        }
        Ok(())
    }
}

/// Uniform bucket grid over tile bounding boxes.
#[derive(Clone, Debug)]
pub struct TileIndex {
    origin: Pt,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
    boxes: Vec<(Pt, Pt)>,
}

impl TileIndex {
    pub fn new(polys: &[Vec<Pt>]) -> Self {
        let boxes: Vec<(Pt, Pt)> = polys.iter().map(|p| geom::bbox(p)).collect();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut size = 0.0f64;
        for (a, b) in &boxes {
            for k in 0..2 {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(b[k]);
            }
            size = size.max((b[0] - a[0]).max(b[1] - a[1]));
        }
        if boxes.is_empty() {
            lo = [0.0; 2];
            hi = [1.0; 2];
            size = 1.0;
        }
        let cell = size.max(1e-6);
        let nx = (((hi[0] - lo[0]) / cell).floor() as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / cell).floor() as usize + 1).max(1);
        let mut idx = TileIndex { origin: lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny], boxes };
        for i in 0..idx.boxes.len() {
            let (a, b) = idx.boxes[i];
            let (x0, y0) = idx.cell_of(a);
            let (x1, y1) = idx.cell_of(b);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    idx.buckets[y * nx + x].push(i as u32);
                }
            }
        }
        idx
    }

    fn cell_of(&self, p: Pt) -> (usize, usize) {
        let f = |v: f64, o: f64, n: usize| (((v - o) / self.cell).floor().max(0.0) as usize).min(n - 1);
        (f(p[0], self.origin[0], self.nx), f(p[1], self.origin[1], self.ny))
    }

    /// Tiles whose bounding box meets the closed box `[lo, hi]` (grown by
    /// [`geom::SNAP`]), in increasing index order.
    pub fn query(&self, lo: Pt, hi: Pt) -> Vec<usize> {
        let e = geom::SNAP;
        let (x0, y0) = self.cell_of([lo[0] - e, lo[1] - e]);
        let (x1, y1) = self.cell_of([hi[0] + e, hi[1] + e]);
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                for &i in &self.buckets[y * self.nx + x] {
                    let (a, b) = self.boxes[i as usize];
                    if a[0] <= hi[0] + e && b[0] >= lo[0] - e && a[1] <= hi[1] + e && b[1] >= lo[1] - e {
                        out.push(i as usize);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn bbox_of(&self, i: usize) -> (Pt, Pt) {
        self.boxes[i]
    }
}
