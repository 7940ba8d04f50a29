//! Piecewise-constant volume forms on dyadic cubes and the composed
//! mass-balancing homeomorphism that realizes them.
//!
//! Axes are 0-based. A level-`i` stage along axis `p` acts on the boxes
//! `D^p(eps)` of every level-`i` cube: full extent in axes `< p`, split at the
//! midpoint along `p`, and the half `eps_l` in every axis `l > p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Exec, Result};

/// Double-double accumulator.
#[derive(Clone, Copy, Debug, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn add(self, x: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, x.hi);
        let e = e + self.lo + x.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Positive density, constant on the unit cubes of `prod [n_l, n_l + 2^m]`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityField {
    pub d: usize,
    pub m: u32,
    pub origin: Vec<i64>,
    /// Values with axis 0 varying fastest.
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    #[serde(skip)]
    sat: Vec<Dd>,
}

impl DensityField {
    pub fn new(d: usize, m: u32, origin: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if !(2..=8).contains(&d) {
            return Err(Error::InvalidDensity(format!("dimension {d} outside 2..=8")));
        }
        if origin.len() != d {
            return Err(Error::InvalidDensity("origin has wrong dimension".into()));
        }
        let n = 1usize << m;
        if values.len() != n.pow(d as u32) {
            return Err(Error::InvalidDensity(format!("expected {} values, got {}", n.pow(d as u32), values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidDensity(format!("non-positive value {v}")));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(0.0, f64::max);
        let mut f = DensityField { d, m, origin, values, min, max, sat: Vec::new() };
        f.build_sat();
        Ok(f)
    }

    pub fn constant(d: usize, m: u32, c: f64) -> Result<Self> {
        DensityField::new(d, m, vec![0; d], vec![c; 1 << (m as usize * d)])
    }

    pub fn side(&self) -> i64 {
        1 << self.m
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    // cumulative sums along each axis in turn, (n+1)^d entries
    fn build_sat(&mut self) {
        let n = 1usize << self.m;
        let s = n + 1;
        let total = s.pow(self.d as u32);
        let mut sat = vec![Dd::default(); total];
        for (lin, v) in self.values.iter().enumerate() {
            let mut idx = 0;
            let mut stride = 1;
            let mut rest = lin;
            for _ in 0..self.d {
                idx += (rest % n + 1) * stride;
                rest /= n;
                stride *= s;
            }
            sat[idx] = Dd { hi: *v, lo: 0.0 };
        }
        let mut stride = 1;
        for _ in 0..self.d {
            for idx in 0..total {
                if (idx / stride) % s != 0 {
                    sat[idx] = sat[idx].add(sat[idx - stride]);
                }
            }
            stride *= s;
        }
        self.sat = sat;
    }

    /// `int u` over the box of cells `[lo, hi)` (cell coordinates relative
    /// to the origin).
    pub fn box_integral(&self, lo: &[i64], hi: &[i64]) -> f64 {
        let s = (1usize << self.m) + 1;
        let mut acc = Dd::default();
        for corner in 0..(1usize << self.d) {
            let mut idx = 0;
            let mut stride = 1;
            let mut sign = 1;
            for l in 0..self.d {
                let c = if corner >> l & 1 == 1 {
                    hi[l]
                } else {
                    sign = -sign;
                    lo[l]
                };
                idx += c as usize * stride;
                stride *= s;
            }
            let v = self.sat[idx];
            acc = acc.add(if sign > 0 { v } else { v.neg() });
        }
        acc.value()
    }

    pub fn total(&self) -> f64 {
        let n = self.side();
        self.box_integral(&vec![0; self.d], &vec![n; self.d])
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.values.len() as f64
    }

    /// Value on the unit cell containing a point (relative cell coordinates).
    pub fn value_at_cell(&self, c: &[i64]) -> f64 {
        let n = 1i64 << self.m;
        let mut lin = 0usize;
        let mut stride = 1usize;
        for l in 0..self.d {
            lin += c[l].clamp(0, n - 1) as usize * stride;
            stride *= n as usize;
        }
        self.values[lin]
    }

    /// `(alpha, beta)` for the level-`i` cube `k`, split axis `p` and the
    /// halves `eps` of axes `p+1..d`.
    pub fn alpha_ratios(&self, i: u32, k: &[i64], p: usize, eps: &[u8]) -> (f64, f64) {
        let size = 1i64 << i;
        let half = size / 2;
        let mut lo = vec![0; self.d];
        let mut hi = vec![0; self.d];
        for l in 0..self.d {
            let base = k[l] * size;
            if l <= p {
                lo[l] = base;
                hi[l] = base + size;
            } else {
                lo[l] = base + eps[l - p - 1] as i64 * half;
                hi[l] = lo[l] + half;
            }
        }
        let whole = self.box_integral(&lo, &hi);
        hi[p] = lo[p] + half;
        let a = self.box_integral(&lo, &hi);
        let alpha = a / whole;
        (alpha, 1.0 - alpha)
    }

    /// `E(k)` over all integer-vertex cubes of side `k` inside the domain,
    /// relative to `rho`.
    pub fn e_of(&self, k: i64, rho: f64) -> f64 {
        let n = self.side();
        if k > n {
            return f64::NAN;
        }
        let span = (n - k + 1) as usize;
        let vol = (k as f64).powi(self.d as i32);
        let mut e: f64 = 1.0;
        let mut lo = vec![0i64; self.d];
        for lin in 0..span.pow(self.d as u32) {
            let mut r = lin;
            for l in lo.iter_mut() {
                *l = (r % span) as i64;
                r /= span;
            }
            let hi: Vec<i64> = lo.iter().map(|x| x + k).collect();
            let avg = self.box_integral(&lo, &hi) / vol;
            e = e.max(rho / avg).max(avg / rho);
        }
        e
    }
}

/// Integral of `tau = min(1, dist_inf(x, boundary)/w)` over the unit
/// `(d-1)`-box.
pub fn face_mean_tau(d: usize, w: f64) -> f64 {
    (1.0 - (1.0 - 2.0 * w).powi(d as i32)) / (2.0 * d as f64 * w)
}

/// Core interface height making the transported volume exact.
pub fn interface_height(alpha: f64, d: usize, w: f64) -> Result<f64> {
    if !(w > 0.0 && w <= 0.5) {
        return Err(Error::BlendTooWide { w, alpha });
    }
    let t = face_mean_tau(d, w);
    let hc = 0.5 + (alpha - 0.5) / t;
    if !(hc > 0.0 && hc < 1.0) {
        return Err(Error::BlendTooWide { w, alpha });
    }
    Ok(hc)
}

/// Which piece of a stage a point fell into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Piece {
    pub lower: bool,
    /// `None` on the core, else the axis and side attaining the face distance.
    pub collar: Option<(usize, bool)>,
}

/// One fibre step on normalized coordinates. `c` holds the point in the unit
/// box with `c[p]` the fibre coordinate. Returns the new fibre coordinate,
/// the fibre slope and the piece.
fn fibre(c: &[f64], p: usize, hc: f64, w: f64, inverse: bool) -> (f64, f64, Piece) {
    let s = c[p];
    let mut delta = f64::INFINITY;
    let mut arg = (0, false);
    for (l, &x) in c.iter().enumerate() {
        if l == p {
            continue;
        }
        if x < delta {
            delta = x;
            arg = (l, false);
        }
        if 1.0 - x < delta {
            delta = 1.0 - x;
            arg = (l, true);
        }
    }
    let tau = (delta / w).clamp(0.0, 1.0);
    let collar = if tau < 1.0 { Some(arg) } else { None };
    let h = if tau <= 0.0 { 0.5 } else { 0.5 + tau * (hc - 0.5) };
    if h == 0.5 {
        return (s, 1.0, Piece { lower: s < 0.5, collar });
    }
    if !inverse {
        if s <= 0.5 {
            (2.0 * h * s, 2.0 * h, Piece { lower: true, collar })
        } else {
            (1.0 - 2.0 * (1.0 - h) * (1.0 - s), 2.0 * (1.0 - h), Piece { lower: false, collar })
        }
    } else if s <= h {
        (s / (2.0 * h), 1.0 / (2.0 * h), Piece { lower: true, collar })
    } else {
        (1.0 - (1.0 - s) / (2.0 * (1.0 - h)), 1.0 / (2.0 * (1.0 - h)), Piece { lower: false, collar })
    }
}

/// A single mass-balancing step on an axis-aligned box.
#[derive(Clone, Debug, Serialize)]
pub struct RyStepParams {
    pub split_axis: usize,
    pub alpha: f64,
    pub beta: f64,
    pub blend_width: f64,
    pub origin: Vec<f64>,
    pub size: Vec<f64>,
}

impl RyStepParams {
    pub fn unit(d: usize, split_axis: usize, alpha: f64, blend_width: f64) -> Self {
        RyStepParams {
            split_axis,
            alpha,
            beta: 1.0 - alpha,
            blend_width,
            origin: vec![0.0; d],
            size: vec![1.0; d],
        }
    }

    fn apply(&self, x: &[f64], inverse: bool) -> Result<Vec<f64>> {
        let d = self.origin.len();
        if x.len() != d {
            return Err(Error::OutsideDomain);
        }
        let c: Vec<f64> = (0..d).map(|l| (x[l] - self.origin[l]) / self.size[l]).collect();
        if c.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(Error::OutsideDomain);
        }
        let hc = interface_height(self.alpha, d, self.blend_width)?;
        let p = self.split_axis;
        let (s, _, _) = fibre(&c, p, hc, self.blend_width, inverse);
        let mut y = x.to_vec();
        y[p] += (s - c[p]) * self.size[p];
        Ok(y)
    }
}

pub fn ry_step(params: &RyStepParams, x: &[f64]) -> Result<Vec<f64>> {
    params.apply(x, false)
}

pub fn ry_step_inv(params: &RyStepParams, x: &[f64]) -> Result<Vec<f64>> {
    params.apply(x, true)
}

/// Composed map `Psi = Phi_m o ... o Phi_1`, `Phi_i = Phi_i^{d-1} o ... o Phi_i^0`.
#[derive(Clone, Debug)]
pub struct FlatMap {
    pub density: DensityField,
    pub blend_width: f64,
    /// Per level `i = 1..=m`: `(alpha, h_c)` laid out by cube, axis, eps.
    levels: Vec<Vec<(f64, f64)>>,
}

fn eps_count(d: usize, p: usize) -> usize {
    1 << (d - p - 1)
}

fn axis_offset(d: usize, p: usize) -> usize {
    (0..p).map(|q| eps_count(d, q)).sum()
}

pub fn build_flatmap(density: &DensityField, blend_width: f64) -> Result<FlatMap> {
    let d = density.d;
    let per_cube = (1 << d) - 1;
    let mut levels = Vec::with_capacity(density.m as usize);
    for i in 1..=density.m {
        let n = 1usize << (density.m - i);
        let cubes = n.pow(d as u32);
        let mut v = Vec::with_capacity(cubes * per_cube);
        let mut k = vec![0i64; d];
        for lin in 0..cubes {
            let mut r = lin;
            for kl in k.iter_mut() {
                *kl = (r % n) as i64;
                r /= n;
            }
            for p in 0..d {
                for e in 0..eps_count(d, p) {
                    let eps: Vec<u8> = (0..d - p - 1).map(|j| (e >> j & 1) as u8).collect();
                    let (alpha, _) = density.alpha_ratios(i, &k, p, &eps);
                    v.push((alpha, interface_height(alpha, d, blend_width)?));
                }
            }
        }
        levels.push(v);
    }
    Ok(FlatMap { density: density.clone(), blend_width, levels })
}

/// Trace of one stage for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageTrace {
    pub cube: usize,
    pub eps: usize,
    pub piece: Piece,
}

impl FlatMap {
    pub fn d(&self) -> usize {
        self.density.d
    }

    pub fn m(&self) -> u32 {
        self.density.m
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let n = self.density.side() as f64;
        x.iter().zip(&self.density.origin).all(|(v, o)| *v >= *o as f64 && *v <= *o as f64 + n)
    }

    /// All `(alpha, h_c)` of level `i` (1-based).
    pub fn level_ratios(&self, i: u32) -> &[(f64, f64)] {
        &self.levels[i as usize - 1]
    }

    /// Applies the stage (level `i`, axis `p`) in place; returns the fibre
    /// slope and the trace.
    fn stage(&self, x: &mut [f64], i: u32, p: usize, inverse: bool) -> (f64, StageTrace) {
        let d = self.d();
        let size = (1i64 << i) as f64;
        let half = size / 2.0;
        let n = 1i64 << (self.m() - i);
        let mut c = [0.0f64; 8];
        let mut cube = 0usize;
        let mut stride = 1usize;
        let mut eps = 0usize;
        for l in 0..d {
            let rel = x[l] - self.density.origin[l] as f64;
            let k = ((rel / size).floor() as i64).clamp(0, n - 1);
            cube += k as usize * stride;
            stride *= n as usize;
            let base = k as f64 * size;
            if l <= p {
                c[l] = (rel - base) / size;
            } else {
                let e = usize::from(rel - base >= half);
                eps |= e << (l - p - 1);
                c[l] = (rel - base - e as f64 * half) / half;
            }
        }
        let (_, hc) = self.levels[i as usize - 1][cube * ((1 << d) - 1) + axis_offset(d, p) + eps];
        let (s, slope, piece) = fibre(&c[..d], p, hc, self.blend_width, inverse);
        if s != c[p] {
            x[p] += (s - c[p]) * size;
        }
        (slope, StageTrace { cube, eps, piece })
    }

    /// Forward map in place; identity outside the cube. Returns the
    /// Jacobian determinant (product of fibre slopes).
    pub fn eval_in_place(&self, x: &mut [f64]) -> f64 {
        self.eval_levels(x, self.m())
    }

    /// Applies levels `1..=upto` only.
    pub fn eval_levels(&self, x: &mut [f64], upto: u32) -> f64 {
        if !self.contains(x) {
            return 1.0;
        }
        let mut det = 1.0;
        for i in 1..=upto {
            for p in 0..self.d() {
                det *= self.stage(x, i, p, false).0;
            }
        }
        det
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.eval_in_place(&mut y);
        y
    }

    pub fn inverse_in_place(&self, y: &mut [f64]) {
        if !self.contains(y) {
            return;
        }
        for i in (1..=self.m()).rev() {
            for p in (0..self.d()).rev() {
                self.stage(y, i, p, true);
            }
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        self.inverse_in_place(&mut x);
        x
    }

    /// Forward evaluation recording every stage.
    pub fn trace(&self, x: &[f64]) -> (Vec<f64>, f64, Vec<StageTrace>) {
        let mut y = x.to_vec();
        let mut det = 1.0;
        let mut tr = Vec::new();
        if self.contains(x) {
            for i in 1..=self.m() {
                for p in 0..self.d() {
                    let (s, t) = self.stage(&mut y, i, p, false);
                    det *= s;
                    tr.push(t);
                }
            }
        }
        (y, det, tr)
    }

    /// Target Jacobian `u(Q) / mean(u)` at a point of the cube.
    pub fn target_det(&self, x: &[f64]) -> f64 {
        let c: Vec<i64> = x
            .iter()
            .zip(&self.density.origin)
            .map(|(v, o)| (v - *o as f64).floor() as i64)
            .collect();
        self.density.value_at_cell(&c) / self.density.mean()
    }

    /// Volume tolerance `5 d m w`.
    pub fn tol_vol(&self) -> f64 {
        5.0 * self.d() as f64 * self.m() as f64 * self.blend_width
    }
}

/// The map extended by the identity to all of space.
pub fn extend_identity(map: &FlatMap) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |x| map.eval(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianFd {
    pub matrix: Vec<Vec<f64>>,
    pub det: f64,
    /// Product of fibre slopes at the point.
    pub analytic_det: f64,
    /// `u(Q) / mean(u)`.
    pub target: f64,
    /// All stencil points fell into the same pieces.
    pub smooth: bool,
    /// Every stage evaluated on its core.
    pub core: bool,
}

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Central finite-difference Jacobian with step `h`.
pub fn jacobian_fd(map: &FlatMap, x: &[f64], h: f64) -> JacobianFd {
    let d = map.d();
    let (_, analytic_det, base) = map.trace(x);
    let mut smooth = !base.is_empty();
    let mut matrix = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += h;
        b[j] -= h;
        let (fa, _, ta) = map.trace(&a);
        let (fb, _, tb) = map.trace(&b);
        smooth &= ta == base && tb == base;
        for i in 0..d {
            matrix[i][j] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    let core = base.iter().all(|t| t.piece.collar.is_none());
    JacobianFd { det: det(matrix.clone()), matrix, analytic_det, target: map.target_det(x), smooth, core }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Per-unit-cube volumes of `Psi(Q)` by stratified Monte Carlo on the image
/// cube: one uniform sample per stratum, pulled back with `Psi^{-1}`.
pub fn mc_volumes(map: &FlatMap, samples: usize, seed: u64, exec: Exec) -> Vec<f64> {
    let d = map.d();
    let side = map.density.side();
    let per_axis = ((samples as f64).powf(1.0 / d as f64).round() as usize).max(1);
    let rows = per_axis.pow(d as u32 - 1);
    let cell = side as f64 / per_axis as f64;
    let ncells = map.density.cells();
    let partial = exec.map_range(rows, |row| {
        let mut rng = stream_rng(seed, row as u64);
        let mut counts = vec![0u64; ncells];
        let mut y = vec![0.0; d];
        let mut idx = vec![0usize; d];
        let mut r = row;
        for v in idx.iter_mut().skip(1) {
            *v = r % per_axis;
            r /= per_axis;
        }
        for i0 in 0..per_axis {
            idx[0] = i0;
            for l in 0..d {
                y[l] = map.density.origin[l] as f64 + (idx[l] as f64 + rng.gen::<f64>()) * cell;
            }
            map.inverse_in_place(&mut y);
            counts[cell_lin(map, &y)] += 1;
        }
        counts
    });
    let total = (per_axis.pow(d as u32)) as f64;
    let vol = (side as f64).powi(d as i32);
    let mut out = vec![0.0; ncells];
    for c in partial {
        for (o, v) in out.iter_mut().zip(c) {
            *o += v as f64;
        }
    }
    out.iter_mut().for_each(|v| *v *= vol / total);
    out
}

/// Volume of `Psi(S)` for a set given by its indicator, by stratified
/// Monte Carlo.
pub fn mc_volume_of<F>(map: &FlatMap, samples: usize, seed: u64, exec: Exec, inside: F) -> f64
where
    F: Fn(&[f64]) -> bool + Sync + Send,
{
    let d = map.d();
    let side = map.density.side() as f64;
    let per_axis = ((samples as f64).powf(1.0 / d as f64).round() as usize).max(1);
    let rows = per_axis.pow(d as u32 - 1);
    let cell = side / per_axis as f64;
    let hits: Vec<u64> = exec.map_range(rows, |row| {
        let mut rng = stream_rng(seed, row as u64);
        let mut y = vec![0.0; d];
        let mut idx = vec![0usize; d];
        let mut r = row;
        for v in idx.iter_mut().skip(1) {
            *v = r % per_axis;
            r /= per_axis;
        }
        let mut h = 0;
        for i0 in 0..per_axis {
            idx[0] = i0;
            for l in 0..d {
                y[l] = map.density.origin[l] as f64 + (idx[l] as f64 + rng.gen::<f64>()) * cell;
            }
            map.inverse_in_place(&mut y);
            h += u64::from(inside(&y));
        }
        h
    });
    hits.iter().sum::<u64>() as f64 / per_axis.pow(d as u32) as f64 * side.powi(d as i32)
}

fn cell_lin(map: &FlatMap, x: &[f64]) -> usize {
    let n = map.density.side();
    let mut lin = 0usize;
    let mut stride = 1usize;
    for l in 0..map.d() {
        let c = ((x[l] - map.density.origin[l] as f64).floor() as i64).clamp(0, n - 1);
        lin += c as usize * stride;
        stride *= n as usize;
    }
    lin
}

/// Per-unit-cube volumes of the image after levels `1..=upto`, by the
/// midpoint rule with `q^d` nodes per cube applied to the analytic
/// Jacobian.
pub fn quadrature_volumes(map: &FlatMap, upto: u32, q: usize, exec: Exec) -> Vec<f64> {
    let d = map.d();
    let n = map.density.side();
    exec.map_range(map.density.cells(), |lin| {
        let mut cell = vec![0i64; d];
        let mut r = lin;
        for c in cell.iter_mut() {
            *c = (r % n as usize) as i64;
            r /= n as usize;
        }
        let nodes = q.pow(d as u32);
        let mut acc = 0.0;
        let mut x = vec![0.0; d];
        for node in 0..nodes {
            let mut r = node;
            for l in 0..d {
                x[l] = map.density.origin[l] as f64 + cell[l] as f64 + ((r % q) as f64 + 0.5) / q as f64;
                r /= q;
            }
            acc += map.eval_levels(&mut x, upto);
        }
        acc / nodes as f64
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    pub method: String,
    pub target: Vec<f64>,
    pub measured: Vec<f64>,
    pub max_abs_err: f64,
    pub tol_vol: f64,
    pub ok: bool,
}

/// Compares image volumes of unit cubes with `u(Q) / mean(u)`.
pub fn volume_report(map: &FlatMap, method: &str, measured: Vec<f64>) -> VolumeReport {
    let mean = map.density.mean();
    let target: Vec<f64> = map.density.values.iter().map(|v| v / mean).collect();
    let max_abs_err = target.iter().zip(&measured).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tol_vol = map.tol_vol();
    VolumeReport { method: method.into(), target, measured, max_abs_err, tol_vol, ok: max_abs_err <= tol_vol }
}

/// Telescoping check after levels `1..=i`: the image of every level-`(i-1)`
/// cube has volume `|C_i| * int_{C_{i-1}} u / int_{C_i} u`. Returns the
/// largest absolute deviation.
pub fn telescoping_error(map: &FlatMap, i: u32, q: usize, exec: Exec) -> f64 {
    let vols = quadrature_volumes(map, i, q, exec);
    let d = map.d();
    let n = map.density.side();
    let fine = 1i64 << (i - 1);
    let coarse = 1i64 << i;
    let per = (n / fine) as usize;
    let mut worst: f64 = 0.0;
    for lin in 0..per.pow(d as u32) {
        let mut k = vec![0i64; d];
        let mut r = lin;
        for kl in k.iter_mut() {
            *kl = (r % per) as i64;
            r /= per;
        }
        let lo: Vec<i64> = k.iter().map(|v| v * fine).collect();
        let hi: Vec<i64> = lo.iter().map(|v| v + fine).collect();
        let plo: Vec<i64> = lo.iter().map(|v| v.div_euclid(coarse) * coarse).collect();
        let phi: Vec<i64> = plo.iter().map(|v| v + coarse).collect();
        let target = (coarse as f64).powi(d as i32) * map.density.box_integral(&lo, &hi)
            / map.density.box_integral(&plo, &phi);
        // sum the unit-cube volumes of this sub-cube
        let mut got = 0.0;
        for sub in 0..(fine as usize).pow(d as u32) {
            let mut r = sub;
            let mut clin = 0usize;
            let mut stride = 1usize;
            for l in 0..d {
                let c = lo[l] as usize + r % fine as usize;
                r /= fine as usize;
                clin += c * stride;
                stride *= n as usize;
            }
            got += vols[clin];
        }
        worst = worst.max((got - target).abs());
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaLevel {
    pub level: u32,
    /// `E(2^{i-1})` of the density relative to its mean.
    pub e: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub bracket_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaStar {
    /// Smallest computed `alpha` or `beta`.
    pub measured: f64,
    /// `(1/2) min_i E(2^{i-1})^{-2}`.
    pub analytic: f64,
    pub levels: Vec<EtaLevel>,
    pub ok: bool,
}

/// Measured and analytic lower bounds for the split ratios.
pub fn eta_star_bound(density: &DensityField) -> EtaStar {
    let rho = density.mean();
    let d = density.d;
    let mut levels = Vec::new();
    let mut measured: f64 = 0.5;
    let mut analytic: f64 = 0.5;
    for i in 1..=density.m {
        let e = density.e_of(1 << (i - 1), rho);
        let n = 1usize << (density.m - i);
        let mut lo: f64 = 0.5;
        let mut hi: f64 = 0.5;
        let mut k = vec![0i64; d];
        for lin in 0..n.pow(d as u32) {
            let mut r = lin;
            for kl in k.iter_mut() {
                *kl = (r % n) as i64;
                r /= n;
            }
            for p in 0..d {
                for ev in 0..eps_count(d, p) {
                    let eps: Vec<u8> = (0..d - p - 1).map(|j| (ev >> j & 1) as u8).collect();
                    let (a, b) = density.alpha_ratios(i, &k, p, &eps);
                    lo = lo.min(a).min(b);
                    hi = hi.max(a).max(b);
                }
            }
        }
        let lower = 0.5 / (e * e);
        let upper = 0.5 * e * e;
        measured = measured.min(lo);
        analytic = analytic.min(lower);
        levels.push(EtaLevel {
            level: i,
            e,
            min_ratio: lo,
            max_ratio: hi,
            lower,
            upper,
            bracket_ok: lo >= lower - 1e-12 && hi <= upper + 1e-12,
        });
    }
    let ok = measured >= analytic - 1e-12 && levels.iter().all(|l| l.bracket_ok);
    EtaStar { measured, analytic, levels, ok }
}

/// Stress-suite calibration of the step constant: the largest observed
/// `||grad(Phi - Id)||` and `||grad(Phi^{-1} - Id)||` divided by
/// `|beta - alpha|`, over `alpha` in `[eta, 1 - eta]`.
pub fn calibrate_c_eta(d: usize, w: f64, eta: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let h = 1e-7;
    let t = face_mean_tau(d, w);
    let lo = eta.max(0.5 - 0.5 * t + 1e-6);
    for a in 0..=20 {
        let alpha = lo + (1.0 - 2.0 * lo) * a as f64 / 20.0;
        if (alpha - 0.5).abs() < 1e-3 {
            continue;
        }
        let params = RyStepParams::unit(d, d - 1, alpha, w);
        let gap = (1.0 - 2.0 * alpha).abs();
        for inverse in [false, true] {
            for _ in 0..samples {
                // concentrate samples on the fibre midpoint and the collar edge
                let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(h..1.0 - h)).collect();
                if rng.gen_bool(0.5) {
                    let j = rng.gen_range(0..d - 1);
                    x[j] = (w - rng.gen_range(0.0..0.05 * w)).max(2.0 * h);
                }
                if rng.gen_bool(0.5) {
                    x[d - 1] = if inverse {
                        let hc = interface_height(alpha, d, w).unwrap();
                        (hc - rng.gen_range(0.0..1e-3)).max(2.0 * h)
                    } else {
                        0.5 - rng.gen_range(0.0..1e-3)
                    };
                }
                let f = |y: &[f64]| if inverse { ry_step_inv(&params, y) } else { ry_step(&params, y) };
                let mut row_norm2 = 0.0;
                let mut ok = true;
                // only the split coordinate moves: one nonzero row
                for j in 0..d {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[j] += h;
                    b[j] -= h;
                    match (f(&a), f(&b)) {
                        (Ok(fa), Ok(fb)) => {
                            let g = (fa[d - 1] - fb[d - 1]) / (2.0 * h) - if j == d - 1 { 1.0 } else { 0.0 };
                            row_norm2 += g * g;
                        }
                        _ => ok = false,
                    }
                }
                if ok {
                    worst = worst.max(row_norm2.sqrt() / gap);
                }
            }
        }
    }
    worst
}

/// Closed-form sup of `||grad(Phi - Id)||` and `||grad(Phi^{-1} - Id)||`
/// over `alpha in [eta, 1 - eta]`, divided by `|beta - alpha|`.
pub fn c_eta_closed_form(d: usize, w: f64, eta: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..=200 {
        let alpha = eta + (1.0 - 2.0 * eta) * a as f64 / 200.0;
        let gap = (1.0 - 2.0 * alpha).abs();
        let Ok(hc) = interface_height(alpha, d, w) else { continue };
        if gap < 1e-9 {
            continue;
        }
        let dh = (hc - 0.5).abs();
        let fwd = dh * (1.0 / (w * w) + 4.0).sqrt();
        let mut inv: f64 = 0.0;
        for h in [hc, 0.5] {
            let lower = ((dh / (2.0 * h * w)).powi(2) + ((1.0 - 2.0 * h) / (2.0 * h)).powi(2)).sqrt();
            let upper = ((dh / (2.0 * (1.0 - h) * w)).powi(2) + ((2.0 * h - 1.0) / (2.0 * (1.0 - h))).powi(2)).sqrt();
            inv = inv.max(lower).max(upper);
        }
        worst = worst.max(fwd.max(inv) / gap);
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    #[serde(rename = "K_fwd")]
    pub k_fwd: f64,
    #[serde(rename = "K_inv")]
    pub k_inv: f64,
    /// `prod_i (1 + C/2 (E_i^2 - E_i^{-2}))^d`.
    #[serde(rename = "K_id_bound")]
    pub k_id_bound: f64,
    pub c_eta: f64,
    /// `E(2^{i-1})`, `i = 1..=m`.
    pub e: Vec<f64>,
    pub within_bound: bool,
    pub samples: usize,
}

/// Sampled difference quotients of `Psi` and `Psi^{-1}`; half the pairs are
/// short (length up to 0.1), half are arbitrary.
pub fn lipschitz_estimate(map: &FlatMap, samples: usize, seed: u64, exec: Exec) -> LipschitzReport {
    let d = map.d();
    let side = map.density.side() as f64;
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    let res: Vec<(f64, f64)> = exec.map_range(chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let mut kf: f64 = 0.0;
        let mut ki: f64 = 0.0;
        let o = &map.density.origin;
        for s in 0..per {
            let x: Vec<f64> = (0..d).map(|l| o[l] as f64 + rng.gen::<f64>() * side).collect();
            let y: Vec<f64> = if s % 2 == 0 {
                let r = 10f64.powf(rng.gen_range(-4.0..-1.0));
                x.iter()
                    .enumerate()
                    .map(|(l, v)| (v + r * rng.gen_range(-1.0..1.0)).clamp(o[l] as f64, o[l] as f64 + side))
                    .collect()
            } else {
                (0..d).map(|l| o[l] as f64 + rng.gen::<f64>() * side).collect()
            };
            let dist = crate::geom::dist_n(&x, &y);
            if dist == 0.0 {
                continue;
            }
            kf = kf.max(crate::geom::dist_n(&map.eval(&x), &map.eval(&y)) / dist);
            ki = ki.max(crate::geom::dist_n(&map.inverse(&x), &map.inverse(&y)) / dist);
        }
        (kf, ki)
    });
    let k_fwd = res.iter().map(|r| r.0).fold(0.0, f64::max);
    let k_inv = res.iter().map(|r| r.1).fold(0.0, f64::max);
    let eta = eta_star_bound(&map.density);
    let e: Vec<f64> = eta.levels.iter().map(|l| l.e).collect();
    let c_eta = calibrate_c_eta(d, map.blend_width, eta.measured, 200, seed)
        .max(c_eta_closed_form(d, map.blend_width, eta.measured));
    let k_id_bound = e
        .iter()
        .map(|e| (1.0 + 0.5 * c_eta * (e * e - 1.0 / (e * e))).powi(d as i32))
        .product::<f64>();
    LipschitzReport {
        k_fwd,
        k_inv,
        k_id_bound,
        c_eta,
        e,
        within_bound: k_fwd <= k_id_bound * (1.0 + 1e-9) && k_inv <= k_id_bound * (1.0 + 1e-9),
        samples: per * chunks,
    }
}
