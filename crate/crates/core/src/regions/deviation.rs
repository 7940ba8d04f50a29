use std::collections::HashMap;

use serde::Serialize;

use super::count::{cell_of, PointCounter};
use super::region::GridRegion;
use crate::error::{Error, Result};
use crate::geom::{self, Pt};
use crate::par::Exec;
use crate::subst::{DeloneSetWindow, PointGrid, Window};

/// `e_rho(C) = max(rho |C| / N, N / (rho |C|))` for the half-open square
/// `[lo, lo + side)^2`.
pub fn density_deviation(x: &DeloneSetWindow, lo: Pt, side: f64, rho: f64) -> Result<f64> {
    if !x.window.contains_box(lo, [lo[0] + side, lo[1] + side]) {
        return Err(Error::RegionOutsideWindow);
    }
    let n = PointCounter::new(x).count_box(lo, side);
    e_rho(n, side * side, rho)
}

fn e_rho(n: u64, vol: f64, rho: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroCount);
    }
    let a = rho * vol / n as f64;
    Ok(a.max(1.0 / a))
}

/// Point counts per unit cell of the window's integer hull, with summed-area
/// tables for counts and for the "cell inside window" mask.
pub struct UnitGrid {
    pub lo: [i64; 2],
    pub nx: usize,
    pub ny: usize,
    counts: Vec<i64>,
    mask: Vec<i64>,
}

impl UnitGrid {
    pub fn new(x: &DeloneSetWindow, exec: Exec) -> Self {
        let (a, b) = x.window.bbox();
        let lo = [a[0].floor() as i64, a[1].floor() as i64];
        let hi = [b[0].ceil() as i64, b[1].ceil() as i64];
        let nx = (hi[0] - lo[0]).max(1) as usize;
        let ny = (hi[1] - lo[1]).max(1) as usize;
        let mut raw = vec![0i64; nx * ny];
        for p in &x.points {
            let c = cell_of(*p, 1.0);
            let (i, j) = (c[0] - lo[0], c[1] - lo[1]);
            if i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny {
                raw[j as usize * nx + i as usize] += 1;
            }
        }
        let inside: Vec<i64> = match &x.window {
            Window::Rect { .. } => (0..nx * ny)
                .map(|k| {
                    let (i, j) = ((k % nx) as i64 + lo[0], (k / nx) as i64 + lo[1]);
                    x.window.contains_box([i as f64, j as f64], [(i + 1) as f64, (j + 1) as f64]) as i64
                })
                .collect(),
            Window::Polygon(_) => exec.map_range(nx * ny, |k| {
                let (i, j) = ((k % nx) as i64 + lo[0], (k / nx) as i64 + lo[1]);
                x.window.contains_box([i as f64, j as f64], [(i + 1) as f64, (j + 1) as f64]) as i64
            }),
        };
        UnitGrid { lo, nx, ny, counts: sat(&raw, nx, ny), mask: sat(&inside, nx, ny) }
    }

    fn sum(t: &[i64], nx: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> i64 {
        let w = nx + 1;
        t[y1 * w + x1] - t[y0 * w + x1] - t[y1 * w + x0] + t[y0 * w + x0]
    }

    /// Integer squares `[x, x+k) x [y, y+k)` inside the window, with counts.
    pub fn squares(&self, k: usize) -> Vec<([i64; 2], u64)> {
        let mut out = Vec::new();
        if k == 0 || k > self.nx || k > self.ny {
            return out;
        }
        let full = (k * k) as i64;
        for y in 0..=self.ny - k {
            for x in 0..=self.nx - k {
                if Self::sum(&self.mask, self.nx, x, y, x + k, y + k) == full {
                    let n = Self::sum(&self.counts, self.nx, x, y, x + k, y + k) as u64;
                    out.push(([x as i64 + self.lo[0], y as i64 + self.lo[1]], n));
                }
            }
        }
        out
    }

    /// Total count over all cells of the hull.
    pub fn total(&self) -> u64 {
        Self::sum(&self.counts, self.nx, 0, 0, self.nx, self.ny) as u64
    }
}

fn sat(raw: &[i64], nx: usize, ny: usize) -> Vec<i64> {
    let w = nx + 1;
    let mut t = vec![0i64; w * (ny + 1)];
    for y in 0..ny {
        let mut row = 0;
        for x in 0..nx {
            row += raw[y * nx + x];
            t[(y + 1) * w + x + 1] = t[y * w + x + 1] + row;
        }
    }
    t
}

/// Minimum number of translates per size below which a statistic is
/// reported as censored.
pub const MIN_TRANSLATES: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct EEntry {
    pub k: usize,
    /// `None` when some cube is empty (the ratio is unbounded).
    pub e: Option<f64>,
    pub translates: usize,
    pub censored: bool,
    /// Lower corner of the maximizing cube.
    pub argmax: Option<[i64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EProfile {
    pub rho: f64,
    pub entries: Vec<EEntry>,
    /// `(m, prod_{1 <= j <= m} E(2^j))` over the dyadic sizes present.
    pub partial_products: Vec<(u32, f64)>,
}

pub fn e_profile(x: &DeloneSetWindow, rho: f64, ks: &[usize]) -> EProfile {
    e_profile_with(&UnitGrid::new(x, Exec::default()), rho, ks)
}

pub fn e_profile_with(grid: &UnitGrid, rho: f64, ks: &[usize]) -> EProfile {
    let entries: Vec<EEntry> = ks
        .iter()
        .map(|&k| {
            let sq = grid.squares(k);
            let vol = (k * k) as f64;
            let mut best: Option<(f64, [i64; 2])> = None;
            let mut unbounded = false;
            for &(c, n) in &sq {
                match e_rho(n, vol, rho) {
                    Ok(e) => {
                        if best.is_none_or(|(b, _)| e > b) {
                            best = Some((e, c));
                        }
                    }
                    Err(_) => {
                        unbounded = true;
                        best = Some((f64::INFINITY, c));
                        break;
                    }
                }
            }
            EEntry {
                k,
                e: if unbounded { None } else { best.map(|b| b.0) },
                translates: sq.len(),
                censored: sq.len() < MIN_TRANSLATES,
                argmax: best.map(|b| b.1),
            }
        })
        .collect();
    let mut partial_products = Vec::new();
    let mut acc = 1.0;
    for m in 1..usize::BITS {
        let k = 1usize << m;
        let Some(e) = entries.iter().find(|e| e.k == k) else { break };
        acc *= e.e.unwrap_or(f64::INFINITY);
        partial_products.push((m, acc));
    }
    EProfile { rho, entries, partial_products }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityFit {
    pub rho_hat: f64,
    /// `None` when every deviation is exactly zero.
    pub delta_hat: Option<f64>,
    pub delta_se: Option<f64>,
    pub t_stat: Option<f64>,
    pub exact: bool,
    #[serde(rename = "M_prime")]
    pub m_prime: Option<f64>,
    pub l_min: usize,
    pub sizes: Vec<usize>,
    /// Max over translates of `|N - rho_hat k^2|`, per size.
    pub max_dev: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Window area used for the global density.
pub fn window_area(w: &Window) -> f64 {
    match w {
        Window::Rect { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        Window::Polygon(p) => geom::signed_area(p).abs(),
    }
}

pub fn fit_deviation(x: &DeloneSetWindow) -> Result<DensityFit> {
    let grid = UnitGrid::new(x, Exec::default());
    let rho_hat = x.points.iter().filter(|p| x.window.contains(**p)).count() as f64 / window_area(&x.window);
    let side = grid.nx.min(grid.ny);
    if side < 64 {
        return Err(Error::Degenerate(format!("window side {side} is below 64 units")));
    }
    let top = (usize::BITS - 1 - side.leading_zeros()) - 1;
    let mut sizes = Vec::new();
    let mut max_dev = Vec::new();
    let mut max_e = Vec::new();
    for m in 3..=top {
        let k = 1usize << m;
        let sq = grid.squares(k);
        if sq.is_empty() {
            continue;
        }
        let vol = (k * k) as f64;
        let dev = sq.iter().map(|&(_, n)| (n as f64 - rho_hat * vol).abs()).fold(0.0, f64::max);
        let e = sq
            .iter()
            .map(|&(_, n)| e_rho(n, vol, rho_hat).unwrap_or(f64::INFINITY))
            .fold(1.0, f64::max);
        sizes.push(k);
        max_dev.push(dev);
        max_e.push(e);
    }
    if sizes.len() < 3 {
        return Err(Error::Degenerate(format!("only {} dyadic sizes fit in the window", sizes.len())));
    }
    let l_min = sizes[0];
    if max_dev.iter().all(|&d| d < 1e-9) {
        return Ok(DensityFit {
            rho_hat,
            delta_hat: None,
            delta_se: None,
            t_stat: None,
            exact: true,
            m_prime: Some(0.0),
            l_min,
            sizes,
            max_dev,
            residuals: Vec::new(),
        });
    }
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&max_dev)
        .filter(|(_, &d)| d > 1e-9)
        .map(|(&k, &d)| ((k as f64).ln(), d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 sizes with nonzero deviation".into()));
    }
    let (slope, intercept, se) = linreg(&pts);
    let residuals = pts.iter().map(|&(a, b)| b - (intercept + slope * a)).collect();
    let delta_hat = 2.0 - slope;
    let m_prime = sizes.iter().zip(&max_e).map(|(&k, &e)| (e - 1.0) * (k as f64).powf(delta_hat)).fold(0.0, f64::max);
    Ok(DensityFit {
        rho_hat,
        delta_hat: Some(delta_hat),
        delta_se: Some(se),
        t_stat: Some(delta_hat / se),
        exact: false,
        m_prime: Some(m_prime),
        l_min,
        sizes,
        max_dev,
        residuals,
    })
}

/// Least squares line `y = a + b x`; returns `(b, a, se(b))`.
fn linreg(p: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = p.iter().map(|q| (q.1 - a - b * q.0).powi(2)).sum();
    let se = if p.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (b, a, se)
}

#[derive(Clone, Debug, Serialize)]
pub struct LaczkovichRatio {
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    pub argmax: usize,
    pub ratios: Vec<f64>,
}

/// `max_U |N(X,U) - alpha |U|| / |dU|`.
pub fn laczkovich_ratio(x: &DeloneSetWindow, alpha: f64, regions: &[GridRegion], exec: Exec) -> Result<LaczkovichRatio> {
    let pc = PointCounter::new(x);
    let ratios: Vec<Result<f64>> = exec.map(regions, |u| {
        if u.is_empty() {
            return Err(Error::Degenerate("empty region has no boundary".into()));
        }
        let n = pc.count(u)?;
        Ok((n as f64 - alpha * u.measure()).abs() / u.boundary_measure())
    });
    let ratios: Vec<f64> = ratios.into_iter().collect::<Result<_>>()?;
    let (argmax, k_hat) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(LaczkovichRatio { k_hat, argmax, ratios })
}

#[derive(Clone, Debug, Serialize)]
pub struct RepetitivityEntry {
    pub r: f64,
    /// Estimated `M_X(r)`; `None` when censored.
    pub m: Option<f64>,
    pub classes: usize,
    pub samples: usize,
    pub censored: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RepetitivityEstimate {
    pub entries: Vec<RepetitivityEntry>,
    /// `max M / r` over uncensored entries.
    pub slope: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct RepetitivityOptions {
    /// Spacing of the grid of sampled centres (anchored at the window corner).
    pub spacing: f64,
    /// Minimum number of usable centres for an uncensored result.
    pub min_samples: usize,
}

impl Default for RepetitivityOptions {
    fn default() -> Self {
        RepetitivityOptions { spacing: 0.5, min_samples: 10 }
    }
}

type PatchKey = Vec<(i64, i64)>;

fn patch_key(x: &DeloneSetWindow, grid: &PointGrid, c: Pt, r: f64) -> PatchKey {
    let mut k: PatchKey = grid
        .within(c, r + 1e-7)
        .into_iter()
        .map(|j| {
            let p = x.points[j];
            (((p[0] - c[0]) * 1e6).round() as i64, ((p[1] - c[1]) * 1e6).round() as i64)
        })
        .collect();
    k.sort_unstable();
    k
}

/// Sampled repetitivity function: for each `r`, the largest distance from a
/// sampled centre `z` to the nearest occurrence of some `r`-patch.
pub fn repetitivity_estimate(x: &DeloneSetWindow, rs: &[f64], opts: RepetitivityOptions, exec: Exec) -> RepetitivityEstimate {
    let (wlo, whi) = x.window.bbox();
    let grid = PointGrid::new(&x.points, 1.0f64.max(rs.iter().copied().fold(0.0, f64::max) / 2.0));
    let ball_in = |c: Pt, rad: f64| x.window.margin(c) >= rad - 1e-9;
    let entries = rs
        .iter()
        .map(|&r| {
            // eligible occurrence centres and their patch classes
            let centres: Vec<usize> = (0..x.points.len()).filter(|&i| ball_in(x.points[i], r)).collect();
            let keys = exec.map(&centres, |&i| patch_key(x, &grid, x.points[i], r));
            let mut class_of: HashMap<PatchKey, usize> = HashMap::new();
            let mut cls = vec![0usize; x.points.len()];
            for (&i, k) in centres.iter().zip(keys) {
                let next = class_of.len();
                cls[i] = *class_of.entry(k).or_insert(next);
            }
            let classes = class_of.len();
            let mut eligible = vec![false; x.points.len()];
            for &i in &centres {
                eligible[i] = true;
            }
            let nx = ((whi[0] - wlo[0]) / opts.spacing).floor() as usize;
            let ny = ((whi[1] - wlo[1]) / opts.spacing).floor() as usize;
            let zs: Vec<Pt> = (0..=ny)
                .flat_map(|j| (0..=nx).map(move |i| [wlo[0] + i as f64 * opts.spacing, wlo[1] + j as f64 * opts.spacing]))
                .filter(|&z| ball_in(z, r))
                .collect();
            // a centre is usable when the ball reaching every class, grown
            // by r, still lies in the window
            let found: Vec<Option<f64>> = exec.map(&zs, |&z| {
                if classes == 0 {
                    return None;
                }
                let reach = x.window.margin(z) - r;
                let mut near: Vec<(f64, usize)> = grid
                    .within(z, reach)
                    .into_iter()
                    .filter(|&j| eligible[j])
                    .map(|j| (geom::dist(z, x.points[j]), cls[j]))
                    .collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut seen = vec![false; classes];
                let mut left = classes;
                for (d, c) in near {
                    if !seen[c] {
                        seen[c] = true;
                        left -= 1;
                        if left == 0 {
                            return Some(d);
                        }
                    }
                }
                None
            });
            let ok: Vec<f64> = found.into_iter().flatten().collect();
            let censored = ok.len() < opts.min_samples;
            RepetitivityEntry {
                r,
                m: (!censored).then(|| ok.iter().copied().fold(0.0, f64::max)),
                classes,
                samples: ok.len(),
                censored,
            }
        })
        .collect::<Vec<_>>();
    let slope = entries.iter().filter_map(|e| e.m.map(|m| m / e.r)).reduce(f64::max);
    RepetitivityEstimate { entries, slope }
}
