//! Substitution matrix and its Perron-Frobenius data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::subst::{FieldCoord, Isometry, SubstitutionRule};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubstitutionMatrix {
    pub n: usize,
    /// `m[i][j]`: number of type-`j` tiles in the decomposition of a type-`i` tile.
    pub m: Vec<Vec<u64>>,
    /// Prototile index -> type index.
    pub type_map: Vec<usize>,
    /// Representative prototile id of each type.
    pub type_ids: Vec<String>,
    pub lambda: f64,
    #[serde(skip)]
    pub lambda_exact: Option<FieldCoord>,
    pub d: usize,
    /// Area of each type's prototile.
    pub volumes: Vec<f64>,
}

impl SubstitutionMatrix {
    /// Matrix given directly; volumes default to ones.
    pub fn from_rows(rows: Vec<Vec<u64>>, lambda: f64, d: usize) -> Self {
        let n = rows.len();
        SubstitutionMatrix {
            n,
            type_map: (0..n).collect(),
            type_ids: (0..n).map(|i| i.to_string()).collect(),
            m: rows,
            lambda,
            lambda_exact: None,
            d,
            volumes: vec![1.0; n],
        }
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.m.iter().map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum()).collect()
    }

    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.m[i][j] as f64 * x[i]).sum()).collect()
    }

    /// Maximum column sum.
    pub fn one_norm(&self) -> u64 {
        (0..self.n).map(|j| (0..self.n).map(|i| self.m[i][j]).sum()).max().unwrap_or(0)
    }

    /// Maximum row sum, i.e. the largest number of children of a tile.
    pub fn max_children(&self) -> u64 {
        self.m.iter().map(|r| r.iter().sum()).max().unwrap_or(0)
    }

    /// `M^l` with saturating integer arithmetic.
    pub fn pow(&self, l: u32) -> Vec<Vec<u64>> {
        let n = self.n;
        let mut acc: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect();
        for _ in 0..l {
            acc = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n).fold(0u64, |s, k| s.saturating_add(acc[i][k].saturating_mul(self.m[k][j])))
                        })
                        .collect()
                })
                .collect();
        }
        acc
    }
}

type TileKey = (Vec<Vec<i64>>, Option<String>);

fn key_of(verts: &[FieldCoord], color: &Option<String>) -> TileKey {
    let mut v: Vec<Vec<i64>> = verts.iter().map(|z| z.coeffs().to_vec()).collect();
    v.sort();
    (v, color.clone())
}

/// The isometry `O` with `O(p_i) = p_j` and `O(S_{p_i}) = S_{p_j}`, if any.
fn equivalence(rule: &SubstitutionRule, i: usize, j: usize) -> Option<Isometry> {
    let ring = rule.ring();
    let (pi, pj) = (&rule.prototiles[i], &rule.prototiles[j]);
    if pi.vertices.len() != pj.vertices.len() || pi.color != pj.color {
        return None;
    }
    let one = FieldCoord::integer(ring, 1);
    let kids = |k: usize, o: &Isometry| -> Vec<TileKey> {
        let mut v: Vec<TileKey> = rule.children[k]
            .iter()
            .map(|c| {
                let iso = o.compose(&rule.isometry(&c.placement));
                key_of(&rule.placed_vertices(c.prototile, &iso, &one), &rule.prototiles[c.prototile].color)
            })
            .collect();
        v.sort();
        v
    };
    let target = key_of(&pj.vertices, &None).0;
    let target_kids = kids(j, &Isometry::identity(ring));
    let step = ring as u32 / rule.rotation_count();
    let refls: &[bool] = if rule.allows_reflection() { &[false, true] } else { &[false] };
    for k in 0..rule.rotation_count() {
        for &refl in refls {
            let lin = Isometry { rot: (k * step) as u8, refl, t: FieldCoord::zero(ring) };
            let moved: Vec<FieldCoord> = pi.vertices.iter().map(|&z| lin.apply(z)).collect();
            for a in &moved {
                let t = pj.vertices[0] - *a;
                let mut img: Vec<Vec<i64>> = moved.iter().map(|&z| (z + t).coeffs().to_vec()).collect();
                img.sort();
                if img != target {
                    continue;
                }
                let o = Isometry { rot: lin.rot, refl, t };
                let big = Isometry { rot: o.rot, refl, t: rule.lambda * t };
                if kids(i, &big) == target_kids {
                    return Some(o);
                }
            }
        }
    }
    None
}

/// Substitution matrix over tile types (classes of prototiles identified by
/// an isometry of the point group mapping both tile and decomposition).
pub fn build_matrix(rule: &SubstitutionRule) -> SubstitutionMatrix {
    let np = rule.prototiles.len();
    let mut type_map = vec![usize::MAX; np];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..np {
        if let Some(t) = reps.iter().position(|&r| equivalence(rule, r, i).is_some()) {
            type_map[i] = t;
        } else {
            type_map[i] = reps.len();
            reps.push(i);
        }
    }
    let n = reps.len();
    let m = reps
        .iter()
        .map(|&r| {
            let mut row = vec![0u64; n];
            for c in &rule.children[r] {
                row[type_map[c.prototile]] += 1;
            }
            row
        })
        .collect();
    SubstitutionMatrix {
        n,
        m,
        type_ids: reps.iter().map(|&r| rule.prototiles[r].id.clone()).collect(),
        type_map,
        lambda: rule.lambda_f64(),
        lambda_exact: Some(rule.lambda),
        d: rule.dim(),
        volumes: reps.iter().map(|&r| rule.prototile_area(r)).collect(),
    }
}

/// `M^k > 0` for some `k <= n^2 - 2n + 2`.
pub fn is_primitive(mat: &SubstitutionMatrix) -> bool {
    let n = mat.n;
    if n == 0 {
        return false;
    }
    let b: Vec<Vec<bool>> = mat.m.iter().map(|r| r.iter().map(|&x| x > 0).collect()).collect();
    let bound = n * n + 2 - 2 * n;
    let mut p = b.clone();
    for _ in 0..bound {
        if p.iter().all(|r| r.iter().all(|&x| x)) {
            return true;
        }
        p = (0..n).map(|i| (0..n).map(|j| (0..n).any(|k| p[i][k] && b[k][j])).collect()).collect();
    }
    p.iter().all(|r| r.iter().all(|&x| x))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub primitive: bool,
    pub mu: f64,
    /// Right Perron vector, 1-normalized.
    pub v: Vec<f64>,
    /// Left Perron vector, 1-normalized.
    pub u: Vec<f64>,
    /// Largest modulus among the remaining eigenvalues (0 when n = 1).
    pub r: f64,
    pub pisot: bool,
    /// `|r - 1| < 1e-8`: classification not decided numerically.
    pub indeterminate: bool,
    pub thm2_applicable: bool,
    pub one_norm: u64,
    pub max_children: u64,
    pub alpha: f64,
    pub lambda: f64,
    pub mu_matches_lambda: bool,
    /// Relative residual of `M w = lambda^d w` for the type volumes.
    pub volume_residual: f64,
    /// Perron root as found by the polynomial / Schur route.
    pub mu_roots: f64,
    /// All eigenvalues `(re, im)`, by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
}

fn normalize1(x: &mut [f64]) {
    let s: f64 = x.iter().map(|v| v.abs()).sum();
    x.iter_mut().for_each(|v| *v /= s);
}

fn perron(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> (f64, Vec<f64>) {
    let mut x = vec![1.0 / n as f64; n];
    let mut mu = 0.0;
    for it in 0..200_000 {
        let mut y = apply(&x);
        let s: f64 = y.iter().sum();
        normalize1(&mut y);
        let diff: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        let done = (s - mu).abs() <= 1e-15 * s && diff <= 1e-15 && it > 2;
        mu = s;
        x = y;
        if done {
            break;
        }
    }
    // refine with the Rayleigh-type quotient on the converged vector
    let y = apply(&x);
    let num: f64 = y.iter().sum();
    (num / x.iter().sum::<f64>(), x)
}

/// Characteristic polynomial coefficients (monic, highest degree first) by
/// Faddeev-LeVerrier in exact integers.
pub fn char_poly(mat: &SubstitutionMatrix) -> Option<Vec<i128>> {
    let n = mat.n;
    let a: Vec<Vec<i128>> = mat.m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut coeffs = vec![1i128];
    let mut mk: Vec<Vec<i128>> = vec![vec![0; n]; n];
    let mut c_prev = 1i128;
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0i128;
                for l in 0..n {
                    s = s.checked_add(a[i][l].checked_mul(mk[l][j])?)?;
                }
                if i == j {
                    s = s.checked_add(c_prev)?;
                }
                next[i][j] = s;
            }
        }
        mk = next;
        let mut tr = 0i128;
        for i in 0..n {
            for l in 0..n {
                tr = tr.checked_add(a[i][l].checked_mul(mk[l][i])?)?;
            }
        }
        if tr % k as i128 != 0 {
            return None;
        }
        c_prev = -tr / k as i128;
        coeffs.push(c_prev);
    }
    Some(coeffs)
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Roots of a monic real polynomial (highest degree first) by the Aberth
/// method, polished by Newton steps.
pub fn aberth_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let bound = 1.0 + c[1..].iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(bound * 0.5, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    for _ in 0..2000 {
        let mut moved: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = horner(c, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let w = p / dp;
            let s: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = w / (1.0 - w * s);
            if step.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    for zk in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(c, *zk);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *zk - p / dp;
            if horner(c, next).0.norm() < p.norm() {
                *zk = next;
            } else {
                break;
            }
        }
    }
    z
}

pub fn eigenvalues(mat: &SubstitutionMatrix) -> Vec<Complex64> {
    if mat.n <= 12 {
        if let Some(cp) = char_poly(mat) {
            let c: Vec<f64> = cp.iter().map(|&x| x as f64).collect();
            return aberth_roots(&c);
        }
    }
    let a = DMatrix::from_fn(mat.n, mat.n, |i, j| mat.m[i][j] as f64);
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_report(mat: &SubstitutionMatrix) -> Result<SpectralReport> {
    if !is_primitive(mat) {
        return Err(Error::NotPrimitive);
    }
    let n = mat.n;
    let (mu, v) = perron(|x| mat.mul_vec(x), n);
    let (_, u) = perron(|x| mat.tmul_vec(x), n);
    let mut ev = eigenvalues(mat);
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    let k = (0..ev.len())
        .min_by(|&a, &b| (ev[a] - mu).norm().total_cmp(&(ev[b] - mu).norm()))
        .unwrap_or(0);
    let mu_roots = ev.get(k).map_or(mu, |z| z.re);
    let r = ev.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, z)| z.norm()).fold(0.0, f64::max);
    let lam_d = mat.lambda.powi(mat.d as i32);
    let mw = mat.mul_vec(&mat.volumes);
    let wn: f64 = mat.volumes.iter().map(|x| x.abs()).sum();
    let volume_residual = mw.iter().zip(&mat.volumes).map(|(a, b)| (a - lam_d * b).abs()).sum::<f64>() / (lam_d * wn);
    let e = vec![1.0 / (n as f64).sqrt(); n];
    let alpha = dot(&u, &e) / dot(&u, &v);
    let indeterminate = (r - 1.0).abs() < 1e-8;
    Ok(SpectralReport {
        primitive: true,
        mu,
        v,
        u,
        r,
        pisot: r < 1.0 && !indeterminate,
        indeterminate,
        thm2_applicable: r < mat.lambda,
        one_norm: mat.one_norm(),
        max_children: mat.max_children(),
        alpha,
        lambda: mat.lambda,
        mu_matches_lambda: (mu - lam_d).abs() <= 1e-9 * lam_d.max(1.0),
        volume_residual,
        mu_roots,
        eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct PfBound {
    #[serde(rename = "K_est")]
    pub k_est: f64,
    pub alpha: f64,
    pub rho: f64,
    /// `|M^l e - alpha mu^l v|_1 / rho^l` for `l = 1..=l_max`.
    pub ratios: Vec<f64>,
}

/// Deviation of `M^l e` from its Perron component, `e` the normalized
/// all-ones vector.
pub fn pf_bound(mat: &SubstitutionMatrix, rho: f64, l_max: u32) -> Result<PfBound> {
    let rep = spectral_report(mat)?;
    if rho <= rep.r {
        return Err(Error::RhoTooSmall { rho, r: rep.r });
    }
    let n = mat.n;
    let uv = dot(&rep.u, &rep.v);
    let e = vec![1.0 / (n as f64).sqrt(); n];
    let alpha = dot(&rep.u, &e) / uv;
    // M^l e - alpha mu^l v = M^l (e - alpha v); the Perron component is
    // projected out after every step to keep rounding from growing like mu^l
    let mut x: Vec<f64> = e.iter().zip(&rep.v).map(|(a, b)| a - alpha * b).collect();
    let mut ratios = Vec::with_capacity(l_max as usize);
    for l in 1..=l_max {
        x = mat.mul_vec(&x);
        let c = dot(&rep.u, &x) / uv;
        x.iter_mut().zip(&rep.v).for_each(|(a, b)| *a -= c * b);
        let norm: f64 = x.iter().map(|a| a.abs()).sum();
        ratios.push(norm / rho.powi(l as i32));
    }
    let k_est = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PfBound { k_est, alpha, rho, ratios })
}
