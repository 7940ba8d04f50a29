use std::path::PathBuf;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use rectiling::flattener::{
    build_flatmap, eta_star_bound, lipschitz_estimate, quadrature_volumes, volume_report, DensityField,
};
use rectiling::geom::Pt;
use rectiling::hierarchy::{
    auto_delta, ball_meet_check, decompose, discrepancy_via_hierarchy, random_fitted_region, verify_bounds,
    BoundReport, Discrepancy, InvariantReport,
};
use rectiling::io::{self, svg};
use rectiling::rectifier::{
    auto_cell, bounded_displacement_match_with, density_from_points, rectify as run_rectify, MatchOptions, Matching,
    RectifyOptions,
};
use rectiling::regions::{
    count_checks, e_profile, fit_deviation, laczkovich_ratio, random_connected_region, region_in_window,
    repetitivity_estimate, window_area, CountChecks, GridRegion, PointCounter, RepetitivityOptions,
};
use rectiling::spectral::{build_matrix, spectral_report};
use rectiling::subst::{
    delone_set, generate as gen_patch, geometry_stats, load_rule, validate_rule, DeloneSetWindow, HierarchicalPatch,
    Window,
};
use rectiling::{Error, Exec};

use crate::output::{Out, RunConfig};

pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: u64,
}

pub enum Status {
    Clean,
    Violations(usize),
}

impl Status {
    fn from_count(n: usize) -> Self {
        if n == 0 {
            Status::Clean
        } else {
            Status::Violations(n)
        }
    }
}

fn config(ctx: &Ctx, command: &str, options: &impl Serialize) -> RunConfig {
    let options = serde_json::to_value(options).unwrap_or(Value::Null);
    let get = |k: &str| options.get(k).cloned().unwrap_or(Value::Null);
    RunConfig {
        command: command.into(),
        rule: get("rule").as_str().map(str::to_string),
        depth: get("depth").as_u64().map(|d| d as u32),
        delta: match get("delta") {
            Value::Null => None,
            Value::String(s) => Some(s),
            v => Some(v.to_string()),
        },
        rho: get("rho").as_f64(),
        window: match get("window") {
            Value::Null => None,
            Value::String(s) => Some(s),
            v => Some(v.to_string()),
        },
        seed: ctx.seed,
        out_dir: ctx.out_dir.display().to_string(),
        options,
    }
}

fn load_patch(rule: &str, seed_tile: Option<&str>, depth: u32) -> Result<HierarchicalPatch> {
    let r = load_rule(rule).with_context(|| format!("loading rule `{rule}`"))?;
    let v = validate_rule(&r);
    if !v.valid {
        bail!("rule `{}` failed validation: {}", r.name, v.summary());
    }
    let seed = seed_tile.map(str::to_string).unwrap_or_else(|| r.prototiles[0].id.clone());
    Ok(gen_patch(&r, &seed, depth)?)
}

fn parse_list(s: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()?;
    ensure!(v.len() == n, "expected {n} comma-separated numbers, got `{s}`");
    Ok(v)
}

fn load_points(path: &PathBuf, window: Option<&str>) -> Result<DeloneSetWindow> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let pts = io::read_points_csv(&text)?;
    ensure!(pts.len() >= 2, "need at least two points in {}", path.display());
    let w = match window {
        Some(s) => {
            let v = parse_list(s, 4)?;
            Window::Rect { lo: [v[0], v[1]], hi: [v[2], v[3]] }
        }
        None => {
            let (lo, hi) = rectiling::geom::bbox(&pts);
            Window::Rect { lo, hi }
        }
    };
    Ok(DeloneSetWindow::from_points(pts, w))
}

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    /// Built-in rule name or path to a rule file.
    #[arg(long)]
    pub rule: String,
    #[arg(long)]
    pub depth: u32,
    /// Prototile id of the seed (first prototile by default).
    #[arg(long)]
    pub seed_tile: Option<String>,
    /// Also render the patch as SVG.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value_t = 0)]
    pub svg_level: u32,
}

pub fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<Status> {
    let p = load_patch(&a.rule, a.seed_tile.as_deref(), a.depth)?;
    let mut out = Out::new(&ctx.out_dir, config(ctx, "generate", a))?;
    let levels: Vec<u32> = (0..=p.depth).collect();
    out.json("patch.json", io::patch_json(&p, &levels))?;
    let x = delone_set(&p);
    let extra = [format!("r={}", x.r.unwrap_or(f64::NAN)), format!("R={}", x.big_r.unwrap_or(f64::NAN))];
    out.csv("delone.csv", &extra, &io::points_csv(&x.points))?;
    if a.svg {
        ensure!(a.svg_level <= p.depth, "svg level {} exceeds depth {}", a.svg_level, p.depth);
        out.svg("patch.svg", |m| svg::patch(&p, a.svg_level, m))?;
    }
    println!("{} tiles at level 0", p.tiles(0).len());
    out.summary();
    Ok(Status::Clean)
}

#[derive(Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long, required_unless_present = "points", conflicts_with = "points")]
    pub rule: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub depth: u32,
    /// CSV of points to analyze instead of a generated patch.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Window `x0,y0,x1,y1` for ingested points (bounding box by default).
    #[arg(long)]
    pub window: Option<String>,
    /// Density used for the E-profile and the discrepancy ratio.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Random connected regions for the discrepancy ratio.
    #[arg(long, default_value_t = 200)]
    pub regions: usize,
    #[arg(long, default_value_t = 4.0)]
    pub delta: f64,
    /// Cells per random region.
    #[arg(long, default_value_t = 60)]
    pub cells: usize,
    /// Also estimate the repetitivity function.
    #[arg(long)]
    pub repetitivity: bool,
}

fn random_regions(x: &DeloneSetWindow, delta: f64, count: usize, cells: usize, rng: &mut ChaCha8Rng) -> Vec<GridRegion> {
    let (lo, hi) = x.window.bbox();
    let c0 = [(lo[0] / delta).ceil() as i64, (lo[1] / delta).ceil() as i64];
    let c1 = [(hi[0] / delta).floor() as i64 - 1, (hi[1] / delta).floor() as i64 - 1];
    if c1[0] < c0[0] || c1[1] < c0[1] {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 50 * count {
        tries += 1;
        let o = [rng.gen_range(c0[0]..=c1[0]), rng.gen_range(c0[1]..=c1[1])];
        let u = random_connected_region(rng, delta, cells, o, c0, c1);
        if region_in_window(&x.window, &u) {
            out.push(u);
        }
    }
    out
}

pub fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<Status> {
    let mut report = serde_json::Map::new();
    let x = match (&a.rule, &a.points) {
        (Some(rule), _) => {
            let p = load_patch(rule, None, a.depth)?;
            let mat = build_matrix(&p.rule);
            report.insert("spectral".into(), serde_json::to_value(spectral_report(&mat)?)?);
            report.insert("geometry".into(), serde_json::to_value(geometry_stats(&p, 0))?);
            delone_set(&p)
        }
        (None, Some(path)) => load_points(path, a.window.as_deref())?,
        (None, None) => bail!("one of --rule or --points is required"),
    };
    let mut out = Out::new(&ctx.out_dir, config(ctx, "analyze", a))?;
    let mut censored: Vec<String> = Vec::new();
    let fit = fit_deviation(&x);
    let rho = match (&fit, a.rho) {
        (_, Some(r)) => r,
        (Ok(f), None) => f.rho_hat,
        (Err(_), None) => {
            let inside = x.points.iter().filter(|p| x.window.contains(**p)).count();
            inside as f64 / window_area(&x.window)
        }
    };
    ensure!(rho > 0.0, "density must be positive");
    match &fit {
        Ok(f) => {
            report.insert("fit".into(), serde_json::to_value(f)?);
        }
        Err(e) => {
            censored.push(format!("fit: {e}"));
            report.insert("fit".into(), Value::Null);
        }
    }
    report.insert("points".into(), json!(x.points.len()));
    report.insert("rho".into(), json!(rho));

    let (lo, hi) = x.window.bbox();
    let side = (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let ks: Vec<usize> = (1..).map(|m| 1usize << m).take_while(|&k| 2.0 * k as f64 <= side).collect();
    let prof = e_profile(&x, rho, &ks);
    for e in prof.entries.iter().filter(|e| e.censored) {
        censored.push(format!("E({}) from {} translates", e.k, e.translates));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let regions = random_regions(&x, a.delta, a.regions, a.cells, &mut rng);
    if regions.len() < a.regions {
        censored.push(format!("only {} of {} regions fit in the window", regions.len(), a.regions));
    }
    if !regions.is_empty() {
        report.insert("laczkovich".into(), serde_json::to_value(laczkovich_ratio(&x, rho, &regions, Exec::Parallel)?)?);
    }
    if a.repetitivity {
        let est = repetitivity_estimate(&x, &[2.0, 4.0, 8.0], RepetitivityOptions::default(), Exec::Parallel);
        report.insert("repetitivity".into(), serde_json::to_value(est)?);
    }
    report.insert("e_profile".into(), serde_json::to_value(&prof)?);
    report.insert("censored".into(), json!(censored));

    let mut body = String::from("k,E,translates,censored\n");
    for e in &prof.entries {
        body.push_str(&format!(
            "{},{},{},{}\n",
            e.k,
            e.e.map(|v| v.to_string()).unwrap_or_default(),
            e.translates,
            e.censored
        ));
    }
    out.csv("e_profile.csv", &[format!("rho={rho}")], &body)?;
    let series = vec![(
        "E(k)".to_string(),
        prof.entries.iter().map(|e| ((e.k as f64).log2(), e.e.unwrap_or(f64::NAN))).collect::<Vec<_>>(),
    )];
    out.svg("e_profile.svg", |m| svg::line_chart("E-profile", "log2 k", "E", &series, m))?;
    out.json("analyze.json", Value::Object(report))?;
    for c in &censored {
        eprintln!("censored: {c}");
    }
    out.summary();
    Ok(Status::Clean)
}

#[derive(Args, Serialize)]
pub struct HierarchyArgs {
    #[arg(long)]
    pub rule: String,
    #[arg(long)]
    pub depth: u32,
    #[arg(long, default_value_t = 50)]
    pub regions: usize,
    /// Grid size, or `auto` for the smallest power of two fitting the tiling.
    #[arg(long, default_value = "auto")]
    pub delta: String,
    /// Cells per random region before hole filling.
    #[arg(long, default_value_t = 60)]
    pub cells: usize,
    /// Random discs for the tiles-per-ball check.
    #[arg(long, default_value_t = 200)]
    pub ball_trials: usize,
}

#[derive(Serialize)]
struct RegionResult {
    index: usize,
    cells: usize,
    m: u32,
    l0: u32,
    part_counts: Vec<u64>,
    invariants: InvariantReport,
    bounds: BoundReport,
    discrepancy: Option<Discrepancy>,
    not_applicable: Option<String>,
    counts: CountChecks,
    violations: usize,
}

pub fn hierarchy(ctx: &Ctx, a: &HierarchyArgs) -> Result<Status> {
    let p = load_patch(&a.rule, None, a.depth)?;
    let mat = build_matrix(&p.rule);
    let delta = if a.delta == "auto" {
        auto_delta(&p)
    } else {
        let d: f64 = a.delta.parse().with_context(|| format!("bad --delta `{}`", a.delta))?;
        ensure!(d > 0.0, "--delta must be positive");
        d
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let regions: Vec<GridRegion> = (0..a.regions)
        .map(|k| {
            random_fitted_region(&mut rng, &p, delta, a.cells, 500)
                .ok_or_else(|| anyhow!("no fitted region of {} cells at delta {delta} (region {k})", a.cells))
        })
        .collect::<Result<_>>()?;
    let x = delone_set(&p);
    let counter = PointCounter::new(&x);
    let g = geometry_stats(&p, 0);
    let idx: Vec<usize> = (0..regions.len()).collect();
    let results: Vec<Result<(RegionResult, Vec<Vec<Vec<u32>>>)>> = Exec::Parallel.map(&idx, |&k| {
        let u = &regions[k];
        let dec = decompose(&p, u, false)?;
        let bounds = verify_bounds(&p, &dec, &mat);
        let (discrepancy, not_applicable) = match discrepancy_via_hierarchy(&p, &mat, &dec) {
            Ok(d) => (Some(d), None),
            Err(e @ Error::NotApplicable { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        let counts = count_checks(&p, &counter, &g, u)?;
        let violations = usize::from(!dec.invariants.ok())
            + bounds.violations
            + usize::from(discrepancy.as_ref().is_some_and(|d| !d.ok))
            + usize::from(!counts.ok());
        let addresses = dec.addresses(&p);
        Ok((
            RegionResult {
                index: k,
                cells: u.len(),
                m: dec.m,
                l0: bounds.l0,
                part_counts: dec.parts.iter().map(|q| q.count).collect(),
                invariants: dec.invariants.clone(),
                bounds,
                discrepancy,
                not_applicable,
                counts,
                violations,
            },
            addresses,
        ))
    });
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for r in results {
        let (row, addr) = r?;
        dumps.push(json!({ "region": row.index, "cells": regions[row.index].cells(), "levels": addr }));
        rows.push(row);
    }
    let ball = ball_meet_check(&p, 0, a.ball_trials, &mut rng);
    let total: usize = rows.iter().map(|r| r.violations).sum::<usize>() + usize::from(!ball.ok);

    let mut out = Out::new(&ctx.out_dir, config(ctx, "hierarchy", a))?;
    let mut body = String::from(
        "region,cells,m,l0,lhs,rhs,margin,borde_ok,lambda_ok,syn3_ok,syn4_ok,k_hat_ok,vol_ok,sandwich_ok,facet_ok,invariants_ok\n",
    );
    for r in &rows {
        let borde = r.bounds.levels.iter().all(|l| l.borde_ok);
        let lam = r.bounds.levels.iter().all(|l| l.lambda_ok);
        let (lhs, rhs, flags) = match &r.discrepancy {
            Some(d) => (
                d.lhs.to_string(),
                d.rhs.to_string(),
                format!("{},{},{},{}", d.syn3_ok, d.syn4_ok, d.k_hat_ok, d.vol_ok),
            ),
            None => (String::new(), String::new(), ",,,".to_string()),
        };
        let margin = r.discrepancy.as_ref().map(|d| (d.rhs - d.lhs).to_string()).unwrap_or_default();
        body.push_str(&format!(
            "{},{},{},{},{lhs},{rhs},{margin},{borde},{lam},{flags},{},{},{}\n",
            r.index,
            r.cells,
            r.m,
            r.l0,
            r.counts.sandwich_ok,
            r.counts.facet_ok,
            r.invariants.ok()
        ));
    }
    out.csv("bounds.csv", &[format!("delta={delta}")], &body)?;
    out.json("decomposition.json", &dumps)?;
    out.json(
        "hierarchy.json",
        json!({ "delta": delta, "violations": total, "ball_check": ball, "regions": rows }),
    )?;
    println!("{} regions at delta {delta}: {total} violation(s)", rows.len());
    out.summary();
    Ok(Status::from_count(total))
}

#[derive(Args, Serialize)]
pub struct FlattenArgs {
    /// Density grid CSV (2^m rows of 2^m values).
    #[arg(long, conflicts_with = "rule")]
    pub density: Option<PathBuf>,
    /// Expected number of dyadic levels of the grid.
    #[arg(long)]
    pub m: Option<u32>,
    /// Integer lower corner `i,j` of the grid.
    #[arg(long, default_value = "0,0")]
    pub origin: String,
    /// Build the density from a generated Delone set instead.
    #[arg(long, required_unless_present = "density")]
    pub rule: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub depth: u32,
    /// Cell size for densities built from points.
    #[arg(long)]
    pub cell: Option<f64>,
    #[arg(long, default_value_t = 0.125)]
    pub blend: f64,
    /// Quadrature nodes per axis and cell for the volume check.
    #[arg(long, default_value_t = 8)]
    pub quadrature: usize,
    /// Sampled pairs for the Lipschitz estimate.
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    /// Also render the image of a reference grid.
    #[arg(long)]
    pub svg: bool,
}

pub fn flatten(ctx: &Ctx, a: &FlattenArgs) -> Result<Status> {
    let origin = parse_list(&a.origin, 2)?;
    let mut derived = false;
    let u: DensityField = match (&a.density, &a.rule) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            io::parse_density_csv(&text, [origin[0] as i64, origin[1] as i64])?
        }
        (None, Some(rule)) => {
            let x = delone_set(&load_patch(rule, None, a.depth)?);
            derived = true;
            density_from_points(&x, a.cell.unwrap_or_else(|| auto_cell(&x)))?
        }
        (None, None) => bail!("one of --density or --rule is required"),
    };
    if let Some(m) = a.m {
        ensure!(u.m == m, "density grid has m = {}, expected {m}", u.m);
    }
    let map = build_flatmap(&u, a.blend)?;
    let eta = eta_star_bound(&u);
    let vols = volume_report(&map, "grid", quadrature_volumes(&map, u.m, a.quadrature, Exec::Parallel));
    let lip = lipschitz_estimate(&map, a.samples, ctx.seed, Exec::Parallel);
    let errors: Vec<f64> = vols.measured.iter().zip(&vols.target).map(|(m, t)| m - t).collect();
    let violations = usize::from(!eta.ok) + usize::from(!vols.ok) + usize::from(!lip.within_bound);

    let mut out = Out::new(&ctx.out_dir, config(ctx, "flatten", a))?;
    if derived {
        out.csv("density.csv", &[format!("m={}", u.m), format!("origin={},{}", u.origin[0], u.origin[1])], &io::density_csv(&u))?;
    }
    out.json(
        "flatten.json",
        json!({
            "density": { "m": u.m, "origin": u.origin, "min": u.min, "max": u.max, "mean": u.mean() },
            "blend_width": a.blend,
            "tol_vol": vols.tol_vol,
            "max_volume_error": vols.max_abs_err,
            "volume_ok": vols.ok,
            "volume_errors": errors,
            "K_fwd": lip.k_fwd,
            "K_inv": lip.k_inv,
            "K_id_bound": lip.k_id_bound,
            "lipschitz": lip,
            "eta_star": eta,
            "violations": violations,
        }),
    )?;
    if a.svg {
        out.svg("warp.svg", |m| svg::warp_grid(&map, 32.min(u.side() as usize * 2), 64, m))?;
    }
    println!("max volume error {:.3e} (tolerance {:.3e}), K_fwd {:.4}", vols.max_abs_err, vols.tol_vol, lip.k_fwd);
    out.summary();
    Ok(Status::from_count(violations))
}

#[derive(Args, Serialize)]
pub struct RectifyArgs {
    #[arg(long, required_unless_present = "points", conflicts_with = "points")]
    pub rule: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub depth: u32,
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Restrict to the square of this side at the lower-left window corner.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub cell: Option<f64>,
    #[arg(long, default_value_t = 0.125)]
    pub blend: f64,
    /// Initial matching radius.
    #[arg(long, default_value_t = 0.5)]
    pub d_init: f64,
    /// Largest matching radius (one eighth of the window side by default).
    #[arg(long)]
    pub d_cap: Option<f64>,
    /// Match directly to `beta Z^2` without flattening.
    #[arg(long)]
    pub direct: bool,
    /// Lattice spacing for `--direct` (inverse square root of the density by default).
    #[arg(long, requires = "direct")]
    pub beta: Option<f64>,
    #[arg(long)]
    pub svg: bool,
}

fn matching_summary(m: &Matching) -> Value {
    let mut v = serde_json::to_value(m).expect("matching serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("pairs");
        o.insert("pairs".into(), json!(m.pairs.len()));
    }
    v
}

pub fn rectify(ctx: &Ctx, a: &RectifyArgs) -> Result<Status> {
    let mut x = match (&a.rule, &a.points) {
        (Some(rule), _) => delone_set(&load_patch(rule, None, a.depth)?),
        (None, Some(path)) => load_points(path, None)?,
        (None, None) => bail!("one of --rule or --points is required"),
    };
    if let Some(s) = a.window {
        ensure!(s > 0.0, "--window must be positive");
        let (lo, _) = x.window.bbox();
        let hi = [lo[0] + s, lo[1] + s];
        ensure!(x.window.contains_box(lo, hi), "window of side {s} does not fit in the point window");
        x = x.restrict(lo, hi);
    }
    let opts = MatchOptions { d_init: a.d_init, d_cap: a.d_cap, ..MatchOptions::default() };
    let mut out = Out::new(&ctx.out_dir, config(ctx, "rectify", a))?;
    let matching;
    if a.direct {
        let beta = match a.beta {
            Some(b) => b,
            None => {
                let rho = match fit_deviation(&x) {
                    Ok(f) => f.rho_hat,
                    Err(_) => x.points.iter().filter(|p| x.window.contains(**p)).count() as f64 / window_area(&x.window),
                };
                1.0 / rho.sqrt()
            }
        };
        let m = bounded_displacement_match_with(&x, beta, &x.window, &opts)?;
        out.json("rectify.json", json!({ "mode": "direct", "beta": beta, "D": m.radius, "K_bilip": m.k_bilip, "matching": matching_summary(&m) }))?;
        matching = m;
    } else {
        let ro = RectifyOptions { cell: a.cell, blend_width: a.blend, matching: opts, ..RectifyOptions::default() };
        let (r, _) = match run_rectify(&x, &ro) {
            Ok(v) => v,
            Err(e @ Error::Diagnostics(_)) => {
                eprintln!("{e}");
                return Ok(Status::Violations(1));
            }
            Err(e) => return Err(e.into()),
        };
        let mut body = String::from("x,y,px,py,z1,z2\n");
        for s in &r.samples {
            body.push_str(&format!("{},{},{},{},{},{}\n", s.x[0], s.x[1], s.pushed[0], s.pushed[1], s.z[0], s.z[1]));
        }
        out.csv("samples.csv", &[], &body)?;
        out.json(
            "rectify.json",
            json!({
                "mode": "flatten",
                "D": r.matching.radius,
                "K_bilip": r.k_bilip,
                "displacement": r.displacement,
                "rho_hat": r.rho_hat,
                "rho_source": r.rho_source,
                "cell": r.cell,
                "m": r.m,
                "cube_lo": r.cube_lo,
                "cube_side": r.cube_side,
                "density_ratio": r.density_ratio,
                "scale": r.scale,
                "map_shift": r.map_shift,
                "eta_star": r.eta,
                "max_volume_error": r.volumes.max_abs_err,
                "tol_vol": r.volumes.tol_vol,
                "matching": matching_summary(&r.matching),
            }),
        )?;
        matching = r.matching;
    }
    out.csv("matching.csv", &[format!("D={}", matching.radius)], &io::matching_csv(&matching))?;
    if a.svg {
        let pairs: Vec<(Pt, Pt)> = matching.pairs.iter().map(|p| (p.x, p.z)).collect();
        out.svg("displacement.svg", |m| svg::displacement(&pairs, m))?;
    }
    println!(
        "D = {:.4}, K_bilip = {:.4}, perfect = {}",
        matching.radius, matching.k_bilip, matching.perfect
    );
    out.summary();
    Ok(if matching.perfect { Status::Clean } else { Status::Violations(matching.deficiency.max(1)) })
}
