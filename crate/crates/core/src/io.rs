//! Text formats: patch JSON, point and density CSV, region files, matching
//! CSV and SVG renderings.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::flattener::{DensityField, FlatMap};
use crate::geom::{self, Pt};
use crate::rectifier::Matching;
use crate::regions::{Cell, GridRegion};
use crate::subst::HierarchicalPatch;
use crate::{Error, Result};

/// Tiles of the requested levels with placement and float vertices.
pub fn patch_json(patch: &HierarchicalPatch, levels: &[u32]) -> Value {
    let rule = &patch.rule;
    let mut tiles = Vec::new();
    for &l in levels.iter().filter(|&&l| l <= patch.depth) {
        for (i, t) in patch.tiles(l).iter().enumerate() {
            tiles.push(json!({
                "level": l,
                "index": i,
                "prototile": rule.prototiles[t.prototile].id,
                "parent": t.parent,
                "placement": {
                    "rotation": t.placement.rot,
                    "reflect": t.placement.refl,
                    "translation": t.placement.t.to_point(),
                },
                "vertices": patch.poly(l, i),
            }));
        }
    }
    json!({
        "rule": rule.name,
        "seed": rule.prototiles[patch.seed].id,
        "depth": patch.depth,
        "lambda": rule.lambda_f64(),
        "counts": (0..=patch.depth).map(|l| patch.tiles(l).len()).collect::<Vec<_>>(),
        "tiles": tiles,
    })
}

/// `x,y` rows under a header line.
pub fn points_csv(points: &[Pt]) -> String {
    let mut s = String::from("x,y\n");
    for p in points {
        let _ = writeln!(s, "{},{}", p[0], p[1]);
    }
    s
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, msg: format!("`{s}` is not a finite number") })
}

/// Points from CSV with `x,y` columns; `#` comments and a non-numeric
/// header row are skipped.
pub fn read_points_csv(text: &str) -> Result<Vec<Pt>> {
    let mut out = Vec::new();
    for (k, rec) in reader(text).records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.len() < 2 {
            return Err(Error::Parse { line, msg: "expected two columns x,y".into() });
        }
        if out.is_empty() && rec[0].parse::<f64>().is_err() {
            continue;
        }
        out.push([parse_f64(&rec[0], line)?, parse_f64(&rec[1], line)?]);
    }
    Ok(out)
}

/// Region file: `delta <v>` then one `i j` cell per line.
pub fn parse_region(text: &str) -> Result<GridRegion> {
    let mut delta = None;
    let mut cells: Vec<Cell> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if delta.is_none() {
            if f.len() != 2 || f[0] != "delta" {
                return Err(Error::Parse { line: k + 1, msg: "expected `delta <value>`".into() });
            }
            let d = parse_f64(f[1], k + 1)?;
            if d <= 0.0 {
                return Err(Error::Parse { line: k + 1, msg: "delta must be positive".into() });
            }
            delta = Some(d);
            continue;
        }
        let ij: Vec<i64> = f
            .iter()
            .map(|s| s.parse::<i64>().map_err(|_| Error::Parse { line: k + 1, msg: format!("`{s}` is not an integer") }))
            .collect::<Result<_>>()?;
        if ij.len() != 2 {
            return Err(Error::Parse { line: k + 1, msg: "expected two integer cell coordinates".into() });
        }
        cells.push([ij[0], ij[1]]);
    }
    let delta = delta.ok_or(Error::Parse { line: 0, msg: "missing `delta` line".into() })?;
    Ok(GridRegion::new(delta, cells))
}

pub fn region_text(u: &GridRegion) -> String {
    let mut s = format!("delta {}\n", u.delta);
    for c in u.cells() {
        let _ = writeln!(s, "{} {}", c[0], c[1]);
    }
    s
}

/// Planar density grid: `2^m` rows of `2^m` comma-separated values, row `j`
/// holding the cells with second index `j`.
pub fn parse_density_csv(text: &str, origin: [i64; 2]) -> Result<DensityField> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader(text).records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        rows.push(rec.iter().map(|s| parse_f64(s, line)).collect::<Result<_>>()?);
    }
    let n = rows.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidDensity(format!("{n} rows; expected a power of two")));
    }
    if let Some((j, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::InvalidDensity(format!("row {j} has {} values; expected {n}", r.len())));
    }
    DensityField::new(2, n.trailing_zeros(), vec![origin[0], origin[1]], rows.concat())
}

pub fn density_csv(u: &DensityField) -> String {
    let n = u.side() as usize;
    let mut s = String::new();
    for row in u.values.chunks(n) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// `x,y,z1,z2,displacement` per matched pair.
pub fn matching_csv(m: &Matching) -> String {
    let mut s = String::from("x,y,z1,z2,displacement\n");
    for p in &m.pairs {
        let _ = writeln!(s, "{},{},{},{},{}", p.x[0], p.x[1], p.z[0], p.z[1], p.dist);
    }
    s
}

/// Minimal SVG documents; `meta` is stored in a `<metadata>` element.
pub mod svg {
    use super::*;

    const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"];

    fn escape(s: &str) -> String {
        s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    }

    struct Frame {
        lo: Pt,
        scale: f64,
        h: f64,
    }

    impl Frame {
        fn new(lo: Pt, hi: Pt, size: f64) -> Self {
            let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
            Frame { lo, scale: size / span, h: (hi[1] - lo[1]) * size / span }
        }

        fn map(&self, p: Pt) -> (f64, f64) {
            ((p[0] - self.lo[0]) * self.scale + 10.0, self.h - (p[1] - self.lo[1]) * self.scale + 10.0)
        }

        fn path(&self, pts: &[Pt], close: bool) -> String {
            let mut d = String::new();
            for (k, p) in pts.iter().enumerate() {
                let (x, y) = self.map(*p);
                let _ = write!(d, "{}{:.3},{:.3}", if k == 0 { "M" } else { " L" }, x, y);
            }
            if close {
                d.push_str(" Z");
            }
            d
        }
    }

    fn open(w: f64, h: f64, meta: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<metadata>{}</metadata>\n",
            w + 20.0,
            h + 20.0,
            w + 20.0,
            h + 20.0,
            escape(meta)
        )
    }

    /// Tiles of one level, filled by prototile.
    pub fn patch(p: &HierarchicalPatch, level: u32, meta: &str) -> String {
        let (lo, hi) = p.bbox();
        let f = Frame::new(lo, hi, 800.0);
        let mut s = open(800.0, f.h, meta);
        for (i, t) in p.tiles(level).iter().enumerate() {
            let _ = writeln!(
                s,
                "<path d=\"{}\" fill=\"{}\" stroke=\"#222\" stroke-width=\"0.5\"/>",
                f.path(p.poly(level, i), true),
                PALETTE[t.prototile % PALETTE.len()]
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Line chart; each series is `(label, points)`. Non-finite points are skipped.
    pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)], meta: &str) -> String {
        let pts: Vec<(f64, f64)> =
            series.iter().flat_map(|s| s.1.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        let (w, h) = (640.0, 400.0);
        let mut s = open(w, h + 40.0, meta);
        let _ = writeln!(s, "<text x=\"20\" y=\"20\" font-size=\"14\">{}</text>", escape(title));
        if pts.is_empty() {
            s.push_str("</svg>\n");
            return s;
        }
        let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let sx = |x: f64| 60.0 + (x - x0) / (x1 - x0).max(1e-12) * (w - 80.0);
        let sy = |y: f64| 40.0 + (y1 - y) / (y1 - y0).max(1e-12) * (h - 60.0);
        let _ = writeln!(
            s,
            "<path d=\"M60,40 L60,{:.1} L{:.1},{:.1}\" fill=\"none\" stroke=\"#000\"/>",
            h - 20.0,
            w - 20.0,
            h - 20.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n<text x=\"5\" y=\"30\" font-size=\"12\">{}</text>",
            w / 2.0,
            h + 5.0,
            escape(xlabel),
            escape(ylabel)
        );
        let _ = writeln!(
            s,
            "<text x=\"5\" y=\"{:.1}\" font-size=\"10\">{:.4}</text>\n<text x=\"5\" y=\"44\" font-size=\"10\">{:.4}</text>",
            h - 20.0,
            y0,
            y1
        );
        for (k, (label, data)) in series.iter().enumerate() {
            let c = PALETTE[k % PALETTE.len()];
            let d: Vec<String> = data
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .enumerate()
                .map(|(j, p)| format!("{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, sx(p.0), sy(p.1)))
                .collect();
            let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"2\"/>", d.concat());
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{c}\">{}</text>",
                w - 150.0,
                60.0 + 16.0 * k as f64,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Image of the reference grid with `lines` lines per axis under the map.
    pub fn warp_grid(map: &FlatMap, lines: usize, steps: usize, meta: &str) -> String {
        let n = map.density.side() as f64;
        let o = [map.density.origin[0] as f64, map.density.origin[1] as f64];
        let f = Frame::new(o, [o[0] + n, o[1] + n], 640.0);
        let mut s = open(640.0, f.h, meta);
        let lines = lines.max(1);
        let steps = steps.max(2);
        for k in 0..=lines {
            let t = n * k as f64 / lines as f64;
            for axis in 0..2 {
                let pts: Vec<Pt> = (0..=steps)
                    .map(|j| {
                        let v = n * j as f64 / steps as f64;
                        let p = if axis == 0 { [o[0] + t, o[1] + v] } else { [o[0] + v, o[1] + t] };
                        let y = map.eval(&p);
                        [y[0], y[1]]
                    })
                    .collect();
                let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"#333\" stroke-width=\"0.6\"/>", f.path(&pts, false));
            }
        }
        s.push_str("</svg>\n");
        s
    }

    /// Arrows from each point to its matched lattice point.
    pub fn displacement(pairs: &[(Pt, Pt)], meta: &str) -> String {
        let all: Vec<Pt> = pairs.iter().flat_map(|p| [p.0, p.1]).collect();
        let (lo, hi) = if all.is_empty() { ([0.0; 2], [1.0; 2]) } else { geom::bbox(&all) };
        let f = Frame::new(lo, hi, 800.0);
        let mut s = open(800.0, f.h, meta);
        s.push_str("<defs><marker id=\"a\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 Z\" fill=\"#c00\"/></marker></defs>\n");
        for (x, z) in pairs {
            let (a, b) = f.map(*x);
            let (c, d) = f.map(*z);
            let _ = writeln!(
                s,
                "<circle cx=\"{a:.2}\" cy=\"{b:.2}\" r=\"1.5\" fill=\"#333\"/><line x1=\"{a:.2}\" y1=\"{b:.2}\" x2=\"{c:.2}\" y2=\"{d:.2}\" stroke=\"#c00\" stroke-width=\"0.8\" marker-end=\"url(#a)\"/>"
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
