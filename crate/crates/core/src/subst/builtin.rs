use super::cyclo::FieldCoord;
use super::rule::{ChildSpec, IsometrySpec, Prototile, SubstitutionRule};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 3] = ["chair", "table", "penrose-triangles"];

/// Resolve a built-in rule by name (`chair`, `table`, `penrose-triangles`,
/// `block:<spec>`). Returns `Ok(None)` when the name is not built in.
pub fn builtin(name: &str) -> Result<Option<SubstitutionRule>> {
    if let Some(spec) = name.strip_prefix("block:") {
        return block_rule(spec).map(Some);
    }
    Ok(match name {
        "chair" => Some(chair()),
        "table" => Some(table()),
        "penrose-triangles" | "penrose" => Some(penrose_triangles()),
        _ => None,
    })
}

fn g(x: i64, y: i64) -> FieldCoord {
    FieldCoord::gaussian(x, y)
}

fn place(prototile: usize, rot: u32, t: FieldCoord) -> ChildSpec {
    ChildSpec {
        prototile,
        placement: IsometrySpec { rotation_index: rot, reflect: false, translation: t },
    }
}

/// L-tromino, inflation 2.
pub fn chair() -> SubstitutionRule {
    SubstitutionRule {
        name: "chair".into(),
        field: 4,
        lambda: FieldCoord::integer(4, 2),
        prototiles: vec![Prototile {
            id: "L".into(),
            vertices: vec![g(0, 0), g(2, 0), g(2, 1), g(1, 1), g(1, 2), g(0, 2)],
            color: None,
        }],
        children: vec![vec![
            place(0, 0, g(0, 0)),
            place(0, 0, g(1, 1)),
            place(0, 1, g(4, 0)),
            place(0, 3, g(0, 4)),
        ]],
    }
}

/// 2x1 domino, inflation 2.
pub fn table() -> SubstitutionRule {
    SubstitutionRule {
        name: "table".into(),
        field: 4,
        lambda: FieldCoord::integer(4, 2),
        prototiles: vec![Prototile {
            id: "D".into(),
            vertices: vec![g(0, 0), g(2, 0), g(2, 1), g(0, 1)],
            color: None,
        }],
        children: vec![vec![
            place(0, 1, g(1, 0)),
            place(0, 1, g(4, 0)),
            place(0, 0, g(1, 0)),
            place(0, 0, g(1, 1)),
        ]],
    }
}

/// Robinson triangles: `A` is the golden triangle (legs phi, base 1),
/// `B` the gnomon (legs 1, base phi). Inflation phi.
pub fn penrose_triangles() -> SubstitutionRule {
    let z = |c: [i64; 4]| FieldCoord::from_coeffs(10, &c).expect("order 10");
    let zero = z([0, 0, 0, 0]);
    let one = z([1, 0, 0, 0]);
    let phi = z([1, 0, 1, -1]);
    let phi2 = phi * phi;
    let zeta = FieldCoord::zeta_pow(10, 1);
    SubstitutionRule {
        name: "penrose-triangles".into(),
        field: 10,
        lambda: phi,
        prototiles: vec![
            Prototile { id: "A".into(), vertices: vec![zero, phi, phi * zeta], color: None },
            Prototile {
                id: "B".into(),
                vertices: vec![zero, one, FieldCoord::zeta_pow(10, 3)],
                color: None,
            },
        ],
        children: vec![
            vec![place(0, 0, zero), place(0, 3, phi2), place(1, 0, phi)],
            vec![place(0, 4, phi), place(1, 4, FieldCoord::zeta_pow(10, 2))],
        ],
    }
}

/// `block:N:M_0/M_1/...`, one `N x N` matrix per colour. Each matrix is a
/// comma separated list of `N` rows, bottom row first; digit `k` places a
/// unit square of colour `k`.
pub fn block_rule(spec: &str) -> Result<SubstitutionRule> {
    let bad = |msg: &str| Error::BlockSpec { spec: spec.to_string(), msg: msg.to_string() };
    let (n_str, body) = spec.split_once(':').ok_or_else(|| bad("expected `N:matrices`"))?;
    let n: usize = n_str.trim().parse().map_err(|_| bad("N is not an integer"))?;
    if !(2..=64).contains(&n) {
        return Err(bad("N must lie in 2..=64"));
    }
    let mats: Vec<&str> = body.split('/').collect();
    let colors = mats.len();
    if colors > 10 {
        return Err(bad("at most 10 colours"));
    }
    let mut children = Vec::with_capacity(colors);
    for m in &mats {
        let rows: Vec<&str> = m.split(',').map(str::trim).collect();
        if rows.len() != n {
            return Err(bad(&format!("matrix `{m}` has {} rows, expected {n}", rows.len())));
        }
        let mut kids = Vec::with_capacity(n * n);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != n {
                return Err(bad(&format!("row `{row}` has length {}, expected {n}", row.len())));
            }
            for (x, ch) in row.chars().enumerate() {
                let k = ch.to_digit(10).ok_or_else(|| bad(&format!("`{ch}` is not a digit")))? as usize;
                if k >= colors {
                    return Err(bad(&format!("colour {k} has no matrix")));
                }
                kids.push(place(k, 0, g(x as i64, y as i64)));
            }
        }
        children.push(kids);
    }
    let prototiles = (0..colors)
        .map(|k| Prototile {
            id: k.to_string(),
            vertices: vec![g(0, 0), g(1, 0), g(1, 1), g(0, 1)],
            color: Some(k.to_string()),
        })
        .collect();
    Ok(SubstitutionRule {
        name: format!("block:{spec}"),
        field: 1,
        lambda: FieldCoord::integer(4, n as i64),
        prototiles,
        children,
    })
}
