use rectiling::flattener::{build_flatmap, DensityField};
use rectiling::io::{self, svg};
use rectiling::regions::GridRegion;
use rectiling::subst::*;
use rectiling::Error;

#[test]
fn points_round_trip() {
    let pts = vec![[0.1, -2.5], [1.0 / 3.0, 1e-17], [123456.789, 0.0]];
    let text = io::points_csv(&pts);
    assert!(text.starts_with("x,y\n"));
    assert_eq!(io::read_points_csv(&text).unwrap(), pts);
    let commented = format!("# r=0.5\n{text}");
    assert_eq!(io::read_points_csv(&commented).unwrap(), pts);
    assert!(matches!(io::read_points_csv("x,y\n1,abc\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(io::read_points_csv("1\n"), Err(Error::Parse { .. })));
}

#[test]
fn region_round_trip() {
    let u = GridRegion::new(4.0, [[0, 0], [1, 0], [-3, 7]]);
    let back = io::parse_region(&io::region_text(&u)).unwrap();
    assert_eq!((back.delta, back.cells()), (u.delta, u.cells()));
    assert!(matches!(io::parse_region("0 0\n"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(io::parse_region("delta 2\n1 x\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(io::parse_region("# nothing\n"), Err(Error::Parse { .. })));
}

#[test]
fn density_round_trip() {
    let u = DensityField::new(2, 1, vec![3, -1], vec![1.0, 2.0, 0.5, 4.0]).unwrap();
    let text = io::density_csv(&u);
    assert_eq!(text, "1,2\n0.5,4\n");
    let back = io::parse_density_csv(&text, [3, -1]).unwrap();
    assert_eq!((back.m, back.values.clone(), back.origin.clone()), (1, u.values.clone(), u.origin.clone()));
    assert!(matches!(io::parse_density_csv("1,2,3\n1,2,3\n1,2,3\n", [0, 0]), Err(Error::InvalidDensity(_))));
    assert!(matches!(io::parse_density_csv("1,2\n1\n", [0, 0]), Err(Error::InvalidDensity(_))));
    assert!(matches!(io::parse_density_csv("1,0\n1,1\n", [0, 0]), Err(Error::InvalidDensity(_))));
}

#[test]
fn patch_json_and_svg() {
    let p = generate(&chair(), "L", 3).unwrap();
    let v = io::patch_json(&p, &[0, 1]);
    assert_eq!(v["tiles"].as_array().unwrap().len(), 64 + 16);
    assert_eq!(v["counts"][0], 64);
    assert_eq!(v["tiles"][0]["vertices"].as_array().unwrap().len(), 6);
    let s = svg::patch(&p, 0, "m & m");
    assert_eq!(s.matches("<path").count(), 64);
    assert!(s.contains("<metadata>m &amp; m</metadata>") && s.trim_end().ends_with("</svg>"));
    let c = svg::line_chart("t", "x", "y", &[("a".into(), vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])], "");
    assert!(c.contains("<path d=\"M"));
    let map = build_flatmap(&DensityField::constant(2, 2, 1.0).unwrap(), 0.125).unwrap();
    assert_eq!(svg::warp_grid(&map, 4, 8, "").matches("<path").count(), 10);
    assert_eq!(svg::displacement(&[([0.0, 0.0], [1.0, 1.0])], "").matches("<line").count(), 1);
}
