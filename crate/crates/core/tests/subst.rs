use rectiling::subst::*;
use rectiling::Error;

fn assert_valid(rule: &SubstitutionRule) {
    let rep = validate_rule(rule);
    assert!(rep.valid, "{}: {}", rule.name, rep.summary());
}

#[test]
fn builtins_validate() {
    for name in BUILTIN_NAMES {
        assert_valid(&load_rule(name).unwrap());
    }
    assert_valid(&load_rule("block:3:010,101,010/101,010,101").unwrap());
}

#[test]
fn chair_child_area_is_four_times() {
    let rep = validate_rule(&chair());
    let p = &rep.prototiles[0];
    assert!((p.child_area_sum - 4.0 * 3.0).abs() < 1e-12);
    assert!((p.expected_area - 12.0).abs() < 1e-12);
}

#[test]
fn removing_a_child_reports_deficit() {
    let mut r = chair();
    r.children[0].pop();
    let rep = validate_rule(&r);
    assert!(!rep.valid);
    assert!(!rep.prototiles[0].area_identity);
    assert!((rep.prototiles[0].area_deficit - 3.0).abs() < 1e-12);
}

#[test]
fn overlapping_children_are_reported() {
    let mut r = table();
    r.children[0][3] = r.children[0][2];
    let rep = validate_rule(&r);
    assert!(!rep.valid);
    assert_eq!(rep.prototiles[0].overlaps.len(), 1);
}

#[test]
fn chair_counts() {
    let r = chair();
    assert_eq!(generate(&r, "L", 1).unwrap().tiles(0).len(), 4);
    assert_eq!(generate(&r, "L", 3).unwrap().tiles(0).len(), 64);
}

#[test]
fn penrose_type_counts_follow_matrix_square() {
    let r = penrose_triangles();
    let p = generate(&r, "A", 2).unwrap();
    // [[2,1],[1,1]]^2 = [[5,3],[3,2]]
    assert_eq!(p.type_counts(0), vec![5, 3]);
    let q = generate(&r, "B", 5).unwrap();
    assert!(q.verify_exact().is_ok());
}

#[test]
fn patch_structure_is_consistent() {
    let r = chair();
    let p = generate(&r, "L", 4).unwrap();
    assert!(p.verify_exact().is_ok());
    for l in 1..=4 {
        for (i, t) in p.tiles(l).iter().enumerate() {
            for c in t.children.0..t.children.1 {
                assert_eq!(p.tiles(l - 1)[c as usize].parent, Some(i as u32));
            }
        }
    }
    let addr = p.address(0, 37);
    assert_eq!(addr.len(), 4);
    let (lo, hi) = p.leaf_range(4, 0);
    assert_eq!((lo, hi), (0, 256));
}

#[test]
fn depth_cap_is_enforced() {
    let r = chair();
    let e = generate_with(&r, "L", 12, Isometry::identity(4), 1000, rectiling::Exec::Sequential).unwrap_err();
    assert!(matches!(e, Error::DepthTooLarge { .. }));
}

#[test]
fn unit_square_centroid() {
    let r = block_rule("2:00,00").unwrap();
    let p = generate(&r, "0", 0).unwrap();
    let x = delone_set(&p);
    assert_eq!(x.points, vec![[0.5, 0.5]]);
}

#[test]
fn chair_level_one_points() {
    let p = generate(&chair(), "L", 1).unwrap();
    let x = delone_set(&p);
    assert_eq!(x.points.len(), 4);
    // oracle: centroid of the L-tromino is (5/6, 5/6), mapped by each child
    let c = 5.0 / 6.0;
    let want = [[c, c], [1.0 + c, 1.0 + c], [4.0 - c, c], [c, 4.0 - c]];
    for (a, b) in x.points.iter().zip(want) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{a:?} {b:?}");
    }
    for i in 0..4 {
        for j in i + 1..4 {
            assert_ne!(x.points[i], x.points[j]);
        }
    }
}

#[test]
fn translated_patch_translates_points() {
    let r = chair();
    let a = delone_set(&generate(&r, "L", 3).unwrap());
    let root = Isometry { rot: 0, refl: false, t: FieldCoord::gaussian(5, -3) };
    let b = delone_set(&generate_with(&r, "L", 3, root, DEFAULT_TILE_CAP, rectiling::Exec::Sequential).unwrap());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((q[0] - p[0] - 5.0).abs() < 1e-12 && (q[1] - p[1] + 3.0).abs() < 1e-12);
    }
}

#[test]
fn geometry_constants() {
    let sq = block_rule("2:00,00").unwrap();
    let g = rule_geometry(&sq, 0);
    assert!((g.r - 0.5).abs() < 1e-9);
    assert!((g.big_r - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(g.k, 32);
    let c0 = rule_geometry(&chair(), 0);
    assert!((c0.r - (2.0 - 2f64.sqrt())).abs() < 1e-9);
    assert!((c0.big_r - 2f64.sqrt()).abs() < 1e-12);
    // floor(16 * 2 / (2 - sqrt 2)^2)
    assert_eq!(c0.k, 93);
    let c2 = rule_geometry(&chair(), 2);
    assert_eq!(c2.k, c0.k);
    assert!((c2.r - 4.0 * c0.r).abs() < 1e-9);
}

#[test]
fn rule_file_round_trip() {
    for name in ["chair", "table", "penrose-triangles", "block:3:010,101,010/101,010,101"] {
        let r = load_rule(name).unwrap();
        let text = to_rule_file(&r);
        let back = parse_rule(&text, "x").unwrap();
        assert_eq!(back.prototiles, r.prototiles);
        assert_eq!(back.children, r.children);
        assert_eq!(back.lambda, r.lambda);
        assert_eq!(back.field, r.field);
    }
}

#[test]
fn missing_children_names_prototile() {
    let src = "field 4\nlambda [2 0]\nprototile Q { vertices: [0 0] [1 0] [1 1] [0 1] }\n";
    match parse_rule(src, "q") {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 3);
            assert!(msg.contains("`Q`"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn parse_errors_carry_lines() {
    let src = "field 4\nlambda [2 0]\nprototile Q { vertices: [0 0] [1 0] [x 1] }\n";
    assert!(matches!(parse_rule(src, "q"), Err(Error::Parse { line: 3, .. })));
    assert!(matches!(parse_rule("field 7\n", "q"), Err(Error::UnsupportedField(7))));
    assert!(matches!(load_rule("block:badspec"), Err(Error::BlockSpec { .. })));
    assert!(matches!(load_rule("/nonexistent/rule.txt"), Err(Error::UnknownRule(_))));
}
