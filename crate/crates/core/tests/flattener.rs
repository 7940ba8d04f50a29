use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectiling::flattener::*;
use rectiling::regions::PointCounter;
use rectiling::subst::*;
use rectiling::{Error, Exec};

fn two_by_two() -> DensityField {
    DensityField::new(2, 1, vec![0, 0], vec![1.0, 1.0, 3.0, 3.0]).unwrap()
}

/// Point counts of the chair Delone set on `c`-cells, per unit area.
fn chair_field(m: u32, c: f64) -> DensityField {
    let p = generate(&chair(), "L", 7).unwrap();
    let x = delone_set(&p);
    let pc = PointCounter::new(&x);
    let n = 1usize << m;
    let mut v = Vec::new();
    for y in 0..n {
        for xx in 0..n {
            v.push(pc.count_box([xx as f64 * c, y as f64 * c], c) as f64 / (c * c));
        }
    }
    DensityField::new(2, m, vec![0, 0], v).unwrap()
}

fn random_field(d: usize, m: u32, seed: u64) -> DensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1usize << (m as usize * d);
    DensityField::new(d, m, vec![3; d], (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap()
}

#[test]
fn alpha_examples() {
    let c = DensityField::constant(2, 3, 2.5).unwrap();
    assert_eq!(c.alpha_ratios(2, &[1, 0], 0, &[1]), (0.5, 0.5));
    let u = two_by_two();
    assert_eq!(u.alpha_ratios(1, &[0, 0], 1, &[]), (0.25, 0.75));
    assert_eq!(u.alpha_ratios(1, &[0, 0], 0, &[0]), (0.5, 0.5));
    assert_eq!(u.alpha_ratios(1, &[0, 0], 0, &[1]), (0.5, 0.5));
}

proptest! {
    #[test]
    fn box_integral_matches_direct_sum(seed in any::<u64>(), a in 0i64..8, b in 0i64..8, c in 1i64..9, e in 1i64..9) {
        let u = random_field(2, 3, seed);
        let lo = [a.min(8 - c), b.min(8 - e)];
        let hi = [lo[0] + c, lo[1] + e];
        let mut direct = 0.0;
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                direct += u.values[(y * 8 + x) as usize];
            }
        }
        prop_assert!((u.box_integral(&lo, &hi) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn boundary_is_fixed_exactly(seed in any::<u64>(), t in 0.0f64..1.0, face in 0usize..4) {
        let f = build_flatmap(&random_field(2, 3, seed), 0.125).unwrap();
        let s = 3.0 + 8.0 * t;
        let x = match face {
            0 => [3.0, s],
            1 => [11.0, s],
            2 => [s, 3.0],
            _ => [s, 11.0],
        };
        prop_assert_eq!(f.eval(&x), x.to_vec());
        prop_assert_eq!(f.inverse(&x), x.to_vec());
    }
}

#[test]
fn eta_star_examples() {
    let c = eta_star_bound(&DensityField::constant(2, 3, 1.0).unwrap());
    assert_eq!((c.measured, c.ok), (0.5, true));
    let e = eta_star_bound(&two_by_two());
    assert_eq!(e.measured, 0.25);
    assert!(e.ok && e.analytic <= 0.25);
    let ch = eta_star_bound(&chair_field(5, 4.0));
    assert!(ch.ok && ch.measured >= ch.analytic - 1e-12, "{ch:?}");
}

// h_c by bisection on the 1D face integral of h(tau(x))
fn hc_oracle(alpha: f64, w: f64) -> f64 {
    let mean_h = |hc: f64| {
        let n = 200_000;
        (0..n)
            .map(|k| {
                let x = (k as f64 + 0.5) / n as f64;
                let tau = (x.min(1.0 - x) / w).min(1.0);
                0.5 + tau * (hc - 0.5)
            })
            .sum::<f64>()
            / n as f64
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_h(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ry_step_examples() {
    let id = RyStepParams::unit(2, 1, 0.5, 0.125);
    assert_eq!(ry_step(&id, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    let p = RyStepParams::unit(2, 1, 0.3, 0.125);
    let hc = hc_oracle(0.3, 0.125);
    assert!((interface_height(0.3, 2, 0.125).unwrap() - hc).abs() < 1e-9);
    let y = ry_step(&p, &[0.5, 0.25]).unwrap();
    assert_eq!(y[0], 0.5);
    assert!((y[1] - 2.0 * hc * 0.25).abs() < 1e-9);
    assert!(matches!(ry_step(&p, &[1.5, 0.2]), Err(Error::OutsideDomain)));
    assert!(matches!(interface_height(0.01, 2, 0.5), Err(Error::BlendTooWide { .. })));
}

#[test]
fn ry_step_moves_exact_mass() {
    // vol(Phi(A)) = integral over the face of the interface height
    for (alpha, w) in [(0.25, 0.125), (0.3, 0.25), (0.7, 0.0625)] {
        let p = RyStepParams::unit(2, 1, alpha, w);
        let n = 100_000;
        let vol: f64 = (0..n)
            .map(|k| ry_step(&p, &[(k as f64 + 0.5) / n as f64, 0.5]).unwrap()[1])
            .sum::<f64>()
            / n as f64;
        assert!((vol - alpha).abs() < 1e-9, "{alpha} {w} {vol}");
        let hc = interface_height(alpha, 2, w).unwrap();
        assert!((hc - alpha).abs() <= 2.0 * w * (1.0 - 2.0 * alpha).abs());
    }
}

#[test]
fn ry_step_fibres_and_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let alpha = rng.gen_range(0.2..0.8);
        let d = rng.gen_range(2..4);
        let p = RyStepParams { split_axis: rng.gen_range(0..d), ..RyStepParams::unit(d, 0, alpha, 0.125) };
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let mut x2 = x.clone();
        x2[p.split_axis] = (x2[p.split_axis] + 0.01).min(1.0);
        let (y, y2) = (ry_step(&p, &x).unwrap(), ry_step(&p, &x2).unwrap());
        if x2[p.split_axis] > x[p.split_axis] {
            assert!(y2[p.split_axis] > y[p.split_axis]);
        }
        let back = ry_step_inv(&p, &y).unwrap();
        assert!(rectiling::geom::dist_n(&back, &x) < 1e-12);
        let mut b = x.clone();
        b[(p.split_axis + 1) % d] = 1.0;
        assert_eq!(ry_step(&p, &b).unwrap(), b);
    }
}

#[test]
fn constant_density_is_identity() {
    for d in [2, 3] {
        let f = build_flatmap(&DensityField::constant(d, 3, 0.7).unwrap(), 0.125).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..8.0)).collect();
            assert_eq!(f.eval(&x), x);
        }
        let j = jacobian_fd(&f, &vec![2.3; d], 1e-4);
        assert!((j.det - 1.0).abs() < 1e-8);
        let l = lipschitz_estimate(&f, 10_000, 2, Exec::Parallel);
        assert!((l.k_fwd - 1.0).abs() < 1e-9 && (l.k_inv - 1.0).abs() < 1e-9);
    }
}

#[test]
fn two_by_two_worked_example() {
    let f = build_flatmap(&two_by_two(), 0.125).unwrap();
    let v = mc_volume_of(&f, 1_000_000, 7, Exec::Parallel, |x| x[1] < 1.0);
    assert!((v - 1.0).abs() < 1e-3, "{v}");
    let q = quadrature_volumes(&f, 1, 64, Exec::Parallel);
    for (got, want) in q.iter().zip([0.5, 0.5, 1.5, 1.5]) {
        assert!((got - want).abs() < 1e-9);
    }
    let j = jacobian_fd(&f, &[0.5, 0.5], 1e-6);
    let hc = interface_height(0.25, 2, 0.125).unwrap();
    assert!(j.smooth && j.core);
    assert!((j.det - 2.0 * hc).abs() < 1e-6 && (j.analytic_det - 2.0 * hc).abs() < 1e-12);
    assert!((j.det - 0.5).abs() <= f.tol_vol());
    // on the interface between the halves of the second stage
    assert!(!jacobian_fd(&f, &[0.5, 1.0], 1e-6).smooth);
    let l = lipschitz_estimate(&f, 20_000, 4, Exec::Parallel);
    assert!(l.k_fwd >= 1.5 - 1e-6 && l.k_fwd.is_finite(), "{l:?}");
    assert!(l.within_bound);
}

#[test]
fn round_trip_and_extension() {
    for (d, m) in [(2, 5), (3, 3)] {
        let f = build_flatmap(&random_field(d, m, 11), 0.125).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let side = (1 << m) as f64;
        let n = if d == 2 { 100_000 } else { 20_000 };
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| 3.0 + rng.gen::<f64>() * side).collect();
            let back = f.inverse(&f.eval(&x));
            assert!(rectiling::geom::dist_n(&back, &x) < 1e-9);
        }
        let ext = extend_identity(&f);
        let out = vec![-1.0; d];
        assert_eq!(ext(&out), out);
        // continuity across a face
        for e in [1e-3, 1e-6, 1e-9] {
            let mut x = vec![3.0 + side / 3.0; d];
            x[0] = 3.0 + e;
            assert!(rectiling::geom::dist_n(&ext(&x), &x) < 50.0 * e);
        }
    }
}

#[test]
fn chair_field_volumes() {
    let u = chair_field(3, 4.0);
    let f = build_flatmap(&u, 0.125).unwrap();
    let mc = volume_report(&f, "mc", mc_volumes(&f, 1_000_000, 9, Exec::Parallel));
    let q = volume_report(&f, "grid", quadrature_volumes(&f, 3, 128, Exec::Parallel));
    assert!(mc.ok && q.ok);
    assert!(q.max_abs_err < 0.01, "{}", q.max_abs_err);
    let total: f64 = q.measured.iter().sum();
    assert!((total - 64.0).abs() < 1e-6);
    for i in 1..=3 {
        assert!(telescoping_error(&f, i, 64, Exec::Parallel) <= f.tol_vol());
    }
}

#[test]
fn volume_error_is_first_order_in_blend_width() {
    let u = chair_field(3, 4.0);
    let errs: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&w| {
            let f = build_flatmap(&u, w).unwrap();
            volume_report(&f, "grid", quadrature_volumes(&f, 3, 128, Exec::Parallel)).max_abs_err
        })
        .collect();
    for r in [errs[1] / errs[0], errs[2] / errs[1]] {
        assert!((0.3..=0.7).contains(&r), "{errs:?}");
    }
}

#[test]
fn c_eta_calibration_matches_closed_form() {
    for w in [0.25, 0.125] {
        let num = calibrate_c_eta(2, w, 0.3, 400, 1);
        let cf = c_eta_closed_form(2, w, 0.3);
        assert!(num <= cf * (1.0 + 1e-4) && num >= 0.9 * cf, "{w} {num} {cf}");
    }
}

#[test]
fn lipschitz_bounded_over_depth() {
    let mut prev = None;
    for m in [4u32, 5] {
        let f = build_flatmap(&chair_field(m, 4.0), 0.125).unwrap();
        let l = lipschitz_estimate(&f, 20_000, 6, Exec::Parallel);
        assert!(l.within_bound, "{l:?}");
        if let Some(p) = prev {
            assert!(l.k_fwd <= 1.5 * p);
        }
        prev = Some(l.k_fwd);
    }
}

#[test]
fn density_validation() {
    assert!(matches!(DensityField::new(2, 1, vec![0, 0], vec![1.0, 0.0, 1.0, 1.0]), Err(Error::InvalidDensity(_))));
    assert!(matches!(DensityField::new(2, 1, vec![0, 0], vec![1.0; 3]), Err(Error::InvalidDensity(_))));
    assert!(matches!(DensityField::new(1, 1, vec![0], vec![1.0; 2]), Err(Error::InvalidDensity(_))));
}
