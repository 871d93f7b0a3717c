use emsource::cavity::{
    ball_eigenvalues, characteristic, expanded_eigenvalues, modes_below, monotonicity_check, roots_below,
    spherical_bessel, write_modes_csv, Family,
};
use emsource::MediumParams;
use proptest::prelude::*;

// Plain bisection on closed forms, independent of the library's recurrences.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn j1(x: f64) -> f64 {
    x.sin() / (x * x) - x.cos() / x
}

#[test]
fn first_roots_match_bisection_oracles() {
    let te = bisect(j1, 4.0, 5.0);
    // (x j₁)' = sin x / x² ... written out: d/dx[sin x / x - cos x] = cos x / x - sin x / x² + sin x.
    let tm = bisect(|x| x.cos() / x - x.sin() / (x * x) + x.sin(), 2.0, 3.5);
    assert!((te - 4.493409).abs() < 1e-6);
    assert!((tm - 2.743707).abs() < 1e-6);
    let modes = ball_eigenvalues(1.0, &MediumParams::unit(), 3, 3).unwrap();
    let first = |fam: Family| modes.iter().find(|m| m.family == fam && m.n == 1 && m.m == 1).unwrap().x;
    assert!((first(Family::TE) - te).abs() < 1e-10);
    assert!((first(Family::TM) - tm).abs() < 1e-10);
    assert_eq!(modes[0].family, Family::TM);
    assert_eq!(modes[0].multiplicity, 3);
}

#[test]
fn every_root_has_a_small_residual() {
    for m in ball_eigenvalues(1.0, &MediumParams::unit(), 6, 5).unwrap() {
        assert!(characteristic(m.family, m.n, m.x).abs() < 1e-10, "{m:?}");
    }
}

#[test]
fn fine_scan_finds_no_extra_roots() {
    let x_max = 20.0;
    let modes = modes_below(1.0, &MediumParams::unit(), x_max).unwrap();
    for n in 1..=20 {
        for family in [Family::TE, Family::TM] {
            let mut changes = 0;
            let step = 1e-3;
            let mut prev = characteristic(family, n, step);
            let mut x = step;
            while x + step <= x_max {
                x += step;
                let v = characteristic(family, n, x);
                if v.signum() != prev.signum() {
                    changes += 1;
                }
                prev = v;
            }
            let found = modes.iter().filter(|m| m.family == family && m.n == n).count();
            assert_eq!(found, changes, "{family} n={n}");
            assert_eq!(found, roots_below(family, n, x_max).unwrap().len());
        }
    }
}

#[test]
fn medium_and_radius_scaling() {
    let unit = ball_eigenvalues(1.0, &MediumParams::unit(), 3, 2).unwrap();
    let big = ball_eigenvalues(2.0, &MediumParams::unit(), 3, 2).unwrap();
    let slow = ball_eigenvalues(1.0, &MediumParams::new(4.0, 1.0).unwrap(), 3, 2).unwrap();
    for ((a, b), c) in unit.iter().zip(&big).zip(&slow) {
        assert_eq!(b.omega, a.omega / 2.0);
        assert_eq!(c.omega, a.omega / 2.0);
        assert_eq!(a.x, b.x);
    }
}

#[test]
fn nested_balls_decrease_strictly() {
    let m = MediumParams::unit();
    for (r1, r2) in [(1.0, 1.1), (1.0, 2.0), (0.5, 0.6), (2.0, 2.01), (0.3, 1.0)] {
        let rep = monotonicity_check(r1, r2, &m, 20).unwrap();
        assert!(rep.pass && rep.min_margin > 0.0, "{r1} {r2} {rep:?}");
        assert_eq!(rep.pairs.len(), 20);
    }
    let rep = monotonicity_check(1.0, 2.0, &m, 20).unwrap();
    for (a, b) in &rep.pairs {
        assert_eq!(*b, a / 2.0);
    }
    assert!(monotonicity_check(1.0, 1.0, &m, 20).is_err());
    assert!(monotonicity_check(2.0, 1.0, &m, 20).is_err());
}

#[test]
fn expanded_list_counts_multiplicity() {
    let w = expanded_eigenvalues(1.0, &MediumParams::unit(), 20).unwrap();
    assert_eq!(w.len(), 20);
    // TM₁ (3), TM₂ (5), TE₁ (3), TM₃ (7), then TE₂.
    assert!(w[..3].iter().all(|v| *v == w[0]));
    assert!(w[3..8].iter().all(|v| *v == w[3]));
    assert!(w.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn mode_csv() {
    let modes = ball_eigenvalues(1.0, &MediumParams::unit(), 1, 1).unwrap();
    let mut buf = vec![];
    write_modes_csv(&modes, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "family,n,m,x,omega,multiplicity");
    assert!(lines[1].starts_with("TM,1,1,2.7437"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn invalid_inputs() {
    assert!(ball_eigenvalues(0.0, &MediumParams::unit(), 1, 1).is_err());
    assert!(ball_eigenvalues(1.0, &MediumParams::unit(), 0, 1).is_err());
    assert!(roots_below(Family::TE, 0, 10.0).is_err());
}

proptest! {
    #[test]
    fn bessel_recurrence_holds(n in 1usize..8, x in 0.05f64..30.0) {
        let lhs = spherical_bessel(n - 1, x) + spherical_bessel(n + 1, x);
        let rhs = (2 * n + 1) as f64 / x * spherical_bessel(n, x);
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }
}
