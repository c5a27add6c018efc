use std::f64::consts::PI;

use maslov_core::analysis::{box_index, box_index_with, leave_points_detect, BoxOptions, Region};
use maslov_core::closedform::{cc_spectrum, genericity_check};
use maslov_core::flow::{conjugate_points, lambda_infinity, psi_trace, Boundary, Grid, Potential, Problem};
use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn constant(length: f64, d: Vec<f64>, v: &[f64]) -> Problem {
    let n = d.len();
    Problem::new(length, d, Potential::Constant(DMatrix::from_row_slice(n, n, v)), Boundary::Dirichlet).unwrap()
}

#[test]
fn ratio_invariant_under_resolution_and_qr_cadence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let d = vec![rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
        let base = constant(2.0, d, &v);
        let xs: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        let lam = rng.gen_range(0.0..2.0);
        let reference = psi_trace(&base, lam, &xs).unwrap();
        let fine = base.clone().with_grid(Grid { nx_per_unit: 4000, ..Grid::default() });
        let cadence = base.clone().with_grid(Grid { qr_every: 1, ..Grid::default() });
        for variant in [fine, cadence] {
            let other = psi_trace(&variant, lam, &xs).unwrap();
            for (a, b) in reference.iter().zip(&other) {
                let (ra, rb) = (a.0 / a.1, b.0 / b.1);
                assert!((ra - rb).abs() <= 1e-8 * ra.abs().max(1.0), "{ra} vs {rb}");
            }
        }
    }
}

#[test]
fn dirichlet_psi1_starts_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=3usize {
        let v: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
        let p = constant(1.0, d, &v);
        let tr = psi_trace(&p, 0.5, &[0.0, 1e-3, 1e-2]).unwrap();
        assert_eq!(tr[0].0, 0.0);
        assert!(tr[1].0 > 0.0 && tr[2].0 > 0.0);
    }
}

#[test]
fn eigenvalues_match_explicit_diagonal_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..4 {
        let nu = [rng.gen_range(1.0..30.0), rng.gen_range(-5.0..20.0)];
        let l = rng.gen_range(1.0..3.0);
        let p = constant(l, vec![1.0, 1.0], &[nu[0], 0.0, 0.0, nu[1]]);
        let r = box_index_with(&p, &BoxOptions { scan_interior: false, ..BoxOptions::default() }).unwrap();
        let li = lambda_infinity(&p);
        let mut want: Vec<f64> = nu
            .iter()
            .flat_map(|&v| (1..100).map(move |k| v - (k as f64 * PI / l).powi(2)))
            .filter(|&x| x >= 0.0 && x < li)
            .collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(r.eigenvalues.len(), want.len(), "{:?} vs {want:?}", r.eigenvalues);
        for (a, b) in r.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!(-r.ind_right <= r.eigenvalues.len() as i64);
        assert_eq!((r.ind_top, r.ind_left), (0, 0));
    }
}

#[test]
fn transverse_leave_points_have_index_zero() {
    // Branches 12 - (k pi/x)^2 and 2 - (pi/x)^2 cross at x = pi sqrt((k^2 - 1)/10).
    let p = constant(4.0, vec![1.0, 1.0], &[12.0, 0.0, 0.0, 2.0]).with_grid(Grid {
        scan_nx: 200,
        scan_nlambda: 200,
        ..Grid::default()
    });
    let r = box_index(&p).unwrap();
    assert_eq!(r.m_index, 0);
    assert!(r.morse.equality);
    let expect = [3.0f64, 4.0].map(|k| {
        let x = PI * ((k * k - 1.0) / 10.0).sqrt();
        (x, 2.0 - (PI / x).powi(2))
    });
    assert_eq!(r.leave_points.len(), 2, "{:?}", r.leave_points);
    for ((x, l), lp) in expect.iter().zip(&r.leave_points) {
        assert!((lp.x - x).abs() < 1e-6 && (lp.lambda - l).abs() < 1e-6, "{lp:?}");
        assert_eq!((lp.i_minus, lp.i_plus, lp.local_index, lp.loop_index), (2, 2, 0, 0));
    }
    assert_eq!(r.leave_index_sum, r.m_index);
}

#[test]
fn turing_leave_points_by_type() {
    let p = Problem::new(10.0, vec![1.0, 15.5], Potential::TuringExample, Boundary::Dirichlet)
        .unwrap()
        .with_grid(Grid { scan_nx: 120, scan_nlambda: 120, ..Grid::default() });
    let region = Region { x0: 4.0, x1: 9.0, lambda0: -0.2, lambda1: 0.05 };
    let scan = leave_points_detect(&p, &region).unwrap();
    assert_eq!(scan.points.len(), 2, "{:?}", scan.points);
    let (cap, cross) = (&scan.points[0], &scan.points[1]);
    assert!((cap.x - 5.2131).abs() < 1e-3 && (cap.lambda - 0.014669).abs() < 1e-6);
    assert_eq!(cap.local_index, 2);
    assert!((cross.x - 7.676635).abs() < 1e-5 && (cross.lambda + 0.0896696).abs() < 1e-6, "{cross:?}");
    assert_eq!(cross.local_index, 0);
}

#[test]
fn cc_spectrum_counts_conjugate_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut tested = 0;
    while tested < 6 {
        let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..12.0)).collect();
        let l = rng.gen_range(1.0..3.0);
        if !genericity_check(&Matrix2::new(v[0], v[1], v[2], v[3]), l).generic {
            continue;
        }
        let p = constant(l, vec![1.0, 1.0], &v);
        let li = lambda_infinity(&p);
        let spectrum = cc_spectrum(&DMatrix::from_row_slice(2, 2, &v), &[1.0, 1.0], l, li);
        let conj = conjugate_points(&p).unwrap();
        assert_eq!(spectrum.len(), conj.len(), "V = {v:?}, L = {l}");
        tested += 1;
    }
}
