use std::f64::consts::TAU;

use maslov_core::closedform::{betas_general, d_star, lambda_c, regime, turing_betas, turing_trace_det, Regime};
use maslov_core::exterior::{
    contract, evaluate, kernel, pairing, plucker, psi, standard_forms, wedge, Frame, KForm, KVector,
};
use maslov_core::flow::turing_matrix;
use maslov_core::rp1::{wind, RP1Path, RP1Point};
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn frame(rows: usize, cols: usize, v: &[f64]) -> Frame {
    DMatrix::from_row_slice(rows, cols, &v[..rows * cols])
}

fn loop_path(angles: &[f64]) -> RP1Path {
    let ts: Vec<f64> = (0..angles.len()).map(|k| k as f64).collect();
    let pts = angles.iter().map(|&a| RP1Point::new((a / 2.0).cos(), -(a / 2.0).sin()).unwrap()).collect();
    RP1Path::new(ts, pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn plucker_relation(v in coeffs(8)) {
        let p = plucker(&frame(4, 2, &v));
        let c = |i: usize, j: usize| p.coeff(&[i, j]).unwrap();
        let rel = c(1, 2) * c(3, 4) - c(1, 3) * c(2, 4) + c(1, 4) * c(2, 3);
        let scale = p.norm().powi(2).max(1e-300);
        prop_assert!(rel.abs() <= 1e-12 * scale);
    }

    #[test]
    fn wedge_associative_and_graded(a in coeffs(5), b in coeffs(10), c in coeffs(10)) {
        let x = KVector::from_coeffs(5, 1, a).unwrap();
        let y = KVector::from_coeffs(5, 2, b).unwrap();
        let z = KVector::from_coeffs(5, 2, c).unwrap();
        let left = wedge(&wedge(&x, &y).unwrap(), &z).unwrap();
        let right = wedge(&x, &wedge(&y, &z).unwrap()).unwrap();
        prop_assert!(left.sub(&right).unwrap().max_abs() < 1e-12);
        // deg 1 and deg 2: sign (-1)^2 = +1; deg 1 with deg 1: -1.
        let xy = wedge(&x, &y).unwrap();
        let yx = wedge(&y, &x).unwrap();
        prop_assert!(xy.sub(&yx).unwrap().max_abs() < 1e-12);
        let w = KVector::from_coeffs(5, 1, z.coeffs()[..5].to_vec()).unwrap();
        let xw = wedge(&x, &w).unwrap();
        let wx = wedge(&w, &x).unwrap();
        prop_assert!(xw.add(&wx).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn evaluate_is_pairing_with_plucker(w in coeffs(binom(6, 3)), f in coeffs(18)) {
        let omega = KForm::from_coeffs(6, 3, w).unwrap();
        let fr = frame(6, 3, &f);
        prop_assert_eq!(evaluate(&omega, &fr).unwrap(), pairing(&omega, &plucker(&fr)).unwrap());
    }

    #[test]
    fn psi_frame_change(w in coeffs(6), f in coeffs(8), m in coeffs(4)) {
        let omega = KForm::from_coeffs(4, 2, w).unwrap();
        let fr = frame(4, 2, &f);
        let mm = DMatrix::from_row_slice(2, 2, &m);
        let det = mm.determinant();
        prop_assume!(det.abs() > 1e-2);
        let gram = (fr.transpose() * &fr).determinant();
        prop_assume!(gram > 1e-4);
        let a = psi(&omega, &fr).unwrap();
        let b = psi(&omega, &(&fr * &mm)).unwrap();
        prop_assert!((b - det.signum() * a).abs() <= 1e-10 * a.abs().max(1e-12) + 1e-13);
    }

    #[test]
    fn double_contraction_vanishes(w in coeffs(binom(5, 3)), v in coeffs(5)) {
        let omega = KForm::from_coeffs(5, 3, w).unwrap();
        let once = contract(&v, &omega).unwrap();
        let twice = contract(&v, &once).unwrap();
        prop_assert!(twice.max_abs() < 1e-14);
    }

    #[test]
    fn perturbation_stability(start in -5.0f64..5.0, steps in prop::collection::vec(0.05f64..0.6, 5..40), noise in prop::collection::vec(-1.0f64..1.0, 80)) {
        // Strictly monotone angles: all crossings transverse.
        let mut angles = vec![start];
        for s in &steps {
            angles.push(angles.last().unwrap() + s);
        }
        let margin = |a: f64| ((a / 2.0).cos()).abs();
        prop_assume!(margin(angles[0]) > 0.1 && margin(*angles.last().unwrap()) > 0.1);
        let base = wind(&loop_path(&angles)).unwrap();
        let m = 0.1f64.min(steps.iter().copied().fold(f64::INFINITY, f64::min) / 4.0);
        let perturbed: Vec<f64> = angles.iter().zip(&noise).map(|(a, e)| a + e * m / 10.0).collect();
        prop_assert_eq!(wind(&loop_path(&perturbed)).unwrap(), base);
    }

    #[test]
    fn anchor_independence(turns in -3i64..=3, steps in prop::collection::vec(-1.0f64..1.0, 8..40), shift in 0usize..40) {
        // Closed loop with total angle 2 pi * turns, started at different samples.
        let total: f64 = steps.iter().sum();
        let target = TAU * turns as f64;
        let k = steps.len() as f64;
        let adj: Vec<f64> = steps.iter().map(|s| s + (target - total) / k).collect();
        prop_assume!(adj.iter().all(|s| s.abs() < 1.4));
        let mut angles = vec![0.3];
        for s in &adj {
            angles.push(angles.last().unwrap() + s);
        }
        let base = wind(&loop_path(&angles)).unwrap();
        prop_assert_eq!(base, turns);
        let r = shift % adj.len();
        let mut rotated = vec![angles[r]];
        for j in 0..adj.len() {
            rotated.push(rotated.last().unwrap() + adj[(r + j) % adj.len()]);
        }
        prop_assert_eq!(wind(&loop_path(&rotated)).unwrap(), base);
    }

    #[test]
    fn beta_vieta(v in coeffs(4), d1 in 0.2f64..5.0, d2 in 0.2f64..5.0, lam in -2.0f64..2.0) {
        let m = Matrix2::new(v[0], v[1], v[2], v[3]);
        let b = betas_general(&m, [d1, d2], lam);
        let bm = Matrix2::new((lam - v[0]) / d1, -v[1] / d1, -v[2] / d2, (lam - v[3]) / d2);
        let (tr, det) = (bm.trace(), bm.determinant());
        let sum = b.beta1 + b.beta2;
        let prod = b.beta1 * b.beta2;
        let scale = tr.abs().max(det.abs().sqrt()).max(1e-3);
        prop_assert!((sum.re - tr).abs() <= 1e-12 * scale && sum.im.abs() <= 1e-12 * scale);
        prop_assert!((prod.re - det).abs() <= 1e-12 * scale * scale && prod.im.abs() <= 1e-12 * scale * scale);
    }

    #[test]
    fn betas_monotone_below_lambda_c(d in 15.0f64..40.0, u in 0.0f64..1.0) {
        let a = turing_matrix();
        let lc = lambda_c(&a, d).unwrap();
        let lam = u * lc * 0.98;
        let h = 1e-6 * lc;
        let (b0, b1) = (turing_betas(&a, d, lam), turing_betas(&a, d, lam + h));
        prop_assert!(b0.is_distinct_negative());
        prop_assert!(b1.beta1.re > b0.beta1.re);
        prop_assert!(b1.beta2.re < b0.beta2.re);
    }
}

#[test]
fn kernel_dimension_of_omega1() {
    for n in 1..=4 {
        let d: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        assert_eq!(kernel(&standard_forms(n, &d).unwrap().omega1).unwrap().len(), n);
    }
}

#[test]
fn d_star_solves_threshold() {
    let a = turing_matrix();
    let ds = d_star(&a).unwrap().unwrap();
    let g = a[(1, 1)] + ds * a[(0, 0)] - 2.0 * (ds * a.determinant()).sqrt();
    assert!(g.abs() < 1e-10);
    assert_eq!(regime(&a, ds * (1.0 - 1e-6)), Regime::Below);
    assert_eq!(regime(&a, ds * (1.0 + 1e-6)), Regime::Above);
    // Discriminant of B vanishes at lambda_c.
    let lc = lambda_c(&a, 15.5).unwrap();
    let (tr, det) = turing_trace_det(&a, 15.5, lc);
    assert!((tr * tr - 4.0 * det).abs() < 1e-12);
}
