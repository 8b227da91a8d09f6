use std::sync::Arc;

use llblow_core::closed_forms as cf;
use llblow_core::ops::{self, FrenetField};
use llblow_core::{Error, Parity, RadialField, RadialGrid};
use proptest::prelude::*;

fn graded(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::graded(1e-3, 60.0, n, 1.04).unwrap())
}

fn max_on(grid: &RadialGrid, f: &[f64], lo: f64, hi: f64) -> f64 {
    grid.nodes().iter().zip(f).filter(|(&y, _)| y >= lo && y <= hi).fold(0.0, |m, (_, v)| m.max(v.abs()))
}

#[test]
fn kernel_residuals_converge_at_second_order() {
    let g = graded(1500);
    let gf = Arc::new(g.refined().unwrap());
    for (name, f, parity) in [
        ("lambda_phi", cf::lambda_phi as fn(f64) -> f64, Parity::Odd),
        ("gamma", |y: f64| cf::gamma(y).unwrap(), Parity::None),
    ] {
        let r = |grid: &Arc<RadialGrid>| {
            let v: Vec<f64> = grid.nodes().iter().map(|&y| f(y)).collect();
            // Gamma is singular at 0, so its parity ghost is not used on [0.5, 50]
            let p = if parity == Parity::None { Parity::Odd } else { parity };
            max_on(grid, &ops::h_values(grid, &v, p), 0.5, 50.0)
        };
        let ratio = r(&g) / r(&gf);
        assert!((ratio - 4.0).abs() < 0.5, "{name}: {ratio}");
    }
}

#[test]
fn inverse_of_h_reproduces_t1() {
    let g = Arc::new(RadialGrid::graded(1e-3, 50.0, 4000, 1.02).unwrap());
    let lp = RadialField::from_fn(&g, Parity::Odd, "lp", cf::lambda_phi);
    let u = ops::solve_h(&lp);
    let t1 = cf::t1_on(g.nodes());
    let err = u.values.iter().zip(&t1).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-6, "{err}");
    assert_eq!(u.parity, Parity::Odd);
}

fn adjoint_defect(g: &Arc<RadialGrid>) -> (f64, f64) {
    let f = RadialField::from_fn(g, Parity::Odd, "f", |y| y * (-((y - 3.0) / 0.8).powi(2)).exp());
    let h = RadialField::from_fn(g, Parity::Even, "h", |y| (-((y - 4.0) / 1.1).powi(2)).exp());
    let af = ops::apply_a(&f).unwrap();
    let ash = ops::apply_astar(&h).unwrap();
    assert_eq!(af.parity, Parity::Even);
    assert_eq!(ash.parity, Parity::Odd);
    let l = ops::inner(&af, &h).unwrap();
    (l, l - ops::inner(&f, &ash).unwrap())
}

#[test]
fn a_star_is_the_adjoint_of_a() {
    let g = graded(1500);
    let (l, coarse) = adjoint_defect(&g);
    let (_, fine) = adjoint_defect(&Arc::new(g.refined().unwrap()));
    assert!(fine.abs() < 1e-4 * l.abs(), "{l} {fine}");
    assert!(coarse.abs() / fine.abs() > 3.0, "{coarse} {fine}");
}

#[test]
fn h_factors_as_a_star_a() {
    let g = graded(3000);
    let f = RadialField::from_fn(&g, Parity::Odd, "f", |y| y * (-((y - 2.0) / 0.9).powi(2)).exp());
    let hf = ops::apply_h(&f).unwrap();
    let aa = ops::apply_astar(&ops::apply_a(&f).unwrap()).unwrap();
    let d: Vec<f64> = hf.values.iter().zip(&aa.values).map(|(a, b)| a - b).collect();
    assert!(max_on(&g, &d, 0.1, 10.0) < 1e-3 * hf.max_abs());
}

#[test]
fn quadratic_form_of_h_is_nonnegative() {
    let g = graded(3000);
    for c in [0.5, 1.0, 3.0, 8.0] {
        let f = RadialField::from_fn(&g, Parity::Odd, "f", |y| y * (-((y - c) / 0.7).powi(2)).exp());
        let q = ops::inner(&ops::apply_h(&f).unwrap(), &f).unwrap();
        let a = ops::apply_a(&f).unwrap();
        let qa = ops::inner(&a, &a).unwrap();
        assert!(q > 0.0 && (q - qa).abs() < 2e-3 * qa, "{q} {qa}");
    }
}

#[test]
fn mismatched_grids_and_missing_parity_are_errors() {
    let g1 = graded(500);
    let g2 = graded(501);
    let f = RadialField::zeros(&g1, Parity::Odd, "f");
    let h = RadialField::zeros(&g2, Parity::Odd, "h");
    assert_eq!(ops::inner(&f, &h), Err(Error::GridMismatch));
    let same = Arc::new(RadialGrid::graded(1e-3, 60.0, 500, 1.04).unwrap());
    assert!(ops::inner(&f, &RadialField::zeros(&same, Parity::Odd, "k")).is_ok());
    let none = RadialField::zeros(&g1, Parity::None, "x");
    assert!(matches!(ops::apply_a(&none), Err(Error::ParityUnset(_))));
    assert!(matches!(ops::apply_astar(&none), Err(Error::ParityUnset(_))));
}

#[test]
fn cumulative_integral_converges_fast() {
    let err = |g: &RadialGrid| {
        let f: Vec<f64> = g.nodes().iter().map(|&y| y * (-y).exp()).collect();
        let c = g.cumulative(&f);
        g.nodes().iter().zip(&c).map(|(&y, v)| (v - (1.0 - (1.0 + y) * (-y).exp())).abs()).fold(0.0, f64::max)
    };
    let g = RadialGrid::graded(1e-3, 20.0, 300, 1.04).unwrap();
    let (a, b) = (err(&g), err(&g.refined().unwrap()));
    assert!(b < 1e-9 && a / b > 8.0, "{a} {b}");
}

#[test]
fn grid_constructors() {
    let g = RadialGrid::graded(1e-3, 60.0, 1000, 1.04).unwrap();
    assert_eq!(g.len(), 1000);
    assert!((g.y_min() - 1e-3).abs() < 1e-15 && (g.y_max() - 60.0).abs() < 1e-12);
    let r = g.refined().unwrap();
    for i in 0..g.len() {
        assert!((r.nodes()[2 * i] - g.nodes()[i]).abs() < 1e-12 * g.nodes()[i]);
    }
    let s = RadialGrid::sinh_staggered(0.05, 1.03, 30.0).unwrap();
    assert!((s.y_max() - 30.0).abs() < 1e-12);
    assert!(s.h_min() <= 0.05);
    let u = RadialGrid::uniform_staggered(0.1, 5.0).unwrap();
    assert!((u.nodes()[0] - 0.05).abs() < 1e-15);
    assert!(RadialGrid::graded(1.0, 0.5, 100, 1.04).is_err());
    assert!(RadialGrid::graded(1e-3, 1e6, 10, 1.01).is_err());
    assert!(RadialGrid::sinh_staggered(-1.0, 1.03, 30.0).is_err());
    assert!(RadialGrid::from_nodes(vec![0.1, 0.2, 0.2, 0.4, 0.5, 0.6]).is_err());
    assert!(matches!(u.refined(), Err(Error::Grid(_))));
    // the hash identifies the node set
    let again = RadialGrid::graded(1e-3, 60.0, 1000, 1.04).unwrap();
    assert_eq!(g.hash(), again.hash());
    assert_ne!(g.hash(), r.hash());
}

#[test]
fn scaled_grid_scales_nodes() {
    let g = RadialGrid::sinh_staggered(0.05, 1.03, 30.0).unwrap();
    let s = g.scaled(2.5).unwrap();
    for (a, b) in g.nodes().iter().zip(s.nodes()) {
        assert!((2.5 * a - b).abs() < 1e-13 * b);
    }
    assert!(g.scaled(0.0).is_err());
}

#[test]
fn interpolation_respects_parity() {
    let g = Arc::new(RadialGrid::sinh_staggered(0.02, 1.02, 10.0).unwrap());
    let odd = RadialField::from_fn(&g, Parity::Odd, "o", cf::lambda_phi);
    let even = RadialField::from_fn(&g, Parity::Even, "e", cf::z);
    assert_eq!(odd.interpolate(0.0), 0.0);
    assert!((even.interpolate(0.0) - 1.0).abs() < 1e-6);
    for y in [0.003, 0.5, 2.345, 9.9] {
        assert!((odd.interpolate(y) - cf::lambda_phi(y)).abs() < 1e-6);
        assert!((even.interpolate(y) - cf::z(y)).abs() < 1e-6);
    }
}

#[test]
fn frenet_rotation_and_axpy() {
    let g = graded(500);
    let n = g.len();
    let w = FrenetField::planar(&g, vec![1.0; n], vec![2.0; n]);
    let r = w.rotate();
    assert!(r.alpha.iter().all(|&v| v == -2.0) && r.beta.iter().all(|&v| v == 1.0));
    let mut acc = FrenetField::zeros(&g);
    acc.axpy(3.0, &w);
    assert_eq!(acc.beta, w.scale(3.0).beta);
    assert!(acc.norm_sq().iter().all(|&v| (v - 45.0).abs() < 1e-12));
}

#[test]
fn vector_operator_reduces_to_h_on_planar_fields_with_vanishing_gamma_source() {
    let g = graded(2000);
    let b: Vec<f64> = g.nodes().iter().map(|&y| y * (-((y - 2.0) / 0.8).powi(2)).exp()).collect();
    let w = FrenetField::planar(&g, vec![0.0; g.len()], b.clone());
    let m = ops::apply_mh(&w);
    let hb = ops::h_values(&g, &b, Parity::Odd);
    assert_eq!(m.beta, hb);
    assert!(m.alpha.iter().all(|&v| v == 0.0) && m.gamma.iter().all(|&v| v == 0.0));
    let p = ops::apply_mh_perp(&w);
    assert_eq!(p.beta, hb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pairing_is_symmetric_and_bilinear(c1 in 0.5..8.0f64, c2 in 0.5..8.0f64, s in -3.0..3.0f64) {
        let g = graded(800);
        let f = RadialField::from_fn(&g, Parity::Odd, "f", |y| y * (-(y - c1).powi(2)).exp());
        let h = RadialField::from_fn(&g, Parity::Odd, "h", |y| y * (-(y - c2).powi(2)).exp());
        let fh = ops::inner(&f, &h).unwrap();
        prop_assert!((fh - ops::inner(&h, &f).unwrap()).abs() < 1e-14 * (1.0 + fh.abs()));
        let sf = RadialField::new(g.clone(), f.values.iter().map(|v| s * v).collect(), Parity::Odd, "sf");
        prop_assert!((ops::inner(&sf, &h).unwrap() - s * fh).abs() < 1e-12 * (1.0 + fh.abs()));
    }
}
