mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use quadspace::coupled_mode::*;
use quadspace::Error;

fn ham() -> impl Strategy<Value = EffectiveHamiltonian> {
    (-10.0..10.0f64, 0.0..2.0f64, -10.0..10.0f64, 0.0..2.0f64, -3.0..3.0f64)
        .prop_map(|(w1, g1, w2, g2, g)| EffectiveHamiltonian::new(w1, g1, w2, g2, g).unwrap())
}

proptest! {
    #[test]
    fn trace_and_determinant_identities(h in ham()) {
        let (lp, lm) = eigenvalues(&h);
        let (o1, o2) = h.diagonal();
        let g = h.coupling();
        let scale = h.scale().max(1.0);
        prop_assert!((lp + lm - (o1 + o2)).norm() <= 1e-12 * scale);
        prop_assert!((lp * lm - (o1 * o2 - g * g)).norm() <= 1e-12 * scale * scale);
    }

    #[test]
    fn matches_dense_solver(h in ham()) {
        let (lp, lm) = eigenvalues(&h);
        let (rp, rm) = common::reference_eigenvalues(&h);
        let scale = h.scale().max(1.0);
        prop_assert!((lp - rp).norm() <= 1e-12 * scale);
        prop_assert!((lm - rm).norm() <= 1e-12 * scale);
    }

    #[test]
    fn branch_permutation_invariance(h in ham()) {
        let (o1, o2) = h.diagonal();
        let swapped = EffectiveHamiltonian::new(o2.re, -o2.im, o1.re, -o1.im, h.coupling()).unwrap();
        let (a, b) = eigenvalues(&h);
        let (c, d) = eigenvalues(&swapped);
        let scale = h.scale().max(1.0);
        prop_assert!((a - c).norm() <= 1e-12 * scale);
        prop_assert!((b - d).norm() <= 1e-12 * scale);
    }

    #[test]
    fn eigenvectors_solve_the_eigenproblem(h in ham()) {
        prop_assume!(!h.is_exceptional());
        let (lp, lm) = eigenvalues(&h);
        let (vp, vm) = eigenvectors(&h).unwrap();
        let m = h.matrix();
        let scale = h.scale().max(1.0);
        for (l, v) in [(lp, vp), (lm, vm)] {
            let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            for row in 0..2 {
                let hv = m[row][0] * v[0] + m[row][1] * v[1];
                prop_assert!((hv - l * v[row]).norm() <= 1e-10 * scale);
            }
        }
    }
}

#[test]
fn degenerate_uncoupled_pair() {
    let h = EffectiveHamiltonian::new(2.0, 0.5, 2.0, 0.5, 0.0).unwrap();
    let (a, b) = eigenvalues(&h);
    assert_eq!(a, Complex64::new(2.0, -0.5));
    assert_eq!(b, Complex64::new(2.0, -0.5));
    assert!(h.is_exceptional());
}

#[test]
fn exceptional_point_has_no_eigenbasis() {
    let h = EffectiveHamiltonian::new(1.0, 0.25, 1.0, 0.75, 0.25).unwrap();
    assert!(h.is_exceptional());
    assert!(matches!(eigenvectors(&h), Err(Error::ExceptionalPoint { .. })));
}

#[test]
fn rejects_gain_and_nan() {
    assert!(EffectiveHamiltonian::new(1.0, -0.1, 1.0, 0.0, 0.1).is_err());
    assert!(EffectiveHamiltonian::new(f64::NAN, 0.1, 1.0, 0.0, 0.1).is_err());
}

#[test]
fn linear_detuning_places_ac_at_resonance() {
    let grid = linspace(-1.0, 1.0, 201);
    let model = DetuningModel::symmetric(5.0, 1.0, 0.0, 0.1, 0.1, 0.2, grid).unwrap();
    let trace = sweep_spectrum(&model);
    assert!(locate_ac(&trace).abs() < 1e-12);
    let k = locate_ac_index(&trace).unwrap();
    let gap = (trace.lambda(0, k) - trace.lambda(1, k)).re.abs();
    assert!((gap - 0.4).abs() < 1e-12);
}

#[test]
fn swapped_model_traces_the_same_spectrum() {
    let model = DetuningModel::reference();
    let a = sweep_spectrum(&model);
    let b = sweep_spectrum(&model.swapped());
    assert_eq!(locate_ac(&a), locate_ac(&b));
    for k in 0..a.len() {
        let mut x = [a.lambda(0, k), a.lambda(1, k)];
        let mut y = [b.lambda(0, k), b.lambda(1, k)];
        for v in [&mut x, &mut y] {
            v.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
        }
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).norm() < 1e-12);
        }
    }
}

#[test]
fn branches_are_continuous_across_the_crossing() {
    let trace = sweep_spectrum(&DetuningModel::reference());
    for k in 1..trace.len() {
        for branch in 0..2 {
            let own = (trace.lambda(branch, k) - trace.lambda(branch, k - 1)).norm();
            let other = (trace.lambda(1 - branch, k) - trace.lambda(branch, k - 1)).norm();
            assert!(own <= other, "branch {branch} jumps at k = {k}");
        }
    }
}

#[test]
fn model_validation() {
    let bad = DetuningModel::new(
        Affine::constant(1.0),
        Affine::constant(1.0),
        Affine::constant(0.1),
        Affine::constant(0.1),
        0.1,
        vec![0.0, 1.0],
    );
    assert!(bad.is_err());
    let unordered = DetuningModel::new(
        Affine::constant(1.0),
        Affine::constant(1.0),
        Affine::constant(0.1),
        Affine::constant(0.1),
        0.1,
        vec![0.0, 2.0, 1.0],
    );
    assert!(unordered.is_err());
    let gain = DetuningModel::new(
        Affine::constant(1.0),
        Affine::constant(1.0),
        Affine::new(-1.0, 0.5),
        Affine::constant(0.1),
        0.1,
        vec![0.0, 0.5, 1.0],
    );
    assert!(gain.is_err());
}
