use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use spinlz::lz::{rotation_matrix, Su2Amplitudes};
use spinlz::spin::{
    build_spin_operators, decompose_density, invariant_norms, reconstruct_density, tensor_operator, CMatrix,
    DensityMatrix, SpinValue, TensorBasis,
};

mod common;

use common::{c, closed_form_defect, max_abs};

#[test]
fn closed_forms_match_recursion() {
    let defect = closed_form_defect(6);
    assert!(defect < 1e-12, "{defect:e}");
    // the closed forms themselves lose digits to cancellation at larger S
    let defect = closed_form_defect(12);
    assert!(defect < 1e-11, "{defect:e}");
}

#[test]
fn quoted_prefactors_off_by_root_two() {
    // quoted: 1/√6, √(5/12), √35/4
    let pairs = [
        (1.0 / 6f64.sqrt(), 1.0 / 12f64.sqrt(), 2f64.sqrt()),
        ((5.0f64 / 12.0).sqrt(), (5.0f64 / 24.0).sqrt(), 2f64.sqrt()),
        (35f64.sqrt() / 4.0, (35.0f64 / 8.0).sqrt(), 0.5f64.sqrt()),
    ];
    for (quoted, used, ratio) in pairs {
        assert!((quoted / used - ratio).abs() < 1e-14);
    }
    // and the quoted values break the m-independent norm
    let spin = SpinValue::new(6).unwrap();
    let ops = build_spin_operators(spin);
    let (z, p) = (&ops.sz, &ops.s_plus);
    let quoted = (p * p * z + p * z * p + z * p * p) * c(1.0 / 6f64.sqrt());
    let norm = (quoted.adjoint() * &quoted).trace().re;
    let reference = tensor_operator(spin, 3, 3).unwrap();
    let target = (reference.adjoint() * &reference).trace().re;
    assert!((norm / target - 2.0).abs() < 1e-12);
}

#[test]
fn spin_one_rank_two_diagonal() {
    let t = tensor_operator(SpinValue::new(2).unwrap(), 2, 0).unwrap();
    let k = 1.5f64.sqrt();
    let expected = [k / 3.0, -2.0 * k / 3.0, k / 3.0];
    for (i, e) in expected.iter().enumerate() {
        assert!((t[(i, i)] - c(*e)).norm() < 1e-15);
    }
}

#[test]
fn orthogonality_adjoint_and_norms() {
    for two_s in 1..=12u32 {
        let spin = SpinValue::new(two_s).unwrap();
        let basis = TensorBasis::new(spin);
        let d = spin.dim();
        let dense: Vec<(u32, i32, CMatrix)> = (1..=two_s)
            .flat_map(|s| (-(s as i32)..=s as i32).map(move |m| (s, m)))
            .map(|(s, m)| (s, m, basis.operator(s, m).to_dense(d)))
            .collect();
        for (s, m, t) in &dense {
            let norm = (t.adjoint() * t).trace().re;
            let scale = basis.norm(*s);
            assert!(
                (norm - scale).abs() < 1e-12 * scale.max(1.0),
                "norm S={spin} s={s} m={m}"
            );
            assert!(t.trace().norm() < 1e-12 * scale.sqrt().max(1.0));
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let partner = &dense.iter().find(|(s2, m2, _)| s2 == s && *m2 == -m).unwrap().2;
            assert!(max_abs(&(t.adjoint() - partner * c(sign))) < 1e-12 * scale.sqrt().max(1.0));
            let sz = build_spin_operators(spin).sz;
            let comm = &sz * t - t * &sz;
            assert!(max_abs(&(comm - t * c(*m as f64))) < 1e-12 * scale.sqrt().max(1.0));
        }
        if two_s <= 6 {
            for (i, (s1, m1, a)) in dense.iter().enumerate() {
                for (s2, m2, b) in &dense[i + 1..] {
                    let overlap = (a.adjoint() * b).trace().norm();
                    let scale = (basis.norm(*s1) * basis.norm(*s2)).sqrt();
                    assert!(overlap < 1e-12 * scale.max(1.0), "({s1},{m1}) vs ({s2},{m2})");
                }
            }
        }
    }
}

fn random_density(d: usize, entries: &[f64]) -> DensityMatrix {
    let a = DMatrix::from_fn(d, d, |i, j| {
        Complex64::new(entries[2 * (i * d + j)], entries[2 * (i * d + j) + 1])
    });
    let mut rho = &a * a.adjoint() + CMatrix::identity(d, d) * c(1e-3);
    let tr = rho.trace();
    rho /= tr;
    DensityMatrix::new(rho).unwrap()
}

fn unit_quaternion(q: [f64; 4]) -> Su2Amplitudes {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    Su2Amplitudes::new(Complex64::new(q[0] / n, q[1] / n), Complex64::new(q[2] / n, q[3] / n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decompose_reconstruct_round_trip(two_s in 1u32..=6, entries in prop::collection::vec(-1.0f64..1.0, 98)) {
        let spin = SpinValue::new(two_s).unwrap();
        let rho = random_density(spin.dim(), &entries);
        let g = decompose_density(&rho);
        prop_assert!(g.pairing_defect() < 1e-12);
        let back = reconstruct_density(&g).unwrap();
        prop_assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-12);
    }

    #[test]
    fn norms_invariant_under_rotation(
        two_s in 1u32..=6,
        entries in prop::collection::vec(-1.0f64..1.0, 98),
        q in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let spin = SpinValue::new(two_s).unwrap();
        let rho = random_density(spin.dim(), &entries);
        let u = rotation_matrix(spin, &unit_quaternion(q));
        let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
        let before = invariant_norms(&decompose_density(&rho));
        let after = invariant_norms(&decompose_density(&rotated));
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
