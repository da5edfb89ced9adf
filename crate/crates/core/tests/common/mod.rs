#![allow(dead_code)]

use num_complex::Complex64;

use spinlz::spin::{build_spin_operators, tensor_operator, CMatrix, SpinValue};
use spinlz::tables::{decoherence_table, Rational};

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Closed-form harmonics up to rank 4 written with S_±, S_z (S_- for negative m).
/// Prefactors of T_{3,±2}, T_{3,±1} and T_{4,0} are the ones fixed by the
/// lowering recursion; commonly quoted forms are off by √2 in those three.
pub fn closed_form(spin: SpinValue, s: u32, m: i32) -> CMatrix {
    let ops = build_spin_operators(spin);
    let d = spin.dim();
    let ss = spin.s() * (spin.s() + 1.0);
    let id = CMatrix::identity(d, d);
    let z = &ops.sz;
    let p = if m >= 0 { &ops.s_plus } else { &ops.s_minus };
    let z2 = z * z;
    let p2 = p * p;
    let kappa = (6.0 * ss - 5.0) / 7.0;
    let lambda = 3.0 * ss * (ss - 2.0) / 35.0;
    let base = match (s, m.abs()) {
        (1, 0) => z.clone(),
        (1, 1) => p * c(0.5f64.sqrt()),
        (2, 2) => &p2 * c(0.5),
        (2, 1) => (p * z + z * p) * c(0.5),
        (2, 0) => (&z2 - &id * c(ss / 3.0)) * c(1.5f64.sqrt()),
        (3, 3) => &p2 * p * c(2f64.powf(-1.5)),
        (3, 2) => (&p2 * z + p * z * p + z * &p2) * c(1.0 / 12f64.sqrt()),
        (3, 1) => (&z2 * p + z * p * z + p * &z2 - p * c((3.0 * ss - 1.0) / 5.0)) * c((5.0f64 / 24.0).sqrt()),
        (3, 0) => (&z2 * z - z * c((3.0 * ss - 1.0) / 5.0)) * c(2.5f64.sqrt()),
        (4, 4) => &p2 * &p2 * c(0.25),
        (4, 3) => (&p2 * p * z + &p2 * z * p + p * z * &p2 + z * &p2 * p) * c(2f64.powf(-2.5)),
        (4, 2) => {
            (&z2 * &p2 + z * p * z * p + z * &p2 * z + p * &z2 * p + p * z * p * z + &p2 * &z2 - &p2 * c(kappa))
                * c(7f64.sqrt() / 12.0)
        }
        (4, 1) => {
            (&z2 * z * p + &z2 * p * z + z * p * &z2 + p * &z2 * z - (z * p + p * z) * c(kappa))
                * c(7f64.sqrt() * 2f64.powf(-2.5))
        }
        (4, 0) => (&z2 * &z2 - &z2 * c(kappa) + &id * c(lambda)) * c((35.0f64 / 8.0).sqrt()),
        _ => unreachable!(),
    };
    // the S_- forms hold for negative m up to (-1)^m
    if m < 0 && m % 2 != 0 {
        -base
    } else {
        base
    }
}

/// Largest deviation of the recursion-built operators from the closed forms, ranks ≤ 4,
/// relative to the largest entry.
pub fn closed_form_defect(max_two_s: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for two_s in 1..=max_two_s {
        let spin = SpinValue::new(two_s).unwrap();
        for s in 1..=two_s.min(4) {
            for m in -(s as i32)..=s as i32 {
                let t = tensor_operator(spin, s, m).unwrap();
                worst = worst.max(max_abs(&(&t - closed_form(spin, s, m))) / max_abs(&t));
            }
        }
    }
    worst
}

/// (from 2m, to 2m, coefficients of E_1, E_2, ...) for γ = 0.
pub type Row = (i32, i32, &'static [(i128, i128)]);

pub const THREE_LEVEL: &[Row] = &[
    (2, 2, &[(1, 2), (1, 6)]),
    (2, 0, &[(0, 1), (-1, 3)]),
    (0, 0, &[(0, 1), (2, 3)]),
    (2, -2, &[(-1, 2), (1, 6)]),
];

pub const FOUR_LEVEL: &[Row] = &[
    (3, 3, &[(9, 20), (1, 4), (1, 20)]),
    (3, 1, &[(3, 20), (-1, 4), (-3, 20)]),
    (1, 1, &[(1, 20), (1, 4), (9, 20)]),
    (3, -1, &[(-3, 20), (-1, 4), (3, 20)]),
    (1, -1, &[(-1, 20), (1, 4), (-9, 20)]),
    (3, -3, &[(-9, 20), (1, 4), (-1, 20)]),
];

pub const FIVE_LEVEL: &[Row] = &[
    (4, 4, &[(2, 5), (2, 7), (1, 10), (1, 70)]),
    (4, 2, &[(1, 5), (-1, 7), (-1, 5), (-2, 35)]),
    (2, 2, &[(1, 10), (1, 14), (2, 5), (8, 35)]),
    (4, 0, &[(0, 1), (-2, 7), (0, 1), (3, 35)]),
    (2, 0, &[(0, 1), (1, 7), (0, 1), (-12, 35)]),
    (0, 0, &[(0, 1), (2, 7), (0, 1), (18, 35)]),
    (4, -2, &[(-1, 5), (-1, 7), (1, 5), (-2, 35)]),
    (2, -2, &[(-1, 10), (1, 14), (-2, 5), (8, 35)]),
    (4, -4, &[(-2, 5), (2, 7), (-1, 10), (1, 70)]),
];

/// First mismatch between the generated table and the listed rows, if any.
/// Reversed and mirrored transitions must share each row.
pub fn table_mismatch(two_s: u32, rows: &[Row]) -> Option<String> {
    let sp = SpinValue::new(two_s).unwrap();
    let table = decoherence_table(sp).unwrap();
    for &(from, to, coeffs) in rows {
        let e = table.entry(from, to).unwrap();
        if Rational::new(e.constant.0, e.constant.1) != Rational::new(1, sp.dim() as i128) {
            return Some(format!("{from}->{to} constant"));
        }
        for (s, &(n, d)) in coeffs.iter().enumerate() {
            if e.coefficient(s as u32 + 1) != Rational::new(n, d) {
                return Some(format!("{from}->{to} E{}", s + 1));
            }
        }
        if table.entry(to, from).unwrap().coefficients != e.coefficients
            || table.entry(-from, -to).unwrap().coefficients != e.coefficients
        {
            return Some(format!("{from}->{to} symmetry"));
        }
    }
    None
}
