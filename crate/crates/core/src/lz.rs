//! Noiseless multilevel Landau-Zener theory: the asymptotic SU(2) amplitudes and
//! their spin-S representation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{jacobi_unchecked, ln_factorial, ln_gamma};
use crate::spin::{CMatrix, SpinValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LzParams {
    gamma: f64,
}

impl LzParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!(
                "LZ parameter must be finite and >= 0, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// γ = b_x / (2 √ḃ_z).
    pub fn from_fields(b_x: f64, sweep_rate: f64) -> Result<Self> {
        if !(sweep_rate > 0.0 && sweep_rate.is_finite()) {
            return Err(Error::Domain(format!("sweep rate must be positive, got {sweep_rate}")));
        }
        Self::new(b_x.abs() / (2.0 * sweep_rate.sqrt()))
    }

    pub fn gamma(self) -> f64 {
        self.gamma
    }
}

/// The SU(2) element [[a, b], [-b*, a*]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Amplitudes {
    pub a: Complex64,
    pub b: Complex64,
}

impl Su2Amplitudes {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let n = a.norm_sqr() + b.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("|a|^2 + |b|^2 = {n}, expected 1")));
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Group product self · other.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a - self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: -self.b,
        }
    }
}

pub fn lz_amplitudes(p: LzParams) -> Su2Amplitudes {
    let g = p.gamma;
    if g == 0.0 {
        return Su2Amplitudes::identity();
    }
    let g2 = g * g;
    let a = Complex64::new((-PI * g2).exp(), 0.0);
    // γΓ(-iγ²) = iΓ(1-iγ²)/γ removes the 0·∞ at small γ; the modulus follows
    // from |Γ(1-iy)|² = πy/sinh(πy), so only the phase needs the Lanczos sum
    let modulus = (-(-2.0 * PI * g2).exp_m1()).sqrt();
    let phase = 0.75 * PI - ln_gamma(Complex64::new(1.0, -g2)).im;
    let b = Complex64::from_polar(modulus, phase);
    Su2Amplitudes { a, b }
}

fn parity_sign(k: i32) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn element(two_s: i32, r: i32, c: i32, a: Complex64, b: Complex64) -> Complex64 {
    if r >= c.abs() {
        let n = ((two_s - r) / 2) as u32;
        let alpha = (r - c) / 2;
        let beta = (r + c) / 2;
        let ln_coef = 0.5
            * (ln_factorial(((two_s + r) / 2) as u32) + ln_factorial(((two_s - r) / 2) as u32)
                - ln_factorial(((two_s + c) / 2) as u32)
                - ln_factorial(((two_s - c) / 2) as u32));
        let x = 2.0 * a.norm_sqr() - 1.0;
        let jac = jacobi_unchecked(n, alpha as f64, beta as f64, x);
        a.powi(beta) * b.powi(alpha) * (ln_coef.exp() * jac)
    } else if c >= r.abs() {
        // D(u)_{r,c} = conj(D(u†)_{c,r})
        element(two_s, c, r, a.conj(), -b).conj()
    } else {
        // D_{-m,-m'} = (-1)^{m-m'} conj(D_{m,m'})
        element(two_s, -r, -c, a, b).conj() * parity_sign((r - c) / 2)
    }
}

/// ⟨m|U_S|m'⟩ for doubled projections `two_m`, `two_m_prime`.
pub fn rotation_matrix_element(
    spin: SpinValue,
    two_m: i32,
    two_m_prime: i32,
    amps: &Su2Amplitudes,
) -> Result<Complex64> {
    spin.index(two_m)?;
    spin.index(two_m_prime)?;
    Ok(element(spin.two_s() as i32, two_m, two_m_prime, amps.a, amps.b))
}

pub fn rotation_matrix(spin: SpinValue, amps: &Su2Amplitudes) -> CMatrix {
    let d = spin.dim();
    let ts = spin.two_s() as i32;
    CMatrix::from_fn(d, d, |i, j| element(ts, spin.two_m(i), spin.two_m(j), amps.a, amps.b))
}

/// Number of zeros of ⟨m|U_S|m'⟩ as γ runs over (0, ∞).
pub fn node_count(spin: SpinValue, two_m: i32, two_m_prime: i32) -> Result<u32> {
    spin.index(two_m)?;
    spin.index(two_m_prime)?;
    Ok(((spin.two_s() as i32 - two_m.abs().max(two_m_prime.abs())) / 2) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin(two_s: u32) -> SpinValue {
        SpinValue::new(two_s).unwrap()
    }

    #[test]
    fn amplitudes_unitarity_and_moduli() {
        assert_eq!(lz_amplitudes(LzParams::new(0.0).unwrap()), Su2Amplitudes::identity());
        for &g in &[1e-9, 1e-4, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
            let amps = lz_amplitudes(LzParams::new(g).unwrap());
            let pa = (-2.0 * PI * g * g).exp();
            assert!((amps.a.norm_sqr() - pa).abs() < 1e-14);
            assert!((amps.b.norm_sqr() - (1.0 - pa)).abs() < 1e-13, "g={g}");
            assert_eq!(amps.a.im, 0.0);
        }
    }

    #[test]
    fn amplitude_b_matches_gamma_form() {
        // b = -√(2π) e^{-πγ²/2 + iπ/4} / (γ Γ(-iγ²)) away from γ = 0
        for &g in &[0.3, 0.7, 1.3] {
            let g2: f64 = g * g;
            let direct = -(2.0 * PI).sqrt() * Complex64::new(-PI * g2 / 2.0, PI / 4.0).exp()
                / (g * crate::special::gamma(Complex64::new(0.0, -g2)));
            let amps = lz_amplitudes(LzParams::new(g).unwrap());
            assert!((amps.b - direct).norm() < 1e-13);
        }
        // small-γ limit: b → i√(2π) γ e^{iπ/4}
        let g = 1e-6;
        let amps = lz_amplitudes(LzParams::new(g).unwrap());
        let limit = Complex64::new(0.0, (2.0 * PI).sqrt() * g) * Complex64::new(0.0, PI / 4.0).exp();
        assert!((amps.b - limit).norm() < 1e-15);
    }

    #[test]
    fn gamma_from_fields() {
        let p = LzParams::from_fields(1.0, 4.0).unwrap();
        assert!((p.gamma() - 0.25).abs() < 1e-15);
        assert!(LzParams::from_fields(1.0, 0.0).is_err());
        assert!(LzParams::new(-1.0).is_err());
    }

    #[test]
    fn printed_elements() {
        let amps = Su2Amplitudes::new(
            Complex64::new(0.6, 0.3),
            Complex64::new(-0.2, (1.0 - 0.45 - 0.04f64).sqrt()),
        )
        .unwrap();
        let (a, b) = (amps.a, amps.b);
        let p = a.norm_sqr();
        let e = rotation_matrix_element(spin(2), 0, 0, &amps).unwrap();
        assert!((e.re - (2.0 * p - 1.0)).abs() < 1e-14 && e.im.abs() < 1e-14);
        let e = rotation_matrix_element(spin(4), 0, 0, &amps).unwrap();
        assert!((e.re - (6.0 * p * p - 6.0 * p + 1.0)).abs() < 1e-14);
        let e = rotation_matrix_element(spin(3), 3, 1, &amps).unwrap();
        assert!((e - 3f64.sqrt() * a * a * b).norm() < 1e-14);
        let u = rotation_matrix(spin(1), &amps);
        assert!((u[(0, 0)] - a).norm() < 1e-15);
        assert!((u[(0, 1)] - b).norm() < 1e-15);
        assert!((u[(1, 0)] + b.conj()).norm() < 1e-15);
        assert!((u[(1, 1)] - a.conj()).norm() < 1e-15);
        let id = rotation_matrix(spin(5), &Su2Amplitudes::identity());
        assert!((id - CMatrix::identity(6, 6)).iter().all(|z| z.norm() < 1e-15));
        assert!(rotation_matrix_element(spin(2), 1, 0, &amps).is_err());
    }

    #[test]
    fn node_counts() {
        assert_eq!(node_count(spin(4), 0, 0).unwrap(), 2);
        assert_eq!(node_count(spin(2), 2, -2).unwrap(), 0);
        assert_eq!(node_count(spin(3), 1, -1).unwrap(), 1);
        assert_eq!(node_count(spin(3), 3, 1).unwrap(), 0);
        assert!(node_count(spin(3), 0, 1).is_err());
    }
}
