//! Noise-averaged closed forms for a sweep through the crossing.
//!
//! Fast noise acts away from the crossing and the regular transverse field
//! acts only near it, so each rank-s block evolves as
//!   decay before the crossing → Landau-Zener rotation → decay after it.
//! A component g_{s,m} of the slow (phase-stripped) variables decays as
//!   exp{-(s(s+1) - m²)/4 ∫ (F̂ + Ĝ)(ḃ t) dt},
//! and ∫ F̂ over the whole line equals 2θ, so a population component loses
//! e^{-s(s+1)θ/4} on each side and E_s = e^{-s(s+1)θ/2} overall.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lz::{lz_amplitudes, rotation_matrix, rotation_matrix_element, LzParams, Su2Amplitudes};
use crate::noise::{cumulative_f, cumulative_g, NoiseSpec};
use crate::special::legendre;
use crate::spin::{BlochTensorSet, CMatrix, SpinValue, TensorBasis};

/// Residual allowed when the initial coefficients are checked against the diagonal state.
const INITIAL_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// E_s = exp(-s(s+1)θ/2).
pub fn rank_decay(s: u32, theta: f64) -> f64 {
    let s = s as f64;
    (-s * (s + 1.0) * theta / 2.0).exp()
}

fn check_component(s: u32, m: i32) -> Result<()> {
    if s == 0 || m.unsigned_abs() > s {
        return Err(Error::Domain(format!("no tensor component (s, m) = ({s}, {m})")));
    }
    Ok(())
}

/// Exponent accumulated by ⟨g_{s,m}⟩ between t0 and t1 (either may be infinite):
/// (s(s+1) - m²)/4 ∫_{t0}^{t1} (F̂ + Ĝ)(ḃ t) dt.
pub fn decay_exponent(spec: &NoiseSpec, sweep_rate: f64, s: u32, m: i32, t0: f64, t1: f64) -> Result<f64> {
    check_component(s, m)?;
    if sweep_rate.is_nan() || sweep_rate <= 0.0 {
        return Err(Error::Domain(format!("sweep rate must be positive, got {sweep_rate}")));
    }
    let weight = ((s * (s + 1)) as f64 - (m * m) as f64) / 4.0;
    let span = |t: f64| cumulative_f(spec, sweep_rate, t) + cumulative_g(spec, sweep_rate, t);
    Ok(weight * (span(t1) - span(t0)))
}

/// ⟨g_z(t)⟩/⟨g_z(-∞)⟩ for a noise-only sweep.
pub fn gz_profile(spec: &NoiseSpec, sweep_rate: f64, times: &[f64]) -> Result<AveragedProfile> {
    coherence_profile(SpinValue::new(1)?, 1, 0, spec, sweep_rate, times)
}

/// |⟨g̃_{s,m}(t)⟩| / |g̃_{s,m}(-∞)| for a noise-only sweep.
pub fn coherence_profile(
    spin: SpinValue,
    s: u32,
    m: i32,
    spec: &NoiseSpec,
    sweep_rate: f64,
    times: &[f64],
) -> Result<AveragedProfile> {
    if s > spin.two_s() {
        return Err(Error::Domain(format!("rank {s} exceeds 2S = {}", spin.two_s())));
    }
    let values = times
        .iter()
        .map(|&t| decay_exponent(spec, sweep_rate, s, m, f64::NEG_INFINITY, t).map(|x| (-x).exp()))
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedProfile {
        times: times.to_vec(),
        values,
    })
}

/// Action of ρ ↦ UρU† on the rank-s coefficients, indexed [m' + s, m + s].
fn rank_map(basis: &TensorBasis, u: &CMatrix, s: u32) -> DMatrix<Complex64> {
    let d = basis.spin().dim();
    let width = 2 * s as usize + 1;
    let ops: Vec<CMatrix> = (0..width)
        .map(|k| basis.operator(s, k as i32 - s as i32).to_dense(d))
        .collect();
    let norm = basis.norm(s);
    let ud = u.adjoint();
    DMatrix::from_fn(width, width, |mp, m| {
        let rotated = u * ops[m].adjoint() * &ud;
        (&ops[mp] * rotated).trace() / norm
    })
}

/// Matched evolution of the averaged coefficients through a sweep with LZ
/// amplitudes `amps` and decoherence exponent θ.
pub(crate) fn average_bloch_tensor(g_init: &BlochTensorSet, amps: &Su2Amplitudes, theta: f64) -> BlochTensorSet {
    let spin = g_init.spin();
    let basis = TensorBasis::new(spin);
    let u = rotation_matrix(spin, amps);
    let mut out = BlochTensorSet::zeros(spin);
    for s in 1..=spin.two_s() {
        let si = s as i32;
        let half = |m: i32| (-((s * (s + 1)) as f64 - (m * m) as f64) * theta / 4.0).exp();
        let before: Vec<Complex64> = (-si..=si).map(|m| g_init.get(s, m) * half(m)).collect();
        let map = rank_map(&basis, &u, s);
        for mp in -si..=si {
            let row = (mp + si) as usize;
            let acc: Complex64 = before.iter().enumerate().map(|(k, g)| map[(row, k)] * g).sum();
            out.set(s, mp, acc * half(mp));
        }
    }
    out
}

/// Averaged spin-½ Bloch coefficients (g_{1,-1}, g_{1,0}, g_{1,1}) at t = +∞
/// from their values at t = -∞.
pub fn average_bloch_vector_full(g_init: [Complex64; 3], gamma: f64, theta: f64) -> Result<[Complex64; 3]> {
    let spin = SpinValue::new(1)?;
    let mut g = BlochTensorSet::zeros(spin);
    for (k, v) in g_init.iter().enumerate() {
        g.set(1, k as i32 - 1, *v);
    }
    let out = average_bloch_tensor(&g, &lz_amplitudes(LzParams::new(gamma)?), theta);
    Ok([out.get(1, -1), out.get(1, 0), out.get(1, 1)])
}

/// Averaged transition probabilities, P[(j', j)] = P_{j→j'} with index 0 ↔ m = S.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub spin: SpinValue,
    pub probabilities: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn get(&self, from_two_m: i32, to_two_m: i32) -> Result<f64> {
        Ok(self.probabilities[(self.spin.index(to_two_m)?, self.spin.index(from_two_m)?)])
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.probabilities.column_iter().map(|c| c.sum()).collect()
    }

    /// Largest violation of P_{j→j'} = P_{j'→j} = P_{-j→-j'}.
    pub fn symmetry_defect(&self) -> f64 {
        let p = &self.probabilities;
        let d = p.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst
                    .max((p[(i, j)] - p[(j, i)]).abs())
                    .max((p[(i, j)] - p[(d - 1 - i, d - 1 - j)]).abs());
            }
        }
        worst
    }
}

/// g_{s,0}(-∞) of the diagonal basis state with index `j`: column j of the result,
/// row s-1. Checked by rebuilding the state's diagonal.
pub fn initial_coefficients(basis: &TensorBasis) -> Result<DMatrix<f64>> {
    let spin = basis.spin();
    let d = spin.dim();
    let two_s = spin.two_s() as usize;
    let diags: Vec<Vec<f64>> = (1..=spin.two_s()).map(|s| basis.diagonal(s)).collect();
    let g = DMatrix::from_fn(two_s, d, |s, j| diags[s][j] / basis.norm(s as u32 + 1));
    let mut residual: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            let rebuilt = 1.0 / d as f64
                + diags
                    .iter()
                    .enumerate()
                    .map(|(s, diag)| g[(s, j)] * diag[k])
                    .sum::<f64>();
            let target = if j == k { 1.0 } else { 0.0 };
            residual = residual.max((rebuilt - target).abs());
        }
    }
    if residual > INITIAL_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "initial Bloch coefficients for spin {spin} leave residual {residual:e}"
        )));
    }
    Ok(g)
}

/// P_{j→j'} = 1/(2S+1) + Σ_s g_{s,0}^{(j)}(-∞) E_s P_s(2e^{-2πγ²} - 1) (T_{s,0})_{j'j'}
/// for a start in a diabatic basis state.
pub fn transition_probability_matrix(spin: SpinValue, gamma: f64, theta: f64) -> Result<TransitionMatrix> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::Domain(format!("theta must be non-negative, got {theta}")));
    }
    let lz = LzParams::new(gamma)?;
    let x = 2.0 * lz_amplitudes(lz).a.norm_sqr() - 1.0;
    let basis = TensorBasis::new(spin);
    let g = initial_coefficients(&basis)?;
    let d = spin.dim();
    let diags: Vec<Vec<f64>> = (1..=spin.two_s()).map(|s| basis.diagonal(s)).collect();
    let factors: Vec<f64> = (1..=spin.two_s())
        .map(|s| rank_decay(s, theta) * legendre(s, x))
        .collect();
    let probabilities = DMatrix::from_fn(d, d, |jp, j| {
        1.0 / d as f64
            + (0..spin.two_s() as usize)
                .map(|s| g[(s, j)] * factors[s] * diags[s][jp])
                .sum::<f64>()
    });
    Ok(TransitionMatrix { spin, probabilities })
}

/// ⟨g²⟩ - |⟨g⟩|² of the spin-½ Bloch vector at t = +∞.
pub fn fluctuation_spin_half(g_init: [Complex64; 3], gamma: f64, theta: f64) -> Result<f64> {
    let mean = average_bloch_vector_full(g_init, gamma, theta)?;
    let before: f64 = g_init.iter().map(|g| g.norm_sqr()).sum();
    let after: f64 = mean.iter().map(|g| g.norm_sqr()).sum();
    Ok((before - after).max(0.0))
}

/// Σ_m ⟨|g_{s,m}|²⟩ - |⟨g_{s,m}⟩|² at t = +∞ after a start with only g_{s,0} nonzero.
/// The averages include the coherences g_{s,m≠0} that the crossing creates,
///   Σ_m |⟨g_{s,m}⟩|² = g² e^{-s(s+1)θ/2} Σ_m |D^s_{m0}|² e^{-(s(s+1)-m²)θ/2},
/// whose m = 0 term is g² E_s² P_s(2e^{-2πγ²} - 1)².
pub fn fluctuation_tensor(spin: SpinValue, s: u32, gamma: f64, theta: f64, g_init_s0: f64) -> Result<f64> {
    if s == 0 || s > spin.two_s() {
        return Err(Error::Domain(format!("rank {s} out of range for spin {spin}")));
    }
    let amps = lz_amplitudes(LzParams::new(gamma)?);
    let rank = SpinValue::new(2 * s)?;
    let ss = (s * (s + 1)) as f64;
    let si = s as i32;
    let mut kept = 0.0;
    for m in -si..=si {
        let dm = rotation_matrix_element(rank, 2 * m, 0, &amps)?.norm_sqr();
        kept += dm * (-(ss - (m * m) as f64) * theta / 2.0).exp();
    }
    let kept = kept * (-ss * theta / 2.0).exp();
    Ok((g_init_s0 * g_init_s0 * (1.0 - kept)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::AxisNoise;
    use std::f64::consts::PI;

    #[test]
    fn profile_limits() {
        let spec = NoiseSpec::x_only(0.4, 0.01);
        let theta = PI * 0.16;
        let p = gz_profile(&spec, 1.0, &[-1e12, 0.0, 1e12]).unwrap();
        assert!((p.values[0] - 1.0).abs() < 1e-9);
        assert!((p.values[1] - (-theta / 2.0).exp()).abs() < 1e-14);
        assert!((p.values[2] - (-theta).exp()).abs() < 1e-9);
        let c = coherence_profile(SpinValue::new(2).unwrap(), 2, 0, &spec, 1.0, &[f64::INFINITY]).unwrap();
        assert!((c.values[0] - (-3.0 * theta).exp()).abs() < 1e-14);
        let c = coherence_profile(SpinValue::new(1).unwrap(), 1, 1, &spec, 1.0, &[f64::INFINITY]).unwrap();
        assert!((c.values[0] - (-theta / 2.0).exp()).abs() < 1e-14);
        assert!(coherence_profile(SpinValue::new(1).unwrap(), 2, 0, &spec, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn cross_term_only_shapes_the_profile() {
        let ax = AxisNoise {
            amplitude: 0.3,
            tau: 0.05,
        };
        let spec = NoiseSpec {
            x: Some(ax),
            y: Some(ax),
            z: None,
            cross_xy: 0.7,
        };
        let theta = PI * 0.18;
        let end = gz_profile(&spec, 1.0, &[f64::INFINITY]).unwrap().values[0];
        assert!((end - (-theta).exp()).abs() < 1e-12);
        let mut plain = spec.clone();
        plain.cross_xy = 0.0;
        let a = gz_profile(&spec, 1.0, &[0.0]).unwrap().values[0];
        let b = gz_profile(&plain, 1.0, &[0.0]).unwrap().values[0];
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn decohered_spin_half() {
        let (gamma, theta) = (0.4, 0.7);
        let gz = Complex64::new(0.8, 0.0);
        let out = average_bloch_vector_full([Complex64::default(), gz, Complex64::default()], gamma, theta).unwrap();
        let p = (-2.0 * PI * gamma * gamma).exp();
        assert!((out[1] - gz * (-theta).exp() * (2.0 * p - 1.0)).norm() < 1e-13);
        let amps = lz_amplitudes(LzParams::new(gamma).unwrap());
        let expected = (-0.75 * theta).exp() * 2f64.sqrt() * (amps.a * amps.b).norm() * gz.norm();
        assert!((out[2].norm() - expected).abs() < 1e-13);
        assert!((out[0].norm() - expected).abs() < 1e-13);
    }

    #[test]
    fn spin_half_probability() {
        for &(gamma, theta) in &[(0.0, 0.0), (0.5, 1.0), (1.2, 0.3)] {
            let m = transition_probability_matrix(SpinValue::new(1).unwrap(), gamma, theta).unwrap();
            let exact = 0.5 * (1.0 + (-theta).exp() - 2.0 * (-theta - 2.0 * PI * gamma * gamma).exp());
            assert!((m.get(1, -1).unwrap() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn fluctuation_forms_agree() {
        let half = SpinValue::new(1).unwrap();
        for &(gamma, theta) in &[(0.0, 0.5), (0.5, 1.0), (0.9, 2.0)] {
            let g = 0.6;
            let a =
                fluctuation_spin_half([Complex64::default(), g.into(), Complex64::default()], gamma, theta).unwrap();
            let b = fluctuation_tensor(half, 1, gamma, theta, g).unwrap();
            let p = (-2.0 * PI * gamma * gamma).exp();
            let closed = g
                * g
                * (1.0 - (-2.0 * theta).exp() - 4.0 * (p - p * p) * ((-1.5 * theta).exp() - (-2.0 * theta).exp()));
            assert!((a - closed).abs() < 1e-13, "{a} {closed}");
            assert!((b - closed).abs() < 1e-13, "{b} {closed}");
        }
        assert_eq!(fluctuation_tensor(half, 1, 0.0, 0.0, 0.5).unwrap(), 0.0);
        assert!((fluctuation_tensor(half, 1, 0.3, 60.0, 0.5).unwrap() - 0.25).abs() < 1e-14);
    }
}
