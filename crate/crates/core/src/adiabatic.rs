//! Fast noise at an adiabatic spin-½ crossing.
//!
//! In the frame that follows the regular field b = (b_x, 0, ḃ t) the noise
//! components transverse to b drive transitions between the adiabatic levels
//! split by ε(t) = √(ḃ²t² + b_x²). With the transverse direction
//! (ḃ t, 0, -b_x)/ε in the xz plane the rate is
//!   F'(t) = f̂_yy(ε) + [ḃ²t² f̂_xx(ε) + b_x² f̂_zz(ε) - ḃ b_x t (f̂_xz + f̂_zx)(ε)]/ε²,
//! and the adiabatic population difference decays as exp(-½∫F' dt).
//! Integrals use u = atan(ḃ t/b_x), which maps the line onto (-π/2, π/2) and
//! turns each Lorentzian term into (b_x/ḃ) 2τJ² w(u)/(cos²u + b_x²τ²) with
//! w = sin²u, 1, cos²u for x, y, z.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::noise::{AxisNoise, Correlator, Exponential, NoiseSpec, FASTNESS_RATIO};
use crate::quadrature::integrate;

const SURVIVAL_REL_TOL: f64 = 1e-8;
const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticConfig {
    pub b_x: f64,
    pub sweep_rate: f64,
    pub spec: NoiseSpec,
    /// Symmetric xz correlation coefficient: f_xz = f_zx = c J_x J_z e^{-|u|/τ}
    /// with the shared correlation time of the x and z components.
    pub cross_xz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticDiagnostics {
    /// ḃ/b_x², small for an adiabatic crossing.
    pub adiabaticity: f64,
    /// τ_n √ḃ with the longest correlation time.
    pub tau_sqrt_sweep: Option<f64>,
    pub warnings: Vec<String>,
}

impl AdiabaticConfig {
    pub fn new(b_x: f64, sweep_rate: f64, spec: NoiseSpec) -> Self {
        Self {
            b_x,
            sweep_rate,
            spec,
            cross_xz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_x > 0.0 && self.b_x.is_finite()) {
            return Err(Error::Domain(format!("b_x must be positive, got {}", self.b_x)));
        }
        if !(self.sweep_rate > 0.0 && self.sweep_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "sweep rate must be positive, got {}",
                self.sweep_rate
            )));
        }
        self.spec.validate()?;
        if !(-1.0..=1.0).contains(&self.cross_xz) {
            return Err(Error::Domain(format!(
                "cross_xz must lie in [-1, 1], got {}",
                self.cross_xz
            )));
        }
        if self.cross_xz != 0.0 {
            match (self.spec.x, self.spec.z) {
                (Some(x), Some(z)) if x.tau == z.tau => {}
                _ => {
                    return Err(Error::Domain(
                        "cross_xz needs x and z noise with a shared correlation time".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn diagnostics(&self) -> AdiabaticDiagnostics {
        let adiabaticity = self.sweep_rate / (self.b_x * self.b_x);
        let tau_sqrt_sweep = self.spec.tau_max().map(|t| t * self.sweep_rate.sqrt());
        let mut warnings = Vec::new();
        if adiabaticity > FASTNESS_RATIO {
            warnings.push(format!("sweep/b_x^2 = {adiabaticity:.3e} is not small"));
        }
        if let Some(r) = tau_sqrt_sweep.filter(|&r| r > FASTNESS_RATIO) {
            warnings.push(format!("tau_n*sqrt(sweep) = {r:.3e} is not small"));
        }
        AdiabaticDiagnostics {
            adiabaticity,
            tau_sqrt_sweep,
            warnings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticBasis {
    pub epsilon: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Level splitting and the rotation coefficients a₁ = √((ε+b_x)/2ε), a₂ = √((ε-b_x)/2ε).
pub fn adiabatic_basis(t: f64, cfg: &AdiabaticConfig) -> AdiabaticBasis {
    let bz = cfg.sweep_rate * t;
    let epsilon = bz.hypot(cfg.b_x);
    if epsilon == 0.0 {
        return AdiabaticBasis {
            epsilon,
            a1: std::f64::consts::FRAC_1_SQRT_2,
            a2: std::f64::consts::FRAC_1_SQRT_2,
        };
    }
    AdiabaticBasis {
        epsilon,
        a1: ((epsilon + cfg.b_x) / (2.0 * epsilon)).sqrt(),
        a2: ((epsilon - cfg.b_x).max(0.0) / (2.0 * epsilon)).sqrt(),
    }
}

fn axis_transform(axis: Option<AxisNoise>, omega: f64) -> f64 {
    axis.map_or(0.0, |a| {
        a.amplitude.powi(2) * Exponential.cosine_transform(omega, a.tau)
    })
}

pub fn effective_rate(t: f64, cfg: &AdiabaticConfig) -> f64 {
    let bz = cfg.sweep_rate * t;
    let eps = bz.hypot(cfg.b_x);
    let spec = &cfg.spec;
    let yy = axis_transform(spec.y, eps);
    if eps == 0.0 {
        return yy + axis_transform(spec.x, 0.0);
    }
    let xx = axis_transform(spec.x, eps);
    let zz = axis_transform(spec.z, eps);
    let xz = match (spec.x, spec.z) {
        (Some(x), Some(z)) if cfg.cross_xz != 0.0 => {
            cfg.cross_xz * x.amplitude * z.amplitude * Exponential.cosine_transform(eps, x.tau)
        }
        _ => 0.0,
    };
    yy + (bz * bz * xx + cfg.b_x * cfg.b_x * zz - bz * cfg.b_x * 2.0 * xz) / (eps * eps)
}

fn survival_checks(cfg: &AdiabaticConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.cross_xz != 0.0 {
        return Err(Error::Domain(
            "the asymptotic survival does not cover an xz cross-correlation".into(),
        ));
    }
    if cfg.spec.cross_xy != 0.0 {
        return Err(Error::Domain(
            "the asymptotic survival does not cover an xy cross-correlation".into(),
        ));
    }
    Ok(())
}

/// ½∫ F' dt over [t0, t1] in the u variable.
fn half_rate_integral(cfg: &AdiabaticConfig, t0: f64, t1: f64) -> Result<f64> {
    let to_u = |t: f64| (cfg.sweep_rate * t / cfg.b_x).atan();
    let (u0, u1) = (to_u(t0), to_u(t1));
    let scale = cfg.b_x / cfg.sweep_rate;
    let terms: Vec<(f64, f64, usize)> = [cfg.spec.x, cfg.spec.y, cfg.spec.z]
        .iter()
        .enumerate()
        .filter_map(|(k, a)| {
            a.filter(|a| a.amplitude > 0.0)
                .map(|a| (a.amplitude * a.amplitude * a.tau, a.tau, k))
        })
        .collect();
    let mut total = 0.0;
    for (weight, tau, axis) in terms {
        let c2 = (cfg.b_x * tau).powi(2);
        let f = |u: f64| {
            let (s, c) = u.sin_cos();
            let w = match axis {
                0 => s * s,
                1 => 1.0,
                _ => c * c,
            };
            w / (c * c + c2)
        };
        // split at the Lorentzian peaks near ±π/2 so the adaptive rule sees them
        let width = (cfg.b_x * tau).min(1.0);
        let mut cuts = vec![u0];
        for p in [-FRAC_PI_2 + width, FRAC_PI_2 - width] {
            if p > u0 && p < u1 {
                cuts.push(p);
            }
        }
        cuts.push(u1);
        let mut part = 0.0;
        for w in cuts.windows(2) {
            let r = integrate(f, w[0], w[1], 0.0, SURVIVAL_REL_TOL * 1e-2, MAX_INTERVALS).map_err(|e| {
                Error::Numerical(format!(
                    "adiabatic rate integral (axis {axis}, b_x tau = {:.3e}) failed: {e}",
                    cfg.b_x * tau
                ))
            })?;
            part += r.value;
        }
        total += scale * 2.0 * weight * part;
    }
    Ok(0.5 * total)
}

/// ⟨g_z'(+∞)⟩/⟨g_z'(-∞)⟩ in the adiabatic frame.
pub fn adiabatic_survival(cfg: &AdiabaticConfig) -> Result<f64> {
    survival_checks(cfg)?;
    Ok((-half_rate_integral(cfg, f64::NEG_INFINITY, f64::INFINITY)?).exp())
}

/// ⟨g_z'(t1)⟩/⟨g_z'(t0)⟩ when the noise acts only inside [t0, t1].
pub fn adiabatic_survival_window(cfg: &AdiabaticConfig, t0: f64, t1: f64) -> Result<f64> {
    survival_checks(cfg)?;
    if t0.partial_cmp(&t1) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!("empty window [{t0}, {t1}]")));
    }
    Ok((-half_rate_integral(cfg, t0, t1)?).exp())
}
