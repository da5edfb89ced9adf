//! Stationary Gaussian field noise with exponential correlators: exact
//! Ornstein-Uhlenbeck sampling, spectral densities and the decoherence
//! exponent θ.
//!
//! The optional xy cross-correlation is modelled as a rotating pair: with a
//! shared correlation time τ and c = c_xy,
//!   f_xx(u) = J_x² e^{-|u|/τ} cos(ωu),  f_yy(u) = J_y² e^{-|u|/τ} cos(ωu),
//!   ⟨η_x(u)η_y(0) - η_y(u)η_x(0)⟩ = -2 J_x J_y e^{-|u|/τ} sin(ωu),  ω = c/τ.
//! For c = 0 the components are independent Ornstein-Uhlenbeck processes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisNoise {
    /// RMS amplitude J (field units).
    pub amplitude: f64,
    /// Correlation time τ.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub x: Option<AxisNoise>,
    pub y: Option<AxisNoise>,
    pub z: Option<AxisNoise>,
    /// Antisymmetric xy cross-correlation coefficient in [-1, 1].
    pub cross_xy: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn x_only(amplitude: f64, tau: f64) -> Self {
        Self {
            x: Some(AxisNoise { amplitude, tau }),
            ..Self::default()
        }
    }

    pub fn axes(&self) -> [Option<AxisNoise>; 3] {
        [self.x, self.y, self.z]
    }

    /// Components with nonzero amplitude.
    pub fn active(&self) -> impl Iterator<Item = (usize, AxisNoise)> {
        self.axes()
            .into_iter()
            .enumerate()
            .filter_map(|(i, a)| a.filter(|a| a.amplitude > 0.0).map(|a| (i, a)))
    }

    pub fn is_silent(&self) -> bool {
        self.active().next().is_none()
    }

    pub fn tau_min(&self) -> Option<f64> {
        self.active().map(|(_, a)| a.tau).reduce(f64::min)
    }

    pub fn tau_max(&self) -> Option<f64> {
        self.active().map(|(_, a)| a.tau).reduce(f64::max)
    }

    pub fn amplitude_max(&self) -> f64 {
        self.active().map(|(_, a)| a.amplitude).fold(0.0, f64::max)
    }

    /// Rotation frequency ω = c_xy/τ of the coupled xy pair (zero when uncoupled).
    pub fn rotation_frequency(&self) -> f64 {
        match (self.cross_xy, self.x) {
            (c, Some(x)) if c != 0.0 => c / x.tau,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in ["x", "y", "z"].iter().zip(self.axes()) {
            if let Some(a) = axis {
                if !(a.amplitude.is_finite() && a.amplitude >= 0.0) {
                    return Err(Error::Validation(format!(
                        "noise.{name}: amplitude must be finite and >= 0, got {}",
                        a.amplitude
                    )));
                }
                if !(a.tau.is_finite() && a.tau > 0.0) {
                    return Err(Error::Validation(format!(
                        "noise.{name}: correlation time must be positive, got {}",
                        a.tau
                    )));
                }
            }
        }
        let c = self.cross_xy;
        if !(c.is_finite() && (-1.0..=1.0).contains(&c)) {
            return Err(Error::Validation(format!(
                "noise.cross_xy must lie in [-1, 1], got {c}"
            )));
        }
        if c != 0.0 {
            match (self.x, self.y) {
                (Some(x), Some(y)) if (x.tau - y.tau).abs() <= 1e-12 * x.tau => {}
                _ => {
                    return Err(Error::Validation(
                        "noise.cross_xy requires x and y components with a shared correlation time".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// An even correlator shape c(u) with c(0) = 1, parametrised by a correlation time.
/// Spectral quantities accept any family; path sampling is exponential only.
pub trait Correlator: Sync {
    fn value(&self, lag: f64, tau: f64) -> f64;

    /// ĉ(Ω) = ∫ c(u) cos(Ωu) du over the real line.
    fn cosine_transform(&self, omega: f64, tau: f64) -> f64;

    /// ∫_{-∞}^{x} ĉ(y) dy. Total mass is 2π.
    fn cumulative_transform(&self, x: f64, tau: f64) -> f64 {
        let f = |y: f64| self.cosine_transform(y, tau);
        // y = x - (1-s)/s maps s ∈ (0, 1] onto (-∞, x]
        let g = |s: f64| {
            if s <= 0.0 {
                0.0
            } else {
                let y = x - (1.0 - s) / s;
                f(y) / (s * s)
            }
        };
        crate::quadrature::integrate(g, 0.0, 1.0, 1e-12, 1e-10, 2000)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl Correlator for Exponential {
    fn value(&self, lag: f64, tau: f64) -> f64 {
        (-lag.abs() / tau).exp()
    }

    fn cosine_transform(&self, omega: f64, tau: f64) -> f64 {
        2.0 * tau / (1.0 + omega * omega * tau * tau)
    }

    fn cumulative_transform(&self, x: f64, tau: f64) -> f64 {
        2.0 * ((x * tau).atan() + PI / 2.0)
    }
}

pub fn spectral_density_f(spec: &NoiseSpec, omega: f64) -> f64 {
    spectral_density_f_with(spec, &Exponential, omega)
}

/// F̂(Ω) = ∫ (f_xx + f_yy)(u) cos(Ωu) du.
pub fn spectral_density_f_with(spec: &NoiseSpec, family: &dyn Correlator, omega: f64) -> f64 {
    let w = spec.rotation_frequency();
    [spec.x, spec.y]
        .iter()
        .flatten()
        .map(|a| {
            a.amplitude.powi(2)
                * 0.5
                * (family.cosine_transform(omega - w, a.tau) + family.cosine_transform(omega + w, a.tau))
        })
        .sum()
}

pub fn spectral_density_g(spec: &NoiseSpec, omega: f64) -> f64 {
    spectral_density_g_with(spec, &Exponential, omega)
}

/// Ĝ(Ω) = ∫ ⟨η_x(u)η_y(0) - η_y(u)η_x(0)⟩ sin(Ωu) du.
pub fn spectral_density_g_with(spec: &NoiseSpec, family: &dyn Correlator, omega: f64) -> f64 {
    let (Some(x), Some(y)) = (spec.x, spec.y) else {
        return 0.0;
    };
    if spec.cross_xy == 0.0 {
        return 0.0;
    }
    let w = spec.rotation_frequency();
    -x.amplitude * y.amplitude * (family.cosine_transform(omega - w, x.tau) - family.cosine_transform(omega + w, x.tau))
}

/// Transform of a single component's autocorrelation at frequency Ω (used for z noise too).
pub fn axis_spectral_density(axis: &AxisNoise, omega: f64) -> f64 {
    axis.amplitude.powi(2) * Exponential.cosine_transform(omega, axis.tau)
}

/// ∫_{-∞}^{t} F̂(ḃ t') dt' in closed form.
pub fn cumulative_f(spec: &NoiseSpec, sweep_rate: f64, t: f64) -> f64 {
    cumulative_f_with(spec, &Exponential, sweep_rate, t)
}

pub fn cumulative_f_with(spec: &NoiseSpec, family: &dyn Correlator, sweep_rate: f64, t: f64) -> f64 {
    let w = spec.rotation_frequency();
    let x = sweep_rate * t;
    [spec.x, spec.y]
        .iter()
        .flatten()
        .map(|a| {
            a.amplitude.powi(2)
                * 0.5
                * (family.cumulative_transform(x - w, a.tau) + family.cumulative_transform(x + w, a.tau))
        })
        .sum::<f64>()
        / sweep_rate
}

/// ∫_{-∞}^{t} Ĝ(ḃ t') dt' in closed form.
pub fn cumulative_g(spec: &NoiseSpec, sweep_rate: f64, t: f64) -> f64 {
    let (Some(x), Some(y)) = (spec.x, spec.y) else {
        return 0.0;
    };
    if spec.cross_xy == 0.0 {
        return 0.0;
    }
    let w = spec.rotation_frequency();
    let v = sweep_rate * t;
    -x.amplitude
        * y.amplitude
        * (Exponential.cumulative_transform(v - w, x.tau) - Exponential.cumulative_transform(v + w, x.tau))
        / sweep_rate
}

/// θ = π F(0) / ḃ_z = π (J_x² + J_y²) / ḃ_z.
pub fn theta(spec: &NoiseSpec, sweep_rate: f64) -> Result<f64> {
    if !(sweep_rate > 0.0 && sweep_rate.is_finite()) {
        return Err(Error::Domain(format!("sweep rate must be positive, got {sweep_rate}")));
    }
    let f0: f64 = [spec.x, spec.y].iter().flatten().map(|a| a.amplitude.powi(2)).sum();
    Ok(PI * f0 / sweep_rate)
}

/// Part of θ accumulated inside [t_start, t_end]: (1/2)∫ F̂(ḃ t) dt.
pub fn theta_window(spec: &NoiseSpec, sweep_rate: f64, t_start: f64, t_end: f64) -> f64 {
    0.5 * (cumulative_f(spec, sweep_rate, t_end) - cumulative_f(spec, sweep_rate, t_start))
}

/// Ratio above which a "much less than" condition is reported as violated.
pub const FASTNESS_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastnessReport {
    /// Longest active correlation time.
    pub tau_n: Option<f64>,
    /// τ_n / τ_LZ with τ_LZ = b_x/ḃ_z; absent when b_x = 0 or no noise.
    pub tau_over_lz: Option<f64>,
    pub tau_sqrt_sweep: Option<f64>,
    /// τ_n / t_acc with t_acc = 1/(ḃ_z τ_n).
    pub tau_over_accumulation: Option<f64>,
    pub warnings: Vec<String>,
}

impl FastnessReport {
    pub fn is_fast(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn validate_fastness(spec: &NoiseSpec, sweep_rate: f64, b_x: f64) -> FastnessReport {
    let tau_n = spec.tau_max();
    let mut warnings = Vec::new();
    let tau_over_lz = match tau_n {
        Some(tau) if b_x > 0.0 => Some(tau * sweep_rate / b_x),
        _ => None,
    };
    let tau_sqrt_sweep = tau_n.map(|tau| tau * sweep_rate.sqrt());
    let tau_over_accumulation = tau_n.map(|tau| sweep_rate * tau * tau);
    if let Some(r) = tau_over_lz.filter(|&r| r > FASTNESS_RATIO) {
        warnings.push(format!("tau_n/tau_LZ = {r:.3e} is not small"));
    }
    if let Some(r) = tau_sqrt_sweep.filter(|&r| r > FASTNESS_RATIO) {
        warnings.push(format!("tau_n*sqrt(sweep) = {r:.3e} is not small"));
    }
    if let Some(r) = tau_over_accumulation.filter(|&r| r > FASTNESS_RATIO) {
        warnings.push(format!("tau_n/t_acc = {r:.3e} is not small"));
    }
    FastnessReport {
        tau_n,
        tau_over_lz,
        tau_sqrt_sweep,
        tau_over_accumulation,
        warnings,
    }
}

/// Uniform integration grid; noise is sampled every half step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(end > start && step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!(
                "invalid time grid [{start}, {end}] with step {step}"
            )));
        }
        let steps = ((end - start) / step).ceil() as usize;
        Ok(Self {
            start,
            step: (end - start) / steps as f64,
            steps,
        })
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * self.steps as f64
    }

    pub fn time(&self, step_index: usize) -> f64 {
        self.start + self.step * step_index as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub start: f64,
    /// Spacing between samples (half the integration step).
    pub spacing: f64,
    /// (η_x, η_y, η_z) at start + k·spacing.
    pub samples: Vec<[f64; 3]>,
}

impl NoisePath {
    pub fn silent(grid: &TimeGrid) -> Self {
        Self {
            start: grid.start,
            spacing: grid.step / 2.0,
            samples: vec![[0.0; 3]; 2 * grid.steps + 1],
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| self.start + self.spacing * k as f64)
    }
}

/// Random generator for realization `index` of an ensemble seeded by `master`.
pub fn realization_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Exact one-sample update of the noise vector.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    amplitude: [f64; 3],
    active: [bool; 3],
    decay: [f64; 3],
    kick: [f64; 3],
    // rotation of the coupled xy pair per sample
    coupled: bool,
    rot: (f64, f64),
    state: [f64; 3],
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Starts from the stationary distribution; `spacing` is the sample interval.
    pub fn new(spec: &NoiseSpec, spacing: f64, mut rng: ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let mut amplitude = [0.0; 3];
        let mut active = [false; 3];
        let mut decay = [1.0; 3];
        let mut kick = [0.0; 3];
        for (i, a) in spec.active() {
            if 2.0 * spacing > a.tau / 5.0 + 1e-15 * a.tau {
                return Err(Error::Config(format!(
                    "step {} exceeds tau/5 = {} for noise component {}",
                    2.0 * spacing,
                    a.tau / 5.0,
                    ["x", "y", "z"][i]
                )));
            }
            amplitude[i] = a.amplitude;
            active[i] = true;
            decay[i] = (-spacing / a.tau).exp();
            kick[i] = (-(-2.0 * spacing / a.tau).exp_m1()).sqrt();
        }
        let coupled = spec.cross_xy != 0.0 && active[0] && active[1];
        let angle = spec.rotation_frequency() * spacing;
        let mut state = [0.0; 3];
        for i in 0..3 {
            if active[i] {
                state[i] = rng.sample(StandardNormal);
            }
        }
        Ok(Self {
            amplitude,
            active,
            decay,
            kick,
            coupled,
            rot: (angle.cos(), angle.sin()),
            state,
            rng,
        })
    }

    /// Current noise vector in field units.
    pub fn current(&self) -> [f64; 3] {
        [
            self.amplitude[0] * self.state[0],
            self.amplitude[1] * self.state[1],
            self.amplitude[2] * self.state[2],
        ]
    }

    /// Advances by one sample interval and returns the new noise vector.
    pub fn advance(&mut self) -> [f64; 3] {
        if self.coupled {
            let (c, s) = self.rot;
            let (x, y) = (self.state[0], self.state[1]);
            self.state[0] = c * x - s * y;
            self.state[1] = s * x + c * y;
        }
        for i in 0..3 {
            if self.active[i] {
                let xi: f64 = self.rng.sample(StandardNormal);
                self.state[i] = self.state[i] * self.decay[i] + self.kick[i] * xi;
            }
        }
        self.current()
    }
}

pub fn sample_path(spec: &NoiseSpec, grid: &TimeGrid, seed: u64) -> Result<NoisePath> {
    sample_path_with(spec, grid, realization_rng(seed, 0))
}

pub fn sample_path_with(spec: &NoiseSpec, grid: &TimeGrid, rng: ChaCha8Rng) -> Result<NoisePath> {
    let spacing = grid.step / 2.0;
    let mut stream = NoiseStream::new(spec, spacing, rng)?;
    let n = 2 * grid.steps + 1;
    let mut samples = Vec::with_capacity(n);
    samples.push(stream.current());
    for _ in 1..n {
        samples.push(stream.advance());
    }
    Ok(NoisePath {
        start: grid.start,
        spacing,
        samples,
    })
}
