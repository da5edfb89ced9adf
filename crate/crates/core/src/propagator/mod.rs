//! Monte Carlo oracle: per-realization propagation under the swept field
//! plus sampled noise, and ensemble statistics.

mod ensemble;
mod kernel;

pub use ensemble::{run_ensemble, BlochStats, EnsembleResult, TransitionEstimate};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lz::{rotation_matrix, LzParams, Su2Amplitudes};
use crate::noise::{self, NoisePath, NoiseSpec, TimeGrid};
use crate::spin::{
    decompose_with, invariant_norms, reconstruct_with, BlochTensorSet, CMatrix, DensityMatrix, SpinValue, TensorBasis,
};
use kernel::{exp_action, exp_half, exp_one, magnus_vector, rk4_step, BlochGenerator, SpinGenerator};

/// Default factor C in T = C·max(1/(ḃτ_min), b_x/ḃ, 1/√ḃ).
pub const DEFAULT_WINDOW_FACTOR: f64 = 10.0;
/// Bound on h·(|b|_max + 3 J_max).
pub const STEP_PHASE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    #[default]
    StateVector,
    BlochTensor,
}

/// Basis in which populations are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementBasis {
    /// Eigenstates of S_z.
    #[default]
    Diabatic,
    /// Eigenstates of the regular field (b_x, 0, ḃt), labelled so that they
    /// coincide with the diabatic states as |t| → ∞.
    FieldAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Fourth-order Magnus exponential integrator.
    #[default]
    Magnus4,
    /// Classical Runge-Kutta with per-step renormalization.
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Diabatic basis state with the given doubled projection.
    Basis(i32),
    Density(DensityMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spin: SpinValue,
    pub sweep_rate: f64,
    pub b_x: f64,
    pub noise: NoiseSpec,
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
    pub ensemble_size: u64,
    pub master_seed: u64,
    pub initial_state: InitialState,
    pub representation: Representation,
    pub basis: MeasurementBasis,
    pub integrator: Integrator,
    /// Number of recorded times, including both ends of the window.
    pub output_points: usize,
}

/// T = C·max(1/(ḃτ_min), b_x/ḃ, 1/√ḃ).
pub fn window_half_width(sweep_rate: f64, b_x: f64, noise: &NoiseSpec, factor: f64) -> f64 {
    let mut scale = (b_x.abs() / sweep_rate).max(1.0 / sweep_rate.sqrt());
    if let Some(tau) = noise.tau_min() {
        scale = scale.max(1.0 / (sweep_rate * tau));
    }
    factor * scale
}

/// h = min(τ_min/10, STEP_PHASE_LIMIT/(ḃT + b_x + 3J_max)).
pub fn auto_step(sweep_rate: f64, b_x: f64, noise: &NoiseSpec, half_width: f64) -> f64 {
    let mut h = STEP_PHASE_LIMIT / (sweep_rate * half_width + b_x.abs() + 3.0 * noise.amplitude_max());
    if let Some(tau) = noise.tau_min() {
        h = h.min(tau / 10.0);
    }
    h
}

impl ExperimentConfig {
    /// Symmetric default window and automatic step; one realization starting
    /// from m = S.
    pub fn new(spin: SpinValue, sweep_rate: f64, b_x: f64, noise: NoiseSpec) -> Self {
        Self::with_window_factor(spin, sweep_rate, b_x, noise, DEFAULT_WINDOW_FACTOR)
    }

    pub fn with_window_factor(spin: SpinValue, sweep_rate: f64, b_x: f64, noise: NoiseSpec, factor: f64) -> Self {
        let t = window_half_width(sweep_rate, b_x, &noise, factor);
        let step = auto_step(sweep_rate, b_x, &noise, t);
        Self {
            spin,
            sweep_rate,
            b_x,
            noise,
            t_start: -t,
            t_end: t,
            step,
            ensemble_size: 1,
            master_seed: 0,
            initial_state: InitialState::Basis(spin.two_s() as i32),
            representation: Representation::StateVector,
            basis: MeasurementBasis::Diabatic,
            integrator: Integrator::Magnus4,
            output_points: 101,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sweep_rate > 0.0 && self.sweep_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sweep_rate must be positive, got {}",
                self.sweep_rate
            )));
        }
        if !self.b_x.is_finite() {
            return Err(Error::Config("b_x must be finite".into()));
        }
        self.noise.validate()?;
        if !(self.t_start < 0.0 && self.t_end > 0.0 && self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "time window must satisfy t_start < 0 < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.step.is_nan() || self.step <= 0.0 {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        if self.output_points < 2 {
            return Err(Error::Config("output_points must be at least 2".into()));
        }
        let b_max = (self.sweep_rate * self.t_start.abs().max(self.t_end)).hypot(self.b_x);
        let phase = self.step * (b_max + 3.0 * self.noise.amplitude_max());
        if phase > STEP_PHASE_LIMIT * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "step {} too large: h(|b|max + 3 J_max) = {phase:.4} exceeds {STEP_PHASE_LIMIT}",
                self.step
            )));
        }
        if let Some(tau) = self.noise.tau_min() {
            if self.step > tau / 10.0 * (1.0 + 1e-9) {
                return Err(Error::Config(format!(
                    "step {} exceeds tau_min/10 = {}",
                    self.step,
                    tau / 10.0
                )));
            }
        }
        match &self.initial_state {
            InitialState::Basis(m) => {
                self.spin.index(*m)?;
            }
            InitialState::Density(rho) => {
                if rho.spin() != self.spin {
                    return Err(Error::Config(format!(
                        "initial density matrix has spin {}, config has {}",
                        rho.spin(),
                        self.spin
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_start, self.t_end, self.step)
    }

    pub fn gamma(&self) -> f64 {
        self.b_x.abs() / (2.0 * self.sweep_rate.sqrt())
    }

    pub fn lz_params(&self) -> Result<LzParams> {
        LzParams::from_fields(self.b_x, self.sweep_rate)
    }

    /// θ for the infinite window.
    pub fn theta(&self) -> Result<f64> {
        noise::theta(&self.noise, self.sweep_rate)
    }

    /// Part of θ accumulated inside the simulated window.
    pub fn theta_window(&self) -> f64 {
        noise::theta_window(&self.noise, self.sweep_rate, self.t_start, self.t_end)
    }

    /// Exponent missing because the window is finite: θ - θ_window.
    pub fn tail_bound(&self) -> f64 {
        self.theta().unwrap_or(f64::NAN) - self.theta_window()
    }

    pub fn initial_density(&self) -> Result<DensityMatrix> {
        match &self.initial_state {
            InitialState::Basis(m) => DensityMatrix::basis_state(self.spin, *m),
            InitialState::Density(rho) => Ok(rho.clone()),
        }
    }

    pub(crate) fn output_steps(&self, steps: usize) -> Vec<usize> {
        let p = self.output_points.max(2);
        let mut out: Vec<usize> = (0..p)
            .map(|i| ((i as f64 * steps as f64) / (p - 1) as f64).round() as usize)
            .collect();
        out.dedup();
        out
    }

    fn field(&self, t: f64, eta: [f64; 3]) -> [f64; 3] {
        [self.b_x + eta[0], eta[1], self.sweep_rate * t + eta[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Populations in the configured measurement basis, one vector per time.
    pub populations: Vec<Vec<f64>>,
    /// Bloch coefficients in the diabatic frame, one set per time.
    pub bloch: Vec<BlochTensorSet>,
    /// max |‖ψ‖ - 1| (before renormalization for RK4); zero in Bloch mode.
    pub norm_drift: f64,
    /// max over time and rank of |Σ_m |g_{s,m}|² - initial|.
    pub bloch_norm_drift: f64,
}

/// Rotation exp(-iβS_y) mapping the diabatic basis to the field-aligned one.
pub fn field_alignment(spin: SpinValue, sweep_rate: f64, b_x: f64, t: f64) -> CMatrix {
    let beta = if t == 0.0 {
        std::f64::consts::FRAC_PI_2 * b_x.signum()
    } else {
        (b_x / (sweep_rate * t)).atan()
    };
    let (s, c) = (0.5 * beta).sin_cos();
    let amps = Su2Amplitudes {
        a: Complex64::new(c, 0.0),
        b: Complex64::new(-s, 0.0),
    };
    rotation_matrix(spin, &amps)
}

/// Shared per-config data for recording observables.
pub(crate) struct Recorder {
    basis: TensorBasis,
    steps: Vec<usize>,
    times: Vec<f64>,
    alignments: Option<Vec<CMatrix>>,
    sweep_rate: f64,
}

impl Recorder {
    pub fn new(cfg: &ExperimentConfig, grid: &TimeGrid) -> Self {
        let steps = cfg.output_steps(grid.steps);
        let times: Vec<f64> = steps.iter().map(|&k| grid.time(k)).collect();
        let alignments = match cfg.basis {
            MeasurementBasis::Diabatic => None,
            MeasurementBasis::FieldAligned => Some(
                times
                    .iter()
                    .map(|&t| field_alignment(cfg.spin, cfg.sweep_rate, cfg.b_x, t))
                    .collect(),
            ),
        };
        Self {
            basis: TensorBasis::new(cfg.spin),
            steps,
            times,
            alignments,
            sweep_rate: cfg.sweep_rate,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn sweep_rate(&self) -> f64 {
        self.sweep_rate
    }

    fn populations(&self, slot: usize, rho: &CMatrix) -> Vec<f64> {
        match &self.alignments {
            None => (0..rho.nrows()).map(|k| rho[(k, k)].re).collect(),
            Some(r) => {
                let rot = &r[slot];
                let rotated = rot.adjoint() * rho * rot;
                (0..rho.nrows()).map(|k| rotated[(k, k)].re).collect()
            }
        }
    }
}

fn density_of(states: &[(f64, Vec<Complex64>)], d: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(d, d);
    for (w, psi) in states {
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] += psi[i] * psi[j].conj() * *w;
            }
        }
    }
    rho
}

/// Pure-state components of the initial density matrix.
fn pure_components(m: &CMatrix) -> Vec<(f64, Vec<Complex64>)> {
    let d = m.nrows();
    // a diagonal rank-one state needs no eigendecomposition
    let diag_one: Vec<usize> = (0..d).filter(|&k| (m[(k, k)].re - 1.0).abs() < 1e-15).collect();
    if diag_one.len() == 1 {
        let mut psi = vec![Complex64::default(); d];
        psi[diag_one[0]] = Complex64::new(1.0, 0.0);
        return vec![(1.0, psi)];
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    (0..d)
        .filter(|&k| eig.eigenvalues[k] > 1e-14)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().cloned().collect()))
        .collect()
}

/// Initial density matrix expressed in the diabatic basis. In the
/// field-aligned basis the configured state refers to the instantaneous
/// field direction at the start of the window.
fn prepared_density(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<CMatrix> {
    let rho = cfg.initial_density()?.into_matrix();
    Ok(match cfg.basis {
        MeasurementBasis::Diabatic => rho,
        MeasurementBasis::FieldAligned => {
            let r = field_alignment(cfg.spin, cfg.sweep_rate, cfg.b_x, grid.time(0));
            &r * rho * r.adjoint()
        }
    })
}

/// Drives a propagation with successive half-step noise samples from `noise`.
pub(crate) fn propagate<N: FnMut() -> [f64; 3]>(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    recorder: &Recorder,
    mut noise: N,
) -> Result<Trajectory> {
    let rho = prepared_density(cfg, grid)?;
    match cfg.representation {
        Representation::StateVector => {
            let mut states = pure_components(&rho);
            propagate_states(cfg, grid, recorder, &mut states, &mut noise)
        }
        Representation::BlochTensor => {
            let g0 = decompose_with(recorder.basis(), &rho);
            propagate_bloch(cfg, grid, recorder, g0, &mut noise)
        }
    }
}

fn propagate_states<N: FnMut() -> [f64; 3]>(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    recorder: &Recorder,
    states: &mut [(f64, Vec<Complex64>)],
    noise: &mut N,
) -> Result<Trajectory> {
    let d = cfg.spin.dim();
    let gen = SpinGenerator::new(cfg.spin);
    let h = grid.step;
    let mut traj = Trajectory {
        times: recorder.times().to_vec(),
        populations: Vec::with_capacity(recorder.steps.len()),
        bloch: Vec::with_capacity(recorder.steps.len()),
        norm_drift: 0.0,
        bloch_norm_drift: 0.0,
    };
    let mut initial_norms: Option<Vec<f64>> = None;
    let mut record = |traj: &mut Trajectory, slot: usize, states: &[(f64, Vec<Complex64>)], drift: f64| {
        let rho = density_of(states, d);
        let g = decompose_with(recorder.basis(), &rho);
        let norms = invariant_norms(&g);
        let init = initial_norms.get_or_insert_with(|| norms.clone());
        let bd = norms
            .iter()
            .zip(init.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        traj.bloch_norm_drift = traj.bloch_norm_drift.max(bd);
        traj.norm_drift = traj.norm_drift.max(drift);
        traj.populations.push(recorder.populations(slot, &rho));
        traj.bloch.push(g);
    };
    let norm_defect = |states: &[(f64, Vec<Complex64>)]| {
        states
            .iter()
            .map(|(_, psi)| (psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    };

    let mut b0 = cfg.field(grid.time(0), noise());
    let mut slot = 0;
    if recorder.steps[0] == 0 {
        record(&mut traj, 0, states, 0.0);
        slot = 1;
    }
    let mut term = Vec::new();
    let mut next = Vec::new();
    let mut scratch: [Vec<Complex64>; 5] = Default::default();
    let mut rk_drift: f64 = 0.0;
    for k in 0..grid.steps {
        let t0 = grid.time(k);
        let eta_h = noise();
        let eta1 = noise();
        let bh = cfg.field(t0 + 0.5 * h, eta_h);
        let b1 = cfg.field(grid.time(k + 1), eta1);
        match cfg.integrator {
            Integrator::Magnus4 => {
                let v = magnus_vector(b0, bh, b1, h);
                for (_, psi) in states.iter_mut() {
                    match d {
                        2 => exp_half(v, psi),
                        3 => exp_one(v, psi),
                        _ => exp_action(&gen, v, psi, &mut term, &mut next),
                    }
                }
            }
            Integrator::Rk4 => {
                for (_, psi) in states.iter_mut() {
                    rk4_step(&gen, b0, bh, b1, h, psi, &mut scratch);
                    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    rk_drift = rk_drift.max((n - 1.0).abs());
                    psi.iter_mut().for_each(|z| *z /= n);
                }
            }
        }
        b0 = b1;
        if slot < recorder.steps.len() && recorder.steps[slot] == k + 1 {
            let drift = norm_defect(states).max(rk_drift);
            if !drift.is_finite() {
                return Err(Error::Numerical(format!(
                    "state vector diverged at t = {}",
                    grid.time(k + 1)
                )));
            }
            record(&mut traj, slot, states, drift);
            slot += 1;
        }
    }
    Ok(traj)
}

fn propagate_bloch<N: FnMut() -> [f64; 3]>(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    recorder: &Recorder,
    mut g: BlochTensorSet,
    noise: &mut N,
) -> Result<Trajectory> {
    let two_s = cfg.spin.two_s();
    let gens: Vec<BlochGenerator> = (1..=two_s).map(BlochGenerator::new).collect();
    let h = grid.step;
    let initial_norms = invariant_norms(&g);
    let mut traj = Trajectory {
        times: recorder.times().to_vec(),
        populations: Vec::with_capacity(recorder.steps.len()),
        bloch: Vec::with_capacity(recorder.steps.len()),
        norm_drift: 0.0,
        bloch_norm_drift: 0.0,
    };
    let record = |traj: &mut Trajectory, slot: usize, g: &BlochTensorSet| {
        let norms = invariant_norms(g);
        let bd = norms
            .iter()
            .zip(initial_norms.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        traj.bloch_norm_drift = traj.bloch_norm_drift.max(bd);
        let rho = reconstruct_with(recorder.basis(), g);
        traj.populations.push(recorder.populations(slot, &rho));
        traj.bloch.push(g.clone());
    };
    let mut b0 = cfg.field(grid.time(0), noise());
    let mut slot = 0;
    if recorder.steps[0] == 0 {
        record(&mut traj, 0, &g);
        slot = 1;
    }
    let mut term = Vec::new();
    let mut next = Vec::new();
    let mut scratch: [Vec<Complex64>; 5] = Default::default();
    for k in 0..grid.steps {
        let t0 = grid.time(k);
        let bh = cfg.field(t0 + 0.5 * h, noise());
        let b1 = cfg.field(grid.time(k + 1), noise());
        let v = magnus_vector(b0, bh, b1, h);
        for s in 1..=two_s {
            let block = g.rank_mut(s);
            let gen = &gens[s as usize - 1];
            match cfg.integrator {
                Integrator::Magnus4 => exp_action(gen, v, block, &mut term, &mut next),
                Integrator::Rk4 => rk4_step(gen, b0, bh, b1, h, block, &mut scratch),
            }
        }
        b0 = b1;
        if slot < recorder.steps.len() && recorder.steps[slot] == k + 1 {
            record(&mut traj, slot, &g);
            slot += 1;
        }
    }
    Ok(traj)
}

fn check_path(grid: &TimeGrid, path: &NoisePath) -> Result<()> {
    if path.samples.len() != 2 * grid.steps + 1
        || (path.start - grid.start).abs() > 1e-12 * grid.start.abs().max(1.0)
        || (2.0 * path.spacing - grid.step).abs() > 1e-12 * grid.step
    {
        return Err(Error::Config(format!(
            "noise path ({} samples, spacing {}) does not match the half-step grid of the config ({} steps of {})",
            path.samples.len(),
            path.spacing,
            grid.steps,
            grid.step
        )));
    }
    Ok(())
}

/// Integrates the Schrödinger equation for `psi0` along a given noise path.
pub fn evolve_state(cfg: &ExperimentConfig, path: &NoisePath, psi0: &[Complex64]) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    check_path(&grid, path)?;
    if psi0.len() != cfg.spin.dim() {
        return Err(Error::Config(format!(
            "state vector has length {}, spin {} needs {}",
            psi0.len(),
            cfg.spin,
            cfg.spin.dim()
        )));
    }
    let recorder = Recorder::new(cfg, &grid);
    let mut samples = path.samples.iter().copied();
    let mut states = vec![(1.0, psi0.to_vec())];
    let mut cfg = cfg.clone();
    cfg.representation = Representation::StateVector;
    propagate_states(&cfg, &grid, &recorder, &mut states, &mut || samples.next().unwrap())
}

/// Integrates the Bloch-tensor equations for `g0` along a given noise path.
pub fn evolve_bloch(cfg: &ExperimentConfig, path: &NoisePath, g0: &BlochTensorSet) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    check_path(&grid, path)?;
    if g0.spin() != cfg.spin {
        return Err(Error::Config("Bloch set and config have different spins".into()));
    }
    let recorder = Recorder::new(cfg, &grid);
    let mut samples = path.samples.iter().copied();
    propagate_bloch(cfg, &grid, &recorder, g0.clone(), &mut || samples.next().unwrap())
}

/// Multiplies g_{s,m} by e^{i m ḃ t²/2}, removing the free precession in b_z = ḃt.
pub fn strip_phase(g: &BlochTensorSet, sweep_rate: f64, t: f64) -> BlochTensorSet {
    let mut out = g.clone();
    let base = 0.5 * sweep_rate * t * t;
    for s in 1..=g.spin().two_s() {
        for m in -(s as i32)..=s as i32 {
            let phase = Complex64::from_polar(1.0, m as f64 * base);
            out.set(s, m, g.get(s, m) * phase);
        }
    }
    out
}
