use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{propagate, strip_phase, ExperimentConfig, InitialState, Recorder};
use crate::error::{Error, Result};
use crate::noise::{realization_rng, validate_fastness, FastnessReport, NoiseStream};
use crate::spin::{BlochTensorSet, SpinValue};
use crate::stats::{ensemble_statistics, mean_variance, EnsembleSummary, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    /// Doubled projection of the initial basis state, when the run started from one.
    pub from_two_m: Option<i32>,
    pub to_two_m: i32,
    pub probability: f64,
    /// √(variance/N) of the per-realization populations.
    pub std_error: f64,
    /// √(P(1-P)/N), the error of N Bernoulli trials with the same mean.
    pub binomial_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochStats {
    /// Ensemble mean of the phase-stripped coefficients.
    pub mean: BlochTensorSet,
    /// E|g - ḡ|² per component, indexed [s-1][m+s].
    pub variance: Vec<Vec<f64>>,
    /// Σ_m E|g_{s,m} - ḡ_{s,m}|² per rank with its standard error.
    pub rank_fluctuation: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub spin: SpinValue,
    pub realizations: u64,
    pub master_seed: u64,
    pub times: Vec<f64>,
    pub population_mean: Vec<Vec<f64>>,
    pub population_variance: Vec<Vec<f64>>,
    pub population_std_error: Vec<Vec<f64>>,
    pub bloch: Vec<BlochStats>,
    pub final_populations: EnsembleSummary,
    pub transitions: Vec<TransitionEstimate>,
    pub gamma: f64,
    pub theta: f64,
    /// θ accumulated inside the simulated window.
    pub theta_window: f64,
    /// θ - θ_window: exponent lost to the finite window.
    pub tail_bound: f64,
    pub max_norm_drift: f64,
    pub max_bloch_norm_drift: f64,
    pub fastness: FastnessReport,
}

impl EnsembleResult {
    pub fn final_bloch(&self) -> &BlochStats {
        self.bloch.last().expect("at least two output times")
    }
}

struct Outcome {
    populations: Vec<Vec<f64>>,
    bloch: Vec<BlochTensorSet>,
    norm_drift: f64,
    bloch_drift: f64,
}

fn realization(cfg: &ExperimentConfig, recorder: &Recorder, index: u64) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let spacing = grid.step / 2.0;
    let mut stream = NoiseStream::new(&cfg.noise, spacing, realization_rng(cfg.master_seed, index))?;
    let mut first = true;
    let traj = propagate(cfg, &grid, recorder, || {
        if first {
            first = false;
            stream.current()
        } else {
            stream.advance()
        }
    })?;
    let bloch = traj
        .bloch
        .iter()
        .zip(&traj.times)
        .map(|(g, &t)| strip_phase(g, recorder.sweep_rate(), t))
        .collect();
    Ok(Outcome {
        populations: traj.populations,
        bloch,
        norm_drift: traj.norm_drift,
        bloch_drift: traj.bloch_norm_drift,
    })
}

/// Runs `ensemble_size` independent realizations on the current rayon pool.
/// Realization i draws its noise from stream i of the master seed, and all
/// reductions run in index order, so the result does not depend on scheduling.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let recorder = Recorder::new(cfg, &grid);
    let outcomes: Vec<Outcome> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| {
            realization(cfg, &recorder, i).map_err(|e| Error::Realization {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(cfg, recorder.times().to_vec(), &outcomes)
}

fn aggregate(cfg: &ExperimentConfig, times: Vec<f64>, outcomes: &[Outcome]) -> Result<EnsembleResult> {
    let n = outcomes.len();
    let nf = n as f64;
    let d = cfg.spin.dim();
    let two_s = cfg.spin.two_s();
    let mut population_mean = Vec::with_capacity(times.len());
    let mut population_variance = Vec::with_capacity(times.len());
    let mut population_std_error = Vec::with_capacity(times.len());
    let mut bloch = Vec::with_capacity(times.len());
    let mut column = vec![0.0; n];
    for slot in 0..times.len() {
        let mut mean = Vec::with_capacity(d);
        let mut var = Vec::with_capacity(d);
        for j in 0..d {
            for (c, o) in column.iter_mut().zip(outcomes) {
                *c = o.populations[slot][j];
            }
            let (m, v) = mean_variance(&column);
            mean.push(m);
            var.push(v);
        }
        population_std_error.push(var.iter().map(|v| (v / nf).sqrt()).collect());
        population_mean.push(mean);
        population_variance.push(var);

        let mut g_mean = BlochTensorSet::zeros(cfg.spin);
        let mut g_var = Vec::with_capacity(two_s as usize);
        let mut rank_fluct = Vec::with_capacity(two_s as usize);
        for s in 1..=two_s {
            let width = 2 * s as usize + 1;
            let mut comp_var = Vec::with_capacity(width);
            let mut dev_sum = vec![0.0; n];
            for k in 0..width {
                let m = k as i32 - s as i32;
                let re: Vec<f64> = outcomes.iter().map(|o| o.bloch[slot].get(s, m).re).collect();
                let im: Vec<f64> = outcomes.iter().map(|o| o.bloch[slot].get(s, m).im).collect();
                let (mr, vr) = mean_variance(&re);
                let (mi, vi) = mean_variance(&im);
                g_mean.set(s, m, num_complex::Complex64::new(mr, mi));
                comp_var.push(vr + vi);
                for (i, acc) in dev_sum.iter_mut().enumerate() {
                    *acc += (re[i] - mr).powi(2) + (im[i] - mi).powi(2);
                }
            }
            g_var.push(comp_var);
            let unbias = if n > 1 { nf / (nf - 1.0) } else { 0.0 };
            let (dm, dv) = mean_variance(&dev_sum);
            rank_fluct.push(Estimate {
                value: dm * unbias,
                std_error: (dv / nf).sqrt() * unbias,
            });
        }
        bloch.push(BlochStats {
            mean: g_mean,
            variance: g_var,
            rank_fluctuation: rank_fluct,
        });
    }
    let finals: Vec<Vec<f64>> = outcomes.iter().map(|o| o.populations.last().unwrap().clone()).collect();
    let final_populations = ensemble_statistics(&finals)?;
    let from_two_m = match cfg.initial_state {
        InitialState::Basis(m) => Some(m),
        InitialState::Density(_) => None,
    };
    let transitions = (0..d)
        .map(|j| {
            let p = final_populations.mean[j];
            TransitionEstimate {
                from_two_m,
                to_two_m: cfg.spin.two_m(j),
                probability: p,
                std_error: final_populations.std_error[j],
                binomial_std_error: (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / nf).sqrt(),
            }
        })
        .collect();
    let drift: Vec<f64> = outcomes.iter().map(|o| o.norm_drift).collect();
    let bdrift: Vec<f64> = outcomes.iter().map(|o| o.bloch_drift).collect();
    let theta = cfg.theta()?;
    let theta_window = cfg.theta_window();
    Ok(EnsembleResult {
        spin: cfg.spin,
        realizations: n as u64,
        master_seed: cfg.master_seed,
        times,
        population_mean,
        population_variance,
        population_std_error,
        bloch,
        final_populations,
        transitions,
        gamma: cfg.gamma(),
        theta,
        theta_window,
        tail_bound: theta - theta_window,
        max_norm_drift: drift.iter().cloned().fold(0.0, f64::max),
        max_bloch_norm_drift: bdrift.iter().cloned().fold(0.0, f64::max),
        fastness: validate_fastness(&cfg.noise, cfg.sweep_rate, cfg.b_x),
    })
}
