//! Acceptance criteria. Runs as a plain binary so every criterion prints its
//! verdict; exits non-zero if any fails. Set SPINLZ_TIGHT=1 to also run the
//! large-ensemble variant of the first criterion (about ten minutes per core).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;

use spinlz::adiabatic::{adiabatic_survival, adiabatic_survival_window, AdiabaticConfig};
use spinlz::lz::{lz_amplitudes, rotation_matrix, LzParams};
use spinlz::noise::{sample_path, theta, theta_window, AxisNoise, NoiseSpec};
use spinlz::propagator::{
    evolve_bloch, evolve_state, run_ensemble, EnsembleResult, ExperimentConfig, InitialState, MeasurementBasis,
};
use spinlz::spin::{build_spin_operators, decompose_density, DensityMatrix, SpinValue, TensorBasis};
use spinlz::theory::{
    average_bloch_vector_full, fluctuation_spin_half, fluctuation_tensor, transition_probability_matrix,
};

mod common;

use common::{c, closed_form_defect, max_abs, table_mismatch, FIVE_LEVEL, FOUR_LEVEL, THREE_LEVEL};

struct Verdict {
    pass: bool,
    detail: String,
}

fn spin(two_s: u32) -> SpinValue {
    SpinValue::new(two_s).unwrap()
}

/// |x - reference| in units of the standard error.
fn sigmas(x: f64, se: f64, reference: f64) -> f64 {
    // a zero-spread ensemble is compared at the floating-point level
    (x - reference).abs() / se.max(1e-12)
}

fn theta_window_factor(tau: f64, factor: f64) -> f64 {
    let probe = NoiseSpec::x_only(1.0, tau);
    let t = factor / tau;
    theta_window(&probe, 1.0, -t, t)
}

/// J such that θ accumulated in a window of C/(ḃτ) equals `target` (ḃ = 1).
fn amplitude_for(target: f64, tau: f64, factor: f64) -> f64 {
    (target / theta_window_factor(tau, factor)).sqrt()
}

fn final_transition(r: &EnsembleResult, to_two_m: i32) -> (f64, f64) {
    let t = r.transitions.iter().find(|t| t.to_two_m == to_two_m).unwrap();
    (t.probability, t.std_error)
}

fn noise_only_sweep(realizations: u64, check: impl Fn(f64, f64, f64) -> bool) -> Verdict {
    const TAU: f64 = 0.008;
    const FACTOR: f64 = 1.0;
    let sp = spin(2);
    let mut worst = (0.0, 0.0, 0.0);
    let mut pass = true;
    for k in 0..8 {
        let target = 3.0 * k as f64 / 7.0;
        let j = amplitude_for(target, TAU, FACTOR);
        let mut cfg = ExperimentConfig::with_window_factor(sp, 1.0, 0.0, NoiseSpec::x_only(j, TAU), FACTOR);
        cfg.ensemble_size = realizations;
        cfg.master_seed = 2024 + k;
        cfg.output_points = 2;
        let r = run_ensemble(&cfg).unwrap();
        let p = transition_probability_matrix(sp, 0.0, r.theta_window).unwrap();
        for to in sp.projections() {
            let (est, se) = final_transition(&r, to);
            let reference = p.get(2, to).unwrap();
            pass &= check(est, se, reference);
            let z = sigmas(est, se, reference);
            if z > worst.0 {
                worst = (z, (est - reference).abs(), r.theta_window);
            }
        }
    }
    Verdict {
        pass,
        detail: format!(
            "worst deviation {:.2} SE ({:.4} absolute) at theta_window = {:.3}",
            worst.0, worst.1, worst.2
        ),
    }
}

fn noise_only_sweep_loose() -> Verdict {
    noise_only_sweep(200, |est, se, reference| sigmas(est, se, reference) < 3.0)
}

fn noise_only_sweep_tight() -> Verdict {
    noise_only_sweep(2000, |est, _, reference| (est - reference).abs() < 0.03)
}

fn noiseless_multilevel() -> Verdict {
    let mut worst: f64 = 0.0;
    for two_s in 1..=4 {
        let sp = spin(two_s);
        for &gamma in &[0.25, 0.5, 1.0] {
            let u = rotation_matrix(sp, &lz_amplitudes(LzParams::new(gamma).unwrap()));
            let mut cfg = ExperimentConfig::with_window_factor(sp, 1.0, 2.0 * gamma, NoiseSpec::none(), 20.0);
            cfg.basis = MeasurementBasis::FieldAligned;
            cfg.output_points = 2;
            for j in 0..sp.dim() {
                cfg.initial_state = InitialState::Basis(sp.two_m(j));
                let r = run_ensemble(&cfg).unwrap();
                for k in 0..sp.dim() {
                    worst = worst.max((r.final_populations.mean[k] - u[(k, j)].norm_sqr()).abs());
                }
            }
        }
    }
    Verdict {
        pass: worst < 1e-3,
        detail: format!("max |P - |U|^2| = {worst:.2e}"),
    }
}

fn noise_only_decay() -> Verdict {
    const TAU: f64 = 0.05;
    const FACTOR: f64 = 2.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, &target) in [0.5, 1.0, 2.0].iter().enumerate() {
        let j = amplitude_for(target, TAU, FACTOR);
        let mut cfg = ExperimentConfig::with_window_factor(spin(1), 1.0, 0.0, NoiseSpec::x_only(j, TAU), FACTOR);
        cfg.ensemble_size = 2000;
        cfg.master_seed = 31 + k as u64;
        cfg.output_points = 2;
        let r = run_ensemble(&cfg).unwrap();
        let n = cfg.ensemble_size as f64;
        let end = r.final_bloch();
        let start = r.bloch[0].mean.get(1, 0).re;
        let ratio = end.mean.get(1, 0).re / start;
        let ratio_se = (end.variance[0][1] / n).sqrt() / start;
        let th = r.theta_window;
        let z_mean = sigmas(ratio, ratio_se, (-th).exp());
        let fluct = &end.rank_fluctuation[0];
        let expected = fluctuation_tensor(spin(1), 1, 0.0, th, 1.0).unwrap();
        let z_var = sigmas(fluct.value, fluct.std_error, expected);
        pass &= z_mean < 3.0 && z_var < 3.0;
        parts.push(format!("theta={th:.2}: mean {z_mean:.2} SE, fluctuation {z_var:.2} SE"));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn spin_half_with_field() -> Verdict {
    const TAU: f64 = 0.05;
    const FACTOR: f64 = 2.0;
    let gamma = 0.5;
    let j = amplitude_for(1.0, TAU, FACTOR);
    let mut cfg = ExperimentConfig::with_window_factor(spin(1), 1.0, 2.0 * gamma, NoiseSpec::x_only(j, TAU), FACTOR);
    cfg.basis = MeasurementBasis::FieldAligned;
    cfg.ensemble_size = 2000;
    cfg.master_seed = 41;
    cfg.output_points = 2;
    let r = run_ensemble(&cfg).unwrap();
    let th = r.theta_window;
    let (p, se) = final_transition(&r, -1);
    let expected = transition_probability_matrix(spin(1), gamma, th)
        .unwrap()
        .get(1, -1)
        .unwrap();
    let z_p = sigmas(p, se, expected);
    let zero = Complex64::new(0.0, 0.0);
    let expected_fluct = fluctuation_spin_half([zero, Complex64::new(1.0, 0.0), zero], gamma, th).unwrap();
    let fluct = &r.final_bloch().rank_fluctuation[0];
    let z_var = sigmas(fluct.value, fluct.std_error, expected_fluct);
    Verdict {
        pass: z_p < 3.0 && z_var < 3.0,
        detail: format!(
            "theta={th:.3}: P = {p:.4} vs {expected:.4} ({z_p:.2} SE); fluctuation {:.4} vs {expected_fluct:.4} ({z_var:.2} SE)",
            fluct.value
        ),
    }
}

fn exact_structure() -> Verdict {
    let mut failures = Vec::new();
    for (two_s, rows) in [(2, THREE_LEVEL), (3, FOUR_LEVEL), (4, FIVE_LEVEL)] {
        if let Some(m) = table_mismatch(two_s, rows) {
            failures.push(format!("table 2S={two_s}: {m}"));
        }
    }
    let mut worst: f64 = 0.0;
    for two_s in 1..=8 {
        let sp = spin(two_s);
        let d = sp.dim();
        for i in 0..20 {
            let gamma = 2.0 * i as f64 / 19.0;
            let u = rotation_matrix(sp, &lz_amplitudes(LzParams::new(gamma).unwrap()));
            for k in 0..20 {
                let th = 5.0 * k as f64 / 19.0;
                let p = transition_probability_matrix(sp, gamma, th).unwrap();
                for s in p.column_sums() {
                    worst = worst.max((s - 1.0).abs());
                }
                worst = worst.max(p.symmetry_defect());
                if k == 0 {
                    for a in 0..d {
                        for b in 0..d {
                            worst = worst.max((p.probabilities[(a, b)] - u[(a, b)].norm_sqr()).abs());
                        }
                    }
                }
            }
            let far = transition_probability_matrix(sp, gamma, 60.0).unwrap();
            worst = worst.max(
                far.probabilities
                    .iter()
                    .map(|x| (x - 1.0 / d as f64).abs())
                    .fold(0.0, f64::max),
            );
        }
    }
    if worst >= 1e-12 {
        failures.push(format!("identity defect {worst:.1e}"));
    }
    Verdict {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("tables exact, identity defect {worst:.1e}")
        } else {
            failures.join("; ")
        },
    }
}

fn conservation() -> Verdict {
    let spec = NoiseSpec {
        x: Some(AxisNoise {
            amplitude: 0.5,
            tau: 0.05,
        }),
        y: Some(AxisNoise {
            amplitude: 0.3,
            tau: 0.05,
        }),
        z: Some(AxisNoise {
            amplitude: 0.4,
            tau: 0.03,
        }),
        cross_xy: 0.0,
    };
    let (mut drift, mut mismatch): (f64, f64) = (0.0, 0.0);
    for two_s in 1..=4 {
        let sp = spin(two_s);
        let cfg = ExperimentConfig::new(sp, 1.0, 0.8, spec.clone());
        let path = sample_path(&spec, &cfg.grid().unwrap(), 5).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); sp.dim()];
        psi[0] = Complex64::new(1.0, 0.0);
        let a = evolve_state(&cfg, &path, &psi).unwrap();
        let g0 = decompose_density(&DensityMatrix::basis_state(sp, two_s as i32).unwrap());
        let b = evolve_bloch(&cfg, &path, &g0).unwrap();
        drift = drift.max(a.norm_drift).max(a.bloch_norm_drift).max(b.bloch_norm_drift);
        for (x, y) in a.bloch.iter().zip(&b.bloch) {
            for s in 1..=two_s {
                for m in -(s as i32)..=s as i32 {
                    mismatch = mismatch.max((x.get(s, m) - y.get(s, m)).norm());
                }
            }
        }
    }
    Verdict {
        pass: drift < 1e-8 && mismatch < 1e-8,
        detail: format!("max drift {drift:.1e}, representation mismatch {mismatch:.1e}"),
    }
}

fn tensor_suite() -> Verdict {
    let closed = closed_form_defect(6);
    let spot = closed_form_defect(12);
    let (mut worst, mut spot_worst): (f64, f64) = (0.0, 0.0);
    for two_s in 1..=12 {
        let mut worst_here: f64 = 0.0;
        let sp = spin(two_s);
        let basis = TensorBasis::new(sp);
        let d = sp.dim();
        let sz = build_spin_operators(sp).sz;
        let ops: Vec<_> = (1..=two_s)
            .flat_map(|s| (-(s as i32)..=s as i32).map(move |m| (s, m)))
            .map(|(s, m)| (s, m, basis.operator(s, m).to_dense(d)))
            .collect();
        for (i, (s, m, t)) in ops.iter().enumerate() {
            let scale = basis.norm(*s);
            let norm = (t.adjoint() * t).trace().re;
            worst_here = worst_here.max((norm - scale).abs() / scale);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let partner = &ops.iter().find(|(s2, m2, _)| s2 == s && *m2 == -m).unwrap().2;
            worst_here = worst_here.max(max_abs(&(t.adjoint() - partner * c(sign))) / scale.sqrt());
            worst_here = worst_here.max(max_abs(&(&sz * t - t * &sz - t * c(*m as f64))) / scale.sqrt());
            for (s2, _, u) in &ops[i + 1..] {
                let overlap = (t.adjoint() * u).trace().norm();
                worst_here = worst_here.max(overlap / (scale * basis.norm(*s2)).sqrt());
            }
        }
        if two_s <= 6 {
            worst = worst.max(worst_here);
        }
        spot_worst = spot_worst.max(worst_here);
    }
    Verdict {
        pass: closed < 1e-12 && worst < 1e-12 && spot < 1e-11 && spot_worst < 1e-11,
        detail: format!(
            "S<=3: closed forms {closed:.1e}, orthogonality/adjoint/norm {worst:.1e}; \
             S<=6: {spot:.1e}, {spot_worst:.1e}"
        ),
    }
}

fn adiabatic() -> Verdict {
    let tau = 0.01;
    let spec = NoiseSpec::x_only(0.4, tau);
    let th = theta(&spec, 1.0).unwrap();
    let fast = adiabatic_survival(&AdiabaticConfig::new(1e-3 / tau, 1.0, spec.clone())).unwrap();
    let slow = adiabatic_survival(&AdiabaticConfig::new(30.0 / tau, 1.0, spec)).unwrap();
    let fast_dev = (fast / (-th).exp() - 1.0).abs();

    let b_x = 20f64.sqrt();
    let spec = NoiseSpec::x_only(0.5, 1.0 / b_x);
    let mut cfg = ExperimentConfig::with_window_factor(spin(1), 1.0, b_x, spec.clone(), 10.0);
    cfg.basis = MeasurementBasis::FieldAligned;
    cfg.ensemble_size = 2000;
    cfg.master_seed = 81;
    cfg.output_points = 2;
    let r = run_ensemble(&cfg).unwrap();
    // adiabatic following ends in the opposite diabatic state
    let (p, se) = final_transition(&r, -1);
    let survival = 2.0 * p - 1.0;
    let expected = adiabatic_survival_window(&AdiabaticConfig::new(b_x, 1.0, spec), cfg.t_start, cfg.t_end).unwrap();
    let z = sigmas(survival, 2.0 * se, expected);
    Verdict {
        pass: fast_dev < 0.01 && slow > 0.99 && z < 3.0,
        detail: format!(
            "b_x tau=1e-3: {:.2}% off e^-theta; b_x tau=30: {slow:.5}; midpoint MC {survival:.4} vs {expected:.4} ({z:.2} SE)",
            100.0 * fast_dev
        ),
    }
}

fn spin_half_pipeline() -> Verdict {
    let mut worst: f64 = 0.0;
    let zero = Complex64::new(0.0, 0.0);
    for i in 0..25 {
        for k in 0..25 {
            let gamma = 1.5 * i as f64 / 24.0;
            let th = 4.0 * k as f64 / 24.0;
            let closed = 0.5 * (1.0 - (-th).exp() * (2.0 * (-2.0 * PI * gamma * gamma).exp() - 1.0));
            let p = transition_probability_matrix(spin(1), gamma, th).unwrap();
            worst = worst.max((p.get(1, -1).unwrap() - closed).abs());
            let g = average_bloch_vector_full([zero, Complex64::new(1.0, 0.0), zero], gamma, th).unwrap();
            worst = worst.max((0.5 * (1.0 - g[1].re) - closed).abs()).max(g[1].im.abs());
        }
    }
    Verdict {
        pass: worst < 1e-14,
        detail: format!("max deviation {worst:.1e}"),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let tight = std::env::var("SPINLZ_TIGHT").is_ok_and(|v| v == "1");
    let mut criteria: Vec<Criterion> = vec![
        ("1 noise-only spin-1 sweep", noise_only_sweep_loose),
        ("2 noiseless multilevel crossing", noiseless_multilevel),
        ("3 noise-only spin-1/2 decay", noise_only_decay),
        ("4 spin-1/2 with transverse field", spin_half_with_field),
        ("5 exact structure", exact_structure),
        ("6 conservation and equivalence", conservation),
        ("7 tensor operators", tensor_suite),
        ("8 adiabatic crossing", adiabatic),
        ("9 spin-1/2 pipeline", spin_half_pipeline),
    ];
    if tight {
        criteria.insert(1, ("1b noise-only spin-1 sweep, N = 2000", noise_only_sweep_tight));
    }
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {status} ({}) [{:.1} s]",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
