use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

use spinlz::adiabatic::{adiabatic_survival, AdiabaticConfig};
use spinlz::noise::{theta, theta_window, NoiseSpec};
use spinlz::propagator::{run_ensemble, ExperimentConfig, InitialState};
use spinlz::spin::{SpinValue, TensorBasis};
use spinlz::tables::{decoherence_table, format_projection, format_rational, render_table, MAX_TABLE_TWO_S};
use spinlz::theory::{fluctuation_tensor, initial_coefficients, transition_probability_matrix};

use crate::config::parse_config;
use crate::output::{document, io_error, num, Artifacts, Csv, Manifest};
use crate::CliError;

pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn spin_arg(s: f64) -> Result<SpinValue, CliError> {
    SpinValue::from_f64(s).map_err(|e| CliError::Config(format!("--spin: {e}")))
}

fn label(two_m: i32) -> String {
    format_projection(two_m)
}

fn read_config(opts: &Options) -> Result<Option<(String, String)>, CliError> {
    let Some(path) = &opts.config else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(Some((path.display().to_string(), text)))
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Numeric(e.to_string()))
}

pub fn analytic(opts: &Options, spin: f64, gamma: f64, th: f64) -> Result<(), CliError> {
    let start = Instant::now();
    let sp = spin_arg(spin)?;
    let p = transition_probability_matrix(sp, gamma, th)?;
    let mut csv = Csv::new(&["from_m", "to_m", "probability"]);
    for from in sp.projections() {
        for to in sp.projections() {
            csv.row([label(from), label(to), num(p.get(from, to)?)]);
        }
    }
    let mut out = Artifacts::new(opts.out.clone());
    let mut names = vec!["analytic.csv"];
    let table = (gamma == 0.0 && sp.two_s() <= MAX_TABLE_TWO_S)
        .then(|| decoherence_table(sp))
        .transpose()?;
    if table.is_some() {
        names.push("table.txt");
    }
    let mut manifest = Manifest::new(
        "analytic",
        None,
        json!({ "spin": sp.s(), "gamma": gamma, "theta": th }),
        None,
    );
    out.plan(&mut manifest, &names);
    out.add("analytic.csv", csv.render());
    if let Some(t) = table {
        out.add("table.txt", render_table(&t));
    }
    out.finish(&manifest, start.elapsed().as_secs_f64())
}

pub fn tables(opts: &Options, spin: Option<f64>) -> Result<(), CliError> {
    let start = Instant::now();
    let spins = match spin {
        Some(s) => vec![spin_arg(s)?],
        None => (1..=MAX_TABLE_TWO_S).map(SpinValue::new).collect::<Result<_, _>>()?,
    };
    let widest = spins.iter().map(|s| s.two_s()).max().unwrap_or(1);
    let mut header = vec!["spin".to_string(), "from_m".into(), "to_m".into(), "constant".into()];
    header.extend((1..=widest).map(|s| format!("E{s}")));
    let mut csv = Csv::new(&header);
    let mut text = String::new();
    for sp in &spins {
        let t = decoherence_table(*sp)?;
        text.push_str(&format!("S = {sp}\n{}\n", render_table(&t)));
        for e in &t.entries {
            let mut row = vec![
                sp.to_string(),
                label(e.from_two_m),
                label(e.to_two_m),
                format_rational(e.constant),
            ];
            row.extend(e.coefficients.iter().map(|c| format_rational(*c)));
            row.resize(header.len(), String::new());
            csv.row(row);
        }
    }
    let mut out = Artifacts::new(opts.out.clone());
    let spin_values: Vec<f64> = spins.iter().map(|s| s.s()).collect();
    let mut manifest = Manifest::new("tables", None, json!({ "spins": spin_values }), None);
    if opts.out.is_some() {
        out.plan(&mut manifest, &["tables.txt", "tables.csv"]);
        out.add("tables.txt", text);
        out.add("tables.csv", csv.render());
    } else {
        out.add("tables.txt", text);
    }
    out.finish(&manifest, start.elapsed().as_secs_f64())
}

/// Analytic columns for a run from a diabatic basis state.
fn analytic_reference(cfg: &ExperimentConfig, theta_used: f64) -> Result<Value, CliError> {
    let InitialState::Basis(from) = cfg.initial_state else {
        return Ok(Value::Null);
    };
    let sp = cfg.spin;
    let gamma = cfg.gamma();
    let windowed = transition_probability_matrix(sp, gamma, theta_used)?;
    let full = transition_probability_matrix(sp, gamma, cfg.theta()?)?;
    let transitions = sp
        .projections()
        .map(|to| {
            Ok(json!({
                "to_m": label(to),
                "probability": windowed.get(from, to)?,
                "probability_infinite_window": full.get(from, to)?,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let g = initial_coefficients(&TensorBasis::new(sp))?;
    let j = sp.index(from)?;
    let fluctuations = (1..=sp.two_s())
        .map(|s| fluctuation_tensor(sp, s, gamma, theta_used, g[(s as usize - 1, j)]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "from_m": label(from),
        "gamma": gamma,
        "theta_used": theta_used,
        "transitions": transitions,
        "rank_fluctuation": fluctuations,
    }))
}

pub fn simulate(opts: &Options) -> Result<(), CliError> {
    let start = Instant::now();
    let (path, text) = read_config(opts)?.ok_or_else(|| CliError::Config("simulate needs --config".into()))?;
    let mut parsed = parse_config(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    if let Some(seed) = opts.seed {
        parsed.experiment.master_seed = seed;
        parsed.resolved.seed = seed;
    }
    let cfg = &parsed.experiment;
    let r = run_ensemble(cfg)?;
    for w in &r.fastness.warnings {
        eprintln!("warning: {w}");
    }

    let labels: Vec<String> = cfg.spin.projections().map(label).collect();
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    header.extend(labels.iter().map(|l| format!("se_{l}")));
    let mut csv = Csv::new(&header);
    for (k, t) in r.times.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(r.population_mean[k].iter().map(|x| num(*x)));
        row.extend(r.population_std_error[k].iter().map(|x| num(*x)));
        csv.row(row);
    }

    let end = r.final_bloch();
    let results = json!({
        "realizations": r.realizations,
        "gamma": r.gamma,
        "theta": r.theta,
        "theta_window": r.theta_window,
        "tail_bound": r.tail_bound,
        "final_populations": to_value(&r.final_populations)?,
        "transitions": to_value(&r.transitions)?,
        "rank_fluctuation": to_value(&end.rank_fluctuation)?,
        "max_norm_drift": r.max_norm_drift,
        "max_bloch_norm_drift": r.max_bloch_norm_drift,
        "fastness": to_value(&r.fastness)?,
    });
    let analytic = analytic_reference(cfg, r.theta_window)?;

    let mut out = Artifacts::new(Some(opts.out.clone().unwrap_or_else(|| PathBuf::from("spinlz-output"))));
    let mut manifest = Manifest::new(
        "simulate",
        Some(cfg.master_seed),
        to_value(&parsed.resolved)?,
        Some(text),
    );
    out.plan(&mut manifest, &["timeseries.csv", "finals.json"]);
    out.add("timeseries.csv", csv.render());
    out.add("finals.json", document(&manifest, results, analytic)?);
    out.finish(&manifest, start.elapsed().as_secs_f64())
}

const SWEEP_TAU: f64 = 0.008;
const SWEEP_WINDOW_FACTOR: f64 = 1.0;
const SWEEP_POINTS: usize = 8;
const SWEEP_THETA_MAX: f64 = 3.0;
const SWEEP_SEED: u64 = 2024;

pub fn reproduce_sweep(opts: &Options, realizations: u64) -> Result<(), CliError> {
    let start = Instant::now();
    if realizations == 0 {
        return Err(CliError::Config("--realizations must be at least 1".into()));
    }
    let sp = SpinValue::new(2)?;
    let seed = opts.seed.unwrap_or(SWEEP_SEED);
    let half = SWEEP_WINDOW_FACTOR / SWEEP_TAU;
    let unit = theta_window(&NoiseSpec::x_only(1.0, SWEEP_TAU), 1.0, -half, half);
    let labels: Vec<String> = sp.projections().map(label).collect();
    let mut header = vec![
        "J".to_string(),
        "theta".into(),
        "theta_window".into(),
        "tail_bound".into(),
    ];
    for l in &labels {
        header.extend([format!("p_mc_{l}"), format!("se_{l}"), format!("p_theory_{l}")]);
    }
    let mut csv = Csv::new(&header);
    let mut results = Vec::new();
    let mut reference = Vec::new();
    for k in 0..SWEEP_POINTS {
        // J chosen so that θ inside the window is evenly spaced
        let target = SWEEP_THETA_MAX * k as f64 / (SWEEP_POINTS - 1) as f64;
        let j = (target / unit).sqrt();
        let mut cfg =
            ExperimentConfig::with_window_factor(sp, 1.0, 0.0, NoiseSpec::x_only(j, SWEEP_TAU), SWEEP_WINDOW_FACTOR);
        cfg.ensemble_size = realizations;
        cfg.master_seed = seed + k as u64;
        cfg.output_points = 2;
        let r = run_ensemble(&cfg)?;
        let p = transition_probability_matrix(sp, 0.0, r.theta_window)?;
        let mut row = vec![num(j), num(r.theta), num(r.theta_window), num(r.tail_bound)];
        let mut theory = Vec::new();
        for (to, t) in sp.projections().zip(&r.transitions) {
            let expected = p.get(sp.two_s() as i32, to)?;
            row.extend([num(t.probability), num(t.std_error), num(expected)]);
            theory.push(json!({ "to_m": label(to), "probability": expected }));
        }
        csv.row(row);
        results.push(json!({
            "amplitude": j,
            "master_seed": cfg.master_seed,
            "theta": r.theta,
            "theta_window": r.theta_window,
            "transitions": to_value(&r.transitions)?,
        }));
        reference.push(json!({ "amplitude": j, "theta_used": r.theta_window, "transitions": theory }));
    }
    let mut curve = Csv::new(&["theta", "p_1", "p_0", "p_-1"]);
    for k in 0..=60 {
        let th = SWEEP_THETA_MAX * k as f64 / 60.0;
        let p = transition_probability_matrix(sp, 0.0, th)?;
        curve.row([num(th), num(p.get(2, 2)?), num(p.get(2, 0)?), num(p.get(2, -2)?)]);
    }

    let config = json!({
        "spin": 1.0,
        "sweep_rate": 1.0,
        "b_x": 0.0,
        "tau": SWEEP_TAU,
        "window_factor": SWEEP_WINDOW_FACTOR,
        "realizations": realizations,
        "points": SWEEP_POINTS,
        "theta_window_max": SWEEP_THETA_MAX,
    });
    let mut out = Artifacts::new(Some(opts.out.clone().unwrap_or_else(|| PathBuf::from("spinlz-output"))));
    let mut manifest = Manifest::new("reproduce-fig1", Some(seed), config, None);
    out.plan(&mut manifest, &["fig1.csv", "fig1_theory.csv", "fig1.json"]);
    out.add("fig1.csv", csv.render());
    out.add("fig1_theory.csv", curve.render());
    out.add(
        "fig1.json",
        document(&manifest, Value::Array(results), Value::Array(reference))?,
    );
    out.finish(&manifest, start.elapsed().as_secs_f64())
}

pub fn adiabatic(opts: &Options, tau: f64, amplitude: f64, sweep_rate: f64, points: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let (spec, sweep_rate, text) = match read_config(opts)? {
        Some((path, text)) => {
            let p = parse_config(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
            (p.resolved.noise, p.resolved.sweep_rate, Some(text))
        }
        None => {
            if !(tau > 0.0 && amplitude >= 0.0 && sweep_rate > 0.0) {
                return Err(CliError::Config(
                    "--tau and --sweep-rate must be positive, --amplitude non-negative".into(),
                ));
            }
            (NoiseSpec::x_only(amplitude, tau), sweep_rate, None)
        }
    };
    if points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let tau_ref = spec
        .tau_max()
        .ok_or_else(|| CliError::Config("the adiabatic sweep needs at least one noise component".into()))?;
    let limit = (-theta(&spec, sweep_rate)?).exp();
    let (lo, hi) = (1e-3f64.ln(), 30f64.ln());
    let mut csv = Csv::new(&["b_x_tau", "b_x", "adiabaticity", "survival", "fast_noise_limit"]);
    for k in 0..points {
        let b_x_tau = match k {
            0 => 1e-3,
            _ if k == points - 1 => 30.0,
            _ => (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp(),
        };
        let cfg = AdiabaticConfig::new(b_x_tau / tau_ref, sweep_rate, spec.clone());
        let s = adiabatic_survival(&cfg)?;
        csv.row([
            num(b_x_tau),
            num(cfg.b_x),
            num(cfg.diagnostics().adiabaticity),
            num(s),
            num(limit),
        ]);
    }
    let config =
        json!({ "noise": to_value(&spec)?, "sweep_rate": sweep_rate, "points": points, "b_x_tau_range": [1e-3, 30.0] });
    let mut out = Artifacts::new(opts.out.clone());
    let mut manifest = Manifest::new("adiabatic", None, config, text);
    out.plan(&mut manifest, &["adiabatic.csv"]);
    out.add("adiabatic.csv", csv.render());
    out.finish(&manifest, start.elapsed().as_secs_f64())
}
