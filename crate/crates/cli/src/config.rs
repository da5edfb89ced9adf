//! Flat experiment files:
//!
//! ```toml
//! spin = 1
//! sweep_rate = 1.0
//! b_x = 0.0
//! realizations = 200
//! seed = 7
//!
//! [noise.x]
//! amplitude = 0.4
//! tau = 0.008
//! ```
//!
//! Every diagnostic names the offending key and its line.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use spinlz::noise::{AxisNoise, NoiseSpec};
use spinlz::propagator::{
    auto_step, window_half_width, ExperimentConfig, InitialState, Integrator, MeasurementBasis, Representation,
    DEFAULT_WINDOW_FACTOR,
};
use spinlz::spin::SpinValue;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (Some(k), None) => write!(f, "key `{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// TOML integers and floats both count as numbers.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    fn value(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(x) => x,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    amplitude: Spanned<Number>,
    tau: Spanned<Number>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    x: Option<RawAxis>,
    y: Option<RawAxis>,
    z: Option<RawAxis>,
    cross_xy: Option<Spanned<Number>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    spin: Spanned<Number>,
    sweep_rate: Option<Spanned<Number>>,
    b_x: Option<Spanned<Number>>,
    window_factor: Option<Spanned<Number>>,
    t_start: Option<Spanned<Number>>,
    t_end: Option<Spanned<Number>>,
    step: Option<Spanned<Number>>,
    realizations: Option<Spanned<u64>>,
    seed: Option<Spanned<u64>>,
    /// Initial diabatic projection m; defaults to S.
    initial_m: Option<Spanned<Number>>,
    representation: Option<Spanned<Representation>>,
    basis: Option<Spanned<MeasurementBasis>>,
    integrator: Option<Spanned<Integrator>>,
    output_points: Option<Spanned<usize>>,
    #[serde(default)]
    noise: RawNoise,
}

/// The configuration after defaults and derived quantities are filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub spin: f64,
    pub sweep_rate: f64,
    pub b_x: f64,
    pub window_factor: Option<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
    pub step_derived: bool,
    pub realizations: u64,
    pub seed: u64,
    pub initial_m: f64,
    pub representation: Representation,
    pub basis: MeasurementBasis,
    pub integrator: Integrator,
    pub output_points: usize,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub experiment: ExperimentConfig,
    pub resolved: ResolvedConfig,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Reader<'a> {
    text: &'a str,
}

impl Reader<'_> {
    fn error(&self, key: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: Some(key.to_string()),
            line: span.map(|s| line_of(self.text, s)),
            message: message.into(),
        }
    }

    fn number(
        &self,
        key: &str,
        v: &Spanned<Number>,
        check: impl Fn(f64) -> bool,
        want: &str,
    ) -> Result<f64, ConfigError> {
        let x = v.get_ref().value();
        if x.is_finite() && check(x) {
            Ok(x)
        } else {
            Err(self.error(key, Some(v.span()), format!("must be {want}, got {x}")))
        }
    }

    fn optional(
        &self,
        key: &str,
        v: &Option<Spanned<Number>>,
        check: impl Fn(f64) -> bool,
        want: &str,
    ) -> Result<Option<f64>, ConfigError> {
        v.as_ref().map(|v| self.number(key, v, check, want)).transpose()
    }

    fn axis(&self, name: &str, raw: &Option<RawAxis>) -> Result<Option<AxisNoise>, ConfigError> {
        let Some(raw) = raw else { return Ok(None) };
        let amplitude = self.number(
            &format!("noise.{name}.amplitude"),
            &raw.amplitude,
            |x| x >= 0.0,
            "non-negative",
        )?;
        let tau = self.number(&format!("noise.{name}.tau"), &raw.tau, |x| x > 0.0, "positive")?;
        Ok(Some(AxisNoise { amplitude, tau }))
    }
}

pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        key: None,
        line: e.span().map(|s| line_of(text, s)),
        message: e.message().trim().to_string(),
    })?;
    let r = Reader { text };

    let spin_value = raw.spin.get_ref().value();
    let spin = SpinValue::from_f64(spin_value).map_err(|_| {
        r.error(
            "spin",
            Some(raw.spin.span()),
            format!("spin must be a positive half-integer, got {spin_value}"),
        )
    })?;
    let sweep_rate = r
        .optional("sweep_rate", &raw.sweep_rate, |x| x > 0.0, "positive")?
        .unwrap_or(1.0);
    let b_x = r.optional("b_x", &raw.b_x, |_| true, "finite")?.unwrap_or(0.0);

    let cross_xy = r.optional("noise.cross_xy", &raw.noise.cross_xy, |x| x.abs() <= 1.0, "in [-1, 1]")?;
    let noise = NoiseSpec {
        x: r.axis("x", &raw.noise.x)?,
        y: r.axis("y", &raw.noise.y)?,
        z: r.axis("z", &raw.noise.z)?,
        cross_xy: cross_xy.unwrap_or(0.0),
    };
    if let Err(e) = noise.validate() {
        let span = raw.noise.cross_xy.as_ref().map(|c| c.span());
        return Err(r.error("noise", span, e.to_string()));
    }

    let window_factor = r.optional("window_factor", &raw.window_factor, |x| x > 0.0, "positive")?;
    let factor = window_factor.unwrap_or(DEFAULT_WINDOW_FACTOR);
    let half = window_half_width(sweep_rate, b_x, &noise, factor);
    let t_start = r
        .optional("t_start", &raw.t_start, |x| x < 0.0, "negative")?
        .unwrap_or(-half);
    let t_end = r
        .optional("t_end", &raw.t_end, |x| x > 0.0, "positive")?
        .unwrap_or(half);
    let derived_step = auto_step(sweep_rate, b_x, &noise, t_start.abs().max(t_end));
    let step = r.optional("step", &raw.step, |x| x > 0.0, "positive")?;

    let initial_m = match &raw.initial_m {
        Some(v) => {
            let m = v.get_ref().value();
            let two_m = 2.0 * m;
            if (two_m - two_m.round()).abs() > 1e-12 || spin.index(two_m.round() as i32).is_err() {
                return Err(r.error(
                    "initial_m",
                    Some(v.span()),
                    format!("{m} is not a projection of spin {spin}"),
                ));
            }
            m
        }
        None => spin.s(),
    };

    let mut experiment = ExperimentConfig::new(spin, sweep_rate, b_x, noise.clone());
    experiment.t_start = t_start;
    experiment.t_end = t_end;
    experiment.step = step.unwrap_or(derived_step);
    experiment.initial_state = InitialState::Basis((2.0 * initial_m).round() as i32);
    if let Some(n) = &raw.realizations {
        if *n.get_ref() == 0 {
            return Err(r.error("realizations", Some(n.span()), "must be at least 1"));
        }
        experiment.ensemble_size = *n.get_ref();
    }
    experiment.master_seed = raw.seed.as_ref().map_or(0, |s| *s.get_ref());
    if let Some(v) = &raw.representation {
        experiment.representation = *v.get_ref();
    }
    if let Some(v) = &raw.basis {
        experiment.basis = *v.get_ref();
    }
    if let Some(v) = &raw.integrator {
        experiment.integrator = *v.get_ref();
    }
    if let Some(v) = &raw.output_points {
        if *v.get_ref() < 2 {
            return Err(r.error("output_points", Some(v.span()), "must be at least 2"));
        }
        experiment.output_points = *v.get_ref();
    }
    if let Err(e) = experiment.validate() {
        // the remaining checks concern the step against the field and noise scales
        let span = raw.step.as_ref().map(|s| s.span());
        return Err(r.error("step", span, e.to_string()));
    }

    let resolved = ResolvedConfig {
        spin: spin.s(),
        sweep_rate,
        b_x,
        window_factor: if raw.t_start.is_some() && raw.t_end.is_some() {
            None
        } else {
            Some(factor)
        },
        t_start,
        t_end,
        step: experiment.step,
        step_derived: step.is_none(),
        realizations: experiment.ensemble_size,
        seed: experiment.master_seed,
        initial_m,
        representation: experiment.representation,
        basis: experiment.basis,
        integrator: experiment.integrator,
        output_points: experiment.output_points,
        noise,
    };
    Ok(ParsedConfig { experiment, resolved })
}
