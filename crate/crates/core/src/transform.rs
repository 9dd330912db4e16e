//! Built-in direct transforms that derive new manifold channels from
//! existing ones without fitted parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::UniformSeries;

/// A parameter-free, causal transform of one input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    /// Left rectangle rule: `out[0] = 0`, `out[n] = out[n-1] + in[n-1] dt`.
    Integrate,
    /// Backward difference: `out[0] = 0`, `out[n] = (in[n] - in[n-1]) / dt`.
    Differentiate,
    /// Trailing mean over the last `window` samples (fewer at the start).
    MovingAverage { window: usize },
    /// `cos(k a), sin(k a)` for `k = 1..=k_max`; `2 k_max` output channels.
    Harmonics { k_max: usize },
    /// `out[n] = in[n - lag]`, holding `in[0]` for the first `lag` steps.
    LagShift { lag: usize },
    /// `out = sum_p coefficients[p] in^p`.
    Polynomial { coefficients: Vec<f64> },
}

impl Transform {
    /// Builds a transform from an id and a JSON parameter object.
    pub fn from_id(id: &str, params: &serde_json::Value) -> Result<Self> {
        const KNOWN: [&str; 6] = [
            "integrate",
            "differentiate",
            "moving_average",
            "harmonics",
            "lag_shift",
            "polynomial",
        ];
        if !KNOWN.contains(&id) {
            return Err(Error::UnknownTransform(id.to_string()));
        }
        let mut obj = match params {
            serde_json::Value::Null => serde_json::Map::new(),
            serde_json::Value::Object(m) => m.clone(),
            other => {
                return Err(Error::Invalid(format!(
                    "transform parameters must be an object, got {other}"
                )))
            }
        };
        obj.insert("id".into(), serde_json::Value::String(id.into()));
        Ok(serde_json::from_value(serde_json::Value::Object(obj))?)
    }

    pub fn id(&self) -> &'static str {
        match self {
            Transform::Integrate => "integrate",
            Transform::Differentiate => "differentiate",
            Transform::MovingAverage { .. } => "moving_average",
            Transform::Harmonics { .. } => "harmonics",
            Transform::LagShift { .. } => "lag_shift",
            Transform::Polynomial { .. } => "polynomial",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Transform::MovingAverage { window: 0 } => {
                Err(Error::Invalid("moving average window must be at least 1".into()))
            }
            Transform::Harmonics { k_max: 0 } => {
                Err(Error::Invalid("harmonics need k_max >= 1".into()))
            }
            Transform::Polynomial { coefficients } if coefficients.is_empty() => {
                Err(Error::Invalid("polynomial needs at least one coefficient".into()))
            }
            Transform::Polynomial { coefficients } if coefficients.iter().any(|c| !c.is_finite()) => {
                Err(Error::NonFinite("polynomial coefficients".into()))
            }
            _ => Ok(()),
        }
    }

    /// Names of the channels produced for a stage called `name`.
    pub fn output_names(&self, name: &str) -> Vec<String> {
        match self {
            Transform::Harmonics { k_max } => (1..=*k_max)
                .flat_map(|k| [format!("{name}_cos{k}"), format!("{name}_sin{k}")])
                .collect(),
            _ => vec![name.to_string()],
        }
    }

    /// Applies the transform to `values` sampled at `dt`.
    pub fn apply_values(&self, values: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let n = values.len();
        let out = match self {
            Transform::Integrate => {
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(n);
                for v in values {
                    out.push(acc);
                    acc += v * dt;
                }
                vec![out]
            }
            Transform::Differentiate => {
                let mut out = vec![0.0; n];
                for t in 1..n {
                    out[t] = (values[t] - values[t - 1]) / dt;
                }
                vec![out]
            }
            Transform::MovingAverage { window } => {
                if *window > n {
                    return Err(Error::WindowTooLong { window: *window, len: n });
                }
                let mut out = Vec::with_capacity(n);
                let mut sum = 0.0;
                for t in 0..n {
                    sum += values[t];
                    if t >= *window {
                        sum -= values[t - window];
                    }
                    out.push(sum / (t + 1).min(*window) as f64);
                }
                vec![out]
            }
            Transform::Harmonics { k_max } => (1..=*k_max)
                .flat_map(|k| {
                    let k = k as f64;
                    [
                        values.iter().map(|a| (k * a).cos()).collect(),
                        values.iter().map(|a| (k * a).sin()).collect(),
                    ]
                })
                .collect(),
            Transform::LagShift { lag } => {
                vec![(0..n).map(|t| values[t.saturating_sub(*lag)]).collect()]
            }
            Transform::Polynomial { coefficients } => vec![values
                .iter()
                .map(|v| coefficients.iter().rev().fold(0.0, |acc, c| acc * v + c))
                .collect()],
        };
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("transform '{}' overflowed", self.id())));
        }
        Ok(out)
    }
}

/// Applies `transform` to the single channel of `input`, naming the
/// outputs after `name`.
pub fn builtin_transform(transform: &Transform, name: &str, input: &UniformSeries) -> Result<UniformSeries> {
    if input.n_channels() != 1 {
        return Err(Error::Invalid(format!(
            "transform '{}' takes one channel, got {}",
            transform.id(),
            input.n_channels()
        )));
    }
    let cols = transform.apply_values(input.column(0), input.dt())?;
    UniformSeries::new(input.dt(), input.t0(), transform.output_names(name), cols)
}
