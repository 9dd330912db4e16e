//! Uniformly sampled time series, lag structures and design-matrix assembly.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing time steps of two series.
const DT_RTOL: f64 = 1e-12;

pub(crate) fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= DT_RTOL * a.abs().max(b.abs())
}

/// A multi-channel time series on the axis `t0, t0 + dt, ..., t0 + (N-1) dt`.
///
/// Values are stored per channel. Time stamps are never stored; they are
/// derived from `t0` and `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    dt: f64,
    t0: f64,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl UniformSeries {
    pub fn new(dt: f64, t0: f64, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invalid(format!("dt must be positive and finite, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::Invalid("t0 must be finite".into()));
        }
        if names.is_empty() || names.len() != columns.len() {
            return Err(Error::Invalid(format!(
                "{} channel names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::Invalid("series must have at least one step".into()));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("channel '{name}'")));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Invalid(format!("duplicate channel name '{name}'")));
            }
        }
        Ok(Self {
            dt,
            t0,
            names,
            columns,
        })
    }

    /// A single-channel series starting at `t = 0`.
    pub fn single(dt: f64, name: &str, values: Vec<f64>) -> Result<Self> {
        Self::new(dt, 0.0, vec![name.to_string()], vec![values])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_channels(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.channel(name)
            .ok_or_else(|| Error::ChannelMissing(name.to_string()))
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// True when both series share `dt`, `t0` and length.
    pub fn same_axis(&self, other: &UniformSeries) -> bool {
        same_dt(self.dt, other.dt)
            && (self.t0 - other.t0).abs() <= DT_RTOL * self.dt
            && self.len() == other.len()
    }

    pub(crate) fn check_axis(&self, other: &UniformSeries) -> Result<()> {
        if !same_dt(self.dt, other.dt) {
            return Err(Error::DtMismatch {
                expected: self.dt,
                found: other.dt,
            });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if (self.t0 - other.t0).abs() > DT_RTOL * self.dt {
            return Err(Error::Invalid(format!(
                "time axes start at {} and {}",
                self.t0, other.t0
            )));
        }
        Ok(())
    }

    /// Appends a channel. Fails on a duplicate name, wrong length or
    /// non-finite values.
    pub fn push_channel(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if self.has_channel(name) {
            return Err(Error::Invalid(format!("duplicate channel name '{name}'")));
        }
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("channel '{name}'")));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    /// Appends every channel of `other`, which must share the time axis.
    pub fn merge(&mut self, other: &UniformSeries) -> Result<()> {
        self.check_axis(other)?;
        for (name, col) in other.names.iter().zip(&other.columns) {
            self.push_channel(name, col.clone())?;
        }
        Ok(())
    }

    /// A new series holding only the named channels, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<UniformSeries> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            cols.push(self.require(n.as_ref())?.to_vec());
        }
        UniformSeries::new(
            self.dt,
            self.t0,
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            cols,
        )
    }

    /// Linear interpolation onto a grid `factor` times finer. The last
    /// sample is kept as the end point, so the result has
    /// `(N - 1) * factor + 1` steps.
    pub fn upsample_linear(&self, factor: usize) -> Result<UniformSeries> {
        if factor == 0 {
            return Err(Error::Invalid("upsampling factor must be at least 1".into()));
        }
        let n = self.len();
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let mut out = Vec::with_capacity((n - 1) * factor + 1);
                for w in col.windows(2) {
                    for k in 0..factor {
                        let s = k as f64 / factor as f64;
                        out.push(w[0] + s * (w[1] - w[0]));
                    }
                }
                out.push(col[n - 1]);
                out
            })
            .collect();
        UniformSeries::new(
            self.dt / factor as f64,
            self.t0,
            self.names.clone(),
            columns,
        )
    }
}

/// A strictly increasing set of lags, in time steps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(lags: Vec<usize>) -> Result<Self> {
        if lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "lags must be strictly increasing, got {lags:?}"
            )));
        }
        Ok(Self(lags))
    }

    /// All lags in `first..=last`.
    pub fn range(first: usize, last: usize) -> Self {
        Self((first..=last).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn lags(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }
}

impl TryFrom<Vec<usize>> for LagSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        LagSet::new(v)
    }
}

impl From<LagSet> for Vec<usize> {
    fn from(l: LagSet) -> Self {
        l.0
    }
}

/// Lags applied to one exogenous channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExogenousLags {
    pub channel: String,
    pub lags: LagSet,
}

impl ExogenousLags {
    pub fn new(channel: &str, lags: LagSet) -> Self {
        Self {
            channel: channel.to_string(),
            lags,
        }
    }
}

/// Which lagged values make up a regressor vector.
///
/// The regressor is ordered as: lagged outputs (ascending lag), then each
/// exogenous channel in declared order, each by ascending lag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorLayout {
    /// Name of the modelled output channel.
    #[serde(default)]
    pub output: String,
    #[serde(default)]
    pub autoregressive: LagSet,
    #[serde(default)]
    pub exogenous: Vec<ExogenousLags>,
}

impl RegressorLayout {
    pub fn new(output: &str, autoregressive: LagSet, exogenous: Vec<ExogenousLags>) -> Result<Self> {
        let layout = Self {
            output: output.to_string(),
            autoregressive,
            exogenous,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.autoregressive.min() == Some(0) {
            return Err(Error::Invalid(
                "autoregressive lags must be at least 1".into(),
            ));
        }
        if self.dim() == 0 {
            return Err(Error::Invalid("layout has no regressors".into()));
        }
        for (i, exo) in self.exogenous.iter().enumerate() {
            if exo.channel == self.output {
                return Err(Error::Invalid(format!(
                    "output '{}' cannot also be an exogenous channel",
                    self.output
                )));
            }
            if self.exogenous[..i].iter().any(|e| e.channel == exo.channel) {
                return Err(Error::Invalid(format!(
                    "exogenous channel '{}' listed twice",
                    exo.channel
                )));
            }
        }
        Ok(())
    }

    /// Regressor dimension M_phi.
    pub fn dim(&self) -> usize {
        self.autoregressive.len() + self.exogenous.iter().map(|e| e.lags.len()).sum::<usize>()
    }

    pub fn max_ar_lag(&self) -> usize {
        self.autoregressive.max().unwrap_or(0)
    }

    /// Largest lag over all terms; the first admissible time index.
    pub fn max_lag(&self) -> usize {
        self.exogenous
            .iter()
            .filter_map(|e| e.lags.max())
            .chain(self.autoregressive.max())
            .max()
            .unwrap_or(0)
    }

    pub fn channels(&self) -> impl Iterator<Item = &str> {
        self.exogenous.iter().map(|e| e.channel.as_str())
    }

    pub(crate) fn bind<'a>(&'a self, inputs: &'a UniformSeries) -> Result<BoundLayout<'a>> {
        let exo = self
            .exogenous
            .iter()
            .map(|e| Ok((inputs.require(&e.channel)?, e.lags.lags())))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundLayout {
            ar: self.autoregressive.lags(),
            exo,
        })
    }
}

/// A layout with its exogenous channels resolved to slices.
pub(crate) struct BoundLayout<'a> {
    ar: &'a [usize],
    exo: Vec<(&'a [f64], &'a [usize])>,
}

impl BoundLayout<'_> {
    /// Writes phi(t) into `out`. `output` only needs to be valid below `t`.
    pub(crate) fn fill(&self, output: &[f64], t: usize, out: &mut [f64]) {
        let mut k = 0;
        for &lag in self.ar {
            out[k] = output[t - lag];
            k += 1;
        }
        for (values, lags) in &self.exo {
            for &lag in *lags {
                out[k] = values[t - lag];
                k += 1;
            }
        }
    }
}

/// Builds the regressor vector phi(t).
///
/// `inputs` holds the exogenous channels and `output` the channel named by
/// `layout.output`; both must share a time axis.
pub fn build_regressor(
    inputs: &UniformSeries,
    output: &UniformSeries,
    layout: &RegressorLayout,
    t: usize,
) -> Result<Vec<f64>> {
    inputs.check_axis(output)?;
    let max_lag = layout.max_lag();
    if t < max_lag {
        return Err(Error::IndexOutOfRange { t, max_lag });
    }
    if t >= inputs.len() {
        return Err(Error::IndexOutOfRange {
            t,
            max_lag: inputs.len() - 1,
        });
    }
    let y = output.require(&layout.output)?;
    let bound = layout.bind(inputs)?;
    let mut phi = vec![0.0; layout.dim()];
    bound.fill(y, t, &mut phi);
    Ok(phi)
}

/// Where a design-matrix row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowOrigin {
    pub realization: usize,
    pub step: usize,
}

/// Stacked regressor vectors with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    dim: usize,
    dt: f64,
    rows: Vec<f64>,
    targets: Vec<f64>,
    origins: Vec<RowOrigin>,
}

impl DesignMatrix {
    /// Builds a design matrix from raw row-major data.
    pub fn from_rows(
        dim: usize,
        dt: f64,
        rows: Vec<f64>,
        targets: Vec<f64>,
        origins: Vec<RowOrigin>,
    ) -> Result<Self> {
        if dim == 0 || rows.len() != dim * targets.len() || origins.len() != targets.len() {
            return Err(Error::Invalid(format!(
                "design of dimension {dim} with {} values, {} targets and {} origins",
                rows.len(),
                targets.len(),
                origins.len()
            )));
        }
        if rows.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        Ok(Self {
            dim,
            dt,
            rows,
            targets,
            origins,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sampling step of the series the rows were assembled from.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn origins(&self) -> &[RowOrigin] {
        &self.origins
    }

    /// Rows at the given indices, in that order.
    pub fn take(&self, indices: &[usize]) -> DesignMatrix {
        let mut rows = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        let mut origins = Vec::with_capacity(indices.len());
        for &i in indices {
            rows.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
            origins.push(self.origins[i]);
        }
        DesignMatrix {
            dim: self.dim,
            dt: self.dt,
            rows,
            targets,
            origins,
        }
    }

    /// Vertical concatenation.
    pub fn stack(parts: Vec<DesignMatrix>) -> Result<DesignMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("nothing to stack".into()))?;
        let (dim, dt) = (first.dim, first.dt);
        let mut out = DesignMatrix {
            dim,
            dt,
            rows: Vec::new(),
            targets: Vec::new(),
            origins: Vec::new(),
        };
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimensionMismatch(format!(
                    "cannot stack designs of dimension {dim} and {}",
                    p.dim
                )));
            }
            if !same_dt(p.dt, dt) {
                return Err(Error::DtMismatch {
                    expected: dt,
                    found: p.dt,
                });
            }
            out.rows.extend(p.rows);
            out.targets.extend(p.targets);
            out.origins.extend(p.origins);
        }
        Ok(out)
    }
}

fn assemble_one(
    index: usize,
    inputs: &UniformSeries,
    output: &UniformSeries,
    layout: &RegressorLayout,
) -> Result<DesignMatrix> {
    inputs.check_axis(output)?;
    let max_lag = layout.max_lag();
    let n = inputs.len();
    if n <= max_lag {
        return Err(Error::TooShort {
            realization: index,
            len: n,
            max_lag,
        });
    }
    let y = output.require(&layout.output)?;
    let bound = layout.bind(inputs)?;
    let dim = layout.dim();
    let s = n - max_lag;
    let mut rows = vec![0.0; s * dim];
    for (r, chunk) in rows.chunks_exact_mut(dim).enumerate() {
        bound.fill(y, max_lag + r, chunk);
    }
    Ok(DesignMatrix {
        dim,
        dt: inputs.dt(),
        rows,
        targets: y[max_lag..].to_vec(),
        origins: (max_lag..n)
            .map(|step| RowOrigin {
                realization: index,
                step,
            })
            .collect(),
    })
}

/// Stacks the design matrices of several realizations.
///
/// Each pair is `(inputs, output)`; every admissible time index of every
/// realization contributes one row, in realization order.
pub fn assemble_design(
    realizations: &[(&UniformSeries, &UniformSeries)],
    layout: &RegressorLayout,
) -> Result<DesignMatrix> {
    if realizations.is_empty() {
        return Err(Error::Invalid("no realizations".into()));
    }
    layout.validate()?;
    let parts = realizations
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| assemble_one(i, x, y, layout))
        .collect::<Result<Vec<_>>>()?;
    DesignMatrix::stack(parts)
}

/// Draws `k` rows uniformly without replacement.
///
/// The returned rows are in draw order, so `k == n_rows` yields a
/// permutation of the design.
pub fn subsample(design: &DesignMatrix, k: usize, seed: u64) -> Result<DesignMatrix> {
    let rows = design.n_rows();
    if k == 0 || k > rows {
        return Err(Error::InvalidCount { k, rows });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, rows, k).into_vec();
    Ok(design.take(&picked))
}

/// Deterministic alternative to [`subsample`]: `k` rows at even strides.
pub fn subsample_strided(design: &DesignMatrix, k: usize) -> Result<DesignMatrix> {
    let rows = design.n_rows();
    if k == 0 || k > rows {
        return Err(Error::InvalidCount { k, rows });
    }
    let picked: Vec<usize> = (0..k).map(|i| i * rows / k).collect();
    Ok(design.take(&picked))
}
