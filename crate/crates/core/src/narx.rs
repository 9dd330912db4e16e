//! Polynomial NARX models: least-squares fitting, one-step prediction and
//! recursive free-run simulation.

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_basis, BasisSpec, CompiledBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::lstsq::{lstsq, ColMatrix};
use crate::series::{same_dt, DesignMatrix, RegressorLayout, UniformSeries};

/// Schema identifier written into model files.
pub const MODEL_SCHEMA: &str = "mnarx/narx-model";
pub const MODEL_VERSION: u32 = 1;

fn default_true() -> bool {
    true
}

/// Structure of a polynomial NARX model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarxSpec {
    pub layout: RegressorLayout,
    pub basis: BasisSpec,
    /// Standardize each regressor to zero mean and unit variance before
    /// forming monomials. A free intercept is fitted alongside so that the
    /// model class does not depend on the affine scaling of the inputs.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

impl NarxSpec {
    pub fn new(layout: RegressorLayout, max_degree: u32, max_interaction: u32) -> Result<Self> {
        let spec = Self {
            basis: BasisSpec::new(layout.dim(), max_degree, max_interaction),
            layout,
            standardize: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn with_constant(mut self, on: bool) -> Self {
        self.basis.include_constant = on;
        self
    }

    /// Fills a zero `basis.dim` from the layout.
    pub fn resolved(mut self) -> Self {
        if self.basis.dim == 0 {
            self.basis.dim = self.layout.dim();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.basis.dim != self.layout.dim() {
            return Err(Error::Invalid(format!(
                "basis dimension {} does not match the layout's {} regressors",
                self.basis.dim,
                self.layout.dim()
            )));
        }
        Ok(())
    }

    fn fits_intercept(&self) -> bool {
        self.standardize && !self.basis.include_constant
    }
}

/// Per-regressor affine map `u = (phi - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    fn estimate(design: &DesignMatrix) -> Self {
        let (n, dim) = (design.n_rows() as f64, design.dim());
        let mut means = vec![0.0; dim];
        for row in design.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in design.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let scales = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    fn apply(&self, phi: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(phi).zip(&self.means).zip(&self.scales) {
            *o = (v - m) / s;
        }
    }
}

/// Diagnostics recorded by [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows: usize,
    pub residual_rms: f64,
    pub target_std: f64,
    pub condition: f64,
    pub rank: usize,
    /// Set when the regression matrix was numerically rank deficient; the
    /// coefficients are then the minimum-norm solution.
    pub rank_deficient: bool,
    /// Largest absolute training target, the reference for the free-run guard.
    pub output_scale: f64,
}

/// A fitted polynomial NARX model. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct NarxModel {
    spec: NarxSpec,
    basis: Vec<MultiIndex>,
    standardization: Option<Standardization>,
    intercept: f64,
    coefficients: Vec<f64>,
    dt: f64,
    report: FitReport,
    compiled: CompiledBasis,
}

impl PartialEq for NarxModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.basis == other.basis
            && self.standardization == other.standardization
            && self.intercept.to_bits() == other.intercept.to_bits()
            && self.coefficients.len() == other.coefficients.len()
            && self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.dt.to_bits() == other.dt.to_bits()
            && self.report == other.report
    }
}

impl NarxModel {
    /// Assembles a model from explicit parts, e.g. a hand-written recursion.
    pub fn from_parts(
        spec: NarxSpec,
        basis: Vec<MultiIndex>,
        standardization: Option<Standardization>,
        intercept: f64,
        coefficients: Vec<f64>,
        dt: f64,
        report: FitReport,
    ) -> Result<Self> {
        spec.validate()?;
        let dim = spec.layout.dim();
        if basis.len() != coefficients.len() {
            return Err(Error::Invalid(format!(
                "{} basis terms for {} coefficients",
                basis.len(),
                coefficients.len()
            )));
        }
        if let Some(bad) = basis.iter().find(|a| a.dim() != dim) {
            return Err(Error::Invalid(format!(
                "multi-index of dimension {} in a {dim}-regressor model",
                bad.dim()
            )));
        }
        if let Some(s) = &standardization {
            if s.means.len() != dim || s.scales.len() != dim {
                return Err(Error::Invalid("standardization length mismatch".into()));
            }
            if s.scales.iter().any(|&v| v == 0.0) {
                return Err(Error::Invalid("zero standardization scale".into()));
            }
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invalid(format!("invalid dt {dt}")));
        }
        if coefficients.iter().chain([&intercept]).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("model coefficients".into()));
        }
        let compiled = CompiledBasis::new(&basis);
        Ok(Self {
            spec,
            basis,
            standardization,
            intercept,
            coefficients,
            dt,
            report,
            compiled,
        })
    }

    pub fn spec(&self) -> &NarxSpec {
        &self.spec
    }

    pub fn layout(&self) -> &RegressorLayout {
        &self.spec.layout
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    /// Number of initial output values a free run needs.
    pub fn warmup(&self) -> usize {
        self.spec.layout.max_lag()
    }

    fn eval(&self, phi: &[f64], scratch: &mut [f64]) -> f64 {
        let u = match &self.standardization {
            Some(s) => {
                s.apply(phi, scratch);
                &*scratch
            }
            None => phi,
        };
        self.intercept + self.compiled.dot(&self.coefficients, u)
    }
}

/// Fits coefficients by ordinary least squares on `design`.
pub fn fit(spec: &NarxSpec, design: &DesignMatrix) -> Result<NarxModel> {
    spec.validate()?;
    if design.dim() != spec.layout.dim() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, layout needs {}",
            design.dim(),
            spec.layout.dim()
        )));
    }
    let basis = enumerate_basis(&spec.basis)?;
    let compiled = CompiledBasis::new(&basis);
    let with_intercept = spec.fits_intercept();
    let n_unknowns = basis.len() + usize::from(with_intercept);
    let rows = design.n_rows();
    if rows < n_unknowns {
        return Err(Error::Underdetermined {
            rows,
            cols: n_unknowns,
        });
    }
    let standardization = spec.standardize.then(|| Standardization::estimate(design));

    let mut psi = ColMatrix::zeros(rows, n_unknowns);
    let offset = usize::from(with_intercept);
    if with_intercept {
        psi.col_mut(0).fill(1.0);
    }
    let mut u = vec![0.0; design.dim()];
    let mut mono = vec![0.0; basis.len()];
    for (i, row) in design.rows().enumerate() {
        let input = match &standardization {
            Some(s) => {
                s.apply(row, &mut u);
                &u[..]
            }
            None => row,
        };
        compiled.eval_into(input, &mut mono);
        for (j, v) in mono.iter().enumerate() {
            psi.col_mut(j + offset)[i] = *v;
        }
    }
    let solution = lstsq(&psi, design.targets(), None)?;
    let (intercept, coefficients) = if with_intercept {
        (solution.x[0], solution.x[1..].to_vec())
    } else {
        (0.0, solution.x.clone())
    };

    let fitted = psi.mul_vec(&solution.x);
    let targets = design.targets();
    let n = rows as f64;
    let residual_rms = (fitted
        .iter()
        .zip(targets)
        .map(|(f, y)| (y - f).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mean = targets.iter().sum::<f64>() / n;
    let target_std = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let report = FitReport {
        rows,
        residual_rms,
        target_std,
        condition: solution.condition,
        rank: solution.rank,
        rank_deficient: solution.rank_deficient(),
        output_scale: targets.iter().fold(0.0f64, |m, y| m.max(y.abs())),
    };
    NarxModel::from_parts(
        spec.clone(),
        basis,
        standardization,
        intercept,
        coefficients,
        design.dt(),
        report,
    )
}

/// Evaluates the model at one regressor vector.
pub fn predict_one_step(model: &NarxModel, phi: &[f64]) -> Result<f64> {
    if phi.len() != model.layout().dim() {
        return Err(Error::LengthMismatch {
            left: model.layout().dim(),
            right: phi.len(),
        });
    }
    let mut scratch = vec![0.0; phi.len()];
    let y = model.eval(phi, &mut scratch);
    if !y.is_finite() {
        return Err(Error::Numeric("one-step prediction is not finite".into()));
    }
    Ok(y)
}

/// The first output values of a free run.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    values: Vec<f64>,
}

impl InitialConditions {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    /// The first `n` values of a reference trace.
    pub fn from_trace(trace: &[f64], n: usize) -> Result<Self> {
        if trace.len() < n {
            return Err(Error::LengthMismatch {
                left: n,
                right: trace.len(),
            });
        }
        Ok(Self {
            values: trace[..n].to_vec(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Divergence guard for free runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeRunOptions {
    /// A prediction fails once `|y|` exceeds this multiple of the largest
    /// absolute training output.
    pub guard_factor: f64,
}

impl Default for FreeRunOptions {
    fn default() -> Self {
        Self { guard_factor: 1e6 }
    }
}

fn check_exogenous(model: &NarxModel, exogenous: &UniformSeries) -> Result<()> {
    if !same_dt(model.dt(), exogenous.dt()) {
        return Err(Error::DtMismatch {
            expected: model.dt(),
            found: exogenous.dt(),
        });
    }
    if exogenous.len() < model.warmup() {
        return Err(Error::TooShort {
            realization: 0,
            len: exogenous.len(),
            max_lag: model.warmup(),
        });
    }
    Ok(())
}

/// Recursive prediction with default options.
pub fn free_run(
    model: &NarxModel,
    exogenous: &UniformSeries,
    init: &InitialConditions,
) -> Result<UniformSeries> {
    free_run_with(model, exogenous, init, FreeRunOptions::default())
}

/// Recursive prediction: the first `warmup()` steps are copied from `init`,
/// every later step feeds on earlier predictions and on `exogenous`.
pub fn free_run_with(
    model: &NarxModel,
    exogenous: &UniformSeries,
    init: &InitialConditions,
    options: FreeRunOptions,
) -> Result<UniformSeries> {
    check_exogenous(model, exogenous)?;
    let warmup = model.warmup();
    if init.len() != warmup {
        return Err(Error::Invalid(format!(
            "free run needs {warmup} initial values, got {}",
            init.len()
        )));
    }
    let layout = model.layout();
    let bound = layout.bind(exogenous)?;
    let n = exogenous.len();
    let scale = model.report.output_scale;
    let guard = options.guard_factor * if scale > 0.0 { scale } else { 1.0 };

    let mut y = Vec::with_capacity(n);
    y.extend_from_slice(init.values());
    let mut phi = vec![0.0; layout.dim()];
    let mut scratch = vec![0.0; layout.dim()];
    for t in warmup..n {
        bound.fill(&y, t, &mut phi);
        let v = model.eval(&phi, &mut scratch);
        if !v.is_finite() || v.abs() > guard {
            return Err(Error::NumericBlowup {
                step: t,
                value: v.abs(),
                guard,
            });
        }
        y.push(v);
    }
    UniformSeries::new(
        exogenous.dt(),
        exogenous.t0(),
        vec![layout.output.clone()],
        vec![y],
    )
}

/// One-step-ahead predictions with the true past outputs fed back
/// (teacher forcing). Returns one value per step from `warmup()` on.
pub fn teacher_forced(model: &NarxModel, exogenous: &UniformSeries, truth: &[f64]) -> Result<Vec<f64>> {
    check_exogenous(model, exogenous)?;
    if truth.len() != exogenous.len() {
        return Err(Error::LengthMismatch {
            left: exogenous.len(),
            right: truth.len(),
        });
    }
    let layout = model.layout();
    let bound = layout.bind(exogenous)?;
    let mut phi = vec![0.0; layout.dim()];
    let mut scratch = vec![0.0; layout.dim()];
    (model.warmup()..exogenous.len())
        .map(|t| {
            bound.fill(truth, t, &mut phi);
            let v = model.eval(&phi, &mut scratch);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numeric(format!("non-finite prediction at step {t}")))
            }
        })
        .collect()
}

/// On-disk form of a [`NarxModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub version: u32,
    pub spec: NarxSpec,
    pub basis: Vec<MultiIndex>,
    pub standardization: Option<Standardization>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub dt: f64,
    pub report: FitReport,
}

impl From<&NarxModel> for ModelFile {
    fn from(m: &NarxModel) -> Self {
        Self {
            schema: MODEL_SCHEMA.to_string(),
            version: MODEL_VERSION,
            spec: m.spec.clone(),
            basis: m.basis.clone(),
            standardization: m.standardization.clone(),
            intercept: m.intercept,
            coefficients: m.coefficients.clone(),
            dt: m.dt,
            report: m.report.clone(),
        }
    }
}

impl TryFrom<ModelFile> for NarxModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema != MODEL_SCHEMA || f.version != MODEL_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model schema {} v{}",
                f.schema, f.version
            )));
        }
        NarxModel::from_parts(
            f.spec,
            f.basis,
            f.standardization,
            f.intercept,
            f.coefficients,
            f.dt,
            f.report,
        )
    }
}

impl NarxModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{assemble_design, ExogenousLags, LagSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout(ar: &[usize], exo: &[(&str, &[usize])]) -> RegressorLayout {
        RegressorLayout::new(
            "y",
            LagSet::new(ar.to_vec()).unwrap(),
            exo.iter()
                .map(|(c, l)| ExogenousLags::new(c, LagSet::new(l.to_vec()).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn report() -> FitReport {
        FitReport {
            rows: 0,
            residual_rms: 0.0,
            target_std: 0.0,
            condition: 1.0,
            rank: 0,
            rank_deficient: false,
            output_scale: 1.0,
        }
    }

    fn hand_model(l: RegressorLayout, coefficients: Vec<f64>) -> NarxModel {
        let spec = NarxSpec::new(l, 1, 1).unwrap().with_standardize(false);
        let basis = enumerate_basis(&spec.basis).unwrap();
        NarxModel::from_parts(spec, basis, None, 0.0, coefficients, 1.0, report()).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn exact_linear_recovery() {
        let phi1 = noise(50, 1);
        let phi2 = noise(50, 2);
        let rows: Vec<f64> = phi1.iter().zip(&phi2).flat_map(|(a, b)| [*a, *b]).collect();
        let targets: Vec<f64> = phi1.iter().zip(&phi2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let origins = (0..50)
            .map(|s| crate::series::RowOrigin {
                realization: 0,
                step: s,
            })
            .collect();
        let design = DesignMatrix::from_rows(2, 1.0, rows, targets, origins).unwrap();
        let l = layout(&[], &[("a", &[0]), ("b", &[0])]);
        let spec = NarxSpec::new(l, 1, 1).unwrap().with_standardize(false);
        let m = fit(&spec, &design).unwrap();
        assert!((m.coefficients()[0] - 2.0).abs() < 1e-10);
        assert!((m.coefficients()[1] + 3.0).abs() < 1e-10);
        assert!(!m.report().rank_deficient);
    }

    #[test]
    fn underdetermined_fit() {
        let l = layout(&[1, 2], &[("x", &[0, 1])]);
        let x = UniformSeries::single(1.0, "x", noise(5, 3)).unwrap();
        let y = UniformSeries::single(1.0, "y", noise(5, 4)).unwrap();
        let d = assemble_design(&[(&x, &y)], &l).unwrap();
        let spec = NarxSpec::new(l, 2, 2).unwrap();
        assert!(matches!(fit(&spec, &d), Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn zero_and_constant_models() {
        let m = hand_model(layout(&[1], &[("x", &[0])]), vec![0.0, 0.0]);
        assert_eq!(predict_one_step(&m, &[3.0, -9.0]).unwrap(), 0.0);

        let spec = NarxSpec::new(layout(&[1], &[]), 1, 1)
            .unwrap()
            .with_standardize(false)
            .with_constant(true);
        let basis = enumerate_basis(&spec.basis).unwrap();
        let constant = basis[..1].to_vec();
        let m = NarxModel::from_parts(spec, constant, None, 0.0, vec![5.0], 1.0, report()).unwrap();
        assert_eq!(predict_one_step(&m, &[123.0]).unwrap(), 5.0);
    }

    #[test]
    fn identity_recursion_holds_last_value() {
        let m = hand_model(layout(&[1, 2], &[]), vec![1.0, 0.0]);
        let x = UniformSeries::single(1.0, "x", vec![0.0; 40]).unwrap();
        let out = free_run(&m, &x, &InitialConditions::new(vec![0.3, 1.7])).unwrap();
        assert_eq!(out.column(0)[..2], [0.3, 1.7]);
        assert!(out.column(0)[2..].iter().all(|&v| v == 1.7));
        assert_eq!(out.names(), ["y"]);
    }

    #[test]
    fn pass_through_model_copies_input() {
        let m = hand_model(layout(&[], &[("x", &[0])]), vec![1.0]);
        let xs = noise(30, 5);
        let x = UniformSeries::single(1.0, "x", xs.clone()).unwrap();
        let out = free_run(&m, &x, &InitialConditions::zeros(0)).unwrap();
        assert_eq!(out.column(0), &xs[..]);
    }

    #[test]
    fn free_run_rejects_bad_init_and_dt() {
        let m = hand_model(layout(&[1, 2], &[]), vec![1.0, 0.0]);
        let x = UniformSeries::single(1.0, "x", vec![0.0; 10]).unwrap();
        assert!(free_run(&m, &x, &InitialConditions::zeros(1)).is_err());
        let x2 = UniformSeries::single(0.5, "x", vec![0.0; 10]).unwrap();
        assert!(matches!(
            free_run(&m, &x2, &InitialConditions::zeros(2)),
            Err(Error::DtMismatch { .. })
        ));
    }

    #[test]
    fn blowup_guard_trips() {
        let m = hand_model(layout(&[1], &[]), vec![2.0]);
        let x = UniformSeries::single(1.0, "x", vec![0.0; 100]).unwrap();
        let err = free_run(&m, &x, &InitialConditions::new(vec![1.0])).unwrap_err();
        assert!(matches!(err, Error::NumericBlowup { step: 20, .. }), "{err}");
        assert!(err.is_numeric());
        let ok = free_run_with(
            &m,
            &x,
            &InitialConditions::new(vec![1.0]),
            FreeRunOptions { guard_factor: 1e40 },
        );
        assert!(ok.is_ok());
    }

    fn simulated(n: usize, seed: u64) -> (UniformSeries, UniformSeries) {
        // y(t) = 0.5 y(t-1) - 0.2 y(t-2) + x(t) + 0.3 x(t-1)^2 - 0.1 y(t-1) x(t)
        let x = noise(n, seed);
        let mut y = vec![0.0; n];
        for t in 2..n {
            y[t] = 0.5 * y[t - 1] - 0.2 * y[t - 2] + x[t] + 0.3 * x[t - 1].powi(2)
                - 0.1 * y[t - 1] * x[t];
        }
        (
            UniformSeries::single(1.0, "x", x).unwrap(),
            UniformSeries::single(1.0, "y", y).unwrap(),
        )
    }

    #[test]
    fn degree_two_recovery_and_optimality() {
        let l = layout(&[1, 2], &[("x", &[0, 1])]);
        let (x, y) = simulated(400, 9);
        let d = assemble_design(&[(&x, &y)], &l).unwrap();
        let spec = NarxSpec::new(l, 2, 2).unwrap().with_standardize(false);
        let m = fit(&spec, &d).unwrap();
        let expect = |e: &[u32]| -> f64 {
            match e {
                [1, 0, 0, 0] => 0.5,
                [0, 1, 0, 0] => -0.2,
                [0, 0, 1, 0] => 1.0,
                [0, 0, 0, 2] => 0.3,
                [1, 0, 1, 0] => -0.1,
                _ => 0.0,
            }
        };
        for (a, c) in m.basis().iter().zip(m.coefficients()) {
            assert!((c - expect(a.exponents())).abs() < 1e-8, "{a:?}: {c}");
        }
        // teacher forcing reproduces the truth and one-step predictions
        let tf = teacher_forced(&m, &x, y.column(0)).unwrap();
        for (t, v) in tf.iter().enumerate() {
            let phi = crate::series::build_regressor(&x, &y, m.layout(), t + 2).unwrap();
            assert_eq!(*v, predict_one_step(&m, &phi).unwrap());
            assert!((v - y.column(0)[t + 2]).abs() < 1e-9);
        }
    }

    #[test]
    fn standardized_fit_is_affine_invariant() {
        let l = layout(&[1, 2], &[("x", &[0, 1])]);
        let (x, y) = simulated(300, 10);
        let (xv, yv) = simulated(200, 11);
        let spec = NarxSpec::new(l.clone(), 2, 2).unwrap();
        let m = fit(&spec, &assemble_design(&[(&x, &y)], &l).unwrap()).unwrap();
        let shift = |s: &UniformSeries| {
            UniformSeries::single(1.0, "x", s.column(0).iter().map(|v| 3.0 * v - 7.0).collect())
                .unwrap()
        };
        let (xs, xvs) = (shift(&x), shift(&xv));
        let ms = fit(&spec, &assemble_design(&[(&xs, &y)], &l).unwrap()).unwrap();
        let a = teacher_forced(&m, &xv, yv.column(0)).unwrap();
        let b = teacher_forced(&ms, &xvs, yv.column(0)).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-8 * p.abs().max(1.0), "{p} vs {q}");
        }
    }

    #[test]
    fn training_row_bookkeeping() {
        let l = layout(&[1, 2], &[("x", &[0, 1])]);
        let (x, y) = simulated(200, 12);
        let d = assemble_design(&[(&x, &y)], &l).unwrap();
        let m = fit(&NarxSpec::new(l, 1, 1).unwrap(), &d).unwrap();
        let mut sq = 0.0;
        for (row, target) in d.rows().zip(d.targets()) {
            sq += (target - predict_one_step(&m, row).unwrap()).powi(2);
        }
        let rms = (sq / d.n_rows() as f64).sqrt();
        assert!((rms - m.report().residual_rms).abs() < 1e-12);
        assert!(m.report().residual_rms > 0.0);
    }

    #[test]
    fn model_json_round_trip_is_bit_exact() {
        let l = layout(&[1, 2], &[("x", &[0, 1])]);
        let (x, y) = simulated(200, 13);
        let m = fit(&NarxSpec::new(l.clone(), 2, 2).unwrap(), &assemble_design(&[(&x, &y)], &l).unwrap()).unwrap();
        let back = NarxModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let mut file = ModelFile::from(&m);
        file.version = 99;
        assert!(NarxModel::try_from(file).is_err());
    }
}
