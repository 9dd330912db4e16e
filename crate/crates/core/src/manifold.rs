//! Chained surrogates over an incrementally grown exogenous-input manifold.
//!
//! A [`ManifoldPlan`] lists stages in construction order. Each stage adds
//! channels to the manifold: a direct [`Transform`] of an existing channel,
//! or the output of an intermediate NARX model. The final stage is a NARX
//! model of the quantity of interest and may use any manifold channel.
//!
//! During training every model stage is fitted on ground truth from the
//! experimental design, and that truth (not a prediction) is what later
//! stages see. During prediction each model stage free-runs on the
//! predicted upstream channels.
//!
//! Only acyclic chains are supported. Mutually coupled quantities would
//! need a leading quantity and an alternating executor; a plan that tries
//! to consume a channel produced later is rejected with
//! [`Error::CyclicPlan`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dimreduce::{reduce, DctReduction, FieldSequence};
use crate::error::{Error, Result};
use crate::narx::{fit, free_run_with, FreeRunOptions, InitialConditions, NarxModel, NarxSpec};
use crate::series::{assemble_design, same_dt, subsample, UniformSeries};
use crate::transform::Transform;

pub const PLAN_VERSION: u32 = 1;

/// How a model stage is initialized when no values are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    Zeros,
    /// Initial values must be supplied at prediction time.
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageKind {
    Transform {
        inputs: Vec<String>,
        transform: Transform,
    },
    Model {
        narx: NarxSpec,
        #[serde(default)]
        init: InitPolicy,
        /// Rows drawn at random from the stacked design; all rows when absent.
        #[serde(default)]
        subsample: Option<usize>,
    },
}

/// One stage of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: StageKind,
}

impl AuxiliaryDef {
    pub fn model(name: &str, mut narx: NarxSpec) -> Self {
        narx.layout.output = name.to_string();
        Self {
            name: name.to_string(),
            kind: StageKind::Model {
                narx,
                init: InitPolicy::Zeros,
                subsample: None,
            },
        }
    }

    pub fn transform(name: &str, input: &str, transform: Transform) -> Self {
        Self {
            name: name.to_string(),
            kind: StageKind::Transform {
                inputs: vec![input.to_string()],
                transform,
            },
        }
    }

    pub fn with_subsample(mut self, rows: usize) -> Self {
        if let StageKind::Model { subsample, .. } = &mut self.kind {
            *subsample = Some(rows);
        }
        self
    }

    /// Channels this stage reads.
    pub fn inputs(&self) -> Vec<String> {
        match &self.kind {
            StageKind::Transform { inputs, .. } => inputs.clone(),
            StageKind::Model { narx, .. } => narx.layout.channels().map(String::from).collect(),
        }
    }

    /// Channels this stage adds to the manifold.
    pub fn outputs(&self) -> Vec<String> {
        match &self.kind {
            StageKind::Transform { transform, .. } => transform.output_names(&self.name),
            StageKind::Model { .. } => vec![self.name.clone()],
        }
    }
}

/// Optional DCT compression of a field input; adds channels `xi_i_j`.
pub type ReductionStage = DctReduction;

/// Declarative description of a manifold surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldPlan {
    #[serde(default = "plan_version")]
    pub version: u32,
    /// Raw exogenous channels taken from the input series.
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub reduction: Option<ReductionStage>,
    #[serde(default)]
    pub auxiliaries: Vec<AuxiliaryDef>,
    #[serde(rename = "final")]
    pub final_stage: AuxiliaryDef,
}

fn plan_version() -> u32 {
    PLAN_VERSION
}

fn plan_error(stage: &str, field: &str, message: impl Into<String>) -> Error {
    Error::Plan {
        stage: stage.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

impl ManifoldPlan {
    /// A plan with no auxiliaries: plain NARX on the raw inputs.
    pub fn single(inputs: &[&str], final_stage: AuxiliaryDef) -> Self {
        Self {
            version: PLAN_VERSION,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            reduction: None,
            auxiliaries: Vec::new(),
            final_stage,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ManifoldPlan = serde_json::from_str(text)?;
        plan.validated()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// All stages in construction order, final stage last.
    pub fn stages(&self) -> impl Iterator<Item = &AuxiliaryDef> {
        self.auxiliaries.iter().chain(std::iter::once(&self.final_stage))
    }

    /// Channels available before any stage runs.
    pub fn base_channels(&self) -> Vec<String> {
        let mut out = self.inputs.clone();
        if let Some(r) = &self.reduction {
            out.extend(r.channel_names());
        }
        out
    }

    /// Checks the chain and fills derived fields (model output names,
    /// basis dimensions).
    pub fn validated(mut self) -> Result<Self> {
        if self.version != PLAN_VERSION {
            return Err(plan_error("<plan>", "version", format!("unsupported version {}", self.version)));
        }
        let n_aux = self.auxiliaries.len();
        for def in self.auxiliaries.iter_mut().chain(std::iter::once(&mut self.final_stage)) {
            if let StageKind::Model { narx, .. } = &mut def.kind {
                if narx.layout.output.is_empty() {
                    narx.layout.output = def.name.clone();
                }
                *narx = narx.clone().resolved();
            }
        }
        let mut available = self.base_channels();
        if available.is_empty() {
            return Err(plan_error("<plan>", "inputs", "no raw inputs and no reduction"));
        }
        for (i, c) in available.iter().enumerate() {
            if available[..i].contains(c) {
                return Err(plan_error("<plan>", "inputs", format!("channel '{c}' listed twice")));
            }
        }
        let all_outputs: Vec<String> = self.stages().flat_map(|s| s.outputs()).collect();

        for (idx, def) in self.stages().enumerate() {
            let stage = def.name.as_str();
            if stage.is_empty() {
                return Err(plan_error(&format!("#{idx}"), "name", "stage name is empty"));
            }
            let input_field = match &def.kind {
                StageKind::Transform { inputs, transform } => {
                    if idx == n_aux {
                        return Err(plan_error(stage, "kind", "the final stage must be a model"));
                    }
                    if inputs.len() != 1 {
                        return Err(plan_error(
                            stage,
                            "inputs",
                            format!("transforms take exactly one input, got {}", inputs.len()),
                        ));
                    }
                    transform.validate().map_err(|e| plan_error(stage, "transform", e.to_string()))?;
                    "inputs"
                }
                StageKind::Model { narx, subsample, .. } => {
                    if narx.layout.output != def.name {
                        return Err(plan_error(
                            stage,
                            "narx.layout.output",
                            format!("must equal the stage name, got '{}'", narx.layout.output),
                        ));
                    }
                    narx.validate().map_err(|e| plan_error(stage, "narx", e.to_string()))?;
                    if *subsample == Some(0) {
                        return Err(plan_error(stage, "subsample", "must be at least 1"));
                    }
                    "narx.layout.exogenous"
                }
            };
            for input in def.inputs() {
                if !available.contains(&input) {
                    if all_outputs.contains(&input) {
                        return Err(Error::CyclicPlan {
                            stage: stage.to_string(),
                            channel: input,
                        });
                    }
                    return Err(plan_error(stage, input_field, format!("unknown channel '{input}'")));
                }
            }
            for out in def.outputs() {
                if available.contains(&out) {
                    return Err(plan_error(stage, "name", format!("channel '{out}' already exists")));
                }
                available.push(out);
            }
        }
        Ok(self)
    }
}

/// Inputs for one realization: raw channels (and, for training, ground
/// truth channels named after model stages) plus an optional field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifoldData {
    pub series: Option<UniformSeries>,
    pub field: Option<FieldSequence>,
}

impl ManifoldData {
    pub fn from_series(series: UniformSeries) -> Self {
        Self {
            series: Some(series),
            field: None,
        }
    }

    fn truth(&self, name: &str) -> Option<&[f64]> {
        self.series.as_ref().and_then(|s| s.channel(name))
    }
}

/// Where a manifold channel's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    Raw,
    Reduced,
    Transform,
    GroundTruth,
    Predicted,
}

/// Data provenance of one executed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    /// Each consumed channel with the source of its values.
    pub consumed: Vec<(String, ChannelSource)>,
    /// Source recorded for the channels the stage added.
    pub produced: ChannelSource,
}

fn base_manifold(plan: &ManifoldPlan, data: &ManifoldData) -> Result<(UniformSeries, BTreeMap<String, ChannelSource>)> {
    let mut sources = BTreeMap::new();
    let mut manifold: Option<UniformSeries> = None;
    if !plan.inputs.is_empty() {
        let series = data
            .series
            .as_ref()
            .ok_or_else(|| Error::ChannelMissing(plan.inputs[0].clone()))?;
        manifold = Some(series.select(&plan.inputs)?);
        for c in &plan.inputs {
            sources.insert(c.clone(), ChannelSource::Raw);
        }
    }
    if let Some(red) = &plan.reduction {
        let field = data
            .field
            .as_ref()
            .ok_or_else(|| Error::Invalid("plan reduces a field but none was supplied".into()))?;
        let reduced = reduce(field, red)?;
        for c in reduced.names() {
            sources.insert(c.clone(), ChannelSource::Reduced);
        }
        manifold = Some(match manifold {
            Some(mut m) => {
                m.merge(&reduced)?;
                m
            }
            None => reduced,
        });
    }
    let manifold = manifold.ok_or_else(|| Error::Invalid("plan has no inputs".into()))?;
    Ok((manifold, sources))
}

fn consumed(def: &AuxiliaryDef, sources: &BTreeMap<String, ChannelSource>) -> Vec<(String, ChannelSource)> {
    def.inputs()
        .into_iter()
        .map(|c| {
            let s = sources[&c];
            (c, s)
        })
        .collect()
}

fn stage_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// What a stage resolved to after training.
#[derive(Debug, Clone, PartialEq)]
pub enum StageArtifact {
    Transform(Transform),
    Model(NarxModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedStage {
    pub name: String,
    pub artifact: StageArtifact,
}

/// A plan with every stage fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedManifold {
    plan: ManifoldPlan,
    stages: Vec<FittedStage>,
    final_model: NarxModel,
    training_log: Vec<StageLog>,
}

impl TrainedManifold {
    /// Reassembles a trained manifold, e.g. after loading from disk.
    /// `models` must hold one fitted model per model stage, final included.
    pub fn from_models(plan: ManifoldPlan, mut models: BTreeMap<String, NarxModel>) -> Result<Self> {
        let plan = plan.validated()?;
        let mut take = |def: &AuxiliaryDef, narx: &NarxSpec| -> Result<NarxModel> {
            let model = models
                .remove(&def.name)
                .ok_or_else(|| plan_error(&def.name, "model", "no fitted model for stage"))?;
            if model.spec() != narx {
                return Err(plan_error(&def.name, "narx", "fitted model does not match the plan"));
            }
            Ok(model)
        };
        let mut stages = Vec::with_capacity(plan.auxiliaries.len());
        for def in &plan.auxiliaries {
            let artifact = match &def.kind {
                StageKind::Transform { transform, .. } => StageArtifact::Transform(transform.clone()),
                StageKind::Model { narx, .. } => StageArtifact::Model(take(def, narx)?),
            };
            stages.push(FittedStage {
                name: def.name.clone(),
                artifact,
            });
        }
        let final_model = match &plan.final_stage.kind {
            StageKind::Model { narx, .. } => take(&plan.final_stage, narx)?,
            StageKind::Transform { .. } => unreachable!("validated plans end in a model"),
        };
        Ok(Self {
            plan,
            stages,
            final_model,
            training_log: Vec::new(),
        })
    }

    pub fn plan(&self) -> &ManifoldPlan {
        &self.plan
    }

    pub fn stages(&self) -> &[FittedStage] {
        &self.stages
    }

    pub fn final_model(&self) -> &NarxModel {
        &self.final_model
    }

    /// Every fitted model keyed by stage name, final included.
    pub fn models(&self) -> BTreeMap<String, &NarxModel> {
        let mut out: BTreeMap<String, &NarxModel> = self
            .stages
            .iter()
            .filter_map(|s| match &s.artifact {
                StageArtifact::Model(m) => Some((s.name.clone(), m)),
                StageArtifact::Transform(_) => None,
            })
            .collect();
        out.insert(self.plan.final_stage.name.clone(), &self.final_model);
        out
    }

    /// Provenance recorded while training; empty for loaded manifolds.
    pub fn training_log(&self) -> &[StageLog] {
        &self.training_log
    }

    /// Sampling step the models were trained at.
    pub fn dt(&self) -> f64 {
        self.final_model.dt()
    }
}

/// Fits every model stage of `plan` on the experimental design `ed`.
///
/// `seed` drives the optional per-stage row subsampling.
pub fn train_manifold(plan: &ManifoldPlan, ed: &[ManifoldData], seed: u64) -> Result<TrainedManifold> {
    let plan = plan.clone().validated()?;
    if ed.is_empty() {
        return Err(Error::Invalid("experimental design is empty".into()));
    }
    let mut manifolds = Vec::with_capacity(ed.len());
    let mut sources = BTreeMap::new();
    for data in ed {
        let (m, s) = base_manifold(&plan, data)?;
        manifolds.push(m);
        sources = s;
    }

    let mut stages = Vec::new();
    let mut log = Vec::new();
    let mut final_model = None;
    for (idx, def) in plan.stages().enumerate() {
        let used = consumed(def, &sources);
        match &def.kind {
            StageKind::Transform { inputs, transform } => {
                for m in manifolds.iter_mut() {
                    let cols = transform
                        .apply_values(m.require(&inputs[0])?, m.dt())
                        .map_err(|e| e.in_stage(&def.name))?;
                    for (name, col) in def.outputs().iter().zip(cols) {
                        m.push_channel(name, col)?;
                    }
                }
                for out in def.outputs() {
                    sources.insert(out, ChannelSource::Transform);
                }
                stages.push(FittedStage {
                    name: def.name.clone(),
                    artifact: StageArtifact::Transform(transform.clone()),
                });
                log.push(StageLog {
                    stage: def.name.clone(),
                    consumed: used,
                    produced: ChannelSource::Transform,
                });
            }
            StageKind::Model { narx, subsample: rows, .. } => {
                let truths = ed
                    .iter()
                    .zip(&manifolds)
                    .enumerate()
                    .map(|(r, (data, m))| {
                        let values = data.truth(&def.name).ok_or_else(|| Error::MissingGroundTruth {
                            stage: def.name.clone(),
                            realization: r,
                        })?;
                        UniformSeries::new(m.dt(), m.t0(), vec![def.name.clone()], vec![values.to_vec()])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let pairs: Vec<_> = manifolds.iter().zip(&truths).collect();
                let pairs: Vec<_> = pairs.into_iter().map(|(m, t)| (m, t)).collect();
                let mut design = assemble_design(&pairs, &narx.layout).map_err(|e| e.in_stage(&def.name))?;
                if let Some(k) = rows {
                    if *k < design.n_rows() {
                        design = subsample(&design, *k, stage_seed(seed, idx)).map_err(|e| e.in_stage(&def.name))?;
                    }
                }
                let model = fit(narx, &design).map_err(|e| e.in_stage(&def.name))?;
                log.push(StageLog {
                    stage: def.name.clone(),
                    consumed: used,
                    produced: ChannelSource::GroundTruth,
                });
                if idx == plan.auxiliaries.len() {
                    final_model = Some(model);
                } else {
                    for (m, t) in manifolds.iter_mut().zip(&truths) {
                        m.push_channel(&def.name, t.column(0).to_vec())?;
                    }
                    sources.insert(def.name.clone(), ChannelSource::GroundTruth);
                    stages.push(FittedStage {
                        name: def.name.clone(),
                        artifact: StageArtifact::Model(model),
                    });
                }
            }
        }
    }
    Ok(TrainedManifold {
        plan,
        stages,
        final_model: final_model.expect("final stage is a model"),
        training_log: log,
    })
}

/// Initial conditions per model stage, keyed by stage name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageInits(pub BTreeMap<String, InitialConditions>);

impl StageInits {
    pub fn zeros() -> Self {
        Self::default()
    }

    /// Takes the first values of each model stage's true trace from
    /// `truth` (validation mode).
    pub fn from_truth(tm: &TrainedManifold, truth: &UniformSeries) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (name, model) in tm.models() {
            let trace = truth.require(&name)?;
            out.insert(name, InitialConditions::from_trace(trace, model.warmup())?);
        }
        Ok(Self(out))
    }

    pub fn with(mut self, stage: &str, init: InitialConditions) -> Self {
        self.0.insert(stage.to_string(), init);
        self
    }
}

/// Output of [`predict_manifold`].
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPrediction {
    pub output: UniformSeries,
    /// Channels added by each auxiliary stage, in plan order.
    pub aux_traces: Vec<(String, UniformSeries)>,
    pub log: Vec<StageLog>,
}

/// Runs the chain on new inputs. Model stages free-run on predicted
/// upstream channels; the final surrogate runs last.
pub fn predict_manifold(tm: &TrainedManifold, data: &ManifoldData, inits: &StageInits) -> Result<ManifoldPrediction> {
    predict_manifold_with(tm, data, inits, FreeRunOptions::default())
}

pub fn predict_manifold_with(
    tm: &TrainedManifold,
    data: &ManifoldData,
    inits: &StageInits,
    options: FreeRunOptions,
) -> Result<ManifoldPrediction> {
    let plan = &tm.plan;
    let (mut manifold, mut sources) = base_manifold(plan, data)?;
    if !same_dt(manifold.dt(), tm.dt()) {
        return Err(Error::DtMismatch {
            expected: tm.dt(),
            found: manifold.dt(),
        });
    }
    let init_for = |def: &AuxiliaryDef, model: &NarxModel| -> Result<InitialConditions> {
        match inits.0.get(&def.name) {
            Some(i) => Ok(i.clone()),
            None => match &def.kind {
                StageKind::Model {
                    init: InitPolicy::Provided,
                    ..
                } => Err(plan_error(&def.name, "init", "initial conditions required but not supplied")),
                _ => Ok(InitialConditions::zeros(model.warmup())),
            },
        }
    };

    let mut aux_traces = Vec::with_capacity(tm.stages.len());
    let mut log = Vec::with_capacity(tm.stages.len() + 1);
    for (def, stage) in plan.auxiliaries.iter().zip(&tm.stages) {
        let used = consumed(def, &sources);
        let added = match &stage.artifact {
            StageArtifact::Transform(t) => {
                let input = &def.inputs()[0];
                let cols = t
                    .apply_values(manifold.require(input)?, manifold.dt())
                    .map_err(|e| e.in_stage(&def.name))?;
                UniformSeries::new(manifold.dt(), manifold.t0(), def.outputs(), cols)?
            }
            StageArtifact::Model(model) => {
                let init = init_for(def, model)?;
                free_run_with(model, &manifold, &init, options).map_err(|e| e.in_stage(&def.name))?
            }
        };
        let produced = match stage.artifact {
            StageArtifact::Transform(_) => ChannelSource::Transform,
            StageArtifact::Model(_) => ChannelSource::Predicted,
        };
        for name in added.names() {
            sources.insert(name.clone(), produced);
        }
        manifold.merge(&added)?;
        log.push(StageLog {
            stage: def.name.clone(),
            consumed: used,
            produced,
        });
        aux_traces.push((def.name.clone(), added));
    }
    let def = &plan.final_stage;
    let used = consumed(def, &sources);
    let init = init_for(def, &tm.final_model)?;
    let output = free_run_with(&tm.final_model, &manifold, &init, options).map_err(|e| e.in_stage(&def.name))?;
    log.push(StageLog {
        stage: def.name.clone(),
        consumed: used,
        produced: ChannelSource::Predicted,
    });
    Ok(ManifoldPrediction {
        output,
        aux_traces,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::{free_run, teacher_forced};
    use crate::series::{ExogenousLags, LagSet, RegressorLayout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(ar: usize, exo: &[(&str, usize)], degree: u32) -> NarxSpec {
        let layout = RegressorLayout::new(
            "",
            LagSet::range(1, ar),
            exo.iter()
                .map(|(c, m)| ExogenousLags::new(c, LagSet::range(0, *m)))
                .collect(),
        )
        .unwrap();
        NarxSpec::new(layout, degree, 1).unwrap()
    }

    /// A toy two-stage system: z follows x, y follows z.
    fn toy_run(n: usize, seed: u64) -> UniformSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut z = vec![0.0; n];
        let mut y = vec![0.0; n];
        for t in 1..n {
            z[t] = 0.7 * z[t - 1] + 0.5 * x[t];
            y[t] = 0.4 * y[t - 1] + 0.8 * z[t] - 0.2 * z[t - 1];
        }
        UniformSeries::new(
            0.1,
            0.0,
            vec!["x".into(), "z".into(), "y".into()],
            vec![x, z, y],
        )
        .unwrap()
    }

    fn two_stage_plan() -> ManifoldPlan {
        ManifoldPlan {
            version: PLAN_VERSION,
            inputs: vec!["x".into()],
            reduction: None,
            auxiliaries: vec![AuxiliaryDef::model("z", spec(1, &[("x", 0)], 1))],
            final_stage: AuxiliaryDef::model("y", spec(1, &[("z", 1)], 1)),
        }
    }

    #[test]
    fn empty_chain_is_plain_narx() {
        let ed: Vec<_> = (0..3).map(|s| toy_run(200, s)).collect();
        let plan = ManifoldPlan::single(&["x"], AuxiliaryDef::model("z", spec(2, &[("x", 1)], 2)));
        let data: Vec<_> = ed.iter().cloned().map(ManifoldData::from_series).collect();
        let tm = train_manifold(&plan, &data, 0).unwrap();
        assert!(tm.stages().is_empty());

        let narx_spec = spec(2, &[("x", 1)], 2);
        let mut narx_spec_named = narx_spec.clone();
        narx_spec_named.layout.output = "z".into();
        let pairs: Vec<_> = ed.iter().map(|s| (s, s)).collect();
        let plain = fit(&narx_spec_named, &assemble_design(&pairs, &narx_spec_named.layout).unwrap()).unwrap();
        assert_eq!(tm.final_model(), &plain);

        let val = toy_run(150, 99);
        let init = InitialConditions::from_trace(val.require("z").unwrap(), 2).unwrap();
        let a = predict_manifold(&tm, &ManifoldData::from_series(val.clone()), &StageInits::zeros().with("z", init.clone())).unwrap();
        let b = free_run(&plain, &val, &init).unwrap();
        assert_eq!(a.output, b);
        assert!(a.aux_traces.is_empty());
    }

    #[test]
    fn two_stage_chain_trains_on_truth_and_predicts_on_predictions() {
        let ed: Vec<_> = (0..3).map(|s| ManifoldData::from_series(toy_run(300, s))).collect();
        let tm = train_manifold(&two_stage_plan(), &ed, 1).unwrap();
        assert_eq!(tm.models().len(), 2);
        assert_eq!(tm.models()["z"].coefficients().len(), 2);

        let log = tm.training_log();
        assert_eq!(log[1].consumed, vec![("z".to_string(), ChannelSource::GroundTruth)]);

        let val = toy_run(200, 50);
        let inits = StageInits::from_truth(&tm, &val).unwrap();
        let pred = predict_manifold(&tm, &ManifoldData::from_series(val.clone()), &inits).unwrap();
        assert_eq!(pred.log[1].consumed, vec![("z".to_string(), ChannelSource::Predicted)]);
        assert_eq!(pred.log[0].consumed, vec![("x".to_string(), ChannelSource::Raw)]);
        // exact linear system: the chain reproduces the truth
        for (p, t) in pred.output.column(0).iter().zip(val.require("y").unwrap()) {
            assert!((p - t).abs() < 1e-9);
        }
        assert_eq!(pred.aux_traces[0].0, "z");

        // the final stage fed with the predicted z equals a free run on that manifold
        let mut manifold = val.select(&["x"]).unwrap();
        manifold.push_channel("z", pred.aux_traces[0].1.column(0).to_vec()).unwrap();
        let again = free_run(tm.final_model(), &manifold, &inits.0["y"]).unwrap();
        assert_eq!(again, pred.output);
        // determinism
        assert_eq!(predict_manifold(&tm, &ManifoldData::from_series(val), &inits).unwrap(), pred);
    }

    #[test]
    fn transform_only_chain() {
        let runs: Vec<_> = (0..2).map(|s| toy_run(200, s + 10)).collect();
        let ed: Vec<_> = runs
            .iter()
            .map(|r| {
                let mut s = r.select(&["x", "y"]).unwrap();
                let avg = Transform::MovingAverage { window: 4 }.apply_values(r.column(0), r.dt()).unwrap();
                s.push_channel("target", avg[0].iter().map(|v| 2.0 * v).collect()).unwrap();
                ManifoldData::from_series(s)
            })
            .collect();
        let plan = ManifoldPlan {
            version: PLAN_VERSION,
            inputs: vec!["x".into()],
            reduction: None,
            auxiliaries: vec![AuxiliaryDef::transform("xbar", "x", Transform::MovingAverage { window: 4 })],
            final_stage: AuxiliaryDef::model(
                "target",
                NarxSpec::new(
                    RegressorLayout::new("", LagSet::empty(), vec![ExogenousLags::new("xbar", LagSet::range(0, 0))]).unwrap(),
                    1,
                    1,
                )
                .unwrap(),
            ),
        };
        let tm = train_manifold(&plan, &ed, 0).unwrap();
        assert!(matches!(tm.stages()[0].artifact, StageArtifact::Transform(_)));
        assert_eq!(tm.models().len(), 1);
        let pred = predict_manifold(&tm, &ed[0], &StageInits::zeros()).unwrap();
        for (p, t) in pred.output.column(0).iter().zip(ed[0].series.as_ref().unwrap().require("target").unwrap()) {
            assert!((p - t).abs() < 1e-10);
        }
    }

    #[test]
    fn integrating_a_constant_input() {
        let c = 0.25;
        let x = UniformSeries::single(0.1, "x", vec![c; 50]).unwrap();
        let mut truth = x.clone();
        truth.push_channel("y", vec![1.0; 50]).unwrap();
        let plan = ManifoldPlan {
            version: PLAN_VERSION,
            inputs: vec!["x".into()],
            reduction: None,
            auxiliaries: vec![AuxiliaryDef::transform("z1", "x", Transform::Integrate)],
            final_stage: AuxiliaryDef::model(
                "y",
                NarxSpec::new(
                    RegressorLayout::new("", LagSet::range(1, 1), vec![ExogenousLags::new("z1", LagSet::range(0, 0))]).unwrap(),
                    1,
                    1,
                )
                .unwrap()
                .with_standardize(false),
            ),
        };
        let tm = train_manifold(&plan, &[ManifoldData::from_series(truth)], 0).unwrap();
        let pred = predict_manifold(&tm, &ManifoldData::from_series(x.clone()), &StageInits::zeros()).unwrap();
        let z1 = pred.aux_traces[0].1.column(0);
        for (i, v) in z1.iter().enumerate() {
            assert!((v - c * x.time(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_transforms_commute() {
        let run = toy_run(100, 3);
        let make = |swap: bool| {
            let a = AuxiliaryDef::transform("ix", "x", Transform::Integrate);
            let b = AuxiliaryDef::transform("dz", "z", Transform::Differentiate);
            let mut plan = two_stage_plan();
            plan.auxiliaries = if swap { vec![b, a] } else { vec![a, b] };
            plan.final_stage = AuxiliaryDef::model("y", spec(1, &[("ix", 1), ("dz", 0)], 1));
            plan.inputs = vec!["x".into(), "z".into()];
            let tm = train_manifold(&plan, &[ManifoldData::from_series(run.clone())], 0).unwrap();
            let p = predict_manifold(&tm, &ManifoldData::from_series(run.clone()), &StageInits::zeros()).unwrap();
            (tm.final_model().clone(), p.output)
        };
        let (m1, o1) = make(false);
        let (m2, o2) = make(true);
        assert_eq!(m1, m2);
        assert_eq!(o1, o2);
    }

    #[test]
    fn plan_validation_errors() {
        let mut plan = two_stage_plan();
        plan.final_stage = AuxiliaryDef::model("y", spec(1, &[("w", 1)], 1));
        match plan.clone().validated() {
            Err(Error::Plan { stage, field, message }) => {
                assert_eq!(stage, "y");
                assert_eq!(field, "narx.layout.exogenous");
                assert!(message.contains("'w'"));
            }
            other => panic!("{other:?}"),
        }
        // consuming a channel produced later
        let mut cyclic = two_stage_plan();
        cyclic.auxiliaries[0] = AuxiliaryDef::model("z", spec(1, &[("y", 0)], 1));
        assert!(matches!(cyclic.validated(), Err(Error::CyclicPlan { .. })));

        let mut bad_final = two_stage_plan();
        bad_final.final_stage = AuxiliaryDef::transform("y", "x", Transform::Integrate);
        assert!(matches!(bad_final.validated(), Err(Error::Plan { field, .. }) if field == "kind"));
    }

    #[test]
    fn missing_ground_truth() {
        let run = toy_run(100, 4).select(&["x", "y"]).unwrap();
        let err = train_manifold(&two_stage_plan(), &[ManifoldData::from_series(run)], 0).unwrap_err();
        assert!(matches!(err, Error::MissingGroundTruth { ref stage, realization: 0 } if stage == "z"));
    }

    #[test]
    fn plan_json_round_trip() {
        let mut plan = two_stage_plan().validated().unwrap();
        plan.auxiliaries.push(AuxiliaryDef::transform("h", "z", Transform::Harmonics { k_max: 2 }));
        let text = plan.to_json().unwrap();
        assert!(text.contains("\"kind\": \"model\""));
        assert!(text.contains("\"id\": \"harmonics\""));
        assert_eq!(ManifoldPlan::from_json(&text).unwrap(), plan);
        let err = ManifoldPlan::from_json("{\"inputs\": [\"x\"],\n \"final\": 3}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn subsampling_is_seeded() {
        let ed: Vec<_> = (0..2).map(|s| ManifoldData::from_series(toy_run(300, s + 20))).collect();
        let mut plan = two_stage_plan();
        plan.final_stage = plan.final_stage.with_subsample(100);
        let a = train_manifold(&plan, &ed, 5).unwrap();
        let b = train_manifold(&plan, &ed, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.final_model().report().rows, 100);
    }

    #[test]
    fn prediction_errors_name_the_stage() {
        let ed: Vec<_> = (0..2).map(|s| ManifoldData::from_series(toy_run(200, s))).collect();
        let tm = train_manifold(&two_stage_plan(), &ed, 0).unwrap();
        let huge = UniformSeries::single(0.1, "x", vec![1e300; 50]).unwrap();
        let err = predict_manifold(&tm, &ManifoldData::from_series(huge), &StageInits::zeros()).unwrap_err();
        assert!(matches!(&err, Error::Stage { stage, .. } if stage == "z"), "{err}");
        assert!(err.is_numeric());
        let _ = teacher_forced;
    }
}
