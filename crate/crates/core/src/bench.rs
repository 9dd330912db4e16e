//! End-to-end spring-mass benchmark: a random experimental design, a
//! classic NARX baseline and an mNARX chain for the upper mass, and a
//! comparison on an out-of-sample validation set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{build_ed, build_validation_set, SimConfig, SimulatedRun, SpringMassParams};
use crate::error::Result;
use crate::io::{save_manifold, write_json};
use crate::manifold::{train_manifold, AuxiliaryDef, ManifoldData, ManifoldPlan, TrainedManifold, PLAN_VERSION};
use crate::metrics::{compare, write_report, BinRule, CompareOptions, ComparisonReport, InitMode, Predictor, ValidationTrace};
use crate::narx::{NarxModel, NarxSpec};
use crate::series::{ExogenousLags, LagSet, RegressorLayout};

fn linear_spec(output: &str, ar: LagSet, exo: Vec<ExogenousLags>) -> NarxSpec {
    let layout = RegressorLayout::new(output, ar, exo).expect("static layout");
    NarxSpec::new(layout, 1, 1).expect("static spec")
}

/// Lower mass: AR lags 1..3, excitation lags 0..2. 6 terms.
pub fn y1_spec() -> NarxSpec {
    linear_spec("y1", LagSet::range(1, 3), vec![ExogenousLags::new("x", LagSet::range(0, 2))])
}

/// Upper mass, classic NARX on the excitation alone: AR lags 1..20,
/// excitation lags 0..3. 24 terms.
pub fn narx_y2_spec() -> NarxSpec {
    linear_spec("y2", LagSet::range(1, 20), vec![ExogenousLags::new("x", LagSet::range(0, 3))])
}

/// Upper mass on the manifold `{x, y1}`: AR lags 1..3, excitation lags
/// 0..1, lower-mass lags 0..2. 8 terms.
pub fn mnarx_y2_spec() -> NarxSpec {
    linear_spec(
        "y2",
        LagSet::range(1, 3),
        vec![
            ExogenousLags::new("x", LagSet::range(0, 1)),
            ExogenousLags::new("y1", LagSet::range(0, 2)),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchModels {
    pub y1: NarxSpec,
    pub narx_y2: NarxSpec,
    pub mnarx_y2: NarxSpec,
}

impl Default for BenchModels {
    fn default() -> Self {
        Self {
            y1: y1_spec(),
            narx_y2: narx_y2_spec(),
            mnarx_y2: mnarx_y2_spec(),
        }
    }
}

impl BenchModels {
    pub fn mnarx_plan(&self) -> ManifoldPlan {
        ManifoldPlan {
            version: PLAN_VERSION,
            inputs: vec!["x".into()],
            reduction: None,
            auxiliaries: vec![AuxiliaryDef::model("y1", self.y1.clone())],
            final_stage: AuxiliaryDef::model("y2", self.mnarx_y2.clone()),
        }
    }

    pub fn narx_y2_plan(&self) -> ManifoldPlan {
        ManifoldPlan::single(&["x"], AuxiliaryDef::model("y2", self.narx_y2.clone()))
    }

    pub fn y1_plan(&self) -> ManifoldPlan {
        ManifoldPlan::single(&["x"], AuxiliaryDef::model("y1", self.y1.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub params: SpringMassParams,
    pub sim: SimConfig,
    pub models: BenchModels,
    pub init: InitMode,
    pub bins: BinRule,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_train: 5,
            n_validation: 100,
            params: SpringMassParams::default(),
            sim: SimConfig::default(),
            models: BenchModels::default(),
            init: InitMode::TrueOutput,
            bins: BinRule::FreedmanDiaconis,
        }
    }
}

/// Headline numbers of a bench run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub y1_unstable: usize,
    pub y1_failed: usize,
    pub y1_rmse_median: Option<f64>,
    pub narx_y2_rmse_median: Option<f64>,
    pub mnarx_y2_rmse_median: Option<f64>,
    pub narx_y2_peak_spearman: Option<f64>,
    pub mnarx_y2_peak_spearman: Option<f64>,
    pub narx_y2_failed: usize,
    pub mnarx_y2_failed: usize,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub y1_model: NarxModel,
    pub narx_y2: TrainedManifold,
    pub mnarx: TrainedManifold,
    pub y1: ComparisonReport,
    pub y2: ComparisonReport,
    pub summary: BenchSummary,
}

fn as_data(runs: &[SimulatedRun]) -> Vec<ManifoldData> {
    runs.iter().map(|r| ManifoldData::from_series(r.series.clone())).collect()
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    let ed = build_ed(cfg.n_train, cfg.seed, &cfg.params, &cfg.sim)?;
    let val = build_validation_set(cfg.n_validation, cfg.seed, &cfg.params, &cfg.sim)?;
    let ed = as_data(&ed);
    let validation: Vec<ValidationTrace> = as_data(&val)
        .into_iter()
        .enumerate()
        .map(|(i, data)| ValidationTrace {
            id: format!("val_{i:04}"),
            data,
        })
        .collect();

    let mnarx = train_manifold(&cfg.models.mnarx_plan(), &ed, cfg.seed)?;
    let narx_y2 = train_manifold(&cfg.models.narx_y2_plan(), &ed, cfg.seed)?;
    let y1_model = mnarx.models()["y1"].clone();

    let options = CompareOptions {
        init: cfg.init,
        bins: cfg.bins,
    };
    let y1 = compare(&[("narx", &y1_model as &dyn Predictor)], &validation, "y1", options)?;
    let y2 = compare(
        &[("narx", &narx_y2 as &dyn Predictor), ("mnarx", &mnarx as &dyn Predictor)],
        &validation,
        "y2",
        options,
    )?;

    let s1 = &y1.methods[0].summary;
    let (sn, sm) = (&y2.methods[0].summary, &y2.methods[1].summary);
    let summary = BenchSummary {
        seed: cfg.seed,
        n_train: cfg.n_train,
        n_validation: cfg.n_validation,
        y1_unstable: s1.n_unstable,
        y1_failed: s1.n_failed,
        y1_rmse_median: s1.rmse_median,
        narx_y2_rmse_median: sn.rmse_median,
        mnarx_y2_rmse_median: sm.rmse_median,
        narx_y2_peak_spearman: sn.peak_spearman,
        mnarx_y2_peak_spearman: sm.peak_spearman,
        narx_y2_failed: sn.n_failed,
        mnarx_y2_failed: sm.n_failed,
    };
    Ok(BenchResult {
        config: cfg.clone(),
        y1_model,
        narx_y2,
        mnarx,
        y1,
        y2,
        summary,
    })
}

/// Writes `config.json`, `summary.json`, the trained models and one
/// report directory per quantity (`y1/`, `y2/`).
pub fn write_bench(dir: &Path, result: &BenchResult) -> Result<()> {
    write_json(&dir.join("config.json"), &result.config)?;
    write_json(&dir.join("summary.json"), &result.summary)?;
    save_manifold(&dir.join("models/mnarx"), &result.mnarx)?;
    save_manifold(&dir.join("models/narx_y2"), &result.narx_y2)?;
    write_report(&result.y1, &dir.join("y1"))?;
    write_report(&result.y2, &dir.join("y2"))
}
