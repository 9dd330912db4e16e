//! `mnarx` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numeric
//! failure, 4 I/O error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mnarx::bench::{run_bench, write_bench, BenchConfig};
use mnarx::dimreduce::{reduce, DctReduction};
use mnarx::dynamics::{build_ed, build_validation_set, SimConfig, SpringMassParams, UnitMode};
use mnarx::io::{
    hash_path, load_manifold, read_ed, read_field, read_json, read_plan, read_series, save_manifold, write_ed,
    write_json, write_series,
};
use mnarx::manifold::{predict_manifold, train_manifold, ManifoldData, StageInits};
use mnarx::metrics::{compare, write_report, BinRule, CompareOptions, InitMode, Predictor, ValidationTrace};

#[derive(Parser, Debug)]
#[command(name = "mnarx", version, about = "Manifold NARX surrogate modelling")]
struct Cli {
    /// Global seed.
    #[arg(long, global = true, env = "MNARX_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Stiffness units of the spring-mass oracle: si or literal.
    #[arg(long, global = true)]
    units: Option<String>,
    /// JSON config; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate spring-mass runs into an experimental-design directory.
    Simulate {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Draw from the validation streams instead of the training streams.
        #[arg(long)]
        validation: bool,
    },
    /// DCT-reduce a field sequence to a series of low-order modes.
    Reduce {
        /// Field header JSON.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Retained modes as `<n_i>x<n_j>`.
        #[arg(long)]
        keep: Option<String>,
    },
    /// Fit every model stage of a plan on an experimental design.
    Train {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        ed: Option<PathBuf>,
    },
    /// Run a trained manifold on one input series.
    Predict {
        /// Trained-manifold directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Input series CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Optional field header JSON for plans with a reduction stage.
        #[arg(long)]
        field: Option<PathBuf>,
        /// `zeros` or `true_output` (initial values taken from the input series).
        #[arg(long)]
        init: Option<String>,
    },
    /// Compare trained manifolds on a validation directory.
    Evaluate {
        /// `name=dir`, repeatable.
        #[arg(long = "method")]
        methods: Vec<String>,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Full spring-mass benchmark: design, training, validation, reports.
    Bench {
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        validation: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
    },
}

/// Error class, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Validation = 2,
    Numeric = 3,
    Io = 4,
}

fn classify(err: &anyhow::Error) -> Class {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mnarx::Error>() {
            return if e.is_io() {
                Class::Io
            } else if e.is_numeric() {
                Class::Numeric
            } else {
                Class::Validation
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return Class::Io;
        }
    }
    Class::Validation
}

/// Resolved global options.
#[derive(Debug, Clone, Serialize)]
struct Globals {
    seed: Option<u64>,
    units: UnitMode,
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a T,
    inputs: BTreeMap<String, String>,
}

fn write_manifest<T: Serialize>(dir: &Path, command: &str, config: &T, inputs: &[&Path]) -> anyhow::Result<()> {
    let mut hashes = BTreeMap::new();
    for p in inputs {
        hashes.insert(p.display().to_string(), hash_path(p)?);
    }
    write_json(
        &dir.join("manifest.json"),
        &RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: hashes,
        },
    )?;
    Ok(())
}

/// Overlays `config[section]` onto the flag values.
fn resolve<T: Serialize + DeserializeOwned>(flags: T, config: &Value, section: &str) -> anyhow::Result<T> {
    let mut merged = serde_json::to_value(flags)?;
    if let Some(over) = config.get(section) {
        let over = over
            .as_object()
            .ok_or_else(|| anyhow!("config: section '{section}' must be an object"))?;
        let target = merged.as_object_mut().expect("parameter blocks are structs");
        for (k, v) in over {
            target.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(merged).map_err(|e| anyhow!("config: section '{section}': {e}"))
}

fn need<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow!("missing required --{flag}"))
}

fn out_dir(g: &Globals) -> anyhow::Result<&Path> {
    g.out.as_deref().ok_or_else(|| anyhow!("missing required --out"))
}

fn parse_init(s: Option<&str>) -> anyhow::Result<InitMode> {
    match s.unwrap_or("true_output") {
        "true_output" | "truth" => Ok(InitMode::TrueOutput),
        "zeros" => Ok(InitMode::Zeros),
        other => bail!("--init must be 'true_output' or 'zeros', got '{other}'"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    seed: u64,
    runs: usize,
    validation: bool,
    params: SpringMassParams,
    sim: SimConfig,
}

fn cmd_simulate(g: &Globals, config: &Value, runs: Option<usize>, duration: Option<f64>, dt: Option<f64>, validation: bool) -> anyhow::Result<()> {
    let mut sim = SimConfig {
        units: g.units,
        ..SimConfig::default()
    };
    if let Some(d) = duration {
        sim.duration = d;
    }
    if let Some(d) = dt {
        sim.dt = d;
    }
    let p = resolve(
        SimulateParams {
            seed: g.seed.unwrap_or(0),
            runs: runs.unwrap_or(5),
            validation,
            params: SpringMassParams::default(),
            sim,
        },
        config,
        "simulate",
    )?;
    if p.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let out = out_dir(g)?;
    let runs = if p.validation {
        build_validation_set(p.runs, p.seed, &p.params, &p.sim)?
    } else {
        build_ed(p.runs, p.seed, &p.params, &p.sim)?
    };
    write_ed(out, p.seed, &p.params, &p.sim, &runs)?;
    println!("wrote {} runs to {}", runs.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReduceParams {
    field: PathBuf,
    n_i: usize,
    n_j: usize,
}

fn parse_keep(s: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| anyhow!("--keep must look like 3x3, got '{s}'"))?;
    Ok((
        a.trim().parse().with_context(|| format!("--keep '{s}'"))?,
        b.trim().parse().with_context(|| format!("--keep '{s}'"))?,
    ))
}

fn cmd_reduce(g: &Globals, config: &Value, field: Option<PathBuf>, keep: Option<String>) -> anyhow::Result<()> {
    let (n_i, n_j) = parse_keep(keep.as_deref().unwrap_or("3x3"))?;
    let p = resolve(
        ReduceParams {
            field: field.unwrap_or_default(),
            n_i,
            n_j,
        },
        config,
        "reduce",
    )?;
    if p.field.as_os_str().is_empty() {
        bail!("missing required --field");
    }
    let out = out_dir(g)?;
    let seq = read_field(&p.field)?;
    let series = reduce(&seq, &DctReduction::new(p.n_i, p.n_j))?;
    write_series(&out.join("reduced.csv"), &series)?;
    write_manifest(out, "reduce", &p, &[&p.field])?;
    println!("reduced {} frames to {} channels", seq.len(), series.n_channels());
    Ok(())
}

/// Loads a directory of realizations: an ED manifest when present, else
/// every `*.csv` series in name order. A `<stem>.field.json` next to a
/// series supplies its field input.
fn load_realizations(dir: &Path) -> anyhow::Result<Vec<(String, ManifoldData)>> {
    let series: Vec<(String, mnarx::series::UniformSeries)> = if dir.join("manifest.json").exists() {
        read_ed(dir)?.1
    } else {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| mnarx::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok((id, read_series(&p)?))
            })
            .collect::<anyhow::Result<_>>()?
    };
    if series.is_empty() {
        bail!("{}: no realizations found", dir.display());
    }
    series
        .into_iter()
        .map(|(id, s)| {
            let fpath = dir.join(format!("{id}.field.json"));
            let field = if fpath.exists() { Some(read_field(&fpath)?) } else { None };
            Ok((
                id,
                ManifoldData {
                    series: Some(s),
                    field,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainParams {
    seed: u64,
    plan: PathBuf,
    ed: PathBuf,
}

fn cmd_train(g: &Globals, config: &Value, plan: Option<PathBuf>, ed: Option<PathBuf>) -> anyhow::Result<()> {
    let p = resolve(
        TrainParams {
            seed: g.seed.unwrap_or(0),
            plan: need(plan, "plan")?,
            ed: need(ed, "ed")?,
        },
        config,
        "train",
    )?;
    let out = out_dir(g)?;
    let plan = read_plan(&p.plan)?;
    let data: Vec<ManifoldData> = load_realizations(&p.ed)?.into_iter().map(|(_, d)| d).collect();
    let tm = train_manifold(&plan, &data, p.seed)?;
    let files = save_manifold(out, &tm)?;
    write_manifest(out, "train", &p, &[&p.plan, &p.ed])?;
    for (name, m) in tm.models() {
        let r = m.report();
        println!(
            "{name}: {} terms, {} rows, residual rms {:.3e}, rank {}",
            m.coefficients().len(),
            r.rows,
            r.residual_rms,
            r.rank
        );
    }
    println!("wrote {} model files to {}", files.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictParams {
    model: PathBuf,
    input: PathBuf,
    field: Option<PathBuf>,
    init: InitMode,
}

fn cmd_predict(
    g: &Globals,
    config: &Value,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    field: Option<PathBuf>,
    init: Option<String>,
) -> anyhow::Result<()> {
    let p = resolve(
        PredictParams {
            model: need(model, "model")?,
            input: need(input, "input")?,
            field,
            init: parse_init(Some(init.as_deref().unwrap_or("zeros")))?,
        },
        config,
        "predict",
    )?;
    let out = out_dir(g)?;
    let tm = load_manifold(&p.model)?;
    let series = read_series(&p.input)?;
    let inits = match p.init {
        InitMode::TrueOutput => StageInits::from_truth(&tm, &series)?,
        InitMode::Zeros => StageInits::zeros(),
    };
    let data = ManifoldData {
        series: Some(series),
        field: p.field.as_deref().map(read_field).transpose()?,
    };
    let pred = predict_manifold(&tm, &data, &inits)?;
    write_series(&out.join("prediction.csv"), &pred.output)?;
    for (name, s) in &pred.aux_traces {
        write_series(&out.join("aux").join(format!("{name}.csv")), s)?;
    }
    write_json(&out.join("provenance.json"), &pred.log)?;
    let mut inputs: Vec<&Path> = vec![&p.model, &p.input];
    if let Some(f) = &p.field {
        inputs.push(f);
    }
    write_manifest(out, "predict", &p, &inputs)?;
    println!("predicted {} steps of '{}'", pred.output.len(), pred.output.names()[0]);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateParams {
    methods: BTreeMap<String, PathBuf>,
    validation: PathBuf,
    target: String,
    init: InitMode,
    bins: BinRule,
}

fn cmd_evaluate(
    g: &Globals,
    config: &Value,
    methods: Vec<String>,
    validation: Option<PathBuf>,
    target: Option<String>,
    init: Option<String>,
    bins: Option<usize>,
) -> anyhow::Result<()> {
    let mut map = BTreeMap::new();
    for m in &methods {
        let (name, dir) = m
            .split_once('=')
            .ok_or_else(|| anyhow!("--method must be name=dir, got '{m}'"))?;
        if map.insert(name.to_string(), PathBuf::from(dir)).is_some() {
            bail!("method '{name}' given twice");
        }
    }
    let p = resolve(
        EvaluateParams {
            methods: map,
            validation: need(validation, "validation")?,
            target: need(target, "target")?,
            init: parse_init(init.as_deref())?,
            bins: bins.map_or(BinRule::FreedmanDiaconis, BinRule::Count),
        },
        config,
        "evaluate",
    )?;
    if p.methods.is_empty() {
        bail!("at least one --method is required");
    }
    let out = out_dir(g)?;
    let models = p
        .methods
        .iter()
        .map(|(name, dir)| Ok((name.clone(), load_manifold(dir)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let val: Vec<ValidationTrace> = load_realizations(&p.validation)?
        .into_iter()
        .map(|(id, data)| ValidationTrace { id, data })
        .collect();
    let refs: Vec<(&str, &dyn Predictor)> = models.iter().map(|(n, m)| (n.as_str(), m as &dyn Predictor)).collect();
    let report = compare(
        &refs,
        &val,
        &p.target,
        CompareOptions {
            init: p.init,
            bins: p.bins,
        },
    )?;
    write_report(&report, out)?;
    let mut inputs: Vec<&Path> = p.methods.values().map(PathBuf::as_path).collect();
    inputs.push(&p.validation);
    write_manifest(out, "evaluate", &p, &inputs)?;
    for m in &report.methods {
        println!(
            "{}: median rmse {}, failed {}/{}",
            m.name,
            m.summary.rmse_median.map_or("n/a".into(), |v| format!("{v:.4e}")),
            m.summary.n_failed,
            m.summary.n_traces
        );
    }
    Ok(())
}

fn cmd_bench(g: &Globals, config: &Value, train: Option<usize>, validation: Option<usize>, duration: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = BenchConfig::default();
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.sim.units = g.units;
    if let Some(n) = train {
        cfg.n_train = n;
    }
    if let Some(n) = validation {
        cfg.n_validation = n;
    }
    if let Some(d) = duration {
        cfg.sim.duration = d;
    }
    let cfg = resolve(cfg, config, "bench")?;
    let out = out_dir(g)?;
    let result = run_bench(&cfg)?;
    write_bench(out, &result)?;
    write_manifest(out, "bench", &cfg, &[])?;
    let s = &result.summary;
    let f = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.4e}"));
    println!("y1 narx: median rmse {}, unstable {}/{}", f(s.y1_rmse_median), s.y1_unstable, s.n_validation);
    println!(
        "y2 narx: median rmse {}, peak spearman {}",
        f(s.narx_y2_rmse_median),
        f(s.narx_y2_peak_spearman)
    );
    println!(
        "y2 mnarx: median rmse {}, peak spearman {}",
        f(s.mnarx_y2_rmse_median),
        f(s.mnarx_y2_peak_spearman)
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config: Value = match &cli.config {
        Some(p) => read_json(p)?,
        None => Value::Object(Default::default()),
    };
    if !config.is_object() {
        bail!("config: top level must be an object");
    }
    let get = |k: &str| config.get(k).cloned();
    let seed = match get("seed") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| anyhow!("config: 'seed': {e}"))?),
        None => cli.seed,
    };
    let units_str = match get("units") {
        Some(Value::String(s)) => Some(s),
        Some(other) => bail!("config: 'units' must be a string, got {other}"),
        None => cli.units.clone(),
    };
    let units: UnitMode = units_str.as_deref().unwrap_or("si").parse()?;
    let threads = match get("threads") {
        Some(v) => Some(serde_json::from_value::<usize>(v).map_err(|e| anyhow!("config: 'threads': {e}"))?),
        None => cli.threads,
    };
    let out = match get("out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => bail!("config: 'out' must be a string, got {other}"),
        None => cli.out.clone(),
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let g = Globals { seed, units, out };
    match cli.command {
        Command::Simulate {
            runs,
            duration,
            dt,
            validation,
        } => cmd_simulate(&g, &config, runs, duration, dt, validation),
        Command::Reduce { field, keep } => cmd_reduce(&g, &config, field, keep),
        Command::Train { plan, ed } => cmd_train(&g, &config, plan, ed),
        Command::Predict {
            model,
            input,
            field,
            init,
        } => cmd_predict(&g, &config, model, input, field, init),
        Command::Evaluate {
            methods,
            validation,
            target,
            init,
            bins,
        } => cmd_evaluate(&g, &config, methods, validation, target, init, bins),
        Command::Bench {
            train,
            validation,
            duration,
        } => cmd_bench(&g, &config, train, validation, duration),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err) as u8)
        }
    }
}
