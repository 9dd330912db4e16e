//! Validation metrics and method comparison reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_num, write_file};
use crate::manifold::{predict_manifold, ManifoldData, StageInits, TrainedManifold};
use crate::narx::{free_run, InitialConditions, NarxModel};

/// Root-mean-square of `truth - pred` over steps `>= skip`.
pub fn rmse(truth: &[f64], pred: &[f64], skip: usize) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if skip >= truth.len() {
        return Err(Error::Empty { skip });
    }
    let n = truth.len() - skip;
    let ss: f64 = truth[skip..]
        .iter()
        .zip(&pred[skip..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// Largest absolute value over steps `>= skip`.
pub fn peak_abs(values: &[f64], skip: usize) -> Result<f64> {
    if skip >= values.len() {
        return Err(Error::Empty { skip });
    }
    Ok(values[skip..].iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// How surrogates are started on a validation trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Copy the first values of the true output (validation mode).
    #[default]
    TrueOutput,
    Zeros,
}

/// Anything that maps a validation realization to a predicted trace of the
/// target quantity.
pub trait Predictor: Sync {
    /// Number of leading steps copied from the initial conditions.
    fn warmup(&self) -> usize;

    fn predict(&self, data: &ManifoldData, target: &str, init: InitMode) -> Result<Vec<f64>>;
}

fn truth<'a>(data: &'a ManifoldData, name: &str) -> Result<&'a [f64]> {
    data.series
        .as_ref()
        .ok_or_else(|| Error::ChannelMissing(name.to_string()))?
        .require(name)
}

impl Predictor for NarxModel {
    fn warmup(&self) -> usize {
        NarxModel::warmup(self)
    }

    fn predict(&self, data: &ManifoldData, target: &str, init: InitMode) -> Result<Vec<f64>> {
        let series = data
            .series
            .as_ref()
            .ok_or_else(|| Error::Invalid("NARX prediction needs an input series".into()))?;
        let n = NarxModel::warmup(self);
        let ic = match init {
            InitMode::TrueOutput => InitialConditions::from_trace(truth(data, target)?, n)?,
            InitMode::Zeros => InitialConditions::zeros(n),
        };
        Ok(free_run(self, series, &ic)?.column(0).to_vec())
    }
}

impl Predictor for TrainedManifold {
    fn warmup(&self) -> usize {
        self.final_model().warmup()
    }

    fn predict(&self, data: &ManifoldData, _target: &str, init: InitMode) -> Result<Vec<f64>> {
        let inits = match init {
            InitMode::TrueOutput => {
                let series = data
                    .series
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("true-output initialization needs the truth series".into()))?;
                StageInits::from_truth(self, series)?
            }
            InitMode::Zeros => StageInits::zeros(),
        };
        Ok(predict_manifold(self, data, &inits)?.output.column(0).to_vec())
    }
}

/// Returns the true trace. Useful as a self-comparison reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    fn warmup(&self) -> usize {
        0
    }

    fn predict(&self, data: &ManifoldData, target: &str, _init: InitMode) -> Result<Vec<f64>> {
        Ok(truth(data, target)?.to_vec())
    }
}

/// Predicts zero everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullPredictor;

impl Predictor for NullPredictor {
    fn warmup(&self) -> usize {
        0
    }

    fn predict(&self, data: &ManifoldData, target: &str, _init: InitMode) -> Result<Vec<f64>> {
        Ok(vec![0.0; truth(data, target)?.len()])
    }
}

/// One validation realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTrace {
    pub id: String,
    pub data: ManifoldData,
}

/// Result of one method on one trace. Failed predictions keep the error
/// message and leave the prediction statistics empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub id: String,
    pub rmse: Option<f64>,
    pub peak_true: f64,
    pub peak_pred: Option<f64>,
    /// False when the divergence guard tripped.
    pub stable: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_traces: usize,
    pub n_failed: usize,
    pub n_unstable: usize,
    pub rmse_median: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub rmse_q05: Option<f64>,
    pub rmse_q25: Option<f64>,
    pub rmse_q75: Option<f64>,
    pub rmse_q95: Option<f64>,
    /// Spearman correlation of predicted against true peaks.
    pub peak_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub summary: Summary,
    pub traces: Vec<TraceReport>,
    #[serde(skip)]
    pub predictions: Vec<Option<Vec<f64>>>,
}

/// Bin rule for error histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    #[default]
    FreedmanDiaconis,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Counts per method, in report order.
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub target: String,
    pub init: InitMode,
    /// Steps excluded from RMSE and peaks: the largest warm-up of any method.
    pub skip: usize,
    pub methods: Vec<MethodReport>,
    pub histogram: Histogram,
    #[serde(skip)]
    pub truth: Vec<(f64, f64, Vec<f64>)>,
}

impl ComparisonReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` for fewer than two pairs or a
/// constant side.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Equal-width bin edges covering `values`.
pub fn bin_edges(values: &[f64], rule: BinRule) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return vec![0.0, 1.0];
    }
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi <= lo {
        return vec![lo - 0.5, lo + 0.5];
    }
    let bins = match rule {
        BinRule::Count(n) => n.max(1),
        BinRule::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75).unwrap() - quantile(&sorted, 0.25).unwrap();
            let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
            if width > 0.0 {
                (((hi - lo) / width).ceil() as usize).clamp(1, 1000)
            } else {
                1
            }
        }
    };
    let w = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + w * i as f64).collect();
    edges.push(hi);
    edges
}

/// Counts per bin; the last bin is closed on the right.
pub fn histogram_counts(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        if !v.is_finite() || v < edges[0] || v > edges[bins] {
            continue;
        }
        let k = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

fn summarize(traces: &[TraceReport]) -> Summary {
    let mut errs: Vec<f64> = traces.iter().filter_map(|t| t.rmse).collect();
    errs.sort_by(f64::total_cmp);
    let (pt, pp): (Vec<f64>, Vec<f64>) = traces
        .iter()
        .filter_map(|t| t.peak_pred.map(|p| (t.peak_true, p)))
        .unzip();
    Summary {
        n_traces: traces.len(),
        n_failed: traces.iter().filter(|t| t.rmse.is_none()).count(),
        n_unstable: traces.iter().filter(|t| !t.stable).count(),
        rmse_median: quantile(&errs, 0.5),
        rmse_mean: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
        rmse_q05: quantile(&errs, 0.05),
        rmse_q25: quantile(&errs, 0.25),
        rmse_q75: quantile(&errs, 0.75),
        rmse_q95: quantile(&errs, 0.95),
        peak_spearman: spearman(&pt, &pp),
    }
}

/// Options for [`compare`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareOptions {
    pub init: InitMode,
    pub bins: BinRule,
}

/// Evaluates every method on every validation trace with identical
/// initialization. Prediction failures are recorded per trace.
pub fn compare(
    methods: &[(&str, &dyn Predictor)],
    validation: &[ValidationTrace],
    target: &str,
    options: CompareOptions,
) -> Result<ComparisonReport> {
    if methods.is_empty() {
        return Err(Error::Invalid("compare needs at least one method".into()));
    }
    for (i, (name, _)) in methods.iter().enumerate() {
        if methods[..i].iter().any(|(n, _)| n == name) {
            return Err(Error::Invalid(format!("method '{name}' listed twice")));
        }
    }
    let skip = methods.iter().map(|(_, m)| m.warmup()).max().unwrap_or(0);
    let truth_traces = validation
        .iter()
        .map(|v| {
            let s = v.data.series.as_ref().ok_or_else(|| Error::ChannelMissing(target.to_string()))?;
            Ok((s.t0(), s.dt(), s.require(target)?.to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let peaks_true = truth_traces
        .iter()
        .map(|(_, _, y)| peak_abs(y, skip))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(methods.len());
    for (name, method) in methods {
        let results: Vec<(TraceReport, Option<Vec<f64>>)> = validation
            .par_iter()
            .zip(&truth_traces)
            .zip(&peaks_true)
            .map(|((v, (_, _, y)), &peak_true)| {
                let outcome = method
                    .predict(&v.data, target, options.init)
                    .and_then(|p| Ok((rmse(y, &p, skip)?, peak_abs(&p, skip)?, p)));
                match outcome {
                    Ok((e, peak, p)) => (
                        TraceReport {
                            id: v.id.clone(),
                            rmse: Some(e),
                            peak_true,
                            peak_pred: Some(peak),
                            stable: true,
                            error: None,
                        },
                        Some(p),
                    ),
                    Err(err) => (
                        TraceReport {
                            id: v.id.clone(),
                            rmse: None,
                            peak_true,
                            peak_pred: None,
                            stable: !matches!(err.root(), Error::NumericBlowup { .. }),
                            error: Some(err.to_string()),
                        },
                        None,
                    ),
                }
            })
            .collect();
        let (traces, predictions): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        reports.push(MethodReport {
            name: name.to_string(),
            summary: summarize(&traces),
            traces,
            predictions,
        });
    }

    let mut pooled: Vec<f64> = reports
        .iter()
        .flat_map(|m| m.traces.iter().filter_map(|t| t.rmse))
        .collect();
    pooled.sort_by(f64::total_cmp);
    let edges = bin_edges(&pooled, options.bins);
    let counts = reports
        .iter()
        .map(|m| {
            let v: Vec<f64> = m.traces.iter().filter_map(|t| t.rmse).collect();
            histogram_counts(&v, &edges)
        })
        .collect();
    Ok(ComparisonReport {
        target: target.to_string(),
        init: options.init,
        skip,
        methods: reports,
        histogram: Histogram { edges, counts },
        truth: truth_traces,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Writes `report.json`, `scatter.csv`, `hist.csv` and
/// `traces/<method>/<id>.csv` under `dir`.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)? + "\n";
    write_file(&dir.join("report.json"), json.as_bytes())?;

    let mut scatter = String::from("method,id,peak_true,peak_pred,rmse\n");
    for m in &report.methods {
        for t in &m.traces {
            let _ = writeln!(
                scatter,
                "{},{},{},{},{}",
                m.name,
                t.id,
                fmt_num(t.peak_true),
                opt(t.peak_pred),
                opt(t.rmse)
            );
        }
    }
    write_file(&dir.join("scatter.csv"), scatter.as_bytes())?;

    let mut hist = String::from("method,bin_lo,bin_hi,count\n");
    let edges = &report.histogram.edges;
    for (m, counts) in report.methods.iter().zip(&report.histogram.counts) {
        for (k, c) in counts.iter().enumerate() {
            let _ = writeln!(hist, "{},{},{},{}", m.name, fmt_num(edges[k]), fmt_num(edges[k + 1]), c);
        }
    }
    write_file(&dir.join("hist.csv"), hist.as_bytes())?;

    for m in &report.methods {
        let sub = dir.join("traces").join(&m.name);
        for ((t, pred), (t0, dt, y)) in m.traces.iter().zip(&m.predictions).zip(&report.truth) {
            let Some(pred) = pred else { continue };
            let mut csv = String::from("t,y_true,y_pred\n");
            for (i, (a, b)) in y.iter().zip(pred).enumerate() {
                let _ = writeln!(csv, "{},{},{}", fmt_num(t0 + *dt * i as f64), fmt_num(*a), fmt_num(*b));
            }
            write_file(&sub.join(format!("{}.csv", t.id)), csv.as_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::UniformSeries;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trace(id: &str, y: Vec<f64>) -> ValidationTrace {
        ValidationTrace {
            id: id.into(),
            data: ManifoldData::from_series(UniformSeries::single(0.1, "y", y).unwrap()),
        }
    }

    fn random_traces(n: usize) -> Vec<ValidationTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..n)
            .map(|i| trace(&format!("v{i:03}"), (0..40).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect()
    }

    #[test]
    fn rmse_examples() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(rmse(&a, &a, 0).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert_eq!(rmse(&a, &b, 0).unwrap(), 1.0);
        assert!(matches!(rmse(&a, &b[..2], 0), Err(Error::LengthMismatch { .. })));
        assert!(matches!(rmse(&a, &b, 3), Err(Error::Empty { skip: 3 })));
        assert_eq!(rmse(&[9.0, 1.0], &[0.0, 1.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn peak_examples() {
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 100.0).sin()).collect();
        assert!((peak_abs(&s, 0).unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(peak_abs(&[-3.5; 4], 0).unwrap(), 3.5);
        assert!(matches!(peak_abs(&[1.0], 1), Err(Error::Empty { .. })));
    }

    proptest! {
        #[test]
        fn rmse_matches_two_pass(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..300), skip_frac in 0.0f64..1.0) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let skip = ((a.len() - 1) as f64 * skip_frac) as usize;
            let diffs: Vec<f64> = a[skip..].iter().zip(&b[skip..]).map(|(x, y)| x - y).collect();
            let mut sq = 0.0;
            for d in &diffs {
                sq += d.powi(2);
            }
            let naive = (sq / diffs.len() as f64).sqrt();
            prop_assert!((rmse(&a, &b, skip).unwrap() - naive).abs() <= 1e-12 * (1.0 + naive));
            let scan = a[skip..].iter().map(|v| v.abs()).fold(f64::MIN, f64::max);
            prop_assert_eq!(peak_abs(&a, skip).unwrap(), scan);
        }

        #[test]
        fn spearman_is_invariant_under_monotone_maps(v in proptest::collection::vec(-10.0f64..10.0, 3..50)) {
            let w: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            if let Some(r) = spearman(&v, &w) {
                prop_assert!((r - 1.0).abs() < 1e-12);
            }
            let neg: Vec<f64> = v.iter().map(|x| -x.exp()).collect();
            if let Some(r) = spearman(&v, &neg) {
                prop_assert!((r + 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn histogram_counts_every_value(v in proptest::collection::vec(0.0f64..5.0, 1..200), n in 1usize..30) {
            for rule in [BinRule::FreedmanDiaconis, BinRule::Count(n)] {
                let edges = bin_edges(&v, rule);
                prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(histogram_counts(&v, &edges).iter().sum::<usize>(), v.len());
            }
        }
    }

    #[test]
    fn spearman_with_ties() {
        // hand-computed: ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4)
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(quantile(&s, 0.5), Some(3.0));
        assert_eq!(quantile(&s, 0.0), Some(1.0));
        assert_eq!(quantile(&s, 1.0), Some(8.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn self_and_null_comparisons() {
        let val = random_traces(12);
        let report = compare(
            &[("oracle", &OraclePredictor), ("null", &NullPredictor)],
            &val,
            "y",
            CompareOptions::default(),
        )
        .unwrap();
        let oracle = report.method("oracle").unwrap();
        assert!(oracle.traces.iter().all(|t| t.rmse == Some(0.0) && t.peak_pred == Some(t.peak_true)));
        assert_eq!(oracle.summary.peak_spearman, Some(1.0));
        let null = report.method("null").unwrap();
        for (t, v) in null.traces.iter().zip(&val) {
            let y = v.data.series.as_ref().unwrap().column(0);
            let rms = (y.iter().map(|a| a * a).sum::<f64>() / y.len() as f64).sqrt();
            assert!((t.rmse.unwrap() - rms).abs() < 1e-14);
        }
    }

    #[test]
    fn method_order_only_permutes_sections() {
        let val = random_traces(8);
        let a = compare(&[("o", &OraclePredictor), ("n", &NullPredictor)], &val, "y", CompareOptions::default()).unwrap();
        let b = compare(&[("n", &NullPredictor), ("o", &OraclePredictor)], &val, "y", CompareOptions::default()).unwrap();
        assert_eq!(a.methods[0], b.methods[1]);
        assert_eq!(a.methods[1], b.methods[0]);
        assert_eq!(a.histogram.edges, b.histogram.edges);
        assert_eq!(a.histogram.counts[0], b.histogram.counts[1]);
    }

    struct Failing;
    impl Predictor for Failing {
        fn warmup(&self) -> usize {
            0
        }
        fn predict(&self, data: &ManifoldData, target: &str, _: InitMode) -> Result<Vec<f64>> {
            let y = truth(data, target)?;
            if y[0] > 0.0 {
                Err(Error::NumericBlowup {
                    step: 1,
                    value: 1e9,
                    guard: 1.0,
                })
            } else {
                Ok(y.to_vec())
            }
        }
    }

    #[test]
    fn failures_are_recorded_per_trace() {
        let val = random_traces(20);
        let report = compare(&[("f", &Failing)], &val, "y", CompareOptions::default()).unwrap();
        let m = &report.methods[0];
        let failed = val.iter().filter(|v| v.data.series.as_ref().unwrap().column(0)[0] > 0.0).count();
        assert!(failed > 0 && failed < 20);
        assert_eq!(m.summary.n_failed, failed);
        assert_eq!(m.summary.n_unstable, failed);
        assert!(m.traces.iter().filter(|t| !t.stable).all(|t| t.error.is_some()));
    }

    #[test]
    fn report_files_are_deterministic() {
        let val = random_traces(5);
        let report = compare(&[("o", &OraclePredictor), ("n", &NullPredictor)], &val, "y", CompareOptions::default()).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_report(&report, d1.path()).unwrap();
        write_report(&report, d2.path()).unwrap();
        for f in ["report.json", "scatter.csv", "hist.csv", "traces/o/v000.csv"] {
            assert_eq!(
                std::fs::read(d1.path().join(f)).unwrap(),
                std::fs::read(d2.path().join(f)).unwrap()
            );
        }
        let csv = std::fs::read_to_string(d1.path().join("traces/n/v004.csv")).unwrap();
        assert_eq!(csv.lines().count(), 41);
        assert!(csv.starts_with("t,y_true,y_pred\n"));
    }
}
