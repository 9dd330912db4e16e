//! File formats: series CSV with JSON sidecars, field sequences,
//! experimental-design directories, model files and trained manifolds.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every `f64` and makes reruns byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimreduce::{FieldSequence, Grid};
use crate::dynamics::{Excitation, SimConfig, SimulatedRun, SpringMassParams};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldPlan, TrainedManifold};
use crate::narx::NarxModel;
use crate::series::{same_dt, UniformSeries};

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_file(path, text.as_bytes())
}

/// Reads JSON, reporting parse and schema errors with the file name and
/// line/column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Hash of a file, or of every file below a directory (relative paths
/// and contents, in sorted order).
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_file() {
        return Ok(sha256_hex(&read_bytes(path)?));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(read_bytes(&path.join(&rel))?);
        h.update([0]);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

/// JSON sidecar of a series CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesHeader {
    pub dt: f64,
    pub t0: f64,
    pub n_steps: usize,
    pub channels: Vec<String>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn series_csv(s: &UniformSeries) -> String {
    let mut out = String::from("t");
    for name in s.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..s.len() {
        out.push_str(&fmt_num(s.time(i)));
        for c in 0..s.n_channels() {
            out.push(',');
            out.push_str(&fmt_num(s.column(c)[i]));
        }
        out.push('\n');
    }
    out
}

/// Writes `path` (CSV with header `t,<channels>`) and its `.json` sidecar.
pub fn write_series(path: &Path, s: &UniformSeries) -> Result<()> {
    write_file(path, series_csv(s).as_bytes())?;
    write_json(
        &sidecar(path),
        &SeriesHeader {
            dt: s.dt(),
            t0: s.t0(),
            n_steps: s.len(),
            channels: s.names().to_vec(),
        },
    )
}

/// Reads a series CSV and checks it against its sidecar.
pub fn read_series(path: &Path) -> Result<UniformSeries> {
    let header: SeriesHeader = read_json(&sidecar(path))?;
    let bytes = read_bytes(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if names.first().map(String::as_str) != Some("t") || names[1..] != header.channels[..] {
        return Err(Error::format(
            path,
            format!("line 1: header {:?} does not match sidecar channels {:?}", names, header.channels),
        ));
    }
    let mut columns = vec![Vec::with_capacity(header.n_steps); header.channels.len()];
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let parse = |k: usize| -> Result<f64> {
            record[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::format(path, format!("line {line}, column {}: {e}", k + 1)))
        };
        let t = parse(0)?;
        let expected = header.t0 + header.dt * i as f64;
        if (t - expected).abs() > 1e-9 * header.dt.max(expected.abs()) {
            return Err(Error::format(
                path,
                format!("line {line}: time {t} is off the uniform axis (expected {expected})"),
            ));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse(c + 1)?);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    if n != header.n_steps {
        return Err(Error::format(path, format!("{n} rows but the sidecar says {}", header.n_steps)));
    }
    UniformSeries::new(header.dt, header.t0, header.channels, columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldEncoding {
    /// One frame per line, row-major.
    Csv,
    /// Little-endian `f64`, frames back to back, row-major.
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub nu_y: usize,
    pub nu_z: usize,
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    pub n_frames: usize,
    pub encoding: FieldEncoding,
    /// Data file relative to the header; defaults to the header's stem
    /// with a `.csv` or `.bin` extension.
    #[serde(default)]
    pub data: Option<String>,
}

fn field_data_path(header_path: &Path, header: &FieldHeader) -> PathBuf {
    match &header.data {
        Some(f) => header_path.parent().unwrap_or(Path::new("")).join(f),
        None => header_path.with_extension(match header.encoding {
            FieldEncoding::Csv => "csv",
            FieldEncoding::Bin => "bin",
        }),
    }
}

/// Writes a JSON header at `header_path` plus the frame data next to it.
pub fn write_field(header_path: &Path, seq: &FieldSequence, encoding: FieldEncoding) -> Result<()> {
    let (nu_y, nu_z) = seq.dims();
    let header = FieldHeader {
        nu_y,
        nu_z,
        dt: seq.dt(),
        t0: seq.t0(),
        n_frames: seq.len(),
        encoding,
        data: None,
    };
    let data = match encoding {
        FieldEncoding::Csv => {
            let mut s = String::new();
            for f in seq.frames() {
                let row: Vec<String> = f.data().iter().map(|v| fmt_num(*v)).collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
        FieldEncoding::Bin => seq
            .frames()
            .iter()
            .flat_map(|f| f.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect(),
    };
    write_file(&field_data_path(header_path, &header), &data)?;
    write_json(header_path, &header)
}

pub fn read_field(header_path: &Path) -> Result<FieldSequence> {
    let header: FieldHeader = read_json(header_path)?;
    let path = field_data_path(header_path, &header);
    let per = header.nu_y * header.nu_z;
    let bytes = read_bytes(&path)?;
    let values: Vec<f64> = match header.encoding {
        FieldEncoding::Bin => {
            if bytes.len() != per * header.n_frames * 8 {
                return Err(Error::format(
                    &path,
                    format!("{} bytes, expected {}", bytes.len(), per * header.n_frames * 8),
                ));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect()
        }
        FieldEncoding::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes.as_slice());
            let mut out = Vec::with_capacity(per * header.n_frames);
            for (i, record) in rdr.records().enumerate() {
                let record = record.map_err(|e| Error::format(&path, e.to_string()))?;
                if record.len() != per {
                    return Err(Error::format(
                        &path,
                        format!("line {}: {} values, expected {per}", i + 1, record.len()),
                    ));
                }
                for (k, v) in record.iter().enumerate() {
                    out.push(v.trim().parse::<f64>().map_err(|e| {
                        Error::format(&path, format!("line {}, column {}: {e}", i + 1, k + 1))
                    })?);
                }
            }
            out
        }
    };
    if values.len() != per * header.n_frames {
        return Err(Error::format(
            &path,
            format!("{} frames, header says {}", values.len() / per.max(1), header.n_frames),
        ));
    }
    let frames = values
        .chunks_exact(per.max(1))
        .map(|c| Grid::new(header.nu_y, header.nu_z, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FieldSequence::new(header.dt, header.t0, frames)
}

pub const ED_SCHEMA: &str = "mnarx/ed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdRun {
    pub id: String,
    pub stream: u64,
    pub file: String,
    pub sha256: String,
    pub excitation: Excitation,
}

/// Manifest of an experimental-design directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdManifest {
    pub schema: String,
    pub seed: u64,
    pub params: SpringMassParams,
    pub config: SimConfig,
    pub runs: Vec<EdRun>,
}

/// Writes one CSV/JSON pair per run plus `manifest.json`.
pub fn write_ed(
    dir: &Path,
    seed: u64,
    params: &SpringMassParams,
    cfg: &SimConfig,
    runs: &[SimulatedRun],
) -> Result<EdManifest> {
    let mut entries = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let id = format!("run_{i:04}");
        let file = format!("{id}.csv");
        let path = dir.join(&file);
        write_series(&path, &run.series)?;
        entries.push(EdRun {
            id,
            stream: run.stream,
            file,
            sha256: sha256_hex(&read_bytes(&path)?),
            excitation: run.excitation.clone(),
        });
    }
    let manifest = EdManifest {
        schema: ED_SCHEMA.into(),
        seed,
        params: *params,
        config: *cfg,
        runs: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Reads an ED directory, verifying every run against its recorded hash.
pub fn read_ed(dir: &Path) -> Result<(EdManifest, Vec<(String, UniformSeries)>)> {
    let mpath = dir.join("manifest.json");
    let manifest: EdManifest = read_json(&mpath)?;
    if manifest.schema != ED_SCHEMA {
        return Err(Error::format(&mpath, format!("schema '{}' is not '{ED_SCHEMA}'", manifest.schema)));
    }
    let mut out = Vec::with_capacity(manifest.runs.len());
    for run in &manifest.runs {
        let path = dir.join(&run.file);
        let hash = sha256_hex(&read_bytes(&path)?);
        if hash != run.sha256 {
            return Err(Error::format(&path, "content hash does not match the manifest"));
        }
        out.push((run.id.clone(), read_series(&path)?));
    }
    Ok((manifest, out))
}

pub fn save_model(path: &Path, model: &NarxModel) -> Result<()> {
    write_file(path, (model.to_json()? + "\n").as_bytes())
}

pub fn load_model(path: &Path) -> Result<NarxModel> {
    NarxModel::from_json(&read_text(path)?).map_err(|e| match e {
        Error::Json(j) => Error::format(path, j.to_string()),
        other => other,
    })
}

/// Writes `plan.json` and `models/<stage>.json` for every fitted model.
pub fn save_manifold(dir: &Path, tm: &TrainedManifold) -> Result<Vec<PathBuf>> {
    write_json(&dir.join("plan.json"), tm.plan())?;
    let mut written = Vec::new();
    for (name, model) in tm.models() {
        let p = dir.join("models").join(format!("{name}.json"));
        save_model(&p, model)?;
        written.push(p);
    }
    if !tm.training_log().is_empty() {
        write_json(&dir.join("training_log.json"), tm.training_log())?;
    }
    Ok(written)
}

pub fn load_manifold(dir: &Path) -> Result<TrainedManifold> {
    let ppath = dir.join("plan.json");
    let plan: ManifoldPlan = read_json(&ppath)?;
    let mut models = BTreeMap::new();
    for def in plan.stages() {
        if matches!(def.kind, crate::manifold::StageKind::Model { .. }) {
            let p = dir.join("models").join(format!("{}.json", def.name));
            models.insert(def.name.clone(), load_model(&p)?);
        }
    }
    TrainedManifold::from_models(plan, models)
}

/// Reads a plan file, naming the file in parse and validation errors.
pub fn read_plan(path: &Path) -> Result<ManifoldPlan> {
    let plan: ManifoldPlan = read_json(path)?;
    plan.validated()
}

/// Checks that two series share a sampling step.
pub fn check_dt(expected: f64, found: f64) -> Result<()> {
    if same_dt(expected, found) {
        Ok(())
    } else {
        Err(Error::DtMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_ed;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(seed: u64) -> UniformSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 1e5 - 3.0).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.random_range(-1e-300..1e-300)).collect();
        UniformSeries::new(0.01, 2.5, vec!["x".into(), "y".into()], vec![a, b]).unwrap()
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_series(1);
        let p = dir.path().join("a/s.csv");
        write_series(&p, &s).unwrap();
        let back = read_series(&p).unwrap();
        assert_eq!(back, s);
        write_series(&dir.path().join("b.csv"), &back).unwrap();
        assert_eq!(read_bytes(&p).unwrap(), read_bytes(&dir.path().join("b.csv")).unwrap());
    }

    #[test]
    fn series_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_series(&p, &random_series(2)).unwrap();
        let text = read_text(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].replacen(',', ",oops", 1);
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        let err = read_series(&p).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        fs::write(sidecar(&p), "{\"dt\": 0.01,\n \"t0\": \"x\"}").unwrap();
        let err = read_series(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn field_round_trip_both_encodings() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames = (0..6)
            .map(|_| Grid::from_fn(4, 3, |_, _| rng.random_range(-5.0..5.0)).unwrap())
            .collect();
        let seq = FieldSequence::new(0.05, 0.0, frames).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for enc in [FieldEncoding::Csv, FieldEncoding::Bin] {
            let p = dir.path().join(format!("{enc:?}.json"));
            write_field(&p, &seq, enc).unwrap();
            assert_eq!(read_field(&p).unwrap(), seq);
        }
    }

    #[test]
    fn ed_directory_is_hashed_and_verified() {
        let cfg = SimConfig {
            duration: 1.0,
            ..SimConfig::default()
        };
        let params = SpringMassParams::default();
        let runs = build_ed(2, 42, &params, &cfg).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_ed(d1.path(), 42, &params, &cfg, &runs).unwrap();
        write_ed(d2.path(), 42, &params, &cfg, &runs).unwrap();
        assert_eq!(hash_path(d1.path()).unwrap(), hash_path(d2.path()).unwrap());
        let (m, series) = read_ed(d1.path()).unwrap();
        assert_eq!(m.runs.len(), 2);
        assert_eq!(series[1].1, runs[1].series);

        let f = d1.path().join("run_0001.csv");
        let mut text = read_text(&f).unwrap();
        text.push('\n');
        fs::write(&f, text).unwrap();
        assert!(read_ed(d1.path()).unwrap_err().to_string().contains("hash"));
    }
}
