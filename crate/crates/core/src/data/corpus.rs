//! CSV and manifest formats.
//!
//! - features: `time_s,f0,..,f{D-1}`
//! - annotations: `time_s,a1,..,aN`, any uniform rate, values in [-1, 1]
//! - ground truth: `time_s,latent,delay_1,..,delay_N`
//! - manifest: `id<TAB>partition<TAB>features.csv<TAB>annotations.csv`,
//!   paths relative to the manifest's directory

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::trace::{AnnotationSet, FeatureMatrix, TraceSequence};

use super::resample::resample_linear;
use super::{DataError, GroundTruth, Partition, Recording};

pub const MANIFEST_NAME: &str = "manifest.tsv";

const RANGE_TOLERANCE: f64 = 1e-6;
const TIME_TOLERANCE_S: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LoadFailure {
    pub file: String,
    /// 1-based line number in the file, when the failure is row-specific.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for LoadFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

/// Itemized list of hard failures from a corpus load.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub failures: Vec<LoadFailure>,
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus load failed with {} error(s):", self.failures.len())?;
        for fail in &self.failures {
            writeln!(f, "  {fail}")?;
        }
        Ok(())
    }
}

fn fail(file: &Path, line: Option<usize>, message: impl Into<String>) -> LoadFailure {
    LoadFailure {
        file: file.display().to_string(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Parsed numeric table: header plus rows, with row line numbers.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    lines: Vec<usize>,
}

fn read_table(path: &Path) -> Result<Table, Vec<LoadFailure>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| vec![fail(path, None, e.to_string())])?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| vec![fail(path, None, e.to_string())])?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for rec in reader.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map(|p| p.line() as usize);
                let parsed: Result<Vec<f64>, _> = r.iter().map(str::parse::<f64>).collect();
                match parsed {
                    Ok(v) => {
                        rows.push(v);
                        lines.push(line.unwrap_or(0));
                    }
                    Err(e) => failures.push(fail(path, line, format!("unparseable number: {e}"))),
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize);
                failures.push(fail(path, line, e.to_string()));
            }
        }
    }
    if !failures.is_empty() {
        return Err(failures);
    }
    if rows.is_empty() {
        return Err(vec![fail(path, None, "no data rows")]);
    }
    Ok(Table { header, rows, lines })
}

fn rate_from_times(path: &Path, times: &[f64]) -> Result<f64, Vec<LoadFailure>> {
    if times.len() < 2 {
        return Err(vec![fail(path, None, "need at least two rows to infer the sample rate")]);
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(vec![fail(path, None, "time_s must increase")]);
    }
    let dt = span / (times.len() - 1) as f64;
    for (i, t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * dt)).abs() > TIME_TOLERANCE_S.max(dt * 1e-3) {
            return Err(vec![fail(path, Some(i + 2), format!("non-uniform time stamp {t}"))]);
        }
    }
    Ok(1.0 / dt)
}

pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix, Vec<LoadFailure>> {
    let table = read_table(path)?;
    if table.header.first().map(String::as_str) != Some("time_s") || table.header.len() < 2 {
        return Err(vec![fail(path, Some(1), "header must be `time_s,f0,..`")]);
    }
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let rate = rate_from_times(path, &times)?;
    let dims = table.header.len() - 1;
    let data: Vec<f64> = table.rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    FeatureMatrix::new(data, dims, rate).map_err(|e| vec![fail(path, None, e.to_string())])
}

pub fn read_annotations_csv(path: &Path) -> Result<AnnotationSet, Vec<LoadFailure>> {
    let table = read_table(path)?;
    if table.header.first().map(String::as_str) != Some("time_s") || table.header.len() < 2 {
        return Err(vec![fail(path, Some(1), "header must be `time_s,a1,..`")]);
    }
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let rate = rate_from_times(path, &times)?;
    let n = table.header.len() - 1;
    let mut traces = vec![Vec::with_capacity(table.rows.len()); n];
    let mut failures = Vec::new();
    for (row, &line) in table.rows.iter().zip(&table.lines) {
        for (a, &v) in row[1..].iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + RANGE_TOLERANCE {
                failures.push(fail(
                    path,
                    Some(line),
                    format!("annotator {} value {v} outside [-1, 1]", a + 1),
                ));
            }
            traces[a].push(v.clamp(-1.0, 1.0));
        }
    }
    if !failures.is_empty() {
        return Err(failures);
    }
    AnnotationSet::new(traces, rate).map_err(|e| vec![fail(path, None, e.to_string())])
}

pub fn read_truth_csv(path: &Path) -> Result<GroundTruth, Vec<LoadFailure>> {
    let table = read_table(path)?;
    if table.header.len() < 2 || table.header[1] != "latent" {
        return Err(vec![fail(path, Some(1), "header must be `time_s,latent,delay_1,..`")]);
    }
    let n = table.header.len() - 2;
    let latent = table.rows.iter().map(|r| r[1]).collect();
    let delays = (0..n).map(|a| table.rows.iter().map(|r| r[2 + a]).collect()).collect();
    Ok(GroundTruth { latent, delays })
}

fn write_rows(path: &Path, header: Vec<String>, rate: f64, rows: usize, row: impl Fn(usize) -> Vec<f64>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut fields = Vec::new();
    for t in 0..rows {
        fields.clear();
        fields.push((t as f64 / rate).to_string());
        fields.extend(row(t).into_iter().map(|v| v.to_string()));
        w.write_record(&fields).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_features_csv(path: &Path, m: &FeatureMatrix) -> Result<(), DataError> {
    let header = std::iter::once("time_s".to_string()).chain((0..m.dims()).map(|d| format!("f{d}"))).collect();
    write_rows(path, header, m.frame_rate, m.frames(), |t| m.row(t).to_vec())
}

pub fn write_annotations_csv(path: &Path, a: &AnnotationSet) -> Result<(), DataError> {
    let header = std::iter::once("time_s".to_string())
        .chain((1..=a.num_annotators()).map(|n| format!("a{n}")))
        .collect();
    write_rows(path, header, a.sample_rate(), a.len(), |t| a.traces().iter().map(|tr| tr[t]).collect())
}

pub fn write_truth_csv(path: &Path, rate: f64, truth: &GroundTruth) -> Result<(), DataError> {
    let header = ["time_s".to_string(), "latent".to_string()]
        .into_iter()
        .chain((1..=truth.delays.len()).map(|n| format!("delay_{n}")))
        .collect();
    write_rows(path, header, rate, truth.latent.len(), |t| {
        std::iter::once(truth.latent[t]).chain(truth.delays.iter().map(|d| d[t])).collect()
    })
}

/// Writes `{dir}/{partition}/{id}_{features,annotations,truth}.csv` and the
/// manifest. Returns the manifest path.
pub fn write_corpus(dir: &Path, recordings: &[Recording]) -> Result<PathBuf, DataError> {
    let mut manifest = String::new();
    for r in recordings {
        let sub = dir.join(r.partition.to_string());
        fs::create_dir_all(&sub).map_err(|e| io_err(&sub, e))?;
        let feat = format!("{}/{}_features.csv", r.partition, r.id);
        let ann = format!("{}/{}_annotations.csv", r.partition, r.id);
        write_features_csv(&dir.join(&feat), &r.features)?;
        write_annotations_csv(&dir.join(&ann), &r.annotations)?;
        if let Some(truth) = &r.truth {
            let p = dir.join(format!("{}/{}_truth.csv", r.partition, r.id));
            write_truth_csv(&p, r.sample_rate(), truth)?;
        }
        manifest.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.partition, feat, ann));
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Reads a manifest and every file it lists, resampling annotations to the
/// feature rate and trimming both to a common length.
///
/// Ground-truth sidecars named `{id}_truth.csv` next to the annotation file
/// are attached when present.
pub fn load_corpus(manifest: &Path) -> Result<Vec<Recording>, DataError> {
    let text = fs::read_to_string(manifest).map_err(|e| io_err(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            report.failures.push(fail(manifest, Some(i + 1), format!("expected 4 tab-separated fields, got {}", cols.len())));
            continue;
        }
        let partition = match cols[1].parse::<Partition>() {
            Ok(p) => p,
            Err(e) => {
                report.failures.push(fail(manifest, Some(i + 1), e.to_string()));
                continue;
            }
        };
        let fpath = base.join(cols[2]);
        let apath = base.join(cols[3]);
        let features = read_features_csv(&fpath);
        let annotations = read_annotations_csv(&apath);
        let (mut features, annotations) = match (features, annotations) {
            (Ok(f), Ok(a)) => (f, a),
            (f, a) => {
                report.failures.extend(f.err().into_iter().flatten());
                report.failures.extend(a.err().into_iter().flatten());
                continue;
            }
        };
        let rate = features.frame_rate;
        let mut traces = Vec::with_capacity(annotations.num_annotators());
        for tr in annotations.traces() {
            let seq = TraceSequence::new(tr.clone(), annotations.sample_rate()).map_err(|e| DataError::Invalid(e.to_string()))?;
            match resample_linear(&seq, rate) {
                Ok(r) => traces.push(r.values),
                Err(e) => report.failures.push(fail(&apath, None, e.to_string())),
            }
        }
        if traces.len() != annotations.num_annotators() {
            continue;
        }
        let len = features.frames().min(traces[0].len());
        let longest = features.frames().max(traces[0].len());
        if longest - len > (longest / 100).max(2) {
            report.failures.push(fail(
                &apath,
                None,
                format!("annotations cover {} frames but features cover {}", traces[0].len(), features.frames()),
            ));
            continue;
        }
        features.truncate(len);
        let mut annotations = AnnotationSet::new(traces, rate).map_err(|e| DataError::Invalid(e.to_string()))?;
        annotations.truncate(len);
        let truth_path = apath.with_file_name(format!("{}_truth.csv", cols[0]));
        let truth = if truth_path.exists() {
            match read_truth_csv(&truth_path) {
                Ok(mut t) => {
                    t.latent.truncate(len);
                    t.delays.iter_mut().for_each(|d| d.truncate(len));
                    Some(t)
                }
                Err(f) => {
                    report.failures.extend(f);
                    continue;
                }
            }
        } else {
            None
        };
        out.push(Recording {
            id: cols[0].to_string(),
            partition,
            features,
            annotations,
            truth,
        });
    }
    if !report.failures.is_empty() {
        return Err(DataError::Load(report));
    }
    if out.is_empty() {
        return Err(DataError::Invalid(format!("{} lists no recordings", manifest.display())));
    }
    Ok(out)
}
