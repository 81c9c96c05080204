//! File formats: delimited matrices, edge tables with JSON sidecars, draw
//! records, and the per-run output directory with its manifest.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dplsvm_core::draws::ModelKind;
use dplsvm_core::features::{DynamicMethod, PcaBasis, Standardization};
use dplsvm_core::netestim::SubjectScan;
use dplsvm_core::{Draw, EdgeDescriptor, Label, Matrix, PosteriorDraws};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, ErrorKind, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn delimiter_for(path: &Path, first_line: &str) -> u8 {
    let tsv = path.extension().is_some_and(|e| e == "tsv");
    if tsv || (first_line.contains('\t') && !first_line.contains(',')) {
        b'\t'
    } else {
        b','
    }
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<fs::File>> {
    let first = {
        let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut line = String::new();
        BufReader::new(f).read_line(&mut line).map_err(|e| CliError::io(path, e))?;
        line
    };
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(headers)
        .delimiter(delimiter_for(path, &first))
        .trim(csv::Trim::All)
        .from_reader(f))
}

fn parse_f64(path: &Path, row: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| CliError::malformed(path, format!("row {row}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::malformed(path, format!("row {row}: non-finite value")));
    }
    Ok(v)
}

/// Reads a numeric delimited matrix. A first row that does not parse as
/// numbers is taken as a header.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut rdr = reader(path, false)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::malformed(path, e))?;
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec.iter().map(|f| parse_f64(path, i + 1, f)).collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(CliError::malformed(path, "empty matrix"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_csv(m: &Matrix, header: Option<&[String]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn parse_label(path: &Path, row: usize, field: &str) -> Result<Option<Label>> {
    if field.is_empty() || field.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    field
        .parse::<i64>()
        .ok()
        .and_then(Label::from_i64)
        .map(Some)
        .ok_or_else(|| CliError::malformed(path, format!("row {row}: label must be -1, 1 or empty, got `{field}`")))
}

fn label_text(l: Option<Label>) -> String {
    match l {
        Some(l) => format!("{}", l.sign() as i64),
        None => String::new(),
    }
}

/// Subjects listed in a scan manifest.
pub struct ScanManifest {
    pub scans: Vec<SubjectScan>,
    pub scores: Option<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// Series files, for hashing.
    pub series_paths: Vec<PathBuf>,
}

/// Manifest columns: `id`, `series` (path relative to the manifest), then
/// optional `label` and `score`; every other column is a covariate.
pub fn read_manifest(path: &Path) -> Result<ScanManifest> {
    let mut rdr = reader(path, true)?;
    let headers: Vec<String> = rdr.headers().map_err(|e| CliError::malformed(path, e))?.iter().map(String::from).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(series_col)) = (find("id"), find("series")) else {
        return Err(CliError::malformed(path, "manifest needs `id` and `series` columns"));
    };
    let label_col = find("label");
    let score_col = find("score");
    let cov_cols: Vec<usize> =
        (0..headers.len()).filter(|&j| ![Some(id_col), Some(series_col), label_col, score_col].contains(&Some(j))).collect();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = ScanManifest {
        scans: Vec::new(),
        scores: score_col.map(|_| Vec::new()),
        covariate_names: cov_cols.iter().map(|&j| headers[j].clone()).collect(),
        series_paths: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::malformed(path, e))?;
        let id = rec[id_col].to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(CliError::malformed(path, format!("row {row}: empty or duplicate id `{id}`")));
        }
        let series_path = base.join(&rec[series_col]);
        let series = read_matrix(&series_path)?;
        let label = match label_col {
            Some(j) => parse_label(path, row, &rec[j])?,
            None => None,
        };
        if let (Some(j), Some(scores)) = (score_col, out.scores.as_mut()) {
            scores.push(parse_f64(path, row, &rec[j])?);
        }
        let covariates = cov_cols.iter().map(|&j| parse_f64(path, row, &rec[j])).collect::<Result<Vec<_>>>()?;
        let scan = SubjectScan { id, series, covariates, label };
        scan.validate().map_err(|e| CliError::new(ErrorKind::InvalidData, format!("{}: {e}", series_path.display())))?;
        out.scans.push(scan);
        out.series_paths.push(series_path);
    }
    if out.scans.is_empty() {
        return Err(CliError::malformed(path, "manifest lists no subjects"));
    }
    Ok(out)
}

/// Column header of an edge descriptor: `k-l`, then `@session`, then `#r`
/// for dynamic features.
pub fn column_name(d: &EdgeDescriptor, dynamic: bool) -> String {
    let mut s = format!("{}-{}", d.k, d.l);
    if let Some(tag) = &d.session {
        s.push('@');
        s.push_str(tag);
    }
    if dynamic {
        s.push_str(&format!("#{}", d.feature));
    }
    s
}

pub fn parse_column(name: &str) -> Option<EdgeDescriptor> {
    let (rest, feature) = match name.rsplit_once('#') {
        Some((r, f)) => (r, f.parse().ok()?),
        None => (name, 0),
    };
    let (pair, session) = match rest.split_once('@') {
        Some((p, s)) if !s.is_empty() => (p, Some(s.to_string())),
        Some(_) => return None,
        None => (rest, None),
    };
    let (k, l) = pair.split_once('-')?;
    Some(EdgeDescriptor { k: k.parse().ok()?, l: l.parse().ok()?, session, feature })
}

const COV_PREFIX: &str = "cov:";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Static,
    Dynamic,
}

/// Structured sidecar of a table file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub kind: TableKind,
    pub columns: Vec<EdgeDescriptor>,
    pub covariate_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<DynamicMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PcaBasis>,
    /// Present once a design has been standardized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
}

/// Subjects × (edge columns, covariates) with labels. Dynamic tables hold
/// R feature blocks, block r carrying descriptors with `feature = r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableFile {
    pub ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub edges: Matrix,
    pub covariates: Matrix,
    pub meta: TableMeta,
}

pub fn sidecar_path(table: &Path) -> PathBuf {
    table.with_extension("json")
}

impl TableFile {
    pub fn is_dynamic(&self) -> bool {
        self.meta.kind == TableKind::Dynamic
    }

    pub fn header(&self) -> Vec<String> {
        let dynamic = self.is_dynamic();
        let mut h = vec!["id".to_string(), "label".to_string()];
        h.extend(self.meta.columns.iter().map(|c| column_name(c, dynamic)));
        h.extend(self.meta.covariate_names.iter().map(|c| format!("{COV_PREFIX}{c}")));
        h
    }

    pub fn csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for i in 0..self.ids.len() {
            let mut rec = vec![self.ids[i].clone(), label_text(self.labels[i])];
            rec.extend(self.edges.row(i).iter().map(|v| v.to_string()));
            rec.extend(self.covariates.row(i).iter().map(|v| v.to_string()));
            w.write_record(rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn sidecar(&self) -> Vec<u8> {
        json_bytes(&self.meta)
    }

    /// Reads `table.csv`; the `.json` sidecar is optional for static tables.
    pub fn read(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let meta: Option<TableMeta> = if side.exists() { Some(read_json(&side)?) } else { None };
        let mut rdr = reader(path, true)?;
        let headers: Vec<String> = rdr.headers().map_err(|e| CliError::malformed(path, e))?.iter().map(String::from).collect();
        if headers.len() < 2 || headers[0] != "id" || headers[1] != "label" {
            return Err(CliError::malformed(path, "table must start with `id,label` columns"));
        }
        let mut columns = Vec::new();
        let mut covariate_names = Vec::new();
        for h in &headers[2..] {
            if let Some(c) = h.strip_prefix(COV_PREFIX) {
                covariate_names.push(c.to_string());
            } else if !covariate_names.is_empty() {
                return Err(CliError::malformed(path, "covariate columns must follow all edge columns"));
            } else {
                columns.push(parse_column(h).ok_or_else(|| CliError::malformed(path, format!("bad edge column `{h}`")))?);
            }
        }
        let (q, c) = (columns.len(), covariate_names.len());
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::malformed(path, e))?;
            ids.push(rec[0].to_string());
            labels.push(parse_label(path, i + 2, &rec[1])?);
            rows.push(rec.iter().skip(2).map(|f| parse_f64(path, i + 2, f)).collect::<Result<Vec<_>>>()?);
        }
        if ids.is_empty() {
            return Err(CliError::malformed(path, "table has no rows"));
        }
        let edges = Matrix::from_fn(ids.len(), q, |i, j| rows[i][j]);
        let covariates = Matrix::from_fn(ids.len(), c, |i, j| rows[i][q + j]);
        let meta = match meta {
            Some(m) => {
                if m.columns != columns || m.covariate_names != covariate_names {
                    return Err(CliError::malformed(&side, "sidecar columns disagree with the table header"));
                }
                m
            }
            None => {
                let kind = if columns.iter().any(|c| c.feature > 0) { TableKind::Dynamic } else { TableKind::Static };
                TableMeta { kind, columns, covariate_names, method: None, window: None, basis: None, standardization: None }
            }
        };
        Ok(Self { ids, labels, edges, covariates, meta })
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            edges: self.edges.select_rows(rows.iter()),
            covariates: self.covariates.select_rows(rows.iter()),
            meta: self.meta.clone(),
        }
    }

    pub fn labeled_rows(&self) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    /// Splits a dynamic table into its edge list (feature 0) and one
    /// `N × Q` matrix per feature.
    pub fn feature_blocks(&self) -> Result<(Vec<EdgeDescriptor>, Vec<Matrix>)> {
        let base: Vec<EdgeDescriptor> =
            self.meta.columns.iter().filter(|c| c.feature == 0).map(|c| EdgeDescriptor { feature: 0, ..c.clone() }).collect();
        let q = base.len();
        if q == 0 || self.meta.columns.len() % q != 0 {
            return Err(CliError::new(ErrorKind::InvalidData, "dynamic table columns do not form equal feature blocks"));
        }
        let r = self.meta.columns.len() / q;
        let mut blocks = Vec::with_capacity(r);
        for f in 0..r {
            let idx: Vec<usize> = base
                .iter()
                .map(|b| {
                    self.meta
                        .columns
                        .iter()
                        .position(|c| c.feature == f && c.k == b.k && c.l == b.l && c.session == b.session)
                        .ok_or_else(|| {
                            CliError::new(ErrorKind::InvalidData, format!("edge {} lacks feature {f}", column_name(b, false)))
                        })
                })
                .collect::<Result<_>>()?;
            blocks.push(self.edges.select_columns(idx.iter()));
        }
        Ok((base, blocks))
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::malformed(path, e))
}

/// Everything needed to rebuild a design for prediction, plus the shape of
/// the draw records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub kind: ModelKind,
    /// Edge columns in design order (dynamic: one per edge, features implied).
    pub columns: Vec<EdgeDescriptor>,
    /// Design covariates, including `intercept` when added.
    pub covariate_names: Vec<String>,
    pub include_covariates: bool,
    pub intercept: bool,
    /// Static: one entry over the whole design. Dynamic: one per feature
    /// table, then one over the covariates.
    pub standardization: Vec<Standardization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<DynamicMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PcaBasis>,
    pub n_chains: usize,
    pub n_coefficients: usize,
    pub n_edges: usize,
    pub n_features: usize,
    pub n_draws: usize,
}

impl ModelFile {
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut out: Vec<String> = match self.kind {
            ModelKind::Static => self.columns.iter().map(|c| column_name(c, false)).collect(),
            ModelKind::Dynamic => self
                .columns
                .iter()
                .flat_map(|c| (0..self.n_features).map(move |r| column_name(&EdgeDescriptor { feature: r, ..c.clone() }, true)))
                .collect(),
        };
        out.extend(self.covariate_names.iter().map(|c| format!("{COV_PREFIX}{c}")));
        out
    }
}

pub fn draws_jsonl(draws: &PosteriorDraws) -> Vec<u8> {
    let mut out = Vec::new();
    for d in &draws.draws {
        serde_json::to_writer(&mut out, d).expect("serializable");
        out.push(b'\n');
    }
    out
}

/// Loads `model.json` and `draws.jsonl` from a fit directory.
pub fn read_model(dir: &Path) -> Result<(ModelFile, PosteriorDraws)> {
    let model: ModelFile = read_json(&dir.join("model.json"))?;
    let path = dir.join("draws.jsonl");
    let f = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let mut draws = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Draw = serde_json::from_str(&line).map_err(|e| CliError::malformed(&path, format!("line {}: {e}", i + 1)))?;
        draws.push(d);
    }
    if draws.len() != model.n_draws {
        return Err(CliError::malformed(&path, format!("expected {} draws, found {}", model.n_draws, draws.len())));
    }
    let posterior = PosteriorDraws {
        kind: model.kind,
        n_chains: model.n_chains,
        n_coefficients: model.n_coefficients,
        n_edges: model.n_edges,
        n_features: model.n_features,
        draws,
    };
    Ok((model, posterior))
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    command: &'a str,
    args: &'a [String],
    seed: u64,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// Single writer for one output directory. Refuses to overwrite inputs and
/// finishes with `config.txt` and `manifest.json`.
pub struct Outputs {
    dir: PathBuf,
    command: String,
    args: Vec<String>,
    inputs: Vec<PathBuf>,
    written: Vec<(String, String)>,
}

fn canonical(p: &Path) -> Option<PathBuf> {
    fs::canonicalize(p).ok()
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, args: Vec<String>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), command: command.into(), args, inputs: Vec::new(), written: Vec::new() })
    }

    /// Registers an input file. Inputs may not live in the output directory.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let parent = path.parent().map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p });
        if parent.and_then(canonical).is_some_and(|p| Some(p) == canonical(&self.dir)) {
            return Err(CliError::usage(format!(
                "output directory {} holds input {}; choose another --out",
                self.dir.display(),
                path.display()
            )));
        }
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        Ok(())
    }

    /// Writes `name` (relative to the output directory).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        if let Some(t) = canonical(&target) {
            if self.inputs.iter().any(|p| canonical(p).as_ref() == Some(&t)) {
                return Err(CliError::usage(format!("refusing to overwrite input {}", target.display())));
            }
        }
        let f = fs::File::create(&target).map_err(|e| CliError::io(&target, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| CliError::io(&target, e))?;
        self.written.push((name.to_string(), hex(&Sha256::digest(bytes))));
        Ok(())
    }

    pub fn finish(mut self, cfg: &RunConfig) -> Result<()> {
        self.write("config.txt", cfg.render().as_bytes())?;
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for p in &self.inputs {
            inputs.push(FileHash { path: p.display().to_string(), sha256: sha256_file(p)? });
        }
        let outputs = self.written.iter().map(|(p, h)| FileHash { path: p.clone(), sha256: h.clone() }).collect();
        let manifest =
            RunManifest { version: VERSION, command: &self.command, args: &self.args, seed: cfg.seed(), inputs, outputs };
        let bytes = json_bytes(&manifest);
        self.write("manifest.json", &bytes)
    }
}
