//! From networks to design matrices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::check_symmetric;
use crate::{Error, Matrix, Result};

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Neg,
    #[serde(rename = "1")]
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    /// +1 for non-negative scores.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

/// Where a design column came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeDescriptor {
    /// Node pair with `k < l`.
    pub k: usize,
    pub l: usize,
    /// Scanning-session tag, if the design mixes sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    /// Extracted dynamic feature index (0 for static edges).
    #[serde(default)]
    pub feature: usize,
}

impl EdgeDescriptor {
    pub fn new(k: usize, l: usize) -> Self {
        Self { k, l, session: None, feature: 0 }
    }

    pub fn with_session(mut self, tag: &str) -> Self {
        self.session = Some(String::from(tag));
        self
    }
}

/// Node pairs `(0,1), (0,2), …, (v-2, v-1)` in row-major upper-triangle order.
pub fn upper_triangle_pairs(v: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(v * v.saturating_sub(1) / 2);
    for k in 0..v {
        for l in (k + 1)..v {
            pairs.push((k, l));
        }
    }
    pairs
}

/// Off-diagonal upper triangle of a symmetric matrix, row-major.
pub fn vectorize_upper_triangle(net: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(net, 1e-10)?;
    let v = net.nrows();
    Ok(upper_triangle_pairs(v).into_iter().map(|(k, l)| net[(k, l)]).collect())
}

/// Inverse of [`vectorize_upper_triangle`]: a symmetric matrix with the given
/// off-diagonal entries and constant diagonal.
pub fn matrixify_upper_triangle(edges: &[f64], v: usize, diagonal: f64) -> Result<Matrix> {
    let pairs = upper_triangle_pairs(v);
    if edges.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            what: "upper-triangle length",
            expected: pairs.len(),
            found: edges.len(),
        });
    }
    let mut m = Matrix::from_diagonal_element(v, v, diagonal);
    for (&(k, l), &x) in pairs.iter().zip(edges) {
        m[(k, l)] = x;
        m[(l, k)] = x;
    }
    Ok(m)
}

/// Smallest node count whose upper triangle holds at least `q` edges.
pub fn nodes_for_edges(q: usize) -> usize {
    let mut v = 2;
    while v * (v - 1) / 2 < q {
        v += 1;
    }
    v
}

fn sample_sd(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    (xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Columns whose standard deviation across `rows` exceeds `sd_threshold`.
///
/// Columns at or below the threshold do not separate subjects and are
/// dropped. Only the given (training) rows are consulted.
pub fn screen_edges(edges: &Matrix, rows: &[usize], sd_threshold: f64) -> Result<Vec<usize>> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "screening needs at least 2 subjects, got {}",
            rows.len()
        )));
    }
    if let Some(&bad) = rows.iter().find(|&&i| i >= edges.nrows()) {
        return Err(Error::InvalidArgument(alloc::format!("row {bad} out of range")));
    }
    let keep: Vec<usize> = (0..edges.ncols())
        .filter(|&j| sample_sd(rows.iter().map(|&i| edges[(i, j)])) > sd_threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::NoRetainedColumns { threshold: sd_threshold });
    }
    Ok(keep)
}

/// Mean, variation and stability of one edge's window-correlation series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManualFeatures {
    pub mean: f64,
    /// Sample standard deviation.
    pub variation: f64,
    /// `1 / (1 + mean |x_{t+1} - x_t|)`: 1 for a constant series.
    pub stability: f64,
}

impl ManualFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [self.mean, self.variation, self.stability]
    }
}

pub fn extract_manual_features(series: &[f64]) -> Result<ManualFeatures> {
    let len = series.len();
    if len < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "manual features need a series of length >= 2, got {len}"
        )));
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let variation = sample_sd(series.iter().copied());
    let mad = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (len - 1) as f64;
    Ok(ManualFeatures { mean, variation, stability: 1.0 / (1.0 + mad) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicMethod {
    Manual,
    Pca,
}

/// Principal directions shared by every subject and edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    /// Column means of the stacked series, one per window index.
    pub center: Vec<f64>,
    /// `R` directions, each of length `L`.
    pub directions: Vec<Vec<f64>>,
    /// Fraction of variance explained by each retained direction.
    pub explained: Vec<f64>,
}

impl PcaBasis {
    /// Scores of one series on every retained direction.
    pub fn project(&self, series: &[f64]) -> Vec<f64> {
        self.directions
            .iter()
            .map(|d| {
                d.iter()
                    .zip(series)
                    .zip(&self.center)
                    .map(|((w, x), c)| w * (x - c))
                    .sum()
            })
            .collect()
    }
}

/// Fits principal directions on the stacked (subject × edge) by window-index
/// matrix. Each element of `series` is one subject's `Q × L` matrix (rows =
/// edges, columns = windows). Returns the basis and `R` tables of `N × Q`
/// scores, `R` being the smallest count reaching `variance_target`.
///
/// A stack with no variance after centering yields `R = 1` with all scores 0.
pub fn extract_pca_features(series: &[Matrix], variance_target: f64) -> Result<(PcaBasis, Vec<Matrix>)> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidParameter { name: "variance_target", value: variance_target });
    }
    let n = series.len();
    if n == 0 {
        return Err(Error::Degenerate("no series to decompose"));
    }
    let q = series[0].nrows();
    let len = series[0].ncols();
    for s in series {
        if s.nrows() != q || s.ncols() != len {
            return Err(Error::DimensionMismatch {
                what: "window series shape",
                expected: q * len,
                found: s.nrows() * s.ncols(),
            });
        }
    }
    let rows = n * q;
    if rows < 2 || len == 0 {
        return Err(Error::Degenerate("fewer than two series"));
    }
    let mut center = vec![0.0; len];
    for s in series {
        for e in 0..q {
            for t in 0..len {
                center[t] += s[(e, t)];
            }
        }
    }
    center.iter_mut().for_each(|c| *c /= rows as f64);
    let mut cov = Matrix::zeros(len, len);
    let mut centered = vec![0.0; len];
    for s in series {
        for e in 0..q {
            for t in 0..len {
                centered[t] = s[(e, t)] - center[t];
            }
            for a in 0..len {
                let ca = centered[a];
                if ca == 0.0 {
                    continue;
                }
                for b in a..len {
                    cov[(a, b)] += ca * centered[b];
                }
            }
        }
    }
    for a in 0..len {
        for b in a..len {
            let v = cov[(a, b)] / (rows as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let scale: f64 = center.iter().map(|c| c * c).sum::<f64>() + 1.0;

    if total <= 1e-13 * scale {
        // Rank 0 after centering: one direction, every score zero.
        let mut d = vec![0.0; len];
        d[0] = 1.0;
        let basis = PcaBasis { center, directions: vec![d], explained: vec![1.0] };
        return Ok((basis, vec![Matrix::zeros(n, q)]));
    }
    let mut directions = Vec::new();
    let mut explained = Vec::new();
    let mut acc = 0.0;
    for &k in &order {
        let value = eig.eigenvalues[k].max(0.0);
        let mut d: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // Sign convention: largest-magnitude entry positive.
        let pivot = d.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            d.iter_mut().for_each(|x| *x = -*x);
        }
        directions.push(d);
        explained.push(value / total);
        acc += value / total;
        if acc >= variance_target - 1e-12 {
            break;
        }
    }
    let basis = PcaBasis { center, directions, explained };
    let r = basis.directions.len();
    let mut tables = vec![Matrix::zeros(n, q); r];
    let mut row = vec![0.0; len];
    for (i, s) in series.iter().enumerate() {
        for e in 0..q {
            for t in 0..len {
                row[t] = s[(e, t)];
            }
            for (k, score) in basis.project(&row).into_iter().enumerate() {
                tables[k][(i, e)] = score;
            }
        }
    }
    Ok((basis, tables))
}

/// `R` column-aligned feature tables extracted from window series.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicFeatureSet {
    pub method: DynamicMethod,
    pub columns: Vec<EdgeDescriptor>,
    /// One `N × Q` table per extracted feature.
    pub tables: Vec<Matrix>,
    /// Present for the PCA method.
    pub basis: Option<PcaBasis>,
}

impl DynamicFeatureSet {
    /// Builds the feature set from per-subject `Q × L` edge series.
    pub fn extract(
        method: DynamicMethod,
        series: &[Matrix],
        columns: Vec<EdgeDescriptor>,
        variance_target: f64,
    ) -> Result<Self> {
        let q = columns.len();
        if let Some(s) = series.iter().find(|s| s.nrows() != q) {
            return Err(Error::DimensionMismatch { what: "edge series rows", expected: q, found: s.nrows() });
        }
        match method {
            DynamicMethod::Manual => {
                let n = series.len();
                let mut tables = vec![Matrix::zeros(n, q); 3];
                let mut row = Vec::new();
                for (i, s) in series.iter().enumerate() {
                    for e in 0..q {
                        row.clear();
                        row.extend(s.row(e).iter().copied());
                        for (t, f) in tables.iter_mut().zip(extract_manual_features(&row)?.as_array()) {
                            t[(i, e)] = f;
                        }
                    }
                }
                Ok(Self { method, columns, tables, basis: None })
            }
            DynamicMethod::Pca => {
                let (basis, tables) = extract_pca_features(series, variance_target)?;
                Ok(Self { method, columns, tables, basis: Some(basis) })
            }
        }
    }

    pub fn n_features(&self) -> usize {
        self.tables.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.tables.first().map_or(0, |t| t.nrows())
    }

    pub fn n_edges(&self) -> usize {
        self.columns.len()
    }

    /// Keeps the given columns in every table.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            method: self.method,
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            tables: self.tables.iter().map(|t| t.select_columns(keep.iter())).collect(),
            basis: self.basis.clone(),
        }
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        Self {
            method: self.method,
            columns: self.columns.clone(),
            tables: self.tables.iter().map(|t| t.select_rows(rows.iter())).collect(),
            basis: self.basis.clone(),
        }
    }

    /// z-scores every table column with statistics from `rows`.
    pub fn standardized(&self, rows: &[usize]) -> Result<(Self, Vec<Standardization>)> {
        let mut out = self.clone();
        let mut stats = Vec::with_capacity(self.tables.len());
        for t in out.tables.iter_mut() {
            let s = Standardization::fit(t, rows)?;
            *t = s.apply(t)?;
            stats.push(s);
        }
        Ok((out, stats))
    }
}

/// Window-mean table (`N × Q`) of per-subject edge series, the table that
/// dynamic screening runs on.
pub fn series_mean_table(series: &[Matrix]) -> Matrix {
    let n = series.len();
    let q = series.first().map_or(0, |s| s.nrows());
    Matrix::from_fn(n, q, |i, e| series[i].row(e).mean())
}

/// Per-column affine standardization learned on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Means and sample standard deviations over `rows`. Columns without
    /// spread (e.g. an intercept) keep mean 0 and scale 1.
    pub fn fit(x: &Matrix, rows: &[usize]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "standardization needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = rows.iter().map(|&i| x[(i, j)]);
            let sd = sample_sd(col.clone());
            if sd > 1e-12 {
                mean.push(col.sum::<f64>() / rows.len() as f64);
                scale.push(sd);
            } else {
                mean.push(0.0);
                scale.push(1.0);
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn identity(p: usize) -> Self {
        Self { mean: vec![0.0; p], scale: vec![1.0; p] }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "standardization columns",
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for j in 0..x.ncols() {
            let (m, s) = (self.mean[j], self.scale[j]);
            for i in 0..x.nrows() {
                out[(i, j)] = (x[(i, j)] - m) / s;
            }
        }
        Ok(out)
    }
}

/// Edge columns with their descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBlock {
    pub values: Matrix,
    pub columns: Vec<EdgeDescriptor>,
}

impl EdgeBlock {
    pub fn select(&self, keep: &[usize]) -> Self {
        let values = self.values.select_columns(keep.iter());
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        Self { values, columns }
    }
}

/// Subjects × (edges ++ covariates) with labels and bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatureTable {
    pub ids: Vec<String>,
    /// Raw (unstandardized) edge features, `N × Q`.
    pub values: Matrix,
    pub columns: Vec<EdgeDescriptor>,
    /// Raw covariates, `N × C`.
    pub covariates: Matrix,
    pub covariate_names: Vec<String>,
    /// `None` for prediction-only subjects.
    pub labels: Vec<Option<Label>>,
    /// Applied by [`EdgeFeatureTable::design`] when present.
    pub standardization: Option<Standardization>,
}

/// How covariates enter the design.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DesignOptions {
    pub include_covariates: bool,
    /// Append an all-ones column after the covariates.
    pub intercept: bool,
    pub standardize: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { include_covariates: true, intercept: false, standardize: true }
    }
}

/// Concatenates edges and covariates (`u_i = [x_i; c_i]`), validating shapes
/// and finiteness. With `standardize`, z-scoring statistics come from
/// `training_rows` (all rows when `None`) and apply to every row.
pub fn assemble_design(
    ids: Vec<String>,
    edges: EdgeBlock,
    covariates: Matrix,
    covariate_names: Vec<String>,
    labels: Vec<Option<Label>>,
    options: DesignOptions,
    training_rows: Option<&[usize]>,
) -> Result<EdgeFeatureTable> {
    let n = edges.values.nrows();
    for (what, found) in [
        ("subject ids", ids.len()),
        ("covariate rows", covariates.nrows()),
        ("labels", labels.len()),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch { what, expected: n, found });
        }
    }
    if edges.columns.len() != edges.values.ncols() {
        return Err(Error::DimensionMismatch {
            what: "edge descriptors",
            expected: edges.values.ncols(),
            found: edges.columns.len(),
        });
    }
    if covariate_names.len() != covariates.ncols() {
        return Err(Error::DimensionMismatch {
            what: "covariate names",
            expected: covariates.ncols(),
            found: covariate_names.len(),
        });
    }
    if !crate::linalg::all_finite(&edges.values) {
        return Err(Error::NonFinite("edge features"));
    }
    if !crate::linalg::all_finite(&covariates) {
        return Err(Error::NonFinite("covariates"));
    }
    for c in &edges.columns {
        if c.k >= c.l {
            return Err(Error::InvalidArgument(alloc::format!(
                "edge descriptor ({}, {}) is not an upper-triangle pair",
                c.k, c.l
            )));
        }
    }
    for (a, c) in edges.columns.iter().enumerate() {
        if edges.columns[..a].contains(c) {
            return Err(Error::InvalidArgument(alloc::format!(
                "duplicate edge descriptor ({}, {})",
                c.k, c.l
            )));
        }
    }

    let (mut covariates, mut covariate_names) = if options.include_covariates {
        (covariates, covariate_names)
    } else {
        (Matrix::zeros(n, 0), Vec::new())
    };
    if options.intercept {
        let c = covariates.ncols();
        covariates = covariates.insert_column(c, 1.0);
        covariate_names.push(String::from("intercept"));
    }
    let mut table = EdgeFeatureTable {
        ids,
        values: edges.values,
        columns: edges.columns,
        covariates,
        covariate_names,
        labels,
        standardization: None,
    };
    if options.standardize {
        let all: Vec<usize> = (0..n).collect();
        let rows = training_rows.unwrap_or(&all);
        table.standardization = Some(Standardization::fit(&table.raw_design(), rows)?);
    }
    Ok(table)
}

impl EdgeFeatureTable {
    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_edges(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    /// P = Q + C.
    pub fn n_coefficients(&self) -> usize {
        self.n_edges() + self.n_covariates()
    }

    /// `[edges | covariates]` without standardization.
    pub fn raw_design(&self) -> Matrix {
        let n = self.n_subjects();
        let q = self.n_edges();
        let mut u = Matrix::zeros(n, self.n_coefficients());
        u.view_mut((0, 0), (n, q)).copy_from(&self.values);
        u.view_mut((0, q), (n, self.n_covariates())).copy_from(&self.covariates);
        u
    }

    /// The model design: raw design with the stored standardization applied.
    pub fn design(&self) -> Result<Matrix> {
        let raw = self.raw_design();
        match &self.standardization {
            Some(s) => s.apply(&raw),
            None => Ok(raw),
        }
    }

    /// Labels as ±1, failing on any unlabeled subject.
    pub fn label_signs(&self) -> Result<Vec<f64>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.map(Label::sign).ok_or_else(|| {
                    Error::InvalidArgument(alloc::format!("subject {} has no label", self.ids[i]))
                })
            })
            .collect()
    }

    /// Rows subset; keeps the standardization as is.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            values: self.values.select_rows(rows.iter()),
            columns: self.columns.clone(),
            covariates: self.covariates.select_rows(rows.iter()),
            covariate_names: self.covariate_names.clone(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            standardization: self.standardization.clone(),
        }
    }

    /// Refits the standardization on `rows` (all rows of `self` if `None`).
    pub fn restandardized(&self, rows: Option<&[usize]>) -> Result<Self> {
        let all: Vec<usize> = (0..self.n_subjects()).collect();
        let mut out = self.clone();
        out.standardization = Some(Standardization::fit(&self.raw_design(), rows.unwrap_or(&all))?);
        Ok(out)
    }
}

/// Subjects × edge series for several sessions of the same subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionEdges {
    pub tag: String,
    /// `N × |universe|` edge values.
    pub values: Matrix,
    /// Node pairs of the universe, aligned with the columns of `values`.
    pub pairs: Vec<(usize, usize)>,
}

/// Union of the edges screened in each session: session-A features for all
/// union edges, then session-B features for the same edges. Indices refer to
/// the shared node-pair universe.
pub fn multisession_union(
    retained_a: &[usize],
    retained_b: &[usize],
    session_a: &SessionEdges,
    session_b: &SessionEdges,
) -> Result<EdgeBlock> {
    if session_a.pairs != session_b.pairs {
        return Err(Error::UniverseMismatch);
    }
    if session_a.values.nrows() != session_b.values.nrows() {
        return Err(Error::DimensionMismatch {
            what: "session subject counts",
            expected: session_a.values.nrows(),
            found: session_b.values.nrows(),
        });
    }
    let universe = session_a.pairs.len();
    let mut union: Vec<usize> = retained_a.iter().chain(retained_b).copied().collect();
    union.sort_unstable();
    union.dedup();
    if let Some(&bad) = union.iter().find(|&&j| j >= universe) {
        return Err(Error::InvalidArgument(alloc::format!("edge index {bad} outside universe")));
    }
    let n = session_a.values.nrows();
    let u = union.len();
    let mut values = Matrix::zeros(n, 2 * u);
    let mut columns = Vec::with_capacity(2 * u);
    for (offset, session) in [(0, session_a), (u, session_b)] {
        for (c, &j) in union.iter().enumerate() {
            values.set_column(offset + c, &session.values.column(j));
            let (k, l) = session.pairs[j];
            columns.push(EdgeDescriptor::new(k, l).with_session(&session.tag));
        }
    }
    Ok(EdgeBlock { values, columns })
}

/// Labels the top and bottom `ceil(ζN)` scores +1 and −1; the middle is
/// excluded. Ties are ordered by ascending id. Returns `(subject index,
/// label)` sorted by index.
pub fn label_from_extremes(ids: &[String], scores: &[f64], zeta: f64) -> Result<Vec<(usize, Label)>> {
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(Error::InvalidParameter { name: "zeta", value: zeta });
    }
    if ids.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            what: "scores",
            expected: ids.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let n = scores.len();
    let k = (zeta * n as f64 - 1e-9).ceil().max(1.0) as usize;
    if k == 0 || 2 * k > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "{n} subjects cannot supply {k} per class at zeta = {zeta}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let mut out: Vec<(usize, Label)> = order[..k]
        .iter()
        .map(|&i| (i, Label::Neg))
        .chain(order[n - k..].iter().map(|&i| (i, Label::Pos)))
        .collect();
    out.sort_by_key(|&(i, _)| i);
    Ok(out)
}
