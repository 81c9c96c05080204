use std::path::Path;

use dplsvm_core::diag::{batch_means_se, split_rhat};
use dplsvm_core::draws::ModelKind;
use dplsvm_core::eval::{
    credible_select, metrics, reproducible_features, select_by_validation, stratified_splits, MetricsReport, Prefer,
    ValidationSelection,
};
use dplsvm_core::features::{
    assemble_design, label_from_extremes, multisession_union, screen_edges, series_mean_table, upper_triangle_pairs,
    vectorize_upper_triangle, DesignOptions, DynamicFeatureSet, EdgeBlock, SessionEdges, Standardization,
};
use dplsvm_core::geweke::{
    dynamic_hyper, dynamic_problem, geweke_dynamic, geweke_static, prior_cluster_count, static_hyper, static_problem,
};
use dplsvm_core::netestim::{default_lambda_grid, network_at_density, pearson_correlation, sliding_window, StaticNetwork};
use dplsvm_core::svm_dynamic::{self, merge_dynamic, product_design, DynamicControls, DynamicData};
use dplsvm_core::svm_static::{self, predict, Prediction, StaticData};
use dplsvm_core::synth::{generate, generate_dynamic, generate_scans, ScanSpec, SynthSpec};
use dplsvm_core::{EdgeDescriptor, EdgeFeatureTable, Hyperparameters, Label, Matrix, PosteriorDraws};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, ErrorKind, Result};
use crate::io::{
    column_name, draws_jsonl, json_bytes, matrix_csv, read_manifest, read_model, ModelFile, Outputs, ScanManifest,
    TableFile, TableKind, TableMeta, VERSION,
};

type CoreResult<T> = dplsvm_core::Result<T>;

pub struct Ctx {
    pub cfg: RunConfig,
    pub command: &'static str,
    pub args: Vec<String>,
    pub pool: rayon::ThreadPool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, command: &'static str, args: Vec<String>) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.usize("threads"))
            .build()
            .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { cfg, command, args, pool })
    }

    fn outputs(&self, dir: &Path) -> Result<Outputs> {
        Outputs::new(dir, self.command, self.args.clone())
    }

    fn hyper(&self) -> Result<Hyperparameters> {
        self.cfg.hyperparameters()
    }
}

fn with_subject(id: &str, e: dplsvm_core::Error) -> CliError {
    let mut err = CliError::from(e);
    err.message = format!("subject {id}: {}", err.message);
    err
}

fn safe_id(id: &str) -> Result<()> {
    if id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) && !id.starts_with('.') {
        Ok(())
    } else {
        Err(CliError::new(ErrorKind::InvalidData, format!("subject id `{id}` is not usable as a file name")))
    }
}

// Chains run on the pool; collecting into a Vec keeps chain order.

fn run_static(data: &StaticData, hyper: &Hyperparameters, pool: &rayon::ThreadPool) -> CoreResult<PosteriorDraws> {
    hyper.validate()?;
    data.require_both_classes()?;
    let chains = pool.install(|| {
        (0..hyper.n_chains).into_par_iter().map(|c| svm_static::run_chain(data, hyper, c)).collect::<CoreResult<Vec<_>>>()
    })?;
    Ok(PosteriorDraws::merge(ModelKind::Static, data.p(), 0, 0, chains))
}

fn run_dynamic(data: &DynamicData, hyper: &Hyperparameters, pool: &rayon::ThreadPool) -> CoreResult<PosteriorDraws> {
    hyper.validate()?;
    data.require_both_classes()?;
    let controls = DynamicControls::default();
    let chains = pool.install(|| {
        (0..hyper.n_chains)
            .into_par_iter()
            .map(|c| svm_dynamic::run_chain(data, hyper, controls, None, c))
            .collect::<CoreResult<Vec<_>>>()
    })?;
    Ok(merge_dynamic(data, chains))
}

// ---------------------------------------------------------------- networks

fn manifest_labels(m: &ScanManifest, cfg: &RunConfig) -> Result<Vec<Option<Label>>> {
    let Some(zeta) = cfg.opt_f64("zeta") else {
        return Ok(m.scans.iter().map(|s| s.label).collect());
    };
    let scores = m.scores.as_ref().ok_or_else(|| CliError::usage("zeta is set but the manifest has no `score` column"))?;
    let ids: Vec<String> = m.scans.iter().map(|s| s.id.clone()).collect();
    let mut labels = vec![None; ids.len()];
    for (i, l) in label_from_extremes(&ids, scores, zeta)? {
        labels[i] = Some(l);
    }
    Ok(labels)
}

fn regions(m: &ScanManifest) -> Result<usize> {
    let v = m.scans[0].series.ncols();
    match m.scans.iter().find(|s| s.series.ncols() != v) {
        Some(s) => Err(CliError::new(
            ErrorKind::InvalidData,
            format!("subject {} has {} regions, expected {v}", s.id, s.series.ncols()),
        )),
        None => Ok(v),
    }
}

fn edge_columns(v: usize) -> Vec<EdgeDescriptor> {
    upper_triangle_pairs(v).into_iter().map(|(k, l)| EdgeDescriptor::new(k, l)).collect()
}

/// Correlation matrix and penalty grid of every subject.
fn correlations(ctx: &Ctx, m: &ScanManifest) -> Result<Vec<(Matrix, Vec<f64>)>> {
    let points = ctx.cfg.usize("lambda_points");
    ctx.pool.install(|| {
        m.scans
            .par_iter()
            .map(|s| {
                let c = pearson_correlation(&s.series).map_err(|e| with_subject(&s.id, e))?;
                let grid = default_lambda_grid(&c, points);
                Ok((c, grid))
            })
            .collect()
    })
}

fn networks_at(ctx: &Ctx, m: &ScanManifest, corr: &[(Matrix, Vec<f64>)], density: f64) -> Result<Vec<StaticNetwork>> {
    let tol = ctx.cfg.f64("glasso_tol");
    let max_iter = ctx.cfg.usize("glasso_max_iter");
    ctx.pool.install(|| {
        corr.par_iter()
            .zip(&m.scans)
            .map(|((s, grid), scan)| network_at_density(s, density, grid, tol, max_iter).map_err(|e| with_subject(&scan.id, e)))
            .collect()
    })
}

fn covariate_matrix(m: &ScanManifest) -> Matrix {
    let c = m.covariate_names.len();
    Matrix::from_fn(m.scans.len(), c, |i, j| m.scans[i].covariates[j])
}

fn static_table(m: &ScanManifest, nets: &[StaticNetwork], labels: Vec<Option<Label>>) -> Result<TableFile> {
    let columns = edge_columns(regions(m)?);
    let mut edges = Matrix::zeros(nets.len(), columns.len());
    for (i, n) in nets.iter().enumerate() {
        let v = vectorize_upper_triangle(&n.precision)?;
        edges.row_mut(i).copy_from_slice(&v);
    }
    Ok(TableFile {
        ids: m.scans.iter().map(|s| s.id.clone()).collect(),
        labels,
        edges,
        covariates: covariate_matrix(m),
        meta: TableMeta {
            kind: TableKind::Static,
            columns,
            covariate_names: m.covariate_names.clone(),
            method: None,
            window: None,
            basis: None,
            standardization: None,
        },
    })
}

/// Per-subject `Q × L` edge correlation series.
fn window_series(ctx: &Ctx, m: &ScanManifest, window: usize) -> Result<Vec<Matrix>> {
    regions(m)?;
    ctx.pool.install(|| {
        m.scans
            .par_iter()
            .map(|s| sliding_window(&s.series, window).map(|d| d.edge_series()).map_err(|e| with_subject(&s.id, e)))
            .collect()
    })
}

fn block_table(
    ids: Vec<String>,
    labels: Vec<Option<Label>>,
    base: &[EdgeDescriptor],
    blocks: &[Matrix],
    covariates: Matrix,
    template: &TableMeta,
) -> TableFile {
    let n = ids.len();
    let q = base.len();
    let mut edges = Matrix::zeros(n, q * blocks.len());
    let mut columns = Vec::with_capacity(q * blocks.len());
    for (r, b) in blocks.iter().enumerate() {
        edges.view_mut((0, r * q), (n, q)).copy_from(b);
        columns.extend(base.iter().map(|c| EdgeDescriptor { feature: r, ..c.clone() }));
    }
    TableFile {
        ids,
        labels,
        edges,
        covariates,
        meta: TableMeta { kind: TableKind::Dynamic, columns, ..template.clone() },
    }
}

/// Dynamic feature table and the window-mean table used for screening.
fn dynamic_tables(ctx: &Ctx, m: &ScanManifest, series: &[Matrix], labels: Vec<Option<Label>>, window: usize) -> Result<(TableFile, TableFile)> {
    let columns = edge_columns(regions(m)?);
    let set = DynamicFeatureSet::extract(ctx.cfg.feature_method(), series, columns.clone(), ctx.cfg.f64("variance_target"))?;
    let ids: Vec<String> = m.scans.iter().map(|s| s.id.clone()).collect();
    let template = TableMeta {
        kind: TableKind::Dynamic,
        columns: Vec::new(),
        covariate_names: m.covariate_names.clone(),
        method: Some(set.method),
        window: Some(window),
        basis: set.basis.clone(),
        standardization: None,
    };
    let table = block_table(ids.clone(), labels.clone(), &set.columns, &set.tables, covariate_matrix(m), &template);
    let mean = mean_table(ids, labels, columns, series_mean_table(series));
    Ok((table, mean))
}

fn mean_table(ids: Vec<String>, labels: Vec<Option<Label>>, columns: Vec<EdgeDescriptor>, edges: Matrix) -> TableFile {
    let n = ids.len();
    TableFile {
        ids,
        labels,
        edges,
        covariates: Matrix::zeros(n, 0),
        meta: TableMeta {
            kind: TableKind::Static,
            columns,
            covariate_names: Vec::new(),
            method: None,
            window: None,
            basis: None,
            standardization: None,
        },
    }
}

#[derive(Serialize)]
struct NetworkSidecar {
    penalty: f64,
    density: f64,
    tol: f64,
    iterations: usize,
    kkt_residual: f64,
}

pub fn networks(ctx: &Ctx, manifest: &Path, out: &Path, dynamic: bool) -> Result<()> {
    let m = read_manifest(manifest)?;
    for s in &m.scans {
        safe_id(&s.id)?;
    }
    let mut o = ctx.outputs(out)?;
    o.input(manifest)?;
    for p in &m.series_paths {
        o.input(p)?;
    }
    let labels = manifest_labels(&m, &ctx.cfg)?;
    if dynamic {
        let window = ctx.cfg.usize("window");
        let series = window_series(ctx, &m, window)?;
        let (table, mean) = dynamic_tables(ctx, &m, &series, labels, window)?;
        for (s, x) in m.scans.iter().zip(&series) {
            o.write(&format!("series/{}.csv", s.id), &matrix_csv(x, None))?;
        }
        o.write("table.csv", &table.csv())?;
        o.write("table.json", &table.sidecar())?;
        o.write("window_mean.csv", &mean.csv())?;
        println!("{} subjects, {} edges, {} features per edge", table.ids.len(), mean.meta.columns.len(), table.meta.columns.len() / mean.meta.columns.len().max(1));
    } else {
        let corr = correlations(ctx, &m)?;
        let nets = networks_at(ctx, &m, &corr, ctx.cfg.f64("density"))?;
        for (s, n) in m.scans.iter().zip(&nets) {
            o.write(&format!("networks/{}.csv", s.id), &matrix_csv(&n.precision, None))?;
            let side = NetworkSidecar {
                penalty: n.penalty,
                density: n.density,
                tol: n.tol,
                iterations: n.iterations,
                kkt_residual: n.kkt_residual,
            };
            o.write(&format!("networks/{}.json", s.id), &json_bytes(&side))?;
        }
        let table = static_table(&m, &nets, labels)?;
        o.write("table.csv", &table.csv())?;
        o.write("table.json", &table.sidecar())?;
        let mean_density = nets.iter().map(|n| n.density).sum::<f64>() / nets.len() as f64;
        println!("{} subjects, {} edges, mean density {mean_density:.4}", table.ids.len(), table.meta.columns.len());
    }
    o.finish(&ctx.cfg)
}

// ---------------------------------------------------------------- screening

/// Training rows for screening and standardization: the labeled subjects.
fn training_rows(t: &TableFile) -> Vec<usize> {
    let rows = t.labeled_rows();
    if rows.len() >= 2 {
        rows
    } else {
        (0..t.ids.len()).collect()
    }
}

fn select_edges(t: &TableFile, keep: &[usize]) -> Result<TableFile> {
    if !t.is_dynamic() {
        let mut out = t.clone();
        out.edges = t.edges.select_columns(keep.iter());
        out.meta.columns = keep.iter().map(|&j| t.meta.columns[j].clone()).collect();
        return Ok(out);
    }
    let (base, blocks) = t.feature_blocks()?;
    let base: Vec<EdgeDescriptor> = keep.iter().map(|&j| base[j].clone()).collect();
    let blocks: Vec<Matrix> = blocks.iter().map(|b| b.select_columns(keep.iter())).collect();
    Ok(block_table(t.ids.clone(), t.labels.clone(), &base, &blocks, t.covariates.clone(), &t.meta))
}

/// The matrix that dynamic screening runs on: the window-mean table when
/// available (aligned on ids and edges), otherwise feature 0.
fn screening_matrix(t: &TableFile, mean: Option<&TableFile>) -> Result<Matrix> {
    if !t.is_dynamic() {
        return Ok(t.edges.clone());
    }
    let (base, blocks) = t.feature_blocks()?;
    match mean {
        Some(mt) => {
            if mt.ids != t.ids || mt.meta.columns != base {
                return Err(CliError::new(ErrorKind::InvalidData, "window_mean.csv does not match the table's subjects and edges"));
            }
            Ok(mt.edges.clone())
        }
        None => Ok(blocks[0].clone()),
    }
}

fn read_window_mean(table: &Path) -> Result<Option<(std::path::PathBuf, TableFile)>> {
    let path = table.with_file_name("window_mean.csv");
    if path.exists() {
        Ok(Some((path.clone(), TableFile::read(&path)?)))
    } else {
        Ok(None)
    }
}

#[derive(Serialize)]
struct ScreenReport {
    sd_threshold: f64,
    training_subjects: usize,
    input_edges: usize,
    retained: Vec<String>,
}

pub fn screen(ctx: &Ctx, table: &Path, out: &Path) -> Result<()> {
    let t = TableFile::read(table)?;
    let mut o = ctx.outputs(out)?;
    o.input(table)?;
    let mean = if t.is_dynamic() { read_window_mean(table)? } else { None };
    if let Some((p, _)) = &mean {
        o.input(p)?;
    }
    let rows = training_rows(&t);
    let x = screening_matrix(&t, mean.as_ref().map(|m| &m.1))?;
    let sd = ctx.cfg.f64("sd_threshold");
    let keep = screen_edges(&x, &rows, sd)?;
    let screened = select_edges(&t, &keep)?;
    let base: Vec<EdgeDescriptor> = if t.is_dynamic() { t.feature_blocks()?.0 } else { t.meta.columns.clone() };
    o.write("table.csv", &screened.csv())?;
    o.write("table.json", &screened.sidecar())?;
    if let Some((_, mt)) = &mean {
        o.write("window_mean.csv", &select_edges(mt, &keep)?.csv())?;
    }
    let report = ScreenReport {
        sd_threshold: sd,
        training_subjects: rows.len(),
        input_edges: base.len(),
        retained: keep.iter().map(|&j| column_name(&base[j], false)).collect(),
    };
    o.write("screen.json", &json_bytes(&report))?;
    println!("retained {} of {} edges", keep.len(), base.len());
    o.finish(&ctx.cfg)
}

// ---------------------------------------------------------------- fitting

fn static_design(t: &TableFile, options: DesignOptions, training: Option<&[usize]>) -> CoreResult<EdgeFeatureTable> {
    if t.is_dynamic() {
        return Err(dplsvm_core::Error::InvalidArgument("dynamic table given to a static fit; use fit-dynamic".into()));
    }
    assemble_design(
        t.ids.clone(),
        EdgeBlock { values: t.edges.clone(), columns: t.meta.columns.clone() },
        t.covariates.clone(),
        t.meta.covariate_names.clone(),
        t.labels.clone(),
        options,
        training,
    )
}

/// Standardized feature tables and covariates of a dynamic design.
struct DynamicDesign {
    base: Vec<EdgeDescriptor>,
    tables: Vec<Matrix>,
    covariates: Matrix,
    covariate_names: Vec<String>,
    stats: Vec<Standardization>,
}

fn raw_dynamic_covariates(t: &TableFile, names: &[String], include: bool, intercept: bool) -> Result<(Matrix, Vec<String>)> {
    let mut cols: Vec<usize> = Vec::new();
    let mut out_names = Vec::new();
    if include {
        for name in names {
            let j = t.meta.covariate_names.iter().position(|c| c == name).ok_or_else(|| {
                CliError::new(ErrorKind::InvalidData, format!("table lacks covariate `{name}`"))
            })?;
            cols.push(j);
            out_names.push(name.clone());
        }
    }
    let mut cov = t.covariates.select_columns(cols.iter());
    if intercept {
        let c = cov.ncols();
        cov = cov.insert_column(c, 1.0);
        out_names.push("intercept".into());
    }
    Ok((cov, out_names))
}

fn dynamic_design(t: &TableFile, cfg: &RunConfig, training: &[usize]) -> Result<DynamicDesign> {
    if !t.is_dynamic() {
        return Err(CliError::usage("static table given to a dynamic fit; use fit-static"));
    }
    let (base, blocks) = t.feature_blocks()?;
    let opts = cfg.design_options();
    let (cov, covariate_names) = raw_dynamic_covariates(t, &t.meta.covariate_names, opts.include_covariates, opts.intercept)?;
    let fit = |x: &Matrix| -> Result<Standardization> {
        if opts.standardize {
            Ok(Standardization::fit(x, training)?)
        } else {
            Ok(Standardization::identity(x.ncols()))
        }
    };
    let mut stats = Vec::with_capacity(blocks.len() + 1);
    let mut tables = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let s = fit(b)?;
        tables.push(s.apply(b)?);
        stats.push(s);
    }
    let s = fit(&cov)?;
    let covariates = s.apply(&cov)?;
    stats.push(s);
    Ok(DynamicDesign { base, tables, covariates, covariate_names, stats })
}

fn label_signs(labels: &[Option<Label>], ids: &[String]) -> Result<Vec<f64>> {
    labels
        .iter()
        .zip(ids)
        .map(|(l, id)| l.map(Label::sign).ok_or_else(|| CliError::new(ErrorKind::InvalidData, format!("subject {id} has no label"))))
        .collect()
}

fn write_fit(o: &mut Outputs, model: &ModelFile, draws: &PosteriorDraws) -> Result<()> {
    o.write("draws.jsonl", &draws_jsonl(draws))?;
    o.write("model.json", &json_bytes(model))?;
    let delta: f64 = draws.cluster_counts().iter().sum::<usize>() as f64 / draws.len().max(1) as f64;
    println!("{} draws from {} chains, {} coefficients, mean clusters {delta:.2}", draws.len(), draws.n_chains, draws.n_coefficients);
    Ok(())
}

fn fit_static_table(ctx: &Ctx, t: &TableFile, o: &mut Outputs) -> Result<()> {
    let labeled = t.subset(&t.labeled_rows());
    let opts = ctx.cfg.design_options();
    let eft = static_design(&labeled, opts, None)?;
    let data = svm_static::prepare_static(&eft, &ctx.hyper()?)?;
    let draws = run_static(&data, &ctx.hyper()?, &ctx.pool)?;
    let model = ModelFile {
        version: VERSION.into(),
        kind: ModelKind::Static,
        columns: eft.columns.clone(),
        covariate_names: eft.covariate_names.clone(),
        include_covariates: opts.include_covariates,
        intercept: opts.intercept,
        standardization: vec![eft.standardization.clone().unwrap_or_else(|| Standardization::identity(eft.n_coefficients()))],
        method: None,
        window: None,
        basis: None,
        n_chains: draws.n_chains,
        n_coefficients: draws.n_coefficients,
        n_edges: 0,
        n_features: 0,
        n_draws: draws.len(),
    };
    write_fit(o, &model, &draws)
}

pub fn fit_static(ctx: &Ctx, table: &Path, out: &Path) -> Result<()> {
    let t = TableFile::read(table)?;
    if t.is_dynamic() {
        return Err(CliError::usage("dynamic table given to fit-static; use fit-dynamic"));
    }
    let mut o = ctx.outputs(out)?;
    o.input(table)?;
    fit_static_table(ctx, &t, &mut o)?;
    o.finish(&ctx.cfg)
}

pub fn fit_dynamic(ctx: &Ctx, table: &Path, out: &Path) -> Result<()> {
    let t = TableFile::read(table)?;
    let mut o = ctx.outputs(out)?;
    o.input(table)?;
    let labeled = t.subset(&t.labeled_rows());
    let all: Vec<usize> = (0..labeled.ids.len()).collect();
    let d = dynamic_design(&labeled, &ctx.cfg, &all)?;
    let z = label_signs(&labeled.labels, &labeled.ids)?;
    let data = DynamicData::new(d.tables, d.covariates, z)?;
    let draws = run_dynamic(&data, &ctx.hyper()?, &ctx.pool)?;
    let opts = ctx.cfg.design_options();
    let model = ModelFile {
        version: VERSION.into(),
        kind: ModelKind::Dynamic,
        columns: d.base,
        covariate_names: d.covariate_names,
        include_covariates: opts.include_covariates,
        intercept: opts.intercept,
        standardization: d.stats,
        method: t.meta.method,
        window: t.meta.window,
        basis: t.meta.basis.clone(),
        n_chains: draws.n_chains,
        n_coefficients: draws.n_coefficients,
        n_edges: draws.n_edges,
        n_features: draws.n_features,
        n_draws: draws.len(),
    };
    write_fit(&mut o, &model, &draws)?;
    o.finish(&ctx.cfg)
}

pub fn fit_multisession(ctx: &Ctx, a: &Path, b: &Path, tags: &[String], out: &Path) -> Result<()> {
    let [tag_a, tag_b] = tags else {
        return Err(CliError::usage("--tags needs exactly two session tags"));
    };
    if tag_a == tag_b {
        return Err(CliError::usage("session tags must differ"));
    }
    let ta = TableFile::read(a)?;
    let tb = TableFile::read(b)?;
    if ta.is_dynamic() || tb.is_dynamic() {
        return Err(CliError::usage("multi-session fits take static tables"));
    }
    if ta.ids != tb.ids {
        return Err(CliError::new(ErrorKind::InvalidData, "sessions must list the same subjects in the same order"));
    }
    if let Some(i) = (0..ta.ids.len()).find(|&i| matches!((ta.labels[i], tb.labels[i]), (Some(x), Some(y)) if x != y)) {
        return Err(CliError::new(ErrorKind::InvalidData, format!("subject {} has conflicting labels across sessions", ta.ids[i])));
    }
    let mut o = ctx.outputs(out)?;
    o.input(a)?;
    o.input(b)?;
    let rows = training_rows(&ta);
    let sd = ctx.cfg.f64("sd_threshold");
    let keep_a = screen_edges(&ta.edges, &rows, sd)?;
    let keep_b = screen_edges(&tb.edges, &rows, sd)?;
    let session = |t: &TableFile, tag: &str| SessionEdges {
        tag: tag.into(),
        values: t.edges.clone(),
        pairs: t.meta.columns.iter().map(|c| (c.k, c.l)).collect(),
    };
    let block = multisession_union(&keep_a, &keep_b, &session(&ta, tag_a), &session(&tb, tag_b))?;
    let mut union = ta.clone();
    union.edges = block.values;
    union.meta.columns = block.columns;
    o.write("table.csv", &union.csv())?;
    o.write("table.json", &union.sidecar())?;
    println!("session {tag_a}: {} edges, session {tag_b}: {} edges, union {}", keep_a.len(), keep_b.len(), union.meta.columns.len() / 2);
    fit_static_table(ctx, &union, &mut o)?;
    o.finish(&ctx.cfg)
}

// ---------------------------------------------------------------- prediction

fn find_columns(t: &TableFile, wanted: &[EdgeDescriptor], available: &[EdgeDescriptor]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            available.iter().position(|c| c == w).ok_or_else(|| {
                CliError::new(ErrorKind::InvalidData, format!("table lacks column {} used by the model ({} subjects)", column_name(w, false), t.ids.len()))
            })
        })
        .collect()
}

/// Design of `t` in the model's column order with the model's
/// standardization.
fn model_design(model: &ModelFile, t: &TableFile) -> Result<Matrix> {
    let raw_cov: Vec<String> = match model.intercept {
        true => model.covariate_names[..model.covariate_names.len().saturating_sub(1)].to_vec(),
        false => model.covariate_names.clone(),
    };
    match model.kind {
        ModelKind::Static => {
            if t.is_dynamic() {
                return Err(CliError::usage("static model given a dynamic table"));
            }
            let idx = find_columns(t, &model.columns, &t.meta.columns)?;
            let (cov, names) = raw_dynamic_covariates(t, &raw_cov, true, false)?;
            let mut eft = assemble_design(
                t.ids.clone(),
                EdgeBlock { values: t.edges.select_columns(idx.iter()), columns: model.columns.clone() },
                cov,
                names,
                t.labels.clone(),
                DesignOptions { include_covariates: true, intercept: model.intercept, standardize: false },
                None,
            )?;
            eft.standardization = model.standardization.first().cloned();
            Ok(eft.design()?)
        }
        ModelKind::Dynamic => {
            if !t.is_dynamic() {
                return Err(CliError::usage("dynamic model given a static table"));
            }
            if model.basis.is_some() && t.meta.basis != model.basis {
                return Err(CliError::new(ErrorKind::InvalidData, "table features were extracted with a different PCA basis"));
            }
            let (base, blocks) = t.feature_blocks()?;
            if blocks.len() != model.n_features {
                return Err(CliError::new(
                    ErrorKind::InvalidData,
                    format!("table has {} features per edge, model expects {}", blocks.len(), model.n_features),
                ));
            }
            let idx = find_columns(t, &model.columns, &base)?;
            let mut tables = Vec::with_capacity(blocks.len());
            for (b, s) in blocks.iter().zip(&model.standardization) {
                tables.push(s.apply(&b.select_columns(idx.iter()))?);
            }
            let (cov, _) = raw_dynamic_covariates(t, &raw_cov, true, model.intercept)?;
            let s = model
                .standardization
                .get(model.n_features)
                .ok_or_else(|| CliError::malformed(Path::new("model.json"), "missing covariate standardization"))?;
            Ok(product_design(&tables, &s.apply(&cov)?)?)
        }
    }
}

fn predictions_csv(t: &TableFile, p: &Prediction) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "score", "label", "vote_fraction", "truth"]).expect("in-memory write");
    for i in 0..t.ids.len() {
        let truth = t.labels[i].map(|l| format!("{}", l.sign() as i64)).unwrap_or_default();
        w.write_record([
            t.ids[i].clone(),
            p.scores[i].to_string(),
            format!("{}", p.labels[i].sign() as i64),
            p.vote_fraction[i].to_string(),
            truth,
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn predict_table(model_dir: &Path, table: &Path, o: &mut Outputs) -> Result<(TableFile, Prediction)> {
    let (model, draws) = read_model(model_dir)?;
    o.input(&model_dir.join("model.json"))?;
    o.input(&model_dir.join("draws.jsonl"))?;
    o.input(table)?;
    let t = TableFile::read(table)?;
    let u = model_design(&model, &t)?;
    let p = predict(&draws, &u)?;
    Ok((t, p))
}

pub fn predict_cmd(ctx: &Ctx, model_dir: &Path, table: &Path, out: &Path) -> Result<()> {
    let mut o = ctx.outputs(out)?;
    let (t, p) = predict_table(model_dir, table, &mut o)?;
    o.write("predictions.csv", &predictions_csv(&t, &p))?;
    println!("{} subjects scored", t.ids.len());
    o.finish(&ctx.cfg)
}

// ---------------------------------------------------------------- selection

#[derive(Serialize)]
struct NamedInterval<'a> {
    name: &'a str,
    index: usize,
    mean: f64,
    lower: f64,
    upper: f64,
    significant: bool,
}

#[derive(Serialize)]
struct FeaturesFile<'a> {
    alpha: f64,
    adjust: dplsvm_core::eval::Adjust,
    alpha_used: f64,
    features: Vec<NamedInterval<'a>>,
}

#[derive(Serialize)]
struct ReproducibleFile {
    n_splits: usize,
    test_fraction: f64,
    splits: Vec<dplsvm_core::eval::Split>,
    per_split: Vec<Vec<String>>,
    reproducible: Vec<String>,
}

pub fn select_features(ctx: &Ctx, model_dir: &Path, reproducible: Option<&Path>, out: &Path) -> Result<()> {
    let mut o = ctx.outputs(out)?;
    let (model, draws) = read_model(model_dir)?;
    o.input(&model_dir.join("model.json"))?;
    o.input(&model_dir.join("draws.jsonl"))?;
    let alpha = ctx.cfg.f64("alpha");
    let adjust = ctx.cfg.adjust();
    let report = credible_select(&draws, alpha, adjust)?;
    let names = model.coefficient_names();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "mean", "lower", "upper", "significant"]).expect("in-memory write");
    for f in &report.features {
        w.write_record([names[f.index].clone(), f.mean.to_string(), f.lower.to_string(), f.upper.to_string(), f.significant.to_string()])
            .expect("in-memory write");
    }
    o.write("features.csv", &w.into_inner().expect("in-memory write"))?;
    let file = FeaturesFile {
        alpha: report.alpha,
        adjust: report.adjust,
        alpha_used: report.alpha_used,
        features: report
            .features
            .iter()
            .map(|f| NamedInterval { name: &names[f.index], index: f.index, mean: f.mean, lower: f.lower, upper: f.upper, significant: f.significant })
            .collect(),
    };
    o.write("features.json", &json_bytes(&file))?;
    println!("{} of {} coefficients significant", report.significant().len(), names.len());

    if let Some(table) = reproducible {
        if model.kind != ModelKind::Static {
            return Err(CliError::usage("--reproducible supports static models"));
        }
        o.input(table)?;
        let t = TableFile::read(table)?;
        let labeled = t.subset(&t.labeled_rows());
        let eft = static_design(&labeled, ctx.cfg.design_options(), None)?;
        let coef_names = {
            let mut v: Vec<String> = eft.columns.iter().map(|c| column_name(c, false)).collect();
            v.extend(eft.covariate_names.iter().map(|c| format!("cov:{c}")));
            v
        };
        let hyper = ctx.hyper()?;
        let n_splits = ctx.cfg.usize("n_splits");
        let test_fraction = ctx.cfg.f64("test_fraction");
        let rep = reproducible_features(&eft, n_splits, test_fraction, alpha, adjust, hyper.seed, |_, train| {
            let data = svm_static::prepare_static(train, &hyper)?;
            run_static(&data, &hyper, &ctx.pool)
        })?;
        let named = |v: &[usize]| v.iter().map(|&i| coef_names[i].clone()).collect::<Vec<_>>();
        let file = ReproducibleFile {
            n_splits,
            test_fraction,
            per_split: rep.per_split.iter().map(|s| named(s)).collect(),
            reproducible: named(&rep.reproducible),
            splits: rep.splits,
        };
        o.write("reproducible.json", &json_bytes(&file))?;
        println!("{} coefficients significant in all {n_splits} splits", file.reproducible.len());
    }
    o.finish(&ctx.cfg)
}

// ---------------------------------------------------------------- evaluation

#[derive(Serialize)]
struct MetricsFile {
    subjects: usize,
    #[serde(flatten)]
    report: MetricsReport,
}

fn read_predictions(path: &Path) -> Result<(Vec<Label>, Vec<Label>)> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let headers = rdr.headers().map_err(|e| CliError::malformed(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| CliError::malformed(path, format!("missing `{name}` column")));
    let (lc, tc) = (col("label")?, col("truth")?);
    let parse = |s: &str, row: usize| {
        s.parse::<i64>().ok().and_then(Label::from_i64).ok_or_else(|| CliError::malformed(path, format!("row {row}: bad label `{s}`")))
    };
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::malformed(path, e))?;
        if rec[tc].is_empty() {
            continue;
        }
        truth.push(parse(&rec[tc], i + 2)?);
        pred.push(parse(&rec[lc], i + 2)?);
    }
    if truth.is_empty() {
        return Err(CliError::new(ErrorKind::InvalidData, format!("{}: no rows carry a truth label", path.display())));
    }
    Ok((truth, pred))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectWhat {
    Density,
    Window,
}

pub struct EvaluateArgs<'a> {
    pub predictions: Option<&'a Path>,
    pub model: Option<&'a Path>,
    pub table: Option<&'a Path>,
    pub select: Option<SelectWhat>,
    pub manifest: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let mut o = ctx.outputs(a.out)?;
    match (a.predictions, a.model, a.table, a.select, a.manifest) {
        (Some(p), None, None, None, None) => {
            o.input(p)?;
            let (truth, pred) = read_predictions(p)?;
            write_metrics(&mut o, &truth, &pred)?;
        }
        (None, Some(m), Some(t), None, None) => {
            let (table, p) = predict_table(m, t, &mut o)?;
            o.write("predictions.csv", &predictions_csv(&table, &p))?;
            let rows: Vec<usize> = table.labeled_rows();
            let truth: Vec<Label> = rows.iter().map(|&i| table.labels[i].expect("labeled")).collect();
            let pred: Vec<Label> = rows.iter().map(|&i| p.labels[i]).collect();
            if truth.is_empty() {
                return Err(CliError::new(ErrorKind::InvalidData, "table has no labeled subjects to evaluate"));
            }
            write_metrics(&mut o, &truth, &pred)?;
        }
        (None, None, None, Some(what), Some(manifest)) => {
            o.input(manifest)?;
            let sel = validation_curve(ctx, manifest, what, &mut o)?;
            let name = if what == SelectWhat::Density { "density" } else { "window" };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([name, "mc", "f1", "informedness", "precision", "recall", "specificity", "error"]).expect("in-memory write");
            for c in &sel.outcomes {
                let rec = match &c.report {
                    Ok(r) => vec![
                        c.value.to_string(),
                        r.mc.to_string(),
                        r.f1.to_string(),
                        r.informedness.to_string(),
                        r.precision.to_string(),
                        r.recall.to_string(),
                        r.specificity.to_string(),
                        String::new(),
                    ],
                    Err(e) => {
                        let mut v = vec![c.value.to_string()];
                        v.extend(std::iter::repeat(String::new()).take(6));
                        v.push(e.clone());
                        v
                    }
                };
                w.write_record(rec).expect("in-memory write");
            }
            o.write("validation.csv", &w.into_inner().expect("in-memory write"))?;
            o.write("selection.json", &json_bytes(&sel))?;
            println!("selected {name} {}", sel.chosen_value);
        }
        _ => {
            return Err(CliError::usage(
                "evaluate takes --predictions, or --model with --table, or --select with --manifest",
            ))
        }
    }
    o.finish(&ctx.cfg)
}

fn write_metrics(o: &mut Outputs, truth: &[Label], pred: &[Label]) -> Result<()> {
    let report = metrics(truth, pred)?;
    println!("MC {:.4}  F1 {:.4}  informedness {:.4}  ({} subjects)", report.mc, report.f1, report.informedness, truth.len());
    o.write("metrics.json", &json_bytes(&MetricsFile { subjects: truth.len(), report }))
}

/// One stratified train/validation split of the labeled manifest subjects;
/// indices refer to the manifest.
fn validation_split(ctx: &Ctx, labels: &[Option<Label>]) -> Result<(Vec<usize>, Vec<usize>)> {
    let labeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let l: Vec<Label> = labeled.iter().map(|&i| labels[i].expect("labeled")).collect();
    let split = stratified_splits(&l, 1, ctx.cfg.f64("validation_fraction"), ctx.cfg.seed())?.remove(0);
    if split.test.is_empty() {
        return Err(CliError::usage("validation_fraction leaves no validation subjects"));
    }
    Ok((split.train.iter().map(|&i| labeled[i]).collect(), split.test.iter().map(|&i| labeled[i]).collect()))
}

fn truth_of(t: &TableFile, rows: &[usize]) -> Vec<Label> {
    rows.iter().map(|&i| t.labels[i].expect("labeled")).collect()
}

fn fit_eval_static(ctx: &Ctx, t: &TableFile, train: &[usize], test: &[usize]) -> Result<MetricsReport> {
    let keep = screen_edges(&t.edges, train, ctx.cfg.f64("sd_threshold"))?;
    let t = select_edges(t, &keep)?;
    let eft = static_design(&t, ctx.cfg.design_options(), Some(train))?;
    let hyper = ctx.hyper()?;
    let data = svm_static::prepare_static(&eft.subset(train), &hyper)?;
    let draws = run_static(&data, &hyper, &ctx.pool)?;
    let p = predict(&draws, &eft.subset(test).design()?)?;
    Ok(metrics(&truth_of(&t, test), &p.labels)?)
}

fn fit_eval_dynamic(ctx: &Ctx, t: &TableFile, mean: &TableFile, train: &[usize], test: &[usize]) -> Result<MetricsReport> {
    let keep = screen_edges(&screening_matrix(t, Some(mean))?, train, ctx.cfg.f64("sd_threshold"))?;
    let t = select_edges(t, &keep)?;
    let d = dynamic_design(&t, &ctx.cfg, train)?;
    let pick = |m: &Matrix, rows: &[usize]| m.select_rows(rows.iter());
    let z = label_signs(&truth_of(&t, train).into_iter().map(Some).collect::<Vec<_>>(), &t.ids)?;
    let data = DynamicData::new(d.tables.iter().map(|m| pick(m, train)).collect(), pick(&d.covariates, train), z)?;
    let draws = run_dynamic(&data, &ctx.hyper()?, &ctx.pool)?;
    let test_tables: Vec<Matrix> = d.tables.iter().map(|m| pick(m, test)).collect();
    let u = product_design(&test_tables, &pick(&d.covariates, test))?;
    let p = predict(&draws, &u)?;
    Ok(metrics(&truth_of(&t, test), &p.labels)?)
}

/// Fits on the training split at every candidate and scores the validation
/// split. Dynamic candidates fit the PCA basis (if any) on all subjects; it
/// never sees labels.
fn validation_curve(ctx: &Ctx, manifest: &Path, what: SelectWhat, o: &mut Outputs) -> Result<ValidationSelection> {
    let m = read_manifest(manifest)?;
    for p in &m.series_paths {
        o.input(p)?;
    }
    let labels = manifest_labels(&m, &ctx.cfg)?;
    let (train, test) = validation_split(ctx, &labels)?;
    let as_core = |e: CliError| dplsvm_core::Error::InvalidArgument(e.message);
    let sel = match what {
        SelectWhat::Density => {
            let corr = correlations(ctx, &m)?;
            let grid = ctx.cfg.f64_list("density_grid");
            select_by_validation(&grid, Prefer::Smaller, |d| {
                let nets = networks_at(ctx, &m, &corr, d).map_err(as_core)?;
                let t = static_table(&m, &nets, labels.clone()).map_err(as_core)?;
                fit_eval_static(ctx, &t, &train, &test).map_err(as_core)
            })?
        }
        SelectWhat::Window => {
            let grid: Vec<f64> = ctx.cfg.usize_list("window_grid").into_iter().map(|w| w as f64).collect();
            select_by_validation(&grid, Prefer::Larger, |w| {
                let w = w as usize;
                let series = window_series(ctx, &m, w).map_err(as_core)?;
                let (t, mean) = dynamic_tables(ctx, &m, &series, labels.clone(), w).map_err(as_core)?;
                fit_eval_dynamic(ctx, &t, &mean, &train, &test).map_err(as_core)
            })?
        }
    };
    Ok(sel)
}

// ---------------------------------------------------------------- synthetic data

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Static,
    Dynamic,
    Scans,
}

#[derive(Serialize)]
struct Signal {
    name: String,
    index: usize,
    group: usize,
    coefficient: f64,
}

#[derive(Serialize)]
struct Truth<'a> {
    bayes_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<&'a [f64]>,
    signals: Vec<Signal>,
    beta: &'a [f64],
}

fn synth_spec(cfg: &RunConfig) -> Result<SynthSpec> {
    let mut spec = SynthSpec::two_groups(
        cfg.usize("synth_n"),
        cfg.usize("synth_q"),
        cfg.f64("synth_strong"),
        cfg.f64("synth_weak"),
        cfg.seed(),
    );
    spec.c = cfg.usize("synth_c");
    Ok(spec.with_bayes_error(cfg.f64("synth_bayes_error"))?)
}

fn signals(columns: &[EdgeDescriptor], sig: &[(usize, usize)], beta: &[f64]) -> Vec<Signal> {
    sig.iter()
        .map(|&(j, g)| Signal { name: column_name(&columns[j], false), index: j, group: g, coefficient: beta[j] })
        .collect()
}

pub fn synth(ctx: &Ctx, kind: SynthKind, out: &Path) -> Result<()> {
    let mut o = ctx.outputs(out)?;
    let cfg = &ctx.cfg;
    match kind {
        SynthKind::Static => {
            let d = generate(&synth_spec(cfg)?)?;
            let t = TableFile {
                ids: d.table.ids.clone(),
                labels: d.table.labels.clone(),
                edges: d.table.values.clone(),
                covariates: d.table.covariates.clone(),
                meta: TableMeta {
                    kind: TableKind::Static,
                    columns: d.table.columns.clone(),
                    covariate_names: d.table.covariate_names.clone(),
                    method: None,
                    window: None,
                    basis: None,
                    standardization: None,
                },
            };
            o.write("table.csv", &t.csv())?;
            o.write("table.json", &t.sidecar())?;
            let truth = Truth { bayes_error: d.bayes_error, eta: None, signals: signals(&t.meta.columns, &d.signals, &d.beta), beta: &d.beta };
            o.write("truth.json", &json_bytes(&truth))?;
            println!("{} subjects, {} edges, Bayes error {:.4}", t.ids.len(), t.meta.columns.len(), d.bayes_error);
        }
        SynthKind::Dynamic => {
            let eta = cfg.f64_list("synth_eta");
            let d = generate_dynamic(&synth_spec(cfg)?, &eta, cfg.usize("synth_len"))?;
            let ids: Vec<String> = (0..d.labels.len()).map(|i| format!("s{i:04}")).collect();
            let labels: Vec<Option<Label>> = d.labels.iter().copied().map(Some).collect();
            let template = TableMeta {
                kind: TableKind::Dynamic,
                columns: Vec::new(),
                covariate_names: (0..d.covariates.ncols()).map(|j| format!("cov{j}")).collect(),
                method: Some(d.features.method),
                window: None,
                basis: d.features.basis.clone(),
                standardization: None,
            };
            let t = block_table(ids.clone(), labels.clone(), &d.features.columns, &d.features.tables, d.covariates.clone(), &template);
            let mean = mean_table(ids, labels, d.features.columns.clone(), series_mean_table(&d.series));
            o.write("table.csv", &t.csv())?;
            o.write("table.json", &t.sidecar())?;
            o.write("window_mean.csv", &mean.csv())?;
            let truth = Truth { bayes_error: d.bayes_error, eta: Some(&d.eta), signals: signals(&d.features.columns, &d.signals, &d.beta), beta: &d.beta };
            o.write("truth.json", &json_bytes(&truth))?;
            println!("{} subjects, {} edges, R = {}, Bayes error {:.4}", t.ids.len(), d.features.columns.len(), eta.len(), d.bayes_error);
        }
        SynthKind::Scans => {
            let spec = ScanSpec {
                n: cfg.usize("synth_n"),
                v: cfg.usize("synth_v"),
                t: cfg.usize("synth_t"),
                signal_edges: cfg.usize("synth_signal_edges"),
                effect: cfg.f64("synth_effect"),
                label_noise: cfg.f64("synth_label_noise"),
                c: cfg.usize("synth_c"),
                seed: cfg.seed(),
            };
            let s = generate_scans(&spec)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["id".to_string(), "series".into(), "label".into()];
            header.extend((0..spec.c).map(|j| format!("cov{j}")));
            w.write_record(&header).expect("in-memory write");
            for scan in &s.scans {
                let file = format!("series/{}.csv", scan.id);
                o.write(&file, &matrix_csv(&scan.series, None))?;
                let mut rec = vec![scan.id.clone(), file, scan.label.map(|l| format!("{}", l.sign() as i64)).unwrap_or_default()];
                rec.extend(scan.covariates.iter().map(|c| c.to_string()));
                w.write_record(rec).expect("in-memory write");
            }
            o.write("manifest.csv", &w.into_inner().expect("in-memory write"))?;
            #[derive(Serialize)]
            struct ScanTruth {
                signal_pairs: Vec<(usize, usize)>,
                true_density: f64,
                spec: ScanSpec,
            }
            o.write("truth.json", &json_bytes(&ScanTruth { signal_pairs: s.signal_pairs, true_density: s.true_density, spec: spec.clone() }))?;
            println!("{} subjects, {} regions, {} time points", s.scans.len(), spec.v, spec.t);
        }
    }
    o.finish(cfg)
}

// ---------------------------------------------------------------- diagnostics

const GEWEKE_Z: f64 = 4.0;
const DELTA_TOLERANCE: f64 = 0.05;

pub struct DiagnoseArgs<'a> {
    pub geweke: bool,
    pub prior_delta: bool,
    pub rhat: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn diagnose(ctx: &Ctx, a: DiagnoseArgs) -> Result<()> {
    if !a.geweke && !a.prior_delta && a.rhat.is_none() {
        return Err(CliError::usage("diagnose needs --geweke, --prior-delta or --rhat"));
    }
    let mut o = ctx.outputs(a.out)?;
    let seed = ctx.cfg.seed();
    let mut failures = Vec::new();

    if a.geweke {
        let samples = ctx.cfg.usize("geweke_samples");
        let (st, dy) = ctx.pool.install(|| {
            rayon::join(
                || geweke_static(&static_problem(8, 3, seed), &static_hyper(seed), samples),
                || {
                    let s = seed.wrapping_add(1);
                    geweke_dynamic(&dynamic_problem(6, 2, 2, 1, s), &dynamic_hyper(2, s), samples)
                },
            )
        });
        let reports = [st?, dy?];
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "statistic", "forward_mean", "chain_mean", "z"]).expect("in-memory write");
        for r in &reports {
            for s in &r.stats {
                w.write_record([r.model.clone(), s.name.clone(), s.forward_mean.to_string(), s.chain_mean.to_string(), s.z.to_string()])
                    .expect("in-memory write");
            }
            let pass = r.passes(GEWEKE_Z);
            println!("geweke {}: {} statistics, max |z| {:.2}: {}", r.model, r.stats.len(), r.max_abs_z(), if pass { "pass" } else { "FAIL" });
            if !pass {
                failures.push(format!("Geweke {} max |z| {:.2}", r.model, r.max_abs_z()));
            }
        }
        o.write("geweke.csv", &w.into_inner().expect("in-memory write"))?;
        o.write("geweke.json", &json_bytes(&reports))?;
    }

    if a.prior_delta {
        let sweeps = ctx.cfg.usize("delta_sweeps");
        let check = prior_cluster_count(ctx.cfg.f64("m"), ctx.cfg.usize("delta_p"), sweeps, sweeps / 20, seed)?;
        let pass = check.relative_error <= DELTA_TOLERANCE;
        println!(
            "prior clusters (M = {}, P = {}): mean {:.3}, expected {:.3}: {}",
            check.m,
            check.p,
            check.mean_delta,
            check.expected,
            if pass { "pass" } else { "FAIL" }
        );
        if !pass {
            failures.push(format!("prior cluster count off by {:.1}%", 100.0 * check.relative_error));
        }
        o.write("prior_delta.json", &json_bytes(&check))?;
    }

    if let Some(dir) = a.rhat {
        let (model, draws) = read_model(dir)?;
        o.input(&dir.join("model.json"))?;
        o.input(&dir.join("draws.jsonl"))?;
        let m = draws.coefficient_matrix()?;
        let mut series: Vec<(String, Vec<f64>)> =
            model.coefficient_names().into_iter().enumerate().map(|(j, n)| (n, m.column(j).iter().copied().collect())).collect();
        series.push(("sigma_eps2".into(), draws.draws.iter().map(|d| d.sigma_eps2).collect()));
        series.push(("delta".into(), draws.draws.iter().map(|d| d.delta as f64).collect()));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "mean", "mcse", "rhat"]).expect("in-memory write");
        let mut worst: f64 = 0.0;
        for (name, x) in &series {
            let chains: Vec<Vec<f64>> = (0..draws.n_chains)
                .map(|c| draws.draws.iter().zip(x).filter(|(d, _)| d.chain == c).map(|(_, v)| *v).collect())
                .collect();
            let rhat = split_rhat(&chains);
            if let Some(r) = rhat {
                worst = worst.max(r);
            }
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            w.write_record([name.clone(), mean.to_string(), batch_means_se(x).to_string(), rhat.map(|r| r.to_string()).unwrap_or_default()])
                .expect("in-memory write");
        }
        o.write("rhat.csv", &w.into_inner().expect("in-memory write"))?;
        println!("split R-hat over {} quantities, worst {worst:.4}", series.len());
    }

    o.finish(&ctx.cfg)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(ErrorKind::CheckFailed, failures.join("; ")))
    }
}
