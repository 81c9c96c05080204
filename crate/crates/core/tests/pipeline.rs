use dplsvm_core::eval::{
    credible_select_matrix, metrics, reproducible_features, select_by_validation, stratified_splits, Adjust, Prefer,
};
use dplsvm_core::features::{
    assemble_design, extract_pca_features, screen_edges, upper_triangle_pairs, vectorize_upper_triangle, DesignOptions,
    EdgeBlock, EdgeDescriptor,
};
use dplsvm_core::netestim::{
    default_lambda_grid, graphical_lasso, network_at_density, pearson_correlation, sliding_window,
};
use dplsvm_core::rngkit::RandomStream;
use dplsvm_core::svm_static::{fit_static, predict};
use dplsvm_core::synth::{generate, generate_scans, ScanSpec, SynthSpec};
use dplsvm_core::{Hyperparameters, Label, Matrix};

/// Plain two-pass sample correlation of two slices.
fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    sab / (saa * sbb).sqrt()
}

#[test]
fn sinusoid_windows_match_direct_correlation() {
    let (t, w) = (200, 50);
    let mut rng = RandomStream::new(1, 0);
    let series = Matrix::from_fn(t, 3, |i, j| {
        (0.07 * i as f64 + 0.9 * j as f64).sin() + 0.05 * (j as f64 + 1.0) * (i as f64 * 0.31).cos()
    });
    let series = series.map(|x| x + 1e-3 * rng.standard_normal());
    let dynamic = sliding_window(&series, w).unwrap();
    assert_eq!(dynamic.windows.len(), t - w + 1);
    for (s, win) in dynamic.windows.iter().enumerate() {
        for a in 0..3 {
            assert_eq!(win[(a, a)], 1.0);
            for b in (a + 1)..3 {
                let xa: Vec<f64> = (s..s + w).map(|i| series[(i, a)]).collect();
                let xb: Vec<f64> = (s..s + w).map(|i| series[(i, b)]).collect();
                assert!((win[(a, b)] - corr(&xa, &xb)).abs() < 1e-12, "window {s} ({a},{b})");
                assert_eq!(win[(a, b)], win[(b, a)]);
            }
        }
    }
    let full = sliding_window(&series, t).unwrap();
    assert_eq!(full.windows, vec![pearson_correlation(&series).unwrap()]);
}

fn ar1_panel(t: usize, v: usize, seed: u64) -> Matrix {
    // Each region follows an AR(1) driven by its own noise plus a share of
    // its neighbour's, which gives the precision matrix a banded structure.
    let mut rng = RandomStream::new(seed, 0);
    let mut x = Matrix::zeros(t, v);
    for i in 1..t {
        let eps: Vec<f64> = (0..v).map(|_| rng.standard_normal()).collect();
        for j in 0..v {
            let shared = if j > 0 { 0.6 * eps[j - 1] } else { 0.0 };
            x[(i, j)] = 0.5 * x[(i - 1, j)] + eps[j] + shared;
        }
    }
    x
}

#[test]
fn density_targeting_picks_closest_grid_point() {
    let s = pearson_correlation(&ar1_panel(400, 8, 2)).unwrap();
    let grid = default_lambda_grid(&s, 10);
    let chosen = network_at_density(&s, 0.20, &grid, 1e-6, 500).unwrap();
    let gap = (chosen.density - 0.20).abs();
    let mut densities = Vec::new();
    for &lambda in &grid {
        let net = graphical_lasso(&s, lambda, 1e-6, 500).unwrap();
        assert!(gap <= (net.density - 0.20).abs() + 1e-15, "lambda {lambda}: {} beats {}", net.density, chosen.density);
        densities.push(net.density);
    }
    assert!(densities[0] >= densities[densities.len() - 1]);
    assert_eq!(graphical_lasso(&s, grid[grid.len() - 1], 1e-6, 500).unwrap().density, 0.0);
}

/// `max |(W - S)_jk - λ·sign(Ω_jk)|` over the support and the excess of
/// `|(W - S)_jk|` over λ off it, with `W` from an independent inverse.
fn kkt(s: &Matrix, omega: &Matrix, lambda: f64) -> f64 {
    let w = omega.clone().try_inverse().unwrap();
    let mut worst = 0.0f64;
    for j in 0..s.nrows() {
        for k in 0..s.nrows() {
            let g = w[(j, k)] - s[(j, k)];
            let r = if j == k {
                g.abs()
            } else if omega[(j, k)] != 0.0 {
                (g - lambda * omega[(j, k)].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

#[test]
fn density_along_the_penalty_path_can_rise() {
    // The penalized objective is strictly convex, so each solution is unique;
    // on this input one edge leaves and two enter between adjacent grid
    // points while the KKT system holds to 1e-9.
    let s = pearson_correlation(&ar1_panel(400, 8, 2)).unwrap();
    let grid = default_lambda_grid(&s, 10);
    let a = graphical_lasso(&s, grid[2], 1e-11, 5000).unwrap();
    let b = graphical_lasso(&s, grid[3], 1e-11, 5000).unwrap();
    assert!(kkt(&s, &a.precision, grid[2]) < 1e-9 && kkt(&s, &b.precision, grid[3]) < 1e-9);
    assert!(b.density > a.density, "{} vs {}", a.density, b.density);
}

#[test]
fn penalty_path_endpoints_and_kkt() {
    let s = pearson_correlation(&ar1_panel(400, 8, 5)).unwrap();
    let max_off = (0..8).flat_map(|j| (0..8).filter(move |&k| k != j).map(move |k| (j, k))).map(|(j, k)| s[(j, k)].abs()).fold(0.0, f64::max);
    assert_eq!(graphical_lasso(&s, max_off * 1.0001, 1e-10, 5000).unwrap().density, 0.0);
    assert_eq!(graphical_lasso(&s, 0.0, 1e-10, 5000).unwrap().density, 1.0);
    for &lambda in &default_lambda_grid(&s, 10) {
        let net = graphical_lasso(&s, lambda, 1e-10, 5000).unwrap();
        assert!(kkt(&s, &net.precision, lambda) < 1e-7, "lambda {lambda}");
    }
}

/// Rows `a·d₁, −a·d₁, b·d₂, −b·d₂` per subject: centred, rank 2, with the
/// variance split a² : b² between two orthonormal directions.
fn rank_two_stack(a: f64, b: f64) -> Vec<Matrix> {
    let d1 = [0.5, -0.5, 0.5, -0.5];
    let d2 = [0.5, 0.5, -0.5, -0.5];
    let rows = [(a, d1), (-a, d1), (b, d2), (-b, d2)];
    let m = Matrix::from_fn(4, 4, |e, t| rows[e].0 * rows[e].1[t]);
    vec![m.clone(), m]
}

#[test]
fn pca_retains_enough_directions() {
    let (basis, tables) = extract_pca_features(&rank_two_stack(3.0, 1.0), 0.95).unwrap();
    assert_eq!(tables.len(), 2);
    assert!((basis.explained[0] - 0.9).abs() < 1e-10 && (basis.explained[1] - 0.1).abs() < 1e-10);
    assert!((tables[0][(0, 0)].abs() - 3.0).abs() < 1e-10);
    assert!((tables[1][(0, 2)].abs() - 1.0).abs() < 1e-10);
    assert!(tables[1][(0, 0)].abs() < 1e-10);

    let (basis, tables) = extract_pca_features(&rank_two_stack(24f64.sqrt(), 1.0), 0.95).unwrap();
    assert_eq!(tables.len(), 1);
    assert!((basis.explained[0] - 0.96).abs() < 1e-10);
}

#[test]
fn standardization_follows_training_rows() {
    let mut rng = RandomStream::new(3, 0);
    let values = Matrix::from_fn(20, 3, |_, j| rng.normal(j as f64, 1.0 + j as f64));
    let columns = (0..3).map(|j| EdgeDescriptor::new(j, j + 1)).collect();
    let train: Vec<usize> = (0..14).collect();
    let table = assemble_design(
        (0..20).map(|i| format!("{i}")).collect(),
        EdgeBlock { values, columns },
        Matrix::zeros(20, 0),
        vec![],
        vec![None; 20],
        DesignOptions::default(),
        Some(&train),
    )
    .unwrap();
    let u = table.design().unwrap();
    for j in 0..3 {
        let col: Vec<f64> = train.iter().map(|&i| u[(i, j)]).collect();
        let m = col.iter().sum::<f64>() / 14.0;
        let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 13.0).sqrt();
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        let test: Vec<f64> = (14..20).map(|i| u[(i, j)]).collect();
        let tm = test.iter().sum::<f64>() / 6.0;
        assert!(tm.abs() > 1e-6, "test rows carry their own offset");
    }
}

#[test]
fn credible_interval_of_normal_draws() {
    let mut rng = RandomStream::new(4, 0);
    let m = Matrix::from_fn(1000, 1, |_, _| rng.normal(2.0, 1.0));
    let report = credible_select_matrix(&m, 0.05, Adjust::None).unwrap();
    let f = &report.features[0];
    // Order-statistic SE of the 2.5% quantile of N(0,1) at n = 1000 is about
    // 0.11, so the lower end lands on either side of 0 depending on the seed.
    assert!((f.lower - 0.04).abs() < 0.35 && (f.upper - 3.96).abs() < 0.35, "{f:?}");
    assert_eq!(f.significant, f.lower > 0.0);
    let m = Matrix::from_fn(100_000, 1, |_, _| rng.normal(2.0, 1.0));
    let f = credible_select_matrix(&m, 0.05, Adjust::None).unwrap().features.remove(0);
    assert!((f.lower - 0.04).abs() < 0.04 && (f.upper - 3.96).abs() < 0.04, "{f:?}");
    assert!(f.significant);
}

fn quick_hyper(seed: u64) -> Hyperparameters {
    Hyperparameters { n_iter: 1500, burn_in: 500, thin: 2, n_chains: 1, seed, ..Default::default() }
}

#[test]
fn planted_strong_signal_is_reproducible() {
    let reps = 20;
    let mut hits = 0;
    for rep in 0..reps {
        let mut spec = SynthSpec::two_groups(200, 10, 3.0, 0.0, 100 + rep);
        spec.groups = vec![dplsvm_core::synth::SignalGroup { count: 1, magnitude: 3.0 }];
        let spec = spec.with_bayes_error(0.05).unwrap();
        let data = generate(&spec).unwrap();
        let planted = data.signals[0].0;
        let report = reproducible_features(&data.table, 10, 0.1, 0.05, Adjust::None, rep, |s, train| {
            fit_static(train, &quick_hyper(1000 * rep + s as u64))
        })
        .unwrap();
        for per in &report.per_split {
            assert!(report.reproducible.iter().all(|i| per.contains(i)));
        }
        hits += report.reproducible.contains(&planted) as usize;
    }
    assert!(hits as f64 >= 0.9 * reps as f64, "{hits}/{reps}");
}

/// Static pipeline on scans at one target density: glasso networks, edge
/// screening and standardization on the training rows, then validation MC.
fn scan_validation_mc(scans: &dplsvm_core::synth::ScanSynth, density: f64, train: &[usize], val: &[usize], seed: u64) -> dplsvm_core::Result<dplsvm_core::eval::MetricsReport> {
    let v = scans.scans[0].series.ncols();
    let n = scans.scans.len();
    let mut edges = Matrix::zeros(n, v * (v - 1) / 2);
    for (i, scan) in scans.scans.iter().enumerate() {
        let s = pearson_correlation(&scan.series)?;
        let net = network_at_density(&s, density, &default_lambda_grid(&s, 20), 1e-6, 500)?;
        let vec = vectorize_upper_triangle(&net.precision)?;
        edges.set_row(i, &Matrix::from_row_slice(1, vec.len(), &vec).row(0));
    }
    let keep = screen_edges(&edges, train, 0.01)?;
    let pairs = upper_triangle_pairs(v);
    let block = EdgeBlock { values: edges, columns: pairs.iter().map(|&(k, l)| EdgeDescriptor::new(k, l)).collect() }.select(&keep);
    let labels: Vec<Option<Label>> = scans.scans.iter().map(|s| s.label).collect();
    let table = assemble_design(
        scans.scans.iter().map(|s| s.id.clone()).collect(),
        block,
        Matrix::zeros(n, 0),
        vec![],
        labels.clone(),
        DesignOptions::default(),
        Some(train),
    )?;
    let draws = fit_static(&table.subset(train), &quick_hyper(seed))?;
    let u = table.design()?.select_rows(val.iter());
    let pred = predict(&draws, &u)?;
    let truth: Vec<Label> = val.iter().map(|&i| labels[i].unwrap()).collect();
    metrics(&truth, &pred.labels)
}

#[test]
fn validation_prefers_the_generating_density() {
    let reps = 20;
    let mut wins = 0;
    for rep in 0..reps {
        let spec = ScanSpec { n: 300, v: 10, t: 200, signal_edges: 3, effect: 0.2, label_noise: 0.3, c: 0, seed: 500 + rep };
        let scans = generate_scans(&spec).unwrap();
        let labels: Vec<Label> = scans.scans.iter().map(|s| s.label.unwrap()).collect();
        let split = stratified_splits(&labels, 1, 0.5, rep).unwrap().remove(0);
        let candidates = [0.05, scans.true_density, 0.6];
        let sel = select_by_validation(&candidates, Prefer::Smaller, |d| scan_validation_mc(&scans, d, &split.train, &split.test, rep))
            .unwrap();
        let best = sel.outcomes.iter().filter_map(|o| o.report.as_ref().ok()).map(|r| r.mc).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.outcomes[sel.chosen].report.as_ref().unwrap().mc, best);
        wins += (sel.chosen_value == scans.true_density) as usize;
    }
    assert!(wins as f64 >= 0.7 * reps as f64, "{wins}/{reps}");
}
