//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use pcdrift::adequacy::{kmo, partial_correlations};
use pcdrift::config::{RunConfig, WindowChoice};
use pcdrift::eigen::{decompose, decompose_symmetric, reconstruct};
use pcdrift::evolution::{angle_between, angle_series, sweep, SweepOptions};
use pcdrift::fixtures::{market_sectors, to_csv, to_prices, two_regime_default};
use pcdrift::ingest::ReturnKind;
use pcdrift::matrix::Matrix;
use pcdrift::pipeline::run;
use pcdrift::retention::{cumulative_variance, kaiser_rule, scree_data, KaiserMode};
use pcdrift::rolling::{correlation, plan_windows, sweep_correlations, sweep_map, CorrelationMatrix};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn pca_invariants() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let (mut orth, mut trace, mut recon) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..1000 {
        let n = rng.random_range(2..=50);
        // every fourth matrix is rank deficient
        let m = if case % 4 == 0 {
            rng.random_range(1..n)
        } else {
            n + rng.random_range(0..3 * n)
        };
        let r = CorrelationMatrix::try_from_matrix(random_correlation(&mut rng, n, m)).map_err(|e| e.to_string())?;
        let d = decompose(&r).map_err(|e| e.to_string())?;
        let v = d.eigenvectors();
        orth = orth.max(v.transpose().matmul(v).max_abs_diff(&Matrix::identity(n)));
        trace = trace.max((d.eigenvalues().iter().sum::<f64>() - n as f64).abs());
        recon = recon.max(reconstruct(&d).as_matrix().max_abs_diff(r.as_matrix()));
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(orth < 1e-8, || format!("orthonormality error {orth:e}"))?;
    ensure(trace < 1e-8, || format!("trace error {trace:e}"))?;
    ensure(recon < 1e-8, || format!("reconstruction error {recon:e}"))?;
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("1000 matrices, max errors orth {orth:.1e} trace {trace:.1e} recon {recon:.1e}, {secs:.2} s"))
}

fn eigen_oracle_agreement() -> Outcome {
    let mut rng = rng(2);
    let (mut val_err, mut sub_err) = (0.0f64, 0.0f64);
    let mut tied = 0;
    for case in 0..200 {
        let n = rng.random_range(2..=6);
        let a = match case % 4 {
            // planted repeated eigenvalues
            0 => {
                let mut vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
                let rep = rng.random_range(2..=n);
                let v = vals[0];
                vals[..rep].iter_mut().for_each(|x| *x = v);
                with_spectrum(&mut rng, &vals)
            }
            // rank deficient: repeated zero eigenvalues when n − m ≥ 2
            1 => {
                let m = rng.random_range(1..=n);
                random_correlation(&mut rng, n, m)
            }
            _ => {
                let m = n + rng.random_range(0..10);
                random_correlation(&mut rng, n, m)
            }
        };
        let ours = decompose_symmetric(&a).map_err(|e| e.to_string())?;
        let clusters = eigen_oracle(&a, 1e-2);
        let mut idx = 0;
        for c in &clusters {
            let m = c.eigenvalues.len();
            if m > 1 {
                tied += 1;
            }
            for (j, &l) in c.eigenvalues.iter().enumerate() {
                val_err = val_err.max((ours.eigenvalues()[idx + j] - l).abs());
            }
            let ours_basis: Vec<Vec<f64>> = (idx..idx + m).map(|j| ours.vector(j)).collect();
            let p = projector(&ours_basis, n);
            let q = projector(&c.basis, n);
            for i in 0..n {
                for j in 0..n {
                    sub_err = sub_err.max((p[i][j] - q[i][j]).abs());
                }
            }
            idx += m;
        }
        ensure(idx == n, || format!("case {case}: oracle found {idx} of {n} eigenvalues"))?;
    }
    ensure(val_err < 1e-8, || format!("eigenvalue error {val_err:e}"))?;
    ensure(sub_err < 1e-8, || format!("eigenspace projector error {sub_err:e}"))?;
    Ok(format!("200 matrices ({tied} tied clusters), eigenvalue err {val_err:.1e}, subspace err {sub_err:.1e}"))
}

fn compound_symmetry() -> Outcome {
    let (mut l_err, mut v_err) = (0.0f64, 0.0f64);
    for &rho in &[0.1, 0.5, 0.9] {
        for &n in &[3usize, 10, 50] {
            let d = decompose(&CorrelationMatrix::equicorrelated(n, rho)).map_err(|e| e.to_string())?;
            l_err = l_err.max((d.eigenvalues()[0] - (1.0 + (n as f64 - 1.0) * rho)).abs());
            let u = 1.0 / (n as f64).sqrt();
            for x in d.vector(0) {
                v_err = v_err.max((x - u).abs());
            }
        }
    }
    ensure(l_err < 1e-10, || format!("leading eigenvalue error {l_err:e}"))?;
    ensure(v_err < 1e-8, || format!("first eigenvector error {v_err:e}"))?;
    Ok(format!("9 cases, eigenvalue err {l_err:.1e}, vector err {v_err:.1e}"))
}

fn kmo_oracle() -> Outcome {
    let mut rng = rng(4);
    let (mut q_err, mut k_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let t = rng.random_range(3 * n + 10..=120);
        let s = random_series(&mut rng, t, n);
        let r_oracle = naive_correlation(&s.data, 0, t);
        let r = Matrix::from_fn(n, n, |i, j| r_oracle[i][j]);
        let r = CorrelationMatrix::try_from_matrix(r).map_err(|e| e.to_string())?;
        let q = partial_correlations(&r).map_err(|e| e.to_string())?;
        let q_oracle = regression_partials(&s.data);
        for i in 0..n {
            for j in 0..n {
                q_err = q_err.max((q[(i, j)] - q_oracle[i][j]).abs());
            }
        }
        let k = kmo(&r).map_err(|e| e.to_string())?.kmo;
        k_err = k_err.max((k - kmo_direct(&r_oracle, &q_oracle)).abs());
    }
    ensure(q_err < 1e-10, || format!("partial correlation error {q_err:e}"))?;
    ensure(k_err < 1e-10, || format!("KMO error {k_err:e}"))?;
    Ok(format!("100 instances, partial err {q_err:.1e}, KMO err {k_err:.1e}"))
}

fn rolling_equivalence() -> Outcome {
    let mut rng = rng(5);
    let mut err = 0.0f64;
    let mut windows = 0;
    for case in 0..50 {
        let t = rng.random_range(5..=200);
        let n = rng.random_range(1..=10);
        let k = rng.random_range(2..=t);
        let mut s = random_series(&mut rng, t, n);
        if case % 5 == 0 {
            // large common offset stresses the running sums
            s.data.as_mut_slice().iter_mut().for_each(|x| *x += 1e6);
        }
        let refresh = [1, 3, 17, 256][case % 4];
        let plan = plan_windows(t, k).map_err(|e| e.to_string())?;
        let fast = sweep_correlations(&s, &plan, refresh).map_err(|e| e.to_string())?;
        for (w, &start) in plan.starts.iter().enumerate() {
            let oracle = naive_correlation(&s.data, start, k);
            for i in 0..n {
                for j in 0..n {
                    err = err.max((fast[w][(i, j)] - oracle[i][j]).abs());
                }
            }
        }
        windows += plan.count();
    }
    ensure(err < 1e-10, || format!("max entry error {err:e}"))?;
    Ok(format!("50 series, {windows} windows, max entry error {err:.1e}"))
}

fn angle_correctness() -> Outcome {
    let mut rng = rng(6);
    let mut ortho_err = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let q = random_orthogonal(&mut rng, n);
        let same = angle_between(&q[0], &q[0]);
        ensure(same == 0.0, || format!("identical vectors give {same:e}"))?;
        ortho_err = ortho_err.max((angle_between(&q[0], &q[1]) - FRAC_PI_2).abs());
    }
    ensure(ortho_err < 1e-12, || format!("orthogonal error {ortho_err:e}"))?;

    let fx = two_regime_default();
    let mut s = sweep(&fx.series, fx.window, 3, SweepOptions::default()).map_err(|e| e.to_string())?;
    // negate one window's PC1 and check the fold
    let w = 10;
    let neg: Vec<f64> = s.coefficients[0].row(0).iter().map(|x| -x).collect();
    s.coefficients[0].row_mut(w).copy_from_slice(&neg);
    let a = angle_series(&s, 0, None).map_err(|e| e.to_string())?;
    ensure((a.angles_raw[w] - PI).abs() < 1e-12 && a.angles_aligned[w] < 1e-12 && a.flip_flags[w], || {
        format!("negated vector: raw {} aligned {} flip {}", a.angles_raw[w], a.angles_aligned[w], a.flip_flags[w])
    })?;

    let pc3 = angle_series(&s, 2, None).map_err(|e| e.to_string())?;
    let (mut before, mut after) = (0.0f64, 0.0f64);
    for (w, &start) in pc3.window_starts.iter().enumerate() {
        let deg = pc3.angles_aligned[w].to_degrees();
        if start + fx.window <= fx.flip_row {
            before = before.max(deg);
        } else if start >= fx.flip_row {
            after = after.max((deg - fx.rotation_deg).abs());
        }
    }
    ensure(before < 3.0, || format!("before the flip PC3 drifts {before:.2}°"))?;
    ensure(after < 3.0, || format!("after the flip PC3 is {after:.2}° off the planted 30°"))?;
    Ok(format!(
        "identity 0, orthogonal err {ortho_err:.1e}, sign fold ok; planted 30°: pre-flip max {before:.2}°, post-flip max error {after:.2}°"
    ))
}

fn regime_detection() -> Outcome {
    let fx = two_regime_default();
    let s = sweep(&fx.series, fx.window, 3, SweepOptions::default()).map_err(|e| e.to_string())?;
    let pc1 = angle_series(&s, 0, None).map_err(|e| e.to_string())?;
    let pc1_max = pc1.angles_aligned.iter().fold(0.0f64, |m, a| m.max(a.to_degrees()));
    ensure(pc1_max < 10.0, || format!("PC1 aligned angle reaches {pc1_max:.2}°"))?;

    let pc2 = angle_series(&s, 1, None).map_err(|e| e.to_string())?;
    let crossing = pc2
        .window_starts
        .iter()
        .zip(&pc2.angles_aligned)
        .find(|(_, a)| a.to_degrees() > 60.0)
        .map(|(&start, _)| start)
        .ok_or("PC2 never exceeds 60°")?;
    // windows fully inside regime B must all show the change
    let settled = pc2
        .window_starts
        .iter()
        .zip(&pc2.angles_aligned)
        .filter(|(&start, _)| start >= fx.flip_row)
        .all(|(_, a)| a.to_degrees() > 60.0);
    let limit = fx.flip_row + 2 * fx.window;
    ensure(crossing > fx.flip_row.saturating_sub(fx.window), || {
        format!("PC2 exceeds 60° at start {crossing}, before any window sees the flip")
    })?;
    ensure(crossing + fx.window <= limit, || format!("PC2 exceeds 60° only at start {crossing}"))?;
    ensure(settled, || "PC2 falls back below 60° inside regime B".into())?;
    Ok(format!(
        "PC1 max {pc1_max:.2}°; PC2 first > 60° in window starting {crossing} (ends row {}, flip at {}, limit {limit})",
        crossing + fx.window,
        fx.flip_row
    ))
}

fn retention_rules() -> Outcome {
    let e = |r: pcdrift::Result<usize>| r.map_err(|e| e.to_string());
    ensure(e(cumulative_variance(&[2.0, 1.0, 0.6, 0.4], 70.0))? == 2, || "cumulative [2,1,.6,.4] @70".into())?;
    ensure(e(cumulative_variance(&[4.0, 0.0, 0.0, 0.0], 90.0))? == 1, || "cumulative [4,0,0,0] @90".into())?;
    let l = [2.5, 1.2, 0.8, 0.5];
    ensure(kaiser_rule(&l, KaiserMode::Correlation { cutoff: 1.0 }) == 2, || "kaiser c=1".into())?;
    ensure(kaiser_rule(&l, KaiserMode::Correlation { cutoff: 0.7 }) == 3, || "kaiser c=0.7".into())?;
    let s = scree_data(&[3.0, 1.0]);
    ensure(s.points == vec![(1, 3.0), (2, 1.0)], || "scree [3,1]".into())?;
    ensure(s.log_points == vec![(1, 3f64.ln()), (2, 0.0)], || "log scree [3,1]".into())?;
    let s = scree_data(&[2.0, 0.0]);
    ensure(s.log_points.len() == 1 && s.log_points[0].0 == 1 && s.omitted == 1, || "log scree [2,0]".into())?;

    let geometric: Vec<f64> = (1..=30).map(|k| 2.0 * 0.5f64.powi(k)).collect();
    let s = scree_data(&geometric);
    let mut err = 0.0f64;
    for w in s.log_points.windows(2) {
        err = err.max((w[1].1 - w[0].1 - 0.5f64.ln()).abs());
    }
    ensure(s.log_points.len() == 30, || "geometric sequence lost points".into())?;
    ensure(err < 1e-12, || format!("log-scree slope error {err:e}"))?;
    Ok(format!("enumerated examples exact; geometric log-scree slope error {err:.1e}"))
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let mut bytes = fs::read(&path).expect("readable output file");
                if path.file_name().is_some_and(|n| n == "run.log") {
                    let text = String::from_utf8(bytes).expect("utf-8 log");
                    bytes = text
                        .lines()
                        .filter(|l| !l.starts_with("started_at") && !l.starts_with("finished_at"))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes();
                }
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

fn two_regime_config(out: &Path, workers: usize) -> Result<RunConfig, String> {
    RunConfig::load(
        fixtures_dir().join("two_regime.toml"),
        &[
            ("output_dir".into(), format!("{:?}", out.display().to_string())),
            ("workers".into(), workers.to_string()),
        ],
    )
    .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("w1"), tmp.path().join("w8"));
    run(&two_regime_config(&a, 1)?).map_err(|e| e.to_string())?;
    run(&two_regime_config(&b, 8)?).map_err(|e| e.to_string())?;
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    ensure(ta.len() > 10, || format!("only {} files written", ta.len()))?;
    ensure(ta.keys().eq(tb.keys()), || "file sets differ".into())?;
    for (path, bytes) in &ta {
        ensure(&tb[path] == bytes, || format!("{} differs", path.display()))?;
    }
    let heatmaps = ta.keys().filter(|p| p.extension().is_some_and(|e| e == "ppm")).count();
    ensure(heatmaps == 4, || format!("{heatmaps} heat maps, expected 4"))?;
    Ok(format!("{} files byte-identical with 1 and 8 workers", ta.len()))
}

fn performance() -> Outcome {
    let (t, n, k, j) = (3914, 147, 250, 10);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let returns = market_sectors(t, n, 10, 10);
    let csv = tmp.path().join("prices.csv");
    fs::write(&csv, to_csv(&returns.labels, &to_prices(&returns, 100.0, 1.0), None)).map_err(|e| e.to_string())?;
    let config = RunConfig {
        input_path: csv,
        output_dir: tmp.path().join("out"),
        returns_kind: ReturnKind::Log,
        window: WindowChoice::Fixed(k),
        components: j,
        ..RunConfig::default()
    };
    let started = Instant::now();
    let summary = run(&config).map_err(|e| e.to_string())?;
    let pipeline_secs = started.elapsed().as_secs_f64();
    ensure(summary.windows == t - k + 1, || format!("{} windows", summary.windows))?;
    ensure(pipeline_secs < 300.0, || format!("pipeline took {pipeline_secs:.1} s"))?;

    // Both paths stream windows the way the pipeline does; each matrix is reduced
    // to a digest, and every 25th window is kept for an entrywise comparison.
    let plan = plan_windows(t, k).map_err(|e| e.to_string())?;
    let digest = |c: &CorrelationMatrix<f64>| c.as_matrix().as_slice().iter().sum::<f64>();
    let keep = |w: usize, c: &CorrelationMatrix<f64>| (w % 25 == 0).then(|| c.clone());
    let started = Instant::now();
    let fast = sweep_map(&returns, &plan, 256, |w, c| Ok((digest(c), keep(w, c)))).map_err(|e| e.to_string())?;
    let fast_secs = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let slow: Vec<(f64, Option<CorrelationMatrix<f64>>)> = plan
        .starts
        .par_iter()
        .enumerate()
        .map(|(w, &s)| correlation(&returns, s, k).map(|c| (digest(&c), keep(w, &c))))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let slow_secs = started.elapsed().as_secs_f64();
    let mut diff = 0.0f64;
    for ((da, a), (db, b)) in fast.iter().zip(&slow) {
        diff = diff.max((da - db).abs() / (n * n) as f64);
        if let (Some(a), Some(b)) = (a, b) {
            diff = diff.max(a.as_matrix().max_abs_diff(b.as_matrix()));
        }
    }
    let speedup = slow_secs / fast_secs;
    ensure(speedup >= 5.0, || format!("incremental only {speedup:.1}x faster"))?;
    ensure(diff < 1e-10, || format!("paths disagree by {diff:e}"))?;
    Ok(format!(
        "T={t} N={n} k={k} J={j}: pipeline {pipeline_secs:.1} s on {} threads, W={}; incremental {fast_secs:.2} s vs naive {slow_secs:.2} s ({speedup:.0}x)",
        rayon::current_num_threads(),
        summary.windows
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("PCA invariants", pca_invariants),
        ("eigen oracle", eigen_oracle_agreement),
        ("compound symmetry", compound_symmetry),
        ("KMO oracle", kmo_oracle),
        ("rolling equivalence", rolling_equivalence),
        ("angle correctness", angle_correctness),
        ("regime detection", regime_detection),
        ("retention rules", retention_rules),
        ("determinism", determinism),
        ("performance", performance),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
