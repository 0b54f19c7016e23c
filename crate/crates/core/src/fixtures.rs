//! Synthetic data sets with planted principal-component structure.
//!
//! Used by the test suites and by `examples/make_fixtures.rs`, which writes the
//! CSV fixtures shipped under `fixtures/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::SeriesMatrix;
use crate::matrix::Matrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// x_i = loading_i · f + √(1 − loading_i²) · e_i with independent standard normal f, e.
pub fn factor_series(loadings: &[f64], t: usize, seed: u64) -> SeriesMatrix<f64> {
    let mut rng = rng(seed);
    let n = loadings.len();
    let mut data = Matrix::zeros(t, n);
    for i in 0..t {
        let f = normal(&mut rng);
        for (j, &l) in loadings.iter().enumerate() {
            data[(i, j)] = l * f + (1.0 - l * l).sqrt() * normal(&mut rng);
        }
    }
    SeriesMatrix::from_matrix(data)
}

/// Single common factor with equal loadings; the population PC1 is (1, …, 1)/√n.
pub fn one_factor(n: usize, t: usize, loading: f64, seed: u64) -> SeriesMatrix<f64> {
    factor_series(&vec![loading; n], t, seed)
}

/// One factor loading +λ on even-indexed variables and −λ on odd ones, so the
/// two blocks are interleaved in input order and PC1 separates them by sign.
pub fn two_block(n: usize, t: usize, loading: f64, seed: u64) -> SeriesMatrix<f64> {
    let loadings: Vec<f64> = (0..n)
        .map(|j| if j % 2 == 0 { loading } else { -loading })
        .collect();
    factor_series(&loadings, t, seed)
}

/// Daily-return-like panel: a market factor, `sectors` sector factors and noise.
pub fn market_sectors(t: usize, n: usize, sectors: usize, seed: u64) -> SeriesMatrix<f64> {
    let mut rng = rng(seed);
    let beta: Vec<f64> = (0..n).map(|j| 0.35 + 0.3 * ((j * 37 % 101) as f64 / 100.0)).collect();
    let sector: Vec<usize> = (0..n).map(|j| j % sectors.max(1)).collect();
    let mut data = Matrix::zeros(t, n);
    let mut sector_draw = vec![0.0; sectors.max(1)];
    for i in 0..t {
        let market = normal(&mut rng);
        for s in sector_draw.iter_mut() {
            *s = normal(&mut rng);
        }
        for j in 0..n {
            let common = beta[j] * market + 0.3 * sector_draw[sector[j]];
            data[(i, j)] = 0.01 * (common + 0.8 * normal(&mut rng));
        }
    }
    SeriesMatrix::from_matrix(data)
}

/// Row `i` of the 8×8 Sylvester Hadamard matrix, scaled to unit length.
fn hadamard_row(i: usize) -> Vec<f64> {
    let s = 1.0 / 8f64.sqrt();
    (0..8)
        .map(|j| if (i & j).count_ones() % 2 == 0 { s } else { -s })
        .collect()
}

/// Planted two-regime data: N = 8 variables whose population correlation
/// matrix switches at `flip_row`.
///
/// Both regimes share PC1 (uniform loadings). PC2 jumps to an orthogonal
/// direction, and PC3 turns by `rotation_deg` inside a fixed plane.
#[derive(Debug, Clone)]
pub struct TwoRegime {
    pub series: SeriesMatrix<f64>,
    pub window: usize,
    /// First row generated under regime B.
    pub flip_row: usize,
    pub rotation_deg: f64,
    /// Leading three population eigenvectors of each regime.
    pub regime_a: [Vec<f64>; 3],
    pub regime_b: [Vec<f64>; 3],
    pub eigenvalues: [f64; 3],
    pub correlation_a: Matrix<f64>,
    pub correlation_b: Matrix<f64>,
}

pub const TWO_REGIME_N: usize = 8;
pub const TWO_REGIME_T: usize = 2000;
pub const TWO_REGIME_WINDOW: usize = 400;
pub const TWO_REGIME_ROTATION_DEG: f64 = 30.0;
pub const TWO_REGIME_SEED: u64 = 20_240_601;

/// The shipped two-regime fixture (N = 8, T = 2000, k = 400, 30° rotation).
pub fn two_regime_default() -> TwoRegime {
    two_regime(TWO_REGIME_T, TWO_REGIME_WINDOW, TWO_REGIME_ROTATION_DEG, TWO_REGIME_SEED)
}

/// Builds the two-regime fixture.
///
/// Innovations are a balanced design: eight sinusoids whose periods divide the
/// window length, so every length-`window` window not straddling the flip has
/// innovation covariance exactly I, plus a little Gaussian noise. Population
/// structure is therefore visible window by window without sampling error.
pub fn two_regime(t: usize, window: usize, rotation_deg: f64, seed: u64) -> TwoRegime {
    assert!(window >= 64 && t >= 2 * window, "fixture needs t ≥ 2·window and window ≥ 64");
    let eigenvalues = [3.6, 1.8, 1.0];
    let theta = rotation_deg.to_radians();
    let h: Vec<Vec<f64>> = (0..5).map(hadamard_row).collect();
    let rotated: Vec<f64> = h[3]
        .iter()
        .zip(&h[4])
        .map(|(a, b)| theta.cos() * a + theta.sin() * b)
        .collect();
    let regime_a = [h[0].clone(), h[1].clone(), h[3].clone()];
    let regime_b = [h[0].clone(), h[2].clone(), rotated];
    let correlation_a = planted_correlation(&regime_a, &eigenvalues);
    let correlation_b = planted_correlation(&regime_b, &eigenvalues);
    let root_a = cholesky(&correlation_a);
    let root_b = cholesky(&correlation_b);

    let mut rng = rng(seed);
    let n = TWO_REGIME_N;
    // distinct harmonics, pairwise sums and differences at least 8 apart
    let harmonics: Vec<usize> = (0..n).map(|i| 5 + 9 * i + (seed as usize + i) % 3).collect();
    let phases: Vec<f64> = (0..n)
        .map(|_| std::f64::consts::TAU * rand::Rng::random::<f64>(&mut rng))
        .collect();
    let flip_row = t / 2;
    let noise = 0.05;
    let mut data = Matrix::zeros(t, n);
    let mut z = vec![0.0; n];
    for i in 0..t {
        for (j, zj) in z.iter_mut().enumerate() {
            let angle = std::f64::consts::TAU * (harmonics[j] * i) as f64 / window as f64;
            *zj = std::f64::consts::SQRT_2 * (angle + phases[j]).sin();
        }
        let root = if i < flip_row { &root_a } else { &root_b };
        let x = root.mul_vec(&z);
        for j in 0..n {
            data[(i, j)] = x[j] + noise * normal(&mut rng);
        }
    }
    TwoRegime {
        series: SeriesMatrix::from_matrix(data),
        window,
        flip_row,
        rotation_deg,
        regime_a,
        regime_b,
        eigenvalues,
        correlation_a,
        correlation_b,
    }
}

/// Correlation matrix with the given leading eigenpairs (orthonormal vectors).
///
/// The remainder lives on the orthogonal complement P as P·diag(d)·P, with d
/// solved so the diagonal is exactly one.
fn planted_correlation(vectors: &[Vec<f64>], eigenvalues: &[f64]) -> Matrix<f64> {
    let n = vectors[0].len();
    let mut structured = Matrix::<f64>::zeros(n, n);
    let mut projector = Matrix::<f64>::identity(n);
    for (v, &l) in vectors.iter().zip(eigenvalues) {
        for i in 0..n {
            for j in 0..n {
                structured[(i, j)] += l * v[i] * v[j];
                projector[(i, j)] -= v[i] * v[j];
            }
        }
    }
    let squared = projector.map(|x| x * x);
    let target: Vec<f64> = (0..n).map(|i| 1.0 - structured[(i, i)]).collect();
    let d = solve(squared, target);
    assert!(d.iter().all(|&x| x >= 0.0), "planted structure leaves no room on the diagonal");
    let scaled = Matrix::from_fn(n, n, |i, j| projector[(i, j)] * d[j]);
    let tail = scaled.matmul(&projector);
    let mut out = Matrix::from_fn(n, n, |i, j| structured[(i, j)] + tail[(i, j)]);
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    out
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Matrix<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .expect("non-empty");
        assert!(a[(pivot, col)].abs() > 1e-12, "singular system");
        for c in 0..n {
            let tmp = a[(col, c)];
            a[(col, c)] = a[(pivot, c)];
            a[(pivot, c)] = tmp;
        }
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[(r, c)] * x[c]).sum();
        x[r] = (b[r] - s) / a[(r, r)];
    }
    x
}

/// Lower-triangular L with L·Lᵀ = a.
fn cholesky(a: &Matrix<f64>) -> Matrix<f64> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[(i, j)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    l
}

/// Geometric price path `start · exp(cumsum(scale · x))` with one extra leading row.
pub fn to_prices(returns: &SeriesMatrix<f64>, start: f64, scale: f64) -> Matrix<f64> {
    let (t, n) = returns.data.shape();
    let mut prices = Matrix::zeros(t + 1, n);
    for j in 0..n {
        let mut level = start;
        prices[(0, j)] = level;
        for i in 0..t {
            level *= (scale * returns.data[(i, j)]).exp();
            prices[(i + 1, j)] = level;
        }
    }
    prices
}

/// Serializes levels as wide CSV with consecutive daily dates from 2000-01-01.
pub fn to_csv(labels: &[String], values: &Matrix<f64>, decimals: Option<usize>) -> String {
    use std::fmt::Write as _;
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let mut out = String::from("date");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, date) in start.iter_days().take(values.rows()).enumerate() {
        let _ = write!(out, "{date}");
        for &v in values.row(i) {
            match decimals {
                Some(d) => {
                    let _ = write!(out, ",{v:.d$}");
                }
                None => {
                    let _ = write!(out, ",{v}");
                }
            }
        }
        out.push('\n');
    }
    out
}
