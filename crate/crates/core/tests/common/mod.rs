//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the crate's numerical code: eigenpairs come from the
//! characteristic polynomial, partial correlations from least-squares residuals,
//! and correlations from the textbook two-pass formula.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pcdrift::ingest::SeriesMatrix;
use pcdrift::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Normalized Gram matrix of an n×m Gaussian matrix; rank min(n, m).
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix<f64> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| normal(rng)).collect()).collect();
    let g = |i: usize, j: usize| -> f64 { b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum() };
    let d: Vec<f64> = (0..n).map(|i| g(i, i).sqrt()).collect();
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { g(i, j) / (d[i] * d[j]) })
}

/// Random orthogonal matrix via Gram–Schmidt on Gaussian columns (columns are the basis).
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        for _ in 0..2 {
            for c in &cols {
                let d = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    cols
}

/// Q diag(values) Qᵀ for a random orthogonal Q.
pub fn with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> Matrix<f64> {
    let n = values.len();
    let q = random_orthogonal(rng, n);
    let mut m = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| q[k][i] * values[k] * q[k][j]).sum());
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

pub fn random_series(rng: &mut ChaCha8Rng, t: usize, n: usize) -> SeriesMatrix<f64> {
    let mix: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
    let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
    let data = Matrix::from_fn(t, n, |_, _| 0.0);
    let mut data = data;
    for i in 0..t {
        let f = normal(rng);
        for j in 0..n {
            data[(i, j)] = offset[j] + scale[j] * (mix[j] * f + normal(rng));
        }
    }
    SeriesMatrix::from_matrix(data)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn to_rows(a: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Coefficients c[0..=n] of det(λI − A) = Σ c[i] λ^i, by Faddeev–LeVerrier.
pub fn characteristic_polynomial(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        let mut next = mat_mul(a, &m);
        for i in 0..n {
            next[i][i] += c[n - k + 1];
        }
        let am = mat_mul(a, &next);
        let trace: f64 = (0..n).map(|i| am[i][i]).sum();
        c[n - k] = -trace / k as f64;
        m = next;
    }
    c
}

fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &coef in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + coef;
    }
    (p, dp)
}

/// Real roots, descending, of a polynomial known to have only real roots.
///
/// Newton's method with Maehly's implicit deflation: found roots are divided
/// out of the derivative, not the polynomial, and each search starts above the
/// largest remaining root, where the iteration decreases monotonically.
pub fn real_roots(c: &[f64]) -> Vec<f64> {
    let deg = c.len() - 1;
    let lead = c[deg];
    let bound = 1.0 + c[..deg].iter().map(|x| (x / lead).abs()).fold(0.0, f64::max);
    let mut roots: Vec<f64> = Vec::with_capacity(deg);
    for _ in 0..deg {
        let mut x = bound;
        for _ in 0..2000 {
            let (p, dp) = horner(c, x);
            let correction: f64 = roots.iter().map(|r| 1.0 / (x - r)).sum();
            let denom = dp - p * correction;
            if p == 0.0 || denom == 0.0 || !denom.is_finite() {
                break;
            }
            let step = p / denom;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1e-300) {
                break;
            }
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &y)| {
        let mut row = r.clone();
        row.push(y);
        row
    }).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, p);
        let piv = if m[col][col] == 0.0 { 1e-300 } else { m[col][col] };
        for r in col + 1..n {
            let f = m[r][col] / piv;
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        let piv = if m[r][r] == 0.0 { 1e-300 } else { m[r][r] };
        x[r] = (m[r][n] - s) / piv;
    }
    x
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let d = dot(&vs[i], &vs[j]);
                let vj = vs[j].clone();
                vs[i].iter_mut().zip(&vj).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&vs[i], &vs[i]).sqrt();
        vs[i].iter_mut().for_each(|x| *x /= norm);
    }
}

/// One invariant subspace of the oracle: eigenvalues (descending) and an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

/// Eigen-oracle for small symmetric matrices.
///
/// Roots of the characteristic polynomial locate the spectrum; roots within
/// `tie` (relative) of each other are grouped, since a root of multiplicity m
/// is only found to about ε^(1/m). Each group's subspace comes from subspace
/// inverse iteration. Eigenvalues inside a group come from the compressed
/// matrix XᵀAX shifted by its mean, to which the same procedure is applied
/// again until the groups are resolved or the shifted matrix is negligible.
pub fn eigen_oracle(a: &Matrix<f64>, tie: f64) -> Vec<Cluster> {
    clusters(&to_rows(a), tie, 0)
}

fn clusters(rows: &[Vec<f64>], tie: f64, depth: usize) -> Vec<Cluster> {
    let n = rows.len();
    let roots = real_roots(&characteristic_polynomial(rows));
    let scale = roots.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(f64::MIN_POSITIVE);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        match groups.last_mut() {
            Some(g) if g.last().unwrap() - r < tie * scale => g.push(r),
            _ => groups.push(vec![r]),
        }
    }
    let whole = groups.len() == 1;
    let mut seed = rng(0x5eed + depth as u64);
    let mut out = Vec::new();
    for g in groups {
        let m = g.len();
        let basis: Vec<Vec<f64>> = if whole {
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        } else {
            let shift = g.iter().sum::<f64>() / m as f64 + 1e-10 * scale;
            let shifted: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| rows[i][j] - if i == j { shift } else { 0.0 }).collect())
                .collect();
            let mut basis: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| normal(&mut seed)).collect()).collect();
            orthonormalize(&mut basis);
            for _ in 0..100 {
                for v in basis.iter_mut() {
                    *v = solve(&shifted, v);
                }
                orthonormalize(&mut basis);
            }
            basis
        };
        let av: Vec<Vec<f64>> = basis.iter().map(|v| (0..n).map(|i| dot(&rows[i], v)).collect()).collect();
        let mut small: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| dot(&basis[i], &av[j])).collect()).collect();
        let mu = (0..m).map(|i| small[i][i]).sum::<f64>() / m as f64;
        for (i, row) in small.iter_mut().enumerate() {
            row[i] -= mu;
        }
        let spread = small.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let eigenvalues = if m == 1 || spread <= 1e-14 * scale.max(1.0) || depth > 12 {
            vec![mu; m]
        } else {
            clusters(&small, tie, depth + 1)
                .into_iter()
                .flat_map(|c| c.eigenvalues)
                .map(|x| x + mu)
                .collect()
        };
        out.push(Cluster { eigenvalues, basis });
    }
    out
}

/// Orthogonal projector onto the span of the given orthonormal vectors.
pub fn projector(vs: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| vs.iter().map(|v| v[i] * v[j]).sum()).collect())
        .collect()
}

/// Pearson correlation of columns over rows [start, start + k), two-pass.
pub fn naive_correlation(data: &Matrix<f64>, start: usize, k: usize) -> Vec<Vec<f64>> {
    let n = data.cols();
    let mean: Vec<f64> = (0..n)
        .map(|j| (start..start + k).map(|i| data[(i, j)]).sum::<f64>() / k as f64)
        .collect();
    let cov = |a: usize, b: usize| -> f64 {
        (start..start + k).map(|i| (data[(i, a)] - mean[a]) * (data[(i, b)] - mean[b])).sum()
    };
    let sd: Vec<f64> = (0..n).map(|j| cov(j, j).sqrt()).collect();
    (0..n)
        .map(|a| (0..n).map(|b| if a == b { 1.0 } else { cov(a, b) / (sd[a] * sd[b]) }).collect())
        .collect()
}

/// Partial correlation of every pair given all other columns, from the
/// correlation of the two least-squares residuals. Columns are centered first,
/// which is the same as fitting an intercept.
pub fn regression_partials(data: &Matrix<f64>) -> Vec<Vec<f64>> {
    let (t, n) = data.shape();
    let mean: Vec<f64> = (0..n).map(|j| (0..t).map(|i| data[(i, j)]).sum::<f64>() / t as f64).collect();
    let centered = DMatrix::from_fn(t, n, |i, j| data[(i, j)] - mean[j]);
    let mut q = vec![vec![1.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let others: Vec<usize> = (0..n).filter(|&c| c != a && c != b).collect();
            let resid = |col: usize| -> DVector<f64> {
                let y = centered.column(col).into_owned();
                if others.is_empty() {
                    return y;
                }
                let design = centered.select_columns(&others);
                let qr = design.clone().qr();
                let beta = qr
                    .r()
                    .solve_upper_triangular(&(qr.q().transpose() * &y))
                    .expect("full column rank");
                y - design * beta
            };
            let (ea, eb) = (resid(a), resid(b));
            let r = ea.dot(&eb) / (ea.norm() * eb.norm());
            q[a][b] = r;
            q[b][a] = r;
        }
    }
    q
}

/// KMO straight from the definition: Σr² / (Σr² + Σq²) over j ≠ k.
pub fn kmo_direct(r: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    let n = r.len();
    let mut rs = 0.0;
    let mut qs = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                rs += r[j][k] * r[j][k];
                qs += q[j][k] * q[j][k];
            }
        }
    }
    rs / (rs + qs)
}
