//! Kaiser–Meyer–Olkin sampling adequacy and the minimal adequate window search.
//!
//! Partial correlations come from the anti-image of the inverse correlation
//! matrix, q_jk = −c_jk / √(c_jj c_kk) with C = R⁻¹. The inverse is formed from
//! the eigendecomposition, which also gives the singularity test: a window is
//! "not estimable" when its smallest eigenvalue is at most [`SINGULAR_EIGENVALUE`].

use crate::eigen::{decompose, decompose_seeded, EigenDecomposition};
use crate::error::{Error, Result};
use crate::ingest::SeriesMatrix;
use crate::matrix::Matrix;
use crate::rolling::{plan_windows, sweep_fallible, CorrelationMatrix, DEFAULT_REFRESH};
use crate::scalar::Real;

pub const SINGULAR_EIGENVALUE: f64 = 1e-10;

/// Smallest KMO value considered acceptable for PCA.
pub const DEFAULT_KMO_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmoReport<T> {
    pub kmo: T,
    /// Σ Σ_{j≠k} r_jk² over ordered pairs.
    pub r_sq_sum: T,
    /// Σ Σ_{j≠k} q_jk² over ordered pairs.
    pub q_sq_sum: T,
}

/// Whether the decomposition's smallest eigenvalue is above the singularity floor.
pub fn is_invertible<T: Real>(decomp: &EigenDecomposition<T>) -> bool {
    decomp
        .eigenvalues()
        .last()
        .is_some_and(|&l| l > T::of(SINGULAR_EIGENVALUE))
}

pub fn partial_correlations<T: Real>(matrix: &CorrelationMatrix<T>) -> Result<Matrix<T>> {
    partial_correlations_from(&decompose(matrix)?)
}

/// Anti-image partial correlations from an existing eigendecomposition of R.
pub fn partial_correlations_from<T: Real>(decomp: &EigenDecomposition<T>) -> Result<Matrix<T>> {
    if !is_invertible(decomp) {
        let smallest = decomp.eigenvalues().last().copied().unwrap_or_else(T::zero);
        return Err(Error::NotEstimable(format!(
            "correlation matrix is singular (smallest eigenvalue {:e})",
            smallest.as_f64()
        )));
    }
    let n = decomp.dim();
    let v = decomp.eigenvectors();
    // C = V diag(1/l) Vᵀ, built as (V diag(1/l)) · Vᵀ
    let inv_l: Vec<T> = decomp.eigenvalues().iter().map(|&l| l.recip()).collect();
    let scaled = Matrix::from_fn(n, n, |i, j| v[(i, j)] * inv_l[j]);
    let inverse = scaled.matmul(&v.transpose());
    let scale: Vec<T> = (0..n).map(|i| inverse[(i, i)].sqrt().recip()).collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::one()
        } else {
            let c = (inverse[(i, j)] + inverse[(j, i)]) * T::of(0.5);
            -c * scale[i] * scale[j]
        }
    }))
}

pub fn kmo<T: Real>(matrix: &CorrelationMatrix<T>) -> Result<KmoReport<T>> {
    let partial = partial_correlations(matrix)?;
    kmo_from_parts(matrix.as_matrix(), &partial)
}

/// KMO from a correlation matrix and its partial-correlation matrix.
pub fn kmo_from_parts<T: Real>(r: &Matrix<T>, q: &Matrix<T>) -> Result<KmoReport<T>> {
    let n = r.rows();
    let mut r_sq_sum = T::zero();
    let mut q_sq_sum = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                r_sq_sum = r_sq_sum + r[(i, j)] * r[(i, j)];
                q_sq_sum = q_sq_sum + q[(i, j)] * q[(i, j)];
            }
        }
    }
    let denom = r_sq_sum + q_sq_sum;
    if r_sq_sum == T::zero() || denom == T::zero() {
        return Err(Error::NotEstimable(
            "all off-diagonal correlations are zero".into(),
        ));
    }
    Ok(KmoReport {
        kmo: r_sq_sum / denom,
        r_sq_sum,
        q_sq_sum,
    })
}

/// KMO for a window whose decomposition is already known; `None` when not estimable.
pub fn kmo_for_window<T: Real>(
    matrix: &CorrelationMatrix<T>,
    decomp: &EigenDecomposition<T>,
) -> Option<T> {
    let q = partial_correlations_from(decomp).ok()?;
    kmo_from_parts(matrix.as_matrix(), &q).ok().map(|r| r.kmo)
}

/// Per-candidate outcome of the window search.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOutcome<T> {
    pub window: usize,
    /// Number of windows of this length.
    pub windows: usize,
    pub estimable_windows: usize,
    /// Minimum KMO over the estimable windows, if any.
    pub min_kmo: Option<T>,
}

impl<T: Real> CandidateOutcome<T> {
    pub fn fully_estimable(&self) -> bool {
        self.windows > 0 && self.estimable_windows == self.windows
    }

    /// Minimum KMO when every window was estimable.
    pub fn min_if_estimable(&self) -> Option<T> {
        self.min_kmo.filter(|_| self.fully_estimable())
    }

    pub fn qualifies(&self, threshold: T) -> bool {
        self.min_if_estimable().is_some_and(|m| m >= threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSearchResult<T> {
    pub threshold: T,
    /// Smallest qualifying candidate, if any.
    pub chosen_window: Option<usize>,
    pub candidates: Vec<CandidateOutcome<T>>,
}

/// Minimum KMO over every window of length `k`.
pub fn scan_window<T: Real>(
    series: &SeriesMatrix<T>,
    k: usize,
    refresh: usize,
) -> Result<CandidateOutcome<T>> {
    let plan = plan_windows(series.len(), k)?;
    let windows = plan.count();
    if k <= series.n_vars() {
        // k points span at most k−1 centered dimensions, so R is rank deficient.
        return Ok(CandidateOutcome {
            window: k,
            windows,
            estimable_windows: 0,
            min_kmo: None,
        });
    }
    let values: Vec<Option<T>> = sweep_fallible(
        series,
        &plan,
        refresh,
        || None::<Matrix<T>>,
        |seed, _w, corr| {
            let Ok(corr) = corr else {
                return Ok(None);
            };
            let decomp = match seed.as_ref() {
                Some(basis) => decompose_seeded(corr, basis)?,
                None => decompose(corr)?,
            };
            *seed = Some(decomp.eigenvectors().transpose());
            Ok(kmo_for_window(corr, &decomp))
        },
    )?;
    let estimable: Vec<T> = values.into_iter().flatten().collect();
    Ok(CandidateOutcome {
        window: k,
        windows,
        estimable_windows: estimable.len(),
        min_kmo: estimable.into_iter().reduce(T::min),
    })
}

/// Smallest candidate window whose every window is estimable with KMO ≥ `threshold`.
pub fn select_window<T: Real>(
    series: &SeriesMatrix<T>,
    candidates: &[usize],
    threshold: T,
) -> Result<WindowSearchResult<T>> {
    select_window_with(series, candidates, threshold, DEFAULT_REFRESH)
}

pub fn select_window_with<T: Real>(
    series: &SeriesMatrix<T>,
    candidates: &[usize],
    threshold: T,
    refresh: usize,
) -> Result<WindowSearchResult<T>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate window list".into()));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "candidate windows must be strictly ascending".into(),
        ));
    }
    let outcomes = candidates
        .iter()
        .map(|&k| scan_window(series, k, refresh))
        .collect::<Result<Vec<_>>>()?;
    let chosen_window = outcomes
        .iter()
        .find(|o| o.qualifies(threshold))
        .map(|o| o.window);
    Ok(WindowSearchResult {
        threshold,
        chosen_window,
        candidates: outcomes,
    })
}
