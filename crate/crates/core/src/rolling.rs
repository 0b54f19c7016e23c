//! Pearson correlation matrices over stride-1 sliding windows.
//!
//! The sweep keeps running sums of shifted values and their cross products,
//! adding the entering row and removing the leaving one, so each step costs
//! O(N²). Windows are processed in blocks of `refresh` consecutive windows;
//! every block opens with a centered two-pass recomputation, and blocks are the
//! unit of parallel work. Because block boundaries depend only on the window
//! index, results are bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::SeriesMatrix;
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Default number of windows between full recomputations.
pub const DEFAULT_REFRESH: usize = 256;

/// Ratio of raw second moment to variance above which an incremental window is
/// recomputed with the two-pass form.
const CANCELLATION_LIMIT: f64 = 1e4;

/// Symmetric N×N Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    entries: Matrix<T>,
}

impl<T: Real> CorrelationMatrix<T> {
    /// Validates unit diagonal, symmetry and range, each to a precision-scaled tolerance.
    pub fn try_from_matrix(entries: Matrix<T>) -> Result<Self> {
        let tol = validation_tol::<T>();
        let (r, c) = entries.shape();
        if r != c {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix must be square, got {r}x{c}"
            )));
        }
        for i in 0..r {
            if (entries[(i, i)] - T::one()).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {i} is {}, not 1",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || (a - b).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({i},{j}) and ({j},{i}) are not symmetric"
                    )));
                }
                if a.abs() > T::one() + tol {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i},{j}) = {a} lies outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_matrix_unchecked(entries: Matrix<T>) -> Self {
        Self { entries }
    }

    /// Equal off-diagonal correlation `rho` (compound symmetry).
    pub fn equicorrelated(n: usize, rho: T) -> Self {
        Self {
            entries: Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { rho }),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Matrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.entries
    }
}

impl<T> std::ops::Index<(usize, usize)> for CorrelationMatrix<T> {
    type Output = T;

    fn index(&self, idx: (usize, usize)) -> &T {
        &self.entries[idx]
    }
}

fn validation_tol<T: Real>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(64.0))
}

/// Stride-1 schedule of window start offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub series_length: usize,
    pub window_length: usize,
    pub starts: Vec<usize>,
}

impl WindowPlan {
    pub fn count(&self) -> usize {
        self.starts.len()
    }

    /// Whether the plan omits the window starting at row 0.
    pub fn drops_first_window(&self) -> bool {
        self.starts.first().is_some_and(|&s| s > 0)
    }
}

/// Every window of length `k`: starts 0, 1, …, T−k.
pub fn plan_windows(series_length: usize, window_length: usize) -> Result<WindowPlan> {
    plan_windows_with(series_length, window_length, false)
}

/// As [`plan_windows`]; `drop_first_window` removes the window at start 0, giving T−k windows.
pub fn plan_windows_with(
    series_length: usize,
    window_length: usize,
    drop_first_window: bool,
) -> Result<WindowPlan> {
    if window_length == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    if window_length > series_length {
        return Err(Error::WindowTooLong {
            window: window_length,
            length: series_length,
        });
    }
    let first = usize::from(drop_first_window);
    let last = series_length - window_length;
    if first > last {
        return Err(Error::InvalidArgument(
            "dropping the first window leaves no windows".into(),
        ));
    }
    Ok(WindowPlan {
        series_length,
        window_length,
        starts: (first..=last).collect(),
    })
}

/// Pearson correlation of all columns over rows `[start, start + k)`, centered two-pass form.
pub fn correlation<T: Real>(
    series: &SeriesMatrix<T>,
    start: usize,
    k: usize,
) -> Result<CorrelationMatrix<T>> {
    check_range(series, start, k)?;
    let n = series.n_vars();
    let mut mean = vec![0.0f64; n];
    for t in start..start + k {
        for (m, &x) in mean.iter_mut().zip(series.data.row(t)) {
            *m += x.as_f64();
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    let mut cross = vec![0.0f64; n * n];
    let mut centered = vec![0.0f64; n];
    for t in start..start + k {
        for ((c, &x), &m) in centered.iter_mut().zip(series.data.row(t)).zip(&mean) {
            *c = x.as_f64() - m;
        }
        accumulate(&mut cross, &centered);
    }
    for j in 0..n {
        if cross[j * n + j] <= 0.0 {
            return Err(Error::ZeroVariance {
                label: series.labels[j].clone(),
                start,
            });
        }
    }
    Ok(normalize(n, &cross, 1.0, &vec![0.0; n]))
}

fn check_range<T: Copy>(series: &SeriesMatrix<T>, start: usize, k: usize) -> Result<()> {
    let t = series.data.rows();
    if k == 0 || start + k > t {
        return Err(Error::WindowTooLong {
            window: start + k,
            length: t,
        });
    }
    Ok(())
}

/// Adds `x xᵀ` into the upper triangle of the row-major `acc`.
fn accumulate(acc: &mut [f64], x: &[f64]) {
    let n = x.len();
    for i in 0..n {
        let xi = x[i];
        let row = &mut acc[i * n + i..(i + 1) * n];
        for (a, &xj) in row.iter_mut().zip(&x[i..]) {
            *a += xi * xj;
        }
    }
}

/// Adds `x xᵀ − y yᵀ` into the upper triangle of `acc` in one pass.
fn replace_row(acc: &mut [f64], x: &[f64], y: &[f64]) {
    let n = x.len();
    for i in 0..n {
        let (xi, yi) = (x[i], y[i]);
        let row = &mut acc[i * n + i..(i + 1) * n];
        for ((a, &xj), &yj) in row.iter_mut().zip(&x[i..]).zip(&y[i..]) {
            *a += xi * xj - yi * yj;
        }
    }
}

/// Correlation from upper-triangle cross products: cov(i, j) = cross·inv_k − mean_i·mean_j.
fn normalize<T: Real>(n: usize, cross: &[f64], inv_k: f64, mean: &[f64]) -> CorrelationMatrix<T> {
    let scale: Vec<f64> = (0..n)
        .map(|i| 1.0 / (cross[i * n + i] * inv_k - mean[i] * mean[i]).sqrt())
        .collect();
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        out[i * n + i] = T::one();
        let (mi, si) = (mean[i], scale[i]);
        let src = &cross[i * n + i + 1..(i + 1) * n];
        let dst = &mut out[i * n + i + 1..(i + 1) * n];
        for (((o, &c), &mj), &sj) in dst.iter_mut().zip(src).zip(&mean[i + 1..]).zip(&scale[i + 1..]) {
            *o = T::of(((c * inv_k - mi * mj) * si * sj).clamp(-1.0, 1.0));
        }
    }
    for i in 1..n {
        for j in 0..i {
            out[i * n + j] = out[j * n + i];
        }
    }
    CorrelationMatrix::from_matrix_unchecked(Matrix::from_vec(n, n, out))
}

/// Running shifted sums over one sliding window.
struct RollingMoments<'a, T> {
    series: &'a SeriesMatrix<T>,
    k: usize,
    start: usize,
    shift: Vec<f64>,
    sum: Vec<f64>,
    cross: Vec<f64>,
    scratch: Vec<f64>,
    leaving: Vec<f64>,
    mean: Vec<f64>,
}

impl<'a, T: Real> RollingMoments<'a, T> {
    fn new(series: &'a SeriesMatrix<T>, k: usize) -> Self {
        let n = series.n_vars();
        Self {
            series,
            k,
            start: 0,
            shift: vec![0.0; n],
            sum: vec![0.0; n],
            cross: vec![0.0; n * n],
            scratch: vec![0.0; n],
            leaving: vec![0.0; n],
            mean: vec![0.0; n],
        }
    }

    /// Recomputes all sums for the window at `start`, re-centering on its mean.
    fn reset(&mut self, start: usize) {
        let n = self.series.n_vars();
        self.start = start;
        self.shift.fill(0.0);
        for t in start..start + self.k {
            for (m, &x) in self.shift.iter_mut().zip(self.series.data.row(t)) {
                *m += x.as_f64();
            }
        }
        for m in &mut self.shift {
            *m /= self.k as f64;
        }
        self.sum.fill(0.0);
        self.cross.fill(0.0);
        for t in start..start + self.k {
            self.load_row(t);
            for (s, &x) in self.sum.iter_mut().zip(&self.scratch) {
                *s += x;
            }
            accumulate(&mut self.cross, &self.scratch);
        }
        debug_assert_eq!(self.cross.len(), n * n);
    }

    fn load_row(&mut self, t: usize) {
        for ((c, &x), &m) in self
            .scratch
            .iter_mut()
            .zip(self.series.data.row(t))
            .zip(&self.shift)
        {
            *c = x.as_f64() - m;
        }
    }

    /// Slides the window forward by one row.
    fn advance(&mut self) {
        let leaving = self.start;
        let entering = self.start + self.k;
        self.load_row(leaving);
        std::mem::swap(&mut self.scratch, &mut self.leaving);
        self.load_row(entering);
        for ((s, &x), &y) in self.sum.iter_mut().zip(&self.scratch).zip(&self.leaving) {
            *s += x - y;
        }
        replace_row(&mut self.cross, &self.scratch, &self.leaving);
        self.start += 1;
    }

    /// Correlation of the current window, or `None` when cancellation makes the
    /// running sums untrustworthy for some column.
    fn correlation(&mut self) -> Option<CorrelationMatrix<T>> {
        let n = self.sum.len();
        let inv_k = 1.0 / self.k as f64;
        for i in 0..n {
            self.mean[i] = self.sum[i] * inv_k;
            let raw = self.cross[i * n + i] * inv_k;
            let var = raw - self.mean[i] * self.mean[i];
            if !(var > 0.0) || raw > CANCELLATION_LIMIT * var {
                return None;
            }
        }
        Some(normalize(n, &self.cross, inv_k, &self.mean))
    }
}

/// Correlation matrix for every window of `plan`, in window order.
pub fn sweep_correlations<T: Real>(
    series: &SeriesMatrix<T>,
    plan: &WindowPlan,
    refresh: usize,
) -> Result<Vec<CorrelationMatrix<T>>> {
    sweep_map(series, plan, refresh, |_, corr| Ok(corr.clone()))
}

/// Per-window recomputation with [`correlation`]; the reference the sweep is checked against.
pub fn sweep_correlations_naive<T: Real>(
    series: &SeriesMatrix<T>,
    plan: &WindowPlan,
) -> Result<Vec<CorrelationMatrix<T>>> {
    plan.starts
        .par_iter()
        .map(|&s| correlation(series, s, plan.window_length))
        .collect()
}

/// Applies `f(window_index, correlation)` to every window without materializing all matrices.
pub fn sweep_map<T, U, F>(
    series: &SeriesMatrix<T>,
    plan: &WindowPlan,
    refresh: usize,
    f: F,
) -> Result<Vec<U>>
where
    T: Real,
    U: Send,
    F: Fn(usize, &CorrelationMatrix<T>) -> Result<U> + Sync,
{
    sweep_with_state(series, plan, refresh, || (), |_, w, corr| f(w, corr))
}

/// Like [`sweep_map`], with a mutable state created fresh at the start of every
/// refresh block and threaded through that block's windows in order.
pub fn sweep_with_state<T, S, U, I, F>(
    series: &SeriesMatrix<T>,
    plan: &WindowPlan,
    refresh: usize,
    init: I,
    f: F,
) -> Result<Vec<U>>
where
    T: Real,
    U: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &CorrelationMatrix<T>) -> Result<U> + Sync,
{
    sweep_fallible(series, plan, refresh, init, |state, w, corr| f(state, w, corr?))
}

/// Core block-parallel sweep. `f` also sees windows whose correlation could not be
/// formed (zero variance), so callers decide whether that is fatal.
pub(crate) fn sweep_fallible<T, S, U, I, F>(
    series: &SeriesMatrix<T>,
    plan: &WindowPlan,
    refresh: usize,
    init: I,
    f: F,
) -> Result<Vec<U>>
where
    T: Real,
    U: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, Result<&CorrelationMatrix<T>>) -> Result<U> + Sync,
{
    if refresh == 0 {
        return Err(Error::InvalidArgument("refresh interval must be at least 1".into()));
    }
    let k = plan.window_length;
    if plan.series_length != series.len() {
        return Err(Error::InvalidArgument(format!(
            "window plan is for {} rows but the series has {}",
            plan.series_length,
            series.len()
        )));
    }
    if let Some(&last) = plan.starts.last() {
        check_range(series, last, k)?;
    }
    let blocks: Vec<usize> = (0..plan.count()).step_by(refresh).collect();
    let per_block: Vec<Result<Vec<U>>> = blocks
        .par_iter()
        .map(|&first| {
            let last = (first + refresh).min(plan.count());
            let mut moments = RollingMoments::new(series, k);
            let mut state = init();
            let mut out = Vec::with_capacity(last - first);
            for w in first..last {
                let start = plan.starts[w];
                if w == first {
                    moments.reset(start);
                } else {
                    debug_assert_eq!(start, moments.start + 1);
                    moments.advance();
                }
                let corr = match moments.correlation() {
                    Some(c) => Ok(c),
                    None => {
                        moments.reset(start);
                        match moments.correlation() {
                            Some(c) => Ok(c),
                            None => correlation(series, start, k),
                        }
                    }
                };
                out.push(f(&mut state, w, corr.as_ref().map_err(clone_error))?);
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::with_capacity(plan.count());
    for block in per_block {
        out.extend(block?);
    }
    Ok(out)
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::ZeroVariance { label, start } => Error::ZeroVariance {
            label: label.clone(),
            start: *start,
        },
        other => Error::Data(other.to_string()),
    }
}
