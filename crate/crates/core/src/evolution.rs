//! Rolling PCA: per-window eigendecompositions, coefficient tracks for heat maps,
//! and the angle each component's eigenvector makes with its first-window direction.
//!
//! Components are matched across windows by eigenvalue rank only. A rank-j
//! vector that swaps structure between windows is reported as such; nothing
//! here tries to follow a vector by continuity.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::adequacy::{is_invertible, kmo_for_window};
use crate::eigen::{decompose, decompose_seeded};
use crate::error::{Error, Result};
use crate::ingest::SeriesMatrix;
use crate::matrix::{dot, Matrix};
use crate::rolling::{plan_windows_with, sweep_with_state, WindowPlan, DEFAULT_REFRESH};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Windows between full recomputations of the running moments; also the
    /// length of each warm-started eigensolver chain.
    pub refresh: usize,
    /// Omit the window at start 0 (T−k windows instead of T−k+1).
    pub drop_first_window: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            refresh: DEFAULT_REFRESH,
            drop_first_window: false,
        }
    }
}

/// Output of a rolling PCA over every window of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub plan: WindowPlan,
    pub labels: Vec<String>,
    /// W×N, row w = eigenvalues of window w in descending order.
    pub eigenvalues: Matrix<T>,
    /// One W×N matrix per retained component; row w = that component's
    /// eigenvector in window w. Rows of singular windows are NaN.
    pub coefficients: Vec<Matrix<T>>,
    /// True where the window's correlation matrix is singular.
    pub singular: Vec<bool>,
    /// KMO per window, `None` where it is not estimable.
    pub kmo: Vec<Option<T>>,
}

impl<T: Real> SweepResult<T> {
    pub fn windows(&self) -> usize {
        self.plan.count()
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn components(&self) -> usize {
        self.coefficients.len()
    }

    /// Eigenvector of `component` in window `w`, or `None` for a singular window.
    pub fn vector(&self, component: usize, w: usize) -> Option<&[T]> {
        (!self.singular[w]).then(|| self.coefficients[component].row(w))
    }

    /// Minimum KMO over the windows, provided every window is estimable.
    pub fn min_kmo(&self) -> Option<T> {
        self.kmo
            .iter()
            .copied()
            .collect::<Option<Vec<T>>>()
            .and_then(|v| v.into_iter().reduce(T::min))
    }
}

/// Rolling PCA with window length `k`, keeping the leading `components` eigenvectors.
pub fn sweep<T: Real>(
    series: &SeriesMatrix<T>,
    k: usize,
    components: usize,
    options: SweepOptions,
) -> Result<SweepResult<T>> {
    let n = series.n_vars();
    if components == 0 || components > n {
        return Err(Error::InvalidArgument(format!(
            "component count {components} must lie in 1..={n}"
        )));
    }
    let plan = plan_windows_with(series.len(), k, options.drop_first_window)?;

    struct Window<T> {
        eigenvalues: Vec<T>,
        vectors: Vec<Vec<T>>,
        singular: bool,
        kmo: Option<T>,
    }

    let windows = sweep_with_state(
        series,
        &plan,
        options.refresh,
        || None::<Matrix<T>>,
        |seed, _w, corr| {
            let decomp = match seed.as_ref() {
                Some(basis) => decompose_seeded(corr, basis)?,
                None => decompose(corr)?,
            };
            *seed = Some(decomp.eigenvectors().transpose());
            let singular = !is_invertible(&decomp);
            let kmo = if singular {
                None
            } else {
                kmo_for_window(corr, &decomp)
            };
            Ok(Window {
                eigenvalues: decomp.eigenvalues().to_vec(),
                vectors: (0..components).map(|j| decomp.vector(j)).collect(),
                singular,
                kmo,
            })
        },
    )?;

    if windows.iter().all(|w| w.singular) {
        return Err(Error::AllSingular);
    }
    let w_count = windows.len();
    let mut eigenvalues = Matrix::zeros(w_count, n);
    let mut coefficients = vec![Matrix::zeros(w_count, n); components];
    let mut singular = Vec::with_capacity(w_count);
    let mut kmo = Vec::with_capacity(w_count);
    for (w, win) in windows.into_iter().enumerate() {
        eigenvalues.row_mut(w).copy_from_slice(&win.eigenvalues);
        for (track, v) in coefficients.iter_mut().zip(&win.vectors) {
            if win.singular {
                track.row_mut(w).fill(T::nan());
            } else {
                track.row_mut(w).copy_from_slice(v);
            }
        }
        singular.push(win.singular);
        kmo.push(win.kmo);
    }
    Ok(SweepResult {
        plan,
        labels: series.labels.clone(),
        eigenvalues,
        coefficients,
        singular,
        kmo,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderBasis {
    /// Ascending loading at the middle window.
    #[default]
    MidpointSort,
    InputOrder,
}

impl std::fmt::Display for OrderBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MidpointSort => "midpoint_sort",
            Self::InputOrder => "input_order",
        })
    }
}

impl std::str::FromStr for OrderBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint_sort" => Ok(Self::MidpointSort),
            "input_order" => Ok(Self::InputOrder),
            other => Err(Error::InvalidArgument(format!(
                "unknown order basis {other:?} (expected midpoint_sort or input_order)"
            ))),
        }
    }
}

/// One component's loadings across all windows, with variables in display order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTrack<T> {
    pub component: usize,
    /// W×N; column r holds variable `row_order[r]`.
    pub matrix: Matrix<T>,
    pub row_order: Vec<usize>,
    pub order_basis: OrderBasis,
    /// Labels in display order.
    pub labels: Vec<String>,
    /// Absolute start offset of each window.
    pub window_starts: Vec<usize>,
}

impl<T: Real> CoefficientTrack<T> {
    pub fn windows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_vars(&self) -> usize {
        self.matrix.cols()
    }

    /// Undoes the display permutation, giving rows in input variable order.
    pub fn input_ordered(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.windows(), self.n_vars());
        for w in 0..self.windows() {
            for (r, &var) in self.row_order.iter().enumerate() {
                out[(w, var)] = self.matrix[(w, r)];
            }
        }
        out
    }
}

fn check_component<T: Real>(sweep: &SweepResult<T>, component: usize) -> Result<()> {
    if component >= sweep.components() {
        return Err(Error::InvalidArgument(format!(
            "component {} not retained (sweep kept {})",
            component + 1,
            sweep.components()
        )));
    }
    Ok(())
}

/// Nearest non-singular window to the middle, preferring the earlier one on ties.
fn midpoint_window<T: Real>(sweep: &SweepResult<T>) -> usize {
    let mid = sweep.windows() / 2;
    (0..=sweep.windows())
        .flat_map(|d| [mid.checked_sub(d), Some(mid + d)])
        .flatten()
        .find(|&w| w < sweep.windows() && !sweep.singular[w])
        .expect("a sweep always has a non-singular window")
}

/// Loadings of a component (0-based) across windows, ordered for display.
pub fn coefficient_track<T: Real>(
    sweep: &SweepResult<T>,
    component: usize,
    order: OrderBasis,
) -> Result<CoefficientTrack<T>> {
    check_component(sweep, component)?;
    let source = &sweep.coefficients[component];
    let mut row_order: Vec<usize> = (0..sweep.n_vars()).collect();
    if order == OrderBasis::MidpointSort {
        let mid = source.row(midpoint_window(sweep));
        row_order.sort_by(|&a, &b| mid[a].partial_cmp(&mid[b]).unwrap_or(std::cmp::Ordering::Equal));
    }
    Ok(CoefficientTrack {
        component,
        matrix: source.select_columns(&row_order),
        labels: row_order.iter().map(|&i| sweep.labels[i].clone()).collect(),
        row_order,
        order_basis: order,
        window_starts: sweep.plan.starts.clone(),
    })
}

/// Angle in [0, π] between two unit vectors.
///
/// Evaluates 2·atan2(|a − b|, |a + b|), which equals arccos(a·b) for unit
/// vectors but stays accurate near 0 and π where arccos loses half its digits.
pub fn angle_between<T: Real>(a: &[T], b: &[T]) -> T {
    let mut diff = T::zero();
    let mut sum = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        diff = diff + (x - y) * (x - y);
        sum = sum + (x + y) * (x + y);
    }
    T::of(2.0) * diff.sqrt().atan2(sum.sqrt())
}

/// Per-window drift of one component relative to its first-window eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries<T> {
    pub component: usize,
    pub window_starts: Vec<usize>,
    /// Angle in [0, π] using each window's eigenvector as returned; NaN for gaps.
    pub angles_raw: Vec<T>,
    /// Sign-folded angle min(raw, π − raw) in [0, π/2]; NaN for gaps.
    pub angles_aligned: Vec<T>,
    /// True where the eigenvector points away from the reference (negative dot product).
    pub flip_flags: Vec<bool>,
    pub marker_variable: usize,
    /// Loading of the marker variable in each window; NaN for gaps.
    pub marker_values: Vec<T>,
}

impl<T: Real> AngleSeries<T> {
    pub fn is_gap(&self, w: usize) -> bool {
        self.angles_raw[w].is_nan()
    }
}

/// Angle series for a component (0-based). The marker defaults to the last variable.
pub fn angle_series<T: Real>(
    sweep: &SweepResult<T>,
    component: usize,
    marker_variable: Option<usize>,
) -> Result<AngleSeries<T>> {
    check_component(sweep, component)?;
    let n = sweep.n_vars();
    let marker = marker_variable.unwrap_or(n - 1);
    if marker >= n {
        return Err(Error::InvalidArgument(format!(
            "marker variable {marker} out of range (N = {n})"
        )));
    }
    let w_count = sweep.windows();
    let reference = (0..w_count)
        .find_map(|w| sweep.vector(component, w))
        .ok_or(Error::AllSingular)?;
    let pi = T::of(std::f64::consts::PI);

    let mut out = AngleSeries {
        component,
        window_starts: sweep.plan.starts.clone(),
        angles_raw: Vec::with_capacity(w_count),
        angles_aligned: Vec::with_capacity(w_count),
        flip_flags: Vec::with_capacity(w_count),
        marker_variable: marker,
        marker_values: Vec::with_capacity(w_count),
    };
    for w in 0..w_count {
        match sweep.vector(component, w) {
            Some(v) => {
                let raw = angle_between(reference, v);
                out.angles_raw.push(raw);
                out.angles_aligned.push(raw.min(pi - raw));
                out.flip_flags.push(dot(reference, v) < T::zero());
                out.marker_values.push(v[marker]);
            }
            None => {
                out.angles_raw.push(T::nan());
                out.angles_aligned.push(T::nan());
                out.flip_flags.push(false);
                out.marker_values.push(T::nan());
            }
        }
    }
    Ok(out)
}

fn fmt_value<T: Real>(out: &mut String, v: T) {
    if !v.is_nan() {
        let _ = write!(out, "{v}");
    }
}

/// CSV of a coefficient track: `window` then one column per variable in display order.
/// Gap windows have empty value cells.
pub fn track_csv<T: Real>(track: &CoefficientTrack<T>) -> String {
    let mut out = String::from("window");
    for label in &track.labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for w in 0..track.windows() {
        let _ = write!(out, "{}", track.window_starts[w]);
        for &v in track.matrix.row(w) {
            out.push(',');
            fmt_value(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_track_csv<T: Real>(track: &CoefficientTrack<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, track_csv(track)).map_err(|e| Error::io(path, e))
}

const SWEEP_FORMAT: &str = "pcdrift-sweep/1";

fn write_f64_matrix<T: Real>(m: &Matrix<T>, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(m.as_slice().len() * 8);
    for &v in m.as_slice() {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f64_matrix<T: Real>(path: &Path, rows: usize, cols: usize) -> Result<Matrix<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::Data(format!(
            "{}: expected {} bytes for a {rows}x{cols} matrix, found {}",
            path.display(),
            rows * cols * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

/// Binary file name for a component's coefficients (0-based index, 1-based name).
pub fn component_file_stem(component: usize) -> String {
    format!("pc{:02}", component + 1)
}

/// Persists a sweep as a directory of little-endian f64 row-major matrices plus `manifest.txt`.
pub fn write_sweep<T: Real>(sweep: &SweepResult<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let singular: Vec<String> = sweep
        .singular
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(w, _)| w.to_string())
        .collect();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "format = {SWEEP_FORMAT}");
    let _ = writeln!(manifest, "byte_order = little-endian");
    let _ = writeln!(manifest, "scalar = f64");
    let _ = writeln!(manifest, "layout = row-major");
    let _ = writeln!(manifest, "series_length = {}", sweep.plan.series_length);
    let _ = writeln!(manifest, "window_length = {}", sweep.plan.window_length);
    let _ = writeln!(manifest, "first_start = {}", sweep.plan.starts.first().copied().unwrap_or(0));
    let _ = writeln!(manifest, "windows = {}", sweep.windows());
    let _ = writeln!(manifest, "variables = {}", sweep.n_vars());
    let _ = writeln!(manifest, "components = {}", sweep.components());
    let _ = writeln!(manifest, "singular_windows = {}", singular.join(","));
    let _ = writeln!(manifest, "eigenvalues = eigenvalues.f64 ({}x{})", sweep.windows(), sweep.n_vars());
    let _ = writeln!(manifest, "kmo = kmo.f64 ({}x1, NaN where not estimable)", sweep.windows());
    for j in 0..sweep.components() {
        let stem = component_file_stem(j);
        let _ = writeln!(manifest, "{stem} = {stem}.f64 ({}x{})", sweep.windows(), sweep.n_vars());
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("labels.txt");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for label in &sweep.labels {
        writeln!(f, "{label}").map_err(|e| Error::io(&path, e))?;
    }

    write_f64_matrix(&sweep.eigenvalues, &dir.join("eigenvalues.f64"))?;
    let kmo = Matrix::from_vec(
        sweep.windows(),
        1,
        sweep.kmo.iter().map(|k| k.unwrap_or_else(T::nan)).collect(),
    );
    write_f64_matrix(&kmo, &dir.join("kmo.f64"))?;
    for (j, m) in sweep.coefficients.iter().enumerate() {
        write_f64_matrix(m, &dir.join(format!("{}.f64", component_file_stem(j))))?;
    }
    Ok(())
}

/// Reads back a directory written by [`write_sweep`].
pub fn read_sweep<T: Real>(dir: impl AsRef<Path>) -> Result<SweepResult<T>> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Data(format!("{}: missing key {key}", path.display())))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad value for {key}", path.display())))
    };
    if get("format")? != SWEEP_FORMAT {
        return Err(Error::Data(format!("{}: unsupported format", path.display())));
    }
    let (t, k, first) = (num("series_length")?, num("window_length")?, num("first_start")?);
    let (w, n, j) = (num("windows")?, num("variables")?, num("components")?);
    let plan = plan_windows_with(t, k, first > 0)?;
    if plan.count() != w {
        return Err(Error::Data(format!("{}: window count mismatch", path.display())));
    }
    let mut singular = vec![false; w];
    for s in get("singular_windows")?.split(',').filter(|s| !s.is_empty()) {
        let idx: usize = s
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad singular window {s:?}", path.display())))?;
        *singular
            .get_mut(idx)
            .ok_or_else(|| Error::Data(format!("{}: singular window {idx} out of range", path.display())))? = true;
    }
    let labels_path = dir.join("labels.txt");
    let labels: Vec<String> = fs::read_to_string(&labels_path)
        .map_err(|e| Error::io(&labels_path, e))?
        .lines()
        .map(str::to_owned)
        .collect();
    if labels.len() != n {
        return Err(Error::Data(format!("{}: expected {n} labels", labels_path.display())));
    }
    let eigenvalues = read_f64_matrix(&dir.join("eigenvalues.f64"), w, n)?;
    let kmo_m: Matrix<T> = read_f64_matrix(&dir.join("kmo.f64"), w, 1)?;
    let kmo = kmo_m.as_slice().iter().map(|&v| (!v.is_nan()).then_some(v)).collect();
    let coefficients = (0..j)
        .map(|c| read_f64_matrix(&dir.join(format!("{}.f64", component_file_stem(c))), w, n))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        plan,
        labels,
        eigenvalues,
        coefficients,
        singular,
        kmo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rolling::plan_windows;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Hand-built sweep over given per-window vectors of one component.
    fn synthetic(vectors: Vec<Vec<f64>>) -> SweepResult<f64> {
        let w = vectors.len();
        let n = vectors[0].len();
        let singular = vectors.iter().map(|v| v[0].is_nan()).collect();
        SweepResult {
            plan: plan_windows(w, 1).unwrap(),
            labels: (1..=n).map(|i| format!("V{i}")).collect(),
            eigenvalues: Matrix::from_elem(w, n, 1.0),
            coefficients: vec![Matrix::from_rows(&vectors)],
            singular,
            kmo: vec![None; w],
        }
    }

    #[test]
    fn angle_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = synthetic(vec![
            vec![h, h, 0.0],
            vec![h, h, 0.0],
            vec![h, -h, 0.0],
            vec![-h, -h, 0.0],
        ]);
        let a = angle_series(&s, 0, None).unwrap();
        assert_eq!(a.angles_raw[0], 0.0);
        assert_eq!(a.angles_raw[1], 0.0);
        assert!((a.angles_raw[2] - FRAC_PI_2).abs() < 1e-12);
        assert!((a.angles_aligned[2] - FRAC_PI_2).abs() < 1e-12);
        assert!((a.angles_raw[3] - PI).abs() < 1e-12);
        assert_eq!(a.angles_aligned[3], 0.0);
        assert_eq!(a.flip_flags, vec![false, false, false, true]);
        assert_eq!(a.marker_variable, 2);
    }

    #[test]
    fn gaps_stay_gaps() {
        let s = synthetic(vec![
            vec![f64::NAN, f64::NAN],
            vec![1.0, 0.0],
            vec![f64::NAN, f64::NAN],
            vec![0.0, 1.0],
        ]);
        let a = angle_series(&s, 0, Some(0)).unwrap();
        assert!(a.is_gap(0) && a.is_gap(2));
        assert_eq!(a.angles_raw[1], 0.0);
        assert!((a.angles_raw[3] - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(a.marker_values[1], 1.0);
        assert!(a.marker_values[2].is_nan());
    }

    #[test]
    fn midpoint_sort_single_window() {
        let s = synthetic(vec![vec![0.3, -0.5, 0.8]]);
        let t = coefficient_track(&s, 0, OrderBasis::MidpointSort).unwrap();
        assert_eq!(t.row_order, vec![1, 0, 2]);
        assert_eq!(t.labels, vec!["V2", "V1", "V3"]);
        assert_eq!(t.matrix.row(0), &[-0.5, 0.3, 0.8]);
        assert_eq!(t.input_ordered(), s.coefficients[0]);

        let t = coefficient_track(&s, 0, OrderBasis::InputOrder).unwrap();
        assert_eq!(t.row_order, vec![0, 1, 2]);
        assert!(coefficient_track(&s, 1, OrderBasis::InputOrder).is_err());
    }

    #[test]
    fn midpoint_skips_singular_window() {
        let s = synthetic(vec![
            vec![0.1, 0.2],
            vec![f64::NAN, f64::NAN],
            vec![0.9, -0.1],
        ]);
        // middle index 1 is a gap; the earlier neighbour wins
        let t = coefficient_track(&s, 0, OrderBasis::MidpointSort).unwrap();
        assert_eq!(t.row_order, vec![0, 1]);
    }

    #[test]
    fn track_csv_layout() {
        let s = synthetic(vec![vec![0.3, -0.5], vec![f64::NAN, f64::NAN]]);
        let t = coefficient_track(&s, 0, OrderBasis::InputOrder).unwrap();
        assert_eq!(track_csv(&t), "window,V1,V2\n0,0.3,-0.5\n1,,\n");
    }

    #[test]
    fn sweep_validates_component_count() {
        let s = SeriesMatrix::from_matrix(Matrix::from_fn(10, 2, |i, j| ((i * (j + 2)) % 5) as f64));
        assert!(sweep(&s, 5, 0, SweepOptions::default()).is_err());
        assert!(sweep(&s, 5, 3, SweepOptions::default()).is_err());
    }

    #[test]
    fn all_singular_sweep_is_an_error() {
        // three identical columns: every window has a rank-one correlation matrix
        let s = SeriesMatrix::from_matrix(Matrix::from_fn(8, 3, |i, _| ((i * i) % 7) as f64));
        assert!(matches!(
            sweep(&s, 4, 1, SweepOptions::default()),
            Err(Error::AllSingular)
        ));
    }
}
