//! Heat-map images and plot-ready data files.
//!
//! Heat maps are binary PPM (P6, maxval 255): one cell per (window, variable),
//! windows left to right, variables top to bottom in the track's display order.
//! Negative loadings run toward red, positive toward yellow, zero is the
//! midpoint orange, and every channel is an exact reflection about the midpoint.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolution::{AngleSeries, CoefficientTrack};
use crate::retention::RetentionReport;
use crate::scalar::Real;

pub type Rgb = [u8; 3];

/// Color of a zero loading.
pub const MIDPOINT: Rgb = [231, 120, 24];
/// Channel offsets from the midpoint at ±value_clip.
const SPAN: [u8; 3] = [24, 120, 0];
/// Reserved for windows with no loadings; outside the ramp because its blue channel differs.
pub const GAP_COLOR: Rgb = [128, 128, 128];

/// Color for `value` on a symmetric scale clipped to ±`clip`.
pub fn color_for(value: f64, clip: f64) -> Rgb {
    if value.is_nan() {
        return GAP_COLOR;
    }
    let t = (value / clip).clamp(-1.0, 1.0);
    let mut rgb = MIDPOINT;
    for c in 0..3 {
        let delta = (t.abs() * f64::from(SPAN[c])).round() as u8;
        rgb[c] = if t < 0.0 {
            MIDPOINT[c] - delta
        } else {
            MIDPOINT[c] + delta
        };
    }
    rgb
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSpec {
    /// Loadings beyond ±value_clip saturate; must be positive.
    pub value_clip: f64,
    pub cell_width: usize,
    pub cell_height: usize,
}

impl HeatmapSpec {
    /// Spec with the clip set to the 99th percentile of |loading| over the track.
    pub fn for_track<T: Real>(track: &CoefficientTrack<T>, cell_width: usize, cell_height: usize) -> Self {
        Self {
            value_clip: default_clip(track),
            cell_width,
            cell_height,
        }
    }
}

/// 99th percentile (nearest rank) of |loading| over non-gap cells; 1 if that is not positive.
pub fn default_clip<T: Real>(track: &CoefficientTrack<T>) -> f64 {
    let mut mags: Vec<f64> = track
        .matrix
        .as_slice()
        .iter()
        .filter(|v| !v.is_nan())
        .map(|v| v.as_f64().abs())
        .collect();
    if mags.is_empty() {
        return 1.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = ((0.99 * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    let clip = mags[rank - 1];
    if clip > 0.0 {
        clip
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len() * 3);
        out.extend_from_slice(header.as_bytes());
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

pub fn heatmap_image<T: Real>(track: &CoefficientTrack<T>, spec: &HeatmapSpec) -> Result<Image> {
    if !(spec.value_clip > 0.0) || !spec.value_clip.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "value_clip must be positive, got {}",
            spec.value_clip
        )));
    }
    if spec.cell_width == 0 || spec.cell_height == 0 {
        return Err(Error::InvalidArgument("cell size must be at least 1x1".into()));
    }
    let (windows, vars) = track.matrix.shape();
    let width = windows * spec.cell_width;
    let height = vars * spec.cell_height;
    let mut pixels = vec![GAP_COLOR; width * height];
    for r in 0..vars {
        for w in 0..windows {
            let color = color_for(track.matrix[(w, r)].as_f64(), spec.value_clip);
            for dy in 0..spec.cell_height {
                let y = r * spec.cell_height + dy;
                let x0 = w * spec.cell_width;
                pixels[y * width + x0..y * width + x0 + spec.cell_width].fill(color);
            }
        }
    }
    Ok(Image {
        width,
        height,
        pixels,
    })
}

/// Sidecar text describing a rendered heat map.
pub fn heatmap_manifest<T: Real>(track: &CoefficientTrack<T>, spec: &HeatmapSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "component = {}", track.component + 1);
    let _ = writeln!(out, "width = {}", track.windows() * spec.cell_width);
    let _ = writeln!(out, "height = {}", track.n_vars() * spec.cell_height);
    let _ = writeln!(out, "windows = {}", track.windows());
    let _ = writeln!(out, "variables = {}", track.n_vars());
    let _ = writeln!(out, "cell_width = {}", spec.cell_width);
    let _ = writeln!(out, "cell_height = {}", spec.cell_height);
    let _ = writeln!(out, "value_clip = {}", spec.value_clip);
    let _ = writeln!(out, "color_scale = symmetric_diverging red-orange-yellow");
    let _ = writeln!(out, "order_basis = {}", track.order_basis);
    let _ = writeln!(
        out,
        "row_order = {}",
        track.row_order.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "row_labels = {}", track.labels.join(","));
    out
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the PPM to `out` and its manifest next to it with a `.txt` extension.
pub fn render_heatmap<T: Real>(
    track: &CoefficientTrack<T>,
    spec: &HeatmapSpec,
    out: impl AsRef<Path>,
) -> Result<()> {
    let out = out.as_ref();
    let image = heatmap_image(track, spec)?;
    write_file(out, image.to_ppm())?;
    write_file(&out.with_extension("txt"), heatmap_manifest(track, spec))
}

fn push_value<T: Real>(out: &mut String, v: T) {
    if !v.is_nan() {
        let _ = write!(out, "{v}");
    }
}

/// CSV with columns window, angle_raw_rad, angle_aligned_rad, flip_flag,
/// marker_value, marker_sign_class. Gap windows keep their row with empty values.
pub fn angle_plot_csv<T: Real>(series: &AngleSeries<T>) -> String {
    let mut out =
        String::from("window,angle_raw_rad,angle_aligned_rad,flip_flag,marker_value,marker_sign_class\n");
    for w in 0..series.angles_raw.len() {
        let _ = write!(out, "{},", series.window_starts[w]);
        push_value(&mut out, series.angles_raw[w]);
        out.push(',');
        push_value(&mut out, series.angles_aligned[w]);
        out.push(',');
        if !series.is_gap(w) {
            out.push_str(if series.flip_flags[w] { "true" } else { "false" });
        }
        out.push(',');
        let m = series.marker_values[w];
        push_value(&mut out, m);
        out.push(',');
        out.push_str(if m.is_nan() {
            "gap"
        } else if m <= T::zero() {
            "nonpositive"
        } else {
            "positive"
        });
        out.push('\n');
    }
    out
}

pub fn export_angle_plot<T: Real>(series: &AngleSeries<T>, out: impl AsRef<Path>) -> Result<()> {
    write_file(out.as_ref(), angle_plot_csv(series))
}

pub fn scree_csv<T: Real>(report: &RetentionReport<T>) -> String {
    let mut out = String::from("k,value\n");
    for (k, l) in &report.scree.points {
        let _ = writeln!(out, "{k},{l}");
    }
    out
}

pub fn log_scree_csv<T: Real>(report: &RetentionReport<T>) -> String {
    let mut out = format!("# omitted_nonpositive = {}\nk,value\n", report.scree.omitted);
    for (k, l) in &report.scree.log_points {
        let _ = writeln!(out, "{k},{l}");
    }
    out
}

/// Writes the scree and log-scree CSVs.
pub fn export_scree<T: Real>(
    report: &RetentionReport<T>,
    scree_path: impl AsRef<Path>,
    log_path: impl AsRef<Path>,
) -> Result<()> {
    write_file(scree_path.as_ref(), scree_csv(report))?;
    write_file(log_path.as_ref(), log_scree_csv(report))
}
