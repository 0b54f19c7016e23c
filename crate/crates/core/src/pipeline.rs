//! End-to-end run: ingest, window selection, rolling PCA, retention and rendering.
//!
//! Output tree under `output_dir`:
//!
//! ```text
//! manifest.txt            chosen window, W, N, T', KMO search table
//! kmo_search.csv          one row per candidate window (auto mode)
//! retention.txt / .csv    retention rules on the full-period correlation matrix
//! scree.csv, log_scree.csv
//! heatmaps/pcNN.ppm       plus pcNN.txt describing the image
//! coefficients/pcNN.csv   loadings per window in heat-map row order
//! angles/pcNN.csv         eigenvector angle drift per window
//! sweep/                  binary per-window eigenvalues, KMO and eigenvectors
//! run.log
//! ```
//!
//! A failed run leaves whatever it wrote plus an `INCOMPLETE` file holding the error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::adequacy::{select_window_with, WindowSearchResult};
use crate::config::{RunConfig, WindowChoice};
use crate::eigen::decompose;
use crate::error::{Error, Result};
use crate::evolution::{
    angle_series, coefficient_track, component_file_stem, sweep, write_sweep, write_track_csv,
    SweepOptions, SweepResult,
};
use crate::ingest::{filter_complete, load_csv, to_returns, SeriesMatrix};
use crate::render::{export_angle_plot, export_scree, render_heatmap, HeatmapSpec};
use crate::retention::RetentionReport;
use crate::rolling::correlation;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Files and directories a run owns inside `output_dir`; cleared before each run.
const OUTPUTS: [&str; 12] = [
    "manifest.txt",
    "kmo_search.csv",
    "retention.txt",
    "retention.csv",
    "scree.csv",
    "log_scree.csv",
    "heatmaps",
    "coefficients",
    "angles",
    "sweep",
    "run.log",
    INCOMPLETE_MARKER,
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub window: usize,
    pub windows: usize,
    pub n_vars: usize,
    pub series_length: usize,
    pub components: usize,
}

fn now() -> String {
    DateTime::<Utc>::from(SystemTime::now()).to_rfc3339_opts(SecondsFormat::Millis, true)
}

struct RunLog {
    text: String,
}

impl RunLog {
    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn clear_outputs(dir: &Path) -> Result<()> {
    for name in OUTPUTS {
        let p = dir.join(name);
        let res = if p.is_dir() {
            fs::remove_dir_all(&p)
        } else if p.exists() {
            fs::remove_file(&p)
        } else {
            Ok(())
        };
        res.map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Runs the whole pipeline. Worker count never changes any output byte.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let out = config.output_dir.clone();
    mkdir(&out)?;
    clear_outputs(&out)?;

    let mut log = RunLog { text: String::new() };
    log.line(format!("pcdrift {}", env!("CARGO_PKG_VERSION")));
    log.line(format!("started_at = {}", now()));
    log.line("[config]");
    log.line(echo_config(config).trim_end());
    log.line("[steps]");

    let result = pool.install(|| run_steps(config, &out, &mut log));
    match &result {
        Ok(_) => log.line("status = ok"),
        Err(e) => log.line(format!("status = failed (exit {}): {e}", e.exit_code())),
    }
    log.line(format!("finished_at = {}", now()));
    let log_written = write(&out.join("run.log"), &log.text);
    if let Err(e) = &result {
        write(&out.join(INCOMPLETE_MARKER), format!("{e}\n"))?;
    }
    let summary = result?;
    log_written?;
    Ok(summary)
}

/// Config as TOML, minus the keys that may differ between otherwise identical runs.
fn echo_config(config: &RunConfig) -> String {
    let mut table: toml::Table = toml::from_str(&config.to_toml()).unwrap_or_default();
    table.remove("workers");
    table.remove("output_dir");
    toml::to_string(&table).unwrap_or_default()
}

fn run_steps(config: &RunConfig, out: &Path, log: &mut RunLog) -> Result<RunSummary> {
    let raw = load_csv(&config.input_path)?;
    log.line(format!("loaded rows = {} variables = {}", raw.len(), raw.n_vars()));
    let (raw, dropped) = filter_complete(&raw)?;
    log.line(format!("dropped_incomplete = {}", dropped.join(",")));
    let series: SeriesMatrix<f64> = to_returns(&raw, config.returns_kind)?;
    series.check_variance()?;
    let (t, n) = (series.len(), series.n_vars());
    log.line(format!("analysis rows = {t} variables = {n}"));

    let marker = match config.marker_variable.as_str() {
        "last" => None,
        label => Some(series.labels.iter().position(|l| l == label).ok_or_else(|| {
            Error::Config(format!("marker_variable {label:?} is not a column of the input"))
        })?),
    };

    let search = match config.window {
        WindowChoice::Fixed(_) => None,
        WindowChoice::Auto => {
            let feasible: Vec<usize> = config.window_candidates.iter().copied().filter(|&k| k <= t).collect();
            if feasible.is_empty() {
                return Err(Error::WindowTooLong {
                    window: config.window_candidates[0],
                    length: t,
                });
            }
            let res = select_window_with(&series, &feasible, config.kmo_threshold, config.refresh_interval)?;
            write(&out.join("kmo_search.csv"), search_csv(config, &res))?;
            log.line(format!("window_search chosen = {:?}", res.chosen_window));
            Some(res)
        }
    };
    let k = match (config.window, &search) {
        (WindowChoice::Fixed(k), _) => k,
        (WindowChoice::Auto, Some(res)) => match res.chosen_window {
            Some(k) => k,
            None => {
                write(&out.join("manifest.txt"), search_manifest(config, t, n, &res))?;
                return Err(Error::NoAdequateWindow {
                    threshold: config.kmo_threshold,
                });
            }
        },
        (WindowChoice::Auto, None) => unreachable!("auto window always searches"),
    };

    let components = config.components.min(n);
    if components < config.components {
        log.line(format!("components capped at N = {n} (requested {})", config.components));
    }
    let options = SweepOptions {
        refresh: config.refresh_interval,
        drop_first_window: config.drop_first_window,
    };
    let result = sweep(&series, k, components, options)?;
    log.line(format!("sweep window = {k} windows = {}", result.windows()));

    let full = decompose(&correlation(&series, 0, t)?)?;
    let report = RetentionReport::new(
        full.eigenvalues(),
        &config.cumulative_thresholds,
        &config.kaiser_cutoffs,
    )?;
    write(&out.join("retention.txt"), report.to_key_value())?;
    write(&out.join("retention.csv"), report.to_csv())?;
    export_scree(&report, out.join("scree.csv"), out.join("log_scree.csv"))?;
    log.line("wrote retention");

    for dir in ["heatmaps", "coefficients", "angles"] {
        mkdir(&out.join(dir))?;
    }
    for j in 0..components {
        let stem = component_file_stem(j);
        let track = coefficient_track(&result, j, config.order_basis)?;
        let spec = HeatmapSpec::for_track(&track, config.cell_width, config.cell_height);
        render_heatmap(&track, &spec, out.join("heatmaps").join(format!("{stem}.ppm")))?;
        write_track_csv(&track, out.join("coefficients").join(format!("{stem}.csv")))?;
        let angles = angle_series(&result, j, marker)?;
        export_angle_plot(&angles, out.join("angles").join(format!("{stem}.csv")))?;
    }
    log.line(format!("wrote {components} components"));
    write_sweep(&result, out.join("sweep"))?;
    write(&out.join("manifest.txt"), manifest(config, &series, &result, search.as_ref(), &dropped))?;

    Ok(RunSummary {
        output_dir: out.to_path_buf(),
        window: k,
        windows: result.windows(),
        n_vars: n,
        series_length: t,
        components,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn search_csv(config: &RunConfig, res: &WindowSearchResult<f64>) -> String {
    let mut out = String::from("window,windows,estimable_windows,min_kmo,qualifies\n");
    for c in &res.candidates {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.window,
            c.windows,
            c.estimable_windows,
            fmt_opt(c.min_kmo),
            c.qualifies(res.threshold)
        );
    }
    for &k in config.window_candidates.iter().filter(|&&k| !res.candidates.iter().any(|c| c.window == k)) {
        let _ = writeln!(out, "{k},0,0,,false");
    }
    out
}

fn search_lines(out: &mut String, res: &WindowSearchResult<f64>) {
    let _ = writeln!(out, "kmo_threshold = {}", res.threshold);
    for c in &res.candidates {
        let _ = writeln!(
            out,
            "kmo_search.{} = windows {} estimable {} min_kmo {} qualifies {}",
            c.window,
            c.windows,
            c.estimable_windows,
            c.min_kmo.map(|x| x.to_string()).unwrap_or_else(|| "none".into()),
            c.qualifies(res.threshold)
        );
    }
}

fn search_manifest(config: &RunConfig, t: usize, n: usize, res: &WindowSearchResult<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "input = {}", config.input_path.display());
    let _ = writeln!(out, "series_length = {t}");
    let _ = writeln!(out, "variables = {n}");
    let _ = writeln!(out, "window = none");
    search_lines(&mut out, res);
    out
}

fn manifest(
    config: &RunConfig,
    series: &SeriesMatrix<f64>,
    result: &SweepResult<f64>,
    search: Option<&WindowSearchResult<f64>>,
    dropped: &[String],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "input = {}", config.input_path.display());
    let _ = writeln!(out, "returns_kind = {}", config.returns_kind);
    let _ = writeln!(out, "series_length = {}", series.len());
    let _ = writeln!(out, "variables = {}", series.n_vars());
    let _ = writeln!(out, "dropped_incomplete = {}", dropped.join(","));
    if let (Some(first), Some(last)) = (series.timestamps.first(), series.timestamps.last()) {
        let _ = writeln!(out, "first_date = {first}");
        let _ = writeln!(out, "last_date = {last}");
    }
    let _ = writeln!(out, "window = {}", result.plan.window_length);
    let _ = writeln!(out, "window_source = {}", if search.is_some() { "auto" } else { "fixed" });
    let _ = writeln!(out, "drop_first_window = {}", result.plan.drops_first_window());
    let _ = writeln!(out, "windows = {}", result.windows());
    let _ = writeln!(out, "first_start = {}", result.plan.starts.first().copied().unwrap_or(0));
    let _ = writeln!(out, "components = {}", result.components());
    let _ = writeln!(out, "order_basis = {}", config.order_basis);
    let _ = writeln!(out, "singular_windows = {}", result.singular.iter().filter(|&&s| s).count());
    let _ = writeln!(
        out,
        "estimable_kmo_windows = {}",
        result.kmo.iter().filter(|k| k.is_some()).count()
    );
    let _ = writeln!(
        out,
        "min_kmo = {}",
        result.kmo.iter().flatten().copied().reduce(f64::min).map(|x| x.to_string()).unwrap_or_else(|| "none".into())
    );
    if let Some(res) = search {
        search_lines(&mut out, res);
    }
    out
}
