//! Classical rules for how many principal components to keep.
//!
//! All functions take eigenvalues sorted in descending order. The scree and
//! log-eigenvalue diagrams are emitted as plot data only; reading an elbow off
//! them is left to the analyst.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues at or below this are left out of the log diagram.
pub const LOG_FLOOR: f64 = 1e-12;

/// Smallest m whose cumulative share of variance, in percent, is strictly greater
/// than `threshold_pct`. Returns N when no m exceeds it (only possible at 100).
pub fn cumulative_variance<T: Real>(eigenvalues: &[T], threshold_pct: T) -> Result<usize> {
    if !(threshold_pct > T::zero() && threshold_pct <= T::of(100.0)) {
        return Err(Error::InvalidArgument(format!(
            "cumulative threshold {threshold_pct} outside (0, 100]"
        )));
    }
    let total: T = eigenvalues.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument(
            "eigenvalues are all zero".into(),
        ));
    }
    let hundred = T::of(100.0);
    let mut cum = T::zero();
    for (m, &l) in eigenvalues.iter().enumerate() {
        cum = cum + l;
        if hundred * (cum / total) > threshold_pct {
            return Ok(m + 1);
        }
    }
    Ok(eigenvalues.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KaiserMode<T> {
    /// Keep l_k > cutoff (1 is the classical rule, 0.7 the conservative one).
    Correlation { cutoff: T },
    /// Keep l_k > mean eigenvalue.
    CovarianceMean,
    /// Keep l_k > 0.7 × mean eigenvalue.
    Covariance07Mean,
}

pub fn kaiser_rule<T: Real>(eigenvalues: &[T], mode: KaiserMode<T>) -> usize {
    let mean = || eigenvalues.iter().copied().sum::<T>() / T::of_usize(eigenvalues.len().max(1));
    let bar = match mode {
        KaiserMode::Correlation { cutoff } => cutoff,
        KaiserMode::CovarianceMean => mean(),
        KaiserMode::Covariance07Mean => T::of(0.7) * mean(),
    };
    eigenvalues.iter().filter(|&&l| l > bar).count()
}

/// Plot data for the scree and log-eigenvalue diagrams; ranks are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeData<T> {
    pub points: Vec<(usize, T)>,
    pub log_points: Vec<(usize, T)>,
    /// Eigenvalues too small for the log diagram.
    pub omitted: usize,
}

pub fn scree_data<T: Real>(eigenvalues: &[T]) -> ScreeData<T> {
    let points: Vec<(usize, T)> = eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (i + 1, l))
        .collect();
    let log_points: Vec<(usize, T)> = points
        .iter()
        .filter(|&&(_, l)| l > T::of(LOG_FLOOR))
        .map(|&(k, l)| (k, l.ln()))
        .collect();
    let omitted = points.len() - log_points.len();
    ScreeData {
        points,
        log_points,
        omitted,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionReport<T> {
    pub eigenvalues: Vec<T>,
    /// (threshold percent, m), thresholds ascending.
    pub cumulative: Vec<(T, usize)>,
    /// (cutoff, m) under correlation-mode Kaiser, cutoffs descending.
    pub kaiser: Vec<(T, usize)>,
    pub kaiser_mean: usize,
    pub kaiser_07mean: usize,
    pub scree: ScreeData<T>,
}

impl<T: Real> RetentionReport<T> {
    pub fn new(eigenvalues: &[T], thresholds: &[T], cutoffs: &[T]) -> Result<Self> {
        let mut thresholds = thresholds.to_vec();
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut cutoffs = cutoffs.to_vec();
        cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let cumulative = thresholds
            .iter()
            .map(|&t| cumulative_variance(eigenvalues, t).map(|m| (t, m)))
            .collect::<Result<_>>()?;
        let kaiser = cutoffs
            .iter()
            .map(|&c| (c, kaiser_rule(eigenvalues, KaiserMode::Correlation { cutoff: c })))
            .collect();
        Ok(Self {
            eigenvalues: eigenvalues.to_vec(),
            cumulative,
            kaiser,
            kaiser_mean: kaiser_rule(eigenvalues, KaiserMode::CovarianceMean),
            kaiser_07mean: kaiser_rule(eigenvalues, KaiserMode::Covariance07Mean),
            scree: scree_data(eigenvalues),
        })
    }

    /// Flat `key = value` text, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let total: T = self.eigenvalues.iter().copied().sum();
        let _ = writeln!(out, "components = {}", self.eigenvalues.len());
        let _ = writeln!(out, "eigenvalue_sum = {total}");
        for (t, m) in &self.cumulative {
            let _ = writeln!(out, "cumulative.{t} = {m}");
        }
        for (c, m) in &self.kaiser {
            let _ = writeln!(out, "kaiser.{c} = {m}");
        }
        let _ = writeln!(out, "kaiser.mean = {}", self.kaiser_mean);
        let _ = writeln!(out, "kaiser.0.7mean = {}", self.kaiser_07mean);
        let _ = writeln!(out, "log_scree.omitted = {}", self.scree.omitted);
        for (k, l) in &self.scree.points {
            let _ = writeln!(out, "eigenvalue.{k} = {l}");
        }
        out
    }

    /// Rule table as CSV rows: rule, parameter, components.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rule,parameter,components\n");
        for (t, m) in &self.cumulative {
            let _ = writeln!(out, "cumulative_variance,{t},{m}");
        }
        for (c, m) in &self.kaiser {
            let _ = writeln!(out, "kaiser,{c},{m}");
        }
        let _ = writeln!(out, "kaiser_mean,1,{}", self.kaiser_mean);
        let _ = writeln!(out, "kaiser_mean,0.7,{}", self.kaiser_07mean);
        out
    }
}
