//! Decay-rate extraction from energy records.
//!
//! Records store the energy `E = ‖U‖²`, while the decay statements bound the
//! amplitude `‖U‖`. Every fit here reports amplitude quantities: log-slopes
//! are halved and ratios of energies are square-rooted.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::evolve::DecayRecord;
use crate::semigroup_lab::least_squares;
use crate::table::Table;

pub const DEFAULT_WINDOW: Window = Window { lo: 0.1, hi: 1.0 };

/// Fraction pair selecting `t ∈ [t₀ + lo·T, t₀ + hi·T]` of a record that
/// spans `[t₀, t₀ + T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
            return Err(invalid(format!("fit window ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
        Ok(Window { lo, hi })
    }

    fn select(&self, times: &[f64]) -> Vec<usize> {
        let (t0, t1) = (times[0], times[times.len() - 1]);
        let (a, b) = (t0 + self.lo * (t1 - t0), t0 + self.hi * (t1 - t0));
        // small slack so the end points survive rounding
        let slack = 1e-12 * (t1 - t0).abs().max(1.0);
        (0..times.len())
            .filter(|&k| times[k] >= a - slack && times[k] <= b + slack)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    Exponential,
    PowerBound,
}

impl FitModel {
    pub fn label(&self) -> &'static str {
        match self {
            FitModel::Exponential => "exponential",
            FitModel::PowerBound => "power-bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub eta: u32,
    /// Amplitude rate `γ` (exponential) or realized constant `ĉ` (power bound).
    pub value: f64,
    /// Exponential: amplitude prefactor `C` in `‖U‖ ≈ C e^{-γt}`.
    /// Power bound: log-log growth exponent of the scaled statistic
    /// `sqrt(E_k (1+t_k))/data`, about 0 when the bound holds with room
    /// and 1/2 for a conservative run.
    pub c: f64,
    pub r2: f64,
    pub window: Window,
}

fn r_squared(x: &[f64], y: &[f64], slope: f64, intercept: f64) -> f64 {
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    if ss_tot <= 0.0 {
        // constant data are fitted exactly
        return 1.0;
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Least squares on `log E` against `t` over `window`.
pub fn fit_exponential(record: &DecayRecord, window: Window) -> Result<FitResult> {
    if record.len() != record.energies.len() || record.is_empty() {
        return Err(invalid("record series have inconsistent lengths"));
    }
    if record.energies.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(invalid("energies must be positive and finite"));
    }
    let idx = window.select(&record.times);
    if idx.len() < 10 {
        return Err(invalid(format!(
            "fit window holds {} samples, need at least 10",
            idx.len()
        )));
    }
    let x: Vec<f64> = idx.iter().map(|&k| record.times[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| record.energies[k].ln()).collect();
    let (slope, intercept) = least_squares(&x, &y);
    if !slope.is_finite() {
        return Err(invalid("degenerate fit window"));
    }
    let gamma = -0.5 * slope;
    if !(gamma > 0.0) {
        return Err(Error::Fit(format!("energy does not decay (amplitude rate {gamma:e})")));
    }
    Ok(FitResult {
        model: FitModel::Exponential,
        eta: record.eta,
        value: gamma,
        c: (0.5 * intercept).exp(),
        r2: r_squared(&x, &y, slope, intercept),
        window,
    })
}

/// Data term `‖u₀‖_{H¹} + ‖u₁‖ + (‖Δu₀‖ + ‖∇u₁‖)/η²`.
pub fn data_norm(record: &DecayRecord) -> Result<f64> {
    let n = &record.input_norms;
    let parts = [n.h1_u0, n.l2_u1, n.laplacian_u0, n.gradient_u1];
    if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid("input norms must be finite and non-negative"));
    }
    if record.eta == 0 {
        return Err(invalid("record has no eta"));
    }
    let eta2 = (record.eta as f64).powi(2);
    let total = n.h1_u0 + n.l2_u1 + (n.laplacian_u0 + n.gradient_u1) / eta2;
    if !(total > 0.0) {
        return Err(invalid("input norms are missing (all zero)"));
    }
    Ok(total)
}

/// Realized constant `ĉ = max_k sqrt(E_k)·sqrt(1+t_k) / data`, plus the
/// growth exponent of that statistic fitted on the default window.
pub fn verify_power_bound(record: &DecayRecord) -> Result<FitResult> {
    let data = data_norm(record)?;
    if record.len() < 2 {
        return Err(invalid("record needs at least two samples"));
    }
    if record.energies.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(invalid("energies must be non-negative and finite"));
    }
    let stat: Vec<f64> = record
        .times
        .iter()
        .zip(&record.energies)
        .map(|(t, e)| (e * (1.0 + t)).sqrt() / data)
        .collect();
    let c_hat = stat.iter().copied().fold(0.0, f64::max);

    let window = DEFAULT_WINDOW;
    let idx: Vec<usize> = window
        .select(&record.times)
        .into_iter()
        .filter(|&k| stat[k] > 0.0)
        .collect();
    let (growth, r2) = if idx.len() >= 2 {
        let x: Vec<f64> = idx.iter().map(|&k| (1.0 + record.times[k]).ln()).collect();
        let y: Vec<f64> = idx.iter().map(|&k| stat[k].ln()).collect();
        let (slope, intercept) = least_squares(&x, &y);
        (slope, r_squared(&x, &y, slope, intercept))
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(FitResult {
        model: FitModel::PowerBound,
        eta: record.eta,
        value: c_hat,
        c: growth,
        r2,
        window,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub model: FitModel,
    pub min: f64,
    pub max: f64,
    pub ratio: f64,
}

/// Spread of `γ` or `ĉ` across a family of fits.
pub fn uniformity_report(fits: &[FitResult]) -> Result<UniformityReport> {
    if fits.len() < 2 {
        return Err(invalid("uniformity needs at least two fits"));
    }
    let model = fits[0].model;
    if fits.iter().any(|f| f.model != model) {
        return Err(invalid("cannot compare fits of different models"));
    }
    let min = fits.iter().map(|f| f.value).fold(f64::INFINITY, f64::min);
    let max = fits.iter().map(|f| f.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(UniformityReport {
        model,
        min,
        max,
        ratio: max / min,
    })
}

pub fn fit_table(fits: &[FitResult]) -> Table {
    let mut t = Table::new(["eta", "model", "gamma_or_c", "C", "r2", "window_lo", "window_hi"]);
    for f in fits {
        t.push(vec![
            f.eta.into(),
            f.model.label().into(),
            f.value.into(),
            f.c.into(),
            f.r2.into(),
            f.window.lo.into(),
            f.window.hi.into(),
        ]);
    }
    t
}
