//! Periodic damping profiles `a(x)` on the unit torus.
//!
//! A profile is a non-negative, `Z^d`-periodic function together with an
//! integer dilation factor `η` so that the stored profile evaluates to
//! `a(η x)`. Besides point evaluation this module provides Fourier
//! coefficients (consumed by the Bloch pencils), ray averages for the
//! geometric control condition, and the smooth minorant construction used
//! by the high-frequency estimate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{kernel_ramp, mollifier_rule};
use crate::spectral::{storage_index, Spectral};

/// One entry of a tabulated Fourier series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub n: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ProfileKind {
    Constant {
        level: f64,
    },
    /// `mean + amplitude * cos(2π k·x)`; `k` defaults to the first axis.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wavevector: Option<Vec<i64>>,
    },
    /// Trapezoidal strip around `x₁ ∈ Z` (plateau half-width `half_width`,
    /// linear ramp of width `ramp`) convolved once with the bump of radius
    /// `ramp / 2`. Depends on `x₁` only.
    SmoothedStrip {
        level: f64,
        half_width: f64,
        ramp: f64,
    },
    /// `max(0, base - alpha/4)` convolved with the bump of radius `delta`.
    Mollified {
        base: Box<DampingProfile>,
        alpha: f64,
        delta: f64,
    },
    TabulatedFourier {
        modes: Vec<FourierMode>,
    },
}

/// Serialized form of a profile; `sup_norm` is recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default = "unit_dilation")]
    pub dilation: u32,
    #[serde(default)]
    pub sup_norm: Option<f64>,
}

fn unit_dilation() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct DampingProfile {
    dim: usize,
    kind: ProfileKind,
    dilation: u32,
    sup_norm: f64,
}

impl TryFrom<ProfileSpec> for DampingProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        DampingProfile::new(spec.dim, spec.kind, spec.dilation)
    }
}

impl From<DampingProfile> for ProfileSpec {
    fn from(p: DampingProfile) -> Self {
        ProfileSpec {
            dim: p.dim,
            kind: p.kind,
            dilation: p.dilation,
            sup_norm: Some(p.sup_norm),
        }
    }
}

impl DampingProfile {
    pub fn new(dim: usize, kind: ProfileKind, dilation: u32) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if dilation == 0 {
            return Err(invalid("dilation must be a positive integer"));
        }
        let sup_norm = validate_kind(dim, &kind)?;
        Ok(DampingProfile {
            dim,
            kind,
            dilation,
            sup_norm,
        })
    }

    pub fn constant(dim: usize, level: f64) -> Result<Self> {
        Self::new(dim, ProfileKind::Constant { level }, 1)
    }

    /// The conservative control `a ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0).expect("zero profile is valid")
    }

    pub fn cosine(dim: usize, mean: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            dim,
            ProfileKind::Cosine {
                mean,
                amplitude,
                wavevector: None,
            },
            1,
        )
    }

    pub fn smoothed_strip(dim: usize, level: f64, half_width: f64, ramp: f64) -> Result<Self> {
        Self::new(
            dim,
            ProfileKind::SmoothedStrip {
                level,
                half_width,
                ramp,
            },
            1,
        )
    }

    pub fn tabulated(dim: usize, modes: Vec<FourierMode>) -> Result<Self> {
        Self::new(dim, ProfileKind::TabulatedFourier { modes }, 1)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn dilation(&self) -> u32 {
        self.dilation
    }

    /// Upper bound for `sup |a|`, exact for every kind except tabulated
    /// series (where it is `Σ |â(n)|`).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// True when the profile vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    /// True when the profile depends on the first coordinate only.
    pub fn depends_on_first_axis_only(&self) -> bool {
        if self.dim == 1 {
            return true;
        }
        match &self.kind {
            ProfileKind::Constant { .. } | ProfileKind::SmoothedStrip { .. } => true,
            ProfileKind::Cosine { wavevector, .. } => wavevector
                .as_ref()
                .map_or(true, |k| k[1..].iter().all(|&c| c == 0)),
            ProfileKind::Mollified { base, .. } => base.depends_on_first_axis_only(),
            ProfileKind::TabulatedFourier { modes } => {
                modes.iter().all(|m| m.n[1..].iter().all(|&c| c == 0))
            }
        }
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        let mut s = match &self.kind {
            ProfileKind::Constant { level } => format!("constant({level})"),
            ProfileKind::Cosine {
                mean, amplitude, ..
            } => format!("cosine({mean},{amplitude})"),
            ProfileKind::SmoothedStrip {
                level,
                half_width,
                ramp,
            } => format!("strip({level},{half_width},{ramp})"),
            ProfileKind::Mollified { base, alpha, delta } => {
                format!("mollified({},{alpha},{delta})", base.describe())
            }
            ProfileKind::TabulatedFourier { modes } => format!("tabulated({} modes)", modes.len()),
        };
        if self.dilation != 1 {
            let _ = write!(s, "@{}", self.dilation);
        }
        write!(s, "/d{}", self.dim).ok();
        s
    }

    /// `a(x)` for any `x ∈ R^d` (periodic extension).
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let eta = self.dilation as f64;
        let mut y = [0.0; 2];
        for (yi, xi) in y.iter_mut().zip(x) {
            // dilate, then reduce to the unit cell
            let t = eta * xi;
            *yi = t - t.floor();
        }
        self.eval_cell(&y[..self.dim])
    }

    /// Evaluation of the undilated profile at a point of the unit cell.
    fn eval_cell(&self, y: &[f64]) -> f64 {
        match &self.kind {
            ProfileKind::Constant { level } => *level,
            ProfileKind::Cosine {
                mean,
                amplitude,
                wavevector,
            } => {
                let phase = match wavevector {
                    Some(k) => k.iter().zip(y).map(|(k, y)| *k as f64 * y).sum::<f64>(),
                    None => y[0],
                };
                (mean + amplitude * (2.0 * PI * phase).cos()).max(0.0)
            }
            ProfileKind::SmoothedStrip {
                level,
                half_width,
                ramp,
            } => smoothed_strip(y[0], *level, *half_width, *ramp),
            ProfileKind::Mollified { base, alpha, delta } => {
                let rule = mollifier_rule(self.dim);
                let cut = alpha / 4.0;
                let mut acc = 0.0;
                let mut z = [0.0; 2];
                for (off, w) in rule.offsets.iter().zip(&rule.weights) {
                    for i in 0..self.dim {
                        z[i] = y[i] - delta * off[i];
                    }
                    acc += w * (base.eval(&z[..self.dim]) - cut).max(0.0);
                }
                acc
            }
            ProfileKind::TabulatedFourier { modes } => {
                let mut acc = 0.0;
                for m in modes {
                    let phase: f64 = m.n.iter().zip(y).map(|(n, y)| *n as f64 * y).sum();
                    let (s, c) = (2.0 * PI * phase).sin_cos();
                    acc += m.re * c - m.im * s;
                }
                acc.max(0.0)
            }
        }
    }

    /// The rescaled profile `x ↦ a(η x)`.
    pub fn rescale(&self, eta: u32) -> Result<Self> {
        if eta == 0 {
            return Err(invalid("rescaling factor must be at least 1"));
        }
        let mut p = self.clone();
        p.dilation = self
            .dilation
            .checked_mul(eta)
            .ok_or_else(|| invalid("dilation overflow"))?;
        Ok(p)
    }

    /// Rescaling by a real factor; only integers keep the profile 1-periodic.
    pub fn rescale_real(&self, eta: f64) -> Result<Self> {
        if !(eta >= 1.0) || eta.fract() != 0.0 || eta > u32::MAX as f64 {
            return Err(invalid(format!(
                "rescaling factor {eta} must be an integer >= 1 for time-domain use"
            )));
        }
        self.rescale(eta as u32)
    }

    /// Samples on the `n^d` grid points `j/n` (row-major, first axis slowest).
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let len = n.pow(self.dim as u32);
        (0..len)
            .into_par_iter()
            .map(|idx| {
                let x = grid_point(idx, n, self.dim);
                self.eval(&x[..self.dim])
            })
            .collect()
    }
}

fn grid_point(idx: usize, n: usize, dim: usize) -> [f64; 2] {
    let h = 1.0 / n as f64;
    if dim == 1 {
        [idx as f64 * h, 0.0]
    } else {
        [(idx / n) as f64 * h, (idx % n) as f64 * h]
    }
}

fn validate_kind(dim: usize, kind: &ProfileKind) -> Result<f64> {
    let finite = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("{what} must be finite")))
        }
    };
    match kind {
        ProfileKind::Constant { level } => {
            finite(*level, "level")?;
            if *level < 0.0 {
                return Err(invalid("constant level must be non-negative"));
            }
            Ok(*level)
        }
        ProfileKind::Cosine {
            mean,
            amplitude,
            wavevector,
        } => {
            finite(*mean, "mean")?;
            finite(*amplitude, "amplitude")?;
            if *mean < amplitude.abs() {
                return Err(invalid("cosine profile must satisfy mean >= |amplitude|"));
            }
            if let Some(k) = wavevector {
                if k.len() != dim {
                    return Err(invalid("wavevector length must equal the dimension"));
                }
            }
            Ok(mean + amplitude.abs())
        }
        ProfileKind::SmoothedStrip {
            level,
            half_width,
            ramp,
        } => {
            finite(*level, "level")?;
            if *level < 0.0 {
                return Err(invalid("strip level must be non-negative"));
            }
            if !(*half_width > 0.0 && *half_width < 0.5) {
                return Err(invalid("strip half-width must lie in (0, 1/2)"));
            }
            if !(*ramp > 0.0) || half_width + 1.5 * ramp > 0.5 {
                return Err(invalid(
                    "strip ramp must be positive with half_width + 1.5 ramp <= 1/2",
                ));
            }
            Ok(*level)
        }
        ProfileKind::Mollified { base, alpha, delta } => {
            if base.dim != dim {
                return Err(invalid("mollified base has a different dimension"));
            }
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(invalid("mollifier alpha must be positive"));
            }
            if !(*delta > 0.0 && *delta < 0.25) {
                return Err(invalid("mollifier radius must lie in (0, 1/4)"));
            }
            Ok((base.sup_norm - alpha / 4.0).max(0.0))
        }
        ProfileKind::TabulatedFourier { modes } => {
            let mut total = 0.0;
            for m in modes {
                if m.n.len() != dim {
                    return Err(invalid("tabulated mode index has the wrong dimension"));
                }
                finite(m.re, "coefficient")?;
                finite(m.im, "coefficient")?;
                let partner = modes.iter().find(|o| {
                    o.n.iter().zip(&m.n).all(|(a, b)| *a == -*b)
                });
                let ok = match partner {
                    Some(o) => (o.re - m.re).abs() <= 1e-12 && (o.im + m.im).abs() <= 1e-12,
                    None => false,
                };
                if !ok {
                    return Err(invalid(format!(
                        "tabulated series is not Hermitian at n = {:?}",
                        m.n
                    )));
                }
                total += m.re.hypot(m.im);
            }
            // reject tables that dip below zero on a sampling grid
            let n: usize = 64;
            let len = n.pow(dim as u32);
            for idx in 0..len {
                let x = grid_point(idx, n, dim);
                let mut acc = 0.0;
                for m in modes {
                    let phase: f64 = m.n.iter().zip(&x).map(|(n, y)| *n as f64 * y).sum();
                    let (s, c) = (2.0 * PI * phase).sin_cos();
                    acc += m.re * c - m.im * s;
                }
                if acc < -1e-12 {
                    return Err(invalid("tabulated series takes negative values"));
                }
            }
            Ok(total)
        }
    }
}

/// Smoothed trapezoid: `level * (T * ρ_{r/2})(y)` with `T` the clamp ramp.
fn smoothed_strip(y: f64, level: f64, w: f64, r: f64) -> f64 {
    let y = y - y.round();
    let delta = 0.5 * r;
    let g = |t: f64| delta * kernel_ramp(t / delta);
    let v = g(y + w + r) - g(y + w) - g(y - w) + g(y - w - r);
    (level * v / r).clamp(0.0, level)
}

/// Fourier coefficients `â(n)` for `n ∈ [-N, N]^d`.
#[derive(Clone, Debug)]
pub struct FourierTable {
    dim: usize,
    cutoff: usize,
    values: Vec<Complex64>,
}

impl FourierTable {
    fn zeros(dim: usize, cutoff: usize) -> Self {
        let side = 2 * cutoff + 1;
        FourierTable {
            dim,
            cutoff,
            values: vec![Complex64::default(); side.pow(dim as u32)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn slot(&self, n: &[i64]) -> Option<usize> {
        let c = self.cutoff as i64;
        let side = 2 * self.cutoff + 1;
        let mut idx = 0;
        for &k in n {
            if k.abs() > c {
                return None;
            }
            idx = idx * side + (k + c) as usize;
        }
        Some(idx)
    }

    /// Coefficient at `n`; zero outside the table.
    pub fn get(&self, n: &[i64]) -> Complex64 {
        self.slot(n).map_or(Complex64::default(), |i| self.values[i])
    }

    fn set(&mut self, n: &[i64], z: Complex64) {
        if let Some(i) = self.slot(n) {
            self.values[i] = z;
        }
    }

    /// Entries `(n, â(n))` in lexicographic order of `n`.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<i64>, Complex64)> + '_ {
        let side = 2 * self.cutoff + 1;
        let c = self.cutoff as i64;
        self.values.iter().enumerate().map(move |(i, z)| {
            let n = if self.dim == 1 {
                vec![i as i64 - c]
            } else {
                vec![(i / side) as i64 - c, (i % side) as i64 - c]
            };
            (n, *z)
        })
    }

    /// Entries with `|â(n)| > threshold`.
    pub fn support(&self, threshold: f64) -> Vec<(Vec<i64>, Complex64)> {
        self.entries().filter(|(_, z)| z.norm() > threshold).collect()
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Per-axis sampling resolution for coefficients that are not known in
/// closed form.
const SAMPLES_LINE: usize = 4096;
const SAMPLES_PLANE: usize = 256;

/// Fourier coefficients of `p` on `[-N, N]^d`.
///
/// Constant, cosine and tabulated profiles are transformed exactly; the
/// other kinds are sampled (at least `4(2N+1)` points per axis) and
/// transformed with the FFT.
pub fn fourier_coefficients(p: &DampingProfile, cutoff: usize) -> Result<FourierTable> {
    if cutoff == 0 {
        return Err(invalid("Fourier cutoff must be at least 1"));
    }
    let eta = p.dilation as i64;
    let base_cutoff = cutoff / p.dilation as usize;
    let base = base_coefficients(p, base_cutoff.max(1))?;
    let mut table = FourierTable::zeros(p.dim, cutoff);
    for (n, z) in base.entries() {
        let dilated: Vec<i64> = n.iter().map(|k| k * eta).collect();
        table.set(&dilated, z);
    }
    Ok(table)
}

fn base_coefficients(p: &DampingProfile, cutoff: usize) -> Result<FourierTable> {
    let dim = p.dim;
    let mut table = FourierTable::zeros(dim, cutoff);
    let origin = vec![0i64; dim];
    match &p.kind {
        ProfileKind::Constant { level } => {
            table.set(&origin, Complex64::new(*level, 0.0));
        }
        ProfileKind::Cosine {
            mean,
            amplitude,
            wavevector,
        } => {
            table.set(&origin, Complex64::new(*mean, 0.0));
            let k = wavevector.clone().unwrap_or_else(|| {
                let mut e = vec![0; dim];
                e[0] = 1;
                e
            });
            if k.iter().all(|&c| c == 0) {
                table.set(&origin, Complex64::new(mean + amplitude, 0.0));
            } else {
                let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                table.set(&k, Complex64::new(0.5 * amplitude, 0.0));
                table.set(&neg, Complex64::new(0.5 * amplitude, 0.0));
            }
        }
        ProfileKind::TabulatedFourier { modes } => {
            for m in modes {
                let z = table.get(&m.n) + Complex64::new(m.re, m.im);
                table.set(&m.n, z);
            }
        }
        ProfileKind::SmoothedStrip { .. } | ProfileKind::Mollified { .. } => {
            let undilated = DampingProfile {
                dilation: 1,
                ..p.clone()
            };
            sampled_coefficients(&undilated, cutoff, &mut table);
        }
    }
    Ok(table)
}

fn sampled_coefficients(p: &DampingProfile, cutoff: usize, table: &mut FourierTable) {
    let minimum = (4 * (2 * cutoff + 1)).next_power_of_two();
    let c = cutoff as i64;
    if p.depends_on_first_axis_only() {
        let n = minimum.max(SAMPLES_LINE);
        let mut data: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut x = [0.0; 2];
                x[0] = j as f64 / n as f64;
                Complex64::new(p.eval(&x[..p.dim]), 0.0)
            })
            .collect();
        Spectral::new(1, n).forward(&mut data);
        for k in -c..=c {
            let mut idx = vec![0i64; p.dim];
            idx[0] = k;
            table.set(&idx, data[storage_index(k, n)]);
        }
    } else {
        let n = minimum.max(SAMPLES_PLANE);
        let mut data: Vec<Complex64> = p
            .sample_grid(n)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        Spectral::new(2, n).forward(&mut data);
        for k1 in -c..=c {
            for k2 in -c..=c {
                let z = data[storage_index(k1, n) * n + storage_index(k2, n)];
                table.set(&[k1, k2], z);
            }
        }
    }
}

/// Re-synthesizes the table on an `n^d` grid (used to check band-limited
/// reconstructions).
pub fn synthesize(table: &FourierTable, n: usize) -> Vec<f64> {
    let dim = table.dim;
    let mut data = vec![Complex64::default(); n.pow(dim as u32)];
    for (k, z) in table.entries() {
        if z == Complex64::default() {
            continue;
        }
        let slot = if dim == 1 {
            storage_index(k[0], n)
        } else {
            storage_index(k[0], n) * n + storage_index(k[1], n)
        };
        data[slot] += z;
    }
    Spectral::new(dim, n).inverse(&mut data);
    data.into_iter().map(|z| z.re).collect()
}

/// Midpoint-rule node count for a ray average over horizon `t`.
fn ray_nodes(t: f64, dilation: u32) -> usize {
    (64.0 * t * dilation as f64).ceil().max(512.0) as usize
}

/// `(1/T) ∫₀ᵀ a(x + 2tξ) dt` with `ξ` normalized to the unit sphere.
pub fn ray_average(p: &DampingProfile, horizon: f64, x: &[f64], xi: &[f64]) -> Result<f64> {
    if x.len() != p.dim || xi.len() != p.dim {
        return Err(invalid("point and direction must match the profile dimension"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("ray horizon must be positive"));
    }
    let norm = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return Err(invalid("ray direction must be nonzero"));
    }
    let mut dir = [0.0; 2];
    for (d, c) in dir.iter_mut().zip(xi) {
        *d = c / norm;
    }
    Ok(ray_average_unit(p, horizon, x, &dir[..p.dim]))
}

fn ray_average_unit(p: &DampingProfile, horizon: f64, x: &[f64], dir: &[f64]) -> f64 {
    let nq = ray_nodes(horizon, p.dilation);
    let dt = horizon / nq as f64;
    let mut acc = 0.0;
    let mut y = [0.0; 2];
    for j in 0..nq {
        let t = (j as f64 + 0.5) * dt;
        for i in 0..p.dim {
            y[i] = x[i] + 2.0 * t * dir[i];
        }
        acc += p.eval(&y[..p.dim]);
    }
    acc / nq as f64
}

/// Result of a discrete scan for `inf ⟨a⟩_T`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayAverageReport {
    pub horizon: f64,
    pub n_x: usize,
    pub n_xi: usize,
    pub alpha_hat: f64,
    pub argmin_x: Vec<f64>,
    pub argmin_xi: Vec<f64>,
}

impl RayAverageReport {
    pub fn csv_header(dim: usize) -> Vec<String> {
        let mut h = vec!["T".into(), "n_x".into(), "n_xi".into(), "alpha_hat".into()];
        h.extend((1..=dim).map(|i| format!("argmin_x{i}")));
        h.extend((1..=dim).map(|i| format!("argmin_xi{i}")));
        h
    }
}

/// Minimum of the ray average over `n_x^d` grid points and `n_ξ` directions
/// (`±1` in one dimension). An approximation from above of the infimum.
pub fn gcc_infimum(
    p: &DampingProfile,
    horizon: f64,
    n_x: usize,
    n_xi: usize,
) -> Result<RayAverageReport> {
    if n_x < 2 || n_xi < 2 {
        return Err(invalid("gcc scan needs n_x >= 2 and n_xi >= 2"));
    }
    if !(horizon > 0.0) {
        return Err(invalid("ray horizon must be positive"));
    }
    let dirs: Vec<[f64; 2]> = if p.dim == 1 {
        vec![[-1.0, 0.0], [1.0, 0.0]]
    } else {
        (0..n_xi)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / n_xi as f64;
                [th.cos(), th.sin()]
            })
            .collect()
    };
    let points = n_x.pow(p.dim as u32);
    let total = points * dirs.len();
    let (value, at) = (0..total)
        .into_par_iter()
        .map(|k| {
            let (ix, id) = (k / dirs.len(), k % dirs.len());
            let x = grid_point(ix, n_x, p.dim);
            let v = ray_average_unit(p, horizon, &x[..p.dim], &dirs[id][..p.dim]);
            (v, k)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let (ix, id) = (at / dirs.len(), at % dirs.len());
    let x = grid_point(ix, n_x, p.dim);
    Ok(RayAverageReport {
        horizon,
        n_x,
        n_xi: dirs.len(),
        alpha_hat: value,
        argmin_x: x[..p.dim].to_vec(),
        argmin_xi: dirs[id][..p.dim].to_vec(),
    })
}

/// Verification grid for the minorant property.
const MINORANT_GRID: usize = 256;

/// Smooth minorant `a_∞ = max(0, a - α/4) * ρ_δ`.
///
/// The kernel radius is halved (up to 30 times) until `a_∞ ≤ a` holds on a
/// `256^d` verification grid; the radius actually used is stored in the
/// returned profile. When `α/4 ≥ sup a` the cut-off vanishes and the zero
/// profile is returned.
pub fn mollify_profile(p: &DampingProfile, alpha: f64, delta: f64) -> Result<DampingProfile> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha must be positive"));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(invalid("mollifier radius must lie in (0, 1/4)"));
    }
    if alpha / 4.0 >= p.sup_norm {
        return Ok(DampingProfile::zero(p.dim));
    }
    let mut radius = delta;
    for _ in 0..30 {
        let candidate = DampingProfile::new(
            p.dim,
            ProfileKind::Mollified {
                base: Box::new(p.clone()),
                alpha,
                delta: radius,
            },
            1,
        )?;
        if minorant_report(p, &candidate, MINORANT_GRID).max_excess <= 1e-12 {
            return Ok(candidate);
        }
        radius *= 0.5;
    }
    Err(invalid(
        "no kernel radius keeps the mollified profile below the original",
    ))
}

/// Comparison of a profile with a candidate minorant on an `n^d` grid.
#[derive(Clone, Debug)]
pub struct MinorantReport {
    /// `max (a_∞ - a)`; non-positive for a true minorant.
    pub max_excess: f64,
    /// `max |a - a_∞|`.
    pub max_gap: f64,
    /// `min a_∞`.
    pub min_value: f64,
}

pub fn minorant_report(a: &DampingProfile, minorant: &DampingProfile, n: usize) -> MinorantReport {
    let dim = a.dim;
    let line = a.depends_on_first_axis_only() && minorant.depends_on_first_axis_only();
    let len = if line { n } else { n.pow(dim as u32) };
    let (excess, gap, min) = (0..len)
        .into_par_iter()
        .map(|idx| {
            let x = if line {
                [idx as f64 / n as f64, 0.0]
            } else {
                grid_point(idx, n, dim)
            };
            let (va, vm) = (a.eval(&x[..dim]), minorant.eval(&x[..dim]));
            (vm - va, (va - vm).abs(), vm)
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, f64::INFINITY),
            |l, r| (l.0.max(r.0), l.1.max(r.1), l.2.min(r.2)),
        );
    MinorantReport {
        max_excess: excess,
        max_gap: gap,
        min_value: min,
    }
}

/// Sampled modulus of continuity `sup_{|x-y| ≤ δ} |a(x) - a(y)|` on an
/// `n`-point grid per axis (offsets along the coordinate axes).
pub fn sampled_modulus(p: &DampingProfile, delta: f64, n: usize) -> f64 {
    let dim = p.dim;
    let steps = ((delta * n as f64).floor() as i64).max(1);
    let h = delta / steps as f64;
    let len = n.pow(dim as u32);
    (0..len)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(idx, n, dim);
            let base = p.eval(&x[..dim]);
            let mut worst: f64 = 0.0;
            for axis in 0..dim {
                for s in -steps..=steps {
                    let mut y = x;
                    y[axis] += s as f64 * h;
                    worst = worst.max((p.eval(&y[..dim]) - base).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strip2() -> DampingProfile {
        DampingProfile::smoothed_strip(2, 1.0, 0.25, 0.05).unwrap()
    }

    #[test]
    fn constant_and_cosine_values() {
        let c = DampingProfile::constant(1, 1.0).unwrap();
        assert_eq!(c.eval(&[0.123]), 1.0);
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        assert!(cos.eval(&[0.5]).abs() < 1e-15);
        assert!((cos.eval(&[0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(cos.sup_norm(), 2.0);
    }

    #[test]
    fn strip_vanishes_far_from_center() {
        // distance 0.5 > w + r + r/2
        assert_eq!(strip2().eval(&[0.5, 0.3]), 0.0);
        // direct ramp formula on the plateau and outside the smoothing zone
        assert!((strip2().eval(&[0.1, 0.7]) - 1.0).abs() < 1e-15);
        // inside the ramp, far from the kinks, smoothing of a linear function
        // by a symmetric kernel is the identity: 0.25 + 0.025 is the midpoint
        let mid = strip2().eval(&[0.275, 0.0]);
        assert!((mid - 0.5).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn strip_is_smooth_and_monotone_on_ramp() {
        let p = DampingProfile::smoothed_strip(1, 2.0, 0.2, 0.08).unwrap();
        let mut prev = p.eval(&[0.15]);
        for k in 1..400 {
            let x = 0.15 + k as f64 * 0.2 / 400.0;
            let v = p.eval(&[x]);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert_eq!(p.eval(&[0.35]), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DampingProfile::constant(1, -1.0).is_err());
        assert!(DampingProfile::cosine(1, 0.5, 1.0).is_err());
        assert!(DampingProfile::smoothed_strip(1, 1.0, 0.45, 0.1).is_err());
        assert!(DampingProfile::constant(3, 1.0).is_err());
        let bad = vec![FourierMode {
            n: vec![1],
            re: 0.5,
            im: 0.0,
        }];
        assert!(DampingProfile::tabulated(1, bad).is_err());
    }

    #[test]
    fn rescale_substitutes_argument() {
        let p = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let q = p.rescale(2).unwrap();
        for &x in &[0.0, 0.1, 0.33, 0.8] {
            let expect = 1.0 + (4.0 * PI * x).cos();
            assert!((q.eval(&[x]) - expect).abs() < 1e-13);
        }
        assert_eq!(p.rescale(1).unwrap(), p);
        let s = DampingProfile::smoothed_strip(1, 1.0, 0.25, 0.05).unwrap();
        let s4 = s.rescale(4).unwrap();
        assert!((s4.eval(&[0.1]) - s.eval(&[0.4])).abs() < 1e-15);
        assert_eq!(s4.sup_norm(), s.sup_norm());
        assert!(p.rescale_real(2.5).is_err());
        assert!(p.rescale_real(3.0).is_ok());
    }

    #[test]
    fn exact_coefficients() {
        let c = DampingProfile::constant(2, 0.7).unwrap();
        let t = fourier_coefficients(&c, 2).unwrap();
        assert_eq!(t.get(&[0, 0]), Complex64::new(0.7, 0.0));
        assert_eq!(t.support(0.0).len(), 1);
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let t = fourier_coefficients(&cos, 3).unwrap();
        assert_eq!(t.get(&[0]).re, 1.0);
        assert_eq!(t.get(&[1]).re, 0.5);
        assert_eq!(t.get(&[-1]).re, 0.5);
        assert_eq!(t.get(&[2]).norm(), 0.0);
        let cos2 = cos.rescale(2).unwrap();
        let t = fourier_coefficients(&cos2, 3).unwrap();
        assert_eq!(t.get(&[1]).norm(), 0.0);
        assert_eq!(t.get(&[2]).re, 0.5);
    }

    /// Closed-form coefficients of the smoothed strip: trapezoid transform
    /// times the kernel transform (the latter by independent quadrature).
    fn strip_coefficient_oracle(n: i64, level: f64, w: f64, r: f64) -> f64 {
        if n == 0 {
            return level * (2.0 * w + r);
        }
        let k = 2.0 * PI * n as f64;
        let trap = 2.0 * ((k * w).cos() - (k * (w + r)).cos()) / (r * k * k);
        let delta = 0.5 * r;
        // ∫ ρ(u) cos(k δ u) du by composite Simpson with 400k panels
        let m = 400_000;
        let h = 2.0 / m as f64;
        let f = |u: f64| crate::kernel::bump(u) * (k * delta * u).cos();
        let mut s = 0.0;
        let mut mass = 0.0;
        for i in 0..=m {
            let u = -1.0 + i as f64 * h;
            let c = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * f(u);
            mass += c * crate::kernel::bump(u);
        }
        level * trap * s / mass
    }

    #[test]
    fn strip_coefficients_match_quadrature_oracle() {
        let p = DampingProfile::smoothed_strip(1, 1.0, 0.25, 0.05).unwrap();
        let t = fourier_coefficients(&p, 12).unwrap();
        for n in -12i64..=12 {
            let z = t.get(&[n]);
            let expect = strip_coefficient_oracle(n.abs(), 1.0, 0.25, 0.05);
            assert!((z.re - expect).abs() < 1e-10, "n={n}: {} vs {expect}", z.re);
            assert!(z.im.abs() < 1e-12);
        }
        // d = 2 strip lives on the n₂ = 0 line
        let t2 = fourier_coefficients(&strip2(), 4).unwrap();
        assert!((t2.get(&[3, 0]).re - t.get(&[3]).re).abs() < 1e-13);
        assert_eq!(t2.get(&[1, 1]).norm(), 0.0);
    }

    #[test]
    fn band_limited_reconstruction() {
        let cos = DampingProfile::cosine(1, 1.0, 0.6).unwrap();
        let n = 4 * (2 * 3 + 1);
        let rec = synthesize(&fourier_coefficients(&cos, 3).unwrap(), n);
        for (v, s) in rec.iter().zip(cos.sample_grid(n)) {
            assert!((v - s).abs() < 1e-8);
        }
        let tab = DampingProfile::tabulated(
            2,
            vec![
                FourierMode { n: vec![0, 0], re: 1.0, im: 0.0 },
                FourierMode { n: vec![1, 2], re: 0.2, im: 0.1 },
                FourierMode { n: vec![-1, -2], re: 0.2, im: -0.1 },
            ],
        )
        .unwrap();
        let rec = synthesize(&fourier_coefficients(&tab, 2).unwrap(), 20);
        for (v, s) in rec.iter().zip(tab.sample_grid(20)) {
            assert!((v - s).abs() < 1e-8);
        }
    }

    #[test]
    fn ray_average_examples() {
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        for &x in &[0.0, 0.17, 0.5] {
            let v = ray_average(&cos, 1.0, &[x], &[1.0]).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
        let c = DampingProfile::constant(2, 0.3).unwrap();
        let v = ray_average(&c, 2.7, &[0.1, 0.9], &[3.0, 4.0]).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
        let v = ray_average(&strip2(), 5.0, &[0.5, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert!(ray_average(&c, 1.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gcc_scan_examples() {
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let r = gcc_infimum(&cos, 1.0, 64, 2).unwrap();
        assert!((r.alpha_hat - 1.0).abs() < 1e-8);
        let c = DampingProfile::constant(1, 0.4).unwrap();
        assert!((gcc_infimum(&c, 3.0, 16, 2).unwrap().alpha_hat - 0.4).abs() < 1e-14);
        for &t in &[0.5, 2.0] {
            let r = gcc_infimum(&strip2(), t, 16, 16).unwrap();
            assert!(r.alpha_hat.abs() < 1e-12);
            assert!(r.argmin_xi[0].abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_keeps_gcc_constant() {
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let base = gcc_infimum(&cos, 1.0, 64, 2).unwrap().alpha_hat;
        for eta in [1, 2, 4, 8] {
            let r = gcc_infimum(&cos.rescale(eta).unwrap(), 1.0, 64, 2).unwrap();
            assert!(r.alpha_hat >= 0.5 * base);
        }
    }

    #[test]
    fn mollify_constant_and_zero_cases() {
        let c = DampingProfile::constant(1, 1.0).unwrap();
        let m = mollify_profile(&c, 0.4, 0.05).unwrap();
        assert!((m.eval(&[0.3]) - 0.9).abs() < 1e-14);
        let z = mollify_profile(&c, 4.5, 0.05).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn mollify_small_kernel_limit() {
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let m = mollify_profile(&cos, 0.4, 1e-3).unwrap();
        for k in 0..100 {
            let x = k as f64 / 100.0;
            let expect = (cos.eval(&[x]) - 0.1).max(0.0);
            assert!((m.eval(&[x]) - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn mollified_is_a_minorant_with_bounded_gap() {
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let alpha = 0.4;
        let m = mollify_profile(&cos, alpha, 0.2).unwrap();
        let used = match m.kind() {
            ProfileKind::Mollified { delta, .. } => *delta,
            _ => unreachable!(),
        };
        assert!(used < 0.2);
        let rep = minorant_report(&cos, &m, 256);
        assert!(rep.max_excess <= 1e-10);
        assert!(rep.min_value >= 0.0);
        let modulus = sampled_modulus(&cos, used, 256);
        assert!(rep.max_gap <= alpha / 2.0 + modulus);
        let strip = strip2();
        let ms = mollify_profile(&strip, 0.4, 0.05).unwrap();
        let rep = minorant_report(&strip, &ms, 256);
        assert!(rep.max_excess <= 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let m = mollify_profile(&strip2(), 0.4, 0.02).unwrap();
        let text = m.to_json();
        let back = DampingProfile::from_json(&text).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "mollified");
        assert!(v["params"]["base"]["params"]["half_width"].is_number());
        assert!(DampingProfile::from_json(r#"{"dim":1,"kind":"constant","params":{"level":-2}}"#).is_err());
    }

    proptest! {
        #[test]
        fn periodicity(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, n0 in -3i64..=3, n1 in -3i64..=3) {
            let profiles = [
                DampingProfile::cosine(2, 1.0, 0.8).unwrap(),
                strip2(),
                strip2().rescale(3).unwrap(),
            ];
            for p in &profiles {
                let a = p.eval(&[x0, x1]);
                let b = p.eval(&[x0 + n0 as f64, x1 + n1 as f64]);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + p.sup_norm()));
                prop_assert!(a >= 0.0 && a <= p.sup_norm());
            }
        }

        #[test]
        fn ray_average_shift_invariance(x in 0.0f64..1.0, th in 0.0f64..6.28, n in -3i64..=3) {
            let p = strip2();
            let xi = [th.cos(), th.sin()];
            let a = ray_average(&p, 1.3, &[x, 0.2], &xi).unwrap();
            let b = ray_average(&p, 1.3, &[x + n as f64, 0.2 - n as f64], &xi).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
            prop_assert!(a >= 0.0 && a <= p.sup_norm());
        }
    }
}
