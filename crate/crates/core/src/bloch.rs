//! Bloch-fiber matrices of the quadratic pencil and their inverse norms.
//!
//! On the fiber with quasimomentum `σ` the pencil acts on Fourier modes
//! `n` as `scale·|2πn+σ|² + shift - i·coupling·â(n-n')`:
//!
//! * scalar form: `scale = η²`, `shift = m - τ²`, `coupling = τ`;
//! * semiclassical form: `scale = h²`, `shift = -1`, `coupling = εh`.
//!
//! Modes are truncated to `[-N, N]^d` after wrapping `σ` into `[-π, π]`.
//! The coupling graph of `â` splits the truncated matrix into independent
//! blocks; blocks whose Gershgorin-type lower bound cannot beat the
//! current minimum are skipped, which leaves the result unchanged.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::{fourier_coefficients, DampingProfile, FourierTable};
use crate::error::{invalid, Error, Result};
use crate::fields::FieldState;
use crate::linalg::{self, CMatrix};
use crate::spectral::Spectral;
use crate::table::Table;

const SINGULAR_THRESHOLD: f64 = 1e-14;
/// Coefficients below this fraction of `max |â|` do not couple modes.
const COUPLING_FLOOR: f64 = 1e-15;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Diagonal and coupling parameters of a fiber pencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PencilCoefficients {
    pub scale: f64,
    pub shift: f64,
    pub coupling: f64,
    /// Size of the spectral window the truncation must resolve.
    pub reach: f64,
}

impl PencilCoefficients {
    pub fn scalar(eta: f64, tau: f64, mass: f64) -> Result<Self> {
        if !(eta >= 1.0) || !eta.is_finite() {
            return Err(invalid("eta must be a real number >= 1"));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid("mass must be positive"));
        }
        if !tau.is_finite() {
            return Err(invalid("tau must be finite"));
        }
        Ok(PencilCoefficients {
            scale: eta * eta,
            shift: mass - tau * tau,
            coupling: tau,
            reach: tau * tau + mass,
        })
    }

    pub fn semiclassical(h: f64, eps: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) || !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid("h and eps must lie in (0, 1]"));
        }
        Ok(PencilCoefficients {
            scale: h * h,
            shift: -1.0,
            coupling: eps * h,
            reach: 1.0,
        })
    }

    /// Smallest `N ≥ 1` with `scale·(2π(N-1))² ≥ 4·reach`.
    pub fn cutoff(&self) -> usize {
        let k = (4.0 * self.reach / self.scale).sqrt() / (2.0 * PI);
        1 + k.ceil() as usize
    }

    pub fn truncation_ok(&self, cutoff: usize) -> bool {
        let k = 2.0 * PI * (cutoff as f64 - 1.0);
        self.scale * k * k >= 4.0 * self.reach
    }
}

/// Truncation policy: the rule above, optionally capped, or a fixed `N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CutoffRule {
    #[serde(default)]
    pub cap: Option<usize>,
    #[serde(default)]
    pub fixed: Option<usize>,
}

impl CutoffRule {
    pub fn resolve(&self, coeffs: &PencilCoefficients) -> usize {
        if let Some(n) = self.fixed {
            return n.max(1);
        }
        let n = coeffs.cutoff();
        self.cap.map_or(n, |c| n.min(c.max(1)))
    }
}

/// `σ` reduced to `[-π, π)`.
pub fn wrap_quasimomentum(s: f64) -> f64 {
    let w = (s + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn on_zone_boundary(s: f64) -> bool {
    (s.abs() - PI).abs() <= 1e-12
}

/// Truncated mode set `[-N, N]^d` and the coupling structure of a profile.
pub struct CouplingStructure {
    dim: usize,
    cutoff: usize,
    modes: Vec<[i64; 2]>,
    components: Vec<Vec<usize>>,
    table: FourierTable,
    /// `â(0)`
    mean: Complex64,
    /// `Σ_{k≠0} |â(k)|`, a bound for the off-diagonal part in any norm.
    offdiag_bound: f64,
}

impl CouplingStructure {
    pub fn new(profile: &DampingProfile, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(invalid("truncation N must be at least 1"));
        }
        let table = fourier_coefficients(profile, 2 * cutoff)?;
        Ok(Self::from_table(profile.dim(), cutoff, table))
    }

    /// Reuses a table computed with cutoff at least `2N`.
    pub fn from_table(dim: usize, cutoff: usize, table: FourierTable) -> Self {
        let c = cutoff as i64;
        let modes: Vec<[i64; 2]> = if dim == 1 {
            (-c..=c).map(|a| [a, 0]).collect()
        } else {
            (-c..=c).flat_map(|a| (-c..=c).map(move |b| [a, b])).collect()
        };
        let floor = COUPLING_FLOOR * table.max_abs();
        let support: Vec<[i64; 2]> = table
            .support(floor)
            .into_iter()
            .filter(|(k, _)| k.iter().any(|&x| x != 0) && k.iter().all(|x| x.abs() <= 2 * c))
            .map(|(k, _)| [k[0], if dim == 2 { k[1] } else { 0 }])
            .collect();
        let offdiag_bound = support
            .iter()
            .map(|k| table.get(&k[..dim]).norm())
            .sum::<f64>();
        let side = 2 * cutoff + 1;
        let index = |n: [i64; 2]| -> Option<usize> {
            if n[0].abs() > c || n[1].abs() > c {
                return None;
            }
            Some(if dim == 1 {
                (n[0] + c) as usize
            } else {
                (n[0] + c) as usize * side + (n[1] + c) as usize
            })
        };
        let mut parent: Vec<usize> = (0..modes.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (i, n) in modes.iter().enumerate() {
            for k in &support {
                if let Some(j) = index([n[0] + k[0], n[1] + k[1]]) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..modes.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut components: Vec<Vec<usize>> = groups.into_values().collect();
        components.sort_by_key(|c| c[0]);
        let mean = table.get(&vec![0; dim]);
        CouplingStructure {
            dim,
            cutoff,
            modes,
            components,
            table,
            mean,
            offdiag_bound,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dimension(&self) -> usize {
        self.modes.len()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    fn wavenumber_squared(&self, mode: usize, sigma: &[f64]) -> f64 {
        let n = self.modes[mode];
        (0..self.dim)
            .map(|i| {
                let k = 2.0 * PI * n[i] as f64 + sigma[i];
                k * k
            })
            .sum()
    }

    fn coefficient(&self, a: usize, b: usize) -> Complex64 {
        let (na, nb) = (self.modes[a], self.modes[b]);
        let k = [na[0] - nb[0], na[1] - nb[1]];
        self.table.get(&k[..self.dim])
    }

    /// Convolution matrix `â(n-n')` restricted to `idx`.
    fn convolution(&self, idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(idx.len(), idx.len(), |i, j| self.coefficient(idx[i], idx[j]))
    }

    fn block(&self, idx: &[usize], sigma: &[f64], pc: &PencilCoefficients) -> CMatrix {
        let mut m = self.convolution(idx) * (-I * pc.coupling);
        for (i, &mode) in idx.iter().enumerate() {
            m[(i, i)] += pc.scale * self.wavenumber_squared(mode, sigma) + pc.shift;
        }
        m
    }

    /// Full truncated matrix in mode order (small problems and tests).
    pub fn full_matrix(&self, sigma: &[f64], pc: &PencilCoefficients) -> CMatrix {
        let all: Vec<usize> = (0..self.modes.len()).collect();
        self.block(&all, sigma, pc)
    }

    /// `(1/‖P_σ^{-1}‖, singular?)` for one representative `σ` (already
    /// wrapped).
    fn fiber_min_singular(&self, sigma: &[f64], pc: &PencilCoefficients) -> Result<(f64, bool)> {
        let diag_mean = -I * pc.coupling * self.mean;
        let slack = pc.coupling.abs() * self.offdiag_bound;
        let mut order: Vec<(f64, usize)> = self
            .components
            .iter()
            .enumerate()
            .map(|(c, idx)| {
                let d = idx
                    .iter()
                    .map(|&m| (pc.scale * self.wavenumber_squared(m, sigma) + pc.shift + diag_mean).norm())
                    .fold(f64::INFINITY, f64::min);
                (d, c)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // max-norm of the whole fiber matrix
        let scale = (0..self.modes.len())
            .map(|m| (pc.scale * self.wavenumber_squared(m, sigma) + pc.shift + diag_mean).norm())
            .fold(0.0, f64::max)
            + pc.coupling.abs() * self.table.max_abs();
        let mut best = f64::INFINITY;
        for (d, c) in order {
            if d - slack >= best {
                break;
            }
            let m = self.block(&self.components[c], sigma, pc);
            best = best.min(linalg::min_singular_value(&m)?);
        }
        Ok((best, best < SINGULAR_THRESHOLD * scale))
    }

    /// Largest energy-weighted norm of the first-order resolvent block
    /// over all components (scalar form only).
    fn fiber_energy_norm(&self, sigma: &[f64], eta: f64, tau: f64, mass: f64) -> Result<f64> {
        let pc = PencilCoefficients::scalar(eta, tau, mass)?;
        let mut worst: f64 = 0.0;
        for idx in &self.components {
            let weights: Vec<f64> = idx
                .iter()
                .map(|&m| eta * eta * self.wavenumber_squared(m, sigma) + mass)
                .collect();
            let a = self.convolution(idx);
            let p = self.block(idx, sigma, &pc);
            let r = linalg::inverse(&p)
                .ok_or_else(|| Error::InSpectrum(format!("tau = {tau} at sigma = {sigma:?}")))?;
            let block = energy_block(&r, &a, tau);
            worst = worst.max(linalg::spectral_norm(&weight_block(&block, &weights)));
        }
        Ok(worst)
    }
}

/// `[[R(-A+iτ), -R], [1 + R(iτA+τ²), iτR]]`.
fn energy_block(r: &CMatrix, a: &CMatrix, tau: f64) -> CMatrix {
    let n = r.nrows();
    let id = CMatrix::identity(n, n);
    let itau = I * tau;
    let b11 = r * (-a + &id * itau);
    let b12 = -r;
    let b21 = &id + r * (a * itau + &id * Complex64::new(tau * tau, 0.0));
    let b22 = r * itau;
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&b11);
    out.view_mut((0, n), (n, n)).copy_from(&b12);
    out.view_mut((n, 0), (n, n)).copy_from(&b21);
    out.view_mut((n, n), (n, n)).copy_from(&b22);
    out
}

/// `W^{1/2} B W^{-1/2}` with `W = diag(w, 1)`.
fn weight_block(b: &CMatrix, w: &[f64]) -> CMatrix {
    let n = w.len();
    let scale = |i: usize| if i < n { w[i].sqrt() } else { 1.0 };
    CMatrix::from_fn(2 * n, 2 * n, |i, j| b[(i, j)] * (scale(i) / scale(j)))
}

/// A matrix of the pencil on one fiber.
#[derive(Clone, Debug)]
pub struct FiberPencil {
    pub eta: f64,
    pub tau: f64,
    pub sigma: Vec<f64>,
    pub cutoff: usize,
    pub mass: f64,
    pub matrix: CMatrix,
    /// False when `N` violates the truncation rule (reported, not fatal).
    pub truncation_ok: bool,
}

pub fn assemble_pencil(
    eta: f64,
    tau: f64,
    sigma: &[f64],
    cutoff: usize,
    profile: &DampingProfile,
    mass: f64,
) -> Result<FiberPencil> {
    if sigma.len() != profile.dim() {
        return Err(invalid("quasimomentum length must equal the dimension"));
    }
    let pc = PencilCoefficients::scalar(eta, tau, mass)?;
    let st = CouplingStructure::new(profile, cutoff)?;
    let wrapped: Vec<f64> = sigma.iter().map(|&s| wrap_quasimomentum(s)).collect();
    Ok(FiberPencil {
        eta,
        tau,
        sigma: sigma.to_vec(),
        cutoff,
        mass,
        matrix: st.full_matrix(&wrapped, &pc),
        truncation_ok: pc.truncation_ok(cutoff),
    })
}

/// Uniform `σ` grid on `[0, 2π)^d`.
pub fn sigma_grid(dim: usize, points_per_axis: usize) -> Vec<Vec<f64>> {
    let h = 2.0 * PI / points_per_axis as f64;
    if dim == 1 {
        (0..points_per_axis).map(|j| vec![j as f64 * h]).collect()
    } else {
        (0..points_per_axis)
            .flat_map(|a| (0..points_per_axis).map(move |b| vec![a as f64 * h, b as f64 * h]))
            .collect()
    }
}

/// Default `σ` sampling: 64 points in one dimension, 8×8 in two.
pub fn default_sigma_points(dim: usize) -> usize {
    if dim == 1 {
        64
    } else {
        8
    }
}

/// How the supremum over `σ` is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SigmaSampling {
    /// Points per axis of the uniform grid (default per dimension).
    #[serde(default)]
    pub points: Option<usize>,
    /// Local pattern-search refinement around the largest coarse values.
    #[serde(default = "yes")]
    pub refine: bool,
}

fn yes() -> bool {
    true
}

impl Default for SigmaSampling {
    fn default() -> Self {
        SigmaSampling {
            points: None,
            refine: true,
        }
    }
}

/// Resolvent data at one `(η, τ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventSample {
    pub eta: f64,
    pub tau: f64,
    /// `(σ, ‖P_σ^{-1}‖)` for the grid points and any refinement probes.
    pub per_sigma: Vec<(Vec<f64>, f64)>,
    /// Maximum over `per_sigma`.
    pub norm: f64,
    pub norm_energy: Option<f64>,
    pub cutoff: usize,
    pub truncation_ok: bool,
    /// Relative truncation diagnostic, see [`tail_diagnostic`].
    pub tail: f64,
    pub singular: bool,
}

/// Bound on the relative loss `1 - ‖P_{N'}^{-1}‖/‖P_N^{-1}‖` for any
/// `N' > N`: `(c‖a‖)²·norm / (scale(2πN-π)² + shift - c‖a‖)` (infinite if
/// the denominator is not positive).
pub fn tail_diagnostic(pc: &PencilCoefficients, sup_norm: f64, cutoff: usize, norm: f64) -> f64 {
    let k = 2.0 * PI * cutoff as f64 - PI;
    let c = pc.coupling.abs() * sup_norm;
    let gap = pc.scale * k * k + pc.shift - c;
    if gap <= 0.0 || !norm.is_finite() {
        f64::INFINITY
    } else {
        c * c * norm / gap
    }
}

/// Fiber evaluator: caches results by the reflection-reduced `σ`.
struct FiberEvaluator<'a> {
    structure: &'a CouplingStructure,
    pc: PencilCoefficients,
    cache: HashMap<Vec<u64>, (f64, bool)>,
}

impl<'a> FiberEvaluator<'a> {
    fn new(structure: &'a CouplingStructure, pc: PencilCoefficients) -> Self {
        FiberEvaluator {
            structure,
            pc,
            cache: HashMap::new(),
        }
    }

    /// `‖P_σ^{-1}‖` (∞ when singular). The norm is even in `σ`, and on the
    /// zone boundary both truncations `±π` are evaluated.
    fn norm(&mut self, sigma: &[f64]) -> Result<(f64, bool)> {
        let mut w: Vec<f64> = sigma.iter().map(|&s| wrap_quasimomentum(s)).collect();
        for s in w.iter_mut() {
            if on_zone_boundary(*s) {
                *s = PI;
            }
        }
        let neg: Vec<f64> = w.iter().map(|s| if *s == PI { PI } else { -s }).collect();
        let key_of = |v: &[f64]| v.iter().map(|s| s.to_bits()).collect::<Vec<u64>>();
        let canon = if neg.partial_cmp(&w) == Some(std::cmp::Ordering::Greater) {
            neg
        } else {
            w
        };
        let key = key_of(&canon);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let mut variants = vec![canon.clone()];
        for axis in 0..canon.len() {
            if canon[axis] == PI {
                let extra: Vec<Vec<f64>> = variants
                    .iter()
                    .map(|v| {
                        let mut v = v.clone();
                        v[axis] = -PI;
                        v
                    })
                    .collect();
                variants.extend(extra);
            }
        }
        let mut smin = f64::INFINITY;
        let mut singular = false;
        for v in &variants {
            let (s, flag) = self.structure.fiber_min_singular(v, &self.pc)?;
            smin = smin.min(s);
            singular |= flag;
        }
        let out = if singular || smin == 0.0 {
            (f64::INFINITY, true)
        } else {
            (1.0 / smin, false)
        };
        self.cache.insert(key, out);
        Ok(out)
    }
}

/// Norm of the inverse pencil maximized over a `σ` sample.
fn sup_over_sigma(
    structure: &CouplingStructure,
    pc: PencilCoefficients,
    grid: &[Vec<f64>],
    spacing: f64,
    refine: bool,
) -> Result<(Vec<(Vec<f64>, f64)>, bool)> {
    if grid.is_empty() {
        return Err(invalid("sigma grid must be non-empty"));
    }
    let mut eval = FiberEvaluator::new(structure, pc);
    let mut samples = Vec::with_capacity(grid.len());
    let mut singular = false;
    for s in grid {
        let (v, flag) = eval.norm(s)?;
        singular |= flag;
        samples.push((s.clone(), v));
    }
    if refine && !singular {
        let mut starts: Vec<(Vec<f64>, f64)> = samples.clone();
        starts.sort_by(|a, b| b.1.total_cmp(&a.1));
        starts.dedup_by(|a, b| a.1 == b.1);
        for (start, value) in starts.into_iter().take(3) {
            let probes = pattern_search(&mut eval, start, value, spacing)?;
            for (s, v, flag) in probes {
                singular |= flag;
                samples.push((s, v));
            }
        }
    }
    Ok((samples, singular))
}

/// Compass search maximizing the fiber norm; returns every probe.
fn pattern_search(
    eval: &mut FiberEvaluator<'_>,
    mut at: Vec<f64>,
    mut best: f64,
    spacing: f64,
) -> Result<Vec<(Vec<f64>, f64, bool)>> {
    let mut probes = Vec::new();
    let mut step = 0.5 * spacing;
    let mut budget = 80;
    while step > 1e-7 && budget > 0 {
        let mut moved = false;
        for axis in 0..at.len() {
            for dir in [-1.0, 1.0] {
                let mut cand = at.clone();
                cand[axis] += dir * step;
                let (v, flag) = eval.norm(&cand)?;
                budget -= 1;
                probes.push((cand.clone(), v, flag));
                if flag {
                    return Ok(probes);
                }
                if v > best {
                    best = v;
                    at = cand;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(probes)
}

fn collect_sample(
    eta: f64,
    tau: f64,
    pc: &PencilCoefficients,
    structure: &CouplingStructure,
    sup_norm: f64,
    per_sigma: Vec<(Vec<f64>, f64)>,
    singular: bool,
) -> ResolventSample {
    let norm = per_sigma.iter().map(|s| s.1).fold(0.0, f64::max);
    ResolventSample {
        eta,
        tau,
        norm: if singular { f64::INFINITY } else { norm },
        tail: tail_diagnostic(pc, sup_norm, structure.cutoff, norm),
        cutoff: structure.cutoff,
        truncation_ok: pc.truncation_ok(structure.cutoff),
        per_sigma,
        norm_energy: None,
        singular,
    }
}

/// Inverse norm of the scalar pencil, maximized over `σ_grid` (and local
/// refinements when `refine` is set).
pub fn resolvent_norm(
    eta: f64,
    tau: f64,
    sigma_grid: &[Vec<f64>],
    cutoff: usize,
    profile: &DampingProfile,
    mass: f64,
    refine: bool,
) -> Result<ResolventSample> {
    let pc = PencilCoefficients::scalar(eta, tau, mass)?;
    let structure = CouplingStructure::new(profile, cutoff)?;
    let spacing = grid_spacing(sigma_grid);
    let (per_sigma, singular) = sup_over_sigma(&structure, pc, sigma_grid, spacing, refine)?;
    Ok(collect_sample(eta, tau, &pc, &structure, profile.sup_norm(), per_sigma, singular))
}

fn grid_spacing(grid: &[Vec<f64>]) -> f64 {
    // per-axis count of a tensor grid
    let dim = grid.first().map_or(1, |s| s.len());
    let per_axis = (grid.len() as f64).powf(1.0 / dim as f64).round().max(1.0);
    2.0 * PI / per_axis
}

/// Energy-space norm of the first-order resolvent, maximized over `σ_grid`.
pub fn energy_resolvent_norm(
    eta: f64,
    tau: f64,
    sigma_grid: &[Vec<f64>],
    cutoff: usize,
    profile: &DampingProfile,
    mass: f64,
) -> Result<f64> {
    if sigma_grid.is_empty() {
        return Err(invalid("sigma grid must be non-empty"));
    }
    let structure = CouplingStructure::new(profile, cutoff)?;
    energy_norm_on(&structure, eta, tau, mass, sigma_grid)
}

fn energy_norm_on(
    structure: &CouplingStructure,
    eta: f64,
    tau: f64,
    mass: f64,
    sigma_grid: &[Vec<f64>],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in sigma_grid {
        let w: Vec<f64> = s.iter().map(|&x| wrap_quasimomentum(x)).collect();
        worst = worst.max(structure.fiber_energy_norm(&w, eta, tau, mass)?);
    }
    Ok(worst)
}

/// `max_σ ‖(h²|2πn+σ|² - 1 - iεh·â)^{-1}‖`.
pub fn semiclassical_inverse_norm(
    h: f64,
    eps: f64,
    sigma_grid: &[Vec<f64>],
    cutoff: usize,
    profile: &DampingProfile,
    refine: bool,
) -> Result<ResolventSample> {
    let pc = PencilCoefficients::semiclassical(h, eps)?;
    let structure = CouplingStructure::new(profile, cutoff)?;
    let spacing = grid_spacing(sigma_grid);
    let (per_sigma, singular) = sup_over_sigma(&structure, pc, sigma_grid, spacing, refine)?;
    Ok(collect_sample(1.0 / eps, 1.0 / (eps * h), &pc, &structure, profile.sup_norm(), per_sigma, singular))
}

/// `‖(-Δ+m-iτa_η-τ²)Θu - Θ(-η²Δ+m-iτa-τ²)u‖ / ‖u‖` on the grid of `u`,
/// with `Θu(x) = η^{d/2} u(ηx)` realized by index dilation.
pub fn theta_conjugation_residual(
    eta: u32,
    tau: f64,
    u: &FieldState,
    profile: &DampingProfile,
) -> Result<f64> {
    let grid = u.grid;
    let n = grid.points_per_axis();
    let dim = grid.dim();
    if profile.dim() != dim {
        return Err(invalid("profile and state dimensions differ"));
    }
    if eta == 0 {
        return Err(invalid("eta must be a positive integer"));
    }
    if u.sigma.iter().any(|&s| s != 0.0) {
        return Err(invalid("index dilation needs the periodic fiber sigma = 0"));
    }
    if n < 16 * eta as usize {
        return Err(Error::UnderResolved {
            points: n,
            what: format!("dilation by eta = {eta}"),
        });
    }
    let (uh, _) = u.coefficients();
    let limit = (n / (4 * eta as usize)) as i64;
    let floor = 1e-13 * uh.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut band = 0;
    for (idx, z) in uh.iter().enumerate() {
        if z.norm() > floor {
            let k = grid.mode(idx);
            band = k[..dim].iter().fold(band, |b, c| b.max(c.abs()));
        }
    }
    if band > limit {
        return Err(invalid(format!(
            "data not band-limited to |n| <= {limit} (found mode {band})"
        )));
    }
    let m = u.mass;
    let etaf = eta as f64;
    let factor = etaf.powf(dim as f64 / 2.0);
    let dilate = |f: &[Complex64]| -> Vec<Complex64> {
        (0..grid.len())
            .map(|idx| {
                let src = if dim == 1 {
                    (eta as usize * idx) % n
                } else {
                    let (i, j) = (idx / n, idx % n);
                    ((eta as usize * i) % n) * n + (eta as usize * j) % n
                };
                f[src] * factor
            })
            .collect()
    };
    let k2 = grid.wavenumbers_squared(&u.sigma);
    let mut sp = Spectral::new(dim, n);
    // project each frame onto its band: roundoff in the empty modes would
    // otherwise be amplified by the symbol
    let in_band = |k: i64| -> Vec<bool> {
        (0..grid.len())
            .map(|idx| grid.mode(idx)[..dim].iter().all(|c| c.abs() <= k))
            .collect()
    };
    let (coarse, fine) = (in_band(band), in_band(band * eta as i64));
    let mut neg_laplacian = |f: &[Complex64], keep: &[bool]| -> Vec<Complex64> {
        let mut g = f.to_vec();
        sp.forward(&mut g);
        for ((z, w), keep) in g.iter_mut().zip(&k2).zip(keep) {
            *z *= if *keep { *w } else { 0.0 };
        }
        sp.inverse(&mut g);
        g
    };
    let a = profile.sample_grid(n);
    let a_eta = profile.rescale(eta)?.sample_grid(n);
    let shift = Complex64::new(m - tau * tau, 0.0);

    let tu = dilate(&u.u);
    let lap_tu = neg_laplacian(&tu, &fine);
    let lhs: Vec<Complex64> = (0..grid.len())
        .map(|i| lap_tu[i] + shift * tu[i] - I * tau * a_eta[i] * tu[i])
        .collect();
    let lap_u = neg_laplacian(&u.u, &coarse);
    let inner: Vec<Complex64> = (0..grid.len())
        .map(|i| etaf * etaf * lap_u[i] + shift * u.u[i] - I * tau * a[i] * u.u[i])
        .collect();
    let rhs = dilate(&inner);
    let diff: f64 = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = u.u.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(invalid("state must be nonzero"));
    }
    Ok((diff / norm).sqrt())
}

/// Which inverse a scan computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    Scalar,
    Energy,
    Semiclassical,
}

impl ScanMode {
    pub fn label(&self) -> &'static str {
        match self {
            ScanMode::Scalar => "scalar",
            ScanMode::Energy => "energy",
            ScanMode::Semiclassical => "semiclassical",
        }
    }
}

/// A sweep over `(η, τ)`. In semiclassical mode each pair is read as
/// `h = η/τ`, `ε = 1/η`.
#[derive(Clone, Debug)]
pub struct ScanPlan {
    pub mode: ScanMode,
    pub etas: Vec<f64>,
    pub taus: Vec<f64>,
    pub sigma: SigmaSampling,
    pub cutoff: CutoffRule,
    pub profile: DampingProfile,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct ScanRow {
    pub mode: ScanMode,
    pub sample: ResolventSample,
    /// `⟨τ⟩·norm`, or `εh·norm` in semiclassical mode.
    pub tau_bracket_norm: f64,
    /// `⟨τ⟩·norm / (1+|τ|/η²)²`, or `εh·norm` in semiclassical mode.
    pub bound_ratio: f64,
}

pub fn bracket(tau: f64) -> f64 {
    (1.0 + tau * tau).sqrt()
}

/// Largest `τ₀` with `τ₀‖a‖ + τ₀² ≤ m/2`.
pub fn small_tau_threshold(sup_norm: f64, mass: f64) -> f64 {
    0.5 * ((sup_norm * sup_norm + 2.0 * mass).sqrt() - sup_norm)
}

fn plan_coefficients(plan: &ScanPlan, eta: f64, tau: f64) -> Result<PencilCoefficients> {
    match plan.mode {
        ScanMode::Scalar | ScanMode::Energy => PencilCoefficients::scalar(eta, tau, plan.mass),
        ScanMode::Semiclassical => {
            if !(tau > 0.0) {
                return Err(invalid("semiclassical scans need tau > 0"));
            }
            PencilCoefficients::semiclassical(eta / tau, 1.0 / eta)
        }
    }
}

/// Runs the plan; rows are ordered by `(η, τ)`.
pub fn scan(plan: &ScanPlan) -> Result<Vec<ScanRow>> {
    if plan.etas.is_empty() || plan.taus.is_empty() {
        return Err(invalid("scan needs non-empty eta and tau lists"));
    }
    let dim = plan.profile.dim();
    let points = plan.sigma.points.unwrap_or_else(|| default_sigma_points(dim));
    if points == 0 {
        return Err(invalid("sigma grid needs at least one point"));
    }
    let grid = sigma_grid(dim, points);
    let spacing = 2.0 * PI / points as f64;
    let mut pairs = Vec::new();
    for &eta in &plan.etas {
        for &tau in &plan.taus {
            let pc = plan_coefficients(plan, eta, tau)?;
            pairs.push((eta, tau, pc, plan.cutoff.resolve(&pc)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // one coefficient table at the largest truncation serves every row
    let largest = pairs.iter().map(|p| p.3).max().unwrap_or(1);
    let table = fourier_coefficients(&plan.profile, 2 * largest)?;
    let mut structures: HashMap<usize, CouplingStructure> = HashMap::new();
    for p in &pairs {
        structures
            .entry(p.3)
            .or_insert_with(|| CouplingStructure::from_table(dim, p.3, table.clone()));
    }
    let sup = plan.profile.sup_norm();
    pairs
        .par_iter()
        .map(|&(eta, tau, pc, n)| {
            let st = &structures[&n];
            let (per_sigma, singular) = sup_over_sigma(st, pc, &grid, spacing, plan.sigma.refine)?;
            let mut sample = collect_sample(eta, tau, &pc, st, sup, per_sigma, singular);
            if plan.mode == ScanMode::Energy && !singular {
                sample.norm_energy = Some(energy_norm_on(st, eta, tau, plan.mass, &grid)?);
            }
            let (tb, ratio) = match plan.mode {
                ScanMode::Semiclassical => {
                    let v = pc.coupling * sample.norm;
                    (v, v)
                }
                _ => {
                    let v = bracket(tau) * sample.norm;
                    let shape = 1.0 + tau.abs() / (eta * eta);
                    (v, v / (shape * shape))
                }
            };
            Ok(ScanRow {
                mode: plan.mode,
                sample,
                tau_bracket_norm: tb,
                bound_ratio: ratio,
            })
        })
        .collect()
}

pub fn scan_table(rows: &[ScanRow]) -> Table {
    let mut t = Table::new([
        "mode",
        "eta",
        "tau",
        "norm",
        "norm_energy",
        "tau_bracket_norm",
        "bound_ratio",
        "N",
        "singular_flag",
    ]);
    for r in rows {
        t.push(vec![
            r.mode.label().into(),
            r.sample.eta.into(),
            r.sample.tau.into(),
            r.sample.norm.into(),
            r.sample.norm_energy.unwrap_or(f64::NAN).into(),
            r.tau_bracket_norm.into(),
            r.bound_ratio.into(),
            r.sample.cutoff.into(),
            r.sample.singular.into(),
        ]);
    }
    t
}

/// Dense first-order operator `[[0, 1], [-W, -A]]` on one fiber, inverted
/// at `iτ` and measured in the weighted energy norm. Independent route to
/// [`energy_resolvent_norm`].
pub fn energy_norm_dense(
    eta: f64,
    tau: f64,
    sigma: &[f64],
    cutoff: usize,
    profile: &DampingProfile,
    mass: f64,
) -> Result<f64> {
    let st = CouplingStructure::new(profile, cutoff)?;
    let w: Vec<f64> = sigma.iter().map(|&s| wrap_quasimomentum(s)).collect();
    let n = st.dimension();
    let all: Vec<usize> = (0..n).collect();
    let a = st.convolution(&all);
    let weights: Vec<f64> = (0..n)
        .map(|m| eta * eta * st.wavenumber_squared(m, &w) + mass)
        .collect();
    let mut op = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        op[(i, n + i)] = Complex64::new(1.0, 0.0);
        op[(n + i, i)] = Complex64::new(-weights[i], 0.0);
        op[(i, i)] += I * tau;
        op[(n + i, n + i)] += I * tau;
    }
    op.view_mut((n, n), (n, n)).zip_apply(&a, |x, y| *x -= y);
    let inv = linalg::inverse(&op).ok_or_else(|| Error::InSpectrum(format!("tau = {tau}")))?;
    Ok(linalg::spectral_norm(&weight_block(&inv, &weights)))
}

/// Physical-space collocation of `P_σ` on `points` nodes (d = 1): the
/// periodic part `e^{-iσx}` is differentiated spectrally and `a` acts
/// pointwise. Independent route to the Fourier-side matrix.
pub fn collocation_min_singular(
    eta: f64,
    tau: f64,
    sigma: f64,
    points: usize,
    profile: &DampingProfile,
    mass: f64,
) -> Result<f64> {
    if profile.dim() != 1 {
        return Err(invalid("collocation oracle is one-dimensional"));
    }
    let n = points;
    let x: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let s = wrap_quasimomentum(sigma);
    // differentiation: F^{-1} diag(|2πk+σ|²) F with symmetric frequencies
    let freqs: Vec<f64> = (0..n)
        .map(|k| {
            let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            f
        })
        .collect();
    let mut m = CMatrix::zeros(n, n);
    for (i, xi) in x.iter().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            let mut acc = Complex64::default();
            for f in &freqs {
                let k = 2.0 * PI * f + s;
                acc += Complex64::from_polar(k * k, 2.0 * PI * f * (xi - xj));
            }
            m[(i, j)] = acc * (eta * eta / n as f64);
        }
        m[(i, i)] += Complex64::new(mass - tau * tau, 0.0) - I * tau * profile.eval(&[*xi]);
    }
    linalg::min_singular_value(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_state, StateKind, TorusGrid};
    use proptest::prelude::*;

    fn cosine() -> DampingProfile {
        DampingProfile::cosine(1, 1.0, 1.0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pencil_examples() {
        let zero = DampingProfile::zero(1);
        let p = assemble_pencil(1.0, 0.0, &[0.0], 1, &zero, 1.0).unwrap();
        let k = 4.0 * PI * PI + 1.0;
        let expect = [k, 1.0, k];
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert!((p.matrix[(i, j)] - c(e, 0.0)).norm() < 1e-12);
            }
        }
        let cst = DampingProfile::constant(1, 0.7).unwrap();
        let p = assemble_pencil(2.0, 3.0, &[0.5], 2, &cst, 1.0).unwrap();
        for i in 0..5 {
            let n = i as f64 - 2.0;
            let k = 2.0 * PI * n + 0.5;
            let d = c(4.0 * k * k + 1.0 - 9.0, -3.0 * 0.7);
            assert!((p.matrix[(i, i)] - d).norm() < 1e-10);
        }
        assert_eq!(p.matrix.iter().filter(|z| z.norm() > 0.0).count(), 5);
        let p = assemble_pencil(1.0, 2.0, &[0.0], 3, &cosine(), 1.0).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let z = p.matrix[(i, j)];
                match (i as i64 - j as i64).abs() {
                    0 => assert!((z.im + 2.0).abs() < 1e-14),
                    1 => assert!((z - c(0.0, -1.0)).norm() < 1e-14),
                    _ => assert_eq!(z.norm(), 0.0),
                }
            }
        }
    }

    #[test]
    fn truncation_rule() {
        let pc = PencilCoefficients::scalar(1.0, 10.0, 1.0).unwrap();
        let n = pc.cutoff();
        assert!(pc.truncation_ok(n));
        assert!(!pc.truncation_ok(n - 1));
    }

    #[test]
    fn reflection_identity_on_matrices() {
        let p = DampingProfile::smoothed_strip(1, 1.0, 0.2, 0.08).unwrap();
        let st = CouplingStructure::new(&p, 4).unwrap();
        let plus = PencilCoefficients::scalar(1.5, 2.5, 1.0).unwrap();
        let minus = PencilCoefficients::scalar(1.5, -2.5, 1.0).unwrap();
        let a = st.full_matrix(&[0.7], &minus);
        let b = st.full_matrix(&[-0.7], &plus);
        let n = a.nrows();
        for i in 0..n {
            for j in 0..n {
                assert!((a[(i, j)] - b[(n - 1 - i, n - 1 - j)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_closed_form() {
        let p = DampingProfile::constant(1, 1.0).unwrap();
        let grid = sigma_grid(1, 64);
        for eta in [1.0, 2.0, 4.0, 8.0] {
            let pc = PencilCoefficients::scalar(eta, 2.0, 1.0).unwrap();
            let r = resolvent_norm(eta, 2.0, &grid, pc.cutoff(), &p, 1.0, true).unwrap();
            assert!((r.norm - 0.5).abs() <= 0.01, "eta {eta}: {}", r.norm);
        }
    }

    #[test]
    fn zero_frequency_bound() {
        let grid = sigma_grid(1, 64);
        for p in [cosine(), DampingProfile::smoothed_strip(1, 2.0, 0.2, 0.08).unwrap()] {
            let r = resolvent_norm(1.0, 0.0, &grid, 4, &p, 1.0, false).unwrap();
            assert!((r.norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn undamped_resonance_is_flagged() {
        let zero = DampingProfile::zero(1);
        let tau = (1.0 + 4.0 * PI * PI).sqrt();
        let r = resolvent_norm(1.0, tau, &sigma_grid(1, 8), 4, &zero, 1.0, false).unwrap();
        assert!(r.singular);
        assert!(r.norm.is_infinite());
        let s = semiclassical_inverse_norm(1.0 / (2.0 * PI), 1.0, &sigma_grid(1, 8), 4, &zero, false).unwrap();
        assert!(s.singular);
    }

    #[test]
    fn semiclassical_constant_and_identity() {
        let p = DampingProfile::constant(1, 1.0).unwrap();
        let (h, eps) = (1.0 / 16.0, 0.5);
        let pc = PencilCoefficients::semiclassical(h, eps).unwrap();
        let r = semiclassical_inverse_norm(h, eps, &sigma_grid(1, 64), pc.cutoff(), &p, true).unwrap();
        assert!((eps * h * r.norm - 1.0).abs() <= 0.02);
        // h = ε = 1 pencil equals the scalar pencil at η = τ = 1 minus m
        let st = CouplingStructure::new(&cosine(), 5).unwrap();
        let semi = st.full_matrix(&[0.3], &PencilCoefficients::semiclassical(1.0, 1.0).unwrap());
        let mass = 1.7;
        let scalar = st.full_matrix(&[0.3], &PencilCoefficients::scalar(1.0, 1.0, mass).unwrap());
        let diff = scalar - CMatrix::identity(11, 11) * c(mass, 0.0) - semi;
        assert!(linalg::max_abs(&diff) < 1e-12);
    }

    #[test]
    fn energy_norm_matches_dense_oracle() {
        for (p, tau) in [
            (DampingProfile::constant(1, 1.0).unwrap(), 0.0),
            (cosine(), 2.3),
            (DampingProfile::smoothed_strip(1, 1.0, 0.2, 0.08).unwrap(), 5.0),
        ] {
            for s in [0.0, 1.1, PI] {
                let block = energy_resolvent_norm(1.5, tau, &[vec![s]], 4, &p, 1.0).unwrap();
                let dense = energy_norm_dense(1.5, tau, &[s], 4, &p, 1.0).unwrap();
                assert!((block - dense).abs() <= 1e-8 * dense, "{block} vs {dense}");
            }
        }
    }

    #[test]
    fn energy_norm_per_mode_reduction() {
        // a ≡ 0: each mode is the 2×2 block [[0,1],[-w,0]] + iτ
        let zero = DampingProfile::zero(1);
        let (eta, tau, mass, s) = (1.0, 3.0, 1.0, 0.4);
        let got = energy_resolvent_norm(eta, tau, &[vec![s]], 3, &zero, mass).unwrap();
        let mut expect: f64 = 0.0;
        for n in -3i64..=3 {
            let k = 2.0 * PI * n as f64 + s;
            let w = eta * eta * k * k + mass;
            // in the weighted frame the block is skew-adjoint with
            // eigenvalues ±i√w, so the inverse norm is 1/min|τ ± √w|
            let d = (tau - w.sqrt()).abs().min((tau + w.sqrt()).abs());
            expect = expect.max(1.0 / d);
        }
        assert!((got - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn collocation_oracle() {
        for (tau, s) in [(1.5, 0.3), (4.0, 2.0), (0.5, PI)] {
            for p in [cosine(), DampingProfile::tabulated(
                1,
                vec![
                    crate::damping::FourierMode { n: vec![0], re: 1.0, im: 0.0 },
                    crate::damping::FourierMode { n: vec![2], re: 0.3, im: 0.2 },
                    crate::damping::FourierMode { n: vec![-2], re: 0.3, im: -0.2 },
                ],
            ).unwrap()] {
                let n = 6;
                let st = CouplingStructure::new(&p, n).unwrap();
                let pc = PencilCoefficients::scalar(1.0, tau, 1.0).unwrap();
                let w = wrap_quasimomentum(s);
                let fourier = linalg::min_singular_value(&st.full_matrix(&[w], &pc)).unwrap();
                let coll = collocation_min_singular(1.0, tau, s, 8 * (2 * n + 1), &p, 1.0).unwrap();
                assert!((fourier - coll).abs() <= 1e-6 * fourier, "{fourier} vs {coll}");
            }
        }
    }

    #[test]
    fn theta_conjugation() {
        let g = TorusGrid::new(1, 64).unwrap();
        let st = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![1] }).unwrap();
        let r = theta_conjugation_residual(1, 2.0, &st, &cosine()).unwrap();
        assert_eq!(r, 0.0);
        let cst = DampingProfile::constant(1, 1.0).unwrap();
        assert!(theta_conjugation_residual(2, 2.0, &st, &cst).unwrap() <= 1e-12);
        let hi = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![10] }).unwrap();
        assert!(theta_conjugation_residual(2, 2.0, &hi, &cst).is_err());
    }

    #[test]
    fn monotone_truncation() {
        let p = DampingProfile::smoothed_strip(1, 1.0, 0.2, 0.08).unwrap();
        let grid = sigma_grid(1, 16);
        for tau in [1.0, 4.0, 9.0] {
            let pc = PencilCoefficients::scalar(1.0, tau, 1.0).unwrap();
            let n = pc.cutoff();
            let base = resolvent_norm(1.0, tau, &grid, n, &p, 1.0, false).unwrap();
            let more = resolvent_norm(1.0, tau, &grid, n + 4, &p, 1.0, false).unwrap();
            assert!(more.norm >= base.norm * (1.0 - base.tail), "tau {tau}");
        }
    }

    #[test]
    fn scan_rows_and_table() {
        let plan = ScanPlan {
            mode: ScanMode::Energy,
            etas: vec![2.0, 1.0],
            taus: vec![3.0, -3.0],
            sigma: SigmaSampling { points: Some(16), refine: false },
            cutoff: CutoffRule::default(),
            profile: cosine(),
            mass: 1.0,
        };
        let rows = scan(&plan).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].sample.eta, 1.0);
        assert_eq!(rows[0].sample.tau, -3.0);
        assert!((rows[0].sample.norm - rows[1].sample.norm).abs() <= 1e-9 * rows[1].sample.norm);
        assert!(rows[0].sample.norm_energy.is_some());
        let single = resolvent_norm(1.0, 3.0, &sigma_grid(1, 16), rows[1].sample.cutoff, &cosine(), 1.0, false).unwrap();
        assert_eq!(single.norm, rows[1].sample.norm);
        let t = scan_table(&rows);
        assert_eq!(t.header.len(), 9);
        assert_eq!(t.rows.len(), 4);
    }

    #[test]
    fn strip_decomposes_in_two_dimensions() {
        let p = DampingProfile::smoothed_strip(2, 1.0, 0.25, 0.05).unwrap();
        let st = CouplingStructure::new(&p, 3).unwrap();
        assert_eq!(st.components().len(), 7);
        assert!(st.components().iter().all(|c| c.len() == 7));
        // pruning leaves the value unchanged
        let pc = PencilCoefficients::scalar(1.0, 7.0, 1.0).unwrap();
        let (pruned, _) = st.fiber_min_singular(&[0.4, -1.0], &pc).unwrap();
        let full = linalg::min_singular_value(&st.full_matrix(&[0.4, -1.0], &pc)).unwrap();
        assert!((pruned - full).abs() <= 1e-12 * full);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn small_tau_bound(tau_frac in -1.0f64..1.0, eta in 1.0f64..8.0, which in 0usize..3) {
            let profiles = [
                cosine(),
                DampingProfile::smoothed_strip(1, 2.0, 0.2, 0.08).unwrap(),
                DampingProfile::constant(1, 0.5).unwrap(),
            ];
            let p = &profiles[which];
            let mass = 1.0;
            let tau = tau_frac * small_tau_threshold(p.sup_norm(), mass);
            let pc = PencilCoefficients::scalar(eta, tau, mass).unwrap();
            let r = resolvent_norm(eta, tau, &sigma_grid(1, 16), pc.cutoff(), p, mass, false).unwrap();
            prop_assert!(r.norm <= 2.0 / mass + 1e-6);
        }

        #[test]
        fn sigma_reflection(s in 0.0f64..6.283, tau in -6.0f64..6.0) {
            let p = DampingProfile::smoothed_strip(1, 1.0, 0.2, 0.08).unwrap();
            let st = CouplingStructure::new(&p, 5).unwrap();
            let pc = PencilCoefficients::scalar(1.0, tau, 1.0).unwrap();
            let w = wrap_quasimomentum(s);
            let a = linalg::min_singular_value(&st.full_matrix(&[w], &pc)).unwrap();
            let b = linalg::min_singular_value(&st.full_matrix(&[-w], &pc)).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
        }

        #[test]
        fn theta_residual_band_limited(seed in 0u64..200, tau in 0.0f64..5.0, eta in prop::sample::select(vec![2u32, 4])) {
            let n = 16 * eta as usize;
            let g = TorusGrid::new(1, n).unwrap();
            let band = (n / (4 * eta as usize)) as i64;
            // random trigonometric polynomial inside the band
            let mut st = make_state(g, &[0.0], 1.0, &StateKind::Random { seed }).unwrap();
            let (mut uh, _) = st.coefficients();
            for (i, z) in uh.iter_mut().enumerate() {
                if g.mode(i)[0].abs() > band {
                    *z = Complex64::default();
                }
            }
            let mut sp = Spectral::new(1, n);
            sp.inverse(&mut uh);
            st.u = uh;
            let r = theta_conjugation_residual(eta, tau, &st, &cosine()).unwrap();
            prop_assert!(r <= 1e-10, "{}", r);
        }
    }
}
