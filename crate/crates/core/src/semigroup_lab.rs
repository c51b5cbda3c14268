//! Finite-dimensional checks of semigroup decay estimates and of the
//! block-operator identities used in their proofs.
//!
//! A case is a dissipative matrix `G` with a perturbation `B` that is a
//! polynomial in `G` (so the two commute exactly). The block operator is
//! `𝒢 = [[G, B], [0, G]]`.

use nalgebra::Schur;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::table::Table;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Number of uniform `t` samples used for `M̂` and the decay fits.
const TIME_SAMPLES: usize = 1001;
/// Horizon for `M̂` when a case is built.
const M_HORIZON: f64 = 20.0;
const TAU_COARSE: usize = 401;
const TAU_LEVELS: usize = 3;

#[derive(Clone, Debug)]
pub struct SemigroupCase {
    pub kind: String,
    pub seed: u64,
    pub g: CMatrix,
    pub b: CMatrix,
    /// `max ‖e^{tG}‖` over `t ∈ [0, 20]`.
    pub m_hat: f64,
}

impl SemigroupCase {
    /// Case from an explicit generator with the default perturbation
    /// `B = 1 + G/‖G‖ + G²/‖G‖²`.
    pub fn from_matrix(kind: &str, seed: u64, g: CMatrix) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(invalid("generator must be a non-empty square matrix"));
        }
        let n = g.nrows();
        let norm = linalg::spectral_norm(&g);
        let b = if norm > 0.0 {
            let h = &g / c(norm);
            CMatrix::identity(n, n) + &h + &h * &h
        } else {
            CMatrix::identity(n, n)
        };
        Self::with_perturbation(kind, seed, g, b)
    }

    pub fn with_perturbation(kind: &str, seed: u64, g: CMatrix, b: CMatrix) -> Result<Self> {
        if b.shape() != g.shape() {
            return Err(invalid("perturbation shape differs from the generator"));
        }
        let m_hat = max_exp_norm(&g, M_HORIZON, 201);
        Ok(SemigroupCase {
            kind: kind.to_owned(),
            seed,
            g,
            b,
            m_hat,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `max_τ ‖(G+iτ)^{-1}B‖` on a uniform grid over `[-τ_max, τ_max]`.
    pub fn beta_hat(&self, tau_max: f64) -> Result<f64> {
        let mut best: f64 = 0.0;
        for tau in uniform(-tau_max, tau_max, TAU_COARSE) {
            let r = shifted_inverse(&self.g, I * tau)?;
            best = best.max(linalg::spectral_norm(&(r * &self.b)));
        }
        Ok(best)
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// `G = iH - C*C - gap·1` with Gaussian `H` (Hermitian) and `C`, entries
/// scaled by `1/√n`.
pub fn random_dissipative(n: usize, seed: u64, gap: f64) -> Result<SemigroupCase> {
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(gap >= 0.0) || !gap.is_finite() {
        return Err(invalid("spectral gap must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (n as f64).sqrt();
    let draw = |rng: &mut ChaCha8Rng| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * s
    };
    let raw = CMatrix::from_fn(n, n, |_, _| draw(&mut rng));
    let h = (&raw + raw.adjoint()) * c(0.5);
    let cm = CMatrix::from_fn(n, n, |_, _| draw(&mut rng));
    let g = h * I - cm.adjoint() * &cm - CMatrix::identity(n, n) * c(gap);
    SemigroupCase::from_matrix("random", seed, g)
}

/// Diagonal generator with the given eigenvalues.
pub fn diagonal_case(kind: &str, eigenvalues: &[Complex64]) -> Result<SemigroupCase> {
    let n = eigenvalues.len();
    let g = CMatrix::from_fn(n, n, |i, j| if i == j { eigenvalues[i] } else { c(0.0) });
    SemigroupCase::from_matrix(kind, 0, g)
}

/// `e^{tG}`.
pub fn exp_matrix(g: &CMatrix, t: f64) -> CMatrix {
    (g * c(t)).exp()
}

/// `max ‖e^{tG}‖` over `samples` uniform times in `[0, horizon]`.
fn max_exp_norm(g: &CMatrix, horizon: f64, samples: usize) -> f64 {
    exp_norm_series(g, horizon, samples)
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max)
}

/// `(t_k, ‖e^{t_k G}‖)` on a uniform grid; exponentials are advanced by
/// repeated multiplication and recomputed directly every 50 samples.
fn exp_norm_series(g: &CMatrix, horizon: f64, samples: usize) -> Vec<(f64, f64)> {
    let times = uniform(0.0, horizon, samples);
    let dt = if samples > 1 { times[1] - times[0] } else { 0.0 };
    let step = exp_matrix(g, dt);
    let mut e = CMatrix::identity(g.nrows(), g.nrows());
    let mut out = Vec::with_capacity(samples);
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            e = if k % 50 == 0 { exp_matrix(g, t) } else { &e * &step };
        }
        out.push((t, linalg::spectral_norm(&e)));
    }
    out
}

fn shifted_inverse(g: &CMatrix, shift: Complex64) -> Result<CMatrix> {
    let n = g.nrows();
    let m = g + CMatrix::identity(n, n) * shift;
    let scale = linalg::spectral_norm(g).max(shift.norm()).max(1.0);
    if linalg::min_singular_value(&m)? <= 1e-12 * scale {
        return Err(Error::InSpectrum(format!("{shift}")));
    }
    linalg::inverse(&m).ok_or_else(|| Error::InSpectrum(format!("{shift}")))
}

/// `𝒢 = [[G, B], [0, G]]`.
pub fn block_operator(case: &SemigroupCase) -> CMatrix {
    let n = case.dim();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&case.g);
    out.view_mut((0, n), (n, n)).copy_from(&case.b);
    out.view_mut((n, n), (n, n)).copy_from(&case.g);
    out
}

fn assemble(ul: &CMatrix, ur: &CMatrix, lr: &CMatrix) -> CMatrix {
    let n = ul.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(ul);
    out.view_mut((0, n), (n, n)).copy_from(ur);
    out.view_mut((n, n), (n, n)).copy_from(lr);
    out
}

/// Relative residuals of the block resolvent and block semigroup formulas
/// at `z` and `t`.
pub fn block_extension_checks(case: &SemigroupCase, z: Complex64, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t must be non-negative"));
    }
    let big = block_operator(case);
    let r = shifted_inverse(&case.g, -z)?;
    let r2b = &r * &r * &case.b;
    let formula = assemble(&r, &(-&r2b), &r);
    let direct = shifted_inverse(&big, -z)?;
    let scale1 = linalg::spectral_norm(&r).max(linalg::spectral_norm(&r2b));
    let res1 = linalg::spectral_norm(&(direct - formula)) / scale1;

    let e = exp_matrix(&case.g, t);
    let teb = &e * &case.b * c(t);
    let formula = assemble(&e, &teb, &e);
    let direct = exp_matrix(&big, t);
    let scale2 = linalg::spectral_norm(&e).max(linalg::spectral_norm(&teb));
    let res2 = if scale2 > 0.0 {
        linalg::spectral_norm(&(direct - formula)) / scale2
    } else {
        0.0
    };
    Ok((res1, res2))
}

/// Relative residual of
/// `(G+iτ)^{-1}(G+ν^{-1})^{-κ} = (G+iτ)^{-1}/(ν^{-1}-iτ)^κ
///   - Σ_{k=1}^{κ} (G+ν^{-1})^{-(κ+1-k)}/(ν^{-1}-iτ)^k`.
pub fn resolvent_chain_residual(case: &SemigroupCase, nu: f64, kappa: u32, tau: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid("nu must lie in (0, 1]"));
    }
    if kappa == 0 {
        return Err(invalid("kappa must be at least 1"));
    }
    let mu = 1.0 / nu;
    let res = shifted_inverse(&case.g, I * tau)?;
    let q = shifted_inverse(&case.g, c(mu))?;
    let n = case.dim();
    let mut q_pow = vec![CMatrix::identity(n, n)];
    for k in 1..=kappa as usize {
        q_pow.push(&q_pow[k - 1] * &q);
    }
    let lhs = &res * &q_pow[kappa as usize];
    let d = Complex64::new(mu, -tau);
    let first = &res / d.powu(kappa);
    let mut rhs = first.clone();
    for k in 1..=kappa {
        rhs -= &q_pow[(kappa + 1 - k) as usize] / d.powu(k);
    }
    let scale = linalg::spectral_norm(&lhs).max(linalg::spectral_norm(&first));
    Ok(linalg::spectral_norm(&(lhs - rhs)) / scale)
}

/// `ε‖(G - (ε - iτ))^{-1}‖ / M̂`.
pub fn m_over_eps_check(case: &SemigroupCase, eps: f64, tau: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid("eps must lie in (0, 1]"));
    }
    let r = shifted_inverse(&case.g, Complex64::new(-eps, tau))?;
    Ok(eps * linalg::spectral_norm(&r) / case.m_hat)
}

/// `max_τ f(τ)` over a uniform grid refined by bisection around local
/// maxima; a lower bound for the supremum.
fn adaptive_sup(tau_max: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let grid = uniform(-tau_max, tau_max, TAU_COARSE);
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let mut best = (values[0], grid[0]);
    for (v, t) in values.iter().zip(&grid) {
        if *v > best.0 {
            best = (*v, *t);
        }
    }
    let spacing = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    for i in 0..grid.len() {
        let left = i == 0 || values[i] >= values[i - 1];
        let right = i + 1 == grid.len() || values[i] >= values[i + 1];
        if !(left && right) || spacing == 0.0 {
            continue;
        }
        let (mut at, mut val) = (grid[i], values[i]);
        let mut h = spacing;
        for _ in 0..TAU_LEVELS {
            h *= 0.5;
            for cand in [at - h, at + h] {
                if cand.abs() > tau_max {
                    continue;
                }
                let v = f(cand)?;
                if v > val {
                    val = v;
                    at = cand;
                }
            }
        }
        if val > best.0 {
            best = (val, at);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct GearhartReport {
    pub c1: f64,
    pub c1_at: f64,
    pub m_hat: f64,
    pub gamma: f64,
    pub c: f64,
    /// `‖e^{tG}‖ ≤ C e^{-γt}(1 + 1e-6)` on every sampled `t`.
    pub envelope_ok: bool,
}

/// Resolvent bound on the imaginary axis and a fitted exponential envelope.
pub fn gearhart_experiment(case: &SemigroupCase, tau_max: f64, t_max: f64) -> Result<GearhartReport> {
    if !(tau_max > 0.0) || !(t_max > 0.0) {
        return Err(invalid("tau_max and t_max must be positive"));
    }
    let (c1, c1_at) = adaptive_sup(tau_max, |tau| {
        Ok(linalg::spectral_norm(&shifted_inverse(&case.g, I * tau)?))
    })?;
    let series = exp_norm_series(&case.g, t_max, TIME_SAMPLES);
    if series.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Fit("semigroup norm vanished or is not finite".into()));
    }
    let xs: Vec<f64> = series.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    let gamma = -slope;
    if !(gamma > 1e-12) {
        return Err(Error::Fit(format!(
            "semigroup norm does not decay (fitted rate {gamma:e})"
        )));
    }
    let cc = series
        .iter()
        .map(|(t, v)| v * (gamma * t).exp())
        .fold(0.0, f64::max);
    let envelope_ok = series
        .iter()
        .all(|(t, v)| *v <= cc * (-gamma * t).exp() * (1.0 + 1e-6));
    Ok(GearhartReport {
        c1,
        c1_at,
        m_hat: case.m_hat,
        gamma,
        c: cc,
        envelope_ok,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize)]
pub struct BorichevTomilovReport {
    pub kappa: u32,
    pub nu: f64,
    /// `max_τ ‖(G+iτ)^{-1}‖ / (1+ν|τ|)^κ`
    pub c1: f64,
    /// `max_t ⟨t⟩^{1/κ} ‖e^{tG}(1+νG)^{-1}‖`
    pub sup_stat: f64,
    pub sup_at: f64,
    pub m_hat: f64,
}

pub fn borichev_tomilov_experiment(
    case: &SemigroupCase,
    kappa: u32,
    nu: f64,
    tau_max: f64,
    t_max: f64,
) -> Result<BorichevTomilovReport> {
    if kappa == 0 || !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid("need kappa >= 1 and nu in (0, 1]"));
    }
    if !(tau_max > 0.0) || !(t_max > 0.0) {
        return Err(invalid("tau_max and t_max must be positive"));
    }
    let (c1, _) = adaptive_sup(tau_max, |tau| {
        let r = shifted_inverse(&case.g, I * tau)?;
        Ok(linalg::spectral_norm(&r) / (1.0 + nu * tau.abs()).powi(kappa as i32))
    })?;
    let n = case.dim();
    let smoothing = shifted_inverse(&(&case.g * c(nu)), c(1.0))?;
    let times = uniform(0.0, t_max, TIME_SAMPLES);
    let dt = times[1] - times[0];
    let step = exp_matrix(&case.g, dt);
    let mut e = CMatrix::identity(n, n);
    let (mut sup, mut sup_at) = (0.0, 0.0);
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            e = if k % 50 == 0 { exp_matrix(&case.g, t) } else { &e * &step };
        }
        let v = (1.0 + t * t).powf(0.5 / kappa as f64) * linalg::spectral_norm(&(&e * &smoothing));
        if v > sup {
            sup = v;
            sup_at = t;
        }
    }
    if !sup.is_finite() {
        return Err(Error::Fit("polynomial statistic is not finite".into()));
    }
    Ok(BorichevTomilovReport {
        kappa,
        nu,
        c1,
        sup_stat: sup,
        sup_at,
        m_hat: case.m_hat,
    })
}

/// Dissipativity diagnostics: `max Re⟨Gφ,φ⟩/(‖G‖‖φ‖²)` over seeded random
/// vectors and the spectral abscissa.
pub fn dissipativity(case: &SemigroupCase, samples: usize, seed: u64) -> (f64, f64) {
    let n = case.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = linalg::spectral_norm(&case.g).max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let phi = nalgebra::DVector::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let q = phi.dotc(&(&case.g * &phi)).re / (norm * phi.norm_squared());
        worst = worst.max(q);
    }
    // complex Schur form is triangular, so the eigenvalues always exist
    let eig = Schur::new(case.g.clone())
        .eigenvalues()
        .expect("complex Schur form is triangular");
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    (worst, abscissa)
}

/// One row of the lab report.
#[derive(Clone, Debug)]
pub struct LabRow {
    pub seed: u64,
    pub n: usize,
    pub kind: String,
    pub gearhart: Option<GearhartReport>,
    pub bt: BorichevTomilovReport,
}

pub fn lab_table(rows: &[LabRow]) -> Table {
    let mut t = Table::new([
        "seed", "n", "kind", "C1", "M", "gamma", "C", "kappa", "nu", "c1", "sup_stat",
    ]);
    for r in rows {
        let (c1, gamma, cc) = match &r.gearhart {
            Some(g) => (g.c1, g.gamma, g.c),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        t.push(vec![
            r.seed.into(),
            r.n.into(),
            r.kind.clone().into(),
            c1.into(),
            r.bt.m_hat.into(),
            gamma.into(),
            cc.into(),
            r.bt.kappa.into(),
            r.bt.nu.into(),
            r.bt.c1.into(),
            r.bt.sup_stat.into(),
        ]);
    }
    t
}
