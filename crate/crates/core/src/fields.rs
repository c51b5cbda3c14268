//! Grid states `U = (u, ∂ₜu)` on the unit torus and the spectral
//! functionals built on them.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{frequency, storage_index, Spectral};

/// Uniform grid on `[0,1)^d` with `n` points per axis (row-major, first
/// axis slowest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::UnderResolved {
                points: n,
                what: "grid size must be a power of two >= 16".into(),
            });
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        if self.dim == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
        }
    }

    /// Signed frequency of storage slot `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        if self.dim == 1 {
            [frequency(idx, self.n), 0]
        } else {
            [frequency(idx / self.n, self.n), frequency(idx % self.n, self.n)]
        }
    }

    /// Storage slot of the frequency `k`, if it lies in `[-n/2, n/2)^d`.
    pub fn slot(&self, k: &[i64]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k.iter().any(|&c| c < -half || c >= half) {
            return None;
        }
        Some(if self.dim == 1 {
            storage_index(k[0], self.n)
        } else {
            storage_index(k[0], self.n) * self.n + storage_index(k[1], self.n)
        })
    }

    pub(crate) fn spectral(&self) -> Spectral {
        Spectral::new(self.dim, self.n)
    }

    /// `|2πn + σ|²` for every storage slot.
    pub fn wavenumbers_squared(&self, sigma: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let n = self.mode(idx);
                (0..self.dim)
                    .map(|i| {
                        let k = 2.0 * PI * n[i] as f64 + sigma[i];
                        k * k
                    })
                    .sum()
            })
            .collect()
    }
}

/// Per-mode multiplier on the grid's frequency set.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMultiplier {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl SpectralMultiplier {
    pub fn at(&self, k: &[i64]) -> Option<f64> {
        self.grid.slot(k).map(|i| self.values[i])
    }
}

/// Symbol `-|2πn + σ|²` of the twisted Laplacian `Δ_σ`.
pub fn shifted_laplacian_symbol(grid: &TorusGrid, sigma: &[f64]) -> Result<SpectralMultiplier> {
    check_sigma(grid.dim, sigma)?;
    Ok(SpectralMultiplier {
        grid: *grid,
        values: grid.wavenumbers_squared(sigma).into_iter().map(|w| -w).collect(),
    })
}

fn check_sigma(dim: usize, sigma: &[f64]) -> Result<()> {
    if sigma.len() != dim {
        return Err(invalid("quasimomentum length must equal the dimension"));
    }
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(invalid("quasimomentum must be finite"));
    }
    Ok(())
}

/// Initial-data families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateKind {
    /// `u = e^{2πi k·x}`, `v = 0`.
    SingleMode { k: Vec<i64> },
    /// Periodized Gaussian `exp(-|x-c|²/(2 width²))` times `e^{2πi p·x}`.
    /// A nonzero momentum `p` gets the velocity of a forward-travelling
    /// packet (`v̂ = -iω û`); otherwise `v = 0`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        momentum: Option<Vec<i64>>,
    },
    /// Smooth random data from a seeded stream.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub grid: TorusGrid,
    pub sigma: Vec<f64>,
    pub mass: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl FieldState {
    pub fn zeros(grid: TorusGrid, sigma: Vec<f64>, mass: f64) -> Result<Self> {
        check_sigma(grid.dim, &sigma)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid("mass must be positive"));
        }
        let len = grid.len();
        Ok(FieldState {
            grid,
            sigma,
            mass,
            u: vec![Complex64::default(); len],
            v: vec![Complex64::default(); len],
        })
    }

    /// `ω(n)² = |2πn+σ|² + m` for every storage slot.
    pub fn frequencies_squared(&self) -> Vec<f64> {
        self.grid
            .wavenumbers_squared(&self.sigma)
            .into_iter()
            .map(|w| w + self.mass)
            .collect()
    }

    /// Copy with every Fourier mode outside `max_i |n_i| ≤ band` removed.
    pub fn band_limited(&self, band: i64) -> FieldState {
        let (mut uh, mut vh) = self.coefficients();
        for (idx, (a, b)) in uh.iter_mut().zip(vh.iter_mut()).enumerate() {
            let k = self.grid.mode(idx);
            if k[..self.grid.dim].iter().any(|c| c.abs() > band) {
                *a = Complex64::default();
                *b = Complex64::default();
            }
        }
        let mut sp = self.grid.spectral();
        sp.inverse(&mut uh);
        sp.inverse(&mut vh);
        FieldState {
            u: uh,
            v: vh,
            ..self.clone()
        }
    }

    /// Normalized Fourier coefficients of `u` and `v`.
    pub fn coefficients(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut sp = self.grid.spectral();
        let mut uh = self.u.clone();
        let mut vh = self.v.clone();
        sp.forward(&mut uh);
        sp.forward(&mut vh);
        (uh, vh)
    }

    pub fn input_norms(&self) -> InputNorms {
        let (uh, vh) = self.coefficients();
        let k2 = self.grid.wavenumbers_squared(&self.sigma);
        let mut n = [0.0; 4];
        for i in 0..uh.len() {
            let (a, b) = (uh[i].norm_sqr(), vh[i].norm_sqr());
            n[0] += (k2[i] + self.mass) * a;
            n[1] += b;
            n[2] += k2[i] * k2[i] * a;
            n[3] += k2[i] * b;
        }
        InputNorms {
            h1_u0: n[0].sqrt(),
            l2_u1: n[1].sqrt(),
            laplacian_u0: n[2].sqrt(),
            gradient_u1: n[3].sqrt(),
        }
    }
}

/// The four data norms entering the polynomial decay bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNorms {
    pub h1_u0: f64,
    pub l2_u1: f64,
    pub laplacian_u0: f64,
    pub gradient_u1: f64,
}

pub fn make_state(grid: TorusGrid, sigma: &[f64], mass: f64, kind: &StateKind) -> Result<FieldState> {
    let mut st = FieldState::zeros(grid, sigma.to_vec(), mass)?;
    let dim = grid.dim;
    let half = (grid.n / 2) as i64;
    match kind {
        StateKind::SingleMode { k } => {
            if k.len() != dim {
                return Err(invalid("mode index length must equal the dimension"));
            }
            if k.iter().any(|c| c.abs() >= half) {
                return Err(Error::UnderResolved {
                    points: grid.n,
                    what: format!("mode {k:?} not below the Nyquist index"),
                });
            }
            for idx in 0..grid.len() {
                let x = grid.point(idx);
                let phase: f64 = (0..dim).map(|i| k[i] as f64 * x[i]).sum();
                st.u[idx] = Complex64::from_polar(1.0, 2.0 * PI * phase);
            }
        }
        StateKind::Gaussian {
            center,
            width,
            momentum,
        } => {
            if center.len() != dim {
                return Err(invalid("gaussian center length must equal the dimension"));
            }
            if !(*width >= 4.0 * grid.spacing()) {
                return Err(Error::UnderResolved {
                    points: grid.n,
                    what: format!("gaussian width {width} below four grid spacings"),
                });
            }
            if *width > 0.25 {
                return Err(invalid("gaussian width must not exceed 1/4"));
            }
            let p = momentum.clone().unwrap_or_else(|| vec![0; dim]);
            if p.len() != dim {
                return Err(invalid("momentum length must equal the dimension"));
            }
            if p.iter().any(|c| 4 * c.abs() >= half) {
                return Err(Error::UnderResolved {
                    points: grid.n,
                    what: format!("momentum {p:?} too close to the Nyquist index"),
                });
            }
            let reach = (8.0 * width).ceil() as i64 + 1;
            for idx in 0..grid.len() {
                let x = grid.point(idx);
                let mut g = 0.0;
                for j0 in -reach..=reach {
                    let j1_range = if dim == 2 { -reach..=reach } else { 0..=0 };
                    for j1 in j1_range {
                        let j = [j0 as f64, j1 as f64];
                        let r2: f64 = (0..dim)
                            .map(|i| {
                                let d = x[i] - center[i] - j[i];
                                d * d
                            })
                            .sum();
                        g += (-r2 / (2.0 * width * width)).exp();
                    }
                }
                let phase: f64 = (0..dim).map(|i| p[i] as f64 * x[i]).sum();
                st.u[idx] = Complex64::from_polar(g, 2.0 * PI * phase);
            }
            if p.iter().any(|&c| c != 0) {
                let omega2 = st.frequencies_squared();
                let mut sp = grid.spectral();
                let mut vh = st.u.clone();
                sp.forward(&mut vh);
                for (z, w2) in vh.iter_mut().zip(&omega2) {
                    *z *= Complex64::new(0.0, -w2.sqrt());
                }
                sp.inverse(&mut vh);
                st.v = vh;
            }
        }
        StateKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let band = (grid.n / 4) as i64;
            let mut uh = vec![Complex64::default(); grid.len()];
            let mut vh = vec![Complex64::default(); grid.len()];
            // fixed enumeration order keeps the stream layout-independent
            let range = -band..=band;
            let modes: Vec<[i64; 2]> = if dim == 1 {
                range.map(|a| [a, 0]).collect()
            } else {
                range
                    .clone()
                    .flat_map(|a| (-band..=band).map(move |b| [a, b]))
                    .collect()
            };
            for k in modes {
                let kk = &k[..dim];
                let r2: f64 = kk.iter().map(|&c| (c * c) as f64).sum();
                let decay = 1.0 / (1.0 + r2).powi(2);
                let mut draw = || {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * decay
                };
                let (a, b) = (draw(), draw());
                if let Some(slot) = grid.slot(kk) {
                    uh[slot] = a;
                    vh[slot] = b;
                }
            }
            let mut sp = grid.spectral();
            sp.inverse(&mut uh);
            sp.inverse(&mut vh);
            st.u = uh;
            st.v = vh;
        }
    }
    Ok(st)
}

/// `E = Σ (|2πn+σ|² + m)|û(n)|² + Σ |v̂(n)|²`.
pub fn energy(state: &FieldState) -> f64 {
    let (uh, vh) = state.coefficients();
    energy_from_coefficients(&uh, &vh, &state.frequencies_squared())
}

pub(crate) fn energy_from_coefficients(uh: &[Complex64], vh: &[Complex64], omega2: &[f64]) -> f64 {
    uh.iter()
        .zip(vh)
        .zip(omega2)
        .map(|((a, b), w)| w * a.norm_sqr() + b.norm_sqr())
        .sum()
}

/// Discrete `L²` inner product `⟨f, g⟩ = N^{-d} Σ f conj(g)`.
pub fn inner(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let s: Complex64 = f.iter().zip(g).map(|(a, b)| a * b.conj()).sum();
    s / f.len() as f64
}

/// `|Re⟨𝒜U, U⟩ + ⟨a v, v⟩|` in the energy inner product, with
/// `𝒜U = (v, Δ_σ u - m u - a v)`.
pub fn dissipativity_residual(state: &FieldState, a_grid: &[f64]) -> Result<f64> {
    if a_grid.len() != state.grid.len() {
        return Err(invalid("damping samples do not match the grid"));
    }
    if a_grid.iter().any(|&a| !(a >= 0.0)) {
        return Err(invalid("damping samples must be non-negative"));
    }
    let mut sp = state.grid.spectral();
    let (uh, vh) = state.coefficients();
    let k2 = state.grid.wavenumbers_squared(&state.sigma);
    let m = state.mass;

    // H¹ part of ⟨𝒜U, U⟩: the first component of 𝒜U is v
    let h1: Complex64 = vh
        .iter()
        .zip(&uh)
        .zip(&k2)
        .map(|((b, a), w)| (w + m) * b * a.conj())
        .sum();

    // L² part: ⟨Δ_σ u - m u - a v, v⟩ assembled on the grid
    let mut lap: Vec<Complex64> = uh.iter().zip(&k2).map(|(a, w)| -w * a).collect();
    sp.inverse(&mut lap);
    let second: Vec<Complex64> = (0..lap.len())
        .map(|i| lap[i] - m * state.u[i] - a_grid[i] * state.v[i])
        .collect();
    let l2 = inner(&second, &state.v);

    let damping: f64 = state
        .v
        .iter()
        .zip(a_grid)
        .map(|(v, a)| a * v.norm_sqr())
        .sum::<f64>()
        / state.v.len() as f64;
    Ok((h1.re + l2.re + damping).abs())
}

#[derive(Serialize, Deserialize)]
struct SnapshotMeta {
    dim: usize,
    n: usize,
    sigma: Vec<f64>,
    mass: f64,
}

/// Writes `<stem>.json` (metadata) and `<stem>.csv` (columns
/// `u_re,u_im,v_re,v_im`, one row per grid point).
pub fn write_snapshot(state: &FieldState, dir: &Path, stem: &str) -> Result<()> {
    let meta = SnapshotMeta {
        dim: state.grid.dim,
        n: state.grid.n,
        sigma: state.sigma.clone(),
        mass: state.mass,
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(["u_re", "u_im", "v_re", "v_im"])?;
    for (u, v) in state.u.iter().zip(&state.v) {
        w.write_record([u.re, u.im, v.re, v.im].map(|x| format!("{x:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(dir: &Path, stem: &str) -> Result<FieldState> {
    let meta: SnapshotMeta =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let grid = TorusGrid::new(meta.dim, meta.n)?;
    let mut st = FieldState::zeros(grid, meta.sigma, meta.mass)?;
    let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    let mut count = 0;
    for (i, rec) in r.deserialize::<[f64; 4]>().enumerate() {
        let row = rec?;
        if i >= grid.len() {
            return Err(invalid("snapshot has too many rows"));
        }
        st.u[i] = Complex64::new(row[0], row[1]);
        st.v[i] = Complex64::new(row[2], row[3]);
        count += 1;
    }
    if count != grid.len() {
        return Err(invalid("snapshot has too few rows"));
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingProfile;
    use proptest::prelude::*;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(1, 8).is_err());
        assert!(TorusGrid::new(1, 48).is_err());
        assert!(TorusGrid::new(3, 16).is_err());
        assert_eq!(TorusGrid::new(2, 32).unwrap().len(), 1024);
    }

    #[test]
    fn band_projection() {
        let g = TorusGrid::new(2, 32).unwrap();
        let st = make_state(g, &[0.0, 0.0], 1.0, &StateKind::Random { seed: 5 }).unwrap();
        let low = st.band_limited(3);
        let (uh, vh) = low.coefficients();
        for idx in 0..g.len() {
            let k = g.mode(idx);
            if k[0].abs() > 3 || k[1].abs() > 3 {
                assert!(uh[idx].norm() < 1e-15 && vh[idx].norm() < 1e-15);
            }
        }
        assert!(energy(&low) < energy(&st));
        let again = low.band_limited(3);
        let d: f64 = again.u.iter().zip(&low.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-14);
    }

    #[test]
    fn symbol_values() {
        let g = grid1(16);
        let s = shifted_laplacian_symbol(&g, &[0.0]).unwrap();
        assert_eq!(s.at(&[0]), Some(0.0));
        assert!((s.at(&[1]).unwrap() + 4.0 * PI * PI).abs() < 1e-12);
        let g2 = TorusGrid::new(2, 16).unwrap();
        let s2 = shifted_laplacian_symbol(&g2, &[PI, 0.0]).unwrap();
        assert!((s2.at(&[0, 0]).unwrap() + PI * PI).abs() < 1e-12);
        // σ = 0 reduces to the plain periodic symbol
        let plain = shifted_laplacian_symbol(&g2, &[0.0, 0.0]).unwrap();
        for idx in 0..g2.len() {
            let k = g2.mode(idx);
            let expect = -4.0 * PI * PI * ((k[0] * k[0] + k[1] * k[1]) as f64);
            assert!((plain.values[idx] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn make_state_examples() {
        let g = grid1(32);
        let one = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![0] }).unwrap();
        assert!(one.u.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(one.v.iter().all(|z| *z == Complex64::default()));
        let gauss = StateKind::Gaussian {
            center: vec![0.5],
            width: 0.1,
            momentum: None,
        };
        assert!(make_state(g, &[0.0], 1.0, &gauss).is_err());
        let st = make_state(grid1(64), &[0.0], 1.0, &gauss).unwrap();
        assert!(st.u.iter().all(|z| z.re > 0.0 && z.im == 0.0));
        assert!(st.v.iter().all(|z| z.norm() == 0.0));
        let r1 = make_state(g, &[0.0], 1.0, &StateKind::Random { seed: 7 }).unwrap();
        let r2 = make_state(g, &[0.0], 1.0, &StateKind::Random { seed: 7 }).unwrap();
        assert_eq!(r1, r2);
        let narrow = StateKind::Gaussian {
            center: vec![0.5],
            width: 0.05,
            momentum: None,
        };
        assert!(make_state(grid1(64), &[0.0], 1.0, &narrow).is_err());
        assert!(make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![16] }).is_err());
    }

    #[test]
    fn energy_examples() {
        let g = grid1(32);
        let one = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![0] }).unwrap();
        assert!((energy(&one) - 1.0).abs() < 1e-14);
        let mode = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![1] }).unwrap();
        let e = energy(&mode);
        assert!((e - (4.0 * PI * PI + 1.0)).abs() < 1e-11);
        // physical-space quadrature of |u'|² + |u|² with u' = 2πi u
        let quad: f64 = mode
            .u
            .iter()
            .map(|z| (2.0 * PI * z).norm_sqr() + z.norm_sqr())
            .sum::<f64>()
            / 32.0;
        assert!((e - quad).abs() < 1e-11);
        let mut vel = FieldState::zeros(g, vec![0.0], 1.0).unwrap();
        vel.v.fill(Complex64::new(1.0, 0.0));
        assert!((energy(&vel) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dissipativity_examples() {
        let g = grid1(64);
        let st = make_state(g, &[0.0], 1.0, &StateKind::Random { seed: 3 }).unwrap();
        let e = energy(&st);
        assert!(dissipativity_residual(&st, &vec![0.0; 64]).unwrap() <= 1e-12 * e);
        let mut single = make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![2] }).unwrap();
        single.v = single.u.iter().map(|z| z * Complex64::new(0.3, -1.2)).collect();
        let e = energy(&single);
        assert!(dissipativity_residual(&single, &vec![0.7; 64]).unwrap() <= 1e-12 * e);
        let cos = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let a = cos.sample_grid(64);
        let e = energy(&st);
        assert!(dissipativity_residual(&st, &a).unwrap() <= 1e-10 * e);
        assert!(dissipativity_residual(&st, &vec![-1.0; 64]).is_err());
    }

    #[test]
    fn travelling_packet_has_matched_velocity() {
        let g = TorusGrid::new(2, 64).unwrap();
        let kind = StateKind::Gaussian {
            center: vec![0.5, 0.5],
            width: 0.1,
            momentum: Some(vec![0, 3]),
        };
        let st = make_state(g, &[0.0, 0.0], 1.0, &kind).unwrap();
        let (uh, vh) = st.coefficients();
        let w2 = st.frequencies_squared();
        let pot: f64 = uh.iter().zip(&w2).map(|(a, w)| w * a.norm_sqr()).sum();
        let kin: f64 = vh.iter().map(|b| b.norm_sqr()).sum();
        assert!((pot - kin).abs() < 1e-10 * pot);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 16).unwrap();
        let st = make_state(g, &[0.5, 1.0], 2.0, &StateKind::Random { seed: 1 }).unwrap();
        write_snapshot(&st, dir.path(), "state").unwrap();
        let back = read_snapshot(dir.path(), "state").unwrap();
        assert_eq!(back, st);
    }

    proptest! {
        #[test]
        fn parseval_consistency(seed in 0u64..1000) {
            let g = TorusGrid::new(2, 16).unwrap();
            let st = make_state(g, &[0.3, 1.1], 1.0, &StateKind::Random { seed }).unwrap();
            let (uh, _) = st.coefficients();
            let phys: f64 = st.u.iter().map(|z| z.norm_sqr()).sum::<f64>() / g.len() as f64;
            let spec: f64 = uh.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((phys - spec).abs() <= 1e-12 * phys);
            prop_assert!(energy(&st) >= st.mass * spec);
        }

        #[test]
        fn random_cosine_dissipativity(seed in 0u64..1000, s in 0.0f64..6.28) {
            let g = TorusGrid::new(1, 64).unwrap();
            let st = make_state(g, &[s], 1.5, &StateKind::Random { seed }).unwrap();
            let a = DampingProfile::cosine(1, 1.0, 1.0).unwrap().rescale(2).unwrap().sample_grid(64);
            let e = energy(&st);
            prop_assert!(dissipativity_residual(&st, &a).unwrap() <= 1e-10 * e);
        }
    }
}
