//! Time integration of the damped system on the torus.
//!
//! The scheme is a Strang splitting whose substeps are both exact: the
//! damping half-step `v ← e^{-a dt/2} v` acts pointwise, the wave substep
//! rotates each Fourier mode with frequency `ω(n) = (|2πn+σ|² + m)^{1/2}`.
//! The energy therefore never increases, and the run keeps a trapezoid
//! ledger of the dissipation integral alongside it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{invalid, Error, Result};
use crate::fields::{energy_from_coefficients, FieldState, InputNorms};
use crate::spectral::Spectral;
use crate::table::Table;

/// Precomputed splitting step for a fixed `(grid, σ, m, a, dt)`.
pub struct Propagator {
    spectral: Spectral,
    omega2: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    damp_half: Vec<f64>,
    a_grid: Vec<f64>,
    dt: f64,
}

impl Propagator {
    /// `dt` may be negative (backward stepping) but not zero.
    pub fn new(state: &FieldState, a_grid: &[f64], dt: f64) -> Result<Self> {
        if a_grid.len() != state.grid.len() {
            return Err(invalid("damping samples do not match the grid"));
        }
        if a_grid.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(invalid("damping samples must be finite and non-negative"));
        }
        if dt == 0.0 || !dt.is_finite() {
            return Err(invalid("time step must be finite and nonzero"));
        }
        let omega2 = state.frequencies_squared();
        let (mut cos, mut sin) = (Vec::with_capacity(omega2.len()), Vec::with_capacity(omega2.len()));
        for w2 in &omega2 {
            let (s, c) = (w2.sqrt() * dt).sin_cos();
            cos.push(c);
            sin.push(s);
        }
        Ok(Propagator {
            spectral: state.grid.spectral(),
            omega2,
            cos,
            sin,
            damp_half: a_grid.iter().map(|a| (-0.5 * a * dt).exp()).collect(),
            a_grid: a_grid.to_vec(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step in place.
    pub fn step(&mut self, state: &mut FieldState) {
        for (v, f) in state.v.iter_mut().zip(&self.damp_half) {
            *v *= f;
        }
        self.spectral.forward(&mut state.u);
        self.spectral.forward(&mut state.v);
        for i in 0..state.u.len() {
            let w = self.omega2[i].sqrt();
            let (c, s) = (self.cos[i], self.sin[i]);
            let (a, b) = (state.u[i], state.v[i]);
            state.u[i] = a * c + b * (s / w);
            state.v[i] = -a * (w * s) + b * c;
        }
        self.spectral.inverse(&mut state.u);
        self.spectral.inverse(&mut state.v);
        for (v, f) in state.v.iter_mut().zip(&self.damp_half) {
            *v *= f;
        }
    }

    /// `⟨a v, v⟩` on the grid.
    pub fn damping_rate(&self, state: &FieldState) -> f64 {
        weighted_norm_sqr(&self.a_grid, &state.v)
    }

    /// Energy of `state` (uses the cached frequencies).
    pub fn energy(&mut self, state: &FieldState) -> f64 {
        let mut uh = state.u.clone();
        let mut vh = state.v.clone();
        self.spectral.forward(&mut uh);
        self.spectral.forward(&mut vh);
        energy_from_coefficients(&uh, &vh, &self.omega2)
    }
}

fn weighted_norm_sqr(a: &[f64], v: &[Complex64]) -> f64 {
    a.iter().zip(v).map(|(a, v)| a * v.norm_sqr()).sum::<f64>() / v.len() as f64
}

/// One Strang step of size `dt > 0`.
pub fn strang_step(state: &FieldState, dt: f64, a_grid: &[f64]) -> Result<FieldState> {
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let mut next = state.clone();
    Propagator::new(state, a_grid, dt)?.step(&mut next);
    Ok(next)
}

/// Sampled energy history of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRecord {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `D_k = 2∫₀^{t_k} ⟨a_η v, v⟩ dt`, accumulated by the trapezoid rule
    /// over every step.
    pub dissipation: Vec<f64>,
    pub eta: u32,
    pub input_norms: InputNorms,
    pub damping: String,
    pub dt: f64,
}

impl DecayRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "E", "D", "eta"]);
        for k in 0..self.len() {
            t.push(vec![
                self.times[k].into(),
                self.energies[k].into(),
                self.dissipation[k].into(),
                self.eta.into(),
            ]);
        }
        t
    }

    /// Sidecar metadata (everything except the series).
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "eta": self.eta,
            "dt": self.dt,
            "damping": self.damping,
            "samples": self.len(),
            "input_norms": self.input_norms,
        })
    }
}

/// Outcome of [`simulate`]: the record plus the final state.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub record: DecayRecord,
    pub final_state: FieldState,
}

pub const DEFAULT_STRIDE: usize = 10;

/// Default step `min(1e-2, 0.1/‖a_η‖_∞)`.
pub fn default_dt(profile: &DampingProfile) -> f64 {
    if profile.sup_norm() > 0.0 {
        (0.1 / profile.sup_norm()).min(1e-2)
    } else {
        1e-2
    }
}

/// Runs the damped system with damping `a(η x)` from `initial` to `t_end`.
///
/// The step is shrunk slightly so that an integer number of steps lands on
/// `t_end`; the last step is always sampled.
pub fn simulate(
    initial: &FieldState,
    profile: &DampingProfile,
    eta: u32,
    t_end: f64,
    dt: Option<f64>,
    stride: Option<usize>,
) -> Result<Simulation> {
    let grid = initial.grid;
    if profile.dim() != grid.dim() {
        return Err(invalid("profile and grid dimensions differ"));
    }
    if eta == 0 {
        return Err(invalid("eta must be a positive integer"));
    }
    if grid.points_per_axis() < 16 * eta as usize {
        return Err(Error::UnderResolved {
            points: grid.points_per_axis(),
            what: format!("damping rescaled by eta = {eta} (need at least {})", 16 * eta),
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("t_end must be positive"));
    }
    let scaled = profile.rescale(eta)?;
    let dt = dt.unwrap_or_else(|| default_dt(&scaled));
    if !(dt > 0.0) || dt > t_end {
        return Err(invalid("time step must lie in (0, t_end]"));
    }
    let stride = stride.unwrap_or(DEFAULT_STRIDE);
    if stride == 0 {
        return Err(invalid("sample stride must be positive"));
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;

    let a_grid = scaled.sample_grid(grid.points_per_axis());
    let mut prop = Propagator::new(initial, &a_grid, dt)?;
    let mut state = initial.clone();

    let mut record = DecayRecord {
        times: vec![0.0],
        energies: vec![prop.energy(&state)],
        dissipation: vec![0.0],
        eta,
        input_norms: initial.input_norms(),
        damping: scaled.describe(),
        dt,
    };
    let mut ledger = 0.0;
    let mut rate = prop.damping_rate(&state);
    for k in 1..=steps {
        prop.step(&mut state);
        let next = prop.damping_rate(&state);
        // trapezoid of 2⟨a v, v⟩
        ledger += dt * (rate + next);
        rate = next;
        if k % stride == 0 || k == steps {
            record.times.push(k as f64 * dt);
            record.energies.push(prop.energy(&state));
            record.dissipation.push(ledger);
        }
    }
    Ok(Simulation {
        record,
        final_state: state,
    })
}

/// `max_k |E_k - E_0 + D_k| / E_0`.
pub fn dissipation_residual(record: &DecayRecord) -> Result<f64> {
    if record.len() < 2 {
        return Err(invalid("record needs at least two samples"));
    }
    let e0 = record.energies[0];
    if !(e0 > 0.0) {
        return Err(invalid("initial energy must be positive"));
    }
    Ok(record
        .energies
        .iter()
        .zip(&record.dissipation)
        .map(|(e, d)| (e - e0 + d).abs())
        .fold(0.0, f64::max)
        / e0)
}

/// Closed-form `u(t)` of `u'' + a u' + m u = 0`, `u(0) = 1`, `u'(0) = 0`
/// in the underdamped regime `a² < 4m`.
pub fn damped_oscillator(t: f64, a: f64, m: f64) -> f64 {
    let omega = (m - 0.25 * a * a).sqrt();
    (-0.5 * a * t).exp() * ((omega * t).cos() + 0.5 * a / omega * (omega * t).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{energy, make_state, StateKind, TorusGrid};
    use proptest::prelude::*;

    fn constant_mode() -> FieldState {
        let g = TorusGrid::new(1, 16).unwrap();
        make_state(g, &[0.0], 1.0, &StateKind::SingleMode { k: vec![0] }).unwrap()
    }

    fn gaussian(n: usize) -> FieldState {
        let g = TorusGrid::new(1, n).unwrap();
        let kind = StateKind::Gaussian {
            center: vec![0.3],
            width: 0.1,
            momentum: None,
        };
        make_state(g, &[0.0], 1.0, &kind).unwrap()
    }

    /// Energy of the oscillator `u'' + u' + u = 0` from the closed form.
    fn oscillator_energy(t: f64) -> f64 {
        let h = 1e-5;
        let u = damped_oscillator(t, 1.0, 1.0);
        let du = (damped_oscillator(t + h, 1.0, 1.0) - damped_oscillator(t - h, 1.0, 1.0)) / (2.0 * h);
        u * u + du * du
    }

    #[test]
    fn undamped_step_preserves_energy() {
        let st = make_state(TorusGrid::new(1, 64).unwrap(), &[0.4], 1.0, &StateKind::Random { seed: 5 }).unwrap();
        let next = strang_step(&st, 0.05, &vec![0.0; 64]).unwrap();
        assert!((energy(&next) - energy(&st)).abs() <= 1e-13 * energy(&st));
    }

    #[test]
    fn damped_oscillator_oracle() {
        let p = DampingProfile::constant(1, 1.0).unwrap();
        let sim = simulate(&constant_mode(), &p, 1, 1.0, Some(1e-3), Some(100)).unwrap();
        let u = sim.final_state.u[5].re;
        assert!((u - damped_oscillator(1.0, 1.0, 1.0)).abs() <= 1e-5, "{u}");
        for (t, e) in sim.record.times.iter().zip(&sim.record.energies) {
            let expect = oscillator_energy(*t);
            assert!((e - expect).abs() <= 1e-4 * expect);
        }
        let r = dissipation_residual(&sim.record).unwrap();
        assert!(r <= 1e-5, "{r}");
    }

    #[test]
    fn conservative_run_keeps_energy() {
        let p = DampingProfile::zero(1);
        let sim = simulate(&gaussian(64), &p, 1, 5.0, None, None).unwrap();
        let e0 = sim.record.energies[0];
        assert!(sim.record.energies.iter().all(|e| (e - e0).abs() <= 1e-12 * e0));
        assert!(dissipation_residual(&sim.record).unwrap() <= 1e-12);
    }

    #[test]
    fn residual_is_second_order() {
        let p = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        let coarse = simulate(&gaussian(64), &p, 2, 2.0, Some(4e-3), Some(5)).unwrap();
        let fine = simulate(&gaussian(64), &p, 2, 2.0, Some(2e-3), Some(10)).unwrap();
        let ratio = dissipation_residual(&coarse.record).unwrap() / dissipation_residual(&fine.record).unwrap();
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn forward_backward_reversibility() {
        let st = make_state(TorusGrid::new(2, 16).unwrap(), &[0.0, 0.0], 2.0, &StateKind::Random { seed: 9 }).unwrap();
        let zero = vec![0.0; 256];
        let mut fwd = Propagator::new(&st, &zero, 0.013).unwrap();
        let mut bwd = Propagator::new(&st, &zero, -0.013).unwrap();
        let mut s = st.clone();
        for _ in 0..50 {
            fwd.step(&mut s);
        }
        for _ in 0..50 {
            bwd.step(&mut s);
        }
        let err: f64 = s.u.iter().zip(&st.u).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = st.u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-11 * scale);
    }

    #[test]
    fn rejects_under_resolved_grid() {
        let p = DampingProfile::cosine(1, 1.0, 1.0).unwrap();
        assert!(matches!(
            simulate(&gaussian(64), &p, 8, 1.0, None, None),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn record_table_layout() {
        let p = DampingProfile::constant(1, 1.0).unwrap();
        let sim = simulate(&constant_mode(), &p, 1, 0.1, Some(1e-2), Some(3)).unwrap();
        assert_eq!(sim.record.times.len(), 5);
        assert!((sim.record.times[4] - 0.1).abs() < 1e-15);
        let t = sim.record.to_table();
        assert_eq!(t.header, ["t", "E", "D", "eta"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn energy_monotone_and_ledger_nondecreasing(seed in 0u64..500, mean in 0.5f64..3.0, eta in 1u32..=2) {
            let st = make_state(TorusGrid::new(1, 32).unwrap(), &[0.0], 1.0, &StateKind::Random { seed }).unwrap();
            let p = DampingProfile::cosine(1, mean, 0.5 * mean).unwrap();
            let sim = simulate(&st, &p, eta, 2.0, Some(0.01), Some(1)).unwrap();
            let e0 = sim.record.energies[0];
            for w in sim.record.energies.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * e0);
            }
            for w in sim.record.dissipation.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert_eq!(sim.record.dissipation[0], 0.0);
        }
    }
}
