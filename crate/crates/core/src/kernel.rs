//! Compactly supported bump kernel and the quadrature rules built on it.
//!
//! The unit bump is `exp(-1/(1 - |s|^2))` on `|s| < 1`. Its cumulative
//! integrals are tabulated once on a fine cell grid and completed inside a
//! cell with an 8-point Gauss-Legendre rule, which is exact to roundoff for
//! cells this small.

use std::sync::OnceLock;

const TABLE_CELLS: usize = 2048;
const LOCAL_NODES: usize = 8;

/// Trapezoid resolution used to discretize the mollifier in one dimension.
pub(crate) const MOLLIFIER_NODES_1D: usize = 256;
/// Per-axis resolution of the masked product rule in two dimensions.
pub(crate) const MOLLIFIER_NODES_2D: usize = 48;

#[inline]
pub fn bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

struct BumpTables {
    mass: f64,
    cdf: Vec<f64>,
    moment: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn tables() -> &'static BumpTables {
    static TABLES: OnceLock<BumpTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(LOCAL_NODES);
        let h = 2.0 / TABLE_CELLS as f64;
        let mut cdf = Vec::with_capacity(TABLE_CELLS + 1);
        let mut moment = Vec::with_capacity(TABLE_CELLS + 1);
        let (mut f, mut m) = (0.0, 0.0);
        cdf.push(0.0);
        moment.push(0.0);
        for j in 0..TABLE_CELLS {
            let lo = -1.0 + j as f64 * h;
            let (df, dm) = cell_integrals(&nodes, &weights, lo, lo + h);
            f += df;
            m += dm;
            cdf.push(f);
            moment.push(m);
        }
        BumpTables {
            mass: f,
            cdf,
            moment,
            nodes,
            weights,
        }
    })
}

fn cell_integrals(nodes: &[f64], weights: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let (mut f, mut m) = (0.0, 0.0);
    for (x, w) in nodes.iter().zip(weights) {
        let s = mid + half * x;
        let b = bump(s);
        f += w * b;
        m += w * s * b;
    }
    (f * half, m * half)
}

/// Integral of the unnormalized unit bump over `[-1, 1]`.
#[cfg(test)]
pub fn bump_mass() -> f64 {
    tables().mass
}

/// Second antiderivative of the normalized unit kernel:
/// `g(s) = ∫_{-1}^{s} (s - u) ρ(u) du`, equal to 0 below -1 and to `s` above 1.
pub fn kernel_ramp(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return s;
    }
    let t = tables();
    let h = 2.0 / TABLE_CELLS as f64;
    let j = (((s + 1.0) / h).floor() as usize).min(TABLE_CELLS - 1);
    let lo = -1.0 + j as f64 * h;
    let (df, dm) = cell_integrals(&t.nodes, &t.weights, lo, s);
    let cdf = (t.cdf[j] + df) / t.mass;
    let moment = (t.moment[j] + dm) / t.mass;
    s * cdf - moment
}

/// Discrete mollifier on the unit ball: offsets and weights summing to one.
pub struct MollifierRule {
    pub offsets: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Unnormalized quadrature estimate of the kernel mass.
    #[cfg_attr(not(test), allow(dead_code))]
    pub raw_mass: f64,
}

pub fn mollifier_rule(dim: usize) -> &'static MollifierRule {
    static RULE_1D: OnceLock<MollifierRule> = OnceLock::new();
    static RULE_2D: OnceLock<MollifierRule> = OnceLock::new();
    match dim {
        1 => RULE_1D.get_or_init(|| build_rule(1, MOLLIFIER_NODES_1D)),
        _ => RULE_2D.get_or_init(|| build_rule(2, MOLLIFIER_NODES_2D)),
    }
}

fn build_rule(dim: usize, n: usize) -> MollifierRule {
    let h = 2.0 / (n + 1) as f64;
    let coord = |i: usize| -1.0 + (i + 1) as f64 * h;
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    if dim == 1 {
        for i in 0..n {
            let s = coord(i);
            let w = bump(s);
            if w > 0.0 {
                offsets.push([s, 0.0]);
                weights.push(w);
            }
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let (s1, s2) = (coord(i), coord(j));
                let w = bump((s1 * s1 + s2 * s2).sqrt());
                if w > 0.0 {
                    offsets.push([s1, s2]);
                    weights.push(w);
                }
            }
        }
    }
    let sum: f64 = weights.iter().sum();
    let cell = h.powi(dim as i32);
    for w in &mut weights {
        *w /= sum;
    }
    MollifierRule {
        offsets,
        weights,
        raw_mass: sum * cell,
    }
}
