//! Deterministic noise-averaged dynamics: the truncated Wiener-Hermite
//! hierarchy over bosonic levels `n = 0..=N_max` and its `n = 0` closure
//! with decoherence rate `Gamma = D^2 / gamma`.
//!
//! Both pipelines work on the Bloch-type variables
//! `p = rho11 - rho22`, `q = 2 Re rho12`, `r = 2 Im rho12`, `s = rho11 + rho22`.
//! Probabilities are `(s - p) / 2s` forward and `(s + p) / 2s` backward.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::WindowPolicy;
use crate::model::{
    EdgeBasis, ModelError, NoiseParams, SweepDirection, SystemParams, TimeGrid, RESCALE_HIGH, RESCALE_LOW,
};

pub const DEFAULT_N_MAX: usize = 12;
pub const N_MAX_CAP: usize = 40;
pub const TRUNCATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite hierarchy state at t = {t} (alpha = {alpha}, delta = {delta})")]
    NonFinite { t: f64, alpha: f64, delta: f64 },
    #[error("population s(0) = {0} is not positive at the end of the sweep")]
    DegeneratePopulation(f64),
    #[error(
        "truncation did not converge: N_max = {n_max} and {} differ by {difference:.3e} (> {TRUNCATION_TOLERANCE:e})",
        n_max + 2
    )]
    TruncationNotConverged { n_max: usize, difference: f64 },
    #[error("decoherence rate must be finite and >= 0, got {0}")]
    InvalidDecoherence(f64),
}

/// Bosonic-level arrays `p(n), q(n), r(n), s(n)`, stored as one buffer
/// `[p_0..p_N, q_0..q_N, r_0..r_N, s_0..s_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    n_max: usize,
    data: Vec<f64>,
    /// Natural log of the factor divided out by rescaling.
    pub log_scale: f64,
}

impl HierarchyState {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            n_max,
            data: vec![0.0; 4 * (n_max + 1)],
            log_scale: 0.0,
        }
    }

    /// Vacuum for `n >= 1`; the `n = 0` level holds `(p, q, r, s)`.
    pub fn with_ground(n_max: usize, ground: [f64; 4]) -> Self {
        let mut hs = Self::zeros(n_max);
        hs.set_level(0, ground);
        hs
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn p(&self) -> &[f64] {
        &self.data[..self.levels()]
    }

    pub fn q(&self) -> &[f64] {
        let l = self.levels();
        &self.data[l..2 * l]
    }

    pub fn r(&self) -> &[f64] {
        let l = self.levels();
        &self.data[2 * l..3 * l]
    }

    pub fn s(&self) -> &[f64] {
        let l = self.levels();
        &self.data[3 * l..]
    }

    pub fn level(&self, n: usize) -> [f64; 4] {
        let l = self.levels();
        [self.data[n], self.data[l + n], self.data[2 * l + n], self.data[3 * l + n]]
    }

    pub fn set_level(&mut self, n: usize, v: [f64; 4]) {
        let l = self.levels();
        for (k, x) in v.into_iter().enumerate() {
            self.data[k * l + n] = x;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Right-hand side of the truncated hierarchy; levels outside
/// `0..=N_max` are zero.
pub fn hierarchy_rhs(hs: &HierarchyState, t: f64, p: &SystemParams, np: &NoiseParams, out: &mut HierarchyState) {
    assert_eq!(hs.n_max, out.n_max, "hierarchy size mismatch");
    let sqrt: Vec<f64> = (0..=hs.levels()).map(|n| (n as f64).sqrt()).collect();
    rhs_flat(&hs.data, hs.levels(), t, p, np, &sqrt, &mut out.data);
}

fn rhs_flat(y: &[f64], l: usize, t: f64, sp: &SystemParams, np: &NoiseParams, sqrt: &[f64], dy: &mut [f64]) {
    let (p, rest) = y.split_at(l);
    let (q, rest) = rest.split_at(l);
    let (r, s) = rest.split_at(l);
    let (dp, rest) = dy.split_at_mut(l);
    let (dq, rest) = rest.split_at_mut(l);
    let (dr, ds) = rest.split_at_mut(l);
    let (v, d, gamma, amp) = (sp.v, sp.delta, np.gamma, np.amplitude);
    let x = sp.alpha * t;
    for n in 0..l {
        let damp = n as f64 * gamma;
        let up = |a: &[f64]| if n + 1 < l { sqrt[n + 1] * a[n + 1] } else { 0.0 };
        let down = |a: &[f64]| if n > 0 { sqrt[n] * a[n - 1] } else { 0.0 };
        dp[n] = -damp * p[n] + 0.5 * v * (2.0 - d) * r[n];
        dq[n] = -damp * q[n] - x * r[n] - amp * (up(r) + down(r));
        dr[n] = -damp * r[n] + x * q[n] + 0.5 * v * d * s[n] + 0.5 * v * (d - 2.0) * p[n] + amp * (up(q) + down(q));
        ds[n] = -damp * s[n] + 0.5 * v * d * r[n];
    }
}

/// Scratch space for classical RK4 on a flat real vector.
struct Rk4Scratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, y: &mut [f64], t: f64, dt: f64, mut f: impl FnMut(&[f64], f64, &mut [f64])) {
        let h2 = 0.5 * dt;
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        f(y, t, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * h2;
        }
        f(tmp, t + h2, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * h2;
        }
        f(tmp, t + h2, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * dt;
        }
        f(tmp, t + dt, k4);
        let sixth = dt / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
        }
    }
}

/// Divides the whole (linear, homogeneous) state by `s(0)` when it leaves
/// the rescaling band; returns `ln s(0)` or 0.
fn rescale_by_ground(y: &mut [f64], s_index: usize) -> f64 {
    let s0 = y[s_index];
    if (RESCALE_LOW..=RESCALE_HIGH).contains(&s0.abs()) || s0 == 0.0 || !s0.is_finite() {
        return 0.0;
    }
    let inv = 1.0 / s0.abs();
    y.iter_mut().for_each(|x| *x *= inv);
    s0.abs().ln()
}

/// `n = 0` initial values `(p, q, r, s)` of a pure state `e e^T` with
/// real `e`.
fn pure_ground(e: (f64, f64)) -> [f64; 4] {
    let (a, b) = e;
    [a * a - b * b, 2.0 * a * b, 0.0, a * a + b * b]
}

fn edge_vector(basis: &EdgeBasis, dir: SweepDirection) -> (f64, f64) {
    let s = basis.initial_state(dir);
    (s.a.re, s.b.re)
}

/// Populations `(p, s)` of the `n = 0` level expressed in `basis`.
fn project_ground(basis: &EdgeBasis, g: [f64; 4]) -> (f64, f64) {
    let [p, q, r, s] = g;
    let (aa, bb) = basis.project_density(0.5 * (s + p), 0.5 * (s - p), Complex64::new(0.5 * q, 0.5 * r));
    (aa - bb, aa + bb)
}

fn functional(p: f64, s: f64, dir: SweepDirection) -> Result<f64, HierarchyError> {
    if !(s > 0.0) || !s.is_finite() || !p.is_finite() {
        return Err(HierarchyError::DegeneratePopulation(s));
    }
    Ok(match dir {
        SweepDirection::Forward => (s - p) / (2.0 * s),
        SweepDirection::Backward => (s + p) / (2.0 * s),
    })
}

fn edge_basis(sp: &SystemParams, t: f64) -> EdgeBasis {
    EdgeBasis::at(sp, t, 0.0).unwrap_or(EdgeBasis::DIABATIC)
}

/// Probability from the hierarchy truncated at `n_max`, integrated on
/// `grid` from the edge eigenvector and read out in the edge eigenbasis.
pub fn evolve_hierarchy_fixed(
    sp: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    n_max: usize,
) -> Result<f64, HierarchyError> {
    let dir = sp.direction()?;
    let start = edge_vector(&edge_basis(sp, grid.t_start), dir);
    let mut hs = HierarchyState::with_ground(n_max, pure_ground(start));
    let l = hs.levels();
    let sqrt: Vec<f64> = (0..=l).map(|n| (n as f64).sqrt()).collect();
    let mut scratch = Rk4Scratch::new(hs.data.len());
    for k in 0..grid.steps() {
        let t = grid.time(k);
        scratch.step(&mut hs.data, t, grid.dt, |y, t, dy| rhs_flat(y, l, t, sp, np, &sqrt, dy));
        let s0 = hs.data[3 * l];
        if !s0.is_finite() || !hs.data[0].is_finite() {
            return Err(HierarchyError::NonFinite {
                t: t + grid.dt,
                alpha: sp.alpha,
                delta: sp.delta,
            });
        }
        hs.log_scale += rescale_by_ground(&mut hs.data, 3 * l);
    }
    let (p, s) = project_ground(&edge_basis(sp, grid.t_end), hs.level(0));
    functional(p, s, dir)
}

/// Hierarchy result with the truncation level actually used.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HierarchyOutcome {
    pub probability: f64,
    /// Truncation level of the reported probability.
    pub n_max: usize,
    /// `|P(n_max) - P(n_max - 2)|`; zero for noiseless runs.
    pub truncation_difference: f64,
}

/// Escalates the truncation from `n_max` in steps of 2 until consecutive
/// results agree to [`TRUNCATION_TOLERANCE`], up to [`N_MAX_CAP`].
pub fn evolve_hierarchy(
    sp: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    n_max: usize,
) -> Result<HierarchyOutcome, HierarchyError> {
    if np.is_silent() {
        // Levels decouple; only n = 0 is ever populated.
        return Ok(HierarchyOutcome {
            probability: evolve_hierarchy_fixed(sp, np, grid, 0)?,
            n_max: 0,
            truncation_difference: 0.0,
        });
    }
    let mut n = n_max;
    let mut prev = evolve_hierarchy_fixed(sp, np, grid, n)?;
    loop {
        let next = evolve_hierarchy_fixed(sp, np, grid, n + 2)?;
        let difference = (next - prev).abs();
        if difference <= TRUNCATION_TOLERANCE {
            return Ok(HierarchyOutcome {
                probability: next,
                n_max: n + 2,
                truncation_difference: difference,
            });
        }
        if n + 2 >= N_MAX_CAP {
            log::warn!("hierarchy truncation not converged at N_max = {}", n + 2);
            return Err(HierarchyError::TruncationNotConverged { n_max: n, difference });
        }
        n += 2;
        prev = next;
    }
}

/// `n = 0` closure: `(p, q, r, s)` with damping `-Gamma q`, `-Gamma r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceState {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub gamma_rate: f64,
}

impl SubspaceState {
    fn as_array(&self) -> [f64; 4] {
        [self.p, self.q, self.r, self.s]
    }
}

/// Time derivative of the `n = 0` closure.
pub fn subspace_rhs(st: &SubspaceState, t: f64, sp: &SystemParams) -> [f64; 4] {
    let mut out = [0.0; 4];
    subspace_flat(&st.as_array(), t, sp, st.gamma_rate, &mut out);
    out
}

#[inline]
fn subspace_flat(y: &[f64], t: f64, sp: &SystemParams, gamma_rate: f64, dy: &mut [f64]) {
    let (v, d, x) = (sp.v, sp.delta, sp.alpha * t);
    let [p, q, r, s] = [y[0], y[1], y[2], y[3]];
    dy[0] = 0.5 * v * (2.0 - d) * r;
    dy[1] = -x * r - gamma_rate * q;
    dy[2] = x * q + 0.5 * v * d * s + 0.5 * v * (d - 2.0) * p - gamma_rate * r;
    dy[3] = 0.5 * v * d * r;
}

/// `int Gamma / (Gamma^2 + alpha^2 t^2) dt` over one tail `|t| > t_edge`.
pub fn tail_weight(alpha: f64, gamma_rate: f64, t_edge: f64) -> f64 {
    if gamma_rate == 0.0 {
        return 0.0;
    }
    let a = alpha.abs();
    (gamma_rate / (a * t_edge.abs())).atan() / a
}

/// `S = v (delta s + (delta - 2) p) / 2`, which obeys `S' = v^2 (delta - 1) r`.
fn drive(sp: &SystemParams, p: f64, s: f64) -> f64 {
    0.5 * sp.v * (sp.delta * s + (sp.delta - 2.0) * p)
}

/// Advances `(p, s)` across a tail of weight `j`, with the coherences slaved
/// to `r = Gamma S / (Gamma^2 + alpha^2 t^2)`.
pub fn relax_tail(sp: &SystemParams, p: f64, s: f64, j: f64) -> (f64, f64) {
    let c = sp.v * sp.v * (sp.delta - 1.0);
    let cj = c * j;
    let ratio = if cj == 0.0 { 1.0 } else { cj.exp_m1() / cj };
    let integral = drive(sp, p, s) * j * ratio;
    (p + 0.5 * sp.v * (2.0 - sp.delta) * integral, s + 0.5 * sp.v * sp.delta * integral)
}

/// Integrates the `n = 0` closure across `grid`.
///
/// The stretches `|t| > T` are handled in closed form: coherences are slaved
/// to the populations there, which turns them into a relaxation of the
/// eigenbasis populations with total weight [`tail_weight`]. The grid part
/// starts from and is read out in the edge eigenbasis.
pub fn evolve_subspace(sp: &SystemParams, gamma_rate: f64, grid: &TimeGrid) -> Result<f64, HierarchyError> {
    if !(gamma_rate >= 0.0) || !gamma_rate.is_finite() {
        return Err(HierarchyError::InvalidDecoherence(gamma_rate));
    }
    let dir = sp.direction()?;
    let p0 = match dir {
        SweepDirection::Forward => -1.0,
        SweepDirection::Backward => 1.0,
    };
    let (pe, se) = relax_tail(sp, p0, 1.0, tail_weight(sp.alpha, gamma_rate, grid.t_start));
    let mut y = dress(sp, &edge_basis(sp, grid.t_start), pe, se, grid.t_start, gamma_rate);
    let mut scratch = Rk4Scratch::new(4);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        scratch.step(&mut y, t, grid.dt, |y, t, dy| subspace_flat(y, t, sp, gamma_rate, dy));
        if y.iter().any(|x| !x.is_finite()) {
            return Err(HierarchyError::NonFinite {
                t: t + grid.dt,
                alpha: sp.alpha,
                delta: sp.delta,
            });
        }
        rescale_by_ground(&mut y, 3);
    }
    let (p, s) = project_ground(&edge_basis(sp, grid.t_end), [y[0], y[1], y[2], y[3]]);
    let (p, s) = relax_tail(sp, p, s, tail_weight(sp.alpha, gamma_rate, grid.t_end));
    functional(p, s, dir)
}

/// Diabatic `(p, q, r, s)` of eigenbasis populations `(p_e, s_e)` at time
/// `t`, plus the slaved relaxation current `r = Gamma S / (Gamma^2 + x^2)`.
fn dress(sp: &SystemParams, basis: &EdgeBasis, pe: f64, se: f64, t: f64, gamma_rate: f64) -> Vec<f64> {
    let (ra, rb) = (0.5 * (se + pe), 0.5 * (se - pe));
    let (ea, eb) = ((1.0, basis.a_mix), (basis.b_mix, 1.0));
    let rho11 = ra * ea.0 * ea.0 + rb * eb.0 * eb.0;
    let rho22 = ra * ea.1 * ea.1 + rb * eb.1 * eb.1;
    let rho12 = ra * ea.0 * ea.1 + rb * eb.0 * eb.1;
    let (p, s) = (rho11 - rho22, rho11 + rho22);
    let x = sp.alpha * t;
    let r = gamma_rate * drive(sp, p, s) / (gamma_rate * gamma_rate + x * x);
    vec![p, 2.0 * rho12, r, s]
}

/// Grid for the `n = 0` closure: the ensemble policy with the step also
/// resolving the damping rate `Gamma`.
pub fn subspace_grid(policy: &WindowPolicy, sp: &SystemParams, np: &NoiseParams) -> Result<TimeGrid, ModelError> {
    let grid = policy.grid(sp, np)?;
    let limit = policy.h / np.decoherence_rate().max(f64::MIN_POSITIVE);
    if grid.dt <= limit {
        return Ok(grid);
    }
    TimeGrid::symmetric(grid.half_width(), limit)
}
