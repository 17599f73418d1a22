//! RK4 integration of `i d/dt (a, b) = H_eff(t, f(t)) (a, b)` and the
//! parallel ensemble engine producing the averaged tunneling probability.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    self, EdgeBasis, ModelError, NoiseParams, StateVector, SweepDirection, SystemParams, TimeGrid,
};
use crate::noise::{self, NoisePath, OuStream, RngStream, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite amplitude at t = {t} (alpha = {alpha}, v = {v}, delta = {delta}, f = {f})")]
    NonFinite {
        t: f64,
        alpha: f64,
        v: f64,
        delta: f64,
        f: f64,
    },
    #[error("noise path grid does not match the integration grid")]
    PathGridMismatch,
    #[error("ensemble needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("{} of {total} realizations failed; first: realization {} ({})", failures.len(), failures[0].0, failures[0].1)]
    EnsembleFailed {
        total: usize,
        failures: Vec<(u64, String)>,
    },
}

/// Integration window and step policy.
///
/// The half width is `T = C * max(1/sqrt|alpha|, v/|alpha|, 1/gamma)`; the
/// step is `h / max(gamma, v, |alpha| T, sqrt|alpha|)`. Both `gamma` terms
/// apply only with noise present.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowPolicy {
    pub c: f64,
    pub h: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self { c: 40.0, h: 0.05 }
    }
}

impl WindowPolicy {
    pub fn half_width(&self, p: &SystemParams, np: &NoiseParams) -> f64 {
        let a = p.alpha.abs();
        let mut scale = (1.0 / a.sqrt()).max(p.v / a);
        if !np.is_silent() {
            scale = scale.max(1.0 / np.gamma);
        }
        self.c * scale
    }

    pub fn max_step(&self, p: &SystemParams, np: &NoiseParams, half_width: f64) -> f64 {
        let a = p.alpha.abs();
        let mut rate = p.v.max(a * half_width).max(a.sqrt());
        if !np.is_silent() {
            rate = rate.max(np.gamma);
        }
        self.h / rate
    }

    pub fn grid(&self, p: &SystemParams, np: &NoiseParams) -> Result<TimeGrid, ModelError> {
        if p.alpha == 0.0 {
            return Err(ModelError::ZeroSweepRate);
        }
        let t = self.half_width(p, np);
        TimeGrid::symmetric(t, self.max_step(p, np, t))
    }

    /// Same policy with the window doubled (step rule re-applied).
    pub fn doubled(&self) -> Self {
        Self {
            c: 2.0 * self.c,
            h: self.h,
        }
    }

    pub fn halved_step(&self) -> Self {
        Self {
            c: self.c,
            h: 0.5 * self.h,
        }
    }
}

/// Bias values at the start, midpoint and end of one RK4 step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    pub start: f64,
    pub mid: f64,
    pub end: f64,
}

impl StepNoise {
    pub const ZERO: StepNoise = StepNoise {
        start: 0.0,
        mid: 0.0,
        end: 0.0,
    };

    /// Midpoint by linear interpolation between the grid values.
    #[inline]
    pub fn linear(start: f64, end: f64) -> Self {
        Self {
            start,
            mid: 0.5 * (start + end),
            end,
        }
    }
}

/// `L` independent states advanced in lockstep. Every lane performs the
/// same floating-point operations in the same order as a lone state, so the
/// batch width never changes a result.
#[derive(Debug, Clone, Copy)]
struct Lanes<const L: usize> {
    ar: [f64; L],
    ai: [f64; L],
    br: [f64; L],
    bi: [f64; L],
    log_scale: [f64; L],
}

impl<const L: usize> Lanes<L> {
    fn from_fn(mut state: impl FnMut(usize) -> StateVector) -> Self {
        let mut out = Self {
            ar: [0.0; L],
            ai: [0.0; L],
            br: [0.0; L],
            bi: [0.0; L],
            log_scale: [0.0; L],
        };
        for i in 0..L {
            out.set(i, &state(i));
        }
        out
    }

    #[inline(always)]
    fn get(&self, i: usize) -> StateVector {
        StateVector {
            a: Complex64::new(self.ar[i], self.ai[i]),
            b: Complex64::new(self.br[i], self.bi[i]),
            log_scale: self.log_scale[i],
        }
    }

    #[inline(always)]
    fn set(&mut self, i: usize, s: &StateVector) {
        self.ar[i] = s.a.re;
        self.ai[i] = s.a.im;
        self.br[i] = s.b.re;
        self.bi[i] = s.b.im;
        self.log_scale[i] = s.log_scale;
    }

    /// Classical RK4 for `d/dt (a, b) = (i/2) [[x, v], [w, -x]] (a, b)` with
    /// per-lane biases `x` at the start, midpoint and end of the step.
    #[inline(always)]
    fn rk4(&mut self, x0: &[f64; L], xm: &[f64; L], x1: &[f64; L], v: f64, w: f64, dt: f64) {
        let h2 = 0.5 * dt;
        let sixth = dt / 6.0;
        let k1 = Slope::eval(self, x0, v, w);
        let k2 = Slope::eval(&self.shifted(&k1, h2), xm, v, w);
        let k3 = Slope::eval(&self.shifted(&k2, h2), xm, v, w);
        let k4 = Slope::eval(&self.shifted(&k3, dt), x1, v, w);
        let comb = |y: &mut [f64; L], k1: &[f64; L], k2: &[f64; L], k3: &[f64; L], k4: &[f64; L]| {
            for i in 0..L {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
            }
        };
        comb(&mut self.ar, &k1.ar, &k2.ar, &k3.ar, &k4.ar);
        comb(&mut self.ai, &k1.ai, &k2.ai, &k3.ai, &k4.ai);
        comb(&mut self.br, &k1.br, &k2.br, &k3.br, &k4.br);
        comb(&mut self.bi, &k1.bi, &k2.bi, &k3.bi, &k4.bi);
    }

    #[inline(always)]
    fn shifted(&self, k: &Slope<L>, h: f64) -> Self {
        let mut out = *self;
        for i in 0..L {
            out.ar[i] += k.ar[i] * h;
            out.ai[i] += k.ai[i] * h;
            out.br[i] += k.br[i] * h;
            out.bi[i] += k.bi[i] * h;
        }
        out
    }

    /// Applies the rescaling policy to every lane. Returns a bit mask of the
    /// lanes holding non-finite amplitudes.
    #[inline(always)]
    fn settle(&mut self) -> u64 {
        let mut n = [0.0; L];
        let mut quiet = true;
        for i in 0..L {
            n[i] = (self.ar[i] * self.ar[i] + self.ai[i] * self.ai[i])
                + (self.br[i] * self.br[i] + self.bi[i] * self.bi[i]);
            quiet &= (model::RESCALE_LOW..=model::RESCALE_HIGH).contains(&n[i]);
        }
        if quiet {
            return 0;
        }
        let mut bad = 0;
        for i in 0..L {
            let mut s = self.get(i);
            if !s.is_finite() {
                bad |= 1 << i;
            } else if s.rescale_if_needed() {
                self.set(i, &s);
            }
        }
        bad
    }
}

/// Right-hand side of the lane system at one stage.
struct Slope<const L: usize> {
    ar: [f64; L],
    ai: [f64; L],
    br: [f64; L],
    bi: [f64; L],
}

impl<const L: usize> Slope<L> {
    #[inline(always)]
    fn eval(y: &Lanes<L>, x: &[f64; L], v: f64, w: f64) -> Self {
        let mut k = Slope {
            ar: [0.0; L],
            ai: [0.0; L],
            br: [0.0; L],
            bi: [0.0; L],
        };
        for i in 0..L {
            let (pr, pi) = (y.ar[i] * x[i] + y.br[i] * v, y.ai[i] * x[i] + y.bi[i] * v);
            let (qr, qi) = (y.ar[i] * w - y.br[i] * x[i], y.ai[i] * w - y.bi[i] * x[i]);
            k.ar[i] = -0.5 * pi;
            k.ai[i] = 0.5 * pr;
            k.br[i] = -0.5 * qi;
            k.bi[i] = 0.5 * qr;
        }
        k
    }
}

/// One classical RK4 step of the stochastic Schrodinger equation, followed
/// by the rescaling policy.
#[inline]
pub fn rk4_step(
    p: &SystemParams,
    s: &StateVector,
    t: f64,
    dt: f64,
    f: StepNoise,
) -> Result<StateVector, DynamicsError> {
    let mut lane = Lanes::<1>::from_fn(|_| *s);
    let (x0, xm, x1) = biases(p, t, dt, f);
    lane.rk4(&[x0], &[xm], &[x1], p.v, p.lower_coupling(), dt);
    if lane.settle() != 0 {
        return Err(non_finite(p, t + dt, f.end));
    }
    Ok(lane.get(0))
}

#[inline(always)]
fn biases(p: &SystemParams, t: f64, dt: f64, f: StepNoise) -> (f64, f64, f64) {
    (
        p.alpha * t + f.start,
        p.alpha * (t + 0.5 * dt) + f.mid,
        p.alpha * (t + dt) + f.end,
    )
}

fn non_finite(p: &SystemParams, t: f64, f: f64) -> DynamicsError {
    DynamicsError::NonFinite {
        t,
        alpha: p.alpha,
        v: p.v,
        delta: p.delta,
        f,
    }
}

/// Outcome of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationResult {
    /// Raw `|b|^2/N` (forward) or `|a|^2/N` (backward) at `t_end`.
    pub probability: f64,
    /// Natural log of the final physical population `N(t_end)`.
    pub final_log_population: f64,
    pub key: Option<StreamKey>,
}

/// How the finite window is matched to the `t -> -inf` / `t -> +inf` limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Boundary {
    /// Start in the edge eigenvector and read populations in the edge
    /// eigenbasis (see [`EdgeBasis`]).
    #[default]
    Eigenbasis,
    /// Start in the bare diabatic state and read bare `|a|^2`, `|b|^2`.
    Diabatic,
}

impl Boundary {
    fn basis(self, p: &SystemParams, t: f64, f: f64) -> EdgeBasis {
        match self {
            Boundary::Diabatic => EdgeBasis::DIABATIC,
            Boundary::Eigenbasis => EdgeBasis::at(p, t, f).unwrap_or(EdgeBasis::DIABATIC),
        }
    }
}

/// Integrates across `grid`, reading the bias noise at node `k` from
/// `noise_at(k)` (called in order `0, 1, ...`). The returned state is
/// expressed in the boundary basis at `t_end`.
pub fn evolve_state(
    p: &SystemParams,
    grid: &TimeGrid,
    boundary: Boundary,
    mut noise_at: impl FnMut(usize) -> f64,
) -> Result<StateVector, DynamicsError> {
    let dir = p.direction()?;
    let steps = grid.steps();
    let mut f0 = noise_at(0);
    let mut s = boundary.basis(p, grid.t_start, f0).initial_state(dir);
    for k in 0..steps {
        let f1 = noise_at(k + 1);
        s = rk4_step(p, &s, grid.time(k), grid.dt, StepNoise::linear(f0, f1))?;
        f0 = f1;
    }
    Ok(boundary.basis(p, grid.t_end, f0).project(&s))
}

fn finish(s: &StateVector, dir: SweepDirection, key: Option<StreamKey>) -> Result<RealizationResult, DynamicsError> {
    Ok(RealizationResult {
        probability: model::tunneling_probability(s, dir)?,
        final_log_population: s.log_population(),
        key,
    })
}

/// Single sweep with an optional stored noise path (`None` = noiseless).
pub fn evolve_single(
    p: &SystemParams,
    path: Option<&NoisePath>,
    grid: &TimeGrid,
) -> Result<RealizationResult, DynamicsError> {
    evolve_single_with(p, path, grid, Boundary::default())
}

pub fn evolve_single_with(
    p: &SystemParams,
    path: Option<&NoisePath>,
    grid: &TimeGrid,
    boundary: Boundary,
) -> Result<RealizationResult, DynamicsError> {
    let dir = p.direction()?;
    let s = match path {
        None => evolve_state(p, grid, boundary, |_| 0.0)?,
        Some(path) => {
            if path.grid != *grid || path.values.len() != grid.steps() + 1 {
                return Err(DynamicsError::PathGridMismatch);
            }
            evolve_state(p, grid, boundary, |k| path.values[k])?
        }
    };
    finish(&s, dir, path.map(|x| x.key))
}

/// Single sweep whose noise is generated on the fly from `rng`. Bitwise
/// identical to generating the path first and calling [`evolve_single`].
pub fn evolve_streamed(
    p: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    rng: RngStream,
) -> Result<RealizationResult, DynamicsError> {
    let [r] = evolve_streamed_lanes(p, np, grid, [rng]);
    r
}

/// Realizations integrated per batch by the ensemble engine.
pub const ENSEMBLE_LANES: usize = 16;

/// `L` streamed sweeps in lockstep; lane `i` equals
/// `evolve_streamed(p, np, grid, rngs[i])` bit for bit.
pub fn evolve_streamed_lanes<const L: usize>(
    p: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    rngs: [RngStream; L],
) -> [Result<RealizationResult, DynamicsError>; L] {
    let dir = match p.direction() {
        Ok(d) => d,
        Err(e) => return std::array::from_fn(|_| Err(e.clone().into())),
    };
    let boundary = Boundary::default();
    let keys = rngs.each_ref().map(|r| r.key());
    let mut streams = rngs.map(|r| OuStream::stationary(*np, grid.dt, r));
    let mut f0 = std::array::from_fn(|i| streams[i].current());
    let mut lanes = Lanes::<L>::from_fn(|i| boundary.basis(p, grid.t_start, f0[i]).initial_state(dir));
    let mut failed: [Option<DynamicsError>; L] = std::array::from_fn(|_| None);
    let (v, w, dt) = (p.v, p.lower_coupling(), grid.dt);
    let (mut x0, mut xm, mut x1) = ([0.0; L], [0.0; L], [0.0; L]);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let f1: [f64; L] = std::array::from_fn(|i| streams[i].advance());
        for i in 0..L {
            (x0[i], xm[i], x1[i]) = biases(p, t, dt, StepNoise::linear(f0[i], f1[i]));
        }
        lanes.rk4(&x0, &xm, &x1, v, w, dt);
        let bad = lanes.settle();
        if bad != 0 {
            for i in (0..L).filter(|i| bad & (1 << i) != 0) {
                failed[i].get_or_insert_with(|| non_finite(p, t + dt, f1[i]));
            }
        }
        f0 = f1;
    }
    std::array::from_fn(|i| match failed[i].take() {
        Some(e) => Err(e),
        None => {
            let s = boundary.basis(p, grid.t_end, f0[i]).project(&lanes.get(i));
            finish(&s, dir, Some(keys[i]))
        }
    })
}

/// Averaged probability over `sample_count` realizations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleResult {
    pub mean_probability: f64,
    pub standard_error: f64,
    pub sample_count: usize,
    pub master_seed: u64,
}

/// Runs realizations `0..m` with streams keyed by `(master_seed, index)`,
/// returned in index order regardless of scheduling.
pub fn ensemble_realizations(
    p: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    m: usize,
    master_seed: u64,
) -> Result<Vec<RealizationResult>, DynamicsError> {
    p.direction()?;
    noise::warn_if_coarse(np, grid.dt);
    if np.is_silent() {
        // Every realization is the same deterministic sweep.
        let r = evolve_single(p, None, grid)?;
        return Ok((0..m as u64)
            .map(|i| RealizationResult {
                key: Some(StreamKey { master_seed, index: i }),
                ..r
            })
            .collect());
    }
    let batches = m.div_ceil(ENSEMBLE_LANES);
    let outcomes: Vec<Result<RealizationResult, DynamicsError>> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let first = (b * ENSEMBLE_LANES) as u64;
            // Tail lanes past `m` are computed and discarded.
            let rngs = std::array::from_fn(|i| RngStream::new(master_seed, first + i as u64));
            let live = ENSEMBLE_LANES.min(m - b * ENSEMBLE_LANES);
            evolve_streamed_lanes::<ENSEMBLE_LANES>(p, np, grid, rngs).into_iter().take(live)
        })
        .collect();
    let mut results = Vec::with_capacity(m);
    let mut failures = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(r) => results.push(r),
            Err(e) => failures.push((i as u64, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(DynamicsError::EnsembleFailed { total: m, failures });
    }
    Ok(results)
}

/// Ensemble mean and standard error of the per-realization probabilities.
pub fn ensemble_average(
    p: &SystemParams,
    np: &NoiseParams,
    grid: &TimeGrid,
    m: usize,
    master_seed: u64,
) -> Result<EnsembleResult, DynamicsError> {
    if m < 2 {
        return Err(DynamicsError::TooFewSamples(m));
    }
    let results = ensemble_realizations(p, np, grid, m, master_seed)?;
    let values: Vec<f64> = results.iter().map(|r| r.probability).collect();
    Ok(summarize(&values, master_seed))
}

/// Ratio of ensemble averages, `<|b|^2> / <N>` forward and `<|a|^2> / <N>`
/// backward. This is what the averaged density-matrix pipelines compute; it
/// differs from the mean of per-realization probabilities whenever `N`
/// fluctuates across realizations.
pub fn population_weighted_probability(results: &[RealizationResult]) -> f64 {
    let top = results
        .iter()
        .map(|r| r.final_log_population)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = results.iter().map(|r| (r.final_log_population - top).exp()).collect();
    let weighted: Vec<f64> = results.iter().zip(&weights).map(|(r, w)| r.probability * w).collect();
    pairwise_sum(&weighted) / pairwise_sum(&weights)
}

pub fn summarize(values: &[f64], master_seed: u64) -> EnsembleResult {
    let m = values.len();
    if m > 0 && values.iter().all(|&x| x == values[0]) {
        return EnsembleResult {
            mean_probability: values[0],
            standard_error: 0.0,
            sample_count: m,
            master_seed,
        };
    }
    let mean = pairwise_sum(values) / m as f64;
    let dev: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if m > 1 { pairwise_sum(&dev) / (m - 1) as f64 } else { 0.0 };
    EnsembleResult {
        mean_probability: mean,
        standard_error: (var / m as f64).sqrt(),
        sample_count: m,
        master_seed,
    }
}

/// Fixed-shape pairwise summation; the result depends only on the order of
/// `values`, never on how the work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceReport {
    pub difference: f64,
    pub combined_standard_error: f64,
    pub converged: bool,
}

/// Compares an `M`-sample result with a `2M`-sample one; flags
/// non-convergence when the means differ by more than three combined
/// standard errors.
pub fn convergence_check(small: &EnsembleResult, large: &EnsembleResult) -> ConvergenceReport {
    let difference = (small.mean_probability - large.mean_probability).abs();
    let combined = small.standard_error.hypot(large.standard_error);
    ConvergenceReport {
        difference,
        combined_standard_error: combined,
        converged: difference <= 3.0 * combined,
    }
}
