//! Ornstein-Uhlenbeck colored noise `df = -gamma f dt + sqrt(2 gamma) D dW`.
//!
//! Realizations are driven by counter-based ChaCha8 streams keyed by
//! `(master_seed, realization_index)`, so any realization can be regenerated
//! on its own, on any worker, in any order.
//!
//! The Heun predictor and corrector share one Wiener increment. The noise
//! enters additively, so Ito and Stratonovich readings coincide and no drift
//! correction is applied.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{NoiseParams, TimeGrid};

/// `gamma * dt` above which the discrete correlation is flagged as inaccurate.
pub const GAMMA_DT_WARN: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("autocorrelation needs at least 2 paths, got {0}")]
    TooFewPaths(usize),
    #[error("lag {lag} exceeds the grid span {span}")]
    LagTooLong { lag: f64, span: f64 },
    #[error("lag {lag} is not a multiple of dt = {dt}")]
    LagOffGrid { lag: f64, dt: f64 },
    #[error("paths do not share a common time grid")]
    MismatchedGrids,
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub index: u64,
}

/// Counter-based Gaussian source for one realization.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self {
            key: StreamKey { master_seed, index },
            rng,
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Draw from the stationary law `Normal(0, D^2)`; exactly zero when `D = 0`.
pub fn sample_stationary(np: &NoiseParams, rng: &mut RngStream) -> f64 {
    if np.is_silent() {
        return 0.0;
    }
    np.amplitude * rng.standard_normal()
}

/// One Heun step with a given Wiener increment `dw ~ Normal(0, dt)`.
#[inline]
pub fn heun_update(f: f64, dt: f64, np: &NoiseParams, dw: f64) -> f64 {
    let kick = (2.0 * np.gamma).sqrt() * np.amplitude * dw;
    let predictor = f - np.gamma * f * dt + kick;
    f - 0.5 * np.gamma * (f + predictor) * dt + kick
}

/// Advance `f` by one Heun step, drawing the Wiener increment from `rng`.
/// The drift is autonomous, so the current time is not used.
pub fn heun_step(f: f64, _t: f64, dt: f64, np: &NoiseParams, rng: &mut RngStream) -> f64 {
    let dw = if np.is_silent() {
        0.0
    } else {
        dt.sqrt() * rng.standard_normal()
    };
    heun_update(f, dt, np, dw)
}

pub(crate) fn warn_if_coarse(np: &NoiseParams, dt: f64) {
    if !np.is_silent() && np.gamma * dt > GAMMA_DT_WARN {
        log::warn!(
            "gamma*dt = {:.3} exceeds {GAMMA_DT_WARN}; the exponential correlation of the discrete noise degrades",
            np.gamma * dt
        );
    }
}

/// Streaming OU generator: yields `f(t_0), f(t_1), ...` on a uniform grid
/// without storing the path. Produces exactly the values of [`generate_path`].
#[derive(Debug, Clone)]
pub struct OuStream {
    np: NoiseParams,
    dt: f64,
    sqrt_dt: f64,
    current: f64,
    rng: Option<RngStream>,
}

impl OuStream {
    /// Starts from a stationary draw.
    pub fn stationary(np: NoiseParams, dt: f64, mut rng: RngStream) -> Self {
        let current = sample_stationary(&np, &mut rng);
        Self::from_value(np, dt, rng, current)
    }

    /// Starts from a prescribed value (used to test relaxation to stationarity).
    pub fn from_value(np: NoiseParams, dt: f64, rng: RngStream, f0: f64) -> Self {
        Self {
            np,
            dt,
            sqrt_dt: dt.sqrt(),
            current: f0,
            rng: if np.is_silent() { None } else { Some(rng) },
        }
    }

    #[inline]
    pub fn current(&self) -> f64 {
        self.current
    }

    /// Moves to the next grid node and returns its value.
    #[inline]
    pub fn advance(&mut self) -> f64 {
        if let Some(rng) = self.rng.as_mut() {
            let dw = self.sqrt_dt * rng.standard_normal();
            self.current = heun_update(self.current, self.dt, &self.np, dw);
        }
        self.current
    }
}

/// A discretized noise realization aligned with a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub values: Vec<f64>,
    pub grid: TimeGrid,
    pub key: StreamKey,
}

impl NoisePath {
    /// Linear interpolation of the discrete path; clamps outside the grid.
    pub fn at(&self, t: f64) -> f64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        let k = x.floor() as usize;
        if k >= last {
            return self.values[last];
        }
        let w = x - k as f64;
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Writes `t,f` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# nrlz noise-path v1 seed={} index={}", self.key.master_seed, self.key.index)?;
        writeln!(out, "t,f")?;
        for (k, f) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.grid.time(k), f)?;
        }
        Ok(())
    }
}

/// Stationary start followed by Heun steps; the all-zero path when `D = 0`.
pub fn generate_path(np: &NoiseParams, grid: &TimeGrid, rng: RngStream) -> NoisePath {
    warn_if_coarse(np, grid.dt);
    let key = rng.key();
    let steps = grid.steps();
    let mut values = Vec::with_capacity(steps + 1);
    let mut stream = OuStream::stationary(*np, grid.dt, rng);
    values.push(stream.current());
    for _ in 0..steps {
        values.push(stream.advance());
    }
    NoisePath {
        values,
        grid: *grid,
        key,
    }
}

/// Estimate of `<f(t) f(t + lag)>` averaged over paths and all admissible
/// time origins. The process mean is known to vanish and is not subtracted.
pub fn autocorrelation_estimate(paths: &[NoisePath], lag: f64) -> Result<f64, NoiseError> {
    if paths.len() < 2 {
        return Err(NoiseError::TooFewPaths(paths.len()));
    }
    let grid = paths[0].grid;
    if paths.iter().any(|p| p.grid != grid || p.values.len() != grid.steps() + 1) {
        return Err(NoiseError::MismatchedGrids);
    }
    let span = grid.t_end - grid.t_start;
    if !(lag >= 0.0) || lag > span {
        return Err(NoiseError::LagTooLong { lag, span });
    }
    let k = (lag / grid.dt).round();
    if (k * grid.dt - lag).abs() > 1e-9 * grid.dt.max(lag) {
        return Err(NoiseError::LagOffGrid { lag, dt: grid.dt });
    }
    let k = k as usize;
    let len = grid.steps() + 1;
    if k >= len {
        return Err(NoiseError::LagTooLong { lag, span });
    }
    let origins = len - k;
    let mut total = 0.0;
    for path in paths {
        let v = &path.values;
        let s: f64 = v[..origins].iter().zip(&v[k..]).map(|(x, y)| x * y).sum();
        total += s;
    }
    Ok(total / (paths.len() * origins) as f64)
}
