//! Instantaneous eigenvalues of the effective Hamiltonian and
//! exceptional-point detection along noiseless or sampled sweeps.

use std::io::{self, Write};

use num_complex::Complex64;

use crate::model::{SystemParams, TimeGrid};
use crate::noise::NoisePath;

/// Target `|discriminant|` for bisection-refined exceptional points.
pub const EP_TOLERANCE: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    pub t: f64,
    pub e_plus: Complex64,
    pub e_minus: Complex64,
    pub discriminant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpKind {
    NoiselessAnalytic,
    NoiseInducedCrossing,
}

impl EpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpKind::NoiselessAnalytic => "noiseless-analytic",
            EpKind::NoiseInducedCrossing => "noise-induced-crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpRecord {
    pub t_ep: f64,
    pub kind: EpKind,
}

/// `(alpha t + f)^2 + v^2 (1 - delta)`.
pub fn discriminant(p: &SystemParams, t: f64, f: f64) -> f64 {
    let x = p.alpha * t + f;
    x * x + p.v * p.lower_coupling()
}

/// `(+sqrt(disc)/2, -sqrt(disc)/2)`: a real pair for `disc >= 0`, an
/// imaginary pair otherwise.
pub fn instantaneous_eigenvalues(p: &SystemParams, t: f64, f: f64) -> (Complex64, Complex64) {
    let root = 0.5 * Complex64::new(discriminant(p, t, f), 0.0).sqrt();
    (root, -root)
}

fn sample(p: &SystemParams, t: f64, f: f64) -> SpectrumSample {
    let (e_plus, e_minus) = instantaneous_eigenvalues(p, t, f);
    SpectrumSample {
        t,
        e_plus,
        e_minus,
        discriminant: discriminant(p, t, f),
    }
}

/// Eigenvalues at every grid node.
pub fn spectrum_scan(p: &SystemParams, path: Option<&NoisePath>, grid: &TimeGrid) -> Vec<SpectrumSample> {
    (0..=grid.steps())
        .map(|k| {
            let f = path.map_or(0.0, |np| np.values[k]);
            sample(p, grid.time(k), f)
        })
        .collect()
}

/// Exceptional points inside the grid window.
///
/// Without a path the roots `alpha t = +-v sqrt(delta - 1)` are returned in
/// closed form. With a path, sign changes of the discriminant on the linear
/// interpolant of `f` are located by bisection.
pub fn find_exceptional_points(p: &SystemParams, path: Option<&NoisePath>, grid: &TimeGrid) -> Vec<EpRecord> {
    match path {
        None => analytic_points(p, grid),
        Some(path) => crossings(p, path, grid),
    }
}

fn analytic_points(p: &SystemParams, grid: &TimeGrid) -> Vec<EpRecord> {
    if p.delta < 1.0 {
        return Vec::new();
    }
    let x = p.v * (p.delta - 1.0).sqrt();
    let mut roots = vec![-x / p.alpha, x / p.alpha];
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
        .into_iter()
        .map(|t| t + 0.0)
        .filter(|t| (grid.t_start..=grid.t_end).contains(t))
        .map(|t_ep| EpRecord {
            t_ep,
            kind: EpKind::NoiselessAnalytic,
        })
        .collect()
}

fn crossings(p: &SystemParams, path: &NoisePath, grid: &TimeGrid) -> Vec<EpRecord> {
    let mut out = Vec::new();
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let (f0, f1) = (path.values[k], path.values[k + 1]);
        let d0 = discriminant(p, t0, f0);
        let d1 = discriminant(p, t1, f1);
        if d0 == 0.0 && k > 0 {
            // Counted by the previous segment.
            continue;
        }
        if d0.signum() == d1.signum() && d1 != 0.0 {
            continue;
        }
        let f_at = |t: f64| f0 + (f1 - f0) * (t - t0) / (t1 - t0);
        out.push(EpRecord {
            t_ep: bisect(|t| discriminant(p, t, f_at(t)), t0, t1, d0),
            kind: EpKind::NoiseInducedCrossing,
        });
    }
    out
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    if g_lo == 0.0 {
        return lo;
    }
    let lo_sign = g_lo.signum();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() < EP_TOLERANCE || mid == lo || mid == hi {
            break;
        }
        if gm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// `# nrlz spectrum v1` followed by `t,re_e_plus,im_e_plus,re_e_minus,im_e_minus,discriminant`.
pub fn write_spectrum_csv<W: Write>(samples: &[SpectrumSample], mut out: W) -> io::Result<()> {
    writeln!(out, "# nrlz spectrum v1")?;
    writeln!(out, "t,re_e_plus,im_e_plus,re_e_minus,im_e_minus,discriminant")?;
    for s in samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.e_plus.re, s.e_plus.im, s.e_minus.re, s.e_minus.im, s.discriminant
        )?;
    }
    Ok(())
}

/// `# nrlz exceptional-points v1` followed by `t_ep,kind`.
pub fn write_ep_csv<W: Write>(eps: &[EpRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "# nrlz exceptional-points v1")?;
    writeln!(out, "t_ep,kind")?;
    for e in eps {
        writeln!(out, "{:.16e},{}", e.t_ep, e.kind.as_str())?;
    }
    Ok(())
}
