//! Grid commands: cell evaluation, deterministic assembly and CSV rendering.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{Axis, ConfigError, MethodSpec, RangeAxis, RunConfig, Signs, Spacing};
use super::ExitStatus;
use crate::analytic::{self, AnalyticKind};
use crate::dynamics::ensemble_average;
use crate::hierarchy::{evolve_hierarchy, evolve_subspace, subspace_grid, HierarchyError};
use crate::model::{NoiseParams, SystemParams};
use crate::noise::{generate_path, RngStream};
use crate::spectrum::{find_exceptional_points, spectrum_scan, write_ep_csv, write_spectrum_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Curve,
    PhaseDiagram,
    Compare,
    Spectrum,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Curve => "curve",
            Command::PhaseDiagram => "phase-diagram",
            Command::Compare => "compare",
            Command::Spectrum => "spectrum",
        }
    }
}

/// Reduced noise rate `gamma / sqrt|alpha|` above which noise counts as fast.
pub const FAST_NOISE_RATIO: f64 = 10.0;
/// Decoherence rate above which the white-noise closed forms must hold.
pub const WHITE_NOISE_RATE: f64 = 10.0;

pub const ROW_HEADER: &str = "alpha,delta,D,gamma,method,P,stderr,status";
pub const SUMMARY_HEADER: &str = "method_a,method_b,max_deviation,alpha,delta,regime_violation";
pub const SYMMETRY_HEADER: &str = "alpha,delta,mirror_delta,P,P_mirror,difference";

/// One named file produced by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    /// sha256 of each data row, in cell order.
    pub cell_checksums: Vec<String>,
    pub diagnostics: serde_json::Value,
    pub status: ExitStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Invalid(String),
    IntegrationFailure(String),
    NotConverged(String),
}

impl CellStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Invalid(_) => "invalid",
            CellStatus::IntegrationFailure(_) => "integration-failure",
            CellStatus::NotConverged(_) => "not-converged",
        }
    }

    fn exit_status(&self) -> ExitStatus {
        match self {
            CellStatus::Ok => ExitStatus::Success,
            CellStatus::Invalid(_) => ExitStatus::Config,
            CellStatus::IntegrationFailure(_) => ExitStatus::Integration,
            CellStatus::NotConverged(_) => ExitStatus::Convergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub alpha: f64,
    pub delta: f64,
    pub amplitude: f64,
    pub gamma: f64,
    pub method: MethodSpec,
    pub probability: f64,
    pub stderr: f64,
    pub status: CellStatus,
}

impl CellRow {
    fn failed(alpha: f64, delta: f64, np: Option<&NoiseParams>, method: MethodSpec, status: CellStatus) -> Self {
        let (amplitude, gamma) = np.map_or((f64::NAN, f64::NAN), noise_columns);
        Self {
            alpha,
            delta,
            amplitude,
            gamma,
            method,
            probability: f64::NAN,
            stderr: f64::NAN,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            num(self.alpha),
            num(self.delta),
            num(self.amplitude),
            num(self.gamma),
            self.method,
            num(self.probability),
            num(self.stderr),
            self.status.tag()
        )
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn noise_columns(np: &NoiseParams) -> (f64, f64) {
    if np.is_silent() {
        (0.0, 0.0)
    } else {
        (np.amplitude, np.gamma)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Evaluates one `(alpha, delta, method)` cell; failures become status rows.
pub fn evaluate_cell(cfg: &RunConfig, method: MethodSpec, alpha: f64, delta: f64) -> CellRow {
    let p = match cfg.system(alpha, delta) {
        Ok(p) => p,
        Err(e) => return CellRow::failed(alpha, delta, None, method, CellStatus::Invalid(e.to_string())),
    };
    let np = match cfg.noise.resolve(&p) {
        Ok(np) => np,
        Err(e) => return CellRow::failed(alpha, delta, None, method, CellStatus::Invalid(e.to_string())),
    };
    let (amplitude, gamma) = noise_columns(&np);
    let result = run_method(cfg, method, &p, &np);
    match result {
        Ok((probability, stderr)) => CellRow {
            alpha,
            delta,
            amplitude,
            gamma,
            method,
            probability,
            stderr,
            status: CellStatus::Ok,
        },
        Err(status) => {
            log::warn!("cell alpha={alpha} delta={delta} method={method}: {status:?}");
            CellRow::failed(alpha, delta, Some(&np), method, status)
        }
    }
}

fn run_method(cfg: &RunConfig, method: MethodSpec, p: &SystemParams, np: &NoiseParams) -> Result<(f64, f64), CellStatus> {
    let policy = cfg.grid.policy();
    let grid_err = |e: crate::model::ModelError| CellStatus::Invalid(e.to_string());
    match method {
        MethodSpec::Sse => {
            let grid = policy.grid(p, np).map_err(grid_err)?;
            let r = ensemble_average(p, np, &grid, cfg.method.samples, cfg.method.seed)
                .map_err(|e| CellStatus::IntegrationFailure(e.to_string()))?;
            Ok((r.mean_probability, r.standard_error))
        }
        MethodSpec::Hierarchy => {
            let grid = policy.grid(p, np).map_err(grid_err)?;
            match evolve_hierarchy(p, np, &grid, cfg.grid.n_max) {
                Ok(out) => Ok((out.probability, 0.0)),
                Err(e @ HierarchyError::TruncationNotConverged { .. }) => Err(CellStatus::NotConverged(e.to_string())),
                Err(e @ HierarchyError::Model(_)) => Err(CellStatus::Invalid(e.to_string())),
                Err(e) => Err(CellStatus::IntegrationFailure(e.to_string())),
            }
        }
        MethodSpec::Subspace => {
            let grid = subspace_grid(&policy, p, np).map_err(grid_err)?;
            let pr = evolve_subspace(p, np.decoherence_rate(), &grid)
                .map_err(|e| CellStatus::IntegrationFailure(e.to_string()))?;
            Ok((pr, 0.0))
        }
        MethodSpec::Analytic(kind) => {
            let pr = analytic::evaluate(kind, p, Some(np.decoherence_rate()))
                .map_err(|e| CellStatus::Invalid(e.to_string()))?;
            Ok((pr, 0.0))
        }
    }
}

fn default_alpha() -> Axis {
    Axis::Range(RangeAxis {
        from: 0.05,
        to: 5.0,
        points: 21,
        spacing: Spacing::Log,
        signs: Signs::Both,
    })
}

fn default_delta(cmd: Command) -> Axis {
    match cmd {
        Command::PhaseDiagram => Axis::Range(RangeAxis {
            from: 0.0,
            to: 2.0,
            points: 21,
            spacing: Spacing::Linear,
            signs: Signs::Positive,
        }),
        Command::Compare => Axis::Value(0.5),
        Command::Curve | Command::Spectrum => Axis::Value(0.0),
    }
}

/// Cells in output order: delta-major, then alpha, then method.
fn cells(cfg: &RunConfig, cmd: Command, methods: &[MethodSpec]) -> Result<Vec<(f64, f64, MethodSpec)>, ConfigError> {
    let alphas = cfg.alpha_values(&default_alpha())?;
    let deltas = cfg.delta_values(&default_delta(cmd))?;
    let mut out = Vec::with_capacity(alphas.len() * deltas.len() * methods.len());
    for &d in &deltas {
        for &a in &alphas {
            for &m in methods {
                out.push((a, d, m));
            }
        }
    }
    Ok(out)
}

fn evaluate_all(cfg: &RunConfig, cells: &[(f64, f64, MethodSpec)]) -> Vec<CellRow> {
    cells.par_iter().map(|&(a, d, m)| evaluate_cell(cfg, m, a, d)).collect()
}

fn render_rows(tag: &str, rows: &[CellRow]) -> (OutputFile, Vec<String>) {
    let mut text = format!("# nrlz {tag} v1\n{ROW_HEADER}\n");
    let mut sums = Vec::with_capacity(rows.len());
    for r in rows {
        let line = r.csv_line();
        sums.push(sha256_hex(line.as_bytes()));
        text.push_str(&line);
        text.push('\n');
    }
    (
        OutputFile {
            name: format!("{}.csv", tag.replace('-', "_")),
            contents: text.into_bytes(),
        },
        sums,
    )
}

fn worst(rows: &[CellRow]) -> ExitStatus {
    rows.iter().map(|r| r.status.exit_status()).max().unwrap_or(ExitStatus::Success)
}

pub fn run(cfg: &RunConfig, cmd: Command) -> Result<CommandOutput, ConfigError> {
    match cmd {
        Command::Curve => curve(cfg),
        Command::PhaseDiagram => phase_diagram(cfg),
        Command::Compare => compare(cfg),
        Command::Spectrum => spectrum(cfg),
    }
}

fn curve(cfg: &RunConfig) -> Result<CommandOutput, ConfigError> {
    let rows = evaluate_all(cfg, &cells(cfg, Command::Curve, &[cfg.method.name])?);
    let (file, cell_checksums) = render_rows("curve", &rows);
    Ok(CommandOutput {
        files: vec![file],
        cell_checksums,
        diagnostics: json!({}),
        status: worst(&rows),
    })
}

/// Pairs `(delta, 2 - delta)` at equal alpha, with `delta < 1`.
pub fn symmetry_pairs(rows: &[CellRow]) -> Vec<(&CellRow, &CellRow)> {
    let mut out = Vec::new();
    for a in rows.iter().filter(|r| r.delta < 1.0 && r.is_ok()) {
        if let Some(b) = rows
            .iter()
            .find(|b| b.is_ok() && b.alpha == a.alpha && (b.delta - (2.0 - a.delta)).abs() < 1e-9)
        {
            out.push((a, b));
        }
    }
    out
}

fn phase_diagram(cfg: &RunConfig) -> Result<CommandOutput, ConfigError> {
    let rows = evaluate_all(cfg, &cells(cfg, Command::PhaseDiagram, &[cfg.method.name])?);
    let (file, cell_checksums) = render_rows("phase-diagram", &rows);
    let pairs = symmetry_pairs(&rows);
    let mut text = format!("# nrlz symmetry v1\n{SYMMETRY_HEADER}\n");
    let mut max_dev: f64 = 0.0;
    let mut sum = 0.0;
    for (a, b) in &pairs {
        let diff = (a.probability - b.probability).abs();
        max_dev = max_dev.max(diff);
        sum += diff;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            num(a.alpha),
            num(a.delta),
            num(b.delta),
            num(a.probability),
            num(b.probability),
            num(diff)
        );
    }
    let fast_noise = rows
        .iter()
        .all(|r| r.amplitude > 0.0 && r.gamma / r.alpha.abs().sqrt() >= FAST_NOISE_RATIO);
    let mean_dev = if pairs.is_empty() { f64::NAN } else { sum / pairs.len() as f64 };
    log::info!(
        "symmetry about delta = 1: {} pairs, max deviation {max_dev:.3e}, mean {mean_dev:.3e}",
        pairs.len()
    );
    Ok(CommandOutput {
        files: vec![
            file,
            OutputFile {
                name: "symmetry.csv".into(),
                contents: text.into_bytes(),
            },
        ],
        cell_checksums,
        diagnostics: json!({
            "symmetry_pairs": pairs.len(),
            "symmetry_max_deviation": if pairs.is_empty() { None } else { Some(max_dev) },
            "symmetry_mean_deviation": if pairs.is_empty() { None } else { Some(mean_dev) },
            "fast_noise_regime": fast_noise,
        }),
        status: worst(&rows),
    })
}

/// Largest pairwise deviation between two methods over shared cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub method_a: String,
    pub method_b: String,
    pub max_deviation: f64,
    pub alpha: f64,
    pub delta: f64,
    pub regime_violation: bool,
}

fn closed_white_noise(m: MethodSpec) -> bool {
    matches!(
        m,
        MethodSpec::Analytic(AnalyticKind::WhiteNoiseOrder2 | AnalyticKind::WhiteNoiseLeading)
    )
}

/// Closed form vs subspace must agree where both the decoherence rate and
/// the reduced noise rate are large.
fn regime_applies(a: &CellRow, b: &CellRow) -> bool {
    let pair = (closed_white_noise(a.method) && b.method == MethodSpec::Subspace)
        || (closed_white_noise(b.method) && a.method == MethodSpec::Subspace);
    if !pair || !(a.amplitude > 0.0) {
        return false;
    }
    let rate = a.amplitude * a.amplitude / a.gamma;
    rate >= WHITE_NOISE_RATE && a.gamma / a.alpha.abs().sqrt() >= FAST_NOISE_RATIO
}

pub fn summarize_pairs(rows: &[CellRow], methods: &[MethodSpec], tolerance: f64) -> Vec<PairSummary> {
    let per = methods.len();
    let mut out = Vec::new();
    for i in 0..per {
        for j in i + 1..per {
            let mut best = PairSummary {
                method_a: methods[i].to_string(),
                method_b: methods[j].to_string(),
                max_deviation: 0.0,
                alpha: f64::NAN,
                delta: f64::NAN,
                regime_violation: false,
            };
            for cell in rows.chunks(per) {
                let (a, b) = (&cell[i], &cell[j]);
                if !(a.is_ok() && b.is_ok()) {
                    continue;
                }
                let dev = (a.probability - b.probability).abs();
                if regime_applies(a, b) && dev > tolerance {
                    best.regime_violation = true;
                }
                if !(dev <= best.max_deviation) {
                    best.max_deviation = dev;
                    best.alpha = a.alpha;
                    best.delta = a.delta;
                }
            }
            out.push(best);
        }
    }
    out
}

fn compare(cfg: &RunConfig) -> Result<CommandOutput, ConfigError> {
    let methods = &cfg.compare.methods;
    if methods.len() < 2 {
        return Err(ConfigError::Invalid {
            field: "compare.methods".into(),
            reason: "at least two methods are required".into(),
        });
    }
    let rows = evaluate_all(cfg, &cells(cfg, Command::Compare, methods)?);
    let (file, cell_checksums) = render_rows("compare", &rows);
    let pairs = summarize_pairs(&rows, methods, cfg.compare.tolerance);
    let mut text = format!("# nrlz compare-summary v1\n{SUMMARY_HEADER}\n");
    for s in &pairs {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            s.method_a,
            s.method_b,
            num(s.max_deviation),
            num(s.alpha),
            num(s.delta),
            s.regime_violation
        );
    }
    let mut status = worst(&rows);
    if pairs.iter().any(|s| s.regime_violation) {
        log::warn!("closed form and subspace disagree inside their common validity regime");
        status = status.max(ExitStatus::Convergence);
    }
    Ok(CommandOutput {
        files: vec![
            file,
            OutputFile {
                name: "compare_summary.csv".into(),
                contents: text.into_bytes(),
            },
        ],
        cell_checksums,
        diagnostics: json!({ "pairs": pairs }),
        status,
    })
}

fn single(values: Vec<f64>, field: &str) -> Result<f64, ConfigError> {
    match values[..] {
        [x] => Ok(x),
        _ => Err(ConfigError::Invalid {
            field: field.into(),
            reason: "spectrum needs a single value".into(),
        }),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<CommandOutput, ConfigError> {
    let alpha = single(cfg.alpha_values(&Axis::Value(1.0))?, "physics.alpha")?;
    let delta = single(cfg.delta_values(&default_delta(Command::Spectrum))?, "physics.delta")?;
    let p = cfg.system(alpha, delta)?;
    let np = cfg.noise.resolve(&p)?;
    let grid = cfg.grid.policy().grid(&p, &np)?;
    let path = (!np.is_silent()).then(|| generate_path(&np, &grid, RngStream::new(cfg.method.seed, 0)));
    let samples = spectrum_scan(&p, path.as_ref(), &grid);
    let eps = find_exceptional_points(&p, path.as_ref(), &grid);
    let mut files = Vec::new();
    let mut buf = Vec::new();
    write_spectrum_csv(&samples, &mut buf).expect("in-memory write");
    files.push(OutputFile {
        name: "spectrum.csv".into(),
        contents: buf,
    });
    let mut buf = Vec::new();
    write_ep_csv(&eps, &mut buf).expect("in-memory write");
    files.push(OutputFile {
        name: "exceptional_points.csv".into(),
        contents: buf,
    });
    if let Some(path) = &path {
        let mut buf = Vec::new();
        path.write_csv(&mut buf).expect("in-memory write");
        files.push(OutputFile {
            name: "noise_path.csv".into(),
            contents: buf,
        });
    }
    Ok(CommandOutput {
        files,
        cell_checksums: Vec::new(),
        diagnostics: json!({
            "exceptional_points": eps.len(),
            "real_spectrum": samples.iter().all(|s| s.discriminant >= 0.0),
        }),
        status: ExitStatus::Success,
    })
}
