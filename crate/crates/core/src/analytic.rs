//! Closed-form tunneling probabilities.
//!
//! All formulas are rewritten around `expm1` so that they stay finite for
//! `|alpha| -> 0` and continuous through `delta = 1`. The sweep direction is
//! always taken from the sign of `alpha`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{ModelError, SweepDirection, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{op} is singular at delta = 1; use {redirect} instead")]
    DeltaOne {
        op: &'static str,
        redirect: &'static str,
    },
    #[error("decoherence rate must be positive and finite, got {0}")]
    InvalidDecoherence(f64),
    #[error("{0:?} needs a decoherence rate")]
    MissingDecoherence(AnalyticKind),
}

/// Which closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticKind {
    /// Noiseless, any `delta != 1`.
    NoiselessExact,
    /// Noiseless, `delta = 1` only.
    DeltaOneExact,
    /// White-noise limit including the `1/Gamma^2` correction; `Gamma >> 1`.
    WhiteNoiseOrder2,
    /// White-noise limit, `Gamma -> inf` term only.
    WhiteNoiseLeading,
    /// `|alpha| -> 0` with noise, `delta != 1`.
    AdiabaticNoisy,
    /// `|alpha| -> 0` without noise, `delta != 1`.
    AdiabaticNoiseless,
    /// `Gamma -> inf` at `delta = 0`.
    StrongDecoherenceDelta0,
}

impl AnalyticKind {
    pub const ALL: [AnalyticKind; 7] = [
        AnalyticKind::NoiselessExact,
        AnalyticKind::DeltaOneExact,
        AnalyticKind::WhiteNoiseOrder2,
        AnalyticKind::WhiteNoiseLeading,
        AnalyticKind::AdiabaticNoisy,
        AnalyticKind::AdiabaticNoiseless,
        AnalyticKind::StrongDecoherenceDelta0,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalyticKind::NoiselessExact => "noiseless-exact",
            AnalyticKind::DeltaOneExact => "delta-one-exact",
            AnalyticKind::WhiteNoiseOrder2 => "white-noise-order2",
            AnalyticKind::WhiteNoiseLeading => "white-noise-leading",
            AnalyticKind::AdiabaticNoisy => "adiabatic-noisy",
            AnalyticKind::AdiabaticNoiseless => "adiabatic-noiseless",
            AnalyticKind::StrongDecoherenceDelta0 => "strong-decoherence-delta0",
        }
    }

    /// Short statement of where the formula applies.
    pub fn validity(self) -> &'static str {
        match self {
            AnalyticKind::NoiselessExact => "D = 0, delta != 1",
            AnalyticKind::DeltaOneExact => "D = 0, delta = 1",
            AnalyticKind::WhiteNoiseOrder2 => "gamma >> 1, Gamma >> 1",
            AnalyticKind::WhiteNoiseLeading => "gamma >> 1, Gamma -> inf",
            AnalyticKind::AdiabaticNoisy => "|alpha| -> 0 with noise, delta != 1",
            AnalyticKind::AdiabaticNoiseless => "|alpha| -> 0 without noise, delta != 1",
            AnalyticKind::StrongDecoherenceDelta0 => "delta = 0, Gamma -> inf",
        }
    }

    pub fn needs_decoherence(self) -> bool {
        matches!(
            self,
            AnalyticKind::WhiteNoiseOrder2 | AnalyticKind::WhiteNoiseLeading | AnalyticKind::AdiabaticNoisy
        )
    }
}

/// Truncation order of the white-noise expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhiteNoiseOrder {
    Leading,
    Order2,
}

/// `expm1(y) / y`, equal to 1 at `y = 0`.
fn expm1_ratio(y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else {
        y.exp_m1() / y
    }
}

/// `(1 - e^{-y}) / y`, equal to 1 at `y = 0`.
fn neg_expm1_ratio(y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else {
        -(-y).exp_m1() / y
    }
}

/// `K = v^2 (delta - 1) / alpha`.
pub fn k_parameter(p: &SystemParams) -> f64 {
    p.v * p.v * (p.delta - 1.0) / p.alpha
}

/// Exact noiseless probability for `delta != 1`.
///
/// Forward: `(1-d) E / (1 - d E)` with `E = exp(-pi v^2 (1-d) / 2 alpha)`.
/// Backward: `E / (1 - d + d E)` with `E = exp(pi v^2 (1-d) / 2 alpha)`.
pub fn exact_noiseless(p: &SystemParams) -> Result<f64, AnalyticError> {
    if p.delta == 1.0 {
        return Err(AnalyticError::DeltaOne {
            op: "exact_noiseless",
            redirect: "exact_delta_one",
        });
    }
    Ok(noiseless_stable(p)?)
}

/// Noiseless probability valid for every `delta`, including 1.
pub fn noiseless(p: &SystemParams) -> Result<f64, AnalyticError> {
    if p.delta == 1.0 {
        return exact_delta_one(p.alpha, p.v);
    }
    Ok(noiseless_stable(p)?)
}

fn noiseless_stable(p: &SystemParams) -> Result<f64, ModelError> {
    let y = 0.5 * PI * k_parameter(p);
    Ok(match p.direction()? {
        // 1 / (1 + (1 - e^{-y}) / (d - 1)), y = pi K / 2.
        SweepDirection::Forward => 1.0 / (1.0 + 0.5 * PI * p.v * p.v / p.alpha * neg_expm1_ratio(y)),
        // 1 / (1 - (d - 1) expm1(y)).
        SweepDirection::Backward => 1.0 / (1.0 - (p.delta - 1.0) * y.exp_m1()),
    })
}

/// Exact noiseless probability at `delta = 1`: forward `2a / (2a + pi v^2)`,
/// backward exactly 1.
pub fn exact_delta_one(alpha: f64, v: f64) -> Result<f64, AnalyticError> {
    Ok(match SweepDirection::from_alpha(alpha)? {
        SweepDirection::Forward => 2.0 * alpha / (2.0 * alpha + PI * v * v),
        SweepDirection::Backward => 1.0,
    })
}

/// White-noise-limit probability at decoherence rate `gamma_rate = D^2 / gamma`.
///
/// With `E = exp(+-pi K)` (sign by direction) the leading term is
/// `(d-1)(E+1)/(dE+d-2)` forward and `(E+1)/(2-d+dE)` backward; the order-2
/// correction is
/// `-2 v^2 (d-1)^2 (E-1)(K^2-8) / (den^2 (K^2+4)(K^2+16) Gamma^2)`.
pub fn white_noise_prob(
    p: &SystemParams,
    gamma_rate: f64,
    order: WhiteNoiseOrder,
) -> Result<f64, AnalyticError> {
    if !(gamma_rate > 0.0) || !gamma_rate.is_finite() {
        return Err(AnalyticError::InvalidDecoherence(gamma_rate));
    }
    let k = k_parameter(p);
    let dir = p.direction()?;
    let d = p.delta;
    // `lead = num / den` and `corr_ratio = (E - 1)(d - 1)^2 / den^2`, each
    // divided through by E when E > 1.
    let (lead, corr_ratio) = match dir {
        SweepDirection::Forward => {
            let y = PI * k;
            // den = (d - 1)(lambda + E + 1), lambda = (E - 1)/(d - 1).
            if y <= 0.0 {
                let e = y.exp();
                let lambda = PI * p.v * p.v / p.alpha * expm1_ratio(y);
                let den = lambda + e + 1.0;
                ((e + 1.0) / den, y.exp_m1() / (den * den))
            } else {
                let eps = (-y).exp();
                let lambda_eps = PI * p.v * p.v / p.alpha * neg_expm1_ratio(y);
                let den = lambda_eps + 1.0 + eps;
                ((1.0 + eps) / den, -(-y).exp_m1() * eps / (den * den))
            }
        }
        SweepDirection::Backward => {
            let y = -PI * k;
            let dd = (d - 1.0) * (d - 1.0);
            if y <= 0.0 {
                let e = y.exp();
                let den = 2.0 - d + d * e;
                ((e + 1.0) / den, dd * y.exp_m1() / (den * den))
            } else {
                let eps = (-y).exp();
                let den = (2.0 - d) * eps + d;
                ((1.0 + eps) / den, -dd * (-y).exp_m1() * eps / (den * den))
            }
        }
    };
    match order {
        WhiteNoiseOrder::Leading => Ok(lead),
        WhiteNoiseOrder::Order2 => {
            let k2 = k * k;
            let shape = (k2 - 8.0) / ((k2 + 4.0) * (k2 + 16.0));
            Ok(lead - 2.0 * p.v * p.v * corr_ratio * shape / (gamma_rate * gamma_rate))
        }
    }
}

/// `true` when the white-noise expansion parameter is in its stated regime.
pub fn white_noise_regime(gamma_rate: f64) -> bool {
    gamma_rate >= 1.0
}

/// Adiabatic (`|alpha| -> 0`) limits.
///
/// | regime | forward | backward |
/// |---|---|---|
/// | `delta > 1` | `(d-1)/d` | `1/d` |
/// | `delta < 1`, noisy | `(d-1)/(d-2)` | `1/(2-d)` |
/// | `delta < 1`, noiseless | 0 | 0 |
pub fn adiabatic_limit(delta: f64, dir: SweepDirection, noisy: bool) -> Result<f64, AnalyticError> {
    if delta == 1.0 {
        return Err(AnalyticError::DeltaOne {
            op: "adiabatic_limit",
            redirect: "exact_delta_one",
        });
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be finite and >= 0",
        }
        .into());
    }
    Ok(match (delta > 1.0, noisy, dir) {
        (true, _, SweepDirection::Forward) => (delta - 1.0) / delta,
        (true, _, SweepDirection::Backward) => 1.0 / delta,
        (false, true, SweepDirection::Forward) => (delta - 1.0) / (delta - 2.0),
        (false, true, SweepDirection::Backward) => 1.0 / (2.0 - delta),
        (false, false, _) => 0.0,
    })
}

/// Forward-sweep final population exactly as the closed form is usually
/// quoted: `(1 - e^{-pi v^2 (1-d) / 2 alpha}) / (1 - d)`.
///
/// This is `|a(+inf)|^2` alone; see [`noiseless_final_norm`] for the full
/// `|a|^2 + |b|^2`.
pub fn noiseless_final_population(p: &SystemParams) -> Result<f64, AnalyticError> {
    if p.delta == 1.0 {
        return Err(AnalyticError::DeltaOne {
            op: "noiseless_final_population",
            redirect: "noiseless_final_norm",
        });
    }
    forward_only(p)?;
    let y = 0.5 * PI * k_parameter(p);
    // expm1(y) / (d - 1) = (pi v^2 / 2 alpha) expm1(y) / y.
    Ok(0.5 * PI * p.v * p.v / p.alpha * expm1_ratio(y))
}

/// Forward-sweep `N(+inf) = |a|^2 + |b|^2` for a state starting in `(0, 1)`
/// with unit norm. Continuous through `delta = 1`.
pub fn noiseless_final_norm(p: &SystemParams) -> Result<f64, AnalyticError> {
    forward_only(p)?;
    let y = 0.5 * PI * k_parameter(p);
    Ok(0.5 * PI * p.v * p.v / p.alpha * expm1_ratio(y) + y.exp())
}

fn forward_only(p: &SystemParams) -> Result<(), AnalyticError> {
    match p.direction()? {
        SweepDirection::Forward => Ok(()),
        SweepDirection::Backward => Err(ModelError::InvalidParameter {
            name: "alpha",
            value: p.alpha,
            reason: "final population formula is for forward sweeps (alpha > 0)",
        }
        .into()),
    }
}

/// `(1 + exp(-pi v^2 / |alpha|)) / 2`.
pub fn strong_decoherence_delta0(alpha: f64, v: f64) -> f64 {
    0.5 * (1.0 + (-PI * v * v / alpha.abs()).exp())
}

/// Evaluates `kind` at `p`; `gamma_rate` is required by the white-noise
/// kinds and by [`AnalyticKind::AdiabaticNoisy`] only as a presence flag.
pub fn evaluate(kind: AnalyticKind, p: &SystemParams, gamma_rate: Option<f64>) -> Result<f64, AnalyticError> {
    let dir = p.direction()?;
    let rate = || gamma_rate.ok_or(AnalyticError::MissingDecoherence(kind));
    match kind {
        AnalyticKind::NoiselessExact => exact_noiseless(p),
        AnalyticKind::DeltaOneExact => {
            if p.delta != 1.0 {
                return Err(ModelError::InvalidParameter {
                    name: "delta",
                    value: p.delta,
                    reason: "delta-one formula requires delta = 1",
                }
                .into());
            }
            exact_delta_one(p.alpha, p.v)
        }
        AnalyticKind::WhiteNoiseOrder2 => white_noise_prob(p, rate()?, WhiteNoiseOrder::Order2),
        AnalyticKind::WhiteNoiseLeading => white_noise_prob(p, rate()?, WhiteNoiseOrder::Leading),
        AnalyticKind::AdiabaticNoisy => {
            rate()?;
            adiabatic_limit(p.delta, dir, true)
        }
        AnalyticKind::AdiabaticNoiseless => adiabatic_limit(p.delta, dir, false),
        AnalyticKind::StrongDecoherenceDelta0 => Ok(strong_decoherence_delta0(p.alpha, p.v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(alpha: f64, delta: f64) -> SystemParams {
        SystemParams::new(alpha, delta).unwrap()
    }

    /// Direct transcription of the printed formulas, for moderate exponents.
    fn naive_noiseless(alpha: f64, delta: f64) -> f64 {
        if alpha > 0.0 {
            let e = (-PI * (1.0 - delta) / (2.0 * alpha)).exp();
            (1.0 - delta) * e / (1.0 - delta * e)
        } else {
            let e = (PI * (1.0 - delta) / (2.0 * alpha)).exp();
            e / (1.0 - delta + delta * e)
        }
    }

    fn naive_white(alpha: f64, delta: f64, gamma_rate: f64) -> (f64, f64) {
        let k = (delta - 1.0) / alpha;
        let k2 = k * k;
        let shape = (k2 - 8.0) / ((k2 + 4.0) * (k2 + 16.0));
        if alpha > 0.0 {
            let e = (-PI * (1.0 - delta) / alpha).exp();
            let den = delta * e + delta - 2.0;
            let lead = (delta - 1.0) * (e + 1.0) / den;
            let corr = 2.0 * (delta - 1.0).powi(2) * (e - 1.0) * shape / (den * den * gamma_rate * gamma_rate);
            (lead, lead - corr)
        } else {
            let e = (PI * (1.0 - delta) / alpha).exp();
            let den = 2.0 - delta + delta * e;
            let lead = (e + 1.0) / den;
            let corr = 2.0 * (delta - 1.0).powi(2) * (e - 1.0) * shape / (den * den * gamma_rate * gamma_rate);
            (lead, lead - corr)
        }
    }

    #[test]
    fn noiseless_examples() {
        assert_abs_diff_eq!(exact_noiseless(&sp(PI / 2.0, 0.0)).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(exact_noiseless(&sp(1.0, 0.5)).unwrap(), 0.295_284_882_014_688, epsilon = 1e-12);
        assert_abs_diff_eq!(exact_noiseless(&sp(1e-4, 2.0)).unwrap(), 0.5, epsilon = 1e-12);
        assert!(matches!(exact_noiseless(&sp(1.0, 1.0)), Err(AnalyticError::DeltaOne { .. })));
    }

    #[test]
    fn delta_one_examples() {
        assert_abs_diff_eq!(exact_delta_one(PI / 2.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(exact_delta_one(-0.3, 1.0).unwrap(), 1.0);
        assert!(exact_delta_one(1e-12, 1.0).unwrap() < 1e-11);
        assert!(exact_delta_one(0.0, 1.0).is_err());
    }

    #[test]
    fn stable_forms_match_printed_forms() {
        for alpha in [-5.0, -1.0, -0.2, 0.2, 1.0, 5.0] {
            for delta in [0.0, 0.5, 0.9, 1.5, 2.0, 3.0] {
                let p = sp(alpha, delta);
                assert_abs_diff_eq!(exact_noiseless(&p).unwrap(), naive_noiseless(alpha, delta), epsilon = 1e-12);
                let (lead, order2) = naive_white(alpha, delta, 3.0);
                assert_abs_diff_eq!(
                    white_noise_prob(&p, 3.0, WhiteNoiseOrder::Leading).unwrap(),
                    lead,
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    white_noise_prob(&p, 3.0, WhiteNoiseOrder::Order2).unwrap(),
                    order2,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn delta_zero_is_reciprocal_lz() {
        for alpha in [0.05, 0.3, 1.0, 4.0, 50.0] {
            let lz = (-PI / (2.0 * alpha)).exp();
            assert_abs_diff_eq!(exact_noiseless(&sp(alpha, 0.0)).unwrap(), lz, epsilon = 1e-15);
            assert_abs_diff_eq!(exact_noiseless(&sp(-alpha, 0.0)).unwrap(), lz, epsilon = 1e-15);
        }
    }

    #[test]
    fn continuous_through_delta_one() {
        for alpha in [-3.0, -0.5, 0.1, 0.5, PI / 2.0, 3.0] {
            let at_one = exact_delta_one(alpha, 1.0).unwrap();
            for eps in [1e-6, -1e-6] {
                let near = exact_noiseless(&sp(alpha, 1.0 + eps)).unwrap();
                assert!(((near - at_one) / at_one).abs() < 1e-4, "alpha {alpha} eps {eps}");
            }
            assert_eq!(noiseless(&sp(alpha, 1.0)).unwrap(), at_one);
            // The white-noise forms reduce to the same values at delta = 1.
            let w = white_noise_prob(&sp(alpha, 1.0), 2.0, WhiteNoiseOrder::Order2).unwrap();
            assert_abs_diff_eq!(w, at_one, epsilon = 1e-14);
        }
    }

    #[test]
    fn white_noise_examples() {
        let big = 1e12;
        let strong = white_noise_prob(&sp(PI, 0.0), big, WhiteNoiseOrder::Order2).unwrap();
        assert_abs_diff_eq!(strong, 0.5 * (1.0 + (-1.0f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(strong, 0.683_939_720_585_721, epsilon = 1e-12);
        let lead = |a, d| white_noise_prob(&sp(a, d), big, WhiteNoiseOrder::Leading).unwrap();
        assert_abs_diff_eq!(lead(1e-4, 2.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lead(1e-4, 0.5), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lead(-1e-4, 0.5), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lead(-1e-4, 2.0), 0.5, epsilon = 1e-12);
        assert!(white_noise_prob(&sp(1.0, 0.5), 0.0, WhiteNoiseOrder::Leading).is_err());
    }

    #[test]
    fn adiabatic_table() {
        use SweepDirection::*;
        assert_abs_diff_eq!(adiabatic_limit(4.0, Forward, true).unwrap(), 0.75);
        assert_abs_diff_eq!(adiabatic_limit(4.0, Forward, false).unwrap(), 0.75);
        assert_abs_diff_eq!(adiabatic_limit(0.5, Backward, true).unwrap(), 2.0 / 3.0);
        assert_eq!(adiabatic_limit(0.5, Forward, false).unwrap(), 0.0);
        assert!(adiabatic_limit(1.0, Forward, true).is_err());
    }

    #[test]
    fn adiabatic_table_matches_small_alpha_limits() {
        for delta in [0.2, 0.5, 0.8, 1.5, 2.0, 4.0] {
            for (alpha, dir) in [(1e-5, SweepDirection::Forward), (-1e-5, SweepDirection::Backward)] {
                let p = sp(alpha, delta);
                let noisy = white_noise_prob(&p, 1e9, WhiteNoiseOrder::Leading).unwrap();
                assert_abs_diff_eq!(noisy, adiabatic_limit(delta, dir, true).unwrap(), epsilon = 1e-9);
                let quiet = exact_noiseless(&p).unwrap();
                assert_abs_diff_eq!(quiet, adiabatic_limit(delta, dir, false).unwrap(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn final_population_examples() {
        assert_abs_diff_eq!(noiseless_final_population(&sp(1.0, 0.5)).unwrap(), 1.088_124, epsilon = 1e-6);
        assert_abs_diff_eq!(
            noiseless_final_population(&sp(1.0, 2.0)).unwrap(),
            (PI / 2.0).exp() - 1.0,
            epsilon = 1e-12
        );
        // The quoted form drops |b|^2; the full norm is conserved at delta = 0.
        for alpha in [0.1, 1.0, 10.0] {
            assert_abs_diff_eq!(noiseless_final_norm(&sp(alpha, 0.0)).unwrap(), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(
            noiseless_final_norm(&sp(1.0, 0.5)).unwrap(),
            1.088_124 + (-PI / 4.0).exp(),
            epsilon = 1e-6
        );
        assert!(noiseless_final_population(&sp(-1.0, 0.5)).is_err());
    }

    #[test]
    fn final_norm_consistent_with_probability() {
        // P = |b|^2 / N with |b|^2 = exp(-pi v^2 (1 - d) / 2 alpha).
        for (alpha, delta) in [(0.5, 0.3), (1.0, 0.5), (2.0, 1.7), (0.7, 1.0)] {
            let p = sp(alpha, delta);
            let b2 = (-PI * (1.0 - delta) / (2.0 * alpha)).exp();
            let ratio = b2 / noiseless_final_norm(&p).unwrap();
            assert_abs_diff_eq!(ratio, noiseless(&p).unwrap(), epsilon = 1e-13);
        }
    }

    #[test]
    fn order2_correction_vanishes_at_delta_one() {
        for alpha in [-2.0, -0.1, 0.1, 2.0] {
            let p = sp(alpha, 1.0);
            let lead = white_noise_prob(&p, 0.7, WhiteNoiseOrder::Leading).unwrap();
            let order2 = white_noise_prob(&p, 0.7, WhiteNoiseOrder::Order2).unwrap();
            assert_eq!(lead, order2);
        }
    }

    #[test]
    fn dispatcher_routes_and_validates() {
        let p = sp(1.0, 0.5);
        assert_eq!(evaluate(AnalyticKind::NoiselessExact, &p, None).unwrap(), exact_noiseless(&p).unwrap());
        assert!(matches!(
            evaluate(AnalyticKind::WhiteNoiseLeading, &p, None),
            Err(AnalyticError::MissingDecoherence(_))
        ));
        assert!(evaluate(AnalyticKind::DeltaOneExact, &p, None).is_err());
        assert_eq!(evaluate(AnalyticKind::DeltaOneExact, &sp(-1.0, 1.0), None).unwrap(), 1.0);
        for kind in AnalyticKind::ALL {
            assert!(!kind.validity().is_empty());
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{}\"", kind.as_str()));
        }
    }

    proptest! {
        #[test]
        fn formulas_stay_in_unit_interval(
            log_alpha in -3.0f64..2.0,
            negative in any::<bool>(),
            delta in 0.0f64..5.0,
            log_rate in -1.0f64..3.0,
        ) {
            let alpha = if negative { -(10f64.powf(log_alpha)) } else { 10f64.powf(log_alpha) };
            let p = sp(alpha, delta);
            let in_unit = |x: f64| (0.0..=1.0).contains(&x);
            prop_assert!(in_unit(noiseless(&p).unwrap()));
            prop_assert!(in_unit(white_noise_prob(&p, 10f64.powf(log_rate), WhiteNoiseOrder::Leading).unwrap()));
            prop_assert!(in_unit(strong_decoherence_delta0(alpha, 1.0)));
            if delta != 1.0 {
                let dir = p.direction().unwrap();
                prop_assert!(in_unit(adiabatic_limit(delta, dir, true).unwrap()));
                prop_assert!(in_unit(adiabatic_limit(delta, dir, false).unwrap()));
            }
        }

        #[test]
        fn white_noise_enhances_reciprocal_tunneling(log_alpha in -3.0f64..2.0, negative in any::<bool>()) {
            let a = 10f64.powf(log_alpha);
            let alpha = if negative { -a } else { a };
            let p = sp(alpha, 0.0);
            let lead = white_noise_prob(&p, 1.0, WhiteNoiseOrder::Leading).unwrap();
            prop_assert!(lead >= exact_noiseless(&p).unwrap());
        }
    }
}
