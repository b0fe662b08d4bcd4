//! Closed-form scaling-regime predictions and log-log power-law fitting.
//!
//! With feature frequencies decaying as `i^-(1+alpha)` and a shared
//! per-feature loss curve `n^-beta`, the continuous allocation follows
//! `n_i ∝ i^-gamma` with `gamma = (1+alpha)/(1+beta)`, and which of the two
//! exponents is smaller decides the regime:
//!
//! - `beta < alpha` (pathological): loss scales as `N^-beta` while discovery
//!   is sublinear, `D(N) ∝ N^((1+beta)/(1+alpha))` — latents pile up on the
//!   most frequent features.
//! - `alpha < beta` (benign): loss scales as `N^-alpha` and `D(N) ∝ N` —
//!   extra width buys new features.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::ScalingTable;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("exponents must be finite and positive: alpha={alpha}, beta={beta}")]
    InvalidExponents { alpha: f64, beta: f64 },
    #[error("need at least 3 points inside window [{lo}, {hi}], found {found}")]
    TooFewPoints { lo: f64, hi: f64, found: usize },
    #[error("power-law fit needs positive coordinates; point {index} is ({x}, {y})")]
    NonPositivePoint { index: usize, x: f64, y: f64 },
    #[error("fit window [{lo}, {hi}] is empty or not finite")]
    BadWindow { lo: f64, hi: f64 },
    #[error("scaling table must span at least two decades of budget, spans {ratio:.3}x")]
    InsufficientSpan { ratio: f64 },
}

/// Which exponent controls scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `beta < alpha`: tiling common manifolds beats discovering features.
    Pathological,
    /// `alpha < beta`: discovery keeps up with width.
    Benign,
    /// `alpha == beta` within 1e-12; exponents coincide, flagged degenerate.
    Critical,
}

/// Predicted exponents for a `(alpha, beta)` ensemble.
///
/// `loss_exponent` and `discovery_exponent` are positive decay/growth
/// magnitudes: expected loss scales as `N^-loss_exponent` and discovery as
/// `N^+discovery_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub loss_exponent: f64,
    pub discovery_exponent: f64,
    /// True only in the critical regime, where the shared exponent is used
    /// without logarithmic corrections.
    pub degenerate: bool,
}

/// Predict the scaling regime for frequency tail `alpha` and per-feature
/// loss decay `beta`.
pub fn predict(alpha: f64, beta: f64) -> Result<RegimePrediction, TheoryError> {
    if !alpha.is_finite() || !beta.is_finite() || alpha <= 0.0 || beta <= 0.0 {
        return Err(TheoryError::InvalidExponents { alpha, beta });
    }
    let gamma = (1.0 + alpha) / (1.0 + beta);
    let (regime, loss_exponent, discovery_exponent, degenerate) = if (alpha - beta).abs() < 1e-12 {
        (Regime::Critical, alpha, 1.0, true)
    } else if beta < alpha {
        (Regime::Pathological, beta, (1.0 + beta) / (1.0 + alpha), false)
    } else {
        (Regime::Benign, alpha, 1.0, false)
    };
    Ok(RegimePrediction {
        alpha,
        beta,
        gamma,
        regime,
        loss_exponent,
        discovery_exponent,
        degenerate,
    })
}

/// Ordinary least squares on `log y` vs `log x` inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    /// Natural-log intercept: fitted `ln y` at `x = 1`.
    pub intercept: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual in natural-log space.
    pub residual_rms: f64,
    pub points: usize,
}

impl PowerLawFit {
    /// Fitted value at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fit `y = c * x^slope` over the points with `window.0 <= x <= window.1`.
pub fn fit_power_law(
    points: &[(f64, f64)],
    window: (f64, f64),
) -> Result<PowerLawFit, TheoryError> {
    let (lo, hi) = window;
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(TheoryError::BadWindow { lo, hi });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (index, &(x, y)) in points.iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        if x <= 0.0 || y <= 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(TheoryError::NonPositivePoint { index, x, y });
        }
        xs.push(x.ln());
        ys.push(y.ln());
    }
    if xs.len() < 3 {
        return Err(TheoryError::TooFewPoints {
            lo,
            hi,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        let r = y - (intercept + slope * x);
        sse += r * r;
    }
    Ok(PowerLawFit {
        slope,
        intercept,
        window,
        residual_rms: (sse / n).sqrt(),
        points: xs.len(),
    })
}

/// The final factor-of-ten budget span of a table, for default fit windows.
pub fn last_decade(table: &ScalingTable) -> (f64, f64) {
    let hi = table.rows.last().map(|r| r.budget as f64).unwrap_or(1.0);
    (hi / 10.0, hi)
}

/// Absolute tolerances on the measured log-log slopes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegimeTolerances {
    pub loss: f64,
    pub discovery: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeCheckRow {
    pub quantity: String,
    /// Expected log-log slope (signed: loss slopes are negative).
    pub predicted: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub rows: Vec<RegimeCheckRow>,
    pub loss_fit: PowerLawFit,
    pub discovery_fit: PowerLawFit,
    pub pass: bool,
}

impl RegimeReport {
    /// Fixed-format text table: quantity, predicted, measured, tolerance, pass.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>12} {:>12} {:>10} {:>6}\n",
            "quantity", "predicted", "measured", "tolerance", "pass"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>12.6} {:>12.6} {:>10.4} {:>6}\n",
                row.quantity,
                row.predicted,
                row.measured,
                row.tolerance,
                if row.pass { "yes" } else { "no" }
            ));
        }
        out
    }
}

/// Fit the loss and discovery exponents of a simulation over its final
/// decade and compare them against a prediction.
pub fn verify_regime(
    table: &ScalingTable,
    prediction: &RegimePrediction,
    tolerances: &RegimeTolerances,
) -> Result<RegimeReport, TheoryError> {
    let budgets = table.budgets();
    let (min, max) = match (budgets.first(), budgets.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(TheoryError::InsufficientSpan { ratio: 0.0 }),
    };
    let ratio = max / min;
    if ratio < 100.0 * (1.0 - 1e-9) {
        return Err(TheoryError::InsufficientSpan { ratio });
    }
    let window = last_decade(table);
    let loss_fit = fit_power_law(&table.loss_points(), window)?;
    let discovery_fit = fit_power_law(&table.discovery_points(), window)?;

    let rows = vec![
        check_row(
            "loss log-log slope",
            -prediction.loss_exponent,
            loss_fit.slope,
            tolerances.loss,
        ),
        check_row(
            "discovery log-log slope",
            prediction.discovery_exponent,
            discovery_fit.slope,
            tolerances.discovery,
        ),
    ];
    let pass = rows.iter().all(|r| r.pass);
    Ok(RegimeReport {
        rows,
        loss_fit,
        discovery_fit,
        pass,
    })
}

fn check_row(quantity: &str, predicted: f64, measured: f64, tolerance: f64) -> RegimeCheckRow {
    RegimeCheckRow {
        quantity: quantity.to_string(),
        predicted,
        measured,
        tolerance,
        pass: (measured - predicted).abs() <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{
        log_budgets, simulate_scaling, FeatureEnsemble, LossCurve,
    };

    #[test]
    fn pathological_prediction_matches_closed_form() {
        let p = predict(0.5, 0.25).unwrap();
        assert_eq!(p.regime, Regime::Pathological);
        assert!((p.gamma - 1.2).abs() < 1e-15);
        assert!((p.loss_exponent - 0.25).abs() < 1e-15);
        assert!((p.discovery_exponent - 1.25 / 1.5).abs() < 1e-15);
        assert!(!p.degenerate);
    }

    #[test]
    fn benign_prediction_matches_closed_form() {
        let p = predict(0.3, 0.9).unwrap();
        assert_eq!(p.regime, Regime::Benign);
        assert!((p.loss_exponent - 0.3).abs() < 1e-15);
        assert_eq!(p.discovery_exponent, 1.0);
    }

    #[test]
    fn critical_boundary_is_flagged() {
        let p = predict(0.5, 0.5).unwrap();
        assert_eq!(p.regime, Regime::Critical);
        assert!((p.gamma - 1.0).abs() < 1e-15);
        assert!(p.degenerate);
        assert_eq!(p.discovery_exponent, 1.0);
    }

    #[test]
    fn invalid_exponents_are_rejected() {
        assert!(predict(0.0, 0.5).is_err());
        assert!(predict(0.5, -1.0).is_err());
        assert!(predict(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn prediction_is_continuous_across_the_critical_line() {
        let alpha = 0.4;
        let delta = 1e-9;
        let lower = predict(alpha, alpha - delta).unwrap();
        let upper = predict(alpha, alpha + delta).unwrap();
        assert!((lower.loss_exponent - upper.loss_exponent).abs() < 3.0 * delta);
        assert!((lower.discovery_exponent - upper.discovery_exponent).abs() < 3.0 * delta);
    }

    #[test]
    fn exact_power_law_is_recovered_exactly() {
        let points: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x: &f64| (x, x.powf(-0.5)))
            .collect();
        let fit = fit_power_law(&points, (1.0, 8.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "slope {}", fit.slope);
        assert!(fit.residual_rms < 1e-12);
        assert_eq!(fit.points, 4);
    }

    #[test]
    fn constant_y_fits_zero_slope() {
        let points = vec![(1.0, 3.0), (10.0, 3.0), (100.0, 3.0)];
        let fit = fit_power_law(&points, (1.0, 100.0)).unwrap();
        assert!(fit.slope.abs() < 1e-15);
    }

    #[test]
    fn fit_errors_are_specific() {
        let two = vec![(1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(
            fit_power_law(&two, (1.0, 2.0)),
            Err(TheoryError::TooFewPoints { found: 2, .. })
        ));
        let bad = vec![(1.0, 1.0), (2.0, -0.5), (3.0, 1.0)];
        let err = fit_power_law(&bad, (1.0, 3.0)).unwrap_err();
        assert!(matches!(err, TheoryError::NonPositivePoint { index: 1, .. }));
        assert!(err.to_string().contains("-0.5"));
        assert!(fit_power_law(&two, (5.0, 1.0)).is_err());
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let points: Vec<(f64, f64)> = (1..20)
            .map(|i| (i as f64, (i as f64).powf(-0.7) * (1.0 + 0.01 * (i % 3) as f64)))
            .collect();
        let base = fit_power_law(&points, (1.0, 20.0)).unwrap();
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, 100.0 * y)).collect();
        let fit = fit_power_law(&scaled, (1.0, 20.0)).unwrap();
        assert!((fit.slope - base.slope).abs() < 1e-12);
        assert!((fit.intercept - (base.intercept + 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn discrete_ensemble_loss_slope_matches_frequency_tail() {
        // With a deep ensemble the finite-feature cutoff is far away and the
        // loss slope over [1e2, 1e4] sits at the frequency-tail exponent.
        let e = FeatureEnsemble::zipf(10_000_000, 0.5, LossCurve::step(0.0).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(100, 10_000, 8), &[]).unwrap();
        let fit = fit_power_law(&table.loss_points(), (1e2, 1e4)).unwrap();
        assert!(
            (fit.slope + 0.5).abs() < 0.05,
            "loss slope {} not within -0.5 +/- 0.05",
            fit.slope
        );
    }

    #[test]
    fn verify_regime_pathological_uniform_power_law() {
        let e = FeatureEnsemble::zipf(100_000, 0.5, LossCurve::power_law(0.1).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(10, 100_000, 8), &[]).unwrap();
        let prediction = predict(0.5, 0.1).unwrap();
        let report = verify_regime(
            &table,
            &prediction,
            &RegimeTolerances {
                loss: 0.03,
                discovery: 0.05,
            },
        )
        .unwrap();
        assert!(report.pass, "\n{}", report.text_table());
        assert!((prediction.discovery_exponent - 1.1 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn verify_regime_benign_uniform_power_law() {
        let e = FeatureEnsemble::zipf(1_000_000, 0.3, LossCurve::power_law(1.0).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(10, 30_000, 8), &[]).unwrap();
        let report = verify_regime(
            &table,
            &predict(0.3, 1.0).unwrap(),
            &RegimeTolerances {
                loss: 0.08,
                discovery: 0.05,
            },
        )
        .unwrap();
        assert!(
            report.rows[1].pass,
            "discovery slope: \n{}",
            report.text_table()
        );
    }

    #[test]
    fn all_step_discovery_exponent_is_exactly_one() {
        let e = FeatureEnsemble::zipf(100_000, 0.5, LossCurve::step(0.0).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(10, 10_000, 8), &[]).unwrap();
        let fit = fit_power_law(&table.discovery_points(), last_decade(&table)).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn verify_regime_requires_two_decades() {
        let e = FeatureEnsemble::zipf(1000, 0.5, LossCurve::step(0.0).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(10, 500, 8), &[]).unwrap();
        assert!(matches!(
            verify_regime(
                &table,
                &predict(0.5, 0.1).unwrap(),
                &RegimeTolerances {
                    loss: 0.1,
                    discovery: 0.1
                }
            ),
            Err(TheoryError::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn report_table_has_fixed_columns() {
        let e = FeatureEnsemble::zipf(100_000, 0.5, LossCurve::step(0.0).unwrap()).unwrap();
        let table = simulate_scaling(&e, &log_budgets(10, 10_000, 4), &[]).unwrap();
        let report = verify_regime(
            &table,
            &predict(0.5, 0.1).unwrap(),
            &RegimeTolerances {
                loss: 1.0,
                discovery: 1.0,
            },
        )
        .unwrap();
        let text = report.text_table();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("quantity"));
        assert_eq!(text.lines().count(), 3);
    }
}
