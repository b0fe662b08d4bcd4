//! Per-feature loss-vs-latent-count curves.
//!
//! A curve gives the optimal loss a feature incurs when it owns `n` latents.
//! Three shapes cover the cases of interest:
//!
//! - [`LossCurve::Step`] — a discrete (one-dimensional) feature: full loss
//!   with no latent, a fixed residual (the sparsity cost) with one or more.
//! - [`LossCurve::PowerLaw`] — a feature manifold that keeps rewarding extra
//!   latents: loss `n^-beta` for `n >= 1`, loss 1 with none.
//! - [`LossCurve::Tabulated`] — an arbitrary measured curve, validated to be
//!   non-increasing with non-increasing marginal gains so the greedy solver
//!   is exact on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("step curve needs 0 <= satisfied <= unsatisfied (finite), got satisfied={satisfied}, unsatisfied={unsatisfied}")]
    InvalidStep { satisfied: f64, unsatisfied: f64 },
    #[error("power-law exponent must be finite and > 0, got {0}")]
    InvalidExponent(f64),
    #[error("power-law floor must lie in [0, 1], got {0}")]
    InvalidFloor(f64),
    #[error("tabulated curve needs at least one value")]
    EmptyTable,
    #[error("tabulated curve value at n={index} must be finite and >= 0, got {value}")]
    InvalidTableValue { index: usize, value: f64 },
    #[error("tabulated curve increases at n={index}: {prev} -> {next}")]
    NotMonotone { index: usize, prev: f64, next: f64 },
    #[error("tabulated curve has increasing marginal gains at n={index} ({prev_gain} -> {next_gain}); greedy allocation requires non-increasing gains")]
    NotConvex {
        index: usize,
        prev_gain: f64,
        next_gain: f64,
    },
}

/// Loss as a function of the number of latents allocated to one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossCurve {
    /// `unsatisfied_loss` with no latent, `satisfied_loss` with any.
    Step {
        satisfied_loss: f64,
        unsatisfied_loss: f64,
    },
    /// 1 with no latent, `max(n^-exponent, floor)` with `n >= 1`.
    PowerLaw { exponent: f64, floor: f64 },
    /// `values[n]` for tabulated `n`, extended by the final value.
    Tabulated { values: Vec<f64> },
}

impl LossCurve {
    /// Step curve with the conventional unsatisfied loss of 1.
    pub fn step(satisfied_loss: f64) -> Result<Self, CurveError> {
        Self::step_with_baseline(satisfied_loss, 1.0)
    }

    pub fn step_with_baseline(satisfied_loss: f64, unsatisfied_loss: f64) -> Result<Self, CurveError> {
        let curve = LossCurve::Step {
            satisfied_loss,
            unsatisfied_loss,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn power_law(exponent: f64) -> Result<Self, CurveError> {
        Self::power_law_with_floor(exponent, 0.0)
    }

    pub fn power_law_with_floor(exponent: f64, floor: f64) -> Result<Self, CurveError> {
        let curve = LossCurve::PowerLaw { exponent, floor };
        curve.validate()?;
        Ok(curve)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self, CurveError> {
        let curve = LossCurve::Tabulated { values };
        curve.validate()?;
        Ok(curve)
    }

    /// Check the construction invariants. Deserialized curves must be passed
    /// through this before use; the ensemble constructor does so.
    pub fn validate(&self) -> Result<(), CurveError> {
        match self {
            LossCurve::Step {
                satisfied_loss,
                unsatisfied_loss,
            } => {
                let ok = satisfied_loss.is_finite()
                    && unsatisfied_loss.is_finite()
                    && *satisfied_loss >= 0.0
                    && *satisfied_loss <= *unsatisfied_loss;
                if !ok {
                    return Err(CurveError::InvalidStep {
                        satisfied: *satisfied_loss,
                        unsatisfied: *unsatisfied_loss,
                    });
                }
            }
            LossCurve::PowerLaw { exponent, floor } => {
                if !exponent.is_finite() || *exponent <= 0.0 {
                    return Err(CurveError::InvalidExponent(*exponent));
                }
                if !floor.is_finite() || *floor < 0.0 || *floor > 1.0 {
                    return Err(CurveError::InvalidFloor(*floor));
                }
            }
            LossCurve::Tabulated { values } => {
                if values.is_empty() {
                    return Err(CurveError::EmptyTable);
                }
                for (i, &v) in values.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(CurveError::InvalidTableValue { index: i, value: v });
                    }
                }
                for i in 1..values.len() {
                    if values[i] > values[i - 1] {
                        return Err(CurveError::NotMonotone {
                            index: i - 1,
                            prev: values[i - 1],
                            next: values[i],
                        });
                    }
                }
                // Gains beyond the table are 0, so only interior gains matter.
                let scale = values[0].abs().max(1.0);
                for i in 2..values.len() {
                    let prev_gain = values[i - 2] - values[i - 1];
                    let next_gain = values[i - 1] - values[i];
                    if next_gain > prev_gain + 1e-12 * scale {
                        return Err(CurveError::NotConvex {
                            index: i - 1,
                            prev_gain,
                            next_gain,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Loss with an integer latent count.
    pub fn loss_at(&self, n: u64) -> f64 {
        match self {
            LossCurve::Step {
                satisfied_loss,
                unsatisfied_loss,
            } => {
                if n >= 1 {
                    *satisfied_loss
                } else {
                    *unsatisfied_loss
                }
            }
            LossCurve::PowerLaw { exponent, floor } => {
                if n == 0 {
                    1.0
                } else {
                    (n as f64).powf(-exponent).max(*floor)
                }
            }
            LossCurve::Tabulated { values } => {
                let idx = (n as usize).min(values.len() - 1);
                values[idx]
            }
        }
    }

    /// Loss with a real-valued latent count (continuous relaxation).
    ///
    /// Counts in `[0, 1)` are treated as unreconstructed, matching the
    /// cutoff convention of the continuous solver. Tabulated curves
    /// interpolate linearly between integer points.
    pub fn loss_at_real(&self, n: f64) -> f64 {
        debug_assert!(n >= 0.0 && n.is_finite());
        match self {
            LossCurve::Step {
                satisfied_loss,
                unsatisfied_loss,
            } => {
                if n >= 1.0 {
                    *satisfied_loss
                } else {
                    *unsatisfied_loss
                }
            }
            LossCurve::PowerLaw { exponent, floor } => {
                if n < 1.0 {
                    1.0
                } else {
                    n.powf(-exponent).max(*floor)
                }
            }
            LossCurve::Tabulated { values } => {
                if n >= (values.len() - 1) as f64 {
                    return values[values.len() - 1];
                }
                let lo = n.floor() as usize;
                let frac = n - lo as f64;
                values[lo] + frac * (values[lo + 1] - values[lo])
            }
        }
    }

    /// True marginal gain of the unit `n -> n + 1`.
    pub fn marginal_gain(&self, n: u64) -> f64 {
        self.loss_at(n) - self.loss_at(n + 1)
    }

    /// Pricing schedule the greedy solver uses for this curve.
    pub(crate) fn gain_schedule(&self) -> GainSchedule {
        match self {
            LossCurve::PowerLaw { .. } => {
                // The first latent on a power-law feature gains nothing by
                // itself (loss stays 1 until n = 1 is passed), so the greedy
                // prices the opening units at the concave envelope: the best
                // average gain over taking k latents at once.
                let mut best_k = 1u64;
                let mut best_avg = self.loss_at(0) - self.loss_at(1);
                let mut k = 2u64;
                loop {
                    let avg = (self.loss_at(0) - self.loss_at(k)) / k as f64;
                    if avg > best_avg {
                        best_avg = avg;
                        best_k = k;
                    } else if k > best_k + 2 || k > 1_000_000 {
                        break;
                    }
                    k += 1;
                }
                GainSchedule {
                    batch_len: best_k,
                    batch_avg: best_avg,
                }
            }
            _ => GainSchedule {
                batch_len: 1,
                batch_avg: self.marginal_gain(0),
            },
        }
    }
}

/// Envelope pricing for a curve's opening units.
///
/// Units `0..batch_len` are priced at `batch_avg`; later units at their true
/// marginal gain. For curves with non-increasing marginal gains this is the
/// identity schedule (`batch_len == 1`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct GainSchedule {
    pub batch_len: u64,
    pub batch_avg: f64,
}

impl GainSchedule {
    pub fn priced_gain(&self, curve: &LossCurve, n: u64) -> f64 {
        if n < self.batch_len {
            self.batch_avg
        } else {
            curve.marginal_gain(n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_values_and_gains() {
        let c = LossCurve::step(0.1).unwrap();
        assert_eq!(c.loss_at(0), 1.0);
        assert_eq!(c.loss_at(1), 0.1);
        assert_eq!(c.loss_at(100), 0.1);
        assert!((c.marginal_gain(0) - 0.9).abs() < 1e-15);
        assert_eq!(c.marginal_gain(1), 0.0);
    }

    #[test]
    fn step_rejects_inverted_losses() {
        assert!(LossCurve::step_with_baseline(0.5, 0.2).is_err());
        assert!(LossCurve::step(-0.1).is_err());
        assert!(LossCurve::step(f64::NAN).is_err());
    }

    #[test]
    fn power_law_values() {
        let c = LossCurve::power_law(0.5).unwrap();
        assert_eq!(c.loss_at(0), 1.0);
        assert_eq!(c.loss_at(1), 1.0);
        assert!((c.loss_at(4) - 0.5).abs() < 1e-15);
        let floored = LossCurve::power_law_with_floor(0.5, 0.6).unwrap();
        assert_eq!(floored.loss_at(100), 0.6);
    }

    #[test]
    fn power_law_rejects_bad_params() {
        assert!(LossCurve::power_law(0.0).is_err());
        assert!(LossCurve::power_law(-1.0).is_err());
        assert!(LossCurve::power_law_with_floor(0.5, 1.5).is_err());
    }

    #[test]
    fn tabulated_validation() {
        assert!(LossCurve::tabulated(vec![1.0, 0.5, 0.3, 0.2]).is_ok());
        assert!(LossCurve::tabulated(vec![]).is_err());
        assert!(LossCurve::tabulated(vec![1.0, 1.2]).is_err());
        // gains 0.1 then 0.4: increasing, not allowed
        assert!(matches!(
            LossCurve::tabulated(vec![1.0, 0.9, 0.5]),
            Err(CurveError::NotConvex { .. })
        ));
    }

    #[test]
    fn tabulated_extends_final_value() {
        let c = LossCurve::tabulated(vec![1.0, 0.4, 0.2]).unwrap();
        assert_eq!(c.loss_at(2), 0.2);
        assert_eq!(c.loss_at(1000), 0.2);
        assert_eq!(c.marginal_gain(5), 0.0);
    }

    #[test]
    fn real_valued_losses_interpolate() {
        let c = LossCurve::tabulated(vec![1.0, 0.4, 0.2]).unwrap();
        assert!((c.loss_at_real(0.5) - 0.7).abs() < 1e-15);
        assert!((c.loss_at_real(1.5) - 0.3).abs() < 1e-15);
        assert_eq!(c.loss_at_real(7.3), 0.2);

        let p = LossCurve::power_law(1.0).unwrap();
        assert_eq!(p.loss_at_real(0.5), 1.0);
        assert!((p.loss_at_real(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_matches_brute_force_argmax() {
        for beta in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
            let c = LossCurve::power_law(beta).unwrap();
            let sched = c.gain_schedule();
            let (mut best_k, mut best_avg) = (1u64, f64::NEG_INFINITY);
            for k in 1..=1000u64 {
                let avg = (c.loss_at(0) - c.loss_at(k)) / k as f64;
                if avg > best_avg {
                    best_avg = avg;
                    best_k = k;
                }
            }
            assert_eq!(sched.batch_len, best_k, "beta={beta}");
            assert!((sched.batch_avg - best_avg).abs() < 1e-15);
        }
        // Frozen spot values: batch length is 3 for shallow curves, 2 for steep.
        assert_eq!(
            LossCurve::power_law(0.05).unwrap().gain_schedule().batch_len,
            3
        );
        assert_eq!(
            LossCurve::power_law(1.0).unwrap().gain_schedule().batch_len,
            2
        );
    }

    #[test]
    fn priced_gains_are_non_increasing() {
        for curve in [
            LossCurve::step(0.2).unwrap(),
            LossCurve::power_law(0.05).unwrap(),
            LossCurve::power_law(1.5).unwrap(),
            LossCurve::power_law_with_floor(0.3, 0.4).unwrap(),
            LossCurve::tabulated(vec![1.0, 0.5, 0.25, 0.15, 0.1, 0.1]).unwrap(),
        ] {
            let sched = curve.gain_schedule();
            let mut prev = f64::INFINITY;
            for n in 0..200u64 {
                let g = sched.priced_gain(&curve, n);
                assert!(
                    g <= prev + 1e-12,
                    "gain increased at n={n} for {curve:?}: {prev} -> {g}"
                );
                prev = g;
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let curves = vec![
            LossCurve::step(0.0).unwrap(),
            LossCurve::power_law_with_floor(0.25, 0.1).unwrap(),
            LossCurve::tabulated(vec![1.0, 0.5, 0.3]).unwrap(),
        ];
        let json = serde_json::to_string(&curves).unwrap();
        let back: Vec<LossCurve> = serde_json::from_str(&json).unwrap();
        assert_eq!(curves, back);
    }
}
