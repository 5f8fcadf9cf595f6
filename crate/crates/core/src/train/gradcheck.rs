//! Central finite-difference check of the hand-derived gradients.

use super::objective::{param_names, param_slices_mut, Gradients, Objective};
use crate::attention::AttentionParams;
use crate::error::TrainError;
use crate::latent::LatentModel;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;

/// Below this magnitude on both sides the absolute error is reported instead
/// of the relative one. Central differences with [`STEP`] carry rounding noise
/// near `1e-16·|L| / STEP ≈ 1e-10` for losses of order one, which would swamp
/// the relative error of smaller entries.
pub const RELATIVE_GUARD: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    /// Parameter group and flat index of the worst entry.
    pub worst_parameter: String,
    pub worst_index: usize,
    /// Analytic and finite-difference values at the worst entry.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub entries_checked: usize,
    /// Entries whose ±step perturbation switched a rectifier on or off. The
    /// objective is not differentiable across that switch, so these entries
    /// are left out of the maximum.
    pub kink_crossings: usize,
}

/// `|a − n| / max(|a|, |n|)`, or `|a − n|` when both are below [`RELATIVE_GUARD`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < RELATIVE_GUARD {
        diff
    } else {
        diff / scale
    }
}

/// Compares the analytic gradient of `objective` on `docs` with central
/// differences for every parameter entry.
///
/// Meant for tiny models: the cost is two objective evaluations per parameter.
pub fn gradient_check(
    objective: &Objective<'_>,
    latent: &LatentModel,
    attention: &AttentionParams,
    docs: &[usize],
    tolerance: f64,
) -> Result<GradientReport, TrainError> {
    let mut grads = Gradients::zeros_like(latent, attention);
    objective.evaluate(latent, attention, docs, Some(&mut grads))?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let names = param_names(latent);

    let mut latent = latent.clone();
    let mut attention = attention.clone();
    let mut report = GradientReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        entries_checked: 0,
        kink_crossings: 0,
    };
    let base_pattern = objective.relu_pattern(&latent, &attention, docs)?;
    for (s, analytic_slice) in analytic.iter().enumerate() {
        for (j, &a) in analytic_slice.iter().enumerate() {
            let orig = param_slices_mut(&mut latent, &mut attention)[s][j];
            param_slices_mut(&mut latent, &mut attention)[s][j] = orig + STEP;
            let up = objective.evaluate(&latent, &attention, docs, None)?.total;
            let mut crossed = objective.relu_pattern(&latent, &attention, docs)? != base_pattern;
            param_slices_mut(&mut latent, &mut attention)[s][j] = orig - STEP;
            let down = objective.evaluate(&latent, &attention, docs, None)?.total;
            crossed |= objective.relu_pattern(&latent, &attention, docs)? != base_pattern;
            param_slices_mut(&mut latent, &mut attention)[s][j] = orig;
            if crossed {
                report.kink_crossings += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_relative_error || report.worst_parameter.is_empty() {
                report.max_relative_error = err;
                report.worst_parameter = names[s].clone();
                report.worst_index = j;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    if !(report.max_relative_error <= tolerance) {
        log::debug!("{report:?}");
        return Err(TrainError::GradientCheck {
            parameter: format!("{}[{}]", report.worst_parameter, report.worst_index),
            error: report.max_relative_error,
            tolerance,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_uses_absolute_error() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(0.0, 1e-9), 1e-9);
        assert_eq!(relative_error(2e-7, 3e-7), 1e-7);
        assert!((relative_error(1.0, 1.0001) - 1e-4 / 1.0001).abs() < 1e-15);
    }
}
