use serde::Serialize;

use crate::error::{Result, RoqError};

pub const ALPHA_MIN: f64 = 0.3;
pub const ALPHA_MAX: f64 = 1.5;
pub const ALPHA_STEP: f64 = 0.005;

/// `error(n) ≈ C exp(−c₀ n^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub c0: f64,
    pub alpha: f64,
    /// Root-mean-square residual of `log(error)`.
    pub rms_residual: f64,
    pub points: usize,
    /// The best grid exponent sits on an end of the search interval, so the
    /// data are probably not of this form.
    pub poor_fit: bool,
}

impl DecayFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.c * (-self.c0 * n.powf(self.alpha)).exp()
    }
}

struct LineFit {
    log_c: f64,
    c0: f64,
    sse: f64,
}

fn line_fit(ns: &[f64], ys: &[f64], alpha: f64) -> LineFit {
    let xs: Vec<f64> = ns.iter().map(|n| n.powf(alpha)).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    LineFit {
        log_c: intercept,
        c0: -slope,
        sse,
    }
}

/// Fits `C exp(−c₀ n^α)` to `errors[n]` for `n ≥ n_min`.
///
/// `errors[n]` is the error with `n` elements, so a greedy error sequence
/// `[1, σ_1, σ_2, …]` can be passed as is.
pub fn fit_exponential_decay(errors: &[f64], n_min: usize) -> Result<DecayFit> {
    fit_exponential_decay_range(errors, n_min, errors.len().saturating_sub(1))
}

/// Same as [`fit_exponential_decay`] restricted to `n_min ≤ n ≤ n_max`.
pub fn fit_exponential_decay_range(errors: &[f64], n_min: usize, n_max: usize) -> Result<DecayFit> {
    let lo = n_min.max(1);
    let hi = n_max.min(errors.len().saturating_sub(1));
    if hi < lo + 2 {
        return Err(RoqError::Argument(format!(
            "exponential fit needs at least three points, got range {lo}..={hi}"
        )));
    }
    let mut ns = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for (n, &e) in errors.iter().enumerate().take(hi + 1).skip(lo) {
        if !(e > 0.0 && e.is_finite()) {
            return Err(RoqError::Domain(format!(
                "error at n = {n} is {e}, fit needs positive values"
            )));
        }
        ns.push(n as f64);
        ys.push(e.ln());
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let spread = ys.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Err(RoqError::DegenerateDecay("error sequence is constant".into()));
    }

    let steps = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize;
    let alpha_at = |k: usize| ALPHA_MIN + k as f64 * ALPHA_STEP;
    let mut best_k = 0;
    let mut best = line_fit(&ns, &ys, alpha_at(0));
    for k in 1..=steps {
        let f = line_fit(&ns, &ys, alpha_at(k));
        if f.sse < best.sse {
            best = f;
            best_k = k;
        }
    }
    let poor_fit = best_k == 0 || best_k == steps;

    // golden-section polish inside the bracketing grid cells
    let mut a = alpha_at(best_k.saturating_sub(1));
    let mut b = alpha_at((best_k + 1).min(steps));
    let mut alpha = alpha_at(best_k);
    if !poor_fit {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let sse = |al: f64| line_fit(&ns, &ys, al).sse;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (sse(x1), sse(x2));
        for _ in 0..60 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = sse(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = sse(x2);
            }
        }
        let candidate = 0.5 * (a + b);
        let refined = line_fit(&ns, &ys, candidate);
        if refined.sse <= best.sse {
            alpha = candidate;
            best = refined;
        }
    }
    if !(best.c0 > 0.0) {
        return Err(RoqError::DegenerateDecay(format!(
            "best fit has non-positive rate c0 = {}",
            best.c0
        )));
    }
    Ok(DecayFit {
        c: best.log_c.exp(),
        c0: best.c0,
        alpha,
        rms_residual: (best.sse / ns.len() as f64).sqrt(),
        points: ns.len(),
        poor_fit,
    })
}

/// Fit of the fast tail of a curve that decays slowly before it falls off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// First `n` with `errors[n] ≤ threshold`; the fit counts this as `n = 1`.
    pub onset: usize,
    pub fit: DecayFit,
}

/// Locates the first `n ≥ 1` with `errors[n] ≤ threshold` and fits
/// `C exp(−c₀ k^α)` to the rest with `k = n − onset + 1`.
pub fn fit_decay_tail(errors: &[f64], threshold: f64) -> Result<TailFit> {
    let onset = (1..errors.len())
        .find(|&n| errors[n] <= threshold)
        .ok_or_else(|| RoqError::DegenerateDecay(format!("curve never reaches {threshold:e}")))?;
    let fit = fit_exponential_decay(&errors[onset - 1..], 1)?;
    Ok(TailFit { onset, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(c: f64, c0: f64, alpha: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| c * (-c0 * (k as f64).powf(alpha)).exp()).collect()
    }

    #[test]
    fn recovers_two_step_fit_constants() {
        let e = synthetic(4.19e-3, 0.981, 0.923, 339);
        let f = fit_exponential_decay(&e, 20).unwrap();
        assert!((f.c / 4.19e-3 - 1.0).abs() < 0.01, "{f:?}");
        assert!((f.c0 / 0.981 - 1.0).abs() < 0.01, "{f:?}");
        assert!((f.alpha / 0.923 - 1.0).abs() < 0.01, "{f:?}");
        assert!(!f.poor_fit);
    }

    #[test]
    fn constant_sequence_is_degenerate() {
        let e = vec![0.5; 50];
        assert!(matches!(
            fit_exponential_decay(&e, 1),
            Err(RoqError::DegenerateDecay(_))
        ));
    }

    #[test]
    fn growing_sequence_is_degenerate() {
        let e: Vec<f64> = (0..40).map(|n| 1e-3 * (1.0 + n as f64)).collect();
        assert!(matches!(
            fit_exponential_decay(&e, 1),
            Err(RoqError::DegenerateDecay(_))
        ));
    }

    #[test]
    fn algebraic_decay_is_flagged() {
        let e: Vec<f64> = (0..=300).map(|n| ((n.max(1)) as f64).powi(-3)).collect();
        let f = fit_exponential_decay(&e, 1).unwrap();
        assert_eq!(f.alpha, ALPHA_MIN);
        assert!(f.poor_fit);
        assert!(f.rms_residual > 0.1, "{f:?}");
    }

    #[test]
    fn non_positive_entries_are_domain_errors() {
        let mut e = synthetic(1.0, 0.5, 1.0, 20);
        e[7] = 0.0;
        assert!(matches!(fit_exponential_decay(&e, 1), Err(RoqError::Domain(_))));
        assert!(fit_exponential_decay(&e, 8).is_ok());
    }

    #[test]
    fn tail_fit_ignores_the_slow_phase() {
        let mut e: Vec<f64> = (0..=200).map(|n| 1.0 - 0.004 * n as f64).collect();
        let tail = synthetic(4.19e-3, 0.981, 0.923, 30);
        e.extend_from_slice(&tail[1..]);
        let t = fit_decay_tail(&e, 5e-3).unwrap();
        assert_eq!(t.onset, 201);
        assert!((t.fit.alpha - 0.923).abs() < 1e-3, "{t:?}");
        assert!(matches!(
            fit_decay_tail(&[1.0, 0.9, 0.8], 1e-3),
            Err(RoqError::DegenerateDecay(_))
        ));
    }

    #[test]
    fn too_few_points() {
        assert!(fit_exponential_decay(&[1.0, 0.5, 0.1], 1).is_err());
    }

    proptest! {
        #[test]
        fn exact_curves_are_recovered(c in 1e-4f64..1.0, c0 in 0.05f64..1.0, alpha in 0.45f64..1.3) {
            let e = synthetic(c, c0, alpha, 120);
            let f = fit_exponential_decay(&e, 2).unwrap();
            prop_assert!((f.alpha - alpha).abs() < 2e-3 * alpha, "{:?}", f);
            prop_assert!(f.rms_residual < 1e-3);
        }
    }
}
