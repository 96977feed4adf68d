//! Linear-fractional metric theory: metrics of the form
//! (c0 + c1·TP + c2·γ)/(d0 + d1·TP + d2·γ), their optimal decision
//! threshold on the posterior η(x), and a brute-force verifier over finite
//! instances.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("zero denominator at TP={tp}, gamma={gamma}")]
    ZeroDenominator { tp: f64, gamma: f64 },
    #[error("degenerate threshold: c1 == d1·L* ({value})")]
    DegenerateThreshold { value: f64 },
    #[error("need at least 2 distinct eta values")]
    TooFewPoints,
}

/// Coefficients of the linear-fractional performance metric.
#[derive(Debug, Clone, Copy)]
pub struct MetricCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

impl MetricCoefficients {
    /// F1 = 2·TP/(π + γ).
    pub fn f1(pi: f64) -> Self {
        MetricCoefficients { c0: 0.0, c1: 2.0, c2: 0.0, d0: pi, d1: 0.0, d2: 1.0 }
    }

    /// Accuracy = (1−π) + 2·TP − γ.
    pub fn accuracy(pi: f64) -> Self {
        MetricCoefficients { c0: 1.0 - pi, c1: 2.0, c2: -1.0, d0: 1.0, d1: 0.0, d2: 0.0 }
    }

    /// Precision = TP/γ.
    pub fn precision() -> Self {
        MetricCoefficients { c0: 0.0, c1: 1.0, c2: 0.0, d0: 0.0, d1: 0.0, d2: 1.0 }
    }
}

/// Evaluate the metric at (TP, γ).
pub fn metric_value(tp: f64, gamma: f64, coef: &MetricCoefficients) -> Result<f64, TheoryError> {
    let den = coef.d0 + coef.d1 * tp + coef.d2 * gamma;
    if den.abs() < 1e-300 {
        return Err(TheoryError::ZeroDenominator { tp, gamma });
    }
    Ok((coef.c0 + coef.c1 * tp + coef.c2 * gamma) / den)
}

/// Which side of the threshold is predicted anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareDirection {
    /// Predict 1 when η > δ* (the standard case, c1 > d1·L*).
    GreaterThan,
    /// Predict 1 when η < δ* (pathological coefficient signs).
    LessThan,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimalThreshold {
    pub delta_star: f64,
    pub direction: CompareDirection,
}

/// The closed-form optimal threshold δ* = (d2·L* − c2)/(c1 − d1·L*).
pub fn optimal_threshold_formula(
    l_star: f64,
    coef: &MetricCoefficients,
) -> Result<OptimalThreshold, TheoryError> {
    let den = coef.c1 - coef.d1 * l_star;
    if den.abs() < 1e-12 {
        return Err(TheoryError::DegenerateThreshold { value: coef.c1 });
    }
    let delta_star = (coef.d2 * l_star - coef.c2) / den;
    let direction = if den > 0.0 {
        CompareDirection::GreaterThan
    } else {
        CompareDirection::LessThan
    };
    Ok(OptimalThreshold { delta_star, direction })
}

/// A finite distribution over posterior values: (η(x), mass) pairs.
#[derive(Debug, Clone)]
pub struct FiniteInstance {
    pub points: Vec<(f64, f64)>,
}

impl FiniteInstance {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        assert!(!points.is_empty(), "empty instance");
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9, "masses must sum to 1, got {total}");
        for &(eta, w) in &points {
            assert!((0.0..=1.0).contains(&eta), "eta outside [0,1]");
            assert!(w > 0.0, "masses must be positive");
        }
        FiniteInstance { points }
    }

    /// Implied anomaly prior π = Σ mass·η.
    pub fn pi(&self) -> f64 {
        self.points.iter().map(|(eta, w)| eta * w).sum()
    }

    fn tp_gamma(&self, predicted: &[bool]) -> (f64, f64) {
        let mut tp = 0.0;
        let mut gamma = 0.0;
        for (i, &(eta, w)) in self.points.iter().enumerate() {
            if predicted[i] {
                tp += w * eta;
                gamma += w;
            }
        }
        (tp, gamma)
    }
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Maximum metric value over all classifiers.
    pub l_star: f64,
    /// Midpoint threshold separating accepted from rejected η values of the
    /// best threshold rule (NaN when degenerate).
    pub delta_empirical: f64,
    /// Best subset found by exhaustive enumeration (one bit per point).
    pub best_subset: Vec<bool>,
    /// Predictions of the best threshold rule (one bit per point).
    pub threshold_subset: Vec<bool>,
    /// A threshold rule on η attains `l_star` (up to 1e-12).
    pub threshold_rule_optimal: bool,
    /// Direction of the best threshold rule.
    pub direction: CompareDirection,
    /// All η equal: every nonconstant rule ties.
    pub degenerate: bool,
}

/// Exhaustively optimize the metric over classifiers on a finite instance.
///
/// For k ≤ 12 points all 2^k subsets are enumerated; beyond that only the
/// threshold rules on sorted η (both directions), which the theorem says is
/// enough.
pub fn brute_force_optimal(
    inst: &FiniteInstance,
    coef: &MetricCoefficients,
) -> Result<BruteForceResult, TheoryError> {
    let k = inst.points.len();
    let mut distinct: Vec<f64> = inst.points.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 2 {
        return Ok(BruteForceResult {
            l_star: metric_value(inst.pi(), 1.0, coef)?,
            delta_empirical: f64::NAN,
            best_subset: vec![true; k],
            threshold_subset: vec![true; k],
            threshold_rule_optimal: true,
            direction: CompareDirection::GreaterThan,
            degenerate: true,
        });
    }

    let eval = |predicted: &[bool]| -> Option<f64> {
        let (tp, gamma) = inst.tp_gamma(predicted);
        metric_value(tp, gamma, coef).ok()
    };

    // threshold rules, both directions
    let mut sorted_idx: Vec<usize> = (0..k).collect();
    sorted_idx.sort_by(|&a, &b| inst.points[a].0.partial_cmp(&inst.points[b].0).unwrap());
    let mut best_threshold: Option<(f64, Vec<bool>, CompareDirection)> = None;
    for take_high in [true, false] {
        for cut in 0..=k {
            let mut predicted = vec![false; k];
            for (pos, &idx) in sorted_idx.iter().enumerate() {
                let accept = if take_high { pos >= cut } else { pos < cut };
                predicted[idx] = accept;
            }
            if let Some(l) = eval(&predicted) {
                let dir = if take_high {
                    CompareDirection::GreaterThan
                } else {
                    CompareDirection::LessThan
                };
                if best_threshold.as_ref().is_none_or(|(bl, _, _)| l > *bl) {
                    best_threshold = Some((l, predicted, dir));
                }
            }
        }
    }
    let (thr_l, thr_subset, thr_dir) = best_threshold.ok_or(TheoryError::ZeroDenominator {
        tp: 0.0,
        gamma: 0.0,
    })?;

    // exhaustive subsets when small
    let (best_l, best_subset) = if k <= 12 {
        let mut best = (f64::NEG_INFINITY, vec![false; k]);
        for mask in 0u32..(1 << k) {
            let predicted: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            if let Some(l) = eval(&predicted) {
                if l > best.0 {
                    best = (l, predicted);
                }
            }
        }
        best
    } else {
        (thr_l, thr_subset.clone())
    };

    let threshold_rule_optimal = thr_l >= best_l - 1e-12;

    // midpoint between accepted and rejected η of the best threshold rule
    let accepted: Vec<f64> = (0..k).filter(|&i| thr_subset[i]).map(|i| inst.points[i].0).collect();
    let rejected: Vec<f64> = (0..k).filter(|&i| !thr_subset[i]).map(|i| inst.points[i].0).collect();
    let delta_empirical = if accepted.is_empty() || rejected.is_empty() {
        f64::NAN
    } else {
        match thr_dir {
            CompareDirection::GreaterThan => {
                let lo = accepted.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = rejected.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo + hi) / 2.0
            }
            CompareDirection::LessThan => {
                let hi = accepted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = rejected.iter().cloned().fold(f64::INFINITY, f64::min);
                (hi + lo) / 2.0
            }
        }
    };

    Ok(BruteForceResult {
        l_star: best_l,
        delta_empirical,
        best_subset,
        threshold_subset: thr_subset,
        threshold_rule_optimal,
        direction: thr_dir,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_coefficients_identity() {
        // π=0.2, TP=0.15, γ=0.25 → 0.3/0.45 = 2/3
        let coef = MetricCoefficients::f1(0.2);
        let v = metric_value(0.15, 0.25, &coef).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_of_perfect_classifier_is_one() {
        let pi = 0.3;
        let coef = MetricCoefficients::accuracy(pi);
        let v = metric_value(pi, pi, &coef).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_metric_when_linear_terms_vanish() {
        let coef = MetricCoefficients { c0: 3.0, c1: 0.0, c2: 0.0, d0: 2.0, d1: 0.0, d2: 0.0 };
        assert_eq!(metric_value(0.1, 0.4, &coef).unwrap(), 1.5);
        assert_eq!(metric_value(0.9, 0.9, &coef).unwrap(), 1.5);
    }

    #[test]
    fn accuracy_threshold_is_half() {
        let coef = MetricCoefficients::accuracy(0.1);
        let t = optimal_threshold_formula(0.77, &coef).unwrap();
        assert_eq!(t.delta_star, 0.5);
        assert_eq!(t.direction, CompareDirection::GreaterThan);
    }

    #[test]
    fn f1_threshold_is_half_the_optimal_f1() {
        let coef = MetricCoefficients::f1(0.25);
        let l_star = 0.6;
        let t = optimal_threshold_formula(l_star, &coef).unwrap();
        assert!((t.delta_star - l_star / 2.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_denominator_reported() {
        let coef = MetricCoefficients { c0: 0.0, c1: 1.0, c2: 0.0, d0: 1.0, d1: 2.0, d2: 0.0 };
        assert!(matches!(
            optimal_threshold_formula(0.5, &coef),
            Err(TheoryError::DegenerateThreshold { .. })
        ));
    }

    #[test]
    fn two_point_accuracy_instance() {
        let inst = FiniteInstance::new(vec![(0.9, 0.5), (0.1, 0.5)]);
        let coef = MetricCoefficients::accuracy(inst.pi());
        let res = brute_force_optimal(&inst, &coef).unwrap();
        assert!(res.threshold_rule_optimal);
        // optimum accepts only eta=0.9
        assert_eq!(res.best_subset.iter().filter(|&&b| b).count(), 1);
        assert!(res.delta_empirical > 0.1 && res.delta_empirical < 0.9);
        // formula puts it at 0.5 for accuracy
        let t = optimal_threshold_formula(res.l_star, &coef).unwrap();
        assert_eq!(t.delta_star, 0.5);
    }

    #[test]
    fn all_equal_eta_is_degenerate() {
        let inst = FiniteInstance::new(vec![(0.4, 0.25); 4]);
        let coef = MetricCoefficients::f1(inst.pi());
        let res = brute_force_optimal(&inst, &coef).unwrap();
        assert!(res.degenerate);
    }
}
