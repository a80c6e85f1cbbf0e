//! Bernstein-basis polynomials over the phase `τ ∈ [0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Cholesky, Mat};

/// Value and time derivatives of a desired output at one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BezierPoint {
    pub y: f64,
    pub ydot: f64,
    pub yddot: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Bernstein basis of degree `deg` at `tau`.
pub fn bernstein(deg: usize, tau: f64) -> Vec<f64> {
    let s = 1.0 - tau;
    (0..=deg)
        .map(|i| binomial(deg, i) * libm::pow(tau, i as f64) * libm::pow(s, (deg - i) as f64))
        .collect()
}

fn eval_phase(coeffs: &[f64], tau: f64) -> f64 {
    let deg = coeffs.len() - 1;
    bernstein(deg, tau).iter().zip(coeffs).map(|(b, a)| b * a).sum()
}

fn differences(coeffs: &[f64]) -> Vec<f64> {
    let deg = (coeffs.len() - 1) as f64;
    coeffs.windows(2).map(|w| deg * (w[1] - w[0])).collect()
}

/// Evaluates the polynomial with control points `coeffs` at `tau` for a
/// domain lasting `duration` seconds. Phases outside `[0, 1]` are clamped.
pub fn bezier_eval(coeffs: &[f64], tau: f64, duration: f64) -> BezierPoint {
    assert!(!coeffs.is_empty(), "bezier needs at least one control point");
    let t = if (0.0..=1.0).contains(&tau) {
        tau
    } else {
        log::warn!("bezier phase {tau} outside [0, 1], clamping");
        tau.clamp(0.0, 1.0)
    };
    let y = eval_phase(coeffs, t);
    if coeffs.len() == 1 {
        return BezierPoint { y, ydot: 0.0, yddot: 0.0 };
    }
    let d1 = differences(coeffs);
    let dy = eval_phase(&d1, t);
    let ddy = if d1.len() > 1 {
        eval_phase(&differences(&d1), t)
    } else {
        0.0
    };
    BezierPoint {
        y,
        ydot: dy / duration,
        yddot: ddy / (duration * duration),
    }
}

/// Least-squares control points with both endpoints pinned.
///
/// `samples` are `(τ, y)` pairs. Returns the coefficients and the largest
/// absolute fit residual over the samples.
pub fn fit_pinned(samples: &[(f64, f64)], deg: usize, start: f64, end: f64) -> (Vec<f64>, f64) {
    assert!(deg >= 1, "degree must be at least one");
    let mut coeffs = vec![0.0; deg + 1];
    coeffs[0] = start;
    coeffs[deg] = end;
    let inner = deg - 1;
    if inner > 0 {
        let mut ata = Mat::zeros(inner, inner);
        let mut atb = vec![0.0; inner];
        for &(tau, y) in samples {
            let b = bernstein(deg, tau);
            let r = y - b[0] * start - b[deg] * end;
            for i in 0..inner {
                atb[i] += b[i + 1] * r;
                for j in 0..inner {
                    ata[(i, j)] += b[i + 1] * b[j + 1];
                }
            }
        }
        let x = Cholesky::new(&ata)
            .expect("bernstein normal equations are positive definite for enough samples")
            .solve(&atb);
        coeffs[1..deg].copy_from_slice(&x);
    }
    let worst = samples
        .iter()
        .map(|&(tau, y)| (eval_phase(&coeffs, tau) - y).abs())
        .fold(0.0, f64::max);
    (coeffs, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// De Casteljau evaluation, kept independent of the Bernstein path.
    fn de_casteljau(coeffs: &[f64], tau: f64) -> f64 {
        let mut pts = coeffs.to_vec();
        for r in 1..pts.len() {
            for i in 0..pts.len() - r {
                pts[i] = (1.0 - tau) * pts[i] + tau * pts[i + 1];
            }
        }
        pts[0]
    }

    #[test]
    fn constant_coefficients_give_constant_output() {
        for tau in [0.0, 0.3, 0.77, 1.0] {
            let p = bezier_eval(&[0.4; 6], tau, 0.6);
            assert!((p.y - 0.4).abs() < 1e-15);
            assert!(p.ydot.abs() < 1e-12 && p.yddot.abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_hit_first_and_last_coefficients() {
        let a = [0.1, -0.3, 0.8, 0.2, -0.5, 0.9];
        assert_eq!(bezier_eval(&a, 0.0, 1.0).y, 0.1);
        assert!((bezier_eval(&a, 1.0, 1.0).y - 0.9).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_phase_is_clamped() {
        let a = [0.0, 1.0, 2.0];
        assert_eq!(bezier_eval(&a, 1.3, 1.0), bezier_eval(&a, 1.0, 1.0));
        assert_eq!(bezier_eval(&a, -0.2, 1.0), bezier_eval(&a, 0.0, 1.0));
    }

    #[test]
    fn pinned_fit_recovers_exact_polynomial() {
        let a = [0.2, 0.5, -0.1, 0.3, 0.7, -0.4];
        let samples: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 / 49.0;
                (t, de_casteljau(&a, t))
            })
            .collect();
        let (fit, worst) = fit_pinned(&samples, 5, a[0], a[5]);
        assert!(worst < 1e-12);
        for k in 0..6 {
            assert!((fit[k] - a[k]).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn matches_de_casteljau(a in proptest::collection::vec(-2.0f64..2.0, 6), tau in 0.0f64..=1.0) {
            let y = bezier_eval(&a, tau, 1.0).y;
            prop_assert!((y - de_casteljau(&a, tau)).abs() < 1e-12);
        }

        #[test]
        fn basis_is_partition_of_unity(deg in 1usize..9, tau in 0.0f64..=1.0) {
            let s: f64 = bernstein(deg, tau).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn derivatives_match_finite_differences(
            a in proptest::collection::vec(-2.0f64..2.0, 6),
            tau in 0.01f64..0.99,
            duration in 0.1f64..2.0,
        ) {
            let h = 1e-6;
            let p = bezier_eval(&a, tau, duration);
            let fwd = bezier_eval(&a, tau + h, duration);
            let back = bezier_eval(&a, tau - h, duration);
            let fd = (fwd.y - back.y) / (2.0 * h * duration);
            let fdd = (fwd.ydot - back.ydot) / (2.0 * h * duration);
            prop_assert!((fd - p.ydot).abs() < 1e-6 * (1.0 + p.ydot.abs()));
            prop_assert!((fdd - p.yddot).abs() < 1e-6 * (1.0 + p.yddot.abs()));
        }
    }
}
