//! Per-step speed metrics.

/// Sliding RMS of `v - v_des` over the last `window` steps, one value per
/// step. Early entries use the steps seen so far; a series shorter than the
/// window therefore ends with the all-data RMS.
pub fn rms_error(v: &[f64], v_des: f64, window: usize) -> Vec<f64> {
    assert!(window > 0, "rms window must be positive");
    let mut out = Vec::with_capacity(v.len());
    let mut sum = 0.0;
    for (k, &x) in v.iter().enumerate() {
        sum += (x - v_des).powi(2);
        if k >= window {
            sum -= (v[k - window] - v_des).powi(2);
        }
        // the running sum can dip a hair below zero after cancellation
        let n = (k + 1).min(window) as f64;
        out.push((sum.max(0.0) / n).sqrt());
    }
    out
}

/// Mean of the last `n` entries (all of them if fewer).
pub fn tail_mean(v: &[f64], n: usize) -> Option<f64> {
    if v.is_empty() || n == 0 {
        return None;
    }
    let tail = &v[v.len().saturating_sub(n)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Index of the first step with time `>= t`.
pub fn first_step_at(times: &[f64], t: f64) -> Option<usize> {
    times.iter().position(|&s| s >= t)
}

/// Steps after `start` until `v` enters `v_des ± band` and stays there for
/// `hold` consecutive steps. Counts the steps before the held run begins.
pub fn recovery_steps(v: &[f64], start: usize, v_des: f64, band: f64, hold: usize) -> Option<usize> {
    let hold = hold.max(1);
    let mut run = 0;
    for (k, &x) in v.iter().enumerate().skip(start) {
        if (x - v_des).abs() <= band {
            run += 1;
            if run == hold {
                return Some(k + 1 - hold - start);
            }
        } else {
            run = 0;
        }
    }
    None
}
