//! Waterfilling over parallel channels of equal bandwidth.
//!
//! Channel `k` has normalized gain `a[k] = h / (N0 B)` so that its rate is
//! `B log2(1 + a[k] p[k])`. The optimum of the capped problem is
//! `p[k] = clamp(mu - 1/a[k], 0, cap[k])` for a common water level `mu`.

/// Links with a normalized gain below this get no power.
pub const MIN_NORMALIZED_GAIN: f64 = 1e-300;

fn fill<'a>(a: &'a [f64], caps: &'a [f64], mu: f64) -> impl Iterator<Item = f64> + 'a {
    a.iter().zip(caps).map(move |(&a, &c)| {
        if a <= MIN_NORMALIZED_GAIN {
            0.0
        } else {
            (mu - 1.0 / a).clamp(0.0, c.max(0.0))
        }
    })
}

fn filled_total(a: &[f64], caps: &[f64], mu: f64) -> f64 {
    fill(a, caps, mu).sum()
}

/// Water level reached with the whole budget spent (or `None` when every
/// link sits at its cap below the budget).
pub fn water_level(a: &[f64], budget: f64, caps: &[f64]) -> Option<f64> {
    let cap_total: f64 = fill(a, caps, f64::INFINITY).sum();
    if cap_total <= budget {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = a
        .iter()
        .zip(caps)
        .filter(|(&a, _)| a > MIN_NORMALIZED_GAIN)
        .map(|(&a, &c)| 1.0 / a + c.min(budget))
        .fold(0.0f64, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled_total(a, caps, mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(lo)
}

/// Capped waterfilling: maximizes `sum log(1 + a p)` subject to
/// `sum p <= budget` and `0 <= p <= cap`.
pub fn waterfill(a: &[f64], budget: f64, caps: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), caps.len());
    match water_level(a, budget.max(0.0), caps) {
        None => fill(a, caps, f64::INFINITY).collect(),
        Some(mu) => fill(a, caps, mu).collect(),
    }
}

/// Uncapped waterfilling.
pub fn waterfill_uncapped(a: &[f64], budget: f64) -> Vec<f64> {
    waterfill(a, budget, &vec![f64::INFINITY; a.len()])
}

pub fn sum_rate(bandwidth: f64, a: &[f64], p: &[f64]) -> f64 {
    a.iter().zip(p).map(|(a, p)| bandwidth * (1.0 + a * p).log2()).sum()
}

/// Capped waterfilling whose water level is lowered, if needed, until the
/// sum-rate does not exceed `max_sum_rate`.
pub fn waterfill_rate_limited(
    a: &[f64],
    budget: f64,
    caps: &[f64],
    bandwidth: f64,
    max_sum_rate: f64,
) -> Vec<f64> {
    let p = waterfill(a, budget, caps);
    if sum_rate(bandwidth, a, &p) <= max_sum_rate {
        return p;
    }
    if max_sum_rate <= 0.0 {
        return vec![0.0; a.len()];
    }
    let mut lo = 0.0;
    let mut hi = water_level(a, budget, caps).unwrap_or_else(|| {
        a.iter()
            .zip(caps)
            .filter(|(&a, _)| a > MIN_NORMALIZED_GAIN)
            .map(|(&a, &c)| 1.0 / a + c)
            .fold(0.0f64, f64::max)
    });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q: Vec<f64> = fill(a, caps, mid).collect();
        if sum_rate(bandwidth, a, &q) > max_sum_rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    fill(a, caps, lo).collect()
}

/// Largest relative violation of the waterfilling optimality conditions.
pub fn kkt_residual(a: &[f64], budget: f64, caps: &[f64], p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    let active: Vec<f64> = a
        .iter()
        .zip(caps)
        .zip(p)
        .filter(|((&a, &c), &p)| p > 0.0 && p < c && a > MIN_NORMALIZED_GAIN)
        .map(|((&a, _), &p)| p + 1.0 / a)
        .collect();
    let Some(&mu) = active.first() else {
        return 0.0;
    };
    let mut worst = active
        .iter()
        .map(|l| (l - mu).abs() / mu)
        .fold(0.0f64, f64::max);
    if (total - budget).abs() > 1e-9 * budget.max(1e-300) {
        worst = worst.max((total - budget).abs() / budget);
    }
    for ((&a, &c), &p) in a.iter().zip(caps).zip(p) {
        if a <= MIN_NORMALIZED_GAIN {
            continue;
        }
        if p == 0.0 && 1.0 / a < mu {
            worst = worst.max((mu - 1.0 / a) / mu);
        }
        if p >= c && 1.0 / a + c > mu {
            worst = worst.max((1.0 / a + c - mu) / mu);
        }
    }
    worst
}
