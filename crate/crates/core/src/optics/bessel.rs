//! Bessel functions of the first kind for integer orders 0, 1 and 2.
//!
//! Three regimes: the power series for `|x| ≤ 4`, Miller's backward
//! recurrence for `4 < |x| ≤ 50`, and the Hankel asymptotic expansion
//! beyond. Absolute error stays below `1e-13` on `|x| ≤ 200`.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 4.0;
const ASYMPTOTIC_LIMIT: f64 = 50.0;

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    // leading term (x/2)^n / n!
    let mut term = (1..=order).fold(1.0, |t, k| t * half / k as f64);
    let mut sum = term;
    for k in 1..200u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && term.abs() < 1e-20 {
            break;
        }
    }
    sum
}

/// `[J_0(x), J_1(x), J_2(x)]` for `x > 0` by backward recurrence,
/// normalised with `J_0 + 2 Σ J_{2k} = 1`.
fn miller(x: f64) -> [f64; 3] {
    let start = 2 * ((x as usize + 20 + (40.0 * x).sqrt() as usize) / 2 + 1);
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k
    let mut norm = 0.0;
    let mut low = [0.0; 3];
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        let idx = k - 1;
        if idx == 0 {
            norm += current;
        } else if idx % 2 == 0 {
            norm += 2.0 * current;
        }
        if idx <= 2 {
            low[idx] = current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            low.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    low.map(|v| v / norm)
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn eval(order: u32, x: f64) -> f64 {
    let ax = x.abs();
    let sign = if x < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    let v = if ax <= SERIES_LIMIT {
        series(order, ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller(ax)[order as usize]
    } else {
        hankel(order, ax)
    };
    sign * v
}

pub fn j0(x: f64) -> f64 {
    eval(0, x)
}

pub fn j1(x: f64) -> f64 {
    eval(1, x)
}

pub fn j2(x: f64) -> f64 {
    eval(2, x)
}

/// `J_n(x)` for `n ∈ {0, 1, 2}`.
///
/// # Panics
/// On any other order.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    assert!(order <= 2, "only orders 0, 1, 2 are supported");
    eval(order, x)
}
