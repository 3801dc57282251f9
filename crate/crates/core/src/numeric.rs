//! Scalar numerical building blocks: stable exponentials, one-dimensional
//! minimization, and adaptive quadrature.

use std::cell::Cell;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_EVALUATIONS: u64 = 4_000_000;
const MAX_DEPTH: u32 = 48;
// always subdivide a few times so narrow peaks are not missed
const MIN_DEPTH: u32 = 4;

/// `log Σ exp(x_i)` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `e^x - 1 - x`, accurate for small `|x|`.
pub fn exp_m1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ_{k≥2} x^k / k!
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            k += 1.0;
            term *= x / k;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
///
/// Returns the best `(x, f(x))` among all evaluated points, so the reported
/// value is always attained.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    let mut iters = 0;
    while (b - a) > tol && iters < 300 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
        iters += 1;
    }
    best
}

/// Result of a geometric bracketing search for a minimum on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// The minimum lies in `[lo, hi]`, with `f(mid)` no larger than either end.
    Interior { lo: f64, mid: f64, hi: f64 },
    /// The objective kept decreasing up to the upper cap.
    UpperCap { x: f64, value: f64 },
    /// The objective kept decreasing down to the lower cap.
    LowerCap { x: f64, value: f64 },
}

/// Bracket a minimum of a quasiconvex `f` on `(0, ∞)` by doubling (or
/// halving) from `x0`, never leaving `[lower, upper]`.
pub fn bracket_geometric<F: FnMut(f64) -> f64>(mut f: F, x0: f64, lower: f64, upper: f64) -> Bracket {
    let f0 = f(x0);
    let up = (2.0 * x0).min(upper);
    let f_up = f(up);
    if f_up < f0 {
        let (mut prev, mut cur, mut f_cur) = (x0, up, f_up);
        loop {
            if cur >= upper {
                return Bracket::UpperCap { x: cur, value: f_cur };
            }
            let next = (2.0 * cur).min(upper);
            let f_next = f(next);
            if f_next >= f_cur {
                return Bracket::Interior { lo: prev, mid: cur, hi: next };
            }
            prev = cur;
            cur = next;
            f_cur = f_next;
        }
    }
    let down = (0.5 * x0).max(lower);
    let f_down = f(down);
    if f_down >= f0 {
        return Bracket::Interior { lo: down, mid: x0, hi: up };
    }
    let (mut prev, mut cur, mut f_cur) = (x0, down, f_down);
    loop {
        if cur <= lower {
            return Bracket::LowerCap { x: cur, value: f_cur };
        }
        let next = (0.5 * cur).max(lower);
        let f_next = f(next);
        if f_next >= f_cur {
            return Bracket::Interior { lo: next, mid: cur, hi: prev };
        }
        prev = cur;
        cur = next;
        f_cur = f_next;
    }
}

/// Minimize a quasiconvex function of a positive argument: geometric
/// bracketing from `x0`, then golden-section refinement in `ln x` to
/// relative width `rel_tol`. Returns `(x, value)`.
pub fn minimize_positive<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    lower: f64,
    upper: f64,
    rel_tol: f64,
) -> (f64, f64) {
    match bracket_geometric(&mut f, x0, lower, upper) {
        Bracket::Interior { lo, mid, hi } => {
            let f_mid = f(mid);
            let (ln_x, value) = golden_section_min(|s| f(s.exp()), lo.ln(), hi.ln(), rel_tol);
            if value <= f_mid {
                (ln_x.exp(), value)
            } else {
                (mid, f_mid)
            }
        }
        Bracket::UpperCap { x, value } | Bracket::LowerCap { x, value } => (x, value),
    }
}

/// Minimize `f` over a sorted grid of positive points, then refine with a
/// golden-section search in `ln x` between the neighbours of the best grid
/// point. Suitable for objectives that are unimodal only near the optimum.
pub fn grid_refine_min<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], rel_tol: f64) -> (f64, f64) {
    assert!(!grid.is_empty());
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best_i = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best_i] {
            best_i = i;
        }
    }
    let mut best = (grid[best_i], values[best_i]);
    if !best.1.is_finite() {
        return best;
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    if hi > lo {
        let (ln_x, v) = golden_section_min(|s| f(s.exp()), lo.ln(), hi.ln(), rel_tol);
        if v < best.1 {
            best = (ln_x.exp(), v);
        }
    }
    best
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `abs_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let budget = Cell::new(MAX_EVALUATIONS);
    simpson_step(f, a, b, fa, fm, fb, whole, abs_tol, MAX_DEPTH, &budget)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &Cell<u64>,
) -> Result<f64> {
    if budget.get() == 0 {
        return Err(Error::numerical(format!("adaptive quadrature exceeded its evaluation budget on [{a}, {b}]")));
    }
    budget.set(budget.get().saturating_sub(2));
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::numerical("quadrature produced a non-finite value"));
    }
    // Interval can no longer be split in floating point.
    let exhausted = m <= a || m >= b || lm <= a || rm >= b;
    // below this the difference is rounding noise
    let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if exhausted || (depth + MIN_DEPTH <= MAX_DEPTH && delta.abs() <= 15.0 * tol.max(noise)) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::numerical(format!(
            "adaptive quadrature did not converge on [{a}, {b}]"
        )));
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?;
    Ok(l + r)
}


/// Integral over `[0, t_max]` with panel edges clustered geometrically
/// around `0` and around each point of `focus`, so narrow peaks far from the
/// origin are resolved.
pub(crate) fn integrate_focused<F: Fn(f64) -> f64>(f: &F, t_max: f64, focus: &[f64], rel_tol: f64) -> Result<f64> {
    const PANELS: i32 = 40;
    let mut edges = vec![0.0, t_max];
    for j in 0..PANELS {
        let d = t_max * 2f64.powi(-j);
        edges.push(d);
        for &c in focus {
            edges.push((c - d).max(0.0));
            edges.push((c + d).min(t_max));
            edges.push(c.clamp(0.0, t_max));
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    // coarse pass to set the absolute scale
    let mut coarse = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / 8.0;
        let mut s = f(a) + f(b);
        for i in 1..8 {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        coarse += (s * h / 3.0).abs();
    }
    if coarse == 0.0 {
        return Ok(0.0);
    }
    let tol = rel_tol * coarse / edges.len() as f64;
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], tol)?;
    }
    Ok(total)
}

/// SplitMix64 finalizer: a 64-bit avalanche hash.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.3, -1.2, 2.5, 0.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() <= 1e-12 * naive.abs());
    }

    #[test]
    fn lse_does_not_overflow() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn exp_m1_minus_x_small_and_large() {
        for &x in &[1e-9f64, -3e-5, 0.1, -0.45, 0.7, 3.0, -4.0] {
            let reference = x.exp_m1() - x;
            let v = exp_m1_minus_x(x);
            if x.abs() > 0.1 {
                assert!((v - reference).abs() <= 1e-14 * reference.abs());
            }
            // leading term
            assert!((v / (x * x / 2.0) - 1.0).abs() < x.abs());
        }
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_section_min(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_reports_upper_cap_for_decreasing() {
        let b = bracket_geometric(|x| 1.0 / x, 1.0, 1e-3, 1e3);
        assert!(matches!(b, Bracket::UpperCap { .. }));
        let b = bracket_geometric(|x| x, 1.0, 1e-3, 1e3);
        assert!(matches!(b, Bracket::LowerCap { .. }));
        let b = bracket_geometric(|x| (x.ln() - 3.0).powi(2), 1.0, 1e-3, 1e3);
        match b {
            Bracket::Interior { lo, hi, .. } => assert!(lo < 3f64.exp() && 3f64.exp() < hi),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simpson_integrates_gaussian_moment() {
        let v = adaptive_simpson(&|t: f64| t * (-t * t / 2.0).exp(), 0.0, 40.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_focused(&|t: f64| t * (-t * t / 2.0).exp(), 40.0, &[], 1e-11).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mix64_is_an_avalanche() {
        assert_ne!(mix64(0), mix64(1));
        assert_eq!(mix64(12345), mix64(12345));
        assert!((mix64(1) ^ mix64(2)).count_ones() > 10);
    }
}
