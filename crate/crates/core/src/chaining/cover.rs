use serde::{Deserialize, Serialize};

use super::{DeflatedSet, FunctionFamily};
use crate::error::{Error, Result};

/// Largest `|𝒜|` for which `ε_ℓ` is found by enumerating subsets.
pub const EXHAUSTIVE_EPSILON_MAX: usize = 12;
/// Largest `|𝒜|` for which `γ` is also found by enumerating nested sequences.
pub const EXHAUSTIVE_GAMMA_MAX: usize = 8;

/// `2^{2^ℓ}`, saturating at `usize::MAX`.
pub fn level_cap(level: u32) -> usize {
    if level >= 6 {
        usize::MAX
    } else {
        1usize.checked_shl(1u32 << level).unwrap_or(usize::MAX)
    }
}

/// Cardinality cap of `𝒜_ℓ` in an admissible sequence: `1` at `ℓ = 0`
/// (`𝒜_0 = {0}`), `2^{2^ℓ}` afterwards.
pub fn gamma_level_cap(level: u32) -> usize {
    if level == 0 {
        1
    } else {
        level_cap(level)
    }
}

/// Rate `(2^{ℓ+3} + ℓ + 2) log 2 / n` at which level `ℓ` of `γ` is weighted.
pub fn gamma_rate(level: u32, n: u64) -> f64 {
    (2f64.powi(level as i32 + 3) + level as f64 + 2.0) * std::f64::consts::LN_2 / n as f64
}

/// `ℓ*`: the first level whose cap reaches `size`. Terms from `ℓ*` on vanish.
fn depth(size: usize, cap: fn(u32) -> usize) -> u32 {
    let mut l = 0;
    while cap(l) < size {
        l += 1;
    }
    l
}

fn distance_to(distances: &[Vec<f64>], a: usize, set: &[usize]) -> f64 {
    set.iter().map(|&q| distances[a][q]).fold(f64::INFINITY, f64::min)
}

fn radius(distances: &[Vec<f64>], set: &[usize]) -> f64 {
    (0..distances.len()).map(|a| distance_to(distances, a, set)).fold(0.0, f64::max)
}

/// Calls `visit` on every `k`-subset of `pool`, in lexicographic order.
fn for_each_subset(pool: &[usize], k: usize, mut visit: impl FnMut(&[usize])) {
    let n = pool.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        visit(&chosen);
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in pos..k {
            chosen[j] = pool[idx[j]];
        }
    }
}

/// A subset `𝒬` together with the covering radius it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub level: u32,
    pub cap: usize,
    pub value: f64,
    pub subset: Vec<usize>,
    pub exhaustive: bool,
}

impl CoverCertificate {
    /// `sup_a ‖a - 𝒬‖` recomputed from the distance matrix.
    pub fn replay(&self, distances: &[Vec<f64>]) -> f64 {
        radius(distances, &self.subset)
    }
}

/// `ε_ℓ(𝒜)`: exact by enumeration when `|𝒜| ≤ 12`, otherwise a greedy
/// farthest-first cover seeded at the 1-center.
pub fn epsilon_ell(set: &DeflatedSet, level: u32) -> CoverCertificate {
    let d = &set.distances;
    let m = d.len();
    let cap = level_cap(level);
    if cap >= m {
        return CoverCertificate { level, cap, value: 0.0, subset: (0..m).collect(), exhaustive: true };
    }
    if m <= EXHAUSTIVE_EPSILON_MAX {
        let pool: Vec<usize> = (0..m).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for_each_subset(&pool, cap, |s| {
            let v = radius(d, s);
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, s.to_vec()));
            }
        });
        let (value, subset) = best.expect("at least one subset");
        return CoverCertificate { level, cap, value, subset, exhaustive: true };
    }
    let eccentricity = |i: usize| d[i].iter().copied().fold(0.0, f64::max);
    let first = (0..m).fold(0, |b, i| if eccentricity(i) < eccentricity(b) { i } else { b });
    let mut subset = vec![first];
    let mut gap: Vec<f64> = d[first].clone();
    while subset.len() < cap {
        let next = (0..m).fold(0, |b, i| if gap[i] > gap[b] { i } else { b });
        if gap[next] <= 0.0 {
            break;
        }
        subset.push(next);
        for (i, g) in gap.iter_mut().enumerate() {
            *g = g.min(d[i][next]);
        }
    }
    let value = radius(d, &subset);
    CoverCertificate { level, cap, value, subset, exhaustive: false }
}

/// Whether a `γ` sequence came from the greedy construction or enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMethod {
    Greedy,
    Exhaustive,
}

/// A nested sequence `𝒜_0 ⊆ … ⊆ 𝒜_{ℓ*-1}` with its weights; `𝒜_ℓ = 𝒜` from
/// `ℓ*` on and contributes nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCertificate {
    pub method: GammaMethod,
    pub levels: Vec<Vec<usize>>,
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: f64,
    /// The element attaining the supremum.
    pub argmax: usize,
}

fn gamma_value(distances: &[Vec<f64>], levels: &[Vec<usize>], weights: &[f64]) -> (f64, usize) {
    let mut best = (0.0, 0);
    for a in 0..distances.len() {
        let v: f64 = levels.iter().zip(weights).map(|(l, w)| w * distance_to(distances, a, l)).sum();
        if v > best.0 {
            best = (v, a);
        }
    }
    best
}

impl GammaCertificate {
    /// `sup_a Σ_ℓ ω_ℓ ‖a - 𝒜_ℓ‖` recomputed from the distance matrix.
    pub fn replay(&self, distances: &[Vec<f64>]) -> f64 {
        gamma_value(distances, &self.levels, &self.weights).0
    }

    /// Checks nesting, `𝒜_0 = {zero}`, and the cardinality caps.
    pub fn check_structure(&self, zero: usize) -> bool {
        let starts = self.levels.first().is_none_or(|l| l == &vec![zero]);
        let capped = self.levels.iter().enumerate().all(|(l, s)| s.len() <= gamma_level_cap(l as u32));
        let nested = self.levels.windows(2).all(|w| w[0].iter().all(|x| w[1].contains(x)));
        starts && capped && nested
    }
}

fn check_weights(set: &DeflatedSet, weights: &[f64]) -> Result<()> {
    let need = depth(set.distances.len(), gamma_level_cap) as usize;
    if weights.len() != need {
        return Err(Error::input(format!("γ needs {need} level weights for a set of size {}, got {}", set.len(), weights.len())));
    }
    Ok(())
}

/// Greedy nested sequence: each level extends the previous one by
/// farthest-first additions up to its cap.
pub fn gamma_greedy(set: &DeflatedSet, weights: &[f64]) -> Result<GammaCertificate> {
    check_weights(set, weights)?;
    let d = &set.distances;
    let m = d.len();
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(weights.len());
    let mut current = vec![set.zero];
    let mut gap: Vec<f64> = d[set.zero].clone();
    for l in 0..weights.len() {
        let cap = gamma_level_cap(l as u32).min(m);
        while current.len() < cap {
            let next = (0..m).fold(0, |b, i| if gap[i] > gap[b] { i } else { b });
            if gap[next] <= 0.0 {
                break;
            }
            current.push(next);
            for (i, g) in gap.iter_mut().enumerate() {
                *g = g.min(d[i][next]);
            }
        }
        levels.push(current.clone());
    }
    let (value, argmax) = gamma_value(d, &levels, weights);
    Ok(GammaCertificate { method: GammaMethod::Greedy, levels, rates: Vec::new(), weights: weights.to_vec(), value, argmax })
}

/// Optimal nested sequence by enumeration, for `|𝒜| ≤ 8`.
pub fn gamma_exhaustive(set: &DeflatedSet, weights: &[f64]) -> Result<GammaCertificate> {
    check_weights(set, weights)?;
    let d = &set.distances;
    let m = d.len();
    if m > EXHAUSTIVE_GAMMA_MAX {
        return Err(Error::input(format!("exhaustive γ supports at most {EXHAUSTIVE_GAMMA_MAX} elements, got {m}")));
    }
    let mut best: Option<(f64, usize, Vec<Vec<usize>>)> = None;
    let mut stack = vec![vec![set.zero]];
    extend_levels(d, weights, &mut stack, &mut best);
    let (value, argmax, levels) = best.unwrap_or((0.0, 0, Vec::new()));
    Ok(GammaCertificate { method: GammaMethod::Exhaustive, levels, rates: Vec::new(), weights: weights.to_vec(), value, argmax })
}

fn extend_levels(
    d: &[Vec<f64>],
    weights: &[f64],
    stack: &mut Vec<Vec<usize>>,
    best: &mut Option<(f64, usize, Vec<Vec<usize>>)>,
) {
    if stack.len() >= weights.len() {
        let levels: Vec<Vec<usize>> = stack[..weights.len()].to_vec();
        let (v, a) = gamma_value(d, &levels, weights);
        if best.as_ref().is_none_or(|b| v < b.0) {
            *best = Some((v, a, levels));
        }
        return;
    }
    let prev = stack.last().expect("level 0 present").clone();
    let cap = gamma_level_cap(stack.len() as u32).min(d.len());
    let pool: Vec<usize> = (0..d.len()).filter(|i| !prev.contains(i)).collect();
    let mut additions = Vec::new();
    for_each_subset(&pool, cap - prev.len(), |s| additions.push(s.to_vec()));
    for add in additions {
        let mut next = prev.clone();
        next.extend(add);
        stack.push(next);
        extend_levels(d, weights, stack, best);
        stack.pop();
    }
}

/// `γ(𝒜)` with weights `ω_ℓ = 2 w_{(2^{ℓ+3}+ℓ+2) log 2 / n}` from the
/// family's class coefficient. The greedy sequence is always computed; for
/// `|𝒜| ≤ 8` the enumerated optimum replaces it when strictly better.
pub fn gamma_functional(set: &DeflatedSet, family: &FunctionFamily, n: u64) -> Result<GammaCertificate> {
    if n == 0 {
        return Err(Error::input("sample size n must be positive"));
    }
    let levels = depth(set.distances.len(), gamma_level_cap);
    let rates: Vec<f64> = (0..levels).map(|l| gamma_rate(l, n)).collect();
    let weights = rates.iter().map(|&c| family.class_wr(c).map(|w| 2.0 * w)).collect::<Result<Vec<f64>>>()?;
    let mut cert = gamma_greedy(set, &weights)?;
    if set.distances.len() <= EXHAUSTIVE_GAMMA_MAX {
        let exact = gamma_exhaustive(set, &weights)?;
        if exact.value < cert.value {
            cert = exact;
        }
    }
    cert.rates = rates;
    Ok(cert)
}

/// Number of nonzero `ε_ℓ` terms for a set of this size.
pub(crate) fn epsilon_depth(size: usize) -> u32 {
    depth(size, level_cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DeflatedSet {
        let d = points.iter().map(|a| points.iter().map(|b| (a - b).abs()).collect()).collect();
        DeflatedSet::from_distances(d, 0).unwrap()
    }

    #[test]
    fn caps_and_rates() {
        assert_eq!(level_cap(0), 2);
        assert_eq!(level_cap(1), 4);
        assert_eq!(level_cap(2), 16);
        assert_eq!(level_cap(5), 1 << 32);
        assert_eq!(level_cap(9), usize::MAX);
        assert_eq!(gamma_level_cap(0), 1);
        assert!((gamma_rate(0, 1) - 10.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((gamma_rate(1, 1) - 19.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((gamma_rate(2, 2) - 18.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn subsets_are_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_subset(&[3, 5, 7, 9], 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![3, 5], vec![3, 7], vec![3, 9], vec![5, 7], vec![5, 9], vec![7, 9]]);
        let mut count = 0;
        for_each_subset(&[1, 2], 0, |_| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn epsilon_trivial_cases() {
        let set = line(&[0.0]);
        let c = epsilon_ell(&set, 0);
        assert_eq!((c.value, c.subset.clone()), (0.0, vec![0]));
        let set = line(&[0.0, 1.0, 3.0]);
        assert_eq!(epsilon_ell(&set, 1).value, 0.0);
    }

    #[test]
    fn epsilon_six_points_by_hand() {
        // pairs such as {1, 7} leave every point within 2
        let pts = [0.0, 1.0, 2.0, 6.0, 7.0, 9.0];
        let set = line(&pts);
        let c = epsilon_ell(&set, 0);
        let mut best = f64::INFINITY;
        for i in 0..6 {
            for j in i + 1..6 {
                let r = pts.iter().map(|p| (p - pts[i]).abs().min((p - pts[j]).abs())).fold(0.0, f64::max);
                best = best.min(r);
            }
        }
        assert_eq!(c.value, best);
        assert_eq!(c.value, 2.0);
        assert_eq!(c.replay(&set.distances), c.value);
        assert!(c.exhaustive);
    }

    #[test]
    fn epsilon_greedy_is_a_valid_cover() {
        let pts: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        let set = line(&pts);
        let c = epsilon_ell(&set, 1);
        assert!(!c.exhaustive);
        assert_eq!(c.subset.len(), 4);
        assert_eq!(c.replay(&set.distances), c.value);
    }

    #[test]
    fn gamma_singleton_and_pair() {
        let set = line(&[0.0]);
        let g = gamma_greedy(&set, &[]).unwrap();
        assert_eq!(g.value, 0.0);
        let set = line(&[0.0, 2.5]);
        let g = gamma_greedy(&set, &[0.7]).unwrap();
        assert!((g.value - 0.7 * 2.5).abs() < 1e-15);
        assert!(gamma_greedy(&set, &[0.7, 0.1]).is_err());
    }

    #[test]
    fn gamma_exhaustive_never_worse_and_nested() {
        let pts = [0.0, 5.0, 5.5, -3.0, 9.0, 1.0, -7.0, 2.2];
        let set = line(&pts);
        // |𝒜| = 8 needs levels 0 and 1
        let w = [1.0, 0.6];
        let greedy = gamma_greedy(&set, &w).unwrap();
        let exact = gamma_exhaustive(&set, &w).unwrap();
        assert!(exact.value <= greedy.value);
        for c in [&greedy, &exact] {
            assert!(c.check_structure(0));
            assert_eq!(c.replay(&set.distances), c.value);
            assert_eq!(c.levels[1].len(), 4);
        }
    }

    #[test]
    fn exhaustive_gamma_rejects_large_sets() {
        let pts: Vec<f64> = (0..9).map(f64::from).collect();
        assert!(gamma_exhaustive(&line(&pts), &[1.0, 1.0]).is_err());
    }
}
