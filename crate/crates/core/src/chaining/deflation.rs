use serde::{Deserialize, Serialize};

use super::FunctionFamily;
use crate::cgf::TabulatedFunction;
use crate::error::{Error, Result};

const NORM_SLACK: f64 = 1e-12;

/// A deflation map `A: 𝓕 → 𝓕` with `|A[𝓕]| ≤ e^k`, stored as member indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationPlan {
    pub k: u32,
    /// Center budget `⌊e^k⌋`.
    pub budget: usize,
    /// Centers in the order they were chosen; the first is the zero member.
    pub centers: Vec<usize>,
    /// `assignment[i]` is the index of `A[f_i]`.
    pub assignment: Vec<usize>,
}

fn center_budget(k: u32) -> usize {
    let e = (k as f64).exp().floor();
    if e >= usize::MAX as f64 {
        usize::MAX
    } else {
        e as usize
    }
}

/// Greedy k-center deflation: up to `⌊e^k⌋` centers by farthest-first
/// traversal from `0`, then each member goes to its nearest center among
/// those no larger in norm than itself (ties to the smallest index).
pub fn build_deflation(family: &FunctionFamily, k: u32) -> DeflationPlan {
    build_deflation_with_budget(family, k, center_budget(k))
}

/// [`build_deflation`] with an explicit center budget `budget ≤ ⌊e^k⌋`.
pub fn build_deflation_with_budget(family: &FunctionFamily, k: u32, budget: usize) -> DeflationPlan {
    let m = family.len();
    let budget = budget.clamp(1, center_budget(k));
    let zero = family.zero_index();
    let mut centers = vec![zero];
    let mut gap: Vec<f64> = (0..m).map(|i| family.distance(i, zero)).collect();
    while centers.len() < budget.min(m) {
        let mut best: Option<(usize, f64)> = None;
        for (i, &g) in gap.iter().enumerate() {
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let (next, g) = best.expect("family is nonempty");
        if g <= 0.0 {
            break;
        }
        centers.push(next);
        for (i, slot) in gap.iter_mut().enumerate() {
            *slot = slot.min(family.distance(i, next));
        }
    }
    let mut by_index = centers.clone();
    by_index.sort_unstable();
    let assignment = (0..m)
        .map(|i| {
            let own = family.member_norm(i);
            let mut best = (zero, family.distance(i, zero));
            for &c in &by_index {
                if family.member_norm(c) > own + NORM_SLACK {
                    continue;
                }
                let d = family.distance(i, c);
                if d < best.1 || (d == best.1 && c < best.0) {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect();
    DeflationPlan { k, budget, centers, assignment }
}

impl DeflationPlan {
    /// The plan `A = 0` (standard chaining).
    pub fn trivial(family: &FunctionFamily) -> Self {
        let zero = family.zero_index();
        Self { k: 0, budget: 1, centers: vec![zero], assignment: vec![zero; family.len()] }
    }

    /// Checks that the plan belongs to `family` and satisfies
    /// `‖A[f]‖ ≤ ‖f‖`, `A[0] = 0` and `|A[𝓕]| ≤ e^k`.
    pub fn validate(&self, family: &FunctionFamily) -> Result<()> {
        let m = family.len();
        if self.assignment.len() != m {
            return Err(Error::input(format!(
                "plan assigns {} members but the family has {m}",
                self.assignment.len()
            )));
        }
        if self.assignment.iter().chain(&self.centers).any(|&a| a >= m) {
            return Err(Error::input("plan refers to a member outside the family"));
        }
        if self.assignment[family.zero_index()] != family.zero_index() {
            return Err(Error::input("plan must map the zero member to itself"));
        }
        for (i, &a) in self.assignment.iter().enumerate() {
            if family.member_norm(a) > family.member_norm(i) + NORM_SLACK {
                return Err(Error::input(format!(
                    "plan maps `{}` to the larger `{}`",
                    family.names()[i],
                    family.names()[a]
                )));
            }
        }
        let mut range = self.assignment.clone();
        range.sort_unstable();
        range.dedup();
        if range.len() > center_budget(self.k) {
            return Err(Error::input(format!("plan uses {} centers, more than e^{}", range.len(), self.k)));
        }
        Ok(())
    }

    /// The deflated set `𝒜 = {f - A[f]}` with duplicates merged.
    pub fn deflated(&self, family: &FunctionFamily) -> Result<DeflatedSet> {
        self.validate(family)?;
        let mut functions: Vec<TabulatedFunction> = Vec::new();
        let mut sources: Vec<Vec<usize>> = Vec::new();
        let mut zero = None;
        for (i, &a) in self.assignment.iter().enumerate() {
            let h = family.member(i).sub(family.member(a));
            match functions.iter().position(|g| g == &h) {
                Some(j) => sources[j].push(i),
                None => {
                    if h.is_zero() {
                        zero = Some(functions.len());
                    }
                    functions.push(h);
                    sources.push(vec![i]);
                }
            }
        }
        let zero = zero.expect("the zero member deflates to zero");
        let distances = family.distance_matrix(&functions)?;
        Ok(DeflatedSet { functions, sources, zero, distances })
    }
}

/// `𝒜` with its distance matrix; element `i` came from members `sources[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatedSet {
    pub functions: Vec<TabulatedFunction>,
    pub sources: Vec<Vec<usize>>,
    pub zero: usize,
    pub distances: Vec<Vec<f64>>,
}

impl DeflatedSet {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// A set given only by its distance matrix, for combinatorial routines.
    pub fn from_distances(distances: Vec<Vec<f64>>, zero: usize) -> Result<Self> {
        let m = distances.len();
        if m == 0 || zero >= m || distances.iter().any(|row| row.len() != m) {
            return Err(Error::input("distance matrix must be square and contain the zero element"));
        }
        Ok(Self { functions: Vec::new(), sources: (0..m).map(|i| vec![i]).collect(), zero, distances })
    }
}
