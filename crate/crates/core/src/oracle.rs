//! Exhaustive exact solvers, used as ground truth for every approximate
//! allocator in this crate.
//!
//! All three solvers are deterministic: welfare ties are broken toward fewer
//! tested memberships and then lexicographically smaller member lists (the
//! single-test solver compares member lists only, see
//! [`brute_force_single_test`]).

use crate::error::{Error, Result};
use crate::population::Population;
use crate::regime::{Regime, Test};
use crate::welfare::{
    regime_welfare_exact_with_limit, subset_q_products, test_welfare,
    total_welfare_inclusion_exclusion,
};

/// Work caps for the exhaustive code paths.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    /// Cap on enumerated candidates (subset profiles, packings, families).
    pub max_subsets: u64,
    /// Cap on the number of individuals the exact evaluator may enumerate.
    pub max_enumerated_individuals: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_subsets: 10_000_000,
            max_enumerated_individuals: 25,
        }
    }
}

// ---------------------------------------------------------------------------
// Single test
// ---------------------------------------------------------------------------

/// Members of one distinct healthy-probability value, best utilities first.
struct QClass {
    q: f64,
    /// Sorted by (utility desc, index asc).
    members: Vec<usize>,
    /// prefix_u[k] = utility sum of the first k members.
    prefix_u: Vec<f64>,
}

fn q_classes(pop: &Population) -> Vec<QClass> {
    let mut classes: Vec<QClass> = Vec::new();
    for i in 0..pop.len() {
        if pop.q(i) == 0.0 {
            continue; // certainly infected: including them zeroes any test
        }
        let bits = pop.q(i).to_bits();
        match classes.iter_mut().find(|c| c.q.to_bits() == bits) {
            Some(c) => c.members.push(i),
            None => classes.push(QClass {
                q: pop.q(i),
                members: vec![i],
                prefix_u: Vec::new(),
            }),
        }
    }
    for c in &mut classes {
        c.members.sort_by(|&a, &b| {
            pop.u(b)
                .partial_cmp(&pop.u(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut acc = 0.0;
        c.prefix_u = std::iter::once(0.0)
            .chain(c.members.iter().map(|&i| {
                acc += pop.u(i);
                acc
            }))
            .collect();
    }
    classes
}

/// Number of count-profiles over the classes with total size at most `cap`.
fn profile_count(classes: &[QClass], cap: usize) -> u128 {
    // counts[r] = number of ways to fill the classes seen so far with total r
    let mut counts = vec![0u128; cap + 1];
    counts[0] = 1;
    for c in classes {
        let take_max = c.members.len().min(cap);
        let mut next = vec![0u128; cap + 1];
        for r in 0..=cap {
            if counts[r] == 0 {
                continue;
            }
            for k in 0..=take_max.min(cap - r) {
                next[r + k] = next[r + k].saturating_add(counts[r]);
            }
        }
        counts = next;
    }
    counts.iter().sum()
}

/// Welfare-maximal single pooled test of size 1..=G.
///
/// Enumerates count profiles over the distinct healthy-probability classes
/// (within a class, only the highest-utility members can appear in an
/// optimum), which is exhaustive over a lossless quotient of the subset
/// space. Ties are broken toward the lexicographically smallest sorted
/// member list.
pub fn brute_force_single_test(pop: &Population, pool_cap: usize) -> Result<(Test, f64)> {
    brute_force_single_test_with_limits(pop, pool_cap, &OracleLimits::default())
}

pub fn brute_force_single_test_with_limits(
    pop: &Population,
    pool_cap: usize,
    limits: &OracleLimits,
) -> Result<(Test, f64)> {
    if pop.is_empty() {
        return Err(Error::validation("population is empty"));
    }
    if pool_cap == 0 {
        return Err(Error::validation("pool cap must be at least 1"));
    }
    let cap = pool_cap.min(pop.len());
    let classes = q_classes(pop);
    let n_profiles = profile_count(&classes, cap);
    if n_profiles > limits.max_subsets as u128 {
        return Err(Error::Capacity {
            what: "single-test candidate profiles",
            required: n_profiles,
            limit: limits.max_subsets as u128,
        });
    }

    struct Search<'a> {
        classes: &'a [QClass],
        cap: usize,
        counts: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn realize(&self) -> Vec<usize> {
            let mut members: Vec<usize> = self
                .counts
                .iter()
                .enumerate()
                .flat_map(|(c, &k)| self.classes[c].members[..k].iter().copied())
                .collect();
            members.sort_unstable();
            members
        }

        fn go(&mut self, c: usize, used: usize, prob: f64, usum: f64) {
            if c == self.classes.len() {
                if used == 0 {
                    return;
                }
                let w = prob * usum;
                match &self.best {
                    Some((bw, _)) if w < *bw => {}
                    Some((bw, bm)) if w == *bw => {
                        let members = self.realize();
                        if members < *bm {
                            self.best = Some((w, members));
                        }
                    }
                    _ => {
                        let members = self.realize();
                        self.best = Some((w, members));
                    }
                }
                return;
            }
            let class = &self.classes[c];
            let take_max = class.members.len().min(self.cap - used);
            let mut p = prob;
            for k in 0..=take_max {
                self.counts[c] = k;
                self.go(c + 1, used + k, p, usum + class.prefix_u[k]);
                p *= class.q;
            }
            self.counts[c] = 0;
        }
    }

    let mut search = Search {
        classes: &classes,
        cap,
        counts: vec![0; classes.len()],
        best: None,
    };
    search.go(0, 0, 1.0, 0.0);

    match search.best {
        Some((_, members)) if !members.is_empty() => {
            let test = Test::new(members)?;
            let w = test_welfare(pop, &test)?;
            Ok((test, w))
        }
        // Every test has welfare 0 (all q = 0): the lexicographically
        // smallest candidate is the first singleton.
        _ => Ok((Test::new(vec![0])?, 0.0)),
    }
}

// ---------------------------------------------------------------------------
// Non-overlapping regimes
// ---------------------------------------------------------------------------

/// Welfare-maximal non-overlapping regime of at most `budget` tests.
///
/// Memoized packing search keyed on (remaining-individual bitmask, tests
/// left). Canonical output: tests sorted by smallest member; welfare ties
/// prefer fewer memberships, then lexicographically smaller tests.
pub fn brute_force_nonoverlapping(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
) -> Result<(Regime, f64)> {
    brute_force_nonoverlapping_with_limits(pop, pool_cap, budget, &OracleLimits::default())
}

pub fn brute_force_nonoverlapping_with_limits(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    limits: &OracleLimits,
) -> Result<(Regime, f64)> {
    if pool_cap == 0 || budget == 0 {
        return Err(Error::validation("budget and pool cap must be at least 1"));
    }
    let n = pop.len();
    let work = 3u128
        .checked_pow(n as u32)
        .and_then(|w| w.checked_mul(budget as u128 + 1))
        .unwrap_or(u128::MAX);
    if work > limits.max_subsets as u128 {
        return Err(Error::Capacity {
            what: "non-overlapping packing search",
            required: work,
            limit: limits.max_subsets as u128,
        });
    }

    let full = (1usize << n) - 1;
    let q_prod = subset_q_products(pop, n);
    let mut u_sum = vec![0.0f64; 1 << n];
    for mask in 1usize..=full.max(0) {
        let low = mask.trailing_zeros() as usize;
        u_sum[mask] = u_sum[mask & (mask - 1)] + pop.u(low);
    }
    let welfare = |mask: usize| q_prod[mask] * u_sum[mask];

    // value[b][mask], member_cost[b][mask]: best welfare with <= b disjoint
    // tests inside mask, and the fewest memberships attaining it.
    let rows = budget + 1;
    let mut value = vec![0.0f64; rows << n];
    let mut member_cost = vec![0u32; rows << n];
    for b in 1..=budget {
        let (prev_rows, cur_row) = value.split_at_mut(b << n);
        let prev = &prev_rows[(b - 1) << n..];
        let (prev_cost_rows, cur_cost_row) = member_cost.split_at_mut(b << n);
        let prev_cost = &prev_cost_rows[(b - 1) << n..];
        for mask in 0..=full {
            let mut best_v = prev[mask];
            let mut best_c = prev_cost[mask];
            let mut sub = mask;
            while sub != 0 {
                if sub.count_ones() as usize <= pool_cap {
                    let w = welfare(sub);
                    if w > 0.0 {
                        let v = w + prev[mask ^ sub];
                        let c = sub.count_ones() + prev_cost[mask ^ sub];
                        if v > best_v || (v == best_v && c < best_c) {
                            best_v = v;
                            best_c = c;
                        }
                    }
                }
                sub = (sub - 1) & mask;
            }
            cur_row[mask] = best_v;
            cur_cost_row[mask] = best_c;
        }
    }

    // Reconstruct: repeatedly emit the lexicographically smallest test
    // consistent with the optimal (value, membership) pair.
    let mask_to_members = |mask: usize| -> Vec<usize> {
        (0..n).filter(|i| mask & (1 << i) != 0).collect()
    };
    let mut tests: Vec<Test> = Vec::new();
    let mut mask = full;
    let mut b = budget;
    while b > 0 && value[(b << n) + mask] > 0.0 {
        let target_v = value[(b << n) + mask];
        let target_c = member_cost[(b << n) + mask];
        let mut chosen: Option<(usize, Vec<usize>)> = None;
        let mut sub = mask;
        while sub != 0 {
            if sub.count_ones() as usize <= pool_cap {
                let w = welfare(sub);
                if w > 0.0
                    && w + value[((b - 1) << n) + (mask ^ sub)] == target_v
                    && sub.count_ones() + member_cost[((b - 1) << n) + (mask ^ sub)] == target_c
                {
                    let members = mask_to_members(sub);
                    if chosen.as_ref().is_none_or(|(_, cm)| members < *cm) {
                        chosen = Some((sub, members));
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        match chosen {
            Some((sub, members)) => {
                tests.push(Test::new(members)?);
                mask ^= sub;
                b -= 1;
            }
            // Optimum at this level flows through the skip branch.
            None => b -= 1,
        }
    }
    tests.sort_by(|a, b| a.members().first().cmp(&b.members().first()));

    let regime = Regime::new(budget, pool_cap, tests)?;
    let total = crate::welfare::regime_welfare_nonoverlapping(pop, &regime)?.total;
    debug_assert!((total - value[(budget << n) + full]).abs() < 1e-9);
    Ok((regime, total))
}

// ---------------------------------------------------------------------------
// Overlapping regimes
// ---------------------------------------------------------------------------

pub(crate) fn multiset_count(items: u128, picks: u32) -> u128 {
    // C(items + picks - 1, picks), saturating
    let mut acc: u128 = 1;
    for j in 0..picks as u128 {
        acc = match acc.checked_mul(items + picks as u128 - 1 - j) {
            Some(v) => v / (j + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Welfare-maximal regime in which each individual appears in at most
/// `max_overlap` tests.
///
/// Pure enumeration over unordered families of candidate tests (welfare is
/// invariant under test reordering, so each multiset is explored once).
pub fn brute_force_overlapping(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    max_overlap: usize,
) -> Result<(Regime, f64)> {
    brute_force_overlapping_with_limits(pop, pool_cap, budget, max_overlap, &OracleLimits::default())
}

pub fn brute_force_overlapping_with_limits(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    max_overlap: usize,
    limits: &OracleLimits,
) -> Result<(Regime, f64)> {
    if pool_cap == 0 || budget == 0 || max_overlap == 0 {
        return Err(Error::validation(
            "budget, pool cap and overlap cap must be at least 1",
        ));
    }
    let n = pop.len();
    if n == 0 {
        return Err(Error::validation("population is empty"));
    }
    if n > 20 {
        return Err(Error::Capacity {
            what: "overlapping search population",
            required: n as u128,
            limit: 20,
        });
    }
    let cap = pool_cap.min(n);
    let candidates: Vec<u64> = (1u64..(1 << n))
        .filter(|m| (m.count_ones() as usize) <= cap)
        .collect();
    let families = multiset_count(candidates.len() as u128, budget as u32);
    if families > limits.max_subsets as u128 {
        return Err(Error::Capacity {
            what: "overlapping test families",
            required: families,
            limit: limits.max_subsets as u128,
        });
    }

    let q_prod = subset_q_products(pop, n);
    let utilities: Vec<f64> = (0..n).map(|i| pop.u(i)).collect();

    struct Search<'a> {
        candidates: &'a [u64],
        utilities: &'a [f64],
        q_prod: &'a [f64],
        budget: usize,
        max_overlap: usize,
        uses: Vec<usize>,
        stack: Vec<u64>,
        best: Option<(f64, usize, Vec<Vec<usize>>)>,
    }

    impl Search<'_> {
        fn canonical(&self, masks: &[u64]) -> Vec<Vec<usize>> {
            let mut tests: Vec<Vec<usize>> = masks
                .iter()
                .map(|&m| (0..64).filter(|i| m & (1 << i) != 0).collect())
                .collect();
            tests.sort();
            tests
        }

        fn consider(&mut self) {
            let w = total_welfare_inclusion_exclusion(self.utilities, self.q_prod, &self.stack);
            let memberships: usize =
                self.stack.iter().map(|m| m.count_ones() as usize).sum();
            let better = match &self.best {
                None => true,
                Some((bw, bm, bc)) => {
                    w > *bw
                        || (w == *bw
                            && (memberships < *bm
                                || (memberships == *bm && self.canonical(&self.stack) < *bc)))
                }
            };
            if better {
                let canonical = self.canonical(&self.stack);
                self.best = Some((w, memberships, canonical));
            }
        }

        fn go(&mut self, first_candidate: usize) {
            if self.stack.len() == self.budget {
                return;
            }
            for ci in first_candidate..self.candidates.len() {
                let mask = self.candidates[ci];
                let mut ok = true;
                let mut m = mask;
                while m != 0 {
                    let i = m.trailing_zeros() as usize;
                    m &= m - 1;
                    if self.uses[i] + 1 > self.max_overlap {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let mut m = mask;
                while m != 0 {
                    let i = m.trailing_zeros() as usize;
                    m &= m - 1;
                    self.uses[i] += 1;
                }
                self.stack.push(mask);
                self.consider();
                self.go(ci);
                self.stack.pop();
                let mut m = mask;
                while m != 0 {
                    let i = m.trailing_zeros() as usize;
                    m &= m - 1;
                    self.uses[i] -= 1;
                }
            }
        }
    }

    let mut search = Search {
        candidates: &candidates,
        utilities: &utilities,
        q_prod: &q_prod,
        budget,
        max_overlap,
        uses: vec![0; n],
        stack: Vec::new(),
        best: None,
    };
    search.go(0);

    match search.best {
        Some((_, _, tests)) if !tests.is_empty() => {
            let tests = tests
                .into_iter()
                .map(Test::new)
                .collect::<Result<Vec<_>>>()?;
            let regime = Regime::new(budget, pool_cap, tests)?;
            let total = regime_welfare_exact_with_limit(
                pop,
                &regime,
                limits.max_enumerated_individuals,
            )?
            .total;
            Ok((regime, total))
        }
        _ => Ok((Regime::new(budget, pool_cap, vec![])?, 0.0)),
    }
}

// ---------------------------------------------------------------------------
// Structural checks on optima
// ---------------------------------------------------------------------------

/// Memberships `(i, j)` whose test can never be the earliest negative test
/// clearing `i`. An optimum (suitably normalized) has none.
pub fn pivotal_support_violations(
    pop: &Population,
    regime: &Regime,
) -> Result<Vec<(usize, usize)>> {
    let report = regime_welfare_exact_with_limit(pop, regime, 25)?;
    let pivotal = report.pivotal.expect("exact evaluator fills pivotal");
    let mut violations = Vec::new();
    for (j, t) in regime.tests.iter().enumerate() {
        for &i in t.members() {
            if pivotal[i][j] <= 0.0 {
                violations.push((i, j));
            }
        }
    }
    Ok(violations)
}

/// No test of an optimal regime splits into two simultaneously unlikely
/// halves: for every test t and S ⊂ t, q_S < alpha implies
/// q_{t \ S} >= 1 - alpha.
pub fn split_bound_holds(pop: &Population, regime: &Regime, alpha: f64) -> Result<bool> {
    for t in &regime.tests {
        let members = t.members();
        if members.len() > 20 {
            return Err(Error::Capacity {
                what: "split-bound subset enumeration",
                required: members.len() as u128,
                limit: 20,
            });
        }
        for pick in 1usize..(1usize << members.len()) - 1 {
            let mut q_s = 1.0;
            let mut q_rest = 1.0;
            for (k, &i) in members.iter().enumerate() {
                if pick & (1 << k) != 0 {
                    q_s *= pop.q(i);
                } else {
                    q_rest *= pop.q(i);
                }
            }
            if q_s < alpha && q_rest < 1.0 - alpha - 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
