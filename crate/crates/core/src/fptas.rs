//! Approximation scheme for the optimal single pooled test with a size cap.
//!
//! Utilities are scaled down by a factor `kappa` and floored to integers; a
//! dynamic program then finds, for every scaled-utility sum and pool size,
//! the most-likely-negative subset of the high-probability individuals
//! (those with q >= 1/2 — an optimal test contains at most one individual
//! below that threshold). Maximizing the scaled objective over subset sums,
//! pool sizes and the choice of low-probability guest yields a test whose
//! welfare is within a (1 - epsilon) factor of optimal.

use crate::error::{Error, Result};
use crate::population::Population;
use crate::regime::Test;
use crate::welfare::test_welfare;

/// Scaling parameters derived from a population and a target accuracy.
#[derive(Debug, Clone)]
pub struct FptasConfig {
    pub epsilon: f64,
    /// Utility scale factor; scaled utilities are floor(u / kappa).
    pub kappa: f64,
    /// Indices with healthy probability at least 1/2, ascending.
    pub n_half: Vec<usize>,
}

impl FptasConfig {
    /// Derive kappa from the most valuable high-probability individual.
    ///
    /// Only individuals with positive utility and positive healthy
    /// probability are considered viable.
    pub fn new(pop: &Population, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation(format!(
                "epsilon {epsilon} outside (0, 1)"
            )));
        }
        let viable: Vec<usize> = (0..pop.len())
            .filter(|&i| pop.q(i) > 0.0 && pop.u(i) > 0.0)
            .collect();
        let n_half: Vec<usize> = viable.iter().copied().filter(|&i| pop.q(i) >= 0.5).collect();
        let max_u = n_half.iter().map(|&i| pop.u(i)).fold(0.0f64, f64::max);
        let kappa = if max_u > 0.0 {
            epsilon * 0.5 * max_u / viable.len() as f64
        } else {
            0.0
        };
        Ok(FptasConfig { epsilon, kappa, n_half })
    }
}

/// Table of P(i, C, L): the maximum probability that a subset of the first
/// `i` candidates is all-healthy, over subsets with scaled-utility sum
/// exactly `C` and size exactly `L`. Zero marks unreachable cells.
pub struct BestSubsetDp {
    q: Vec<f64>,
    util: Vec<u64>,
    c_max: usize,
    l_max: usize,
    /// Row-major [i][C][L], i in 0..=n with an all-zero base row.
    table: Vec<f64>,
}

impl BestSubsetDp {
    pub fn new(q: &[f64], util: &[u64], l_max: usize) -> Self {
        assert_eq!(q.len(), util.len());
        let n = q.len();
        let c_max = util.iter().sum::<u64>() as usize;
        let row = (c_max + 1) * (l_max + 1);
        let mut table = vec![0.0f64; (n + 1) * row];
        for i in 1..=n {
            let u_i = util[i - 1] as usize;
            let q_i = q[i - 1];
            for c in 1..=c_max {
                for l in 1..=l_max {
                    let exclude = table[(i - 1) * row + c * (l_max + 1) + l];
                    let include = match u_i.cmp(&c) {
                        std::cmp::Ordering::Less => {
                            q_i * table[(i - 1) * row + (c - u_i) * (l_max + 1) + (l - 1)]
                        }
                        std::cmp::Ordering::Equal if l == 1 => q_i,
                        _ => 0.0,
                    };
                    table[i * row + c * (l_max + 1) + l] = exclude.max(include);
                }
            }
        }
        BestSubsetDp { q: q.to_vec(), util: util.to_vec(), c_max, l_max, table }
    }

    pub fn candidates(&self) -> usize {
        self.q.len()
    }

    pub fn sum_bound(&self) -> usize {
        self.c_max
    }

    /// P(i, C, L); zero when no subset attains (C, L).
    pub fn value(&self, i: usize, c: usize, l: usize) -> f64 {
        if c > self.c_max || l > self.l_max || c == 0 || l == 0 {
            return 0.0;
        }
        let row = (self.c_max + 1) * (self.l_max + 1);
        self.table[i * row + c * (self.l_max + 1) + l]
    }

    /// The subset (0-based candidate indices) realizing P(n, C, L).
    /// Ties inside the recurrence prefer excluding the later candidate.
    pub fn reconstruct(&self, c: usize, l: usize) -> Vec<usize> {
        let mut members = Vec::new();
        let (mut c, mut l) = (c, l);
        let mut i = self.q.len();
        debug_assert!(self.value(i, c, l) > 0.0);
        while i > 0 && c > 0 && l > 0 {
            let here = self.value(i, c, l);
            if here == self.value(i - 1, c, l) {
                i -= 1;
                continue;
            }
            let u_i = self.util[i - 1] as usize;
            members.push(i - 1);
            if u_i == c {
                break; // the subset is complete
            }
            c -= u_i;
            l -= 1;
            i -= 1;
        }
        members.reverse();
        members
    }
}

/// Prepared single-test solver: scaled DP over the high-probability pool
/// plus the per-guest scaled objective.
pub struct SingleTestFptas<'a> {
    pop: &'a Population,
    pub config: FptasConfig,
    /// Viable individuals below the 1/2 threshold, ascending.
    low: Vec<usize>,
    dp: BestSubsetDp,
    pool_cap: usize,
}

/// Cap on DP cells; the table is cubic-ish in the population size.
const MAX_DP_CELLS: u128 = 20_000_000;

impl<'a> SingleTestFptas<'a> {
    pub fn prepare(pop: &'a Population, pool_cap: usize, epsilon: f64) -> Result<Self> {
        if pool_cap == 0 {
            return Err(Error::validation("pool cap must be at least 1"));
        }
        let config = FptasConfig::new(pop, epsilon)?;
        let low: Vec<usize> = (0..pop.len())
            .filter(|&i| pop.q(i) > 0.0 && pop.u(i) > 0.0 && pop.q(i) < 0.5)
            .collect();
        let (q, util): (Vec<f64>, Vec<u64>) = config
            .n_half
            .iter()
            .map(|&i| (pop.q(i), (pop.u(i) / config.kappa).floor() as u64))
            .unzip();
        let l_max = pool_cap.min(config.n_half.len());
        let cells = (config.n_half.len() as u128 + 1)
            * (util.iter().sum::<u64>() as u128 + 1)
            * (l_max as u128 + 1);
        if cells > MAX_DP_CELLS {
            return Err(Error::Capacity {
                what: "scaled-utility DP table",
                required: cells,
                limit: MAX_DP_CELLS,
            });
        }
        let dp = BestSubsetDp::new(&q, &util, l_max);
        Ok(SingleTestFptas { pop, config, low, dp, pool_cap })
    }

    pub fn low_indices(&self) -> &[usize] {
        &self.low
    }

    /// Best scaled objective for guest `j` (an original index with q < 1/2),
    /// or for no guest at all (`None`): maximize
    /// (kappa*C + u_j) * P(h, C, L) * q_j over sums C and sizes L, against
    /// the singleton {j} as fallback. Returns the realized test.
    ///
    /// Ties in the cell argmax prefer smaller C, then smaller L.
    pub fn scaled_objective(&self, guest: Option<usize>) -> (f64, Test) {
        let (u_j, q_j, l_cap) = match guest {
            Some(j) => (self.pop.u(j), self.pop.q(j), self.pool_cap.saturating_sub(1)),
            None => (0.0, 1.0, self.pool_cap),
        };
        let l_max = l_cap.min(self.dp.candidates());
        let h = self.dp.candidates();

        let mut best_val = f64::NEG_INFINITY;
        let mut best_cell = None;
        for c in 1..=self.dp.sum_bound() {
            for l in 1..=l_max {
                let p = self.dp.value(h, c, l);
                if p <= 0.0 {
                    continue;
                }
                let val = (self.config.kappa * c as f64 + u_j) * p * q_j;
                if val > best_val {
                    best_val = val;
                    best_cell = Some((c, l));
                }
            }
        }

        // Empty high-probability part: the guest alone (worthless without a
        // guest).
        let singleton_val = u_j * q_j;
        let use_singleton = match guest {
            Some(_) => best_cell.is_none() || best_val < singleton_val,
            None => false,
        };

        if use_singleton {
            let j = guest.expect("singleton requires a guest");
            return (singleton_val, Test::new(vec![j]).expect("singleton is valid"));
        }
        match best_cell {
            Some((c, l)) => {
                let mut members: Vec<usize> = self
                    .dp
                    .reconstruct(c, l)
                    .into_iter()
                    .map(|local| self.config.n_half[local])
                    .collect();
                if let Some(j) = guest {
                    members.push(j);
                }
                (best_val, Test::new(members).expect("dp members are distinct"))
            }
            None => (0.0, Test::empty()),
        }
    }

    /// Run the full scheme: try every low-probability guest and the
    /// no-guest case, keep the best scaled objective (first maximizer wins).
    pub fn run(&self) -> (Test, f64) {
        let mut best: Option<(f64, Test)> = None;
        for guest in self.low.iter().copied().map(Some).chain(std::iter::once(None)) {
            let (val, test) = self.scaled_objective(guest);
            if test.is_empty() {
                continue;
            }
            if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
                best = Some((val, test));
            }
        }
        match best {
            Some((_, test)) => {
                let w = test_welfare(self.pop, &test).expect("constructed test is valid");
                (test, w)
            }
            None => (Test::empty(), 0.0),
        }
    }
}

/// Single pooled test with welfare at least (1 - epsilon) times optimal.
///
/// Errors when every individual is certainly infected. Populations where
/// nobody has positive utility get a zero-welfare singleton, matching the
/// exhaustive solver.
pub fn fptas_single_test(
    pop: &Population,
    pool_cap: usize,
    epsilon: f64,
) -> Result<(Test, f64)> {
    if pop.is_empty() {
        return Err(Error::validation("population is empty"));
    }
    if (0..pop.len()).all(|i| pop.q(i) == 0.0) {
        return Err(Error::NoViableTest);
    }

    let solver = SingleTestFptas::prepare(pop, pool_cap, epsilon)?;

    if solver.config.n_half.is_empty() {
        // Everyone viable sits below the 1/2 threshold: an optimal test is a
        // singleton, so take the best one directly.
        let best = solver
            .low
            .iter()
            .copied()
            .max_by(|&a, &b| {
                (pop.q(a) * pop.u(a))
                    .partial_cmp(&(pop.q(b) * pop.u(b)))
                    .unwrap()
                    .then(b.cmp(&a))
            });
        return match best {
            Some(i) => {
                let t = Test::new(vec![i])?;
                let w = test_welfare(pop, &t)?;
                Ok((t, w))
            }
            // No individual with positive utility and q > 0: any test earns
            // zero, return the first viable singleton.
            None => {
                let i = (0..pop.len()).find(|&i| pop.q(i) > 0.0).expect("checked above");
                Ok((Test::new(vec![i])?, 0.0))
            }
        };
    }

    let (test, welfare) = solver.run();
    debug_assert!(!test.is_empty());
    debug_assert!(test.len() <= pool_cap);
    debug_assert!(
        test.members().iter().filter(|&&i| pop.q(i) < 0.5).count() <= 1,
        "at most one guest below the probability threshold"
    );
    Ok((test, welfare))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_single_test;

    #[test]
    fn dp_base_and_unreachable_cells() {
        let dp = BestSubsetDp::new(&[0.7, 0.9], &[3, 2], 2);
        // Single candidate hitting the sum exactly.
        assert_eq!(dp.value(1, 3, 1), 0.7);
        // Unreachable sum.
        assert_eq!(dp.value(2, 4, 1), 0.0);
        assert_eq!(dp.value(2, 1, 1), 0.0);
    }

    #[test]
    fn dp_pair_cell() {
        let dp = BestSubsetDp::new(&[0.9, 0.8], &[2, 2], 2);
        let v = dp.value(2, 4, 2);
        assert!((v - 0.72).abs() < 1e-15, "got {v}");
        assert_eq!(dp.reconstruct(4, 2), vec![0, 1]);
    }

    #[test]
    fn dp_prefers_likelier_subset() {
        // Two ways to reach sum 2 with one member; the healthier one wins.
        let dp = BestSubsetDp::new(&[0.6, 0.9], &[2, 2], 1);
        assert_eq!(dp.value(2, 2, 1), 0.9);
        assert_eq!(dp.reconstruct(2, 1), vec![1]);
    }

    #[test]
    fn singleton_population_is_exact() {
        let pop = Population::from_values(&[4.0], &[0.3]).unwrap();
        let (t, w) = fptas_single_test(&pop, 3, 0.1).unwrap();
        assert_eq!(t.members(), &[0]);
        assert!((w - 1.2).abs() < 1e-15);
    }

    #[test]
    fn no_viable_test_when_all_certainly_infected() {
        let pop = Population::from_values(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(
            fptas_single_test(&pop, 2, 0.1),
            Err(Error::NoViableTest)
        ));
    }

    #[test]
    fn near_optimal_on_small_instance() {
        let pop = Population::from_values(&[3.0, 2.0, 5.0], &[0.9, 0.7, 0.6]).unwrap();
        let (_, w) = fptas_single_test(&pop, 3, 0.01).unwrap();
        assert!(w >= 0.99 * 4.32 - 1e-12, "got {w}");
    }

    #[test]
    fn no_guest_path_used_when_everyone_is_high_probability() {
        let pop = Population::from_values(&[1.0, 1.0, 1.0], &[0.5, 0.5, 1.0]).unwrap();
        let (t, w) = fptas_single_test(&pop, 3, 0.1).unwrap();
        assert!(w >= 0.9 * 1.0 - 1e-12, "got {w} for {t:?}");
    }

    #[test]
    fn guarantee_holds_against_oracle() {
        let u_vals = Population::default_utility_values();
        let q_vals = Population::default_probability_values();
        for seed in 0..60 {
            let n = 1 + (seed as usize * 7) % 10;
            let pop = Population::random(n, &u_vals, &q_vals, 5000 + seed).unwrap();
            if (0..pop.len()).all(|i| pop.q(i) == 0.0) {
                continue;
            }
            for epsilon in [0.1, 0.3] {
                for cap in [3, n.max(1)] {
                    let (t, w) = fptas_single_test(&pop, cap, epsilon).unwrap();
                    let (_, opt) = brute_force_single_test(&pop, cap).unwrap();
                    assert!(
                        w >= (1.0 - epsilon) * opt - 1e-9,
                        "seed {seed} eps {epsilon} cap {cap}: {w} < (1-e)*{opt}"
                    );
                    assert!(t.len() <= cap);
                    assert!(
                        t.members().iter().filter(|&&i| pop.q(i) < 0.5).count() <= 1
                    );
                }
            }
        }
    }
}
