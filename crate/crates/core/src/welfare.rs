//! Welfare evaluation.
//!
//! The welfare of a regime is the expected total utility of individuals who
//! end up in at least one negative test. For disjoint tests this decomposes
//! as a sum of per-test terms; for overlapping tests the exact value is
//! computed by enumerating health realizations of the tested individuals.

use crate::error::{Error, Result};
use crate::population::Population;
use crate::regime::{Regime, Test};

/// Default cap on the number of distinct tested individuals the exact
/// evaluator will enumerate (2^m realizations).
pub const MAX_ENUMERATED_INDIVIDUALS: usize = 25;

/// Welfare of a regime together with its per-individual decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport {
    /// Expected total utility.
    pub total: f64,
    /// For each individual, the probability of appearing in a negative test.
    pub per_individual: Vec<f64>,
    /// `pivotal[i][j]`: probability that test `j` is the earliest negative
    /// test containing `i`. Populated by the exact evaluator only.
    pub pivotal: Option<Vec<Vec<f64>>>,
}

/// Expected utility of a single pooled test: `q_t * sum of member utilities`.
///
/// The empty test earns nothing.
pub fn test_welfare(pop: &Population, t: &Test) -> Result<f64> {
    let mut prob = 1.0;
    let mut usum = 0.0;
    for &i in t.members() {
        if i >= pop.len() {
            return Err(Error::validation(format!(
                "test references individual {} but population has {}",
                i,
                pop.len()
            )));
        }
        prob *= pop.q(i);
        usum += pop.u(i);
    }
    if t.is_empty() {
        return Ok(0.0);
    }
    Ok(prob * usum)
}

/// Welfare of a non-overlapping regime: the sum of its per-test welfares.
///
/// Rejects overlapping input; callers with overlaps need
/// [`regime_welfare_exact`].
pub fn regime_welfare_nonoverlapping(pop: &Population, regime: &Regime) -> Result<WelfareReport> {
    regime.validate_for(pop)?;
    if !regime.is_nonoverlapping() {
        return Err(Error::OverlappingRegime);
    }
    let mut total = 0.0;
    let mut per_individual = vec![0.0; pop.len()];
    for t in &regime.tests {
        let w = test_welfare(pop, t)?;
        total += w;
        let q_t: f64 = t.members().iter().map(|&i| pop.q(i)).product();
        for &i in t.members() {
            per_individual[i] = q_t;
        }
    }
    Ok(WelfareReport { total, per_individual, pivotal: None })
}

/// Exact welfare of an arbitrary (possibly overlapping) regime, computed by
/// enumerating all `2^m` health realizations of the `m` tested individuals.
///
/// The report's pivotal matrix assigns each individual's clearing probability
/// to the earliest negative test containing them.
pub fn regime_welfare_exact(pop: &Population, regime: &Regime) -> Result<WelfareReport> {
    regime_welfare_exact_with_limit(pop, regime, MAX_ENUMERATED_INDIVIDUALS)
}

pub fn regime_welfare_exact_with_limit(
    pop: &Population,
    regime: &Regime,
    max_enumerated: usize,
) -> Result<WelfareReport> {
    regime.validate_for(pop)?;
    let tested = regime.tested_individuals();
    let m = tested.len();
    if m > max_enumerated {
        return Err(Error::Capacity {
            what: "exact welfare enumeration (tested individuals)",
            required: m as u128,
            limit: max_enumerated as u128,
        });
    }

    // Local index within `tested` for each global index.
    let local: std::collections::HashMap<usize, usize> =
        tested.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let test_masks: Vec<u64> = regime
        .tests
        .iter()
        .map(|t| t.members().iter().fold(0u64, |msk, g| msk | (1u64 << local[g])))
        .collect();

    let n_tests = regime.tests.len();
    let mut pivotal = vec![vec![0.0f64; n_tests]; pop.len()];

    for healthy in 0u64..(1u64 << m) {
        let mut prob = 1.0f64;
        for (l, &g) in tested.iter().enumerate() {
            let q = pop.q(g);
            prob *= if healthy & (1 << l) != 0 { q } else { 1.0 - q };
            if prob == 0.0 {
                break;
            }
        }
        if prob == 0.0 {
            continue;
        }
        // A test is negative iff all members are healthy.
        let mut cleared = 0u64;
        for (j, &tm) in test_masks.iter().enumerate() {
            if regime.tests[j].is_empty() {
                continue; // empty tests clear nobody
            }
            if tm & !healthy == 0 {
                let newly = tm & !cleared;
                let mut rest = newly;
                while rest != 0 {
                    let l = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    pivotal[tested[l]][j] += prob;
                }
                cleared |= tm;
            }
        }
    }

    let per_individual: Vec<f64> = pivotal.iter().map(|row| row.iter().sum()).collect();
    let total = per_individual
        .iter()
        .enumerate()
        .map(|(i, p)| pop.u(i) * p)
        .sum();
    Ok(WelfareReport { total, per_individual, pivotal: Some(pivotal) })
}

/// Fast exact total for small overlapping regimes, used by the exhaustive
/// optimizers: per individual, inclusion-exclusion over the tests containing
/// them. Requires per-subset healthy products indexed by bitmask.
///
/// Agrees with [`regime_welfare_exact`] (asserted in tests); it is a second
/// algebraic route, not a replacement.
pub(crate) fn total_welfare_inclusion_exclusion(
    utilities: &[f64],
    q_prod: &[f64],
    test_masks: &[u64],
) -> f64 {
    let mut total = 0.0;
    for (i, &u) in utilities.iter().enumerate() {
        if u == 0.0 {
            continue;
        }
        let containing: Vec<u64> = test_masks
            .iter()
            .copied()
            .filter(|tm| tm & (1 << i) != 0)
            .collect();
        if containing.is_empty() {
            continue;
        }
        // Pr[some containing test negative] by inclusion-exclusion.
        let mut p = 0.0;
        for pick in 1u32..(1 << containing.len()) {
            let mut union = 0u64;
            for (k, &tm) in containing.iter().enumerate() {
                if pick & (1 << k) != 0 {
                    union |= tm;
                }
            }
            let sign = if pick.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            p += sign * q_prod[union as usize];
        }
        total += u * p;
    }
    total
}

/// Healthy-probability products for every subset of the first `n`
/// individuals, indexed by bitmask. `n` must be at most 25 or so.
pub(crate) fn subset_q_products(pop: &Population, n: usize) -> Vec<f64> {
    let mut q_prod = vec![1.0f64; 1 << n];
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        q_prod[mask] = q_prod[mask & (mask - 1)] * pop.q(low);
    }
    q_prod
}

/// Drop memberships that can never clear their individual: `i` in test `j`
/// is dead when some earlier test containing `i` is negative whenever `j`
/// is (its extra members are all certainly healthy). Dead memberships
/// contribute zero welfare; removing them exposes the pivotal-support
/// structure of an optimum.
pub fn drop_dead_memberships(pop: &Population, regime: &Regime) -> Result<Regime> {
    regime.validate_for(pop)?;
    let mut tests: Vec<Vec<usize>> =
        regime.tests.iter().map(|t| t.members().to_vec()).collect();
    loop {
        let mut changed = false;
        for j in 0..tests.len() {
            let keep: Vec<usize> = tests[j]
                .iter()
                .copied()
                .filter(|&i| {
                    !(0..j).any(|j2| {
                        tests[j2].contains(&i)
                            && tests[j2]
                                .iter()
                                .all(|&k| tests[j].contains(&k) || pop.q(k) == 1.0)
                    })
                })
                .collect();
            if keep.len() != tests[j].len() {
                tests[j] = keep;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Regime::new(
        regime.budget,
        regime.pool_cap,
        tests.into_iter().map(Test::new).collect::<Result<Vec<_>>>()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop3() -> Population {
        Population::from_values(&[1.0, 1.0, 1.0], &[0.5, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn single_test_welfare() {
        let pop = pop3();
        // Two coin-flip individuals pooled together.
        let t = Test::new(vec![0, 1]).unwrap();
        assert_eq!(test_welfare(&pop, &t).unwrap(), 0.5);
        // A certainly-healthy individual alone.
        let t3 = Test::new(vec![2]).unwrap();
        assert_eq!(test_welfare(&pop, &t3).unwrap(), 1.0);
        assert_eq!(test_welfare(&pop, &Test::empty()).unwrap(), 0.0);
        // Index out of range.
        let bad = Test::new(vec![7]).unwrap();
        assert!(test_welfare(&pop, &bad).is_err());
    }

    #[test]
    fn product_sum_arithmetic() {
        let pop = Population::from_values(&[3.0, 2.0, 5.0], &[0.9, 0.7, 0.6]).unwrap();
        let t = Test::new(vec![0, 2]).unwrap();
        let w = test_welfare(&pop, &t).unwrap();
        assert!((w - 4.32).abs() < 1e-12, "got {w}");
    }

    #[test]
    fn disjoint_regime_welfare() {
        let pop = pop3();
        let r = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 1]).unwrap(), Test::new(vec![2]).unwrap()],
        )
        .unwrap();
        let rep = regime_welfare_nonoverlapping(&pop, &r).unwrap();
        assert!((rep.total - 1.5).abs() < 1e-15);
        assert_eq!(rep.per_individual, vec![0.25, 0.25, 1.0]);

        let empty = Regime::new(2, 3, vec![]).unwrap();
        assert_eq!(regime_welfare_nonoverlapping(&pop, &empty).unwrap().total, 0.0);

        let pop2 = Population::from_values(&[3.0, 2.0, 5.0], &[0.9, 0.7, 0.6]).unwrap();
        let r2 = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 1]).unwrap(), Test::new(vec![2]).unwrap()],
        )
        .unwrap();
        let rep2 = regime_welfare_nonoverlapping(&pop2, &r2).unwrap();
        assert!((rep2.total - 6.15).abs() < 1e-12);
    }

    #[test]
    fn nonoverlapping_rejects_overlap() {
        let pop = pop3();
        let r = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 2]).unwrap(), Test::new(vec![1, 2]).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            regime_welfare_nonoverlapping(&pop, &r),
            Err(Error::OverlappingRegime)
        ));
    }

    #[test]
    fn exact_welfare_overlapping_fixture() {
        // One certainly-healthy individual tested twice clears both pools.
        let pop = pop3();
        let r = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 2]).unwrap(), Test::new(vec![1, 2]).unwrap()],
        )
        .unwrap();
        let rep = regime_welfare_exact(&pop, &r).unwrap();
        assert!((rep.total - 1.75).abs() < 1e-15, "got {}", rep.total);
        assert!((rep.per_individual[0] - 0.5).abs() < 1e-15);
        assert!((rep.per_individual[1] - 0.5).abs() < 1e-15);
        assert!((rep.per_individual[2] - 0.75).abs() < 1e-15);
        let piv = rep.pivotal.unwrap();
        assert!((piv[2][0] - 0.5).abs() < 1e-15);
        assert!((piv[2][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_single_test_and_duplicates_add_nothing() {
        let pop = Population::from_values(&[3.0, 2.0, 5.0], &[0.9, 0.7, 0.6]).unwrap();
        let t = Test::new(vec![0, 2]).unwrap();
        let r = Regime::new(1, 3, vec![t.clone()]).unwrap();
        let rep = regime_welfare_exact(&pop, &r).unwrap();
        assert!((rep.total - test_welfare(&pop, &t).unwrap()).abs() < 1e-15);

        let pop2 = Population::from_values(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
        let dup = Regime::new(
            2,
            2,
            vec![Test::new(vec![0, 1]).unwrap(), Test::new(vec![0, 1]).unwrap()],
        )
        .unwrap();
        let rep2 = regime_welfare_exact(&pop2, &dup).unwrap();
        assert!((rep2.total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_capacity_guard() {
        let pop = Population::from_values(&[1.0; 30], &[0.5; 30]).unwrap();
        let t = Test::new((0..30).collect()).unwrap();
        let r = Regime::new(1, 30, vec![t]).unwrap();
        assert!(matches!(
            regime_welfare_exact(&pop, &r),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn dead_membership_reduction() {
        // Second test repeats the first: its members can never be cleared
        // first by it.
        let pop = Population::from_values(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
        let dup = Regime::new(
            2,
            2,
            vec![Test::new(vec![0, 1]).unwrap(), Test::new(vec![0, 1]).unwrap()],
        )
        .unwrap();
        let reduced = drop_dead_memberships(&pop, &dup).unwrap();
        assert_eq!(reduced.tests[0].members(), &[0, 1]);
        assert!(reduced.tests[1].is_empty());
        let before = regime_welfare_exact(&pop, &dup).unwrap().total;
        let after = regime_welfare_exact(&pop, &reduced).unwrap().total;
        assert!((before - after).abs() < 1e-15);
    }
}
