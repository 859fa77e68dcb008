//! Quantifies how much welfare overlapping tests can add over disjoint ones
//! on a concrete instance, and the known worst-case ceilings per budget.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::oracle::{
    brute_force_nonoverlapping_with_limits, brute_force_overlapping_with_limits, OracleLimits,
};
use crate::population::Population;
use crate::regime::Regime;

/// Best-known worst-case ratio of overlapping to non-overlapping optimal
/// welfare for a given budget.
pub fn gain_bound(budget: usize) -> f64 {
    match budget {
        0 | 1 => 1.0,
        2 => 7.0 / 6.0,
        3 => 7.0 / 3.0,
        4 => 15.0 / 4.0,
        _ => 4.0,
    }
}

/// Measured gain of overlaps on one instance.
#[derive(Debug, Clone)]
pub struct GainReport {
    pub nonoverlapping: (Regime, f64),
    pub overlapping: (Regime, f64),
    pub max_overlap: usize,
    pub ratio: f64,
}

/// Ratio of the overlap-capped optimum to the non-overlapping optimum.
///
/// An instance where nothing earns welfare has ratio 1 by convention.
pub fn gain_of_overlaps(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    max_overlap: usize,
) -> Result<GainReport> {
    gain_of_overlaps_with_limits(pop, pool_cap, budget, max_overlap, &OracleLimits::default())
}

pub fn gain_of_overlaps_with_limits(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    max_overlap: usize,
    limits: &OracleLimits,
) -> Result<GainReport> {
    let nonoverlapping =
        brute_force_nonoverlapping_with_limits(pop, pool_cap, budget, limits)?;
    let overlapping =
        brute_force_overlapping_with_limits(pop, pool_cap, budget, max_overlap, limits)?;
    let ratio = if nonoverlapping.1 == 0.0 {
        1.0
    } else {
        overlapping.1 / nonoverlapping.1
    };
    if ratio > 4.0 + 1e-9 {
        return Err(Error::validation(format!(
            "gain {ratio} exceeds the proven ceiling of 4; instance or solver is broken"
        )));
    }
    Ok(GainReport { nonoverlapping, overlapping, max_overlap, ratio })
}

/// The canonical three-person instance with one certainly-healthy
/// individual: two coin flips plus a sure negative, all with unit utility.
/// Testing the sure individual twice is what overlaps buy here.
pub fn reference_instance() -> Population {
    Population::from_values(&[1.0, 1.0, 1.0], &[0.5, 0.5, 1.0]).expect("static instance")
}

/// Exact-arithmetic optimal welfares for [`reference_instance`] with budget
/// 2: (best non-overlapping, best overlapping, ratio). Exhaustive search
/// over all test pairs, with welfare evaluated over all 2^3 health
/// realizations in rational arithmetic.
pub fn reference_instance_exact() -> (Ratio<i64>, Ratio<i64>, Ratio<i64>) {
    let q = [Ratio::new(1, 2), Ratio::new(1, 2), Ratio::new(1, 1)];
    let u = [Ratio::from_integer(1); 3];
    let n = 3usize;

    let exact_welfare = |tests: &[u8]| -> Ratio<i64> {
        let mut total = Ratio::from_integer(0);
        for healthy in 0u8..(1 << n) {
            let mut prob = Ratio::from_integer(1);
            for i in 0..n {
                let qi = q[i];
                prob *= if healthy & (1 << i) != 0 {
                    qi
                } else {
                    Ratio::from_integer(1) - qi
                };
            }
            if prob == Ratio::from_integer(0) {
                continue;
            }
            let mut cleared = 0u8;
            for &t in tests {
                if t != 0 && t & !healthy == 0 {
                    cleared |= t;
                }
            }
            for i in 0..n {
                if cleared & (1 << i) != 0 {
                    total += prob * u[i];
                }
            }
        }
        total
    };

    let masks: Vec<u8> = (1u8..(1 << n)).collect();
    let mut best_disjoint = Ratio::from_integer(0);
    let mut best_any = Ratio::from_integer(0);
    for (ai, &a) in masks.iter().enumerate() {
        let single = exact_welfare(&[a]);
        if single > best_disjoint {
            best_disjoint = single;
        }
        if single > best_any {
            best_any = single;
        }
        for &b in &masks[ai..] {
            let w = exact_welfare(&[a, b]);
            if a & b == 0 && w > best_disjoint {
                best_disjoint = w;
            }
            if w > best_any {
                best_any = w;
            }
        }
    }
    (best_disjoint, best_any, best_any / best_disjoint)
}
