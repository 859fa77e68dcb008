//! Multi-test allocators for non-overlapping regimes: round-by-round
//! single-test optimization, plus the replication shortcut for clustered
//! populations with small budgets.

use crate::error::Result;
use crate::fptas::fptas_single_test;
use crate::oracle::{brute_force_single_test_with_limits, OracleLimits};
use crate::population::{ClusteredPopulation, Population};
use crate::regime::{Regime, Test};

/// How each round's single test is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingleTestRule {
    /// Exhaustive optimum; best with small pool caps.
    Oracle,
    /// Scaled-utility scheme with relative error `epsilon`.
    Fptas { epsilon: f64 },
}

/// One greedy round.
#[derive(Debug, Clone)]
pub struct GreedyRound {
    pub test: Test,
    pub welfare: f64,
    /// Individuals still unassigned after this round.
    pub remaining: usize,
}

/// Per-round record of a greedy run.
#[derive(Debug, Clone, Default)]
pub struct GreedyTrace {
    pub rounds: Vec<GreedyRound>,
}

/// Build up to `budget` disjoint tests, each (approximately) optimal over
/// the individuals not yet assigned. Rounds stop early once the best
/// remaining test earns nothing.
pub fn greedy_regime(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    rule: SingleTestRule,
) -> Result<(Regime, GreedyTrace)> {
    greedy_regime_with_limits(pop, pool_cap, budget, rule, &OracleLimits::default())
}

pub fn greedy_regime_with_limits(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    rule: SingleTestRule,
    limits: &OracleLimits,
) -> Result<(Regime, GreedyTrace)> {
    if budget == 0 {
        return Err(crate::error::Error::validation("budget must be at least 1"));
    }
    let mut remaining: Vec<usize> = (0..pop.len()).collect();
    let mut tests = Vec::new();
    let mut trace = GreedyTrace::default();

    for _ in 0..budget {
        if remaining.is_empty() {
            break;
        }
        let (sub, back) = pop.restrict(&remaining)?;
        let (local_test, welfare) = match rule {
            SingleTestRule::Oracle => {
                brute_force_single_test_with_limits(&sub, pool_cap, limits)?
            }
            SingleTestRule::Fptas { epsilon } => fptas_single_test(&sub, pool_cap, epsilon)
                .or_else(|e| match e {
                    // Everyone left is certainly infected: nothing to gain.
                    crate::error::Error::NoViableTest => Ok((Test::empty(), 0.0)),
                    other => Err(other),
                })?,
        };
        if welfare <= 0.0 || local_test.is_empty() {
            break;
        }
        let members: Vec<usize> =
            local_test.members().iter().map(|&l| back[l]).collect();
        let chosen = Test::new(members)?;
        remaining.retain(|i| !chosen.contains(*i));
        trace.rounds.push(GreedyRound {
            test: chosen.clone(),
            welfare,
            remaining: remaining.len(),
        });
        tests.push(chosen);
    }

    let regime = Regime::new(budget, pool_cap, tests)?;
    Ok((regime, trace))
}

/// Result of the cluster replication shortcut.
#[derive(Debug, Clone)]
pub struct ClusterReplication {
    /// Regime over the expanded population returned by
    /// [`ClusteredPopulation::expand`].
    pub regime: Regime,
    pub welfare: f64,
    /// True when the optimal single test could be copied `budget` times
    /// within every cluster, which makes the result optimal even against
    /// overlapping regimes. False means the greedy fallback ran.
    pub replicated: bool,
    /// Per-cluster member counts of the replicated single test.
    pub base_counts: Vec<usize>,
}

/// If the optimal single test `t*` fits `budget` disjoint composition-copies
/// into the clusters (budget * |t* in cluster i| <= n_i), those copies are an
/// optimal regime; otherwise fall back to the greedy allocator.
pub fn cluster_replicate(
    clustered: &ClusteredPopulation,
    pool_cap: usize,
    budget: usize,
) -> Result<ClusterReplication> {
    cluster_replicate_with_limits(clustered, pool_cap, budget, &OracleLimits::default())
}

pub fn cluster_replicate_with_limits(
    clustered: &ClusteredPopulation,
    pool_cap: usize,
    budget: usize,
    limits: &OracleLimits,
) -> Result<ClusterReplication> {
    let (expanded, members_by_cluster) = clustered.expand();
    let (t_star, w_star) = brute_force_single_test_with_limits(&expanded, pool_cap, limits)?;

    let base_counts: Vec<usize> = members_by_cluster
        .iter()
        .map(|members| {
            members
                .iter()
                .filter(|&&i| t_star.contains(i))
                .count()
        })
        .collect();

    let fits = clustered
        .clusters
        .iter()
        .zip(&base_counts)
        .all(|(c, &a)| budget * a <= c.size);

    if !fits || w_star <= 0.0 {
        let (regime, _) =
            greedy_regime_with_limits(&expanded, pool_cap, budget, SingleTestRule::Oracle, limits)?;
        let welfare = crate::welfare::regime_welfare_nonoverlapping(&expanded, &regime)?.total;
        return Ok(ClusterReplication { regime, welfare, replicated: false, base_counts });
    }

    let mut tests = Vec::with_capacity(budget);
    for copy in 0..budget {
        let mut members = Vec::new();
        for (ci, &a) in base_counts.iter().enumerate() {
            members.extend_from_slice(&members_by_cluster[ci][copy * a..(copy + 1) * a]);
        }
        tests.push(Test::new(members)?);
    }
    let regime = Regime::new(budget, pool_cap, tests)?;
    let welfare = budget as f64 * w_star;
    debug_assert!(
        (crate::welfare::regime_welfare_nonoverlapping(&expanded, &regime)?.total - welfare)
            .abs()
            < 1e-9
    );
    Ok(ClusterReplication { regime, welfare, replicated: true, base_counts })
}
