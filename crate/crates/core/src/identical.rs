//! Specializations for populations where everyone has the same utility.
//!
//! With identical utilities (normalized to 1) and individuals sorted by
//! healthy probability, some optimal regime partitions a prefix of the
//! population into contiguous blocks, largest block first. That structure
//! makes exact optimization cheap for small budgets; a sorted greedy variant
//! handles arbitrary budgets with a bounded welfare loss.

use crate::error::{Error, Result};
use crate::population::Population;
use crate::regime::{Regime, Test};

/// A uniform-utility population reordered by healthy probability
/// (non-increasing; ties keep the original index order).
#[derive(Debug, Clone)]
pub struct SortedUniformPopulation {
    /// order[pos] = original index of the individual at sorted position pos.
    pub order: Vec<usize>,
    /// Healthy probabilities in sorted order.
    pub probs: Vec<f64>,
    /// The common utility value.
    pub utility: f64,
}

impl SortedUniformPopulation {
    pub fn new(pop: &Population) -> Result<Self> {
        if pop.is_empty() {
            return Err(Error::validation("population is empty"));
        }
        if !pop.has_uniform_utilities() {
            return Err(Error::validation(
                "utilities are not uniform; this allocator requires identical utilities",
            ));
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop.q(b).partial_cmp(&pop.q(a)).unwrap().then(a.cmp(&b)));
        let probs = order.iter().map(|&i| pop.q(i)).collect();
        Ok(SortedUniformPopulation { order, probs, utility: pop.u(0) })
    }

    fn block_regime(&self, budget: usize, blocks: &[usize]) -> Result<Regime> {
        let mut tests = Vec::with_capacity(blocks.len());
        let mut pos = 0;
        for &k in blocks {
            if k == 0 {
                break;
            }
            tests.push(Test::new(self.order[pos..pos + k].to_vec())?);
            pos += k;
        }
        Regime::new(budget, self.probs.len(), tests)
    }
}

/// An allocation on a uniform-utility population.
#[derive(Debug, Clone)]
pub struct UniformAllocation {
    pub regime: Regime,
    pub welfare: f64,
    /// Contiguous block sizes in sorted coordinates, non-increasing.
    pub block_sizes: Vec<usize>,
}

const MAX_N: usize = 60;
const MAX_BUDGET: usize = 4;

/// Exact optimum over non-overlapping regimes for a uniform-utility
/// population, by enumerating non-increasing contiguous prefix partitions.
/// No pool-size cap applies here.
pub fn optimal_identical(pop: &Population, budget: usize) -> Result<UniformAllocation> {
    let sorted = SortedUniformPopulation::new(pop)?;
    if budget == 0 {
        return Err(Error::validation("budget must be at least 1"));
    }
    let n = sorted.probs.len();
    if n > MAX_N || budget > MAX_BUDGET {
        return Err(Error::Capacity {
            what: "contiguous-partition enumeration",
            required: (n as u128).pow(budget.min(8) as u32),
            limit: (MAX_N as u128).pow(MAX_BUDGET as u32),
        });
    }

    struct Search<'a> {
        probs: &'a [f64],
        budget: usize,
        blocks: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn go(&mut self, pos: usize, prev: usize, welfare: f64) {
            match &self.best {
                Some((bw, _)) if welfare > *bw => {
                    self.best = Some((welfare, self.blocks.clone()))
                }
                None => self.best = Some((welfare, self.blocks.clone())),
                _ => {}
            }
            if self.blocks.len() == self.budget || pos == self.probs.len() {
                return;
            }
            let max_k = prev.min(self.probs.len() - pos);
            for k in 1..=max_k {
                let mut q_block = 1.0;
                for &q in &self.probs[pos..pos + k] {
                    q_block *= q;
                }
                self.blocks.push(k);
                self.go(pos + k, k, welfare + q_block * k as f64);
                self.blocks.pop();
            }
        }
    }

    let mut search = Search { probs: &sorted.probs, budget, blocks: Vec::new(), best: None };
    search.go(0, n, 0.0);
    let (normalized, blocks) = search.best.expect("search always records the empty prefix");

    let regime = sorted.block_regime(budget, &blocks)?;
    Ok(UniformAllocation {
        regime,
        welfare: normalized * sorted.utility,
        block_sizes: blocks,
    })
}

/// Sorted greedy for uniform utilities: each round pools the
/// highest-probability unassigned individuals, growing the pool while the
/// pool's expected utility strictly improves.
pub fn var_greedy(pop: &Population, budget: usize) -> Result<UniformAllocation> {
    let sorted = SortedUniformPopulation::new(pop)?;
    if budget == 0 {
        return Err(Error::validation("budget must be at least 1"));
    }
    let n = sorted.probs.len();
    let mut blocks = Vec::new();
    let mut welfare = 0.0;
    let mut pos = 0;
    for _ in 0..budget {
        if pos == n || sorted.probs[pos] == 0.0 {
            break;
        }
        let mut size = 1;
        let mut prod = sorted.probs[pos];
        let mut w = prod;
        while pos + size < n {
            let cand_prod = prod * sorted.probs[pos + size];
            let cand_w = cand_prod * (size + 1) as f64;
            if cand_w > w {
                prod = cand_prod;
                w = cand_w;
                size += 1;
            } else {
                break;
            }
        }
        blocks.push(size);
        welfare += w;
        pos += size;
    }

    let regime = sorted.block_regime(budget, &blocks)?;
    Ok(UniformAllocation { regime, welfare: welfare * sorted.utility, block_sizes: blocks })
}
