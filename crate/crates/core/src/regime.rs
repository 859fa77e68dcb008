//! Pooled tests and testing regimes.
//!
//! A test is a set of individual indices whose samples are pooled into one
//! assay; it is negative exactly when every member is healthy. A regime is an
//! ordered collection of at most `budget` tests, each of size at most
//! `pool_cap`. Test order matters: when tests overlap, an individual's
//! earliest negative test is the one that clears them.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;

/// A single pooled test: a sorted, duplicate-free list of individual indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Test {
    members: Vec<usize>,
}

impl Test {
    /// Canonicalizes to sorted order; rejects duplicate indices.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("test contains duplicate indices"));
        }
        Ok(Test { members })
    }

    pub fn empty() -> Self {
        Test { members: Vec::new() }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Bitmask over individual indices; requires all members < 64.
    pub(crate) fn mask(&self) -> u64 {
        self.members.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }
}

/// An ordered collection of pooled tests under a budget and a pool-size cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub budget: usize,
    pub pool_cap: usize,
    pub tests: Vec<Test>,
}

impl Regime {
    pub fn new(budget: usize, pool_cap: usize, tests: Vec<Test>) -> Result<Self> {
        if tests.len() > budget {
            return Err(Error::validation(format!(
                "{} tests exceed budget {}",
                tests.len(),
                budget
            )));
        }
        for (j, t) in tests.iter().enumerate() {
            if t.len() > pool_cap {
                return Err(Error::validation(format!(
                    "test {} has {} members, pool cap is {}",
                    j,
                    t.len(),
                    pool_cap
                )));
            }
        }
        Ok(Regime { budget, pool_cap, tests })
    }

    /// Check all member indices against a population.
    pub fn validate_for(&self, pop: &Population) -> Result<()> {
        for (j, t) in self.tests.iter().enumerate() {
            if let Some(&bad) = t.members().iter().find(|&&i| i >= pop.len()) {
                return Err(Error::validation(format!(
                    "test {} references individual {} but population has {}",
                    j,
                    bad,
                    pop.len()
                )));
            }
        }
        Ok(())
    }

    /// True when tests are pairwise disjoint.
    pub fn is_nonoverlapping(&self) -> bool {
        let mut seen = 0u64;
        if self.max_index().is_some_and(|m| m < 64) {
            for t in &self.tests {
                let mask = t.mask();
                if seen & mask != 0 {
                    return false;
                }
                seen |= mask;
            }
            true
        } else {
            let mut all: Vec<usize> =
                self.tests.iter().flat_map(|t| t.members().iter().copied()).collect();
            let total = all.len();
            all.sort_unstable();
            all.dedup();
            all.len() == total
        }
    }

    /// Distinct individuals appearing in at least one test, ascending.
    pub fn tested_individuals(&self) -> Vec<usize> {
        let mut all: Vec<usize> =
            self.tests.iter().flat_map(|t| t.members().iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Number of memberships, counting an individual once per test.
    pub fn total_memberships(&self) -> usize {
        self.tests.iter().map(|t| t.len()).sum()
    }

    fn max_index(&self) -> Option<usize> {
        self.tests.iter().flat_map(|t| t.members().iter().copied()).max()
    }

    pub fn to_json_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn to_json_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.to_json_writer(&mut f)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn from_json_reader<R: Read>(r: R) -> Result<Self> {
        let regime: Regime = serde_json::from_reader(r)?;
        // Re-run the constructor checks and per-test canonicalization.
        let tests = regime
            .tests
            .into_iter()
            .map(|t| Test::new(t.members))
            .collect::<Result<Vec<_>>>()?;
        Regime::new(regime.budget, regime.pool_cap, tests)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Regime::from_json_reader(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_canonicalizes_and_rejects_duplicates() {
        let t = Test::new(vec![3, 1, 2]).unwrap();
        assert_eq!(t.members(), &[1, 2, 3]);
        assert!(Test::new(vec![1, 1]).is_err());
    }

    #[test]
    fn overlap_detection() {
        let r = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 2]).unwrap(), Test::new(vec![1, 2]).unwrap()],
        )
        .unwrap();
        assert!(!r.is_nonoverlapping());
        let r2 = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 1]).unwrap(), Test::new(vec![2]).unwrap()],
        )
        .unwrap();
        assert!(r2.is_nonoverlapping());
    }

    #[test]
    fn json_round_trip_matches_wire_format() {
        let r = Regime::new(
            2,
            3,
            vec![Test::new(vec![0, 2]).unwrap(), Test::new(vec![1, 2]).unwrap()],
        )
        .unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"budget":2,"pool_cap":3,"tests":[[0,2],[1,2]]}"#
        );
        let back = Regime::from_json_reader(json.as_bytes()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn budget_and_cap_enforced() {
        assert!(Regime::new(1, 3, vec![Test::empty(), Test::empty()]).is_err());
        assert!(Regime::new(1, 1, vec![Test::new(vec![0, 1]).unwrap()]).is_err());
    }
}
