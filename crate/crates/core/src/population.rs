//! Population input: per-individual utility and healthy-probability.
//!
//! A population is the instance data every allocator consumes: for each
//! individual an opaque id, a utility `u >= 0` for returning to in-person
//! activities, and an independent probability `q` in [0,1] of being healthy.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// One member of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    pub utility: f64,
    pub healthy_prob: f64,
}

/// A validated population instance.
///
/// Invariants enforced at construction: `0 <= q <= 1` and `u >= 0` for every
/// entry, finite values, unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    entries: Vec<Individual>,
}

impl Population {
    pub fn new(entries: Vec<Individual>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (idx, e) in entries.iter().enumerate() {
            if !e.healthy_prob.is_finite() || !(0.0..=1.0).contains(&e.healthy_prob) {
                return Err(Error::validation(format!(
                    "individual {} ('{}'): healthy probability {} outside [0,1]",
                    idx, e.id, e.healthy_prob
                )));
            }
            if !e.utility.is_finite() || e.utility < 0.0 {
                return Err(Error::validation(format!(
                    "individual {} ('{}'): utility {} must be a non-negative number",
                    idx, e.id, e.utility
                )));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::validation(format!("duplicate id '{}'", e.id)));
            }
        }
        Ok(Population { entries })
    }

    /// Convenience constructor for tests and fixtures: ids are synthesized.
    pub fn from_values(utilities: &[f64], healthy_probs: &[f64]) -> Result<Self> {
        if utilities.len() != healthy_probs.len() {
            return Err(Error::validation("utility/probability length mismatch"));
        }
        let entries = utilities
            .iter()
            .zip(healthy_probs)
            .enumerate()
            .map(|(i, (&u, &q))| Individual {
                id: format!("p{i:03}"),
                utility: u,
                healthy_prob: q,
            })
            .collect();
        Population::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Individual] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Individual {
        &self.entries[i]
    }

    /// Healthy probability of individual `i`.
    pub fn q(&self, i: usize) -> f64 {
        self.entries[i].healthy_prob
    }

    /// Utility of individual `i`.
    pub fn u(&self, i: usize) -> f64 {
        self.entries[i].utility
    }

    /// True when every individual has the same utility.
    pub fn has_uniform_utilities(&self) -> bool {
        match self.entries.first() {
            None => true,
            Some(first) => self.entries.iter().all(|e| e.utility == first.utility),
        }
    }

    /// Restriction to the given individuals, preserving order of `keep`.
    ///
    /// Returns the sub-population together with the original index of each
    /// retained individual.
    pub fn restrict(&self, keep: &[usize]) -> Result<(Population, Vec<usize>)> {
        let mut entries = Vec::with_capacity(keep.len());
        for &i in keep {
            if i >= self.len() {
                return Err(Error::validation(format!(
                    "index {} out of range for population of {}",
                    i,
                    self.len()
                )));
            }
            entries.push(self.entries[i].clone());
        }
        Ok((Population { entries }, keep.to_vec()))
    }

    /// Default utility values used by the experiment protocol: integers 1..10.
    pub fn default_utility_values() -> Vec<f64> {
        (1..=10).map(|v| v as f64).collect()
    }

    /// Default healthy-probability grid: {0, 0.1, ..., 1}.
    pub fn default_probability_values() -> Vec<f64> {
        (0..=10).map(|v| v as f64 / 10.0).collect()
    }

    /// Draw a population of size `n` with utility and probability values
    /// sampled independently and uniformly from the given sets.
    ///
    /// Deterministic for a fixed seed.
    pub fn random(n: usize, u_values: &[f64], q_values: &[f64], seed: u64) -> Result<Self> {
        if u_values.is_empty() || q_values.is_empty() {
            return Err(Error::validation("value sets must be non-empty"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|i| Individual {
                id: format!("p{i:03}"),
                utility: u_values[rng.gen_range(0..u_values.len())],
                healthy_prob: q_values[rng.gen_range(0..q_values.len())],
            })
            .collect();
        Population::new(entries)
    }

    /// Parse the `id,utility,q` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty file; expected header 'id,utility,q'".into(),
                })
            }
        };
        if header.trim() != "id,utility,q" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header 'id,utility,q', got '{}'", header.trim()),
            });
        }
        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let lineno = lineno + 2; // 1-based, after the header
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let utility: f64 = fields[1].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad utility '{}'", fields[1]),
            })?;
            let healthy_prob: f64 = fields[2].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad probability '{}'", fields[2]),
            })?;
            entries.push(Individual {
                id: fields[0].to_string(),
                utility,
                healthy_prob,
            });
        }
        Population::new(entries)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Population::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,utility,q")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.id, e.utility, e.healthy_prob)?;
        }
        Ok(())
    }
}

/// A population compressed into groups of identical (utility, probability)
/// pairs; the MILP and the replication shortcut work on this form.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredPopulation {
    pub clusters: Vec<Cluster>,
}

/// A group of `size` individuals sharing one utility and one healthy
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub size: usize,
    pub utility: f64,
    pub healthy_prob: f64,
}

impl ClusteredPopulation {
    pub fn new(clusters: Vec<Cluster>) -> Result<Self> {
        for (i, c) in clusters.iter().enumerate() {
            if c.size == 0 {
                return Err(Error::validation(format!("cluster {i} has size 0")));
            }
            if !(0.0..=1.0).contains(&c.healthy_prob) || !c.healthy_prob.is_finite() {
                return Err(Error::validation(format!(
                    "cluster {i}: healthy probability {} outside [0,1]",
                    c.healthy_prob
                )));
            }
            if !c.utility.is_finite() || c.utility < 0.0 {
                return Err(Error::validation(format!(
                    "cluster {i}: utility {} must be non-negative",
                    c.utility
                )));
            }
        }
        Ok(ClusteredPopulation { clusters })
    }

    /// Group a population by exact (utility, probability) value.
    ///
    /// Cluster order follows first appearance; members keep their original
    /// indices via [`ClusteredPopulation::expand`].
    pub fn from_population(pop: &Population) -> Self {
        Self::from_population_with_members(pop).0
    }

    /// Like [`ClusteredPopulation::from_population`], also returning each
    /// cluster's member indices in the source population (ascending).
    pub fn from_population_with_members(pop: &Population) -> (Self, Vec<Vec<usize>>) {
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut keys: Vec<(u64, u64)> = Vec::new();
        for (i, e) in pop.entries().iter().enumerate() {
            let key = (e.utility.to_bits(), e.healthy_prob.to_bits());
            match keys.iter().position(|&k| k == key) {
                Some(pos) => {
                    clusters[pos].size += 1;
                    members[pos].push(i);
                }
                None => {
                    keys.push(key);
                    members.push(vec![i]);
                    clusters.push(Cluster {
                        size: 1,
                        utility: e.utility,
                        healthy_prob: e.healthy_prob,
                    });
                }
            }
        }
        (ClusteredPopulation { clusters }, members)
    }

    pub fn total_size(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }

    /// Materialize the clusters into a concrete population, cluster by
    /// cluster; the returned index map gives, per cluster, the indices of its
    /// members in the expanded population.
    pub fn expand(&self) -> (Population, Vec<Vec<usize>>) {
        let mut entries = Vec::with_capacity(self.total_size());
        let mut members = Vec::with_capacity(self.clusters.len());
        for (ci, c) in self.clusters.iter().enumerate() {
            let mut idxs = Vec::with_capacity(c.size);
            for k in 0..c.size {
                idxs.push(entries.len());
                entries.push(Individual {
                    id: format!("c{ci}_{k}"),
                    utility: c.utility,
                    healthy_prob: c.healthy_prob,
                });
            }
            members.push(idxs);
        }
        (
            Population::new(entries).expect("clusters are validated"),
            members,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let pop = Population::from_values(&[3.0, 2.0, 5.0], &[0.9, 0.7, 0.6]).unwrap();
        let mut buf = Vec::new();
        pop.to_csv(&mut buf).unwrap();
        let back = Population::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(pop, back);
    }

    #[test]
    fn csv_row_format() {
        let pop = Population::from_csv_reader("id,utility,q\na,3,0.9\n".as_bytes()).unwrap();
        assert_eq!(pop.len(), 1);
        assert_eq!(pop.get(0).id, "a");
        assert_eq!(pop.u(0), 3.0);
        assert_eq!(pop.q(0), 0.9);
    }

    #[test]
    fn csv_parse_error_carries_line_number() {
        let err =
            Population::from_csv_reader("id,utility,q\na,3,0.9\nb,oops,0.5\n".as_bytes())
                .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_population() {
        let u = Population::default_utility_values();
        let q = Population::default_probability_values();
        let a = Population::random(40, &u, &q, 7).unwrap();
        let b = Population::random(40, &u, &q, 7).unwrap();
        assert_eq!(a, b);
        let c = Population::random(40, &u, &q, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_draws_concentrate_near_mean_utility() {
        // 250 uniform draws from {1..10}: mean 5.5, sd of the sample mean
        // ~0.18, so [5.0, 6.0] holds with overwhelming probability.
        let u = Population::default_utility_values();
        let q = Population::default_probability_values();
        for seed in 0..5 {
            let pop = Population::random(250, &u, &q, seed).unwrap();
            let mean: f64 =
                pop.entries().iter().map(|e| e.utility).sum::<f64>() / pop.len() as f64;
            assert!((5.0..=6.0).contains(&mean), "seed {seed}: mean {mean}");
        }
    }

    #[test]
    fn rejects_bad_probability_and_duplicate_ids() {
        assert!(Population::from_values(&[1.0], &[1.5]).is_err());
        assert!(Population::from_values(&[-1.0], &[0.5]).is_err());
        let dup = vec![
            Individual { id: "x".into(), utility: 1.0, healthy_prob: 0.5 },
            Individual { id: "x".into(), utility: 1.0, healthy_prob: 0.5 },
        ];
        assert!(Population::new(dup).is_err());
    }

    #[test]
    fn clustering_groups_identical_pairs() {
        let pop = Population::from_values(&[1.0, 2.0, 1.0], &[0.5, 0.5, 0.5]).unwrap();
        let cl = ClusteredPopulation::from_population(&pop);
        assert_eq!(cl.clusters.len(), 2);
        assert_eq!(cl.clusters[0].size, 2);
        let (expanded, members) = cl.expand();
        assert_eq!(expanded.len(), 3);
        assert_eq!(members[0], vec![0, 1]);
        assert_eq!(members[1], vec![2]);
    }
}
