//! Mixed-integer linear program for non-overlapping allocation over a
//! clustered population, with the exponential constraint replaced by a
//! piecewise-linear over-approximation.
//!
//! The model maximizes the sum of per-test welfare proxies `w_j` subject to:
//! segment-indicator constraints tying `w_j` to the secant approximation of
//! `exp(l_j)`; value-indicator constraints tying `y_j = log(z_j)` for the
//! integral utility sum `z_j`; the log-linear link
//! `l_j = y_j + sum_i x_ji log q_i`; cluster capacities; and pool-size
//! bounds. Solving the MILP loses at most `max_error * budget` welfare
//! against the true non-overlapping optimum.
//!
//! No solver is embedded: models export to LP-format text for any external
//! MILP solver, and an exhaustive maximizer verifies the formulation and the
//! additive gap at small scale.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::oracle::{multiset_count, OracleLimits};
use crate::population::{Cluster, ClusteredPopulation, Population};
use crate::pwl::PwlExpApprox;
use crate::regime::{Regime, Test};

const MAX_MILP_UTILITY: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq)]
enum VarKind {
    /// Continuous with default bounds 0 <= v.
    Continuous,
    /// Continuous, declared free.
    Free,
    /// Non-negative integer with an explicit upper bound.
    Integer(u64),
    Binary,
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct LinConstraint {
    name: String,
    terms: Vec<(f64, usize)>,
    sense: Sense,
    rhs: f64,
}

/// The assembled model.
#[derive(Debug, Clone)]
pub struct MilpModel {
    /// Clusters that entered the model (positive utility and probability).
    pub clusters: ClusteredPopulation,
    /// Clusters dropped because q = 0 or u = 0.
    pub excluded_clusters: usize,
    pub budget: usize,
    pub pool_cap: usize,
    pub segments: usize,
    pub pwl: PwlExpApprox,
    /// Inclusive range [L, U] of the integral per-test utility sum.
    pub util_range: (u64, u64),
    vars: Vec<Var>,
    constraints: Vec<LinConstraint>,
    /// Indices of the w_j variables, in test order.
    objective: Vec<usize>,
}

/// Build the clustered allocation MILP.
///
/// Utilities must be positive integers (clusters with zero utility or zero
/// healthy probability are dropped first). `segments` controls the accuracy
/// of the exp approximation.
pub fn build_milp(
    clustered: &ClusteredPopulation,
    pool_cap: usize,
    budget: usize,
    segments: usize,
) -> Result<MilpModel> {
    if pool_cap == 0 || budget == 0 {
        return Err(Error::validation("budget and pool cap must be at least 1"));
    }
    let mut kept: Vec<Cluster> = Vec::new();
    let mut excluded = 0usize;
    for c in &clustered.clusters {
        if c.utility.fract() != 0.0 || c.utility < 0.0 {
            return Err(Error::validation(format!(
                "utility {} is not a non-negative integer; the MILP requires integral utilities",
                c.utility
            )));
        }
        if c.utility > MAX_MILP_UTILITY {
            return Err(Error::validation(format!(
                "utility {} exceeds the MILP cap of {MAX_MILP_UTILITY}",
                c.utility
            )));
        }
        if c.healthy_prob == 0.0 || c.utility == 0.0 {
            excluded += 1;
        } else {
            kept.push(c.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::validation(
            "no clusters left after dropping zero-probability/zero-utility ones",
        ));
    }
    let total: usize = kept.iter().map(|c| c.size).sum();
    if budget > total {
        return Err(Error::validation(format!(
            "budget {budget} exceeds the {total} individuals available to pool"
        )));
    }

    let n_clusters = kept.len();
    let u_min = kept.iter().map(|c| c.utility).fold(f64::INFINITY, f64::min);
    let u_max = kept.iter().map(|c| c.utility).fold(0.0f64, f64::max);
    let q_min = kept
        .iter()
        .map(|c| c.healthy_prob)
        .fold(f64::INFINITY, f64::min);
    let q_max = kept.iter().map(|c| c.healthy_prob).fold(0.0f64, f64::max);

    let domain_lo = u_min.ln() + pool_cap as f64 * q_min.ln();
    let mut domain_hi = (pool_cap as f64 * u_max).ln() + q_max.ln();
    if domain_hi <= domain_lo {
        // Single cluster with q = 1 and G = 1 collapses the domain to a point.
        domain_hi = domain_lo + 1e-6;
    }
    let pwl = PwlExpApprox::equal_error(domain_lo, domain_hi, segments)?;

    let util_lo = u_min as u64;
    let util_hi = (pool_cap as u64) * (u_max as u64);

    let mut model = MilpModel {
        clusters: ClusteredPopulation::new(kept.clone())?,
        excluded_clusters: excluded,
        budget,
        pool_cap,
        segments,
        pwl,
        util_range: (util_lo, util_hi),
        vars: Vec::new(),
        constraints: Vec::new(),
        objective: Vec::new(),
    };

    // Variables, test-major. Layout per test j:
    //   x_j_i (integer), w_j, l_j, y_j, z_j, d_j_k, v_j_k, g_j_k
    let mut x = vec![vec![0usize; n_clusters]; budget];
    let mut w = vec![0usize; budget];
    let mut l = vec![0usize; budget];
    let mut y = vec![0usize; budget];
    let mut z = vec![0usize; budget];
    let mut d = vec![vec![0usize; segments]; budget];
    let mut v = vec![vec![0usize; segments]; budget];
    let gamma_len = (util_hi - util_lo + 1) as usize;
    let mut g = vec![vec![0usize; gamma_len]; budget];
    for j in 0..budget {
        for (i, c) in kept.iter().enumerate() {
            x[j][i] = model.push_var(
                format!("x_{j}_{i}"),
                VarKind::Integer(c.size.min(pool_cap) as u64),
            );
        }
        w[j] = model.push_var(format!("w_{j}"), VarKind::Continuous);
        l[j] = model.push_var(format!("l_{j}"), VarKind::Free);
        y[j] = model.push_var(format!("y_{j}"), VarKind::Free);
        z[j] = model.push_var(format!("z_{j}"), VarKind::Continuous);
        for k in 0..segments {
            d[j][k] = model.push_var(format!("d_{j}_{k}"), VarKind::Binary);
        }
        for k in 0..segments {
            v[j][k] = model.push_var(format!("v_{j}_{k}"), VarKind::Free);
        }
        for (off, gk) in g[j].iter_mut().enumerate() {
            *gk = model.push_var(
                format!("g_{j}_{}", util_lo + off as u64),
                VarKind::Binary,
            );
        }
    }
    model.objective = w.clone();

    for j in 0..budget {
        // w_j <= sum_k a_k v_j_k + b_k d_j_k
        let mut terms = vec![(1.0, w[j])];
        for k in 0..segments {
            terms.push((-model.pwl.slopes[k], v[j][k]));
            terms.push((-model.pwl.intercepts[k], d[j][k]));
        }
        model.push_constraint(format!("exp_ub_{j}"), terms, Sense::Le, 0.0);

        // exactly one active segment
        let terms = d[j].iter().map(|&dv| (1.0, dv)).collect();
        model.push_constraint(format!("seg_pick_{j}"), terms, Sense::Eq, 1.0);

        // sum_k v_j_k = l_j
        let mut terms: Vec<(f64, usize)> = v[j].iter().map(|&vv| (1.0, vv)).collect();
        terms.push((-1.0, l[j]));
        model.push_constraint(format!("seg_sum_{j}"), terms, Sense::Eq, 0.0);

        // c_k d_j_k <= v_j_k <= c_{k+1} d_j_k
        for k in 0..segments {
            model.push_constraint(
                format!("seg_lo_{j}_{k}"),
                vec![(1.0, v[j][k]), (-model.pwl.breakpoints[k], d[j][k])],
                Sense::Ge,
                0.0,
            );
            model.push_constraint(
                format!("seg_hi_{j}_{k}"),
                vec![(1.0, v[j][k]), (-model.pwl.breakpoints[k + 1], d[j][k])],
                Sense::Le,
                0.0,
            );
        }

        // l_j = y_j + sum_i x_j_i log q_i
        let mut terms = vec![(1.0, l[j]), (-1.0, y[j])];
        for (i, c) in kept.iter().enumerate() {
            terms.push((-c.healthy_prob.ln(), x[j][i]));
        }
        model.push_constraint(format!("log_link_{j}"), terms, Sense::Eq, 0.0);

        // exactly one active utility value
        let terms = g[j].iter().map(|&gv| (1.0, gv)).collect();
        model.push_constraint(format!("val_pick_{j}"), terms, Sense::Eq, 1.0);

        // z_j = sum_k k g_j_k
        let mut terms = vec![(1.0, z[j])];
        for (off, &gv) in g[j].iter().enumerate() {
            terms.push((-((util_lo + off as u64) as f64), gv));
        }
        model.push_constraint(format!("val_sum_{j}"), terms, Sense::Eq, 0.0);

        // y_j = sum_k log(k) g_j_k
        let mut terms = vec![(1.0, y[j])];
        for (off, &gv) in g[j].iter().enumerate() {
            terms.push((-(((util_lo + off as u64) as f64).ln()), gv));
        }
        model.push_constraint(format!("log_val_{j}"), terms, Sense::Eq, 0.0);

        // z_j = sum_i u_i x_j_i
        let mut terms = vec![(1.0, z[j])];
        for (i, c) in kept.iter().enumerate() {
            terms.push((-c.utility, x[j][i]));
        }
        model.push_constraint(format!("util_sum_{j}"), terms, Sense::Eq, 0.0);

        // 1 <= sum_i x_j_i <= G
        let terms: Vec<(f64, usize)> = x[j].iter().map(|&xv| (1.0, xv)).collect();
        model.push_constraint(format!("pool_min_{j}"), terms.clone(), Sense::Ge, 1.0);
        model.push_constraint(format!("pool_max_{j}"), terms, Sense::Le, pool_cap as f64);
    }

    // sum_j x_j_i <= n_i
    for (i, c) in kept.iter().enumerate() {
        let terms: Vec<(f64, usize)> = (0..budget).map(|j| (1.0, x[j][i])).collect();
        model.push_constraint(format!("cap_{i}"), terms, Sense::Le, c.size as f64);
    }

    Ok(model)
}

impl MilpModel {
    fn push_var(&mut self, name: String, kind: VarKind) -> usize {
        self.vars.push(Var { name, kind });
        self.vars.len() - 1
    }

    fn push_constraint(
        &mut self,
        name: String,
        terms: Vec<(f64, usize)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(LinConstraint { name, terms, sense, rhs });
    }

    pub fn variable_count(&self) -> usize {
        self.vars.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn integer_count(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| matches!(v.kind, VarKind::Integer(_)))
            .count()
    }

    /// Proxy objective of an integral assignment: the piecewise-linear
    /// approximation applied to each test's log-welfare. Errors name the
    /// violated constraint family.
    ///
    /// `assignment[j][i]` = individuals of cluster `i` pooled into test `j`.
    pub fn proxy_objective(&self, assignment: &[Vec<u64>]) -> Result<f64> {
        self.check_feasible(assignment)?;
        let mut total = 0.0;
        for row in assignment {
            total += self.pwl.eval(self.log_welfare(row));
        }
        Ok(total)
    }

    /// True expected welfare of an integral assignment.
    pub fn assignment_welfare(&self, assignment: &[Vec<u64>]) -> Result<f64> {
        self.check_feasible(assignment)?;
        Ok(assignment.iter().map(|row| self.test_welfare(row)).sum())
    }

    fn test_welfare(&self, row: &[u64]) -> f64 {
        let mut z = 0.0;
        let mut q = 1.0;
        for (c, &count) in self.clusters.clusters.iter().zip(row) {
            z += c.utility * count as f64;
            q *= c.healthy_prob.powi(count as i32);
        }
        q * z
    }

    fn log_welfare(&self, row: &[u64]) -> f64 {
        let mut z = 0.0;
        let mut log_q = 0.0;
        for (c, &count) in self.clusters.clusters.iter().zip(row) {
            z += c.utility * count as f64;
            log_q += c.healthy_prob.ln() * count as f64;
        }
        z.ln() + log_q
    }

    fn check_feasible(&self, assignment: &[Vec<u64>]) -> Result<()> {
        if assignment.len() != self.budget {
            return Err(Error::validation(format!(
                "assignment has {} tests, model budget is {}",
                assignment.len(),
                self.budget
            )));
        }
        let n_clusters = self.clusters.clusters.len();
        for (j, row) in assignment.iter().enumerate() {
            if row.len() != n_clusters {
                return Err(Error::validation(format!(
                    "test {j}: expected {n_clusters} cluster counts"
                )));
            }
            let size: u64 = row.iter().sum();
            if size == 0 || size > self.pool_cap as u64 {
                return Err(Error::validation(format!(
                    "pool-size constraint violated for test {j}: size {size}"
                )));
            }
        }
        for i in 0..n_clusters {
            let used: u64 = assignment.iter().map(|row| row[i]).sum();
            if used > self.clusters.clusters[i].size as u64 {
                return Err(Error::validation(format!(
                    "cluster-capacity constraint violated for cluster {i}: {used} used"
                )));
            }
        }
        Ok(())
    }

    /// Write the model as LP-format text (Maximize / Subject To / Bounds /
    /// Generals / Binaries / End). Deterministic output.
    pub fn write_lp<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "\\ pooled-testing allocation: budget={} pool_cap={} segments={} clusters={}",
            self.budget,
            self.pool_cap,
            self.segments,
            self.clusters.clusters.len()
        )?;
        writeln!(out, "Maximize")?;
        let obj = self
            .objective
            .iter()
            .map(|&vi| self.vars[vi].name.clone())
            .collect::<Vec<_>>()
            .join(" + ");
        writeln!(out, " obj: {obj}")?;
        writeln!(out, "Subject To")?;
        for c in &self.constraints {
            let mut line = format!(" {}:", c.name);
            let mut pos = 0;
            for &(coef, vi) in &c.terms {
                if coef == 0.0 {
                    continue; // zero terms are omitted
                }
                let name = &self.vars[vi].name;
                if pos == 0 {
                    if coef == 1.0 {
                        line.push_str(&format!(" {name}"));
                    } else if coef == -1.0 {
                        line.push_str(&format!(" - {name}"));
                    } else {
                        line.push_str(&format!(" {coef} {name}"));
                    }
                } else if coef >= 0.0 {
                    if coef == 1.0 {
                        line.push_str(&format!(" + {name}"));
                    } else {
                        line.push_str(&format!(" + {coef} {name}"));
                    }
                } else if coef == -1.0 {
                    line.push_str(&format!(" - {name}"));
                } else {
                    line.push_str(&format!(" - {} {name}", -coef));
                }
                pos += 1;
            }
            let sense = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(out, "{line} {sense} {}", c.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for v in &self.vars {
            match v.kind {
                VarKind::Free => writeln!(out, " {} free", v.name)?,
                VarKind::Integer(hi) => writeln!(out, " 0 <= {} <= {hi}", v.name)?,
                _ => {}
            }
        }
        writeln!(out, "Generals")?;
        for v in &self.vars {
            if matches!(v.kind, VarKind::Integer(_)) {
                writeln!(out, " {}", v.name)?;
            }
        }
        writeln!(out, "Binaries")?;
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                writeln!(out, " {}", v.name)?;
            }
        }
        writeln!(out, "End")?;
        Ok(())
    }

    pub fn export_lp(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_lp(&mut f)
    }
}

/// Counts recovered from LP-format text.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSummary {
    pub objective_terms: usize,
    pub constraints: usize,
    pub variables: usize,
    pub generals: usize,
    pub binaries: usize,
}

/// Parse LP text back into counts; used to validate exports round-trip.
pub fn parse_lp_summary<R: std::io::Read>(reader: R) -> Result<LpSummary> {
    use std::io::BufRead;
    let mut section = String::new();
    let mut objective_terms = 0usize;
    let mut constraints = 0usize;
    let mut generals = 0usize;
    let mut binaries = 0usize;
    let mut names: std::collections::HashSet<String> = std::collections::HashSet::new();

    let is_var = |tok: &str| {
        tok.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && !matches!(tok, "free" | "End")
    };

    for line in std::io::BufReader::new(reader).lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        match trimmed {
            "Maximize" | "Minimize" | "Subject To" | "Bounds" | "Generals" | "Binaries"
            | "End" => {
                section = trimmed.to_string();
                continue;
            }
            _ => {}
        }
        let body = match trimmed.split_once(':') {
            Some((_, rest)) => rest,
            None => trimmed,
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match section.as_str() {
            "Maximize" | "Minimize" => {
                for t in &tokens {
                    if is_var(t) {
                        objective_terms += 1;
                        names.insert(t.to_string());
                    }
                }
            }
            "Subject To" => {
                constraints += 1;
                for t in &tokens {
                    if is_var(t) {
                        names.insert(t.to_string());
                    }
                }
            }
            "Bounds" => {
                for t in &tokens {
                    if is_var(t) {
                        names.insert(t.to_string());
                    }
                }
            }
            "Generals" => {
                for t in &tokens {
                    if is_var(t) {
                        generals += 1;
                        names.insert(t.to_string());
                    }
                }
            }
            "Binaries" => {
                for t in &tokens {
                    if is_var(t) {
                        binaries += 1;
                        names.insert(t.to_string());
                    }
                }
            }
            _ => {}
        }
    }
    Ok(LpSummary {
        objective_terms,
        constraints,
        variables: names.len(),
        generals,
        binaries,
    })
}

/// Exhaustively solved small instance: the proxy maximizer, its true
/// welfare, and the additive guarantee.
#[derive(Debug)]
pub struct SmallMilpSolution {
    pub regime: Regime,
    /// True expected welfare of the returned regime.
    pub welfare: f64,
    /// Maximized proxy objective (piecewise-linear welfare).
    pub proxy_objective: f64,
    /// Additive optimality gap bound: max_error * budget.
    pub additive_guarantee: f64,
    pub model: MilpModel,
}

/// Stand-in for an external MILP solver at desk scale: exhaustively
/// maximizes the proxy objective over feasible assignments and materializes
/// the winner into a concrete regime. Larger instances must export the LP.
pub fn approx_regime_small(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    segments: usize,
) -> Result<SmallMilpSolution> {
    approx_regime_small_with_limits(pop, pool_cap, budget, segments, &OracleLimits::default())
}

pub fn approx_regime_small_with_limits(
    pop: &Population,
    pool_cap: usize,
    budget: usize,
    segments: usize,
    limits: &OracleLimits,
) -> Result<SmallMilpSolution> {
    let (clustered, members) = ClusteredPopulation::from_population_with_members(pop);
    let model = build_milp(&clustered, pool_cap, budget, segments)?;

    // Member lists for the clusters that made it into the model, in model
    // cluster order.
    let kept_members: Vec<&Vec<usize>> = clustered
        .clusters
        .iter()
        .zip(&members)
        .filter(|(c, _)| c.healthy_prob > 0.0 && c.utility > 0.0)
        .map(|(_, m)| m)
        .collect();
    let kept = &model.clusters.clusters;
    let n_clusters = kept.len();

    // Enumerate per-test count profiles.
    #[derive(Debug)]
    struct Profile {
        counts: Vec<u64>,
        proxy: f64,
    }
    let mut profiles: Vec<Profile> = Vec::new();
    let mut counts = vec![0u64; n_clusters];
    fn enumerate(
        kept: &[Cluster],
        model: &MilpModel,
        counts: &mut Vec<u64>,
        c: usize,
        used: usize,
        cap: usize,
        out: &mut Vec<Profile>,
    ) {
        if c == kept.len() {
            if used > 0 {
                out.push(Profile {
                    counts: counts.clone(),
                    proxy: model.pwl.eval(model.log_welfare(counts)),
                });
            }
            return;
        }
        let max_take = kept[c].size.min(cap - used);
        for k in 0..=max_take {
            counts[c] = k as u64;
            enumerate(kept, model, counts, c + 1, used + k, cap, out);
        }
        counts[c] = 0;
    }
    enumerate(
        kept,
        &model,
        &mut counts,
        0,
        0,
        pool_cap.min(model.clusters.total_size()),
        &mut profiles,
    );

    let families = multiset_count(profiles.len() as u128, budget as u32);
    if profiles.len() as u128 > limits.max_subsets as u128
        || families > limits.max_subsets as u128
    {
        return Err(Error::Capacity {
            what: "proxy-objective maximization",
            required: families.max(profiles.len() as u128),
            limit: limits.max_subsets as u128,
        });
    }

    // Search non-decreasing profile-index sequences of exactly `budget`
    // tests under the cluster capacities.
    struct Search<'a> {
        profiles: &'a [Profile],
        sizes: Vec<u64>,
        budget: usize,
        used: Vec<u64>,
        stack: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, first: usize, proxy_sum: f64) {
            if self.stack.len() == self.budget {
                if self.best.as_ref().is_none_or(|(b, _)| proxy_sum > *b) {
                    self.best = Some((proxy_sum, self.stack.clone()));
                }
                return;
            }
            for pi in first..self.profiles.len() {
                let p = &self.profiles[pi];
                if p.counts
                    .iter()
                    .zip(&self.used)
                    .zip(&self.sizes)
                    .any(|((&c, &u), &s)| u + c > s)
                {
                    continue;
                }
                for (u, &c) in self.used.iter_mut().zip(&p.counts) {
                    *u += c;
                }
                self.stack.push(pi);
                self.go(pi, proxy_sum + p.proxy);
                self.stack.pop();
                for (u, &c) in self.used.iter_mut().zip(&p.counts) {
                    *u -= c;
                }
            }
        }
    }
    let mut search = Search {
        profiles: &profiles,
        sizes: kept.iter().map(|c| c.size as u64).collect(),
        budget,
        used: vec![0; n_clusters],
        stack: Vec::new(),
        best: None,
    };
    search.go(0, 0.0);
    let (proxy_objective, chosen) = search
        .best
        .ok_or_else(|| Error::validation("no feasible assignment exists"))?;

    // Materialize: each test consumes the next unused members per cluster.
    let mut cursor = vec![0usize; n_clusters];
    let mut tests = Vec::with_capacity(budget);
    for &pi in &chosen {
        let mut ids = Vec::new();
        for (i, &cnt) in profiles[pi].counts.iter().enumerate() {
            let cnt = cnt as usize;
            ids.extend_from_slice(&kept_members[i][cursor[i]..cursor[i] + cnt]);
            cursor[i] += cnt;
        }
        tests.push(Test::new(ids)?);
    }
    tests.sort_by(|a, b| a.members().first().cmp(&b.members().first()));
    let regime = Regime::new(budget, pool_cap, tests)?;
    let welfare = crate::welfare::regime_welfare_nonoverlapping(pop, &regime)?.total;

    Ok(SmallMilpSolution {
        regime,
        welfare,
        proxy_objective,
        additive_guarantee: model.pwl.max_error * budget as f64,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_nonoverlapping;

    fn single_cluster() -> ClusteredPopulation {
        ClusteredPopulation::new(vec![Cluster { size: 1, utility: 1.0, healthy_prob: 1.0 }])
            .unwrap()
    }

    #[test]
    fn variable_and_constraint_counts_match_formulas() {
        let model = build_milp(&single_cluster(), 1, 1, 1).unwrap();
        // Per test: C integers + 4 reals + K deltas + K vs + (U-L+1) gammas.
        let (lo, hi) = model.util_range;
        let gammas = (hi - lo + 1) as usize;
        assert_eq!(model.variable_count(), 1 + 4 + 1 + 1 + gammas);
        // Per test: 10 + 2K rows, plus one capacity row per cluster.
        assert_eq!(model.constraint_count(), 10 + 2 + 1);

        let clustered = ClusteredPopulation::new(vec![
            Cluster { size: 4, utility: 3.0, healthy_prob: 0.9 },
            Cluster { size: 2, utility: 7.0, healthy_prob: 0.5 },
        ])
        .unwrap();
        let (budget, cap, segments) = (3usize, 4usize, 5usize);
        let model = build_milp(&clustered, cap, budget, segments).unwrap();
        let gammas = (model.util_range.1 - model.util_range.0 + 1) as usize;
        assert_eq!(
            model.variable_count(),
            budget * (2 + 4 + 2 * segments + gammas)
        );
        assert_eq!(
            model.constraint_count(),
            budget * (10 + 2 * segments) + 2
        );
        assert_eq!(model.util_range, (3, 28));
    }

    #[test]
    fn trivial_instance_has_unit_objective() {
        let sol = {
            let pop = Population::from_values(&[1.0], &[1.0]).unwrap();
            approx_regime_small(&pop, 1, 1, 1).unwrap()
        };
        assert_eq!(sol.regime.tests.len(), 1);
        assert!((sol.welfare - 1.0).abs() < 1e-9);
        assert!(sol.proxy_objective >= 1.0 - 1e-9);
    }

    #[test]
    fn rejects_non_integral_utilities() {
        let clustered = ClusteredPopulation::new(vec![Cluster {
            size: 2,
            utility: 1.5,
            healthy_prob: 0.9,
        }])
        .unwrap();
        assert!(matches!(
            build_milp(&clustered, 2, 1, 2),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn zero_probability_clusters_are_excluded() {
        let clustered = ClusteredPopulation::new(vec![
            Cluster { size: 2, utility: 2.0, healthy_prob: 0.0 },
            Cluster { size: 2, utility: 2.0, healthy_prob: 0.8 },
        ])
        .unwrap();
        let model = build_milp(&clustered, 2, 1, 2).unwrap();
        assert_eq!(model.excluded_clusters, 1);
        assert_eq!(model.clusters.clusters.len(), 1);
    }

    #[test]
    fn lp_export_round_trips_counts() {
        let clustered = ClusteredPopulation::new(vec![
            Cluster { size: 4, utility: 3.0, healthy_prob: 0.9 },
            Cluster { size: 2, utility: 7.0, healthy_prob: 0.5 },
        ])
        .unwrap();
        let model = build_milp(&clustered, 3, 2, 4).unwrap();
        let mut buf = Vec::new();
        model.write_lp(&mut buf).unwrap();
        let summary = parse_lp_summary(buf.as_slice()).unwrap();
        assert_eq!(summary.objective_terms, model.budget);
        assert_eq!(summary.constraints, model.constraint_count());
        assert_eq!(summary.variables, model.variable_count());
        assert_eq!(summary.generals, model.integer_count());
        assert_eq!(summary.binaries, model.binary_count());
    }

    #[test]
    fn lp_export_golden_fixture() {
        let model = build_milp(&single_cluster(), 1, 1, 1).unwrap();
        let mut buf = Vec::new();
        model.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected = concat!(
            "\\ pooled-testing allocation: budget=1 pool_cap=1 segments=1 clusters=1\n",
            "Maximize\n",
            " obj: w_0\n",
            "Subject To\n",
            " exp_ub_0: w_0 - 1.0000004999621837 v_0_0 - d_0_0 <= 0\n",
            " seg_pick_0: d_0_0 = 1\n",
            " seg_sum_0: v_0_0 - l_0 = 0\n",
            " seg_lo_0_0: v_0_0 >= 0\n",
            " seg_hi_0_0: v_0_0 - 0.000001 d_0_0 <= 0\n",
            " log_link_0: l_0 - y_0 = 0\n",
            " val_pick_0: g_0_1 = 1\n",
            " val_sum_0: z_0 - g_0_1 = 0\n",
            " log_val_0: y_0 = 0\n",
            " util_sum_0: z_0 - x_0_0 = 0\n",
            " pool_min_0: x_0_0 >= 1\n",
            " pool_max_0: x_0_0 <= 1\n",
            " cap_0: x_0_0 <= 1\n",
            "Bounds\n",
            " 0 <= x_0_0 <= 1\n",
            " l_0 free\n",
            " y_0 free\n",
            " v_0_0 free\n",
            "Generals\n",
            " x_0_0\n",
            "Binaries\n",
            " d_0_0\n",
            " g_0_1\n",
            "End\n",
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn proxy_dominates_welfare_within_additive_gap() {
        let u_vals = Population::default_utility_values();
        let q_vals: Vec<f64> = (1..=10).map(|v| v as f64 / 10.0).collect();
        for seed in 0..15 {
            let pop = Population::random(7, &u_vals, &q_vals, 11_000 + seed).unwrap();
            let (clustered, _) = ClusteredPopulation::from_population_with_members(&pop);
            let model = build_milp(&clustered, 3, 2, 4).unwrap();
            // Random-ish feasible assignments: singletons and pairs.
            let n_clusters = model.clusters.clusters.len();
            for a in 0..n_clusters {
                for b in 0..n_clusters {
                    if a == b && model.clusters.clusters[a].size < 2 {
                        continue;
                    }
                    let mut rows = vec![vec![0u64; n_clusters]; 2];
                    rows[0][a] = 1;
                    rows[1][b] = 1;
                    let sigma = model.assignment_welfare(&rows).unwrap();
                    let proxy = model.proxy_objective(&rows).unwrap();
                    assert!(proxy >= sigma - 1e-9);
                    assert!(proxy <= sigma + model.pwl.max_error * 2.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn infeasible_assignments_name_the_constraint() {
        let model = build_milp(&single_cluster(), 1, 1, 1).unwrap();
        let err = model.proxy_objective(&[vec![0]]).unwrap_err();
        assert!(err.to_string().contains("pool-size"));
        let err = model.proxy_objective(&[vec![2]]).unwrap_err();
        assert!(err.to_string().contains("pool-size") || err.to_string().contains("cluster"));
    }

    #[test]
    fn small_solver_tracks_oracle_within_guarantee() {
        let u_vals = Population::default_utility_values();
        let q_vals = Population::default_probability_values();
        let mut run = 0;
        for seed in 0..20 {
            let pop = Population::random(8, &u_vals, &q_vals, 12_000 + seed).unwrap();
            let positive = (0..pop.len()).filter(|&i| pop.q(i) > 0.0).count();
            if positive < 2 {
                continue;
            }
            for segments in [1usize, 4, 16] {
                let sol = approx_regime_small(&pop, 3, 2, segments).unwrap();
                let (_, opt) = brute_force_nonoverlapping(&pop, 3, 2).unwrap();
                let gap = opt - sol.welfare;
                assert!(gap >= -1e-9, "seed {seed} K={segments}: negative gap {gap}");
                assert!(
                    gap <= sol.additive_guarantee + 1e-9,
                    "seed {seed} K={segments}: gap {gap} > {}",
                    sol.additive_guarantee
                );
                run += 1;
            }
        }
        assert!(run >= 30);
    }

    #[test]
    fn finer_approximation_closes_the_gap() {
        let pop = Population::from_values(
            &[4.0, 9.0, 2.0, 7.0, 5.0, 1.0],
            &[0.9, 0.5, 0.8, 0.3, 0.6, 1.0],
        )
        .unwrap();
        let (_, opt) = brute_force_nonoverlapping(&pop, 3, 2).unwrap();
        let mut prev_guarantee = f64::INFINITY;
        for segments in [1usize, 4, 16, 64] {
            let sol = approx_regime_small(&pop, 3, 2, segments).unwrap();
            assert!(sol.additive_guarantee < prev_guarantee);
            prev_guarantee = sol.additive_guarantee;
            assert!(opt - sol.welfare <= sol.additive_guarantee + 1e-9);
        }
        // At K=64 the proxy optimum is welfare-optimal for this instance.
        let sol = approx_regime_small(&pop, 3, 2, 64).unwrap();
        assert!((sol.welfare - opt).abs() < 2.0 * sol.additive_guarantee + 1e-9);
    }
}
