//! User → edge routing with equal-split rate allocation.
//!
//! For a fixed association the best rates split each column's capacity
//! evenly among its users ([`recover_rates`]), so routing reduces to
//! choosing the association. [`solve_lp_p4`] solves the fractional
//! relaxation of that min-max problem, [`randomized_round`] samples one
//! column per user from the fractional rows, and [`solve_inc`] keeps the
//! best of several roundings. [`solve_bruteforce`] enumerates every
//! association and serves as the exact oracle on small instances.

mod baselines;
mod brute;
mod lp;
pub mod simplex;

pub use baselines::{assign_nearest_edge, assign_only_cloud};
pub use brute::{solve_bruteforce, BRUTE_FORCE_LIMIT};
pub use lp::solve_lp_p4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{
    total_latency, AssociationMatrix, ModelSize, RateAllocation, Topology, CLOUD,
};

pub const DEFAULT_ROUNDING_TRIALS: usize = 16;

/// The users selected for one round on a given network.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingInstance {
    topo: Topology,
    size: ModelSize,
    selected_users: Vec<usize>,
}

impl RoutingInstance {
    /// Restricts `topo` to `selected_users`; solutions index users by their
    /// position in that list.
    pub fn new(topo: &Topology, size: ModelSize, selected_users: Vec<usize>) -> Result<Self> {
        let restricted = topo.select_users(&selected_users)?;
        Ok(Self { topo: restricted, size, selected_users })
    }

    /// All users of the topology.
    pub fn all_users(topo: Topology, size: ModelSize) -> Self {
        let selected_users = (0..topo.num_users()).collect();
        Self { topo, size, selected_users }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn size(&self) -> ModelSize {
        self.size
    }

    pub fn selected_users(&self) -> &[usize] {
        &self.selected_users
    }

    pub fn num_users(&self) -> usize {
        self.topo.num_users()
    }
}

/// Optimal point of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    /// K × columns, rows sum to one.
    pub assignment: Vec<Vec<f64>>,
    /// Relaxed latency, seconds; a lower bound on every integral association.
    pub y: f64,
    /// Per-edge auxiliary backhaul terms, seconds.
    pub gamma: Vec<f64>,
}

impl FractionalSolution {
    pub fn is_binary(&self) -> bool {
        self.assignment
            .iter()
            .flatten()
            .all(|&v| v.abs() <= 1e-9 || (v - 1.0).abs() <= 1e-9)
    }

    pub fn fractional_rows(&self) -> usize {
        self.assignment
            .iter()
            .filter(|row| row.iter().any(|&v| v > 1e-9 && v < 1.0 - 1e-9))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSolution {
    pub assignment: AssociationMatrix,
    pub rates: RateAllocation,
    /// Aggregation latency of this routing, seconds.
    pub objective_s: f64,
    /// Whether edges aggregate before forwarding.
    pub ina_enabled: bool,
    /// Relaxation bound the solution was rounded from, if any.
    pub lower_bound_s: Option<f64>,
}

impl RoutingSolution {
    /// Evaluates `assignment` with equal-split rates.
    fn evaluate(
        assignment: AssociationMatrix,
        topo: &Topology,
        size: ModelSize,
        ina_enabled: bool,
    ) -> Result<Self> {
        let rates = recover_rates(&assignment, topo);
        let report = total_latency(&assignment, &rates, size, topo, ina_enabled)?;
        Ok(Self {
            assignment,
            rates,
            objective_s: report.total_s,
            ina_enabled,
            lower_bound_s: None,
        })
    }
}

/// Equal share of each column's uplink for its associated users.
pub fn recover_rates(a: &AssociationMatrix, topo: &Topology) -> RateAllocation {
    let loads = a.loads();
    let mut r = RateAllocation::zeros(a.num_users(), a.num_columns());
    for (k, &c) in a.columns().iter().enumerate() {
        r.set(k, c, topo.column_fronthaul_bps(c) / loads[c] as f64);
    }
    r
}

/// Aggregation latency of `a` under equal-split rates and edge aggregation,
/// computed from column loads alone.
pub fn p2_objective(a: &AssociationMatrix, instance: &RoutingInstance) -> f64 {
    let topo = instance.topology();
    let d = instance.size().bits();
    a.loads()
        .iter()
        .enumerate()
        .filter(|&(_, &load)| load > 0)
        .map(|(c, &load)| column_time(topo, c, load, d))
        .fold(0.0, f64::max)
}

/// Fronthaul plus aggregated backhaul time of a column carrying `load` users.
pub(crate) fn column_time(topo: &Topology, column: usize, load: usize, bits: f64) -> f64 {
    if load == 0 {
        return 0.0;
    }
    // written as D / (B / |K_m|) to match the per-user equal-split rate
    let fronthaul = bits / (topo.column_fronthaul_bps(column) / load as f64);
    let backhaul = match topo.column_backhaul_bps(column) {
        Some(bk) => (bits / bk).min(bits * load as f64 / bk),
        None => 0.0,
    };
    fronthaul + backhaul
}

/// Samples one column per user with probability equal to its fractional
/// row; a binary relaxation is returned as is.
pub fn randomized_round(
    frac: &FractionalSolution,
    instance: &RoutingInstance,
    rng_seed: u64,
) -> Result<RoutingSolution> {
    let topo = instance.topology();
    let cols = topo.num_columns();
    if frac.assignment.len() != topo.num_users() {
        return Err(Error::MalformedSolution(format!(
            "{} fractional rows for {} users",
            frac.assignment.len(),
            topo.num_users()
        )));
    }
    for (k, row) in frac.assignment.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::MalformedSolution(format!("row {k} has {} columns", row.len())));
        }
        if row.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            return Err(Error::MalformedSolution(format!("row {k} has a negative entry")));
        }
        if let Some(c) = (0..cols).find(|&c| row[c] > 1e-9 && !topo.column_allowed(k, c)) {
            return Err(Error::MalformedSolution(format!(
                "row {k} puts mass on unreachable column {c}"
            )));
        }
    }

    let columns = if frac.is_binary() {
        frac.assignment
            .iter()
            .map(|row| (0..cols).find(|&c| row[c] > 0.5))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MalformedSolution("binary row without a one".into()))?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut columns = Vec::with_capacity(frac.assignment.len());
        for (k, row) in frac.assignment.iter().enumerate() {
            let mass: f64 = row.iter().map(|v| v.max(0.0)).sum();
            if mass <= 0.0 {
                return Err(Error::MalformedSolution(format!("row {k} has no probability mass")));
            }
            // every row draws once so later rows do not depend on earlier outcomes
            let u = rng.gen::<f64>() * mass;
            let mut acc = 0.0;
            let mut pick = None;
            for (c, &v) in row.iter().enumerate() {
                if v <= 0.0 {
                    continue;
                }
                acc += v;
                pick = Some(c);
                if u < acc {
                    break;
                }
            }
            columns.push(pick.expect("positive mass has a positive entry"));
        }
        columns
    };

    let assignment = AssociationMatrix::new(columns, cols)?;
    let rates = recover_rates(&assignment, topo);
    let objective_s = p2_objective(&assignment, instance);
    Ok(RoutingSolution {
        assignment,
        rates,
        objective_s,
        ina_enabled: true,
        lower_bound_s: Some(frac.y),
    })
}

/// Seed of trial `index` under master seed `master` (splitmix64 mixing).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Relaxation plus the best of `num_rounding_trials` roundings. Trial `t`
/// uses `derive_seed(rng_seed, t)`; ties keep the lowest trial index.
pub fn solve_inc(
    instance: &RoutingInstance,
    rng_seed: u64,
    num_rounding_trials: usize,
) -> Result<RoutingSolution> {
    let frac = solve_lp_p4(instance)?;
    round_best_of(&frac, instance, rng_seed, num_rounding_trials)
}

pub fn round_best_of(
    frac: &FractionalSolution,
    instance: &RoutingInstance,
    rng_seed: u64,
    num_rounding_trials: usize,
) -> Result<RoutingSolution> {
    if num_rounding_trials == 0 {
        return Err(Error::InvalidInput("need at least one rounding trial".into()));
    }
    let trials: Vec<RoutingSolution> = (0..num_rounding_trials as u64)
        .into_par_iter()
        .map(|t| randomized_round(frac, instance, derive_seed(rng_seed, t)))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in trials.iter().enumerate() {
        if s.objective_s < trials[best].objective_s {
            best = i;
        }
    }
    Ok(trials.into_iter().nth(best).expect("at least one trial"))
}

/// Approximation factor `2 ln K / y† + 3`, with `y†` in seconds.
pub fn theorem2_bound(num_users: usize, y_dagger: f64) -> Result<f64> {
    if num_users < 2 {
        return Err(Error::InvalidInput(format!("bound needs at least 2 users, got {num_users}")));
    }
    bound_factor(num_users as f64, y_dagger)
}

/// [`theorem2_bound`] for a real-valued user count.
pub fn bound_factor(num_users: f64, y_dagger: f64) -> Result<f64> {
    if !(num_users >= 2.0 && num_users.is_finite()) {
        return Err(Error::InvalidInput(format!("bound needs at least 2 users, got {num_users}")));
    }
    if !(y_dagger > 0.0 && y_dagger.is_finite()) {
        return Err(Error::InvalidInput(format!("lower bound must be positive, got {y_dagger}")));
    }
    Ok(2.0 * num_users.ln() / y_dagger + 3.0)
}

/// Whether every user of `a` sits on the direct cloud column.
pub fn is_all_cloud(a: &AssociationMatrix) -> bool {
    a.columns().iter().all(|&c| c == CLOUD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeNode, Point, BPS_PER_GBPS};

    fn edge(fr: f64, bk: f64) -> EdgeNode {
        EdgeNode {
            position: Point::default(),
            fronthaul_bps: fr * BPS_PER_GBPS,
            backhaul_bps: bk * BPS_PER_GBPS,
        }
    }

    fn instance(edges: Vec<EdgeNode>, k: usize, direct: bool) -> RoutingInstance {
        let t = Topology::fully_connected(
            edges,
            vec![Point::default(); k],
            2.0 * BPS_PER_GBPS,
            2.0 * BPS_PER_GBPS,
            direct,
        )
        .unwrap();
        RoutingInstance::all_users(t, ModelSize::from_megabytes(232.0).unwrap())
    }

    #[test]
    fn equal_split_rates() {
        let inst = instance(vec![edge(1.0, 1.0), edge(1.0, 1.0)], 5, false);
        let a = AssociationMatrix::new(vec![1, 1, 1, 1, 2], 3).unwrap();
        let r = recover_rates(&a, inst.topology());
        for k in 0..4 {
            assert_eq!(r.get(k, 1), 0.25e9);
            assert_eq!(r.get(k, 2), 0.0);
        }
        assert_eq!(r.get(4, 2), 1e9);
        let rep = total_latency(&a, &r, inst.size(), inst.topology(), true).unwrap();
        assert_eq!(rep.fronthaul_s[1], inst.size().bits() * 4.0 / 1e9);
    }

    #[test]
    fn p2_examples() {
        let inst = instance(vec![edge(1.0, 1.0), edge(1.0, 1.0)], 4, false);
        let all = AssociationMatrix::new(vec![1; 4], 3).unwrap();
        assert!((p2_objective(&all, &inst) - 9.28).abs() < 1e-12);

        let spread = instance(vec![edge(1.0, 1.0); 4], 4, false);
        let a = AssociationMatrix::new(vec![1, 2, 3, 4], 5).unwrap();
        assert_eq!(p2_objective(&a, &spread), 2.0 * 1.856);
    }

    #[test]
    fn rounding_keeps_binary_solutions() {
        let inst = instance(vec![edge(1.0, 1.0), edge(1.0, 1.0)], 2, false);
        let frac = FractionalSolution {
            assignment: vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            y: 1.0,
            gamma: vec![0.0, 0.0],
        };
        for seed in 0..5 {
            let s = randomized_round(&frac, &inst, seed).unwrap();
            assert_eq!(s.assignment.columns(), &[2, 1]);
        }
    }

    #[test]
    fn rounding_errors() {
        let inst = instance(vec![edge(1.0, 1.0)], 1, false);
        let zero = FractionalSolution { assignment: vec![vec![0.0, 0.0]], y: 1.0, gamma: vec![0.0] };
        assert!(matches!(randomized_round(&zero, &inst, 0), Err(Error::MalformedSolution(_))));
        let cloud = FractionalSolution { assignment: vec![vec![0.5, 0.5]], y: 1.0, gamma: vec![0.0] };
        assert!(randomized_round(&cloud, &inst, 0).is_err());
        let short = FractionalSolution { assignment: vec![], y: 1.0, gamma: vec![0.0] };
        assert!(randomized_round(&short, &inst, 0).is_err());
    }

    #[test]
    fn rounding_frequencies() {
        let inst = instance(vec![edge(1.0, 1.0), edge(1.0, 1.0)], 1, false);
        let half = FractionalSolution { assignment: vec![vec![0.0, 0.5, 0.5]], y: 1.0, gamma: vec![0.0; 2] };
        let trials = 100_000;
        let ones = (0..trials)
            .filter(|&t| randomized_round(&half, &inst, derive_seed(3, t)).unwrap().assignment.column_of(0) == 1)
            .count();
        let freq = ones as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");

        let sure = FractionalSolution { assignment: vec![vec![0.0, 1.0, 0.0]], y: 1.0, gamma: vec![0.0; 2] };
        for t in 0..100 {
            assert_eq!(randomized_round(&sure, &inst, t).unwrap().assignment.column_of(0), 1);
        }
        // rows summing to 1 ± ε still sample
        let drift = FractionalSolution {
            assignment: vec![vec![0.0, 0.3 + 1e-12, 0.7]],
            y: 1.0,
            gamma: vec![0.0; 2],
        };
        assert!(randomized_round(&drift, &inst, 1).is_ok());
    }

    #[test]
    fn bound_examples() {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert!((bound_factor(e2, 1.0).unwrap() - 7.0).abs() < 1e-12);
        assert!((theorem2_bound(1000, 168.0).unwrap() - (2.0 * 1000f64.ln() / 168.0 + 3.0)).abs() < 1e-15);
        assert!(theorem2_bound(10, 1.0).unwrap() < theorem2_bound(11, 1.0).unwrap());
        assert!(theorem2_bound(10, 1.0).unwrap() > theorem2_bound(10, 2.0).unwrap());
        assert!(theorem2_bound(1, 1.0).is_err());
        assert!(theorem2_bound(5, 0.0).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
