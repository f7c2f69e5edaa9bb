//! Cross-checks run by `ina-fl selftest`: each compares an implementation
//! path with an independent one on seeded random inputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fl::{global_aggregate_star, ModelParams};
use crate::ina::{aggregate_groups, decode_message, encode_message, make_local_message, Message};
use crate::network::{
    total_latency, AssociationMatrix, EdgeNode, ModelSize, Point, RateAllocation, Topology,
    BPS_PER_GBPS,
};
use crate::routing::{
    p2_objective, randomized_round, recover_rates, solve_bruteforce, solve_lp_p4, RoutingInstance,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_selftest(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        ina_matches_star(&mut rng)?,
        wire_round_trip(&mut rng)?,
        relaxation_sandwich(&mut rng)?,
        equal_split_is_optimal(&mut rng)?,
        objective_paths_agree(&mut rng)?,
    ])
}

fn outcome(name: &'static str, failures: usize, total: usize) -> CheckOutcome {
    CheckOutcome { name, passed: failures == 0, detail: format!("{} / {total} cases passed", total - failures) }
}

fn ina_matches_star(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let cases = 200;
    let mut failures = 0;
    for _ in 0..cases {
        let k = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=32);
        let mut groups = vec![Vec::new(); m];
        let mut star = Vec::with_capacity(k);
        for _ in 0..k {
            let n = rng.gen_range(1..1000u64);
            let w = ModelParams::new((0..d).map(|_| rng.gen_range(-10.0..10.0)).collect())?;
            star.push((n, w.clone()));
            groups[rng.gen_range(0..m)].push(make_local_message(n, w)?);
        }
        let (ina, inputs) = aggregate_groups(&groups)?;
        let reference = global_aggregate_star(&star)?;
        let close = ina
            .as_slice()
            .iter()
            .zip(reference.as_slice())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
        if !close || inputs > m {
            failures += 1;
        }
    }
    Ok(outcome("ina-equals-star", failures, cases))
}

fn wire_round_trip(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let cases = 200;
    let mut failures = 0;
    for _ in 0..cases {
        let d = rng.gen_range(0..64);
        let w = ModelParams::new((0..d).map(|_| rng.gen::<f64>() * 1e6 - 5e5).collect())?;
        let m: Message = make_local_message(rng.gen_range(1..u64::MAX), w)?.into();
        let back = decode_message(&encode_message(&m)?)?;
        if back != m {
            failures += 1;
        }
    }
    Ok(outcome("wire-round-trip", failures, cases))
}

/// Random small instance: K ≤ 8 users, M ≤ 3 edges, random reachability.
pub fn random_small_instance(rng: &mut ChaCha8Rng, uniform: bool) -> Result<RoutingInstance> {
    let m = rng.gen_range(1..=3);
    let k = rng.gen_range(2..=8);
    let direct = rng.gen_bool(0.5);
    let cap = |rng: &mut ChaCha8Rng| if uniform { BPS_PER_GBPS } else { rng.gen_range(0.3..3.0) * BPS_PER_GBPS };
    let edges: Vec<EdgeNode> = (0..m)
        .map(|i| EdgeNode {
            position: Point::new(100.0 * i as f64, 0.0),
            fronthaul_bps: cap(rng),
            backhaul_bps: cap(rng),
        })
        .collect();
    let users: Vec<Point> = (0..k).map(|_| Point::new(rng.gen_range(0.0..200.0), 0.0)).collect();
    let reachable = (0..k)
        .map(|_| {
            let mut row: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.7)).collect();
            if !row.iter().any(|&r| r) {
                row[rng.gen_range(0..m)] = true;
            }
            row
        })
        .collect();
    let wu = cap(rng) * 2.0;
    let topo = Topology::new(edges, users, reachable, 2.0 * BPS_PER_GBPS, wu, direct)?;
    let mb = [33.0, 88.0, 232.0, 528.0][rng.gen_range(0..4)];
    Ok(RoutingInstance::all_users(topo, ModelSize::from_megabytes(mb)?))
}

fn relaxation_sandwich(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let cases = 100;
    let mut failures = 0;
    for i in 0..cases {
        let inst = random_small_instance(rng, i % 2 == 0)?;
        let frac = solve_lp_p4(&inst)?;
        let opt = solve_bruteforce(&inst)?;
        let alg = randomized_round(&frac, &inst, rng.gen())?;
        let tol = 1e-9 * opt.objective_s;
        if frac.y > opt.objective_s + tol || opt.objective_s > alg.objective_s + tol {
            failures += 1;
        }
    }
    Ok(outcome("relaxation-sandwich", failures, cases))
}

fn equal_split_is_optimal(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let cases = 50;
    let mut failures = 0;
    for i in 0..cases {
        let inst = random_small_instance(rng, i % 2 == 0)?;
        let topo = inst.topology();
        let cols: Vec<usize> = (0..topo.num_users())
            .map(|k| *topo.allowed_columns(k).collect::<Vec<_>>().choose(rng).expect("reachable"))
            .collect();
        let a = AssociationMatrix::new(cols, topo.num_columns())?;
        let equal = total_latency(&a, &recover_rates(&a, topo), inst.size(), topo, true)?;
        for _ in 0..100 {
            let r = random_feasible_rates(rng, &a, topo);
            let other = total_latency(&a, &r, inst.size(), topo, true)?;
            let worse = (0..topo.num_columns())
                .any(|c| equal.column_total_s[c] > other.column_total_s[c] * (1.0 + 1e-12));
            if worse {
                failures += 1;
                break;
            }
        }
    }
    Ok(outcome("equal-split-optimal", failures, cases))
}

/// Random positive rates using at most each column's capacity.
pub fn random_feasible_rates(
    rng: &mut ChaCha8Rng,
    a: &AssociationMatrix,
    topo: &Topology,
) -> RateAllocation {
    let mut r = RateAllocation::zeros(a.num_users(), a.num_columns());
    for c in 0..a.num_columns() {
        let members: Vec<usize> = a.members(c).collect();
        if members.is_empty() {
            continue;
        }
        let shares: Vec<f64> = members.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = shares.iter().sum();
        let used = rng.gen_range(0.5..=1.0);
        for (&k, s) in members.iter().zip(&shares) {
            r.set(k, c, topo.column_fronthaul_bps(c) * used * s / total);
        }
    }
    r
}

fn objective_paths_agree(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let cases = 200;
    let mut failures = 0;
    for i in 0..cases {
        let inst = random_small_instance(rng, i % 2 == 0)?;
        let topo = inst.topology();
        let cols: Vec<usize> = (0..topo.num_users())
            .map(|k| *topo.allowed_columns(k).collect::<Vec<_>>().choose(rng).expect("reachable"))
            .collect();
        let a = AssociationMatrix::new(cols, topo.num_columns())?;
        let report = total_latency(&a, &recover_rates(&a, topo), inst.size(), topo, true)?;
        if report.total_s != p2_objective(&a, &inst) {
            failures += 1;
        }
    }
    Ok(outcome("objective-paths-agree", failures, cases))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(1).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
