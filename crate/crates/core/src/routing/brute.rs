use super::{column_time, recover_rates, RoutingInstance, RoutingSolution};
use crate::error::{Error, Result};
use crate::network::AssociationMatrix;

/// Largest number of associations [`solve_bruteforce`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Exact minimum of the equal-split, aggregated latency over every
/// association of users to their allowed columns. Among minimizers the
/// lexicographically smallest column vector wins.
pub fn solve_bruteforce(instance: &RoutingInstance) -> Result<RoutingSolution> {
    let topo = instance.topology();
    let k_users = topo.num_users();
    let cols = topo.num_columns();
    let bits = instance.size().bits();
    let allowed: Vec<Vec<usize>> = (0..k_users).map(|k| topo.allowed_columns(k).collect()).collect();
    if let Some(k) = allowed.iter().position(|a| a.is_empty()) {
        return Err(Error::Infeasible { user: k });
    }
    let mut space: u64 = 1;
    for a in &allowed {
        space = space.saturating_mul(a.len() as u64);
        if space > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge { users: k_users, columns: cols, limit: BRUTE_FORCE_LIMIT });
        }
    }

    // column time for every possible load
    let times: Vec<Vec<f64>> =
        (0..cols).map(|c| (0..=k_users).map(|l| column_time(topo, c, l, bits)).collect()).collect();

    // odometer over choice indices, user 0 most significant
    let mut choice = vec![0usize; k_users];
    let mut loads = vec![0usize; cols];
    for a in &allowed {
        loads[a[0]] += 1;
    }
    let eval = |loads: &[usize]| -> f64 {
        loads.iter().enumerate().map(|(c, &l)| times[c][l]).fold(0.0, f64::max)
    };
    let mut best_value = eval(&loads);
    let mut best = choice.clone();
    loop {
        let mut k = k_users;
        loop {
            if k == 0 {
                let columns = best.iter().zip(&allowed).map(|(&i, a)| a[i]).collect();
                let assignment = AssociationMatrix::new(columns, cols)?;
                let rates = recover_rates(&assignment, topo);
                return Ok(RoutingSolution {
                    assignment,
                    rates,
                    objective_s: best_value,
                    ina_enabled: true,
                    lower_bound_s: None,
                });
            }
            k -= 1;
            loads[allowed[k][choice[k]]] -= 1;
            if choice[k] + 1 < allowed[k].len() {
                choice[k] += 1;
                loads[allowed[k][choice[k]]] += 1;
                break;
            }
            choice[k] = 0;
            loads[allowed[k][0]] += 1;
        }
        let v = eval(&loads);
        if v < best_value {
            best_value = v;
            best.copy_from_slice(&choice);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeNode, ModelSize, Point, Topology};
    use crate::routing::p2_objective;

    fn inst(edges: &[(f64, f64)], k: usize, direct: bool) -> RoutingInstance {
        let edges = edges
            .iter()
            .map(|&(fr, bk)| EdgeNode { position: Point::default(), fronthaul_bps: fr * 1e9, backhaul_bps: bk * 1e9 })
            .collect();
        let t = Topology::fully_connected(edges, vec![Point::default(); k], 2e9, 2e9, direct).unwrap();
        RoutingInstance::all_users(t, ModelSize::from_megabytes(232.0).unwrap())
    }

    #[test]
    fn single_user_takes_fastest_column() {
        let i = inst(&[(1.0, 1.0), (2.0, 1.0), (1.0, 4.0)], 1, false);
        let s = solve_bruteforce(&i).unwrap();
        // 1/1+1/1 = 2, 1/2+1 = 1.5, 1+1/4 = 1.25 (units of D/Gb)
        assert_eq!(s.assignment.columns(), &[3]);
        assert!((s.objective_s - 1.25 * 1.856).abs() < 1e-12);
    }

    #[test]
    fn three_users_two_edges() {
        let i = inst(&[(1.0, 1.0), (1.0, 1.0)], 3, false);
        let s = solve_bruteforce(&i).unwrap();
        let loads = s.assignment.loads();
        assert!(loads[1..] == [2, 1] || loads[1..] == [1, 2]);
        // lexicographically smallest minimizer
        assert_eq!(s.assignment.columns(), &[1, 1, 2]);
        assert!((s.objective_s - 3.0 * 1.856).abs() < 1e-12);
        assert_eq!(s.objective_s, p2_objective(&s.assignment, &i));
    }

    #[test]
    fn matches_naive_enumeration() {
        let i = inst(&[(1.0, 0.5), (0.7, 2.0)], 5, true);
        let s = solve_bruteforce(&i).unwrap();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(5) {
            let cols: Vec<usize> = (0..5).map(|k| code / 3usize.pow(4 - k as u32) % 3).collect();
            let a = AssociationMatrix::new(cols, 3).unwrap();
            best = best.min(p2_objective(&a, &i));
        }
        assert_eq!(s.objective_s, best);
    }

    #[test]
    fn size_guard() {
        let i = inst(&[(1.0, 1.0); 9], 8, true);
        assert!(matches!(solve_bruteforce(&i), Err(Error::TooLarge { .. })));
    }
}
