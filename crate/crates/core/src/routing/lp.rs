use super::simplex::{LinearProgram, LpError, RowKind};
use super::{FractionalSolution, RoutingInstance};
use crate::error::{Error, Result};
use crate::network::CLOUD;

/// Fractional relaxation of the routing problem.
///
/// Variables are `a_km ∈ [0, 1]` for every allowed (user, column) pair, the
/// latency `y` and one `γ_m ≥ 0` per edge:
///
/// ```text
/// min y
///   Σ_m a_km = 1                                  every user k
///   (D/B_fr_m)·Σ_k a_km + γ_m − y ≤ 0              every column (no γ for the cloud)
///   γ_m ≤ D/B_bk_m                                 every edge
///   γ_m − (D/B_bk_m)·Σ_k a_km ≤ 0                  every edge
/// ```
///
/// `a_km ≤ 1` follows from the row sums. Times are scaled by the largest
/// single-user fronthaul time before solving. The optimum `y` bounds the
/// best integral association from below.
pub fn solve_lp_p4(instance: &RoutingInstance) -> Result<FractionalSolution> {
    let topo = instance.topology();
    let k_users = topo.num_users();
    let cols = topo.num_columns();
    let edges = topo.num_edges();
    let bits = instance.size().bits();

    let allowed: Vec<Vec<usize>> = (0..k_users).map(|k| topo.allowed_columns(k).collect()).collect();
    if let Some(k) = allowed.iter().position(|a| a.is_empty()) {
        return Err(Error::Infeasible { user: k });
    }

    let scale = (0..cols)
        .map(|c| bits / topo.column_fronthaul_bps(c))
        .fold(0.0, f64::max);
    let fr_cost: Vec<f64> = (0..cols).map(|c| bits / topo.column_fronthaul_bps(c) / scale).collect();
    let bk_cost: Vec<Option<f64>> =
        (0..cols).map(|c| topo.column_backhaul_bps(c).map(|bk| bits / bk / scale)).collect();

    // variable layout: a_km in user order, then y, then γ per edge
    let mut var_of = Vec::with_capacity(k_users);
    let mut next = 0;
    for cols_k in &allowed {
        var_of.push(next);
        next += cols_k.len();
    }
    let y = next;
    let gamma = |m: usize| y + 1 + m;
    let mut lp = LinearProgram::new(y + 1 + edges);
    lp.set_objective(y, 1.0);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for (k, cols_k) in allowed.iter().enumerate() {
        let coeffs = cols_k
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                members[c].push(var_of[k] + i);
                (var_of[k] + i, 1.0)
            })
            .collect();
        lp.add_row(coeffs, RowKind::Eq, 1.0);
    }

    let load_row0 = lp.num_rows();
    for c in 0..cols {
        let mut coeffs: Vec<(usize, f64)> = members[c].iter().map(|&v| (v, fr_cost[c])).collect();
        if c != CLOUD {
            coeffs.push((gamma(c - 1), 1.0));
        }
        coeffs.push((y, -1.0));
        lp.add_row(coeffs, RowKind::Le, 0.0);
    }
    for c in 1..cols {
        let bk = bk_cost[c].expect("edge column has a backhaul");
        lp.add_row(vec![(gamma(c - 1), 1.0)], RowKind::Le, bk);
        let mut coeffs: Vec<(usize, f64)> = members[c].iter().map(|&v| (v, -bk)).collect();
        coeffs.push((gamma(c - 1), 1.0));
        lp.add_row(coeffs, RowKind::Le, 0.0);
    }

    let crash = greedy_crash(&allowed, &var_of, &fr_cost, load_row0, y);
    let sol = lp.solve_from(&crash).map_err(|e| match e {
        LpError::Infeasible => Error::Solver("relaxation reported infeasible".into()),
        other => Error::Solver(other.to_string()),
    })?;

    let mut assignment = vec![vec![0.0; cols]; k_users];
    for (k, cols_k) in allowed.iter().enumerate() {
        for (i, &c) in cols_k.iter().enumerate() {
            assignment[k][c] = sol.x[var_of[k] + i].clamp(0.0, 1.0);
        }
        let mass: f64 = assignment[k].iter().sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Solver(format!("user {k} row sums to {mass}")));
        }
    }
    Ok(FractionalSolution {
        assignment,
        y: sol.x[y] * scale,
        gamma: (0..edges).map(|m| sol.x[gamma(m)] * scale).collect(),
    })
}

/// Starting basis: each user on the allowed column whose load would finish
/// first (lowest index on ties), `y` on the busiest column's row.
fn greedy_crash(
    allowed: &[Vec<usize>],
    var_of: &[usize],
    fr_cost: &[f64],
    load_row0: usize,
    y: usize,
) -> Vec<(usize, usize)> {
    let mut loads = vec![0usize; fr_cost.len()];
    let mut pivots = Vec::with_capacity(allowed.len() + 1);
    for (k, cols_k) in allowed.iter().enumerate() {
        let mut best = 0;
        for (i, &c) in cols_k.iter().enumerate() {
            let t = (loads[c] + 1) as f64 * fr_cost[c];
            let b = cols_k[best];
            if t < (loads[b] + 1) as f64 * fr_cost[b] {
                best = i;
            }
        }
        loads[cols_k[best]] += 1;
        pivots.push((k, var_of[k] + best));
    }
    let busiest = (0..loads.len())
        .fold(0, |b, c| if loads[c] as f64 * fr_cost[c] > loads[b] as f64 * fr_cost[b] { c } else { b });
    pivots.push((load_row0 + busiest, y));
    pivots
}
