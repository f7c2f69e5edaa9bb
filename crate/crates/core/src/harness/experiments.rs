use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ModelChoice, ScenarioConfig};
use super::scenario::generate_topology;
use crate::error::{Error, Result};
use crate::network::cloud_overhead;
use crate::routing::{
    assign_nearest_edge, assign_only_cloud, round_best_of, solve_lp_p4, theorem2_bound,
    RoutingInstance, RoutingSolution,
};

/// Assignments are kept for audit up to this many users.
pub const AUDIT_MAX_USERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    OnlyCloud,
    NonInc,
    Inc,
    IncLb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::OnlyCloud, Method::NonInc, Method::Inc, Method::IncLb];
    pub const SCHEMES: [Method; 3] = [Method::OnlyCloud, Method::NonInc, Method::Inc];

    pub fn name(self) -> &'static str {
        match self {
            Method::OnlyCloud => "only_cloud",
            Method::NonInc => "non_inc",
            Method::Inc => "inc",
            Method::IncLb => "inc_lb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario_id: String,
    pub method: Method,
    pub num_users: usize,
    pub d_mb: f64,
    pub objective_s: f64,
    pub lp_lower_bound_s: Option<f64>,
    pub bound_factor: Option<f64>,
    pub cloud_rx_bytes: Option<u64>,
    pub cloud_agg_inputs: Option<usize>,
    pub seed: u64,
    pub wallclock_ms: Option<f64>,
    /// Column per user, kept when the scenario has at most
    /// [`AUDIT_MAX_USERS`] users.
    pub assignment: Option<Vec<usize>>,
    /// Whether the objective assumes edge aggregation.
    pub ina_enabled: bool,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario_id: &'a str,
    method: &'static str,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D_mb")]
    d_mb: f64,
    objective_s: f64,
    lp_lower_bound_s: Option<f64>,
    bound_factor: Option<f64>,
    cloud_rx_bytes: Option<u64>,
    cloud_agg_inputs: Option<usize>,
    seed: u64,
    wallclock_ms: f64,
}

/// How a sweep is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    /// Record wall-clock times. Off by default so output is reproducible.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, timing: false }
    }
}

impl RunOptions {
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Runs `methods` on one generated scenario.
pub fn run_point(
    config: &ScenarioConfig,
    methods: &[Method],
    timing: bool,
) -> Result<Vec<ExperimentResult>> {
    let topo = generate_topology(config)?;
    let size = config.model.size()?;
    let instance = RoutingInstance::all_users(topo, size);
    let scenario_id = config.scenario_id();
    let k = instance.num_users();

    let base = |method: Method, objective_s: f64, elapsed: Option<f64>| ExperimentResult {
        scenario_id: scenario_id.clone(),
        method,
        num_users: k,
        d_mb: size.megabytes(),
        objective_s,
        lp_lower_bound_s: None,
        bound_factor: None,
        cloud_rx_bytes: None,
        cloud_agg_inputs: None,
        seed: config.seed,
        wallclock_ms: elapsed,
        assignment: None,
        ina_enabled: false,
    };
    let with_solution = |mut r: ExperimentResult, s: &RoutingSolution| {
        let (bytes, inputs) = cloud_overhead(&s.assignment, size, s.ina_enabled);
        r.cloud_rx_bytes = Some(bytes);
        r.cloud_agg_inputs = Some(inputs);
        r.ina_enabled = s.ina_enabled;
        if k <= AUDIT_MAX_USERS {
            r.assignment = Some(s.assignment.columns().to_vec());
        }
        r
    };

    let clock = || timing.then(Instant::now);
    let elapsed = |t: Option<Instant>| t.map(|t| t.elapsed().as_secs_f64() * 1e3);

    let mut out = Vec::with_capacity(methods.len());
    let needs_lp = methods.iter().any(|m| matches!(m, Method::Inc | Method::IncLb));
    let lp_start = clock();
    let frac = if needs_lp { Some(solve_lp_p4(&instance)?) } else { None };
    let lp_ms = elapsed(lp_start);

    for &method in methods {
        let row = match method {
            Method::OnlyCloud => {
                let t = clock();
                let s = assign_only_cloud(&instance)?;
                with_solution(base(method, s.objective_s, elapsed(t)), &s)
            }
            Method::NonInc => {
                let t = clock();
                let s = assign_nearest_edge(&instance)?;
                with_solution(base(method, s.objective_s, elapsed(t)), &s)
            }
            Method::Inc => {
                let frac = frac.as_ref().expect("relaxation solved");
                let t = clock();
                let s = round_best_of(frac, &instance, config.seed, config.trials)?;
                let ms = elapsed(t).zip(lp_ms).map(|(a, b)| a + b);
                let mut r = with_solution(base(method, s.objective_s, ms), &s);
                r.lp_lower_bound_s = Some(frac.y);
                r.bound_factor = theorem2_bound(k, frac.y).ok();
                r
            }
            Method::IncLb => {
                let frac = frac.as_ref().expect("relaxation solved");
                let mut r = base(method, frac.y, lp_ms);
                r.lp_lower_bound_s = Some(frac.y);
                r.bound_factor = theorem2_bound(k, frac.y).ok();
                r.ina_enabled = true;
                r
            }
        };
        out.push(row);
    }
    Ok(out)
}

fn run_points(
    configs: Vec<ScenarioConfig>,
    methods: &[Method],
    opts: RunOptions,
) -> Result<Vec<ExperimentResult>> {
    let per_point: Vec<Vec<ExperimentResult>> = opts.install(|| {
        configs
            .par_iter()
            .map(|c| run_point(c, methods, opts.timing))
            .collect::<Result<_>>()
    })??;
    Ok(per_point.into_iter().flatten().collect())
}

/// Latency of every method for each user count, each on its own draw of
/// the scenario seed.
pub fn run_latency_sweep(
    config: &ScenarioConfig,
    k_values: &[usize],
    opts: RunOptions,
) -> Result<Vec<ExperimentResult>> {
    let configs = k_values
        .iter()
        .map(|&k| ScenarioConfig { num_users: k, ..config.clone() })
        .collect();
    run_points(configs, &Method::ALL, opts)
}

/// Latency of the three schemes for each model at the configured user count.
pub fn run_model_sweep(
    config: &ScenarioConfig,
    models: &[ModelChoice],
    opts: RunOptions,
) -> Result<Vec<ExperimentResult>> {
    let configs = models
        .iter()
        .map(|m| ScenarioConfig { model: m.clone(), ..config.clone() })
        .collect();
    run_points(configs, &Method::SCHEMES, opts)
}

/// Cloud traffic and aggregation inputs of the three schemes per user count.
pub fn run_overhead_sweep(
    config: &ScenarioConfig,
    k_values: &[usize],
    opts: RunOptions,
) -> Result<Vec<ExperimentResult>> {
    let configs = k_values
        .iter()
        .map(|&k| ScenarioConfig { num_users: k, ..config.clone() })
        .collect();
    run_points(configs, &Method::SCHEMES, opts)
}

pub fn write_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(CsvRow {
            scenario_id: &r.scenario_id,
            method: r.method.name(),
            k: r.num_users,
            d_mb: r.d_mb,
            objective_s: r.objective_s,
            lp_lower_bound_s: r.lp_lower_bound_s,
            bound_factor: r.bound_factor,
            cloud_rx_bytes: r.cloud_rx_bytes,
            cloud_agg_inputs: r.cloud_agg_inputs,
            seed: r.seed,
            wallclock_ms: r.wallclock_ms.unwrap_or(0.0),
        })
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

/// One line per user for the rows that kept their assignment.
pub fn write_audit_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario_id", "method", "user", "column"])
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    for r in results {
        if let Some(a) = &r.assignment {
            for (k, c) in a.iter().enumerate() {
                w.write_record([
                    r.scenario_id.as_str(),
                    r.method.name(),
                    &k.to_string(),
                    &c.to_string(),
                ])
                .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
            }
        }
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{total_latency, AssociationMatrix};
    use crate::routing::recover_rates;

    fn small() -> ScenarioConfig {
        ScenarioConfig { num_users: 60, seed: 3, ..Default::default() }
    }

    #[test]
    fn row_count_and_order() {
        let rows = run_latency_sweep(&small(), &[20, 40], RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 8);
        let methods: Vec<_> = rows.iter().map(|r| r.method).collect();
        assert_eq!(&methods[..4], &Method::ALL);
        assert!(rows[..4].iter().all(|r| r.num_users == 20));
        assert!(rows[..4].iter().all(|r| r.scenario_id == rows[0].scenario_id));
        assert_ne!(rows[0].scenario_id, rows[4].scenario_id);
    }

    #[test]
    fn recorded_assignments_reproduce_objectives() {
        let cfg = small();
        let rows = run_point(&cfg, &Method::ALL, false).unwrap();
        let topo = generate_topology(&cfg).unwrap();
        let size = cfg.model.size().unwrap();
        for r in rows.iter().filter(|r| r.method != Method::IncLb) {
            let cols = r.assignment.clone().expect("kept for small K");
            let eval_topo = if r.method == Method::OnlyCloud {
                topo.with_direct_cloud(true).unwrap()
            } else {
                topo.clone()
            };
            let a = AssociationMatrix::new(cols, eval_topo.num_columns()).unwrap();
            let rep = total_latency(&a, &recover_rates(&a, &eval_topo), size, &eval_topo, r.ina_enabled)
                .unwrap();
            assert!((rep.total_s - r.objective_s).abs() <= 1e-9 * r.objective_s, "{:?}", r.method);
        }
    }

    #[test]
    fn large_scenarios_drop_assignments() {
        let cfg = ScenarioConfig { num_users: 150, ..small() };
        let rows = run_point(&cfg, &[Method::NonInc], false).unwrap();
        assert!(rows[0].assignment.is_none());
    }

    #[test]
    fn csv_layout() {
        let rows = run_point(&small(), &Method::ALL, false).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario_id,method,K,D_mb,objective_s,lp_lower_bound_s,bound_factor,cloud_rx_bytes,cloud_agg_inputs,seed,wallclock_ms"
        );
        assert_eq!(lines.count(), 4);
        assert!(text.contains(",only_cloud,60,232.0,"));
    }

    #[test]
    fn model_sweep_scales_with_size() {
        let models = [ModelChoice::Named("VGG16".into()), ModelChoice::Named("DenseNet121".into())];
        let rows = run_model_sweep(&small(), &models, RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 6);
        let ratio = 528.0 / 33.0;
        // same topology and users: the baselines' assignments do not depend on D
        for m in 0..2 {
            assert!((rows[m].objective_s / rows[m + 3].objective_s - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = small();
        let ks = [10, 30, 50];
        let serial = run_latency_sweep(&cfg, &ks, RunOptions { jobs: 1, timing: false }).unwrap();
        let parallel = run_latency_sweep(&cfg, &ks, RunOptions { jobs: 4, timing: false }).unwrap();
        assert_eq!(serial, parallel);
    }
}
