use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::network::{EdgeNode, Point, Topology};

const MAX_REJECTIONS_PER_USER: usize = 100_000;

/// Edge nodes on a regular grid with equal margins: cell `(i, j)` of an
/// `R × C` grid sits at `((j + ½)·side/C, (i + ½)·side/R)`.
pub fn grid_positions(config: &ScenarioConfig) -> Vec<Point> {
    let (rows, cols) = config.grid;
    let dx = config.area_m / cols as f64;
    let dy = config.area_m / rows as f64;
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| Point::new((j as f64 + 0.5) * dx, (i as f64 + 0.5) * dy)))
        .collect()
}

/// Builds the network for `config`. Users are drawn uniformly over the part
/// of the square covered by at least one edge node; the draw is a single
/// seeded stream, so a smaller `K` yields a prefix of a larger one.
pub fn generate_topology(config: &ScenarioConfig) -> Result<Topology> {
    config.validate()?;
    let centers = grid_positions(config);
    let r = config.radius_m;
    let side = config.area_m;
    let covered = |p: &Point| centers.iter().any(|c| c.distance(p) <= r);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut users = Vec::with_capacity(config.num_users);
    while users.len() < config.num_users {
        let mut tries = 0;
        let p = loop {
            let p = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            if covered(&p) {
                break p;
            }
            tries += 1;
            if tries >= MAX_REJECTIONS_PER_USER {
                return Err(Error::Config("coverage disks do not intersect the area".into()));
            }
        };
        users.push(p);
    }

    let reachable =
        users.iter().map(|u| centers.iter().map(|c| c.distance(u) <= r).collect()).collect();
    let edges = centers
        .into_iter()
        .map(|position| EdgeNode {
            position,
            fronthaul_bps: config.bfr_bps(),
            backhaul_bps: config.bbk_bps(),
        })
        .collect();
    Topology::new(
        edges,
        users,
        reachable,
        config.wd_bps(),
        config.wu_bps(),
        config.allow_direct_cloud,
    )
    .map_err(|e| Error::Config(e.to_string()))
}
