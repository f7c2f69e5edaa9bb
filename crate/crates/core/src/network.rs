//! Edge-network topology and the aggregation latency model.
//!
//! Association and rate matrices are indexed by *column*: column
//! [`CLOUD`] is the macro cell's direct uplink and column `m + 1` is edge
//! node `m`. The cloud column is only usable when the topology enables
//! direct association; it has the direct uplink as its fronthaul and no
//! backhaul leg.

use crate::error::{Error, Result};

pub const CLOUD: usize = 0;

pub const BITS_PER_BYTE: u64 = 8;
pub const BYTES_PER_MB: f64 = 1e6;
pub const BPS_PER_GBPS: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNode {
    pub position: Point,
    /// User → edge wireless uplink capacity, bits/s.
    pub fronthaul_bps: f64,
    /// Edge → cloud capacity, bits/s.
    pub backhaul_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    edges: Vec<EdgeNode>,
    users: Vec<Point>,
    /// `reachable[k][m]`: user `k` is inside edge `m`'s coverage.
    reachable: Vec<Vec<bool>>,
    downlink_bps: f64,
    direct_uplink_bps: f64,
    allow_direct_cloud: bool,
}

impl Topology {
    pub fn new(
        edges: Vec<EdgeNode>,
        users: Vec<Point>,
        reachable: Vec<Vec<bool>>,
        downlink_bps: f64,
        direct_uplink_bps: f64,
        allow_direct_cloud: bool,
    ) -> Result<Self> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(downlink_bps) || !positive(direct_uplink_bps) {
            return Err(Error::InvalidInput("cloud capacities must be positive".into()));
        }
        for (m, e) in edges.iter().enumerate() {
            if !positive(e.fronthaul_bps) || !positive(e.backhaul_bps) {
                return Err(Error::InvalidInput(format!("edge {m} has a nonpositive capacity")));
            }
        }
        if reachable.len() != users.len() {
            return Err(Error::InvalidInput(format!(
                "reachability has {} rows for {} users",
                reachable.len(),
                users.len()
            )));
        }
        for (k, row) in reachable.iter().enumerate() {
            if row.len() != edges.len() {
                return Err(Error::InvalidInput(format!(
                    "reachability row {k} has {} entries for {} edges",
                    row.len(),
                    edges.len()
                )));
            }
            if !allow_direct_cloud && !row.iter().any(|&r| r) {
                return Err(Error::Infeasible { user: k });
            }
        }
        Ok(Self { edges, users, reachable, downlink_bps, direct_uplink_bps, allow_direct_cloud })
    }

    /// Every user reaches every edge.
    pub fn fully_connected(
        edges: Vec<EdgeNode>,
        users: Vec<Point>,
        downlink_bps: f64,
        direct_uplink_bps: f64,
        allow_direct_cloud: bool,
    ) -> Result<Self> {
        let reachable = vec![vec![true; edges.len()]; users.len()];
        Self::new(edges, users, reachable, downlink_bps, direct_uplink_bps, allow_direct_cloud)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges plus the cloud column.
    pub fn num_columns(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn edges(&self) -> &[EdgeNode] {
        &self.edges
    }

    pub fn users(&self) -> &[Point] {
        &self.users
    }

    pub fn downlink_bps(&self) -> f64 {
        self.downlink_bps
    }

    pub fn direct_uplink_bps(&self) -> f64 {
        self.direct_uplink_bps
    }

    pub fn allow_direct_cloud(&self) -> bool {
        self.allow_direct_cloud
    }

    /// Same network with the direct cloud column switched on or off.
    pub fn with_direct_cloud(&self, allow: bool) -> Result<Self> {
        Self::new(
            self.edges.clone(),
            self.users.clone(),
            self.reachable.clone(),
            self.downlink_bps,
            self.direct_uplink_bps,
            allow,
        )
    }

    /// Same network restricted to the given users, in that order.
    pub fn select_users(&self, users: &[usize]) -> Result<Self> {
        let mut pos = Vec::with_capacity(users.len());
        let mut reach = Vec::with_capacity(users.len());
        for &k in users {
            if k >= self.num_users() {
                return Err(Error::InvalidInput(format!("user {k} does not exist")));
            }
            pos.push(self.users[k]);
            reach.push(self.reachable[k].clone());
        }
        Self::new(
            self.edges.clone(),
            pos,
            reach,
            self.downlink_bps,
            self.direct_uplink_bps,
            self.allow_direct_cloud,
        )
    }

    pub fn edge_reachable(&self, user: usize, edge: usize) -> bool {
        self.reachable[user][edge]
    }

    /// Whether user `k` may be associated with `column`.
    pub fn column_allowed(&self, user: usize, column: usize) -> bool {
        if column == CLOUD {
            self.allow_direct_cloud
        } else {
            self.reachable[user][column - 1]
        }
    }

    pub fn allowed_columns(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_columns()).filter(move |&c| self.column_allowed(user, c))
    }

    /// Uplink capacity shared by a column's users, bits/s.
    pub fn column_fronthaul_bps(&self, column: usize) -> f64 {
        if column == CLOUD {
            self.direct_uplink_bps
        } else {
            self.edges[column - 1].fronthaul_bps
        }
    }

    /// Column's link to the cloud, `None` for the cloud column itself.
    pub fn column_backhaul_bps(&self, column: usize) -> Option<f64> {
        if column == CLOUD {
            None
        } else {
            Some(self.edges[column - 1].backhaul_bps)
        }
    }
}

/// Size of one serialized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelSize {
    bytes: u64,
}

impl ModelSize {
    pub fn from_bytes(bytes: u64) -> Result<Self> {
        if bytes == 0 {
            return Err(Error::InvalidInput("model size must be positive".into()));
        }
        Ok(Self { bytes })
    }

    /// 1 MB = 10⁶ bytes.
    pub fn from_megabytes(mb: f64) -> Result<Self> {
        if !(mb > 0.0 && mb.is_finite()) {
            return Err(Error::InvalidInput(format!("model size must be positive, got {mb} MB")));
        }
        Self::from_bytes((mb * BYTES_PER_MB).round() as u64)
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn bits(&self) -> f64 {
        (self.bytes * BITS_PER_BYTE) as f64
    }

    pub fn megabytes(&self) -> f64 {
        self.bytes as f64 / BYTES_PER_MB
    }
}

/// Binary association of each user to exactly one column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AssociationMatrix {
    columns: Vec<usize>,
    num_columns: usize,
}

impl AssociationMatrix {
    pub fn new(columns: Vec<usize>, num_columns: usize) -> Result<Self> {
        if let Some(k) = columns.iter().position(|&c| c >= num_columns) {
            return Err(Error::InvalidInput(format!(
                "user {k} assigned to column {} of {num_columns}",
                columns[k]
            )));
        }
        Ok(Self { columns, num_columns })
    }

    /// Builds from a dense 0/1 matrix; every row must contain exactly one 1.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let num_columns = rows.first().map_or(0, |r| r.len());
        let mut columns = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != num_columns || row.iter().any(|&v| v > 1) {
                return Err(Error::InvalidInput(format!("row {k} is not a 0/1 row")));
            }
            let ones: Vec<usize> = (0..row.len()).filter(|&c| row[c] == 1).collect();
            if ones.len() != 1 {
                return Err(Error::InvalidInput(format!("row {k} sums to {}", ones.len())));
            }
            columns.push(ones[0]);
        }
        Ok(Self { columns, num_columns })
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.columns
            .iter()
            .map(|&c| {
                let mut row = vec![0u8; self.num_columns];
                row[c] = 1;
                row
            })
            .collect()
    }

    pub fn num_users(&self) -> usize {
        self.columns.len()
    }

    pub fn num_columns(&self) -> usize {
        self.num_columns
    }

    pub fn column_of(&self, user: usize) -> usize {
        self.columns[user]
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn get(&self, user: usize, column: usize) -> bool {
        self.columns[user] == column
    }

    /// `|K_m|` for every column.
    pub fn loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.num_columns];
        for &c in &self.columns {
            loads[c] += 1;
        }
        loads
    }

    pub fn load(&self, column: usize) -> usize {
        self.columns.iter().filter(|&&c| c == column).count()
    }

    pub fn members(&self, column: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.columns.len()).filter(move |&k| self.columns[k] == column)
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.num_users() != topo.num_users() || self.num_columns != topo.num_columns() {
            return Err(Error::InvalidInput(format!(
                "association is {}x{}, topology is {}x{}",
                self.num_users(),
                self.num_columns,
                topo.num_users(),
                topo.num_columns()
            )));
        }
        for (k, &c) in self.columns.iter().enumerate() {
            if !topo.column_allowed(k, c) {
                return Err(Error::InvalidInput(format!("user {k} cannot reach column {c}")));
            }
        }
        Ok(())
    }
}

/// Uplink rates `r_km`, bits/s, dense K × columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    rates: Vec<f64>,
    num_columns: usize,
}

impl RateAllocation {
    pub fn zeros(num_users: usize, num_columns: usize) -> Self {
        Self { rates: vec![0.0; num_users * num_columns], num_columns }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_columns = rows.first().map_or(0, |r| r.len());
        let mut rates = Vec::with_capacity(rows.len() * num_columns);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != num_columns {
                return Err(Error::InvalidInput(format!("rate row {k} has wrong length")));
            }
            if row.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::InvalidInput(format!("rate row {k} has a negative rate")));
            }
            rates.extend(row);
        }
        Ok(Self { rates, num_columns })
    }

    pub fn num_users(&self) -> usize {
        self.rates.len().checked_div(self.num_columns).unwrap_or(0)
    }

    pub fn num_columns(&self) -> usize {
        self.num_columns
    }

    pub fn get(&self, user: usize, column: usize) -> f64 {
        self.rates[user * self.num_columns + column]
    }

    pub fn set(&mut self, user: usize, column: usize, rate: f64) {
        self.rates[user * self.num_columns + column] = rate;
    }

    /// Checks the per-column capacity budget and that associated users have
    /// a positive rate.
    pub fn validate(&self, a: &AssociationMatrix, topo: &Topology) -> Result<()> {
        if self.num_users() != a.num_users() || self.num_columns != a.num_columns() {
            return Err(Error::InvalidInput("rate matrix shape differs from association".into()));
        }
        for c in 0..self.num_columns {
            let used: f64 = a.members(c).map(|k| self.get(k, c)).sum();
            let cap = topo.column_fronthaul_bps(c);
            if used > cap * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "column {c} allocates {used} b/s over its capacity {cap} b/s"
                )));
            }
        }
        for (k, &c) in a.columns().iter().enumerate() {
            if self.get(k, c) <= 0.0 {
                return Err(Error::InfeasibleRate { user: k, column: c });
            }
        }
        Ok(())
    }
}

/// Per-column and network-wide latency of one aggregation round together
/// with what the cloud has to receive.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub fronthaul_s: Vec<f64>,
    pub backhaul_s: Vec<f64>,
    pub column_total_s: Vec<f64>,
    pub total_s: f64,
    pub cloud_rx_bytes: u64,
    pub cloud_aggregation_inputs: usize,
}

/// Time for the cloud to broadcast the global model, `D / W_d`.
pub fn broadcast_latency(size: ModelSize, topo: &Topology) -> f64 {
    size.bits() / topo.downlink_bps()
}

/// Slowest associated user's upload time on `column`; zero when empty.
pub fn fronthaul_latency(
    column: usize,
    a: &AssociationMatrix,
    r: &RateAllocation,
    size: ModelSize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in a.members(column) {
        let rate = r.get(k, column);
        if rate <= 0.0 {
            return Err(Error::InfeasibleRate { user: k, column });
        }
        worst = worst.max(size.bits() / rate);
    }
    Ok(worst)
}

/// Edge → cloud time when the edge forwards every member model unchanged.
pub fn backhaul_latency_plain(
    column: usize,
    a: &AssociationMatrix,
    size: ModelSize,
    topo: &Topology,
) -> f64 {
    match topo.column_backhaul_bps(column) {
        Some(bk) => size.bits() * a.load(column) as f64 / bk,
        None => 0.0,
    }
}

/// Edge → cloud time when the edge forwards one aggregated model.
pub fn backhaul_latency_ina(
    column: usize,
    a: &AssociationMatrix,
    size: ModelSize,
    topo: &Topology,
) -> f64 {
    let load = a.load(column);
    match topo.column_backhaul_bps(column) {
        Some(bk) if load > 0 => {
            let d = size.bits();
            (d / bk).min(d * load as f64 / bk)
        }
        _ => 0.0,
    }
}

pub fn total_latency(
    a: &AssociationMatrix,
    r: &RateAllocation,
    size: ModelSize,
    topo: &Topology,
    ina_enabled: bool,
) -> Result<LatencyReport> {
    a.validate(topo)?;
    if r.num_users() != a.num_users() || r.num_columns() != a.num_columns() {
        return Err(Error::InvalidInput("rate matrix shape differs from association".into()));
    }
    let cols = topo.num_columns();
    let mut fronthaul_s = Vec::with_capacity(cols);
    let mut backhaul_s = Vec::with_capacity(cols);
    let mut column_total_s = Vec::with_capacity(cols);
    for c in 0..cols {
        let fr = fronthaul_latency(c, a, r, size)?;
        let bk = if ina_enabled {
            backhaul_latency_ina(c, a, size, topo)
        } else {
            backhaul_latency_plain(c, a, size, topo)
        };
        fronthaul_s.push(fr);
        backhaul_s.push(bk);
        column_total_s.push(fr + bk);
    }
    let total_s = column_total_s.iter().copied().fold(0.0, f64::max);
    let (cloud_rx_bytes, cloud_aggregation_inputs) = cloud_overhead(a, size, ina_enabled);
    Ok(LatencyReport {
        fronthaul_s,
        backhaul_s,
        column_total_s,
        total_s,
        cloud_rx_bytes,
        cloud_aggregation_inputs,
    })
}

/// Bytes and model count the cloud receives in one round.
///
/// Without aggregation every user's model reaches the cloud. With it each
/// nonempty column contributes one model; the cloud column's direct users
/// are combined at the macro cell and count as one input as well.
pub fn cloud_overhead(a: &AssociationMatrix, size: ModelSize, ina_enabled: bool) -> (u64, usize) {
    let inputs = if ina_enabled {
        a.loads().iter().filter(|&&l| l > 0).count()
    } else {
        a.num_users()
    };
    (inputs as u64 * size.bytes(), inputs)
}
