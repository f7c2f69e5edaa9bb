use super::{RoutingInstance, RoutingSolution};
use crate::error::{Error, Result};
use crate::network::{AssociationMatrix, CLOUD};

/// Every user uploads straight to the cloud over the shared direct uplink.
/// The direct column is used even if the instance keeps it disabled.
pub fn assign_only_cloud(instance: &RoutingInstance) -> Result<RoutingSolution> {
    let topo = instance.topology().with_direct_cloud(true)?;
    let a = AssociationMatrix::new(vec![CLOUD; topo.num_users()], topo.num_columns())?;
    RoutingSolution::evaluate(a, &topo, instance.size(), false)
}

/// Every user joins its geometrically nearest reachable edge (lowest index
/// on ties) and edges forward models without aggregating them.
pub fn assign_nearest_edge(instance: &RoutingInstance) -> Result<RoutingSolution> {
    let topo = instance.topology();
    let mut columns = Vec::with_capacity(topo.num_users());
    for (k, user) in topo.users().iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (m, e) in topo.edges().iter().enumerate() {
            if !topo.edge_reachable(k, m) {
                continue;
            }
            let d = user.distance(&e.position);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((m, d));
            }
        }
        let (m, _) = best.ok_or(Error::Infeasible { user: k })?;
        columns.push(m + 1);
    }
    let a = AssociationMatrix::new(columns, topo.num_columns())?;
    RoutingSolution::evaluate(a, topo, instance.size(), false)
}
