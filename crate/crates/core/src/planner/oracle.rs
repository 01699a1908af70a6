use super::coverage::CoverageReport;
use crate::controller::FlowRequest;
use crate::dataplane::FlowId;
use crate::gappatch::PatchMode;
use crate::sim::{SimConfig, SimError, Simulation};
use crate::topo::{NodeId, Topology};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown target switch {0}")]
    UnknownTarget(NodeId),
    #[error("discovered view differs from the deceptive topology")]
    ViewMismatch,
    #[error("flow {0} was not delivered")]
    Undelivered(FlowId),
}

/// Coverage measured by simulation: the deceptive topology is poisoned
/// into a fresh network with proactive patching, one packet per flow is
/// sent, and flows whose packet crossed `target` are counted.
pub fn oracle_coverage(
    real: &Topology,
    deceptive: &Topology,
    flows: &[FlowRequest],
    target: &NodeId,
) -> Result<CoverageReport, OracleError> {
    if !real.contains_node(target) {
        return Err(OracleError::UnknownTarget(target.clone()));
    }
    let mut sim = Simulation::new(real.clone(), SimConfig::default())?;
    sim.declare_flows(flows.iter().cloned());
    sim.tick()?;
    sim.poison(deceptive, Some(PatchMode::Proactive), false)?;
    sim.tick()?;
    if &sim.view_links() != deceptive.link_set() {
        return Err(OracleError::ViewMismatch);
    }
    let mut report = CoverageReport { target: target.clone(), covered: Vec::new(), unroutable: Vec::new() };
    for outcome in sim.inject_flows(flows)? {
        if !outcome.delivered {
            return Err(OracleError::Undelivered(outcome.flow));
        }
        if outcome.seen_by.contains(target) {
            report.covered.push(outcome.flow);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;

    #[test]
    fn motivating_f1_crosses_c() {
        let flows = vec![FlowRequest::new("f1", "H1", "H2"), FlowRequest::new("f2", "H1", "H3")];
        let r = oracle_coverage(&fixtures::motivating_example(), &fixtures::motivating_target(), &flows, &"C".into())
            .unwrap();
        assert_eq!(r.covered, vec![FlowId::new("f1"), FlowId::new("f2")]);
    }

    #[test]
    fn no_flows_cover_nothing() {
        let real = fixtures::motivating_example();
        let r = oracle_coverage(&real, &fixtures::motivating_target(), &[], &"C".into()).unwrap();
        assert_eq!(r.count(), 0);
    }
}
