use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ids::{Endpoint, HostId, MacAddr, NodeId, PortId};
use super::model::{Link, Topology, TopologyError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("malformed topology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
}

/// On-disk topology document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default)]
    pub hosts: Vec<HostDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: NodeId,
    pub ports: Vec<PortDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortDoc {
    pub port: PortId,
    /// Generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostDoc {
    pub id: HostId,
    pub attach: (NodeId, PortId),
    /// Generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddr>,
}

impl TopologyDoc {
    pub fn build(&self) -> Result<Topology, TopologyError> {
        let explicit: BTreeSet<MacAddr> = self
            .nodes
            .iter()
            .flat_map(|n| n.ports.iter().filter_map(|p| p.mac))
            .chain(self.hosts.iter().filter_map(|h| h.mac))
            .collect();
        let mut counter = 0u32;
        let mut fresh = |prefix: u8| loop {
            counter += 1;
            let mac = MacAddr::from_index(prefix, counter);
            if !explicit.contains(&mac) {
                return mac;
            }
        };
        let mut t = Topology::new();
        for node in &self.nodes {
            t.add_node(node.id.clone())?;
            for port in &node.ports {
                let mac = port.mac.unwrap_or_else(|| fresh(0));
                t.add_port(&node.id, port.port, mac)?;
            }
        }
        for link in &self.links {
            t.add_link(link.clone())?;
        }
        for host in &self.hosts {
            let mac = host.mac.unwrap_or_else(|| fresh(1));
            t.add_host(host.id.clone(), Endpoint { node: host.attach.0.clone(), port: host.attach.1 }, mac)?;
        }
        Ok(t)
    }
}

impl Topology {
    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            nodes: self
                .nodes()
                .map(|id| NodeDoc {
                    id: id.clone(),
                    ports: self
                        .ports(id)
                        .into_iter()
                        .flatten()
                        .map(|(port, mac)| PortDoc { port: *port, mac: Some(*mac) })
                        .collect(),
                })
                .collect(),
            links: self.links().cloned().collect(),
            hosts: self
                .hosts()
                .map(|h| HostDoc { id: h.id.clone(), attach: (h.attach.node.clone(), h.attach.port), mac: Some(h.mac) })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Topology, LoadError> {
        let doc: TopologyDoc = serde_json::from_str(text)?;
        Ok(doc.build()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;

    #[test]
    fn round_trip_fixtures() {
        for t in [fixtures::motivating_example(), fixtures::fattree(), fixtures::chinanet()] {
            assert_eq!(Topology::from_json(&t.to_json()).unwrap(), t);
        }
    }

    #[test]
    fn macs_are_generated_when_missing() {
        let text = r#"{
            "nodes": [{"id": "A", "ports": [{"port": 1}, {"port": 2}]},
                      {"id": "B", "ports": [{"port": 1, "mac": "02:00:00:00:00:01"}]}],
            "links": [[["A", 1], ["B", 1]]],
            "hosts": [{"id": "h1", "attach": ["A", 2]}]
        }"#;
        let t = Topology::from_json(text).unwrap();
        assert_eq!(t.link_count(), 1);
        let a1 = t.mac(&Endpoint::new("A", 1)).unwrap();
        assert_ne!(a1.to_string(), "02:00:00:00:00:01");
        assert!(t.host(&"h1".into()).is_some());
    }

    #[test]
    fn invalid_documents_are_rejected() {
        let text = r#"{"nodes": [{"id": "A", "ports": [{"port": 1}]}], "links": [[["A", 1], ["B", 1]]]}"#;
        assert!(matches!(Topology::from_json(text), Err(LoadError::Topology(TopologyError::UnknownNode(_)))));
        assert!(matches!(Topology::from_json("{"), Err(LoadError::Json(_))));
    }
}
