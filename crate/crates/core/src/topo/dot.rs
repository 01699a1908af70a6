use std::collections::BTreeSet;
use std::fmt::Write;

use super::ids::NodeId;
use super::model::{Link, Topology};

/// Highlights for DOT rendering.
#[derive(Debug, Clone, Default)]
pub struct DotStyle {
    /// Drawn red.
    pub fabricated: BTreeSet<Link>,
    /// Drawn dashed grey (present in reality, hidden from the view).
    pub hidden: BTreeSet<Link>,
    /// Filled orange.
    pub gaps: BTreeSet<NodeId>,
}

pub fn to_dot(t: &Topology, name: &str, style: &DotStyle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph \"{}\" {{", name.replace('"', "'"));
    let _ = writeln!(out, "  node [shape=box];");
    for node in t.nodes() {
        if style.gaps.contains(node) {
            let _ = writeln!(out, "  \"{node}\" [style=filled, fillcolor=orange];");
        } else {
            let _ = writeln!(out, "  \"{node}\";");
        }
    }
    for host in t.hosts() {
        let _ = writeln!(out, "  \"{}\" [shape=ellipse];", host.id);
        let _ = writeln!(out, "  \"{}\" -- \"{}\" [headlabel=\"{}\"];", host.id, host.attach.node, host.attach.port);
    }
    let mut edges: Vec<(&Link, &str)> =
        t.links().map(|l| (l, if style.fabricated.contains(l) { " color=red," } else { "" })).collect();
    edges.extend(style.hidden.iter().filter(|l| !t.has_link(l)).map(|l| (l, " style=dashed, color=grey,")));
    edges.sort();
    for (link, attrs) in edges {
        let [x, y] = link.endpoints();
        let _ = writeln!(
            out,
            "  \"{}\" -- \"{}\" [{} taillabel=\"{}\", headlabel=\"{}\"];",
            x.node, y.node, attrs, x.port, y.port
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;

    #[test]
    fn renders_links_and_highlights() {
        let t = fixtures::motivating_target();
        let style = DotStyle {
            fabricated: [Link::between("A", 2, "B", 1)].into_iter().collect(),
            hidden: [Link::between("A", 2, "C", 1)].into_iter().collect(),
            gaps: ["C".into()].into_iter().collect(),
        };
        let dot = to_dot(&t, "view", &style);
        assert!(dot.starts_with("graph \"view\" {"));
        assert!(dot.contains("\"A\" -- \"B\" [ color=red, taillabel=\"2\", headlabel=\"1\"];"));
        assert!(dot.contains("\"A\" -- \"C\" [ style=dashed, color=grey, taillabel=\"2\", headlabel=\"1\"];"));
        assert!(dot.contains("\"C\" [style=filled, fillcolor=orange];"));
        assert!(dot.trim_end().ends_with('}'));
    }
}
