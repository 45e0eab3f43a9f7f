use std::fmt::Write;

use super::{EdgeKind, TENode, TimeExpandedNetwork};

impl TimeExpandedNetwork<'_> {
    /// Graphviz rendering; node labels are `kind/location/timestep`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph te {\n  rankdir=LR;\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let label = match *node {
                TENode::Source => "source".to_string(),
                TENode::Sink => "sink".to_string(),
                TENode::Grid { location, time } => format!("grid/{location}/{time}"),
                TENode::Pickup {
                    request,
                    location,
                    time,
                } => {
                    format!("pickup{request}/{location}/{time}")
                }
            };
            let _ = writeln!(s, "  n{i} [label=\"{label}\"];");
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::SourceLink | EdgeKind::SinkLink => "dotted",
                EdgeKind::Stay => "solid",
                EdgeKind::Approach => "dashed",
                EdgeKind::Delivery => "bold",
            };
            let _ = writeln!(
                s,
                "  n{} -> n{} [label=\"{}\", style={style}];",
                e.from, e.to, e.cost
            );
        }
        s.push_str("}\n");
        s
    }
}
