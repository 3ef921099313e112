//! JSON form of an event tree.
//!
//! ```json
//! { "time_grid": [0, 0.5, 1],
//!   "nodes": [ { "id": 0, "k": 0, "parent": null,
//!                "children": [ { "id": 1, "prob": 0.5 }, { "id": 2, "prob": 0.5 } ],
//!                "price": [100] }, ... ] }
//! ```

use rbsde_core::lattice::Node;
use rbsde_core::{EventTree, NodeId, Scalar};
use serde::{Deserialize, Serialize};

use crate::num::Num;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub time_grid: Vec<Num>,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: usize,
    pub k: usize,
    pub parent: Option<usize>,
    pub children: Vec<ChildDoc>,
    pub price: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildDoc {
    pub id: usize,
    pub prob: Num,
}

pub fn scalar_num<S: Scalar>(v: &S) -> Num {
    Num::new(v.to_string())
}

impl TreeDoc {
    pub fn from_tree<S: Scalar>(tree: &EventTree<S>) -> Self {
        let nodes = tree
            .ids()
            .map(|id| {
                let n = tree.node(id);
                NodeDoc {
                    id: id.0,
                    k: n.step,
                    parent: n.parent.map(|p| p.0),
                    children: n
                        .children
                        .iter()
                        .zip(&n.probs)
                        .map(|(c, p)| ChildDoc { id: c.0, prob: scalar_num(p) })
                        .collect(),
                    price: n.price.iter().map(scalar_num).collect(),
                }
            })
            .collect();
        TreeDoc { time_grid: tree.time_grid().iter().map(scalar_num).collect(), nodes }
    }

    /// Builds the tree; node ids must equal their position in `nodes`.
    pub fn to_tree<S: Scalar>(&self) -> Result<EventTree<S>, String> {
        let num = |n: &Num, what: &str| n.to_scalar::<S>().map_err(|e| format!("{what}: {e}"));
        let time_grid = self.time_grid.iter().map(|t| num(t, "time_grid")).collect::<Result<Vec<_>, _>>()?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node at position {i} has id {}; ids must be 0, 1, 2, ... in order", n.id));
            }
            let ctx = format!("node {i}");
            nodes.push(Node {
                step: n.k,
                parent: n.parent.map(NodeId),
                children: n.children.iter().map(|c| NodeId(c.id)).collect(),
                probs: n.children.iter().map(|c| num(&c.prob, &ctx)).collect::<Result<_, _>>()?,
                price: n.price.iter().map(|p| num(p, &ctx)).collect::<Result<_, _>>()?,
            });
        }
        EventTree::from_nodes(nodes, time_grid).map_err(|e| e.to_string())
    }
}
