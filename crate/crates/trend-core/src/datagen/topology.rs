//! Synthetic ISP topology: a rooted tree whose leaves are the entities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entity_name;
use crate::error::{Error, Result};

/// One tree node; `parent == None` only for the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyNode {
    pub id: usize,
    pub name: String,
    pub parent: Option<usize>,
}

/// Rooted tree with one leaf per entity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    nodes: Vec<TopologyNode>,
    /// entity id -> leaf node id
    entities: BTreeMap<String, usize>,
}

impl Topology {
    /// Builds a tree from nodes and an entity-to-leaf assignment, checking
    /// connectivity and that every entity sits on exactly one leaf.
    pub fn new(nodes: Vec<TopologyNode>, entities: BTreeMap<String, usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArg("topology: no nodes".into()));
        }
        let mut roots = 0;
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(Error::Data("topology: node ids must be dense 0..n".into()));
            }
            match node.parent {
                None => roots += 1,
                Some(p) if p >= nodes.len() => {
                    return Err(Error::Data(format!("topology: parent {p} out of range")))
                }
                Some(p) if p == idx => {
                    return Err(Error::Data("topology: node is its own parent".into()))
                }
                _ => {}
            }
        }
        if roots != 1 {
            return Err(Error::Data(format!("topology: expected one root, found {roots}")));
        }
        // Connectivity: every node must reach the root without cycles.
        for node in &nodes {
            let mut cur = node.id;
            let mut hops = 0;
            while let Some(p) = nodes[cur].parent {
                cur = p;
                hops += 1;
                if hops > nodes.len() {
                    return Err(Error::Data("topology: cycle detected".into()));
                }
            }
        }
        for (entity, &leaf) in &entities {
            if leaf >= nodes.len() {
                return Err(Error::Data(format!(
                    "topology: entity {entity} mapped to unknown node {leaf}"
                )));
            }
        }
        Ok(Self { nodes, entities })
    }

    /// Root -> regions -> one leaf per entity; entities are assigned to
    /// regions in contiguous chunks so regional events hit neighbors.
    pub fn synthetic(n_users: usize, regions: usize) -> Result<Self> {
        if n_users == 0 || regions == 0 {
            return Err(Error::InvalidArg("topology: users and regions must be >= 1".into()));
        }
        let mut nodes = vec![TopologyNode { id: 0, name: "core".into(), parent: None }];
        for r in 0..regions {
            nodes.push(TopologyNode {
                id: 1 + r,
                name: format!("region-{r}"),
                parent: Some(0),
            });
        }
        let mut entities = BTreeMap::new();
        for u in 0..n_users {
            let region = (u * regions) / n_users;
            let id = nodes.len();
            let name = entity_name(u);
            nodes.push(TopologyNode { id, name: name.clone(), parent: Some(1 + region) });
            entities.insert(name, id);
        }
        Self::new(nodes, entities)
    }

    pub fn root(&self) -> usize {
        self.nodes.iter().position(|n| n.parent.is_none()).expect("validated root")
    }

    pub fn nodes(&self) -> &[TopologyNode] {
        &self.nodes
    }

    pub fn node_by_name(&self, name: &str) -> Option<&TopologyNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn leaf_of(&self, entity: &str) -> Option<usize> {
        self.entities.get(entity).copied()
    }

    pub fn contains_entity(&self, entity: &str) -> bool {
        self.entities.contains_key(entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(|s| s.as_str())
    }

    fn is_ancestor_or_self(&self, ancestor: usize, mut node: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Entities whose leaf lies under `node` (including `node` itself).
    pub fn descendant_entities(&self, node: usize) -> Vec<&str> {
        self.entities
            .iter()
            .filter(|(_, &leaf)| self.is_ancestor_or_self(node, leaf))
            .map(|(e, _)| e.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Topology = serde_json::from_str(s)?;
        Self::new(t.nodes, t.entities)
    }
}
