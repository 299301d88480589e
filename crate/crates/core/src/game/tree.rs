//! Extensive-form game trees: a chance root, decision nodes grouped into
//! information sets, and terminal payoff pairs.
//!
//! The JSON form is what `solve` accepts for hand-written games:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "root": 0,
//!   "infosets": [
//!     { "id": 0, "player": "attacker", "label": "attacker", "actions": ["attack", "resign"] }
//!   ],
//!   "nodes": [
//!     { "id": 0, "kind": "chance", "branches": [ { "label": "deceptive", "prob": 0.1, "child": 1 } ] },
//!     { "id": 1, "kind": "decision", "infoset": 0, "children": [2, 3] },
//!     { "id": 2, "kind": "terminal", "payoff": [1.0, -2.0] }
//!   ]
//! }
//! ```
//!
//! Payoffs are ordered `[attacker, defender]`. Decision node `children` are
//! aligned with the actions of the node's information set.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{GameError, PlayerId};

pub const GAME_SCHEMA_VERSION: u32 = 1;

const CHANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSet {
    pub id: usize,
    pub player: PlayerId,
    pub label: String,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceBranch {
    pub label: String,
    pub prob: f64,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Chance { branches: Vec<ChanceBranch> },
    Decision { infoset: usize, children: Vec<usize> },
    Terminal { payoff: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: NodeKind,
}

/// A validated two-player game tree with chance moves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSpec {
    schema: u32,
    root: usize,
    infosets: Vec<InfoSet>,
    nodes: Vec<Node>,
    #[serde(skip)]
    index: HashMap<usize, usize>,
}

#[derive(Deserialize)]
struct RawGame {
    #[serde(default = "default_schema")]
    schema: u32,
    root: usize,
    infosets: Vec<InfoSet>,
    nodes: Vec<Node>,
}

fn default_schema() -> u32 {
    GAME_SCHEMA_VERSION
}

impl<'de> Deserialize<'de> for GameSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawGame::deserialize(d)?;
        if raw.schema != GAME_SCHEMA_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported game schema {}",
                raw.schema
            )));
        }
        GameSpec::new(raw.root, raw.infosets, raw.nodes).map_err(serde::de::Error::custom)
    }
}

impl GameSpec {
    pub fn new(root: usize, infosets: Vec<InfoSet>, nodes: Vec<Node>) -> Result<Self, GameError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(GameError::Structure(format!("duplicate node id {}", n.id)));
            }
        }
        let spec = Self { schema: GAME_SCHEMA_VERSION, root, infosets, nodes, index };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, GameError> {
        serde_json::from_str(text).map_err(|e| GameError::Structure(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("game spec serializes")
    }

    fn validate(&self) -> Result<(), GameError> {
        let structure = |msg: String| Err(GameError::Structure(msg));

        for (i, set) in self.infosets.iter().enumerate() {
            if set.id != i {
                return structure(format!("infoset at position {i} has id {}", set.id));
            }
            if set.actions.is_empty() {
                return structure(format!("infoset {i} has no actions"));
            }
        }

        let mut parent_count: HashMap<usize, usize> = HashMap::new();
        let mut infoset_used = vec![false; self.infosets.len()];
        for n in &self.nodes {
            match &n.kind {
                NodeKind::Chance { branches } => {
                    if branches.is_empty() {
                        return structure(format!("chance node {} has no branches", n.id));
                    }
                    let mut sum = 0.0;
                    for b in branches {
                        if !(0.0..=1.0).contains(&b.prob) {
                            return structure(format!(
                                "chance node {} branch '{}' has probability {}",
                                n.id, b.label, b.prob
                            ));
                        }
                        sum += b.prob;
                        *parent_count.entry(b.child).or_default() += 1;
                    }
                    if (sum - 1.0).abs() > CHANCE_TOL {
                        return structure(format!(
                            "chance node {} probabilities sum to {sum}",
                            n.id
                        ));
                    }
                }
                NodeKind::Decision { infoset, children } => {
                    let Some(set) = self.infosets.get(*infoset) else {
                        return structure(format!("node {} references unknown infoset {infoset}", n.id));
                    };
                    if children.len() != set.actions.len() {
                        return structure(format!(
                            "node {} has {} children but infoset {infoset} has {} actions",
                            n.id,
                            children.len(),
                            set.actions.len()
                        ));
                    }
                    infoset_used[*infoset] = true;
                    for c in children {
                        *parent_count.entry(*c).or_default() += 1;
                    }
                }
                NodeKind::Terminal { payoff } => {
                    if payoff.iter().any(|u| !u.is_finite()) {
                        return structure(format!("terminal {} has a non-finite payoff", n.id));
                    }
                }
            }
        }

        if !self.index.contains_key(&self.root) {
            return structure(format!("root {} is not a node", self.root));
        }
        if parent_count.contains_key(&self.root) {
            return structure("root has a parent".into());
        }
        for (child, count) in &parent_count {
            if !self.index.contains_key(child) {
                return structure(format!("edge to unknown node {child}"));
            }
            if *count > 1 {
                return structure(format!("node {child} has {count} parents"));
            }
        }
        for n in &self.nodes {
            if n.id != self.root && !parent_count.contains_key(&n.id) {
                return structure(format!("node {} is unreachable", n.id));
            }
        }
        if let Some(unused) = infoset_used.iter().position(|u| !u) {
            return structure(format!("infoset {unused} has no nodes"));
        }

        // every node has one parent and the root none, so reaching all nodes
        // from the root without revisiting proves the graph is a tree
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let i = self.index[&id];
            if std::mem::replace(&mut seen[i], true) {
                return structure(format!("cycle through node {id}"));
            }
            stack.extend(self.children(id));
        }
        if seen.iter().any(|s| !s) {
            return structure("tree contains a cycle detached from the root".into());
        }
        Ok(())
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[self.index[&id]]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    pub fn infosets_of(&self, player: PlayerId) -> impl Iterator<Item = &InfoSet> {
        self.infosets.iter().filter(move |s| s.player == player)
    }

    pub fn children(&self, id: usize) -> Vec<usize> {
        match &self.node(id).kind {
            NodeKind::Chance { branches } => branches.iter().map(|b| b.child).collect(),
            NodeKind::Decision { children, .. } => children.clone(),
            NodeKind::Terminal { .. } => Vec::new(),
        }
    }

    pub fn terminals(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Terminal { .. }))
    }

    /// Decision nodes that belong to `infoset`.
    pub fn members(&self, infoset: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Decision { infoset: s, .. } if s == infoset))
            .map(|n| n.id)
            .collect()
    }

    /// Follows a sequence of edge labels (chance branch labels or action
    /// names) from the root.
    pub fn follow(&self, path: &[&str]) -> Option<&Node> {
        let mut id = self.root;
        for step in path {
            id = match &self.node(id).kind {
                NodeKind::Chance { branches } => branches.iter().find(|b| b.label == *step)?.child,
                NodeKind::Decision { infoset, children } => {
                    let pos = self.infosets[*infoset].actions.iter().position(|a| a == step)?;
                    children[pos]
                }
                NodeKind::Terminal { .. } => return None,
            };
        }
        Some(self.node(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> String {
        r#"{
          "root": 0,
          "infosets": [{ "id": 0, "player": "attacker", "label": "a", "actions": ["x", "y"] }],
          "nodes": [
            { "id": 0, "kind": "decision", "infoset": 0, "children": [1, 2] },
            { "id": 1, "kind": "terminal", "payoff": [1, 0] },
            { "id": 2, "kind": "terminal", "payoff": [0, 1] }
          ]
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_round_trips() {
        let g = GameSpec::from_json(&tiny()).unwrap();
        assert_eq!(g.terminals().count(), 2);
        let again = GameSpec::from_json(&g.to_json_pretty()).unwrap();
        assert_eq!(g, again);
        assert!(matches!(g.follow(&["y"]).unwrap().kind, NodeKind::Terminal { payoff: [0.0, 1.0] }));
    }

    #[test]
    fn rejects_shared_child() {
        let text = tiny().replace("\"children\": [1, 2]", "\"children\": [1, 1]");
        let err = GameSpec::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("parents") || err.to_string().contains("unreachable"));
    }

    #[test]
    fn rejects_action_count_mismatch() {
        let text = tiny().replace("\"children\": [1, 2]", "\"children\": [1]");
        assert!(GameSpec::from_json(&text).is_err());
    }

    #[test]
    fn rejects_bad_chance_probabilities() {
        let text = r#"{
          "root": 0,
          "infosets": [],
          "nodes": [
            { "id": 0, "kind": "chance", "branches": [
                { "label": "a", "prob": 0.5, "child": 1 },
                { "label": "b", "prob": 0.2, "child": 2 } ] },
            { "id": 1, "kind": "terminal", "payoff": [0, 0] },
            { "id": 2, "kind": "terminal", "payoff": [0, 0] }
          ]
        }"#;
        assert!(GameSpec::from_json(text).unwrap_err().to_string().contains("sum"));
    }

    #[test]
    fn rejects_self_loop() {
        let text = r#"{
          "root": 0,
          "infosets": [{ "id": 0, "player": "defender", "label": "d", "actions": ["x"] }],
          "nodes": [
            { "id": 0, "kind": "terminal", "payoff": [0, 0] },
            { "id": 1, "kind": "decision", "infoset": 0, "children": [1] }
          ]
        }"#;
        assert!(GameSpec::from_json(text).is_err());
    }

    #[test]
    fn rejects_unknown_schema() {
        let text = tiny().replacen("{", "{ \"schema\": 7,", 1);
        assert!(GameSpec::from_json(&text).unwrap_err().to_string().contains("schema"));
    }
}
