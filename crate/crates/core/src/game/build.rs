use serde::{Deserialize, Serialize};

use super::reward::{seu_attacker, seu_defender_deceptive, seu_defender_production};
use super::tree::{ChanceBranch, GameSpec, InfoSet, Node, NodeKind};
use super::{AttackerAction, BeliefState, DefenderAction, GameError, PlayerId, RewardParams, WorldState};

/// Which reward terms are realised at a terminal outcome. Inactive terms have
/// their probability zeroed before the utility functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TermMask {
    pub value: bool,
    pub win: bool,
    pub satisfaction: bool,
    pub prestige: bool,
    pub attack_cost: bool,
    pub insight: bool,
    pub deception_cost: bool,
    pub engagement: bool,
    pub breach_cost: bool,
}

impl TermMask {
    pub fn apply(&self, params: &RewardParams) -> RewardParams {
        let keep = |on: bool, w: super::Weighted| if on { w } else { super::Weighted::new(w.value, 0.0) };
        RewardParams {
            value: keep(self.value, params.value),
            win: keep(self.win, params.win),
            satisfaction: keep(self.satisfaction, params.satisfaction),
            prestige: keep(self.prestige, params.prestige),
            attack_cost: keep(self.attack_cost, params.attack_cost),
            insight: keep(self.insight, params.insight),
            deception_cost: keep(self.deception_cost, params.deception_cost),
            engagement: keep(self.engagement, params.engagement),
            breach_cost: keep(self.breach_cost, params.breach_cost),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub state: WorldState,
    pub attacker: AttackerAction,
    /// `None` when the attacker's move ends the game.
    pub defender: Option<DefenderAction>,
    pub terms: TermMask,
}

/// Outcome → active-terms table used to populate terminal payoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub rows: Vec<OutcomeRow>,
}

impl Default for OutcomeTable {
    /// - Attacking a honeypot yields no material gain and no win: only intrinsic
    ///   satisfaction, prestige and the attack cost. The deceptive defender
    ///   realises insight, cost and engagement regardless of its response.
    /// - Resigning gives the attacker nothing. The deceptive defender forfeits
    ///   insight and engagement but still carries its deception cost; the
    ///   production defender incurs no breach cost.
    /// - An allowed attack on production realises every attacker term and the
    ///   breach cost; a blocked one leaves only satisfaction, prestige and cost.
    fn default() -> Self {
        let honeypot_attack = TermMask {
            satisfaction: true,
            prestige: true,
            attack_cost: true,
            insight: true,
            deception_cost: true,
            engagement: true,
            ..TermMask::default()
        };
        let mut rows: Vec<OutcomeRow> = WorldState::Deceptive
            .defender_actions()
            .iter()
            .map(|&d| OutcomeRow {
                state: WorldState::Deceptive,
                attacker: AttackerAction::Attack,
                defender: Some(d),
                terms: honeypot_attack,
            })
            .collect();
        rows.push(OutcomeRow {
            state: WorldState::Deceptive,
            attacker: AttackerAction::Resign,
            defender: None,
            terms: TermMask { deception_cost: true, ..TermMask::default() },
        });
        rows.push(OutcomeRow {
            state: WorldState::Production,
            attacker: AttackerAction::Attack,
            defender: Some(DefenderAction::Allow),
            terms: TermMask {
                value: true,
                win: true,
                satisfaction: true,
                prestige: true,
                attack_cost: true,
                breach_cost: true,
                ..TermMask::default()
            },
        });
        rows.push(OutcomeRow {
            state: WorldState::Production,
            attacker: AttackerAction::Attack,
            defender: Some(DefenderAction::Block),
            terms: TermMask {
                satisfaction: true,
                prestige: true,
                attack_cost: true,
                ..TermMask::default()
            },
        });
        rows.push(OutcomeRow {
            state: WorldState::Production,
            attacker: AttackerAction::Resign,
            defender: None,
            terms: TermMask::default(),
        });
        Self { rows }
    }
}

impl OutcomeTable {
    pub fn lookup(
        &self,
        state: WorldState,
        attacker: AttackerAction,
        defender: Option<DefenderAction>,
    ) -> Option<&OutcomeRow> {
        self.rows
            .iter()
            .find(|r| r.state == state && r.attacker == attacker && r.defender == defender)
    }

    /// `(attacker, defender)` utility at one outcome.
    pub fn payoff(
        &self,
        params: &RewardParams,
        state: WorldState,
        attacker: AttackerAction,
        defender: Option<DefenderAction>,
    ) -> Result<[f64; 2], GameError> {
        let row = self.lookup(state, attacker, defender).ok_or_else(|| {
            GameError::Structure(format!(
                "outcome table has no row for {state}/{attacker}/{}",
                defender.map_or("-".to_string(), |d| d.to_string())
            ))
        })?;
        let active = row.terms.apply(params);
        let defender_utility = match state {
            WorldState::Deceptive => seu_defender_deceptive(&active)?,
            WorldState::Production => seu_defender_production(&active)?,
        };
        Ok([seu_attacker(&active)?, defender_utility])
    }
}

/// Builds the two-type game with the default outcome table.
pub fn build_game(params: &RewardParams, prior: BeliefState) -> Result<GameSpec, GameError> {
    build_game_with(params, prior, &OutcomeTable::default())
}

/// Builds the game tree: nature picks the defender type, the attacker moves
/// without observing it, and after an attack the defender responds with an
/// action legal in its state.
pub fn build_game_with(
    params: &RewardParams,
    prior: BeliefState,
    table: &OutcomeTable,
) -> Result<GameSpec, GameError> {
    params.validate()?;

    let mut infosets = vec![InfoSet {
        id: 0,
        player: PlayerId::Attacker,
        label: "attacker".into(),
        actions: AttackerAction::ALL.iter().map(|a| a.to_string()).collect(),
    }];
    let mut nodes = Vec::new();
    let mut next_id = 1;
    let mut branches = Vec::new();

    for state in WorldState::ALL {
        let defender_set = infosets.len();
        infosets.push(InfoSet {
            id: defender_set,
            player: PlayerId::Defender,
            label: state.to_string(),
            actions: state.defender_actions().iter().map(|a| a.to_string()).collect(),
        });

        let attacker_node = next_id;
        next_id += 1;
        branches.push(ChanceBranch {
            label: state.to_string(),
            prob: prior.prob(state),
            child: attacker_node,
        });

        let mut attacker_children = Vec::new();
        for attack in AttackerAction::ALL {
            let child = next_id;
            next_id += 1;
            attacker_children.push(child);
            match attack {
                AttackerAction::Attack => {
                    let mut defender_children = Vec::new();
                    for &d in state.defender_actions() {
                        let leaf = next_id;
                        next_id += 1;
                        defender_children.push(leaf);
                        nodes.push(Node {
                            id: leaf,
                            label: Some(format!("{state}/{attack}/{d}")),
                            kind: NodeKind::Terminal {
                                payoff: table.payoff(params, state, attack, Some(d))?,
                            },
                        });
                    }
                    nodes.push(Node {
                        id: child,
                        label: Some(format!("{state}/{attack}")),
                        kind: NodeKind::Decision { infoset: defender_set, children: defender_children },
                    });
                }
                AttackerAction::Resign => nodes.push(Node {
                    id: child,
                    label: Some(format!("{state}/{attack}")),
                    kind: NodeKind::Terminal { payoff: table.payoff(params, state, attack, None)? },
                }),
            }
        }
        nodes.push(Node {
            id: attacker_node,
            label: Some(state.to_string()),
            kind: NodeKind::Decision { infoset: 0, children: attacker_children },
        });
    }
    nodes.push(Node { id: 0, label: Some("nature".into()), kind: NodeKind::Chance { branches } });
    nodes.sort_by_key(|n| n.id);

    GameSpec::new(0, infosets, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Weighted;

    #[test]
    fn topology_matches_two_type_game() {
        let g = build_game(&RewardParams::default(), BeliefState::attacker_prior()).unwrap();
        assert_eq!(g.terminals().count(), 7);
        let attacker_sets: Vec<_> = g.infosets_of(PlayerId::Attacker).collect();
        assert_eq!(attacker_sets.len(), 1);
        assert_eq!(g.members(attacker_sets[0].id).len(), 2);
        match &g.node(g.root()).kind {
            NodeKind::Chance { branches } => {
                assert_eq!(branches[0].label, "deceptive");
                assert_eq!(branches[0].prob, 0.1);
                assert_eq!(branches[1].label, "production");
                assert_eq!(branches[1].prob, 0.9);
            }
            other => panic!("root is {other:?}"),
        }
        for t in g.terminals() {
            assert!(matches!(t.kind, NodeKind::Terminal { payoff: [0.0, 0.0] }));
        }
    }

    #[test]
    fn terminals_per_branch() {
        let g = build_game(&RewardParams::default(), BeliefState::attacker_prior()).unwrap();
        let count = |prefix: &str| {
            g.terminals()
                .filter(|t| t.label.as_deref().unwrap().starts_with(prefix))
                .count()
        };
        assert_eq!(count("deceptive/attack/"), 3);
        assert_eq!(count("deceptive/resign"), 1);
        assert_eq!(count("production/attack/"), 2);
        assert_eq!(count("production/resign"), 1);
    }

    #[test]
    fn honeypot_attack_ignores_material_gain() {
        let mut p = RewardParams::default();
        p.value = Weighted::certain(100.0);
        p.win = Weighted::certain(50.0);
        p.satisfaction = Weighted::certain(2.0);
        let g = build_game(&p, BeliefState::attacker_prior()).unwrap();
        let leaf = g.follow(&["deceptive", "attack", "insult"]).unwrap();
        assert!(matches!(leaf.kind, NodeKind::Terminal { payoff: [a, _] } if a == 2.0));
        let leaf = g.follow(&["production", "attack", "allow"]).unwrap();
        assert!(matches!(leaf.kind, NodeKind::Terminal { payoff: [a, _] } if a == 152.0));
    }

    #[test]
    fn missing_row_is_reported() {
        let mut table = OutcomeTable::default();
        table.rows.pop();
        let err = build_game_with(&RewardParams::default(), BeliefState::attacker_prior(), &table);
        assert!(matches!(err, Err(GameError::Structure(_))));
    }
}
