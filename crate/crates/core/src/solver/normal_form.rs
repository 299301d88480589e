use serde::{Deserialize, Serialize};

use crate::game::{GameSpec, NodeKind};

use super::SolverError;

/// One information set as seen by a normal-form agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfosetView {
    pub label: String,
    pub actions: Vec<String>,
}

/// A player's pure strategies: one action choice per information set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub infosets: Vec<InfosetView>,
    /// `choices[s][k]` is the action index strategy `s` picks at infoset `k`.
    pub choices: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

impl Agent {
    fn from_infosets(infosets: Vec<InfosetView>) -> Self {
        let mut choices: Vec<Vec<usize>> = vec![Vec::new()];
        for set in &infosets {
            choices = choices
                .into_iter()
                .flat_map(|prefix| {
                    (0..set.actions.len()).map(move |a| {
                        let mut c = prefix.clone();
                        c.push(a);
                        c
                    })
                })
                .collect();
        }
        let labels = choices
            .iter()
            .map(|c| strategy_label(&infosets, c))
            .collect();
        Self { infosets, choices, labels }
    }

    /// An agent with a single information set whose actions are `labels`.
    pub fn plain(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            infosets: vec![InfosetView { label: "move".into(), actions: labels.clone() }],
            choices: (0..n).map(|i| vec![i]).collect(),
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            infosets: self.infosets.clone(),
            choices: keep.iter().map(|&i| self.choices[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

fn strategy_label(infosets: &[InfosetView], choice: &[usize]) -> String {
    match infosets {
        [] => "empty".into(),
        [only] => only.actions[choice[0]].clone(),
        many => many
            .iter()
            .zip(choice)
            .map(|(set, &a)| format!("{}={}", set.label, set.actions[a]))
            .collect::<Vec<_>>()
            .join(","),
    }
}

/// Two-player strategic form with payoffs already averaged over chance.
/// Player 0 (rows) is the attacker, player 1 (columns) the defender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub agents: [Agent; 2],
    /// `payoffs[p][r][c]`
    pub payoffs: [Vec<Vec<f64>>; 2],
}

impl NormalForm {
    /// Bimatrix game with default strategy labels `r0.., c0..`.
    pub fn from_matrices(rows: Vec<Vec<f64>>, cols: Vec<Vec<f64>>) -> Result<Self, SolverError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let agents = [
            Agent::plain((0..m).map(|i| format!("r{i}")).collect()),
            Agent::plain((0..n).map(|j| format!("c{j}")).collect()),
        ];
        let nf = Self { agents, payoffs: [rows, cols] };
        nf.validate()?;
        Ok(nf)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let (m, n) = self.shape();
        if m == 0 || n == 0 {
            return Err(SolverError::Shape("a player has no strategies".into()));
        }
        for (p, mat) in self.payoffs.iter().enumerate() {
            if mat.len() != m || mat.iter().any(|r| r.len() != n) {
                return Err(SolverError::Shape(format!("payoff matrix {p} is not {m}x{n}")));
            }
            if mat.iter().flatten().any(|u| !u.is_finite()) {
                return Err(SolverError::Shape(format!("payoff matrix {p} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// `(attacker strategies, defender strategies)`
    pub fn shape(&self) -> (usize, usize) {
        (self.agents[0].len(), self.agents[1].len())
    }

    pub fn payoff(&self, player: usize, row: usize, col: usize) -> f64 {
        self.payoffs[player][row][col]
    }

    /// Payoff of `player`'s pure strategy `s` against the opponent's pure `t`.
    pub fn pure(&self, player: usize, s: usize, t: usize) -> f64 {
        if player == 0 {
            self.payoffs[0][s][t]
        } else {
            self.payoffs[1][t][s]
        }
    }

    pub fn strategy_count(&self, player: usize) -> usize {
        self.agents[player].len()
    }

    /// Expected payoff of each of `player`'s pure strategies against the
    /// opponent's mixed strategy.
    pub fn strategy_values(&self, player: usize, opponent: &[f64]) -> Vec<f64> {
        (0..self.strategy_count(player))
            .map(|s| {
                opponent
                    .iter()
                    .enumerate()
                    .map(|(t, &q)| q * self.pure(player, s, t))
                    .sum()
            })
            .collect()
    }

    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let pick = |mat: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter().map(|&r| cols.iter().map(|&c| mat[r][c]).collect()).collect()
        };
        Self {
            agents: [self.agents[0].restrict(rows), self.agents[1].restrict(cols)],
            payoffs: [pick(&self.payoffs[0]), pick(&self.payoffs[1])],
        }
    }

    /// Applies `u → scale·u + shift` to one player's payoffs.
    pub fn affine(&self, player: usize, scale: f64, shift: f64) -> Self {
        let mut out = self.clone();
        for u in out.payoffs[player].iter_mut().flatten() {
            *u = scale * *u + shift;
        }
        out
    }
}

/// Reduces a game tree to strategic form. Each player's pure strategies are
/// the product of action choices over its information sets; entries are
/// expectations over chance.
pub fn to_normal_form(game: &GameSpec) -> Result<NormalForm, SolverError> {
    let mut infoset_slot = vec![(0usize, 0usize); game.infosets().len()];
    let mut views: [Vec<InfosetView>; 2] = [Vec::new(), Vec::new()];
    for set in game.infosets() {
        let p = set.player.index();
        infoset_slot[set.id] = (p, views[p].len());
        views[p].push(InfosetView { label: set.label.clone(), actions: set.actions.clone() });
    }
    let [va, vd] = views;
    let agents = [Agent::from_infosets(va), Agent::from_infosets(vd)];
    let (m, n) = (agents[0].len(), agents[1].len());

    let mut payoffs = [vec![vec![0.0; n]; m], vec![vec![0.0; n]; m]];
    for r in 0..m {
        for c in 0..n {
            let strategies = [&agents[0].choices[r], &agents[1].choices[c]];
            let value = expected_payoff(game, game.root(), &infoset_slot, strategies)?;
            payoffs[0][r][c] = value[0];
            payoffs[1][r][c] = value[1];
        }
    }
    let nf = NormalForm { agents, payoffs };
    nf.validate()?;
    Ok(nf)
}

fn expected_payoff(
    game: &GameSpec,
    node: usize,
    slots: &[(usize, usize)],
    strategies: [&Vec<usize>; 2],
) -> Result<[f64; 2], SolverError> {
    match &game.node(node).kind {
        NodeKind::Terminal { payoff } => Ok(*payoff),
        NodeKind::Chance { branches } => {
            let mut acc = [0.0; 2];
            for b in branches {
                if b.prob == 0.0 {
                    continue;
                }
                let v = expected_payoff(game, b.child, slots, strategies)?;
                acc[0] += b.prob * v[0];
                acc[1] += b.prob * v[1];
            }
            Ok(acc)
        }
        NodeKind::Decision { infoset, children } => {
            let (player, slot) = slots[*infoset];
            let action = *strategies[player]
                .get(slot)
                .ok_or_else(|| SolverError::Shape(format!("no choice for infoset {infoset}")))?;
            expected_payoff(game, children[action], slots, strategies)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, BeliefState, RewardParams};

    fn deception_params() -> RewardParams {
        RewardParams::certain(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0)
    }

    #[test]
    fn strategy_counts() {
        let g = build_game(&deception_params(), BeliefState::attacker_prior()).unwrap();
        let nf = to_normal_form(&g).unwrap();
        assert_eq!(nf.shape(), (2, 6));
        assert_eq!(nf.agents[0].labels, vec!["attack", "resign"]);
        assert_eq!(nf.agents[1].labels[0], "deceptive=allow,production=allow");
    }

    #[test]
    fn degenerate_nature_equals_subtree() {
        let g = build_game(&deception_params(), BeliefState::new(1.0, 0.0).unwrap()).unwrap();
        let nf = to_normal_form(&g).unwrap();
        for (c, choice) in nf.agents[1].choices.iter().enumerate() {
            let action = &nf.agents[1].infosets[0].actions[choice[0]];
            let leaf = g.follow(&["deceptive", "attack", action]).unwrap();
            let NodeKind::Terminal { payoff } = leaf.kind else { panic!() };
            assert_eq!(nf.payoff(0, 0, c), payoff[0]);
            assert_eq!(nf.payoff(1, 0, c), payoff[1]);
        }
    }

    #[test]
    fn even_prior_averages_states() {
        let params = deception_params();
        let g = build_game(&params, BeliefState::new(0.5, 0.5).unwrap()).unwrap();
        let nf = to_normal_form(&g).unwrap();
        // attack against (deceptive=block, production=allow)
        let col = nf.agents[1]
            .labels
            .iter()
            .position(|l| l == "deceptive=block,production=allow")
            .unwrap();
        let leaf = |path: &[&str]| match g.follow(path).unwrap().kind {
            NodeKind::Terminal { payoff } => payoff,
            _ => panic!(),
        };
        let a = leaf(&["deceptive", "attack", "block"]);
        let b = leaf(&["production", "attack", "allow"]);
        assert_eq!(nf.payoff(0, 0, col), (a[0] + b[0]) / 2.0);
        assert_eq!(nf.payoff(1, 0, col), (a[1] + b[1]) / 2.0);
    }

    #[test]
    fn from_matrices_checks_shape() {
        assert!(NormalForm::from_matrices(vec![vec![1.0, 2.0]], vec![vec![1.0]]).is_err());
        assert!(NormalForm::from_matrices(vec![], vec![]).is_err());
    }
}
