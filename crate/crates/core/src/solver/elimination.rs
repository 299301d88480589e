use serde::{Deserialize, Serialize};

use super::NormalForm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// 1-based round in which the strategy was removed.
    pub iteration: usize,
    /// 0 = attacker, 1 = defender.
    pub agent: usize,
    pub strategy: String,
    pub dominated_by: String,
    /// Indices into the input form.
    pub strategy_index: usize,
    pub dominated_by_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EliminationTrace {
    pub steps: Vec<Elimination>,
}

impl EliminationTrace {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Round in which a strategy with this label was removed, if any.
    pub fn iteration_of(&self, agent: usize, label: &str) -> Option<usize> {
        self.steps
            .iter()
            .find(|e| e.agent == agent && e.strategy == label)
            .map(|e| e.iteration)
    }

    /// Re-applies the trace to `nf`, returning the surviving index sets.
    pub fn replay(&self, nf: &NormalForm) -> [Vec<usize>; 2] {
        let mut alive = [
            (0..nf.strategy_count(0)).collect::<Vec<_>>(),
            (0..nf.strategy_count(1)).collect::<Vec<_>>(),
        ];
        for e in &self.steps {
            alive[e.agent].retain(|&s| s != e.strategy_index);
        }
        alive
    }
}

/// `true` when `s` earns strictly more than `t` for `player` against every
/// surviving opponent strategy.
fn strictly_dominates(nf: &NormalForm, player: usize, s: usize, t: usize, opponents: &[usize]) -> bool {
    opponents.iter().all(|&o| nf.pure(player, s, o) > nf.pure(player, t, o))
}

/// Iterated elimination of pure strategies strictly dominated by another pure
/// strategy. Each round tests both players against the sets that survived
/// the previous round and removes everything found at once; ties never
/// eliminate.
pub fn iterated_elimination(nf: &NormalForm) -> (NormalForm, EliminationTrace) {
    let mut alive = [
        (0..nf.strategy_count(0)).collect::<Vec<_>>(),
        (0..nf.strategy_count(1)).collect::<Vec<_>>(),
    ];
    let mut trace = EliminationTrace::default();
    let mut iteration = 0;

    loop {
        iteration += 1;
        let mut removed: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for player in 0..2 {
            let opponents = &alive[1 - player];
            for &t in &alive[player] {
                let dominator = alive[player]
                    .iter()
                    .copied()
                    .find(|&s| s != t && strictly_dominates(nf, player, s, t, opponents));
                if let Some(s) = dominator {
                    removed[player].push(t);
                    trace.steps.push(Elimination {
                        iteration,
                        agent: player,
                        strategy: nf.agents[player].labels[t].clone(),
                        dominated_by: nf.agents[player].labels[s].clone(),
                        strategy_index: t,
                        dominated_by_index: s,
                    });
                }
            }
        }
        if removed.iter().all(Vec::is_empty) {
            break;
        }
        for player in 0..2 {
            alive[player].retain(|s| !removed[player].contains(s));
        }
    }

    (nf.restrict(&alive[0], &alive[1]), trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_strictly_worse_row() {
        // row 1 is worse than row 0 in every column
        let nf = NormalForm::from_matrices(
            vec![vec![3.0, 2.0], vec![1.0, 0.0]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let (reduced, trace) = iterated_elimination(&nf);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].iteration, 1);
        assert_eq!(trace.steps[0].strategy, "r1");
        assert_eq!(reduced.shape(), (1, 2));
    }

    #[test]
    fn matching_pennies_has_nothing_dominated() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let nf = NormalForm::from_matrices(a, b).unwrap();
        let (reduced, trace) = iterated_elimination(&nf);
        assert!(trace.is_empty());
        assert_eq!(reduced, nf);
    }

    #[test]
    fn ties_never_eliminate() {
        let nf = NormalForm::from_matrices(
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let (_, trace) = iterated_elimination(&nf);
        assert!(trace.is_empty());
    }

    #[test]
    fn cascades_and_replays() {
        // prisoner's dilemma style cascade: column 1 dominated, then row 1
        let a = vec![vec![3.0, 0.0], vec![2.0, 5.0]];
        let b = vec![vec![2.0, 1.0], vec![2.0, 1.0]];
        let nf = NormalForm::from_matrices(a, b).unwrap();
        let (reduced, trace) = iterated_elimination(&nf);
        assert_eq!(trace.iteration_of(1, "c1"), Some(1));
        assert_eq!(trace.iteration_of(0, "r1"), Some(2));
        assert_eq!(reduced.shape(), (1, 1));
        assert_eq!(trace.replay(&nf), [vec![0], vec![0]]);
    }
}
