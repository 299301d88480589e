//! Default integer reward values for the builtin game.
//!
//! The values are a reconstruction: the smallest integers in `[0, 10]` (by
//! total, then lexicographic order) that satisfy the qualitative ordering of
//! the reward model and reproduce the reported equilibrium structure. They are
//! found by [`search_fixture`] and pinned in [`builtin_params`].

use crate::game::{build_game, BeliefState, GameSpec, RewardParams};

use super::{to_normal_form, NormalForm};

/// Magnitudes in the order `V, W, S, Prestige, C_att, I, C_dec, E, C_prod`.
pub type Magnitudes = [u32; 9];

/// Result of the grid search, pinned so the builtin game does not depend on
/// running the search.
pub const BUILTIN_MAGNITUDES: Magnitudes = [1, 1, 1, 1, 1, 1, 2, 1, 3];

pub fn params_from(m: Magnitudes) -> RewardParams {
    let f = |i: usize| f64::from(m[i]);
    RewardParams::certain(f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8))
}

pub fn builtin_params() -> RewardParams {
    params_from(BUILTIN_MAGNITUDES)
}

/// The builtin game: default outcome table, builtin rewards and the
/// attacker's one-in-ten honeypot prior.
pub fn builtin_game() -> GameSpec {
    build_game(&builtin_params(), BeliefState::attacker_prior()).expect("builtin game is valid")
}

/// Orderings the reward model states in prose: every quantity is present,
/// engagement only partially offsets the deception cost, and a production
/// breach costs more than anything the honeypot side weighs.
pub fn admissible(m: &Magnitudes) -> bool {
    let [_v, _w, _s, _pr, _c, insight, deception_cost, engagement, breach] = *m;
    m.iter().all(|&x| x >= 1)
        && engagement < deception_cost
        && breach > insight.max(deception_cost).max(engagement)
}

/// Pure best-response oracle for the reported structure on the strategic
/// form: attack beats resign against every defender strategy (so the attacker
/// attacks in every equilibrium); against attack the defender's best
/// responses are exactly "any action on the honeypot, block on production".
pub fn reproduces_structure(nf: &NormalForm) -> bool {
    let (attack, resign) = match (label_index(nf, 0, "attack"), label_index(nf, 0, "resign")) {
        (Some(a), Some(r)) => (a, r),
        _ => return false,
    };
    let n = nf.strategy_count(1);
    if !(0..n).all(|c| nf.payoff(0, attack, c) > nf.payoff(0, resign, c)) {
        return false;
    }
    let values: Vec<f64> = (0..n).map(|c| nf.payoff(1, attack, c)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..n).all(|c| {
        let blocks_production = nf.agents[1].labels[c].ends_with("production=block");
        let is_best = values[c] == best;
        is_best == blocks_production
    })
}

fn label_index(nf: &NormalForm, player: usize, label: &str) -> Option<usize> {
    nf.agents[player].labels.iter().position(|l| l == label)
}

/// Exhaustive search over `[0, max_value]^9` in order of increasing total
/// and then lexicographically; returns the first admissible magnitudes whose
/// game reproduces the structure, along with the number of candidates
/// examined.
pub fn search_fixture(max_value: u32) -> (Option<Magnitudes>, u64) {
    let mut examined = 0;
    for total in 0..=9 * max_value {
        let mut current = [0u32; 9];
        let mut found = None;
        compositions(total, max_value, 0, &mut current, &mut |m| {
            examined += 1;
            if !admissible(m) {
                return false;
            }
            let Ok(game) = build_game(&params_from(*m), BeliefState::attacker_prior()) else {
                return false;
            };
            let ok = to_normal_form(&game).map(|nf| reproduces_structure(&nf)).unwrap_or(false);
            if ok {
                found = Some(*m);
            }
            ok
        });
        if found.is_some() {
            return (found, examined);
        }
    }
    (None, examined)
}

/// Visits every `m` with `sum(m[pos..]) == remaining` and entries bounded by
/// `max`, in lexicographic order. Stops early when `visit` returns `true`.
fn compositions(
    remaining: u32,
    max: u32,
    pos: usize,
    current: &mut Magnitudes,
    visit: &mut dyn FnMut(&Magnitudes) -> bool,
) -> bool {
    if pos == current.len() - 1 {
        if remaining > max {
            return false;
        }
        current[pos] = remaining;
        return visit(current);
    }
    let slots_after = (current.len() - pos - 1) as u32;
    let lo = remaining.saturating_sub(slots_after * max);
    for x in lo..=remaining.min(max) {
        current[pos] = x;
        if compositions(remaining - x, max, pos + 1, current, visit) {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_count_matches_stars_and_bars() {
        // sum 3 over 9 slots: C(11, 8) = 165
        let mut count = 0;
        compositions(3, 10, 0, &mut [0; 9], &mut |_| {
            count += 1;
            false
        });
        assert_eq!(count, 165);
    }

    #[test]
    fn builtin_satisfies_oracle() {
        let m = BUILTIN_MAGNITUDES;
        assert!(admissible(&m));
        let nf = to_normal_form(&builtin_game()).unwrap();
        assert!(reproduces_structure(&nf));
    }

    #[test]
    fn search_finds_pinned_values() {
        let (found, examined) = search_fixture(10);
        assert_eq!(found, Some(BUILTIN_MAGNITUDES));
        assert!(examined > 0);
    }

    #[test]
    fn zero_rewards_do_not_reproduce() {
        let game = build_game(&params_from([0; 9]), BeliefState::attacker_prior()).unwrap();
        assert!(!reproduces_structure(&to_normal_form(&game).unwrap()));
    }
}
