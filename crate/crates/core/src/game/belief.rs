use serde::{Deserialize, Serialize};

use super::GameError;

const NORMALIZATION_TOL: f64 = 1e-12;

/// The attacker's belief over the defender's type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    p_deceptive: f64,
    p_production: f64,
}

impl BeliefState {
    pub fn new(p_deceptive: f64, p_production: f64) -> Result<Self, GameError> {
        if !(0.0..=1.0).contains(&p_deceptive) {
            return Err(GameError::Probability { name: "p_deceptive", value: p_deceptive });
        }
        if !(0.0..=1.0).contains(&p_production) {
            return Err(GameError::Probability { name: "p_production", value: p_production });
        }
        let sum = p_deceptive + p_production;
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(GameError::Normalization { sum });
        }
        Ok(Self { p_deceptive, p_production })
    }

    /// Belief putting `p` on the deceptive type.
    pub fn deceptive(p: f64) -> Result<Self, GameError> {
        Self::new(p, 1.0 - p)
    }

    /// Prior of an attacker who expects a honeypot one time in ten.
    pub fn attacker_prior() -> Self {
        Self { p_deceptive: 0.1, p_production: 0.9 }
    }

    pub fn p_deceptive(&self) -> f64 {
        self.p_deceptive
    }

    pub fn p_production(&self) -> f64 {
        self.p_production
    }
}

/// Posterior over the defender type after observing evidence with the given
/// likelihood under each type.
pub fn bayes_update(
    prior: BeliefState,
    likelihood_deceptive: f64,
    likelihood_production: f64,
) -> Result<BeliefState, GameError> {
    if !(0.0..=1.0).contains(&likelihood_deceptive) {
        return Err(GameError::Probability {
            name: "likelihood_deceptive",
            value: likelihood_deceptive,
        });
    }
    if !(0.0..=1.0).contains(&likelihood_production) {
        return Err(GameError::Probability {
            name: "likelihood_production",
            value: likelihood_production,
        });
    }
    let joint_deceptive = likelihood_deceptive * prior.p_deceptive;
    let joint_production = likelihood_production * prior.p_production;
    let evidence = joint_deceptive + joint_production;
    if evidence <= 0.0 {
        return Err(GameError::UndefinedPosterior);
    }
    let p_deceptive = joint_deceptive / evidence;
    // computed as a complement so the pair sums to one exactly
    Ok(BeliefState { p_deceptive, p_production: 1.0 - p_deceptive })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninformative_evidence_keeps_prior() {
        let post = bayes_update(BeliefState::attacker_prior(), 1.0, 1.0).unwrap();
        assert!((post.p_deceptive() - 0.1).abs() < 1e-12);
        assert!((post.p_production() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn conclusive_evidence() {
        let post = bayes_update(BeliefState::attacker_prior(), 1.0, 0.0).unwrap();
        assert_eq!(post.p_deceptive(), 1.0);
        assert_eq!(post.p_production(), 0.0);
    }

    #[test]
    fn zero_evidence_is_an_error() {
        let prior = BeliefState::new(1.0, 0.0).unwrap();
        assert!(matches!(bayes_update(prior, 0.0, 1.0), Err(GameError::UndefinedPosterior)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BeliefState::new(0.5, 0.6).is_err());
        assert!(BeliefState::new(-0.1, 1.1).is_err());
        assert!(bayes_update(BeliefState::attacker_prior(), 1.2, 0.5).is_err());
    }
}
