use serde::{Deserialize, Serialize};

use super::{NormalForm, SolverError};

const SUM_TOL: f64 = 1e-9;

/// One mixed strategy per agent over its pure strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub attacker: Vec<f64>,
    pub defender: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(attacker: Vec<f64>, defender: Vec<f64>) -> Result<Self, SolverError> {
        let p = Self { attacker, defender };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(nf: &NormalForm) -> Self {
        let (m, n) = nf.shape();
        Self { attacker: vec![1.0 / m as f64; m], defender: vec![1.0 / n as f64; n] }
    }

    pub fn pure(nf: &NormalForm, row: usize, col: usize) -> Self {
        let (m, n) = nf.shape();
        let mut attacker = vec![0.0; m];
        let mut defender = vec![0.0; n];
        attacker[row] = 1.0;
        defender[col] = 1.0;
        Self { attacker, defender }
    }

    pub fn get(&self, player: usize) -> &[f64] {
        if player == 0 {
            &self.attacker
        } else {
            &self.defender
        }
    }

    pub fn get_mut(&mut self, player: usize) -> &mut Vec<f64> {
        if player == 0 {
            &mut self.attacker
        } else {
            &mut self.defender
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        for (name, mix) in [("attacker", &self.attacker), ("defender", &self.defender)] {
            if mix.is_empty() {
                return Err(SolverError::Profile(format!("{name} mixture is empty")));
            }
            if mix.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(SolverError::Profile(format!("{name} mixture has a negative entry")));
            }
            let sum: f64 = mix.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(SolverError::Profile(format!("{name} mixture sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Expected payoff of `player` under the profile.
    pub fn value(&self, nf: &NormalForm, player: usize) -> f64 {
        let values = nf.strategy_values(player, self.get(1 - player));
        values.iter().zip(self.get(player)).map(|(v, p)| v * p).sum()
    }

    /// Per-information-set action probabilities implied by the mixtures.
    pub fn behavioral(&self, nf: &NormalForm) -> BehavioralProfile {
        let agent_view = |player: usize| -> Vec<InfosetBehavior> {
            let agent = &nf.agents[player];
            agent
                .infosets
                .iter()
                .enumerate()
                .map(|(k, set)| {
                    let mut probs = vec![0.0; set.actions.len()];
                    for (s, choice) in agent.choices.iter().enumerate() {
                        probs[choice[k]] += self.get(player)[s];
                    }
                    InfosetBehavior {
                        infoset: set.label.clone(),
                        actions: set
                            .actions
                            .iter()
                            .cloned()
                            .zip(probs)
                            .map(|(action, prob)| ActionProb { action, prob })
                            .collect(),
                    }
                })
                .collect()
        };
        BehavioralProfile { attacker: agent_view(0), defender: agent_view(1) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProb {
    pub action: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfosetBehavior {
    pub infoset: String,
    pub actions: Vec<ActionProb>,
}

impl InfosetBehavior {
    pub fn prob(&self, action: &str) -> Option<f64> {
        self.actions.iter().find(|a| a.action == action).map(|a| a.prob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralProfile {
    pub attacker: Vec<InfosetBehavior>,
    pub defender: Vec<InfosetBehavior>,
}

impl BehavioralProfile {
    pub fn infoset(&self, player: usize, label: &str) -> Option<&InfosetBehavior> {
        let sets = if player == 0 { &self.attacker } else { &self.defender };
        sets.iter().find(|s| s.infoset == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheck {
    pub value: f64,
    pub best_response: usize,
    pub best_value: f64,
    /// What the best pure deviation gains over the current mixture.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub epsilon: f64,
    pub agents: [AgentCheck; 2],
    pub passed: bool,
}

impl VerificationReport {
    pub fn max_gain(&self) -> f64 {
        self.agents[0].gain.max(self.agents[1].gain)
    }
}

/// Best pure deviation gain per agent; passes when no agent can gain more
/// than `epsilon`.
pub fn verify_equilibrium(nf: &NormalForm, profile: &StrategyProfile, epsilon: f64) -> VerificationReport {
    let check = |player: usize| {
        let values = nf.strategy_values(player, profile.get(1 - player));
        let value: f64 = values.iter().zip(profile.get(player)).map(|(v, p)| v * p).sum();
        let (best_response, best_value) = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        AgentCheck { value, best_response, best_value, gain: (best_value - value).max(0.0) }
    };
    let agents = [check(0), check(1)];
    let passed = agents.iter().all(|a| a.gain <= epsilon);
    VerificationReport { epsilon, agents, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dominant() -> NormalForm {
        // row 0 strictly dominant for the attacker (gap 2 against both columns)
        NormalForm::from_matrices(
            vec![vec![3.0, 4.0], vec![1.0, 2.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn dominant_profile_passes_at_zero() {
        let nf = dominant();
        let r = verify_equilibrium(&nf, &StrategyProfile::pure(&nf, 0, 0), 0.0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn dominated_play_reports_gap() {
        let nf = dominant();
        // attacker plays row 1 against column 0: gap 3 - 1 = 2; defender best
        // responds to row 1 with column 1, gain 1 - 0 = 1
        let r = verify_equilibrium(&nf, &StrategyProfile::pure(&nf, 1, 0), 1e-9);
        assert!(!r.passed);
        assert_eq!(r.agents[0].gain, 2.0);
        assert_eq!(r.agents[0].best_response, 0);
        assert_eq!(r.agents[1].gain, 1.0);
    }

    #[test]
    fn huge_epsilon_is_vacuous() {
        let nf = dominant();
        let p = StrategyProfile::new(vec![0.3, 0.7], vec![0.9, 0.1]).unwrap();
        assert!(verify_equilibrium(&nf, &p, 1e300).passed);
    }

    #[test]
    fn profile_validation() {
        assert!(StrategyProfile::new(vec![0.5, 0.6], vec![1.0]).is_err());
        assert!(StrategyProfile::new(vec![1.5, -0.5], vec![1.0]).is_err());
        assert!(StrategyProfile::new(vec![f64::NAN, 1.0], vec![1.0]).is_err());
        assert!(StrategyProfile::new(vec![0.25, 0.75], vec![1.0]).is_ok());
    }
}
