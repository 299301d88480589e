use serde::{Deserialize, Serialize};

use super::GameError;

/// A utility quantity paired with the subjective probability that it is realised.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Weighted {
    pub value: f64,
    pub prob: f64,
}

impl Weighted {
    pub const fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }

    /// Value realised with certainty.
    pub const fn certain(value: f64) -> Self {
        Self { value, prob: 1.0 }
    }

    pub fn expected(&self) -> f64 {
        self.prob * self.value
    }

    fn validate(&self, name: &'static str) -> Result<(), GameError> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(GameError::Probability { name, value: self.prob });
        }
        if !self.value.is_finite() {
            return Err(GameError::NonFinite { name, value: self.value });
        }
        Ok(())
    }
}

/// Inputs of the three subjective-expected-utility functions.
///
/// Attacker terms: `value` (material gain), `win` (satisfaction of reaching the
/// goal), `satisfaction` (intrinsic motivation), `prestige` and `attack_cost`.
/// Deceptive defender: `insight`, `deception_cost` and the `engagement` offset.
/// Production defender: `breach_cost`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardParams {
    pub value: Weighted,
    pub win: Weighted,
    pub satisfaction: Weighted,
    pub prestige: Weighted,
    pub attack_cost: Weighted,
    pub insight: Weighted,
    pub deception_cost: Weighted,
    pub engagement: Weighted,
    pub breach_cost: Weighted,
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), GameError> {
        self.value.validate("value")?;
        self.win.validate("win")?;
        self.satisfaction.validate("satisfaction")?;
        self.prestige.validate("prestige")?;
        self.attack_cost.validate("attack_cost")?;
        self.insight.validate("insight")?;
        self.deception_cost.validate("deception_cost")?;
        self.engagement.validate("engagement")?;
        self.breach_cost.validate("breach_cost")?;
        Ok(())
    }

    /// All nine magnitudes realised with certainty.
    #[allow(clippy::too_many_arguments)]
    pub fn certain(
        value: f64,
        win: f64,
        satisfaction: f64,
        prestige: f64,
        attack_cost: f64,
        insight: f64,
        deception_cost: f64,
        engagement: f64,
        breach_cost: f64,
    ) -> Self {
        Self {
            value: Weighted::certain(value),
            win: Weighted::certain(win),
            satisfaction: Weighted::certain(satisfaction),
            prestige: Weighted::certain(prestige),
            attack_cost: Weighted::certain(attack_cost),
            insight: Weighted::certain(insight),
            deception_cost: Weighted::certain(deception_cost),
            engagement: Weighted::certain(engagement),
            breach_cost: Weighted::certain(breach_cost),
        }
    }
}

/// Attacker utility: `p_V·V + p_W·W + p_S·S + p_Prestige·Prestige − p_C·C`.
pub fn seu_attacker(params: &RewardParams) -> Result<f64, GameError> {
    params.validate()?;
    Ok(params.value.expected() + params.win.expected() + params.satisfaction.expected()
        + params.prestige.expected()
        - params.attack_cost.expected())
}

/// Deceptive defender utility: `p_I·I − (p_C·C − p_E·E)`.
pub fn seu_defender_deceptive(params: &RewardParams) -> Result<f64, GameError> {
    params.validate()?;
    Ok(params.insight.expected()
        - (params.deception_cost.expected() - params.engagement.expected()))
}

/// Production defender utility: `−p_C·C`.
pub fn seu_defender_production(params: &RewardParams) -> Result<f64, GameError> {
    params.validate()?;
    Ok(-params.breach_cost.expected())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero() -> RewardParams {
        RewardParams::default()
    }

    #[test]
    fn attacker_examples() {
        assert_eq!(seu_attacker(&zero()).unwrap(), 0.0);

        let mut p = zero();
        p.value = Weighted::certain(4.0);
        p.win = Weighted::certain(2.0);
        p.satisfaction = Weighted::certain(2.0);
        p.prestige = Weighted::certain(1.0);
        p.attack_cost = Weighted::certain(3.0);
        assert_eq!(seu_attacker(&p).unwrap(), 6.0);

        let mut p = zero();
        p.value = Weighted::new(10.0, 0.5);
        assert_eq!(seu_attacker(&p).unwrap(), 5.0);
    }

    #[test]
    fn deceptive_examples() {
        assert_eq!(seu_defender_deceptive(&zero()).unwrap(), 0.0);

        let mut p = zero();
        p.insight = Weighted::certain(3.0);
        p.deception_cost = Weighted::certain(2.0);
        p.engagement = Weighted::certain(1.0);
        assert_eq!(seu_defender_deceptive(&p).unwrap(), 2.0);

        let mut p = zero();
        p.insight = Weighted::new(9.0, 0.0);
        p.deception_cost = Weighted::certain(5.0);
        p.engagement = Weighted::new(9.0, 0.0);
        assert_eq!(seu_defender_deceptive(&p).unwrap(), -5.0);
    }

    #[test]
    fn production_examples() {
        let mut p = zero();
        p.breach_cost = Weighted::certain(7.0);
        assert_eq!(seu_defender_production(&p).unwrap(), -7.0);
        p.breach_cost = Weighted::new(7.0, 0.0);
        assert_eq!(seu_defender_production(&p).unwrap(), 0.0);
        p.breach_cost = Weighted::new(4.0, 0.5);
        assert_eq!(seu_defender_production(&p).unwrap(), -2.0);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        let mut p = zero();
        p.prestige = Weighted::new(1.0, 1.5);
        assert!(matches!(seu_attacker(&p), Err(GameError::Probability { name: "prestige", .. })));
        p.prestige = Weighted::new(1.0, -0.1);
        assert!(seu_defender_production(&p).is_err());
        let mut p = zero();
        p.insight = Weighted::new(f64::NAN, 0.5);
        assert!(matches!(seu_defender_deceptive(&p), Err(GameError::NonFinite { .. })));
    }
}
