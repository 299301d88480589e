use nalgebra::{DMatrix, DVector};

use super::{logit_qre_trace, verify_equilibrium, NormalForm, QreOptions, QrePoint, SolverError, StrategyProfile};

/// Relative thresholds used to read a support off the end of the QRE path.
const SUPPORT_THRESHOLDS: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8];

/// Times the path is extended by a factor of four in `λ` when its end point
/// cannot be projected yet.
const EXTENSIONS: u32 = 6;

/// Equilibrium check tolerance applied to the polished profile.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Nash equilibrium selected by the logit QRE path with default options.
pub fn nash_from_qre(nf: &NormalForm) -> Result<StrategyProfile, SolverError> {
    nash_from_qre_with(nf, &QreOptions::default(), DEFAULT_EPSILON)
}

/// Follows the QRE path to its last precision and projects the end point
/// onto an exact equilibrium: candidate supports are read off the mixture,
/// and on each support the profile is either truncated or re-solved from the
/// opponent's indifference conditions. The first candidate that passes
/// [`verify_equilibrium`] at `epsilon` is returned.
pub fn nash_from_qre_with(
    nf: &NormalForm,
    opts: &QreOptions,
    epsilon: f64,
) -> Result<StrategyProfile, SolverError> {
    let path = logit_qre_trace(nf, opts)?;
    let end = path.last().expect("validated schedule is non-empty");
    project_limit(nf, end, opts, epsilon)
}

/// Projects the path end onto an equilibrium, following the branch to higher
/// precision while near-ties keep the end point too far from its limit.
pub(crate) fn project_limit(
    nf: &NormalForm,
    end: &QrePoint,
    opts: &QreOptions,
    epsilon: f64,
) -> Result<StrategyProfile, SolverError> {
    let mut result = polish(nf, &end.profile, epsilon);
    for k in 1..=EXTENSIONS {
        let Err(SolverError::Polish { max_gain }) = result else { break };
        let further = QreOptions { lambdas: vec![end.lambda * 4f64.powi(k as i32)], ..opts.clone() };
        result = match logit_qre_trace(nf, &further) {
            Ok(p) => polish(nf, &p[0].profile, epsilon),
            Err(_) => Err(SolverError::Polish { max_gain }),
        };
    }
    result
}

pub(crate) fn polish(
    nf: &NormalForm,
    end: &StrategyProfile,
    epsilon: f64,
) -> Result<StrategyProfile, SolverError> {
    let mut best_gain = f64::INFINITY;
    let mut consider = |candidate: StrategyProfile| -> Option<StrategyProfile> {
        candidate.validate().ok()?;
        let report = verify_equilibrium(nf, &candidate, epsilon);
        if report.passed {
            return Some(candidate);
        }
        best_gain = best_gain.min(report.max_gain());
        None
    };

    for threshold in SUPPORT_THRESHOLDS {
        let supports = [support(&end.attacker, threshold), support(&end.defender, threshold)];
        let truncated = [truncate(&end.attacker, &supports[0]), truncate(&end.defender, &supports[1])];
        let solved = [
            indifference_mix(nf, 0, &supports[0], &supports[1]),
            indifference_mix(nf, 1, &supports[1], &supports[0]),
        ];

        let mut options = vec![[Some(truncated[0].clone()), Some(truncated[1].clone())]];
        options.push([solved[0].clone(), solved[1].clone()]);
        options.push([solved[0].clone(), Some(truncated[1].clone())]);
        options.push([Some(truncated[0].clone()), solved[1].clone()]);
        for pair in options {
            if let [Some(a), Some(d)] = pair {
                if let Some(found) = consider(StrategyProfile { attacker: a, defender: d }) {
                    return Ok(found);
                }
            }
        }
    }
    if let Some(found) = consider(end.clone()) {
        return Ok(found);
    }
    Err(SolverError::Polish { max_gain: best_gain })
}

fn support(mix: &[f64], threshold: f64) -> Vec<usize> {
    let max = mix.iter().copied().fold(0.0, f64::max);
    (0..mix.len()).filter(|&i| mix[i] > threshold * max).collect()
}

fn truncate(mix: &[f64], support: &[usize]) -> Vec<f64> {
    let total: f64 = support.iter().map(|&i| mix[i]).sum();
    let mut out = vec![0.0; mix.len()];
    for &i in support {
        out[i] = mix[i] / total;
    }
    out
}

/// Mixture of `player` over `own` that makes every opponent strategy in
/// `other` earn the same payoff (least squares, so degenerate supports still
/// yield the minimum-norm solution).
fn indifference_mix(nf: &NormalForm, player: usize, own: &[usize], other: &[usize]) -> Option<Vec<f64>> {
    let rows = other.len() + 1;
    let cols = own.len() + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    let opponent = 1 - player;
    for (r, &o) in other.iter().enumerate() {
        for (c, &s) in own.iter().enumerate() {
            a[(r, c)] = nf.pure(opponent, o, s);
        }
        a[(r, own.len())] = -1.0;
    }
    for c in 0..own.len() {
        a[(other.len(), c)] = 1.0;
    }
    b[other.len()] = 1.0;

    let solution = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let mut mix = vec![0.0; nf.strategy_count(player)];
    for (c, &s) in own.iter().enumerate() {
        let p = solution[c];
        if !p.is_finite() || p < -1e-9 {
            return None;
        }
        mix[s] = p.max(0.0);
    }
    let total: f64 = mix.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(mix.into_iter().map(|p| p / total).collect())
}
