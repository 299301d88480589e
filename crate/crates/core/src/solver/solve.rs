use serde::{Deserialize, Serialize};

use super::nash::project_limit;
use super::{
    iterated_elimination, logit_qre_trace, to_normal_form, verify_equilibrium, BehavioralProfile, EliminationTrace,
    NormalForm, QreOptions, QrePoint, SolverError, StrategyProfile, VerificationReport,
};
use crate::game::GameSpec;

/// Everything `solve` reports for one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub strategies: [Vec<String>; 2],
    pub elimination: EliminationTrace,
    pub surviving: [Vec<String>; 2],
    pub path: Vec<QrePoint>,
    pub equilibrium: StrategyProfile,
    pub behavior: BehavioralProfile,
    pub verification: VerificationReport,
}

pub fn solve(game: &GameSpec, opts: &QreOptions, epsilon: f64) -> Result<Solution, SolverError> {
    let nf = to_normal_form(game)?;
    solve_normal_form(&nf, opts, epsilon)
}

pub fn solve_normal_form(nf: &NormalForm, opts: &QreOptions, epsilon: f64) -> Result<Solution, SolverError> {
    let (reduced, elimination) = iterated_elimination(nf);
    let path = logit_qre_trace(nf, opts)?;
    let end = path.last().expect("validated schedule is non-empty");
    let equilibrium = project_limit(nf, end, opts, epsilon)?;
    let verification = verify_equilibrium(nf, &equilibrium, epsilon);
    Ok(Solution {
        strategies: [nf.agents[0].labels.clone(), nf.agents[1].labels.clone()],
        elimination,
        surviving: [reduced.agents[0].labels.clone(), reduced.agents[1].labels.clone()],
        behavior: equilibrium.behavioral(nf),
        path,
        equilibrium,
        verification,
    })
}

/// Columns: `lambda,residual`, then one column per pure strategy, attacker
/// strategies prefixed `A:` and defender strategies `D:`.
pub fn qre_path_csv(solution: &Solution) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda".to_string(), "residual".to_string()];
    header.extend(solution.strategies[0].iter().map(|s| format!("A:{s}")));
    header.extend(solution.strategies[1].iter().map(|s| format!("D:{s}")));
    w.write_record(&header).expect("csv to memory");
    for p in &solution.path {
        let mut rec = vec![p.lambda.to_string(), p.residual.to_string()];
        rec.extend(p.profile.attacker.iter().chain(&p.profile.defender).map(f64::to_string));
        w.write_record(&rec).expect("csv to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}
