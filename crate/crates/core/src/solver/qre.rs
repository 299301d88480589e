//! Logit quantal response equilibria traced over increasing precision.
//!
//! At precision `λ` every agent mixes with probabilities proportional to
//! `exp(λ · expected payoff)` against the others. The branch starting at the
//! uniform profile is followed by predictor-corrector continuation in
//! `(log σ, λ)` with arc-length steps, which keeps it on the same branch
//! through folds. Scheduled points are pinned by Newton steps at fixed `λ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NormalForm, SolverError, StrategyProfile};

const PICARD_CAP: usize = 200;
const PIN_ITERS: usize = 50;
const CORRECTOR_ITERS: usize = 8;
const CORRECTOR_TOL: f64 = 1e-12;
const INITIAL_STEP: f64 = 0.05;
const MIN_STEP: f64 = 1e-12;
/// Step cap per unit of `1 + λ`.
const MAX_STEP: f64 = 0.5;
const MAX_STEPS: usize = 200_000;
/// Largest corrector move, relative to the step length.
const MAX_CORRECTION: f64 = 0.5;
/// Smallest cosine between consecutive tangents.
const MIN_COS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QreOptions {
    /// Strictly increasing, non-negative precisions.
    pub lambdas: Vec<f64>,
    /// Relaxation of the logit-response iteration, in (0, 1].
    pub damping: f64,
    /// Fixed-point residual accepted at each point.
    pub tol: f64,
    /// Iteration budget per point.
    pub max_iter: usize,
}

impl Default for QreOptions {
    fn default() -> Self {
        Self { lambdas: geometric_schedule(0.1, 100.0, 60), damping: 0.5, tol: 1e-10, max_iter: 10_000 }
    }
}

impl QreOptions {
    pub fn with_lambda_max(mut self, lambda_max: f64, steps: usize) -> Self {
        let lo = 0.1_f64.min(lambda_max);
        self.lambdas = geometric_schedule(lo, lambda_max, steps);
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.lambdas.is_empty() {
            return Err(SolverError::Options("empty lambda schedule".into()));
        }
        if self.lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(SolverError::Options("lambdas must be finite and non-negative".into()));
        }
        if self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SolverError::Options("lambda schedule must be strictly ascending".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::Options(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::Options("tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::Options("iteration budget must be positive".into()));
        }
        Ok(())
    }
}

/// `steps` points from `lo` to `hi`, evenly spaced in log scale.
pub fn geometric_schedule(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let ratio = (hi / lo).ln() / (steps - 1) as f64;
            let mut out: Vec<f64> = (0..steps).map(|i| lo * (ratio * i as f64).exp()).collect();
            out[steps - 1] = hi;
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrePoint {
    pub lambda: f64,
    pub profile: StrategyProfile,
    pub residual: f64,
}

fn softmax(values: &[f64], lambda: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|v| (lambda * (v - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn log_softmax(values: &[f64], lambda: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = values.iter().map(|v| (lambda * (v - max)).exp()).sum::<f64>().ln();
    values.iter().map(|v| lambda * (v - max) - lse).collect()
}

/// Each agent's logit response to the other's current mixture.
pub fn logit_response(nf: &NormalForm, profile: &StrategyProfile, lambda: f64) -> StrategyProfile {
    StrategyProfile {
        attacker: softmax(&nf.strategy_values(0, &profile.defender), lambda),
        defender: softmax(&nf.strategy_values(1, &profile.attacker), lambda),
    }
}

/// Largest absolute gap between a profile and its logit response.
pub fn logit_residual(nf: &NormalForm, profile: &StrategyProfile, lambda: f64) -> f64 {
    let response = logit_response(nf, profile, lambda);
    (0..2)
        .flat_map(|p| profile.get(p).iter().zip(response.get(p)).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// Newton residual in log coordinates: `y − logsoftmax(λ·u(exp(y_other)))`.
fn log_residual(nf: &NormalForm, y: &[Vec<f64>; 2], lambda: f64) -> Vec<f64> {
    let sigma = [
        y[0].iter().map(|v| v.exp()).collect::<Vec<_>>(),
        y[1].iter().map(|v| v.exp()).collect::<Vec<_>>(),
    ];
    let mut out = Vec::with_capacity(y[0].len() + y[1].len());
    for p in 0..2 {
        let target = log_softmax(&nf.strategy_values(p, &sigma[1 - p]), lambda);
        out.extend(y[p].iter().zip(target).map(|(a, b)| a - b));
    }
    out
}

fn newton_step(nf: &NormalForm, y: &[Vec<f64>; 2], lambda: f64) -> Option<Vec<f64>> {
    let (m, n) = nf.shape();
    let dim = m + n;
    let sigma = [
        y[0].iter().map(|v| v.exp()).collect::<Vec<_>>(),
        y[1].iter().map(|v| v.exp()).collect::<Vec<_>>(),
    ];
    let mut jac = DMatrix::<f64>::identity(dim, dim);
    for p in 0..2 {
        let own = nf.strategy_count(p);
        let other = nf.strategy_count(1 - p);
        let response = softmax(&nf.strategy_values(p, &sigma[1 - p]), lambda);
        let (row0, col0) = if p == 0 { (0, m) } else { (m, 0) };
        for t in 0..other {
            let mean: f64 = (0..own).map(|k| response[k] * nf.pure(p, k, t)).sum();
            for s in 0..own {
                jac[(row0 + s, col0 + t)] = -lambda * (nf.pure(p, s, t) - mean) * sigma[1 - p][t];
            }
        }
    }
    let g = DVector::from_vec(log_residual(nf, y, lambda));
    let delta = jac.lu().solve(&(-g))?;
    delta.iter().all(|d| d.is_finite()).then(|| delta.iter().copied().collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn to_profile(y: &[Vec<f64>; 2]) -> StrategyProfile {
    StrategyProfile {
        attacker: normalize(y[0].iter().map(|v| v.exp()).collect()),
        defender: normalize(y[1].iter().map(|v| v.exp()).collect()),
    }
}

fn to_logs(p: &StrategyProfile) -> [Vec<f64>; 2] {
    let log = |v: &[f64]| v.iter().map(|x| x.max(1e-300).ln()).collect::<Vec<_>>();
    [log(&p.attacker), log(&p.defender)]
}

/// Solves one point of the path. On failure returns the smallest residual seen.
fn solve_point(
    nf: &NormalForm,
    lambda: f64,
    start: &StrategyProfile,
    opts: &QreOptions,
) -> Result<(StrategyProfile, f64), f64> {
    let mut x = start.clone();
    let mut residual = logit_residual(nf, &x, lambda);
    let mut iters = 0;

    // damped logit response while it keeps contracting
    let picard_cap = opts.max_iter.min(PICARD_CAP);
    while residual > opts.tol && iters < picard_cap {
        let r = logit_response(nf, &x, lambda);
        let d = opts.damping;
        let next = StrategyProfile {
            attacker: normalize(x.attacker.iter().zip(&r.attacker).map(|(a, b)| (1.0 - d) * a + d * b).collect()),
            defender: normalize(x.defender.iter().zip(&r.defender).map(|(a, b)| (1.0 - d) * a + d * b).collect()),
        };
        let next_residual = logit_residual(nf, &next, lambda);
        iters += 1;
        if next_residual >= residual * 0.9 {
            if next_residual < residual {
                x = next;
                residual = next_residual;
            }
            break;
        }
        x = next;
        residual = next_residual;
    }

    let mut best = (x.clone(), residual);
    let mut y = to_logs(&x);
    let m = nf.strategy_count(0);
    while best.1 > opts.tol && iters < opts.max_iter {
        iters += 1;
        let Some(delta) = newton_step(nf, &y, lambda) else { break };
        let g0 = norm(&log_residual(nf, &y, lambda));
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-10 {
            let trial = [
                y[0].iter().zip(&delta[..m]).map(|(a, d)| a + step * d).collect::<Vec<_>>(),
                y[1].iter().zip(&delta[m..]).map(|(a, d)| a + step * d).collect::<Vec<_>>(),
            ];
            let g = norm(&log_residual(nf, &trial, lambda));
            if g.is_finite() && g < g0 * (1.0 - 1e-4 * step) {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        y = next;
        let p = to_profile(&y);
        let r = logit_residual(nf, &p, lambda);
        if r < best.1 {
            best = (p, r);
        }
    }

    if best.1 <= opts.tol {
        Ok(best)
    } else {
        Err(best.1)
    }
}

/// Jacobian of the log residual with respect to `(y, λ)`, one column per
/// log-probability followed by the `λ` column.
fn path_jacobian(nf: &NormalForm, y: &[f64], lambda: f64) -> DMatrix<f64> {
    let (m, n) = nf.shape();
    let dim = m + n;
    let sigma = [y[..m].iter().map(|v| v.exp()).collect::<Vec<_>>(), y[m..].iter().map(|v| v.exp()).collect::<Vec<_>>()];
    let mut jac = DMatrix::<f64>::zeros(dim, dim + 1);
    for i in 0..dim {
        jac[(i, i)] = 1.0;
    }
    for p in 0..2 {
        let own = nf.strategy_count(p);
        let other = nf.strategy_count(1 - p);
        let values = nf.strategy_values(p, &sigma[1 - p]);
        let response = softmax(&values, lambda);
        let mean_value: f64 = response.iter().zip(&values).map(|(r, v)| r * v).sum();
        let (row0, col0) = if p == 0 { (0, m) } else { (m, 0) };
        for t in 0..other {
            let mean: f64 = (0..own).map(|k| response[k] * nf.pure(p, k, t)).sum();
            for s in 0..own {
                jac[(row0 + s, col0 + t)] = -lambda * (nf.pure(p, s, t) - mean) * sigma[1 - p][t];
            }
        }
        for s in 0..own {
            jac[(row0 + s, dim)] = -(values[s] - mean_value);
        }
    }
    jac
}

fn split(nf: &NormalForm, y: &[f64]) -> [Vec<f64>; 2] {
    let m = nf.strategy_count(0);
    [y[..m].to_vec(), y[m..].to_vec()]
}

/// Unit tangent of the path at `(y, λ)`, oriented along `previous`.
fn tangent(nf: &NormalForm, y: &[f64], lambda: f64, previous: &DVector<f64>) -> Option<DVector<f64>> {
    let dim = y.len();
    let mut aug = DMatrix::<f64>::zeros(dim + 1, dim + 1);
    aug.rows_mut(0, dim).copy_from(&path_jacobian(nf, y, lambda));
    aug.row_mut(dim).copy_from(&previous.transpose());
    let mut rhs = DVector::<f64>::zeros(dim + 1);
    rhs[dim] = 1.0;
    let t = aug.lu().solve(&rhs)?;
    let len = t.norm();
    (len.is_finite() && len > 0.0).then(|| t / len)
}

/// Newton corrector for the predicted point `z`, holding the component of
/// `z` along `t` fixed. Returns the corrected point and the iterations used.
fn correct(nf: &NormalForm, mut z: DVector<f64>, t: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
    let dim = z.len() - 1;
    let anchor = t.dot(&z);
    for it in 1..=CORRECTOR_ITERS {
        let y: Vec<f64> = z.rows(0, dim).iter().copied().collect();
        let lambda = z[dim];
        let mut f = DVector::from_vec(log_residual(nf, &split(nf, &y), lambda));
        f = f.insert_row(dim, t.dot(&z) - anchor);
        let mut aug = DMatrix::<f64>::zeros(dim + 1, dim + 1);
        aug.rows_mut(0, dim).copy_from(&path_jacobian(nf, &y, lambda));
        aug.row_mut(dim).copy_from(&t.transpose());
        let delta = aug.lu().solve(&(-&f))?;
        if !delta.iter().all(|d| d.is_finite()) {
            return None;
        }
        z += &delta;
        if delta.norm() <= CORRECTOR_TOL * (1.0 + z.norm()) {
            let y: Vec<f64> = z.rows(0, dim).iter().copied().collect();
            let g = norm(&log_residual(nf, &split(nf, &y), z[dim]));
            return (g <= CORRECTOR_TOL.sqrt()).then_some((z, it));
        }
    }
    None
}

/// Walks the branch of logit equilibria that starts at the uniform profile
/// at `λ = 0`, parametrized by arc length so it can follow the branch around
/// folds where `λ` temporarily decreases.
struct Continuation<'a> {
    nf: &'a NormalForm,
    z: DVector<f64>,
    t: DVector<f64>,
    h: f64,
    steps: usize,
}

impl<'a> Continuation<'a> {
    fn new(nf: &'a NormalForm) -> Self {
        let dim = nf.strategy_count(0) + nf.strategy_count(1);
        let uniform = to_logs(&StrategyProfile::uniform(nf));
        let z = DVector::from_iterator(dim + 1, uniform[0].iter().chain(&uniform[1]).copied().chain([0.0]));
        let mut t = DVector::zeros(dim + 1);
        t[dim] = 1.0;
        Self { nf, z, t, h: INITIAL_STEP, steps: 0 }
    }

    fn lambda(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    fn y(&self) -> Vec<f64> {
        self.z.rows(0, self.z.len() - 1).iter().copied().collect()
    }

    /// One accepted step along the branch.
    fn step(&mut self) -> Result<(), f64> {
        let dim = self.z.len() - 1;
        let t = tangent(self.nf, &self.y(), self.lambda(), &self.t).ok_or(f64::INFINITY)?;
        loop {
            self.steps += 1;
            if self.h < MIN_STEP || self.steps > MAX_STEPS {
                return Err(norm(&log_residual(self.nf, &split(self.nf, &self.y()), self.lambda())));
            }
            let predicted = &self.z + &t * self.h;
            if let Some((z, iters)) = correct(self.nf, predicted.clone(), &t) {
                let y: Vec<f64> = z.rows(0, dim).iter().copied().collect();
                let turned = tangent(self.nf, &y, z[dim], &t).is_none_or(|next| next.dot(&t) < MIN_COS);
                if !turned && (&z - &predicted).norm() <= MAX_CORRECTION * self.h {
                    self.z = z;
                    self.t = t;
                    if iters <= 3 {
                        self.h = (self.h * 1.5).min(MAX_STEP * (1.0 + self.lambda().abs()));
                    }
                    return Ok(());
                }
            }
            self.h *= 0.5;
        }
    }
}

/// Newton at fixed `λ` from `y`, for pinning a scheduled point.
fn pin(nf: &NormalForm, y: [Vec<f64>; 2], lambda: f64, opts: &QreOptions) -> (StrategyProfile, f64) {
    let m = nf.strategy_count(0);
    let mut y = y;
    let mut best = {
        let p = to_profile(&y);
        let r = logit_residual(nf, &p, lambda);
        (p, r)
    };
    for _ in 0..opts.max_iter.min(PIN_ITERS) {
        if best.1 <= opts.tol {
            break;
        }
        let Some(delta) = newton_step(nf, &y, lambda) else { break };
        y = [
            y[0].iter().zip(&delta[..m]).map(|(a, d)| a + d).collect(),
            y[1].iter().zip(&delta[m..]).map(|(a, d)| a + d).collect(),
        ];
        let p = to_profile(&y);
        let r = logit_residual(nf, &p, lambda);
        if !(r < best.1) {
            break;
        }
        best = (p, r);
    }
    best
}

/// Traces the logit QRE branch that starts at the uniform profile at
/// `λ = 0`, reporting the first point of the branch at each scheduled `λ`.
pub fn logit_qre_trace(nf: &NormalForm, opts: &QreOptions) -> Result<Vec<QrePoint>, SolverError> {
    nf.validate()?;
    opts.validate()?;

    let mut path = Vec::with_capacity(opts.lambdas.len());
    let mut walk = Continuation::new(nf);
    for &lambda in &opts.lambdas {
        let mut before = (walk.lambda(), walk.y());
        while walk.lambda() < lambda {
            before = (walk.lambda(), walk.y());
            walk.step().map_err(|residual| SolverError::Convergence { lambda, residual })?;
        }
        let (l0, y0) = before;
        let y1 = walk.y();
        let w = if walk.lambda() > l0 { (lambda - l0) / (walk.lambda() - l0) } else { 1.0 };
        let guess: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a + w * (b - a)).collect();
        let (mut profile, mut residual) = pin(nf, split(nf, &guess), lambda, opts);
        if residual > opts.tol {
            if let Ok(better) = solve_point(nf, lambda, &profile, opts) {
                (profile, residual) = better;
            }
        }
        if residual > opts.tol {
            return Err(SolverError::Convergence { lambda, residual });
        }
        path.push(QrePoint { lambda, profile, residual });
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coordination() -> NormalForm {
        NormalForm::from_matrices(
            vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_precision_is_uniform() {
        let nf = NormalForm::from_matrices(
            vec![vec![5.0, 0.0, 1.0], vec![0.0, 3.0, 2.0]],
            vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]],
        )
        .unwrap();
        let opts = QreOptions { lambdas: vec![0.0], ..QreOptions::default() };
        let path = logit_qre_trace(&nf, &opts).unwrap();
        assert_eq!(path[0].profile.attacker, vec![0.5, 0.5]);
        for p in &path[0].profile.defender {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_coordination_stays_symmetric() {
        let opts = QreOptions { lambdas: vec![0.1, 0.3, 0.5], ..QreOptions::default() };
        for point in logit_qre_trace(&coordination(), &opts).unwrap() {
            assert!((point.profile.attacker[0] - 0.5).abs() < 1e-9);
            assert!((point.profile.defender[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn matching_pennies_at_high_precision() {
        let nf = NormalForm::from_matrices(
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap();
        let path = logit_qre_trace(&nf, &QreOptions::default()).unwrap();
        let last = path.last().unwrap();
        assert_eq!(last.lambda, 100.0);
        assert!(last.residual <= 1e-10);
        assert!((last.profile.attacker[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn options_are_checked() {
        let nf = coordination();
        let bad = |o: QreOptions| logit_qre_trace(&nf, &o).unwrap_err();
        assert!(matches!(bad(QreOptions { lambdas: vec![1.0, 0.5], ..Default::default() }), SolverError::Options(_)));
        assert!(matches!(bad(QreOptions { damping: 0.0, ..Default::default() }), SolverError::Options(_)));
        assert!(matches!(bad(QreOptions { tol: 0.0, ..Default::default() }), SolverError::Options(_)));
    }

    #[test]
    fn unreachable_tolerance_reports_residual() {
        let nf = NormalForm::from_matrices(
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let opts = QreOptions { lambdas: vec![50.0], max_iter: 1, tol: 1e-300, ..Default::default() };
        match logit_qre_trace(&nf, &opts) {
            Err(SolverError::Convergence { lambda, residual }) => {
                assert_eq!(lambda, 50.0);
                assert!(residual.is_finite());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn schedule_endpoints() {
        let s = geometric_schedule(0.1, 100.0, 60);
        assert_eq!(s.len(), 60);
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert_eq!(s[59], 100.0);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }
}
