use std::path::PathBuf;

use anyhow::{bail, Context};
use baitshell_core::game::GameSpec;
use baitshell_core::solver::{
    fixture, qre_path_csv, solve, BehavioralProfile, EliminationTrace, QreOptions, StrategyProfile, VerificationReport,
    DEFAULT_EPSILON,
};
use serde::Serialize;

#[derive(Clone, Copy, clap::ValueEnum)]
enum Builtin {
    /// The reconstructed attacker/defender deception game.
    Paper,
}

#[derive(clap::Args)]
pub struct Args {
    /// Game file in the GameSpec JSON format.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    game: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    /// Largest rationality parameter on the logit path.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Number of points on the geometric lambda schedule.
    #[arg(long)]
    steps: Option<usize>,
    /// Fixed-point tolerance at each lambda.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Largest unilateral gain accepted by the equilibrium check.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Write the traced path as CSV.
    #[arg(long)]
    path_csv: Option<PathBuf>,
    /// Write the game being solved as JSON.
    #[arg(long)]
    emit_game: Option<PathBuf>,
}

#[derive(Serialize)]
struct Output<'a> {
    strategies: &'a [Vec<String>; 2],
    elimination: &'a EliminationTrace,
    surviving: &'a [Vec<String>; 2],
    path: PathSummary,
    equilibrium: &'a StrategyProfile,
    behavior: &'a BehavioralProfile,
    verification: &'a VerificationReport,
}

#[derive(Serialize)]
struct PathSummary {
    points: usize,
    lambda_max: f64,
    max_residual: f64,
}

fn options(a: &Args) -> QreOptions {
    let mut opts = QreOptions::default();
    if a.lambda_max.is_some() || a.steps.is_some() {
        let max = a.lambda_max.unwrap_or(*opts.lambdas.last().expect("default schedule is non-empty"));
        let steps = a.steps.unwrap_or(opts.lambdas.len());
        opts = opts.with_lambda_max(max, steps);
    }
    if let Some(t) = a.tol {
        opts.tol = t;
    }
    if let Some(d) = a.damping {
        opts.damping = d;
    }
    if let Some(m) = a.max_iter {
        opts.max_iter = m;
    }
    opts
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let game = match (&a.game, a.builtin) {
        (_, Some(Builtin::Paper)) => fixture::builtin_game(),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            GameSpec::from_json(&text).with_context(|| format!("loading {}", path.display()))?
        }
        (None, None) => bail!("give a game file or --builtin"),
    };
    if let Some(path) = &a.emit_game {
        std::fs::write(path, game.to_json_pretty()).with_context(|| format!("writing {}", path.display()))?;
    }
    if !(a.epsilon > 0.0) {
        bail!("--epsilon must be positive");
    }
    let opts = options(&a);
    let sol = solve(&game, &opts, a.epsilon)?;
    if let Some(path) = &a.path_csv {
        std::fs::write(path, qre_path_csv(&sol)).with_context(|| format!("writing {}", path.display()))?;
    }
    let out = Output {
        strategies: &sol.strategies,
        elimination: &sol.elimination,
        surviving: &sol.surviving,
        path: PathSummary {
            points: sol.path.len(),
            lambda_max: sol.path.last().map_or(0.0, |p| p.lambda),
            max_residual: sol.path.iter().map(|p| p.residual).fold(0.0, f64::max),
        },
        equilibrium: &sol.equilibrium,
        behavior: &sol.behavior,
        verification: &sol.verification,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    if !sol.verification.passed {
        bail!("equilibrium check failed: best deviation gains {:e}", sol.verification.max_gain());
    }
    Ok(())
}
