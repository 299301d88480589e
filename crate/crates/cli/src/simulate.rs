use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use baitshell_core::clock::ManualClock;
use baitshell_core::log::LogWriter;
use baitshell_core::policy::{load_policy, Policy};
use baitshell_core::shell::{Honeypot, ShellConfig};
use baitshell_core::sim::{
    builtin_personas, persona_by_name, run_campaign, CampaignSpec, Endpoint, InProcessEndpoint, TcpEndpoint, ThinkTime,
};
use chrono::{DateTime, Utc};

use crate::key_value;

#[derive(clap::Args)]
pub struct Args {
    /// Sessions per instance, e.g. `--count gamepot=14`. Repeatable.
    #[arg(long = "count", value_parser = key_value, required = true)]
    counts: Vec<(String, String)>,
    /// Policy for an in-process instance, `LABEL=NAME|FILE`. Defaults to the
    /// builtin profile named like the label.
    #[arg(long = "policy", value_parser = key_value)]
    policies: Vec<(String, String)>,
    /// Send an instance's sessions to a running `serve` at `LABEL=HOST:PORT`
    /// instead of an in-process honeypot.
    #[arg(long = "target", value_parser = key_value)]
    targets: Vec<(String, String)>,
    /// Login used against every instance.
    #[arg(long, default_value = "jmiller")]
    username: String,
    /// Password for `--target` instances.
    #[arg(long)]
    password: Option<String>,
    /// Restrict the persona mix. Repeatable; defaults to all personas.
    #[arg(long = "persona")]
    personas: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory receiving `<label>.ndjson` for each in-process instance.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Start of simulated time for in-process instances (RFC 3339).
    #[arg(long, default_value = "2023-11-01T00:00:00Z")]
    start: DateTime<Utc>,
    /// Seconds of think time between lines, `MIN..MAX`.
    #[arg(long, default_value = "1..10")]
    think: String,
    /// Shell emulation settings for in-process instances.
    #[arg(long)]
    shell_config: Option<PathBuf>,
    /// Also write the attacker-side transcripts as JSON.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

fn think_range(s: &str) -> anyhow::Result<ThinkTime> {
    let (lo, hi) = s.split_once("..").context("--think expects MIN..MAX")?;
    let secs = |v: &str| -> anyhow::Result<Duration> {
        let x: f64 = v.trim().parse().with_context(|| format!("bad seconds {v:?}"))?;
        if !(x >= 0.0 && x.is_finite()) {
            bail!("think time must be non-negative");
        }
        Ok(Duration::from_secs_f64(x))
    };
    let (min, max) = (secs(lo)?, secs(hi)?);
    if min > max {
        bail!("--think minimum exceeds maximum");
    }
    Ok(ThinkTime { min, max })
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let mut counts = BTreeMap::new();
    for (label, n) in &a.counts {
        let n: usize = n.parse().with_context(|| format!("bad count for {label}"))?;
        if counts.insert(label.clone(), n).is_some() {
            bail!("instance {label} given twice");
        }
    }
    let policies: BTreeMap<_, _> = a.policies.iter().cloned().collect();
    let targets: BTreeMap<_, _> = a.targets.iter().cloned().collect();
    for label in policies.keys().chain(targets.keys()) {
        if !counts.contains_key(label) {
            bail!("no --count for instance {label}");
        }
    }
    let personas = if a.personas.is_empty() {
        builtin_personas()
    } else {
        a.personas
            .iter()
            .map(|n| persona_by_name(n).with_context(|| format!("unknown persona {n:?}")))
            .collect::<anyhow::Result<_>>()?
    };
    let shell = match &a.shell_config {
        Some(p) => ShellConfig::from_file(p)?,
        None => ShellConfig::default(),
    };

    let mut endpoints: BTreeMap<String, Box<dyn Endpoint>> = BTreeMap::new();
    let mut logs = Vec::new();
    for (i, label) in counts.keys().enumerate() {
        if let Some(addr) = targets.get(label) {
            let addr: SocketAddr = addr.parse().with_context(|| format!("bad address for {label}"))?;
            let password = a.password.as_deref().context("--target needs --password")?;
            endpoints.insert(label.clone(), Box::new(TcpEndpoint::new(label, addr, &a.username, password)));
            continue;
        }
        let name = policies.get(label).map_or(label.as_str(), String::as_str);
        let mut cfg = load_policy(name).with_context(|| format!("policy for {label}"))?;
        if cfg.seed.is_none() {
            cfg = cfg.with_seed(a.seed.wrapping_add(i as u64));
        }
        let path = a.out_dir.join(format!("{label}.ndjson"));
        if path.exists() {
            std::fs::remove_file(&path).with_context(|| format!("replacing {}", path.display()))?;
        }
        let writer = Arc::new(LogWriter::open(&path).with_context(|| format!("opening {}", path.display()))?);
        let hp = Honeypot::builder(Policy::load(cfg)?, writer, Arc::new(ManualClock::new(a.start)))
            .config(shell.clone())
            .instance(label)
            .id_seed(a.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
            .build()?;
        endpoints.insert(label.clone(), Box::new(InProcessEndpoint::new(hp, &a.username)));
        logs.push(path);
    }

    let mut spec = CampaignSpec::new(counts, personas);
    spec.think = think_range(&a.think)?;
    let result = run_campaign(&spec, &mut endpoints, a.seed)?;
    drop(endpoints);

    if let Some(path) = &a.transcripts {
        let text = serde_json::to_string_pretty(&result)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    for (label, ts) in &result.transcripts {
        println!("{label}: {} sessions", ts.len());
    }
    for p in logs {
        println!("wrote {}", p.display());
    }
    Ok(())
}
