use std::io::Read;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use baitshell_core::clock::SystemClock;
use baitshell_core::log::{LogWriter, Rotation};
use baitshell_core::net::{serve, BanConfig, BanState, CredentialStore, Gate, ServeConfig, TransportMode};
use baitshell_core::policy::{load_policy, Policy};
use baitshell_core::shell::{CaptureStore, Fetcher, Honeypot, ShellConfig};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value = "127.0.0.1:2222")]
    bind: SocketAddr,
    /// `line` (plain text over TCP) or `ssh`.
    #[arg(long, default_value = "line")]
    transport: TransportMode,
    /// `gamepot`, `control`, or a policy file.
    #[arg(long)]
    policy: String,
    /// TOML file of accepted logins.
    #[arg(long)]
    credentials: PathBuf,
    /// NDJSON event log.
    #[arg(long)]
    log: PathBuf,
    /// Rotate the log once it would exceed this many bytes.
    #[arg(long)]
    rotate_bytes: Option<u64>,
    /// Rotated files to keep.
    #[arg(long, default_value_t = 5)]
    rotate_keep: usize,
    #[arg(long, default_value_t = 5)]
    max_failures: usize,
    /// Seconds over which failed logins are counted.
    #[arg(long, default_value_t = 60)]
    ban_window: u64,
    /// Seconds an address stays banned.
    #[arg(long, default_value_t = 600)]
    ban_duration: u64,
    /// Label stamped into every event; defaults to the policy name.
    #[arg(long)]
    instance: Option<String>,
    /// Shell emulation settings (hostname, users, files, limits).
    #[arg(long)]
    shell_config: Option<PathBuf>,
    /// Where fetched downloads are stored; defaults to the shell config's.
    #[arg(long)]
    capture_dir: Option<PathBuf>,
    /// Fetch URLs the attacker downloads instead of faking them.
    #[arg(long)]
    online: bool,
    /// Policy seed, overriding the policy file.
    #[arg(long)]
    seed: Option<u64>,
    /// SSH host key file; created if missing.
    #[arg(long)]
    host_key: Option<PathBuf>,
    /// Stop after this many seconds instead of waiting for Ctrl-C.
    #[arg(long)]
    duration: Option<u64>,
}

struct HttpFetcher {
    agent: ureq::Agent,
    limit: u64,
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String> {
        let resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let mut body = Vec::new();
        resp.into_reader().take(self.limit).read_to_end(&mut body).map_err(|e| e.to_string())?;
        Ok(body)
    }
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let mut policy_cfg = load_policy(&a.policy)?;
    if let Some(seed) = a.seed {
        policy_cfg = policy_cfg.with_seed(seed);
    }
    let policy = Policy::load(policy_cfg)?;
    let creds = CredentialStore::from_file(&a.credentials)
        .with_context(|| format!("loading {}", a.credentials.display()))?;
    let shell = match &a.shell_config {
        Some(p) => ShellConfig::from_file(p)?,
        None => ShellConfig::default(),
    };
    let capture_dir = a.capture_dir.clone().unwrap_or_else(|| shell.capture_dir.clone());
    let rotation = a.rotate_bytes.map(|max_bytes| Rotation { max_bytes, keep: a.rotate_keep });
    let writer = Arc::new(
        LogWriter::open_with(&a.log, rotation).with_context(|| format!("opening {}", a.log.display()))?,
    );
    let mut builder = Honeypot::builder(policy, writer.clone(), Arc::new(SystemClock)).config(shell);
    if let Some(label) = &a.instance {
        builder = builder.instance(label);
    }
    if a.online {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build();
        let fetcher = HttpFetcher { agent, limit: 64 << 20 };
        builder = builder.capture(CaptureStore::online(&capture_dir, Arc::new(fetcher))?);
    }
    let hp = builder.build()?;
    let instance = hp.instance().to_string();
    let bans = BanState::new(BanConfig {
        max_failures: a.max_failures,
        window: Duration::from_secs(a.ban_window),
        ban: Duration::from_secs(a.ban_duration),
    });
    let mut cfg = ServeConfig::new(a.bind, hp, Gate::new(creds, bans));
    cfg.transport = a.transport;
    cfg.host_key = a.host_key.clone();
    let handle = serve(cfg)?;
    println!("{instance} listening on {}", handle.local_addr());

    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)).context("installing Ctrl-C handler")?;
    let deadline = a.duration.map(|s| Instant::now() + Duration::from_secs(s));
    while !stop.load(Ordering::SeqCst) && handle.is_running() && deadline.is_none_or(|d| Instant::now() < d) {
        std::thread::sleep(Duration::from_millis(100));
    }
    log::info!("shutting down {instance}");
    handle.shutdown()?;
    writer.close()?;
    Ok(())
}
