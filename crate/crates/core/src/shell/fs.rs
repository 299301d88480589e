use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, TimeZone, Utc};

pub const DEFAULT_USERS: [&str; 2] = ["jmiller", "asmith"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub owner: String,
    pub mode: u32,
    pub modified: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Directory(BTreeMap<String, FakeFsNode>),
    File(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FakeFsNode {
    pub name: String,
    pub kind: NodeKind,
    pub meta: Meta,
}

impl FakeFsNode {
    pub fn dir(name: &str, owner: &str, mode: u32, modified: DateTime<Utc>) -> Self {
        Self {
            name: name.to_string(),
            kind: NodeKind::Directory(BTreeMap::new()),
            meta: Meta { owner: owner.to_string(), mode, modified },
        }
    }

    pub fn file(name: &str, content: &[u8], owner: &str, mode: u32, modified: DateTime<Utc>) -> Self {
        Self {
            name: name.to_string(),
            kind: NodeKind::File(content.to_vec()),
            meta: Meta { owner: owner.to_string(), mode, modified },
        }
    }

    pub fn is_dir(&self) -> bool {
        matches!(self.kind, NodeKind::Directory(_))
    }

    pub fn children(&self) -> Option<&BTreeMap<String, FakeFsNode>> {
        match &self.kind {
            NodeKind::Directory(c) => Some(c),
            NodeKind::File(_) => None,
        }
    }

    fn children_mut(&mut self) -> Option<&mut BTreeMap<String, FakeFsNode>> {
        match &mut self.kind {
            NodeKind::Directory(c) => Some(c),
            NodeKind::File(_) => None,
        }
    }

    pub fn content(&self) -> Option<&[u8]> {
        match &self.kind {
            NodeKind::File(c) => Some(c),
            NodeKind::Directory(_) => None,
        }
    }

    pub fn size(&self) -> usize {
        match &self.kind {
            NodeKind::File(c) => c.len(),
            NodeKind::Directory(_) => 4096,
        }
    }

    /// `drwxr-xr-x` style mode string.
    pub fn permissions(&self) -> String {
        let mut s = String::with_capacity(10);
        s.push(if self.is_dir() { 'd' } else { '-' });
        for shift in [6, 3, 0] {
            let bits = (self.meta.mode >> shift) & 0o7;
            s.push(if bits & 4 != 0 { 'r' } else { '-' });
            s.push(if bits & 2 != 0 { 'w' } else { '-' });
            s.push(if bits & 1 != 0 { 'x' } else { '-' });
        }
        if self.meta.mode & 0o1000 != 0 {
            s.pop();
            s.push('t');
        }
        s
    }

    fn allows(&self, user: &str, bit: u32) -> bool {
        user == "root" || (self.meta.owner == user && self.meta.mode & (bit << 6) != 0) || self.meta.mode & bit != 0
    }

    pub fn can_read(&self, user: &str) -> bool {
        self.allows(user, 0o4)
    }

    pub fn can_write(&self, user: &str) -> bool {
        self.allows(user, 0o2)
    }

    pub fn can_exec(&self, user: &str) -> bool {
        self.allows(user, 0o1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsError {
    NotFound,
    NotADirectory,
    IsADirectory,
    PermissionDenied,
    Exists,
    NotEmpty,
    InvalidPath,
}

impl fmt::Display for FsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FsError::NotFound => "No such file or directory",
            FsError::NotADirectory => "Not a directory",
            FsError::IsADirectory => "Is a directory",
            FsError::PermissionDenied => "Permission denied",
            FsError::Exists => "File exists",
            FsError::NotEmpty => "Directory not empty",
            FsError::InvalidPath => "Invalid argument",
        })
    }
}

impl std::error::Error for FsError {}

/// Normalized absolute path as components; `[]` is `/`.
pub type FsPath = Vec<String>;

pub fn resolve(cwd: &str, home: &str, path: &str) -> FsPath {
    let expanded = if path == "~" {
        home.to_string()
    } else if let Some(rest) = path.strip_prefix("~/") {
        format!("{home}/{rest}")
    } else if path.starts_with('/') {
        path.to_string()
    } else {
        format!("{cwd}/{path}")
    };
    let mut out: FsPath = Vec::new();
    for part in expanded.split('/') {
        match part {
            "" | "." => {}
            ".." => {
                out.pop();
            }
            p => out.push(p.to_string()),
        }
    }
    out
}

pub fn display_path(path: &[String]) -> String {
    format!("/{}", path.join("/"))
}

/// In-memory filesystem with owner-based permissions. Cloned per session
/// from a shared template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FakeFs {
    root: FakeFsNode,
}

impl FakeFs {
    pub fn new(root: FakeFsNode) -> Self {
        assert!(root.is_dir(), "filesystem root must be a directory");
        Self { root }
    }

    pub fn root(&self) -> &FakeFsNode {
        &self.root
    }

    pub fn get(&self, path: &[String]) -> Option<&FakeFsNode> {
        let mut node = &self.root;
        for part in path {
            node = node.children()?.get(part)?;
        }
        Some(node)
    }

    fn get_mut(&mut self, path: &[String]) -> Option<&mut FakeFsNode> {
        let mut node = &mut self.root;
        for part in path {
            node = node.children_mut()?.get_mut(part)?;
        }
        Some(node)
    }

    /// Looks up `path` as `user`, requiring search permission on every
    /// ancestor directory.
    pub fn lookup(&self, path: &[String], user: &str) -> Result<&FakeFsNode, FsError> {
        let mut node = &self.root;
        for part in path {
            let children = node.children().ok_or(FsError::NotADirectory)?;
            if !node.can_exec(user) {
                return Err(FsError::PermissionDenied);
            }
            node = children.get(part).ok_or(FsError::NotFound)?;
        }
        Ok(node)
    }

    pub fn list(&self, path: &[String], user: &str) -> Result<Vec<&FakeFsNode>, FsError> {
        let node = self.lookup(path, user)?;
        match node.children() {
            Some(children) if node.can_read(user) => Ok(children.values().collect()),
            Some(_) => Err(FsError::PermissionDenied),
            None => Ok(vec![node]),
        }
    }

    pub fn read(&self, path: &[String], user: &str) -> Result<&[u8], FsError> {
        let node = self.lookup(path, user)?;
        match node.content() {
            Some(_) if !node.can_read(user) => Err(FsError::PermissionDenied),
            Some(c) => Ok(c),
            None => Err(FsError::IsADirectory),
        }
    }

    fn writable_parent(&mut self, path: &[String], user: &str) -> Result<&mut FakeFsNode, FsError> {
        let (_, parent) = path.split_last().ok_or(FsError::InvalidPath)?;
        let p = self.lookup(parent, user)?;
        if !p.is_dir() {
            return Err(FsError::NotADirectory);
        }
        if !p.can_write(user) || !p.can_exec(user) {
            return Err(FsError::PermissionDenied);
        }
        Ok(self.get_mut(parent).expect("looked up above"))
    }

    pub fn mkdir(&mut self, path: &[String], user: &str, parents: bool, now: DateTime<Utc>) -> Result<(), FsError> {
        if parents {
            for depth in 1..=path.len() {
                match self.lookup(&path[..depth], user) {
                    Ok(n) if n.is_dir() => continue,
                    Ok(_) => return Err(FsError::NotADirectory),
                    Err(FsError::NotFound) => self.mkdir(&path[..depth], user, false, now)?,
                    Err(e) => return Err(e),
                }
            }
            return Ok(());
        }
        let name = path.last().ok_or(FsError::Exists)?.clone();
        let parent = self.writable_parent(path, user)?;
        let children = parent.children_mut().expect("parent is a directory");
        if children.contains_key(&name) {
            return Err(FsError::Exists);
        }
        children.insert(name.clone(), FakeFsNode::dir(&name, user, 0o775, now));
        parent.meta.modified = now;
        Ok(())
    }

    /// Creates or replaces (or with `append`, extends) a regular file.
    pub fn write_file(
        &mut self,
        path: &[String],
        content: &[u8],
        append: bool,
        user: &str,
        now: DateTime<Utc>,
    ) -> Result<(), FsError> {
        if let Ok(existing) = self.lookup(path, user) {
            if existing.is_dir() {
                return Err(FsError::IsADirectory);
            }
            if !existing.can_write(user) {
                return Err(FsError::PermissionDenied);
            }
            let node = self.get_mut(path).expect("exists");
            if let NodeKind::File(data) = &mut node.kind {
                if !append {
                    data.clear();
                }
                data.extend_from_slice(content);
            }
            node.meta.modified = now;
            return Ok(());
        }
        let name = path.last().ok_or(FsError::IsADirectory)?.clone();
        let parent = self.writable_parent(path, user)?;
        parent
            .children_mut()
            .expect("parent is a directory")
            .insert(name.clone(), FakeFsNode::file(&name, content, user, 0o664, now));
        parent.meta.modified = now;
        Ok(())
    }

    pub fn touch(&mut self, path: &[String], user: &str, now: DateTime<Utc>) -> Result<(), FsError> {
        match self.lookup(path, user) {
            Ok(node) if !node.can_write(user) => Err(FsError::PermissionDenied),
            Ok(_) => {
                self.get_mut(path).expect("exists").meta.modified = now;
                Ok(())
            }
            Err(FsError::NotFound) => self.write_file(path, b"", false, user, now),
            Err(e) => Err(e),
        }
    }

    pub fn chmod(&mut self, path: &[String], mode: u32, user: &str, now: DateTime<Utc>) -> Result<(), FsError> {
        let node = self.lookup(path, user)?;
        if user != "root" && node.meta.owner != user {
            return Err(FsError::PermissionDenied);
        }
        let node = self.get_mut(path).expect("exists");
        node.meta.mode = mode & 0o7777;
        node.meta.modified = now;
        Ok(())
    }

    /// Removes `path`. Recursive removal deletes whatever the permission
    /// model allows and reports every entry it could not remove, the way
    /// `rm -r` keeps going after failures.
    pub fn remove(&mut self, path: &[String], user: &str, recursive: bool) -> Vec<(FsPath, FsError)> {
        let node = match self.lookup(path, user) {
            Ok(n) => n,
            Err(e) => return vec![(path.to_vec(), e)],
        };
        if path.is_empty() {
            return self.root_children().into_iter().map(|p| (p, FsError::PermissionDenied)).collect();
        }
        if node.is_dir() && !recursive {
            return vec![(path.to_vec(), FsError::IsADirectory)];
        }
        let mut failures = Vec::new();
        if node.is_dir() {
            let names: Vec<String> = node.children().expect("dir").keys().cloned().collect();
            if !names.is_empty() && !(node.can_write(user) && node.can_exec(user) && node.can_read(user)) {
                return vec![(path.to_vec(), FsError::PermissionDenied)];
            }
            for name in names {
                let mut child = path.to_vec();
                child.push(name);
                failures.extend(self.remove(&child, user, true));
            }
            if !failures.is_empty() {
                return failures;
            }
        }
        match self.writable_parent(path, user) {
            Ok(parent) => {
                parent.children_mut().expect("dir").remove(path.last().expect("non-empty"));
            }
            Err(e) => failures.push((path.to_vec(), e)),
        }
        failures
    }

    fn root_children(&self) -> Vec<FsPath> {
        self.root.children().expect("root is a directory").keys().map(|k| vec![k.clone()]).collect()
    }

    /// Every path in the tree, depth first, `/` excluded.
    pub fn paths(&self) -> Vec<String> {
        fn walk(node: &FakeFsNode, prefix: &str, out: &mut Vec<String>) {
            if let Some(children) = node.children() {
                for (name, child) in children {
                    let p = format!("{prefix}/{name}");
                    out.push(p.clone());
                    walk(child, &p, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, "", &mut out);
        out
    }

    pub fn file_count_under(&self, path: &[String]) -> usize {
        fn count(node: &FakeFsNode) -> usize {
            match node.children() {
                Some(c) => c.values().map(count).sum(),
                None => 1,
            }
        }
        self.get(path).map_or(0, count)
    }

    /// Largest number of directories on any root-to-leaf path under `path`.
    pub fn dir_depth_under(&self, path: &[String]) -> usize {
        fn depth(node: &FakeFsNode) -> usize {
            match node.children() {
                Some(c) => 1 + c.values().map(depth).max().unwrap_or(0),
                None => 0,
            }
        }
        self.get(path).map_or(0, depth)
    }

    /// Places a node regardless of permissions, creating root-owned parent
    /// directories. Used to build templates.
    pub fn insert(&mut self, path: &[String], node: FakeFsNode) {
        let (name, parent) = path.split_last().expect("cannot replace the root");
        let mut cur = &mut self.root;
        for part in parent {
            let modified = cur.meta.modified;
            cur = cur
                .children_mut()
                .expect("template parent is a directory")
                .entry(part.clone())
                .or_insert_with(|| FakeFsNode::dir(part, "root", 0o755, modified));
        }
        let mut node = node;
        node.name = name.clone();
        cur.children_mut().expect("template parent is a directory").insert(name.clone(), node);
    }
}

fn template_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 11, 14, 9, 12, 0).unwrap()
}

fn p(path: &str) -> FsPath {
    resolve("/", "/", path)
}

const HOME_DIRS: &[&str] = &[
    "work/projects/inventory-api/src/handlers",
    "work/projects/inventory-api/tests",
    "work/projects/website/assets/css",
    "work/projects/website/assets/img",
    "work/reports/2023/q3",
    "work/reports/2023/q4",
    "work/archive",
    "private/photos/2022/holiday",
    "private/documents/taxes/2022",
    "private/documents/letters",
    "private/recipes/baking/bread",
];

const HOME_FILES: &[(&str, &str)] = &[
    (".bashrc", "# ~/.bashrc\n[ -z \"$PS1\" ] && return\nHISTCONTROL=ignoreboth\nalias ll='ls -alF'\n"),
    (".profile", "if [ -n \"$BASH_VERSION\" ]; then\n    . \"$HOME/.bashrc\"\nfi\n"),
    (".bash_history", "cd work/projects/inventory-api\ngit pull\npython3 -m pytest\nexit\n"),
    ("work/notes.txt", "standup moved to 9:30\nask ops about the staging certificate\n"),
    ("work/meeting-2023-10-12.md", "# Planning\n- migrate reports to the new template\n- review API pagination\n"),
    ("work/projects/inventory-api/README.md", "# inventory-api\nSmall internal service for stock levels.\n"),
    ("work/projects/inventory-api/requirements.txt", "flask==2.3.3\nsqlalchemy==2.0.21\npytest==7.4.2\n"),
    ("work/projects/inventory-api/src/app.py", "from flask import Flask\n\napp = Flask(__name__)\n"),
    ("work/projects/inventory-api/src/models.py", "class Item:\n    def __init__(self, sku, qty):\n        self.sku = sku\n        self.qty = qty\n"),
    ("work/projects/inventory-api/src/db.py", "DATABASE_URL = 'sqlite:///inventory.db'\n"),
    ("work/projects/inventory-api/src/handlers/items.py", "def list_items(db):\n    return db.query('items')\n"),
    ("work/projects/inventory-api/src/handlers/health.py", "def health():\n    return {'status': 'ok'}\n"),
    ("work/projects/inventory-api/tests/test_models.py", "def test_item():\n    assert True\n"),
    ("work/projects/website/index.html", "<!doctype html>\n<title>Team page</title>\n"),
    ("work/projects/website/assets/css/site.css", "body { font-family: sans-serif; }\n"),
    ("work/projects/website/assets/img/logo.svg", "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n"),
    ("work/reports/2023/q3/summary.txt", "Q3: shipments up 4%, returns flat.\n"),
    ("work/reports/2023/q4/summary.txt", "Q4 draft, numbers pending.\n"),
    ("work/reports/2023/q4/budget.csv", "item,amount\nlicenses,1200\ntravel,800\n"),
    ("work/archive/old-deploy.sh", "#!/bin/sh\necho deprecated\n"),
    ("private/todo.txt", "renew passport\ncall plumber\n"),
    ("private/photos/2022/holiday/beach-01.jpg", "\u{fffd}JFIF placeholder\n"),
    ("private/photos/2022/holiday/beach-02.jpg", "\u{fffd}JFIF placeholder\n"),
    ("private/documents/taxes/2022/return-draft.txt", "draft only, do not file\n"),
    ("private/documents/letters/landlord.txt", "Dear landlord,\nthe heating is broken again.\n"),
    ("private/recipes/baking/bread/sourdough.md", "500g flour, 350g water, 100g starter, 10g salt\n"),
];

const SYSTEM_FILES: &[(&str, &str, u32)] = &[
    ("/etc/hostname", "srv-app01\n", 0o644),
    ("/etc/hosts", "127.0.0.1\tlocalhost\n127.0.1.1\tsrv-app01\n", 0o644),
    ("/etc/os-release", "PRETTY_NAME=\"Ubuntu 22.04.3 LTS\"\nNAME=\"Ubuntu\"\nVERSION_ID=\"22.04\"\nID=ubuntu\n", 0o644),
    ("/etc/issue", "Ubuntu 22.04.3 LTS \\n \\l\n", 0o644),
    ("/etc/shadow", "root:*:19000:0:99999:7:::\n", 0o640),
    ("/etc/sudoers", "root\tALL=(ALL:ALL) ALL\n", 0o440),
    ("/etc/crontab", "SHELL=/bin/sh\n17 *\t* * *\troot\tcd / && run-parts --report /etc/cron.hourly\n", 0o644),
    ("/etc/resolv.conf", "nameserver 127.0.0.53\n", 0o644),
    ("/proc/cpuinfo", "processor\t: 0\nmodel name\t: Intel(R) Xeon(R) CPU E5-2676 v3 @ 2.40GHz\ncpu cores\t: 1\n", 0o444),
    ("/proc/meminfo", "MemTotal:        1006932 kB\nMemFree:          402312 kB\n", 0o444),
    ("/var/log/syslog", "", 0o640),
    ("/var/log/auth.log", "", 0o640),
    ("/var/log/dpkg.log", "", 0o644),
];

const BINARIES: &[&str] = &[
    "/bin/bash", "/bin/cat", "/bin/chmod", "/bin/cp", "/bin/echo", "/bin/ls", "/bin/mkdir", "/bin/mv", "/bin/ps",
    "/bin/pwd", "/bin/rm", "/bin/sh", "/bin/touch", "/bin/uname", "/usr/bin/apt", "/usr/bin/curl", "/usr/bin/id",
    "/usr/bin/python3", "/usr/bin/sudo", "/usr/bin/wget", "/usr/bin/whoami", "/usr/sbin/ip", "/usr/sbin/ifconfig",
];

pub fn build_default_fs() -> FakeFs {
    build_fs(&DEFAULT_USERS)
}

/// Template filesystem with a populated home directory per user.
pub fn build_fs(users: &[&str]) -> FakeFs {
    let t = template_time();
    let mut fs = FakeFs::new(FakeFsNode::dir("", "root", 0o755, t));
    for dir in ["/dev", "/etc", "/home", "/opt", "/proc", "/srv", "/usr/lib", "/usr/share", "/var/tmp", "/var/www"] {
        fs.insert(&p(dir), FakeFsNode::dir("", "root", 0o755, t));
    }
    fs.insert(&p("/root"), FakeFsNode::dir("", "root", 0o700, t));
    fs.insert(&p("/tmp"), FakeFsNode::dir("", "root", 0o1777, t));
    fs.insert(&p("/root/.bashrc"), FakeFsNode::file("", b"# root\n", "root", 0o644, t));
    fs.insert(&p("/dev/null"), FakeFsNode::file("", b"", "root", 0o666, t));
    for (path, content, mode) in SYSTEM_FILES {
        fs.insert(&p(path), FakeFsNode::file("", content.as_bytes(), "root", *mode, t));
    }
    for bin in BINARIES {
        fs.insert(&p(bin), FakeFsNode::file("", b"\x7fELF", "root", 0o755, t));
    }

    let mut passwd = String::from("root:x:0:0:root:/root:/bin/bash\n");
    passwd.push_str("daemon:x:1:1:daemon:/usr/sbin:/usr/sbin/nologin\n");
    passwd.push_str("www-data:x:33:33:www-data:/var/www:/usr/sbin/nologin\n");
    for (i, user) in users.iter().enumerate() {
        let uid = 1000 + i;
        passwd.push_str(&format!("{user}:x:{uid}:{uid}:,,,:/home/{user}:/bin/bash\n"));
        let home = format!("/home/{user}");
        fs.insert(&p(&home), FakeFsNode::dir("", user, 0o755, t));
        for dir in HOME_DIRS {
            let mode = if dir.starts_with("private") { 0o700 } else { 0o755 };
            let mut path = p(&home);
            for part in dir.split('/') {
                path.push(part.to_string());
                if fs.get(&path).is_none() {
                    fs.insert(&path, FakeFsNode::dir("", user, mode, t));
                }
            }
        }
        for (rel, content) in HOME_FILES {
            let mode = if rel.starts_with("private") { 0o600 } else { 0o644 };
            fs.insert(&p(&format!("{home}/{rel}")), FakeFsNode::file("", content.as_bytes(), user, mode, t));
        }
    }
    fs.insert(&p("/etc/passwd"), FakeFsNode::file("", passwd.as_bytes(), "root", 0o644, t));
    fs
}
