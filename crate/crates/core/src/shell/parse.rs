//! Just enough shell grammar for attacker one-liners: quoting, `;`, `&&`,
//! `||`, `|`, `&` and output redirection. No expansion happens.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connector {
    Seq,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redirect {
    pub path: String,
    pub append: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimpleCommand {
    pub argv: Vec<String>,
    pub redirect: Option<Redirect>,
}

/// Commands joined by `|`.
pub type Pipeline = Vec<SimpleCommand>;

/// A full input line: pipelines, each followed by the connector that leads
/// to the next one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandLine {
    pub items: Vec<(Pipeline, Connector)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    UnterminatedQuote(char),
    UnexpectedToken(String),
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseError::UnterminatedQuote(q) => {
                write!(f, "bash: unexpected EOF while looking for matching `{q}'")
            }
            ParseError::UnexpectedToken(t) => write!(f, "bash: syntax error near unexpected token `{t}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Op(&'static str),
}

fn tokenize(line: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut in_word = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' => {
                in_word = true;
                let mut closed = false;
                while let Some(q) = chars.next() {
                    if q == c {
                        closed = true;
                        break;
                    }
                    if c == '"' && q == '\\' && matches!(chars.peek(), Some('"' | '\\' | '$' | '`')) {
                        word.push(chars.next().expect("peeked"));
                    } else {
                        word.push(q);
                    }
                }
                if !closed {
                    return Err(ParseError::UnterminatedQuote(c));
                }
            }
            '\\' => {
                in_word = true;
                if let Some(n) = chars.next() {
                    word.push(n);
                }
            }
            ';' | '|' | '&' | '>' => {
                if in_word {
                    tokens.push(Token::Word(std::mem::take(&mut word)));
                    in_word = false;
                }
                let doubled = chars.peek() == Some(&c) && c != ';';
                if doubled {
                    chars.next();
                }
                tokens.push(Token::Op(match (c, doubled) {
                    (';', _) => ";",
                    ('|', false) => "|",
                    ('|', true) => "||",
                    ('&', false) => "&",
                    ('&', true) => "&&",
                    ('>', false) => ">",
                    _ => ">>",
                }));
            }
            c if c.is_whitespace() => {
                if in_word {
                    tokens.push(Token::Word(std::mem::take(&mut word)));
                    in_word = false;
                }
            }
            c => {
                in_word = true;
                word.push(c);
            }
        }
    }
    if in_word {
        tokens.push(Token::Word(word));
    }
    Ok(tokens)
}

pub fn parse_line(line: &str) -> Result<CommandLine, ParseError> {
    let tokens = tokenize(line)?;
    let mut out = CommandLine::default();
    let mut pipeline: Pipeline = Vec::new();
    let mut current = SimpleCommand::default();
    let mut iter = tokens.into_iter().peekable();

    let finish_command = |current: &mut SimpleCommand, pipeline: &mut Pipeline, op: &str| {
        if current.argv.is_empty() {
            return Err(ParseError::UnexpectedToken(op.to_string()));
        }
        pipeline.push(std::mem::take(current));
        Ok(())
    };

    while let Some(tok) = iter.next() {
        match tok {
            Token::Word(w) => current.argv.push(w),
            Token::Op(op @ (">" | ">>")) => match iter.next() {
                Some(Token::Word(path)) => current.redirect = Some(Redirect { path, append: op == ">>" }),
                Some(Token::Op(o)) => return Err(ParseError::UnexpectedToken(o.to_string())),
                None => return Err(ParseError::UnexpectedToken("newline".into())),
            },
            Token::Op("|") => finish_command(&mut current, &mut pipeline, "|")?,
            Token::Op(op) => {
                finish_command(&mut current, &mut pipeline, op)?;
                let connector = match op {
                    "&&" => Connector::And,
                    "||" => Connector::Or,
                    _ => Connector::Seq,
                };
                out.items.push((std::mem::take(&mut pipeline), connector));
            }
        }
    }
    if !current.argv.is_empty() {
        pipeline.push(current);
    } else if !pipeline.is_empty() {
        return Err(ParseError::UnexpectedToken("newline".into()));
    }
    if !pipeline.is_empty() {
        out.items.push((pipeline, Connector::Seq));
    }
    Ok(out)
}

/// First word of the line as typed, for `bash: <cmd>: ...` messages.
pub fn program_name(line: &str) -> String {
    match tokenize(line) {
        Ok(tokens) => tokens.into_iter().find_map(|t| match t {
            Token::Word(w) => Some(w),
            Token::Op(_) => None,
        }),
        Err(_) => None,
    }
    .unwrap_or_else(|| line.split_whitespace().next().unwrap_or("").to_string())
}
