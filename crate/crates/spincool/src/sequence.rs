//! Pulse-sequence representation, mini-DSL parser and process templates.
//!
//! The sequence DSL is line-oriented UTF-8 text (conventionally `.seq`):
//!
//! ```text
//! # Process 1, seven cooling rounds
//! repeat 7 {
//!     wait 5;
//!     pe H C2;
//!     wait 3;
//!     comp C1 C2 H;
//! }
//! measure H C2 C1;
//! ```
//!
//! Statements: `wait SECONDS;`, `pe A B;`, `comp TARGET A B;`,
//! `measure SPIN...;` and `repeat COUNT { ... }`. `#` starts a comment that
//! runs to the end of the line. Parse and validation errors carry 1-based
//! line:column positions.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::system::SpinSystem;

/// Maximum `repeat` nesting depth.
pub const MAX_NESTING: usize = 16;

/// Which calibrated efficiency a gate step uses when executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRole {
    Pe,
    Comp,
    /// Bypass degradation regardless of the gate model.
    Ideal,
}

/// One step of a pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceStep {
    /// Free evolution under T1 relaxation, seconds.
    Wait(f64),
    ApplyGate { gate: Gate, role: EtaRole },
    /// Record the listed spins in the trajectory.
    Measure(Vec<String>),
    Repeat { count: u32, body: Vec<SequenceStep> },
}

/// A validated sequence bound to a spin system.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub steps: Vec<SequenceStep>,
    pub label: String,
    /// Named delays (D1..D5) when built from a process template.
    pub delays: BTreeMap<String, f64>,
    system: Arc<SpinSystem>,
}

impl PulseSequence {
    pub fn system(&self) -> &Arc<SpinSystem> {
        &self.system
    }
}

// ---------------------------------------------------------------------------
// raw syntax tree (positions kept for binding diagnostics)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum RawStep {
    Wait(f64),
    Pe(Name, Name),
    Comp(Name, Name, Name),
    Measure(Vec<Name>),
    Repeat(u32, Vec<RawStep>),
}

#[derive(Debug, Clone, PartialEq)]
struct Name {
    text: String,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64, String),
    Semi,
    LBrace,
    RBrace,
}

#[derive(Debug, Clone)]
struct Positioned {
    token: Token,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Positioned>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    chars.next();
                    bump(c, &mut line, &mut col);
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            ';' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Positioned { token: Token::Semi, line: tl, col: tc });
            }
            '{' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Positioned { token: Token::LBrace, line: tl, col: tc });
            }
            '}' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Positioned { token: Token::RBrace, line: tl, col: tc });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut raw = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit()
                        || c == '.'
                        || c == '-'
                        || c == '+'
                        || c == 'e'
                        || c == 'E'
                    {
                        raw.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                let value: f64 = raw.parse().map_err(|_| {
                    Error::parse(tl, tc, format!("malformed number `{raw}`"))
                })?;
                out.push(Positioned { token: Token::Number(value, raw), line: tl, col: tc });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                out.push(Positioned { token: Token::Ident(ident), line: tl, col: tc });
            }
            other => {
                return Err(Error::parse(tl, tc, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Positioned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Positioned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Positioned> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_position(&self) -> (usize, usize) {
        self.tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn expect_semi(&mut self, what: &str) -> Result<()> {
        match self.next() {
            Some(Positioned { token: Token::Semi, .. }) => Ok(()),
            Some(p) => Err(Error::parse(p.line, p.col, format!("expected `;` after {what}"))),
            None => {
                let (l, c) = self.end_position();
                Err(Error::parse(l, c, format!("expected `;` after {what}")))
            }
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<Name> {
        match self.next() {
            Some(Positioned { token: Token::Ident(text), line, col }) => {
                Ok(Name { text, line, col })
            }
            Some(p) => Err(Error::parse(p.line, p.col, format!("expected {what}"))),
            None => {
                let (l, c) = self.end_position();
                Err(Error::parse(l, c, format!("expected {what}")))
            }
        }
    }

    fn parse_block(&mut self, depth: usize, top_level: bool) -> Result<Vec<RawStep>> {
        let mut steps = Vec::new();
        loop {
            let Some(p) = self.peek().cloned() else {
                if top_level {
                    return Ok(steps);
                }
                let (l, c) = self.end_position();
                return Err(Error::parse(l, c, "unexpected end of input, expected `}`"));
            };
            match p.token {
                Token::RBrace => {
                    if top_level {
                        return Err(Error::parse(p.line, p.col, "unexpected `}`"));
                    }
                    return Ok(steps);
                }
                Token::Ident(ref word) => {
                    self.pos += 1;
                    steps.push(self.parse_statement(word, p.line, p.col, depth)?);
                }
                _ => {
                    return Err(Error::parse(p.line, p.col, "expected a statement"));
                }
            }
        }
    }

    fn parse_statement(
        &mut self,
        word: &str,
        line: usize,
        col: usize,
        depth: usize,
    ) -> Result<RawStep> {
        match word {
            "wait" => {
                let (value, nl, nc) = self.expect_number("a duration in seconds")?;
                if value < 0.0 {
                    return Err(Error::parse(nl, nc, format!("negative wait duration {value}")));
                }
                self.expect_semi("wait duration")?;
                Ok(RawStep::Wait(value))
            }
            "pe" => {
                let a = self.expect_ident("two spin names after `pe`")?;
                let b = self.expect_ident("two spin names after `pe`")?;
                self.expect_semi("pe spins")?;
                Ok(RawStep::Pe(a, b))
            }
            "comp" => {
                let t = self.expect_ident("three spin names after `comp`")?;
                let a = self.expect_ident("three spin names after `comp`")?;
                let b = self.expect_ident("three spin names after `comp`")?;
                self.expect_semi("comp spins")?;
                Ok(RawStep::Comp(t, a, b))
            }
            "measure" => {
                let mut spins = vec![self.expect_ident("at least one spin name after `measure`")?];
                while matches!(self.peek(), Some(Positioned { token: Token::Ident(_), .. })) {
                    spins.push(self.expect_ident("spin name")?);
                }
                self.expect_semi("measure spins")?;
                Ok(RawStep::Measure(spins))
            }
            "repeat" => {
                if depth + 1 > MAX_NESTING {
                    return Err(Error::parse(
                        line,
                        col,
                        format!("repeat nesting deeper than {MAX_NESTING}"),
                    ));
                }
                let (value, nl, nc) = self.expect_number("a repeat count")?;
                if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
                    return Err(Error::parse(nl, nc, format!("repeat count must be a positive integer, got {value}")));
                }
                if value == 0.0 {
                    return Err(Error::parse(nl, nc, "repeat count must be at least 1"));
                }
                match self.next() {
                    Some(Positioned { token: Token::LBrace, .. }) => {}
                    Some(p) => {
                        return Err(Error::parse(p.line, p.col, "expected `{` after repeat count"));
                    }
                    None => {
                        let (l, c) = self.end_position();
                        return Err(Error::parse(l, c, "expected `{` after repeat count"));
                    }
                }
                let body = self.parse_block(depth + 1, false)?;
                self.next(); // consume `}`
                Ok(RawStep::Repeat(value as u32, body))
            }
            other => Err(Error::parse(line, col, format!("unknown statement `{other}`"))),
        }
    }

    fn expect_number(&mut self, what: &str) -> Result<(f64, usize, usize)> {
        match self.next() {
            Some(Positioned { token: Token::Number(v, _), line, col }) => Ok((v, line, col)),
            Some(p) => Err(Error::parse(p.line, p.col, format!("expected {what}"))),
            None => {
                let (l, c) = self.end_position();
                Err(Error::parse(l, c, format!("expected {what}")))
            }
        }
    }
}

fn parse_raw(text: &str) -> Result<Vec<RawStep>> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.parse_block(0, true)
}

/// Syntax-and-structure check without a system (spin names not validated).
pub fn check_syntax(text: &str) -> Result<()> {
    parse_raw(text).map(|_| ())
}

fn bind(steps: &[RawStep], system: &Arc<SpinSystem>) -> Result<Vec<SequenceStep>> {
    let lookup = |name: &Name| -> Result<String> {
        system.spin_index(&name.text).map_err(|_| {
            Error::parse(name.line, name.col, format!("unknown spin `{}`", name.text))
        })?;
        Ok(name.text.clone())
    };
    steps
        .iter()
        .map(|raw| {
            Ok(match raw {
                RawStep::Wait(t) => SequenceStep::Wait(*t),
                RawStep::Pe(a, b) => {
                    let gate = Gate::pe(system, &lookup(a)?, &lookup(b)?)
                        .map_err(|e| Error::parse(a.line, a.col, e.to_string()))?;
                    SequenceStep::ApplyGate { gate, role: EtaRole::Pe }
                }
                RawStep::Comp(t, a, b) => {
                    let gate = Gate::comp(system, &lookup(t)?, &lookup(a)?, &lookup(b)?)
                        .map_err(|e| Error::parse(t.line, t.col, e.to_string()))?;
                    SequenceStep::ApplyGate { gate, role: EtaRole::Comp }
                }
                RawStep::Measure(names) => SequenceStep::Measure(
                    names.iter().map(&lookup).collect::<Result<Vec<_>>>()?,
                ),
                RawStep::Repeat(count, body) => SequenceStep::Repeat {
                    count: *count,
                    body: bind(body, system)?,
                },
            })
        })
        .collect()
}

/// Parses DSL text and binds it to `system`.
pub fn parse_sequence(text: &str, system: &Arc<SpinSystem>) -> Result<PulseSequence> {
    let raw = parse_raw(text)?;
    Ok(PulseSequence {
        steps: bind(&raw, system)?,
        label: "sequence".into(),
        delays: BTreeMap::new(),
        system: Arc::clone(system),
    })
}

// ---------------------------------------------------------------------------
// process templates
// ---------------------------------------------------------------------------

/// The three cooling schedules, built for the H/C2/C1 spin names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    /// Rounds of [wait D2; PE(H->C2); wait D3; COMP(C1;C2,H)].
    P1,
    /// Process 1 followed by [wait D4; PE(H->C2)].
    P2,
    /// Process 2 followed by [wait D5].
    P3,
}

impl ProcessKind {
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(ProcessKind::P1),
            2 => Ok(ProcessKind::P2),
            3 => Ok(ProcessKind::P3),
            other => Err(Error::Parameter(format!(
                "process must be 1, 2 or 3, got {other}"
            ))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ProcessKind::P1 => 1,
            ProcessKind::P2 => 2,
            ProcessKind::P3 => 3,
        }
    }

    pub fn required_delays(self) -> &'static [&'static str] {
        match self {
            ProcessKind::P1 => &["D2", "D3"],
            ProcessKind::P2 => &["D2", "D3", "D4"],
            ProcessKind::P3 => &["D2", "D3", "D4", "D5"],
        }
    }

    /// Delay defaults from the experimental schedules.
    pub fn default_delays(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            ProcessKind::P1 => &[("D2", 5.0), ("D3", 3.0)],
            ProcessKind::P2 => &[("D2", 5.0), ("D3", 3.0), ("D4", 5.0)],
            ProcessKind::P3 => &[("D2", 5.0), ("D3", 3.0), ("D4", 6.0), ("D5", 6.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

/// Builds a process template for `system` (which must contain spins named
/// H, C2 and C1). `delays` must provide every delay the process uses.
pub fn build_process(
    kind: ProcessKind,
    system: &Arc<SpinSystem>,
    delays: &BTreeMap<String, f64>,
    rounds: u32,
) -> Result<PulseSequence> {
    for name in kind.required_delays() {
        if !delays.contains_key(*name) {
            return Err(Error::Config(format!(
                "process {} needs delay {name}",
                kind.number()
            )));
        }
    }
    for (name, &value) in delays {
        if !kind.required_delays().contains(&name.as_str()) {
            return Err(Error::Config(format!(
                "process {} does not use delay {name}",
                kind.number()
            )));
        }
        if !(value >= 0.0) {
            return Err(Error::Config(format!("delay {name} must be nonnegative")));
        }
    }
    let pe = || -> Result<SequenceStep> {
        Ok(SequenceStep::ApplyGate {
            gate: Gate::pe(system, "H", "C2")?,
            role: EtaRole::Pe,
        })
    };
    let comp = || -> Result<SequenceStep> {
        Ok(SequenceStep::ApplyGate {
            gate: Gate::comp(system, "C1", "C2", "H")?,
            role: EtaRole::Comp,
        })
    };

    let mut steps = Vec::new();
    if rounds > 0 {
        steps.push(SequenceStep::Repeat {
            count: rounds,
            body: vec![
                SequenceStep::Wait(delays["D2"]),
                pe()?,
                SequenceStep::Wait(delays["D3"]),
                comp()?,
            ],
        });
    }
    if matches!(kind, ProcessKind::P2 | ProcessKind::P3) {
        steps.push(SequenceStep::Wait(delays["D4"]));
        steps.push(pe()?);
    }
    if kind == ProcessKind::P3 {
        steps.push(SequenceStep::Wait(delays["D5"]));
    }
    steps.push(SequenceStep::Measure(system.spin_names()));

    Ok(PulseSequence {
        steps,
        label: format!("process-{}", kind.number()),
        delays: delays.clone(),
        system: Arc::clone(system),
    })
}
