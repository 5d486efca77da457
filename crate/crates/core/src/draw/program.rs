use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MIN_REPEAT: u32 = 2;
pub const MAX_REPEAT: u32 = 9;

/// Motor primitives. Angles are in degrees; positive turns and sweeps go
/// counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motor {
    Line { length: f64 },
    Arc { radius: f64, sweep: f64 },
    Turn { angle: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Program {
    Motor(Motor),
    Concat(Box<Program>, Box<Program>),
    Repeat(u32, Box<Program>),
}

impl Program {
    pub fn line(length: f64) -> Self {
        Program::Motor(Motor::Line { length })
    }

    pub fn arc(radius: f64, sweep: f64) -> Self {
        Program::Motor(Motor::Arc { radius, sweep })
    }

    pub fn turn(angle: f64) -> Self {
        Program::Motor(Motor::Turn { angle })
    }

    pub fn concat(a: Program, b: Program) -> Self {
        Program::Concat(Box::new(a), Box::new(b))
    }

    /// Panics if `count` is outside `2..=9`; use [`Program::try_repeat`] for
    /// untrusted counts.
    pub fn repeat(count: u32, body: Program) -> Self {
        Self::try_repeat(count, body).expect("repeat count in range")
    }

    pub fn try_repeat(count: u32, body: Program) -> Result<Self> {
        if !(MIN_REPEAT..=MAX_REPEAT).contains(&count) {
            return Err(Error::invalid("repeat", format!("count {count} outside {MIN_REPEAT}..={MAX_REPEAT}")));
        }
        Ok(Program::Repeat(count, Box::new(body)))
    }

    /// Depth of the tree; a lone primitive has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Program::Motor(_) => 1,
            Program::Concat(a, b) => 1 + a.depth().max(b.depth()),
            Program::Repeat(_, b) => 1 + b.depth(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Program::Motor(_) => 1,
            Program::Concat(a, b) => 1 + a.node_count() + b.node_count(),
            Program::Repeat(_, b) => 1 + b.node_count(),
        }
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Program)) {
        f(self);
        match self {
            Program::Motor(_) => {}
            Program::Concat(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Program::Repeat(_, b) => b.walk(f),
        }
    }

    pub fn count_arcs(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |p| {
            if matches!(p, Program::Motor(Motor::Arc { .. })) {
                n += 1;
            }
        });
        n
    }
}

/// Static node counts: `(motor, control)`. Repeat bodies are counted once.
pub fn count_primitives(program: &Program) -> (usize, usize) {
    match program {
        Program::Motor(_) => (1, 0),
        Program::Concat(a, b) => {
            let (ma, ca) = count_primitives(a);
            let (mb, cb) = count_primitives(b);
            (ma + mb, ca + cb + 1)
        }
        Program::Repeat(_, b) => {
            let (m, c) = count_primitives(b);
            (m, c + 1)
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Motor(Motor::Line { length }) => write!(f, "(line {length})"),
            Program::Motor(Motor::Arc { radius, sweep }) => write!(f, "(arc {radius} {sweep})"),
            Program::Motor(Motor::Turn { angle }) => write!(f, "(turn {angle})"),
            Program::Concat(a, b) => write!(f, "(concat {a} {b})"),
            Program::Repeat(n, b) => write!(f, "(repeat {n} {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        let mut toks = Vec::new();
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => {
                    toks.push((i, Tok::Open));
                    i += 1;
                }
                b')' => {
                    toks.push((i, Tok::Close));
                    i += 1;
                }
                c if c.is_ascii_whitespace() => i += 1,
                _ => {
                    let start = i;
                    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                        i += 1;
                    }
                    toks.push((start, Tok::Atom(&src[start..i])));
                }
            }
        }
        Parser { toks, pos: 0, end: src.len() }
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.offset(), reason: reason.into() })
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok<'static>) -> Result<()> {
        let offset = self.offset();
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Parse { offset, reason: format!("expected {want:?}, found {other:?}") }),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let offset = self.offset();
        match self.next() {
            Some(Tok::Atom(a)) => match a.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse { offset, reason: format!("bad number {a:?}") }),
            },
            other => Err(Error::Parse { offset, reason: format!("expected number, found {other:?}") }),
        }
    }

    fn positive(&mut self, what: &str) -> Result<f64> {
        let offset = self.offset();
        let v = self.number()?;
        if v <= 0.0 {
            return Err(Error::Parse { offset, reason: format!("{what} must be positive") });
        }
        Ok(v)
    }

    fn program(&mut self) -> Result<Program> {
        self.expect(Tok::Open)?;
        let head_offset = self.offset();
        let p = match self.next() {
            Some(Tok::Atom("line")) => Program::line(self.positive("line length")?),
            Some(Tok::Atom("arc")) => {
                let r = self.positive("arc radius")?;
                Program::arc(r, self.number()?)
            }
            Some(Tok::Atom("turn")) => Program::turn(self.number()?),
            Some(Tok::Atom("concat")) => {
                let a = self.program()?;
                Program::concat(a, self.program()?)
            }
            Some(Tok::Atom("repeat")) => {
                let n = self.number()?;
                if n.fract() != 0.0 || !(f64::from(MIN_REPEAT)..=f64::from(MAX_REPEAT)).contains(&n) {
                    return Err(Error::Parse { offset: head_offset, reason: format!("repeat count {n} outside 2..=9") });
                }
                Program::Repeat(n as u32, Box::new(self.program()?))
            }
            other => {
                return Err(Error::Parse { offset: head_offset, reason: format!("unknown form {other:?}") })
            }
        };
        self.expect(Tok::Close)?;
        Ok(p)
    }
}

impl FromStr for Program {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let prog = p.program()?;
        if p.pos < p.toks.len() {
            return p.err("trailing input");
        }
        Ok(prog)
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
